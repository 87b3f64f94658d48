use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(into = "String", try_from = "String")]
        pub struct $name(pub u128);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{:032x}", self.0)
            }
        }

        impl FromStr for $name {
            type Err = IdParseError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                if s.len() != 32 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
                    return Err(IdParseError(s.to_string()));
                }
                u128::from_str_radix(s, 16)
                    .map($name)
                    .map_err(|_| IdParseError(s.to_string()))
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.to_string()
            }
        }

        impl TryFrom<String> for $name {
            type Error = IdParseError;
            fn try_from(s: String) -> Result<Self, Self::Error> {
                s.parse()
            }
        }
    };
}

id_type!(
    /// Identifies one function chain (one workflow instance).
    ContextId
);
id_type!(
    /// Links one outgoing call to the invocation it caused.
    PairId
);
id_type!(
    /// Random key an executor stores on first use.
    ExecutorKey
);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("not a 32-digit hex id: `{0}`")]
pub struct IdParseError(pub String);

/// Seeded source of 128-bit identifiers.
///
/// Each id kind has its own namespace; an id is never issued twice within a
/// namespace (a colliding draw is redrawn).
#[derive(Debug, Clone)]
pub struct IdSource {
    rng: ChaCha8Rng,
    contexts: HashSet<u128>,
    pairs: HashSet<u128>,
    executors: HashSet<u128>,
}

impl IdSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            contexts: HashSet::new(),
            pairs: HashSet::new(),
            executors: HashSet::new(),
        }
    }

    fn fresh(rng: &mut ChaCha8Rng, issued: &mut HashSet<u128>) -> u128 {
        loop {
            let id: u128 = rng.random();
            if issued.insert(id) {
                return id;
            }
        }
    }

    pub fn new_context(&mut self) -> ContextId {
        ContextId(Self::fresh(&mut self.rng, &mut self.contexts))
    }

    pub fn new_pair(&mut self) -> PairId {
        PairId(Self::fresh(&mut self.rng, &mut self.pairs))
    }

    pub fn new_executor_key(&mut self) -> ExecutorKey {
        ExecutorKey(Self::fresh(&mut self.rng, &mut self.executors))
    }
}
