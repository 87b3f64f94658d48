use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dist::Dist;
use crate::error::Error;
use crate::time::{ms, Micros};
use crate::trace::LOADGEN_PLATFORM;

fn zero() -> Dist {
    Dist::zero()
}

fn one() -> u32 {
    1
}

fn default_keep_alive() -> f64 {
    600_000.0
}

/// Parameters of one simulated platform.
///
/// `network` maps a peer platform id, `"loadgen"`, or the platform's own id to
/// the one-way latency of a message from this platform to that peer. A link
/// only needs to be configured on one side; a missing self entry means zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformSpec {
    pub id: String,
    #[serde(default = "zero")]
    pub cold_start: Dist,
    #[serde(default = "default_keep_alive")]
    pub keep_alive_ms: f64,
    #[serde(default = "one")]
    pub executor_concurrency: u32,
    #[serde(default)]
    pub network: BTreeMap<String, Dist>,
    /// Publisher start to triggered function start.
    #[serde(default = "zero")]
    pub trigger_delay: Dist,
    /// Trigger delay overrides keyed by the platform the event came from.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub trigger_delay_from: BTreeMap<String, Dist>,
    /// Execution time of the publisher function after it forwarded the event.
    #[serde(default = "zero")]
    pub publisher_exec: Dist,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_rate_limit: Option<u32>,
    /// Added to every timestamp this platform logs.
    #[serde(default)]
    pub clock_offset_ms: f64,
    /// Extra latency per KiB of payload sent from this platform.
    #[serde(default)]
    pub transfer_us_per_kib: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_label: Option<String>,
}

impl PlatformSpec {
    pub fn new(id: &str) -> Self {
        PlatformSpec {
            id: id.into(),
            cold_start: zero(),
            keep_alive_ms: default_keep_alive(),
            executor_concurrency: 1,
            network: BTreeMap::new(),
            trigger_delay: zero(),
            trigger_delay_from: BTreeMap::new(),
            publisher_exec: zero(),
            log_rate_limit: None,
            clock_offset_ms: 0.0,
            transfer_us_per_kib: 0.0,
            memory_label: None,
        }
    }

    pub fn keep_alive(&self) -> Micros {
        ms(self.keep_alive_ms)
    }

    pub fn clock_offset(&self) -> Micros {
        ms(self.clock_offset_ms)
    }

    pub fn trigger_delay_for(&self, origin: &str) -> &Dist {
        self.trigger_delay_from.get(origin).unwrap_or(&self.trigger_delay)
    }

    pub fn with_link(mut self, peer: &str, latency: Dist) -> Self {
        self.network.insert(peer.into(), latency);
        self
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |msg: String| Err(Error::Config(format!("platform `{}`: {msg}", self.id)));
        if !(self.keep_alive_ms > 0.0 && self.keep_alive_ms.is_finite()) {
            return bad(format!("keep_alive_ms must be positive, got {}", self.keep_alive_ms));
        }
        if self.executor_concurrency != 1 {
            return bad("executor_concurrency must be 1".into());
        }
        if !self.clock_offset_ms.is_finite() {
            return bad("clock_offset_ms must be finite".into());
        }
        if !(self.transfer_us_per_kib >= 0.0 && self.transfer_us_per_kib.is_finite()) {
            return bad("transfer_us_per_kib must be nonnegative".into());
        }
        if self.log_rate_limit == Some(0) {
            return bad("log_rate_limit must be positive; omit it for unlimited".into());
        }
        self.cold_start.validate()?;
        self.trigger_delay.validate()?;
        self.publisher_exec.validate()?;
        for d in self.network.values().chain(self.trigger_delay_from.values()) {
            d.validate()?;
        }
        Ok(())
    }
}

/// One-way latency from `from` to `to`, where either side may be the load
/// generator. Same-platform traffic without a self entry costs nothing.
pub fn link<'a>(platforms: &'a [PlatformSpec], from: &str, to: &str) -> Option<&'a Dist> {
    static ZERO: Dist = Dist::Constant(0.0);
    let find = |id: &str| platforms.iter().find(|p| p.id == id);
    if from == LOADGEN_PLATFORM {
        return find(to)?.network.get(LOADGEN_PLATFORM);
    }
    if to == LOADGEN_PLATFORM {
        return find(from)?.network.get(LOADGEN_PLATFORM);
    }
    let a = find(from)?;
    if let Some(d) = a.network.get(to) {
        return Some(d);
    }
    if from == to {
        return Some(&ZERO);
    }
    find(to)?.network.get(from)
}
