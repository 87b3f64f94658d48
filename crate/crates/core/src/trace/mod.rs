//! Instrumentation shared by the load generator, the platforms and the
//! analyzer: id generation, cold-start detection, the record schema and
//! rate-limited log sinks.

mod ids;
mod record;

pub use ids::{ContextId, ExecutorKey, IdParseError, IdSource, PairId};
pub use record::{
    header_line, CallMode, DbOp, RecordBody, RecordError, RecordKind, TraceRecord, DROPPED_TAG, FIELD_COUNT,
    HEADER_TAG, LOADGEN_PLATFORM, PHASE_TAG, SCHEMA_VERSION,
};

use crate::time::{Micros, MICROS_PER_SEC};

/// Per-executor environment variable used for cold-start detection.
///
/// The first observation creates the key and reports a cold start; every
/// later observation returns the same key and `false`.
#[derive(Debug, Clone, Default)]
pub struct ExecutorEnv {
    key: Option<ExecutorKey>,
}

impl ExecutorEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, ids: &mut IdSource) -> (ExecutorKey, bool) {
        match self.key {
            Some(key) => (key, false),
            None => {
                let key = ids.new_executor_key();
                self.key = Some(key);
                (key, true)
            }
        }
    }

    pub fn key(&self) -> Option<ExecutorKey> {
        self.key
    }
}

/// Caps accepted lines per fixed one-second window of virtual time.
#[derive(Debug, Clone)]
pub struct RateLimiter {
    limit: Option<u32>,
    window: Option<Micros>,
    used: u32,
    dropped: u64,
}

impl RateLimiter {
    pub fn new(lines_per_second: Option<u32>) -> Self {
        Self { limit: lines_per_second, window: None, used: 0, dropped: 0 }
    }

    pub fn unlimited() -> Self {
        Self::new(None)
    }

    /// Returns `true` if a line emitted at `at` is accepted.
    pub fn admit(&mut self, at: Micros) -> bool {
        let Some(limit) = self.limit else {
            return true;
        };
        let window = at.div_euclid(MICROS_PER_SEC);
        if self.window != Some(window) {
            self.window = Some(window);
            self.used = 0;
        }
        if self.used < limit {
            self.used += 1;
            true
        } else {
            self.dropped += 1;
            false
        }
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Emission {
    Accepted,
    Dropped,
}

/// A platform's standard log: serialized lines plus the drop counter.
#[derive(Debug, Clone)]
pub struct LogSink {
    limiter: RateLimiter,
    lines: Vec<String>,
}

impl LogSink {
    pub fn new(limiter: RateLimiter) -> Self {
        Self { limiter, lines: Vec::new() }
    }

    /// Serializes `record` emitted at virtual time `at`.
    pub fn emit(&mut self, record: &TraceRecord, at: Micros) -> Result<Emission, RecordError> {
        record.validate()?;
        if self.limiter.admit(at) {
            self.lines.push(record.to_line());
            Ok(Emission::Accepted)
        } else {
            Ok(Emission::Dropped)
        }
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn into_lines(self) -> Vec<String> {
        self.lines
    }

    pub fn dropped(&self) -> u64 {
        self.limiter.dropped()
    }
}

pub fn dropped_line(run_id: &str, platform: &str, count: u64) -> String {
    format!("{DROPPED_TAG}\t{run_id}\t{platform}\t{count}")
}
