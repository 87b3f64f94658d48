//! Trace records and their log line format.
//!
//! A log file starts with a version header and then holds one record per
//! line, thirteen tab-separated columns:
//!
//! ```text
//! runId platformId recordKind functionName contextId pairId calleeName|- mode|-
//! startTsMicros endTsMicros executorKey|callerPairId|- coldStart|- dbOpKind|-
//! ```
//!
//! Column 11 holds the executor key for `INVOCATION` lines. For
//! `OUTGOING_CALL` and `DB_CALL` lines emitted by a function it holds the
//! inbound pair id of the emitting invocation, which is how calls are
//! attached to their caller. Load generator lines carry `-`.
//!
//! Lines starting with `#` are metadata: the header, drop counters and
//! phase boundaries.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ids::{ContextId, ExecutorKey, PairId};
use crate::time::Micros;

pub const SCHEMA_VERSION: u32 = 1;
pub const HEADER_TAG: &str = "#trace-log";
pub const DROPPED_TAG: &str = "#dropped";
pub const PHASE_TAG: &str = "#phase";
pub const LOADGEN_PLATFORM: &str = "loadgen";
pub const FIELD_COUNT: usize = 13;

pub fn header_line() -> String {
    format!("{HEADER_TAG}\tv{SCHEMA_VERSION}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallMode {
    Sync,
    Async,
}

impl CallMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CallMode::Sync => "sync",
            CallMode::Async => "async",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DbOp {
    Get,
    Set,
}

impl DbOp {
    pub fn as_str(self) -> &'static str {
        match self {
            DbOp::Get => "get",
            DbOp::Set => "set",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordKind {
    Invocation,
    OutgoingCall,
    DbCall,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Invocation => "INVOCATION",
            RecordKind::OutgoingCall => "OUTGOING_CALL",
            RecordKind::DbCall => "DB_CALL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordBody {
    Invocation {
        pair: PairId,
        executor: ExecutorKey,
        cold_start: bool,
    },
    OutgoingCall {
        pair: PairId,
        callee: String,
        mode: CallMode,
        /// Inbound pair of the emitting invocation; `None` for load generator calls.
        caller: Option<PairId>,
    },
    DbCall {
        op: DbOp,
        service: String,
        caller: PairId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub run_id: String,
    pub platform: String,
    pub function: String,
    pub context: ContextId,
    /// Logged start, already shifted by the platform clock offset.
    pub start: Micros,
    pub end: Micros,
    pub body: RecordBody,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecordError {
    #[error("malformed record: {0}")]
    Malformed(String),
}

impl TraceRecord {
    pub fn kind(&self) -> RecordKind {
        match self.body {
            RecordBody::Invocation { .. } => RecordKind::Invocation,
            RecordBody::OutgoingCall { .. } => RecordKind::OutgoingCall,
            RecordBody::DbCall { .. } => RecordKind::DbCall,
        }
    }

    pub fn duration(&self) -> Micros {
        self.end - self.start
    }

    /// Pair id carried in the pair column (inbound for invocations, outbound for calls).
    pub fn pair(&self) -> Option<PairId> {
        match &self.body {
            RecordBody::Invocation { pair, .. } | RecordBody::OutgoingCall { pair, .. } => Some(*pair),
            RecordBody::DbCall { .. } => None,
        }
    }

    /// Inbound pair of the invocation that emitted this call record.
    pub fn caller(&self) -> Option<PairId> {
        match &self.body {
            RecordBody::OutgoingCall { caller, .. } => *caller,
            RecordBody::DbCall { caller, .. } => Some(*caller),
            RecordBody::Invocation { .. } => None,
        }
    }

    pub fn is_loadgen(&self) -> bool {
        self.platform == LOADGEN_PLATFORM
    }

    pub fn validate(&self) -> Result<(), RecordError> {
        if self.end < self.start {
            return Err(RecordError::Malformed(format!(
                "end {} before start {} ({} on {})",
                self.end, self.start, self.function, self.platform
            )));
        }
        for (what, value) in [("run id", &self.run_id), ("platform", &self.platform), ("function", &self.function)] {
            if value.is_empty() || value.contains(['\t', '\n', '\r']) || value.starts_with('#') {
                return Err(RecordError::Malformed(format!("invalid {what} `{value}`")));
            }
        }
        match &self.body {
            RecordBody::OutgoingCall { callee, .. } if callee.is_empty() || callee.contains(['\t', '\n']) => {
                Err(RecordError::Malformed(format!("invalid callee `{callee}`")))
            }
            RecordBody::DbCall { service, .. } if service.is_empty() || service.contains(['\t', '\n']) => {
                Err(RecordError::Malformed(format!("invalid service `{service}`")))
            }
            _ => Ok(()),
        }
    }

    /// Serializes to one log line (no trailing newline).
    pub fn to_line(&self) -> String {
        let dash = || "-".to_string();
        let (pair, callee, mode, col11, cold, db) = match &self.body {
            RecordBody::Invocation { pair, executor, cold_start } => (
                pair.to_string(),
                dash(),
                dash(),
                executor.to_string(),
                if *cold_start { "1" } else { "0" }.to_string(),
                dash(),
            ),
            RecordBody::OutgoingCall { pair, callee, mode, caller } => (
                pair.to_string(),
                callee.clone(),
                mode.as_str().to_string(),
                caller.map(|c| c.to_string()).unwrap_or_else(dash),
                dash(),
                dash(),
            ),
            RecordBody::DbCall { op, service, caller } => (
                dash(),
                service.clone(),
                CallMode::Sync.as_str().to_string(),
                caller.to_string(),
                dash(),
                op.as_str().to_string(),
            ),
        };
        [
            self.run_id.clone(),
            self.platform.clone(),
            self.kind().as_str().to_string(),
            self.function.clone(),
            self.context.to_string(),
            pair,
            callee,
            mode,
            self.start.to_string(),
            self.end.to_string(),
            col11,
            cold,
            db,
        ]
        .join("\t")
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

impl FromStr for TraceRecord {
    type Err = RecordError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| RecordError::Malformed(format!("{why}: `{line}`"));
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != FIELD_COUNT {
            return Err(bad(&format!("expected {FIELD_COUNT} fields, found {}", fields.len())));
        }
        let pair = |s: &str| s.parse::<PairId>().map_err(|e| bad(&e.to_string()));
        let time = |s: &str| s.parse::<Micros>().map_err(|_| bad("bad timestamp"));
        let context = fields[4].parse::<ContextId>().map_err(|e| bad(&e.to_string()))?;
        let mode = |s: &str| match s {
            "sync" => Ok(CallMode::Sync),
            "async" => Ok(CallMode::Async),
            _ => Err(bad("bad mode")),
        };
        let body = match fields[2] {
            "INVOCATION" => RecordBody::Invocation {
                pair: pair(fields[5])?,
                executor: fields[10].parse().map_err(|_| bad("bad executor key"))?,
                cold_start: match fields[11] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad("bad cold start flag")),
                },
            },
            "OUTGOING_CALL" => RecordBody::OutgoingCall {
                pair: pair(fields[5])?,
                callee: fields[6].to_string(),
                mode: mode(fields[7])?,
                caller: match fields[10] {
                    "-" => None,
                    s => Some(pair(s)?),
                },
            },
            "DB_CALL" => RecordBody::DbCall {
                op: match fields[12] {
                    "get" => DbOp::Get,
                    "set" => DbOp::Set,
                    _ => return Err(bad("bad db op")),
                },
                service: fields[6].to_string(),
                caller: pair(fields[10])?,
            },
            _ => return Err(bad("unknown record kind")),
        };
        let record = TraceRecord {
            run_id: fields[0].to_string(),
            platform: fields[1].to_string(),
            function: fields[3].to_string(),
            context,
            start: time(fields[8])?,
            end: time(fields[9])?,
            body,
        };
        record.validate()?;
        // Canonical form check: the line must be exactly what we would write.
        if record.to_line() != line {
            return Err(bad("non-canonical field values"));
        }
        Ok(record)
    }
}
