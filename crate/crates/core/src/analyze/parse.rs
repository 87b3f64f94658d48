use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::Error;
use crate::loadgen::PhaseWindow;
use crate::trace::{TraceRecord, DROPPED_TAG, HEADER_TAG, PHASE_TAG, SCHEMA_VERSION};

/// Records of one log plus everything learned while reading it.
#[derive(Debug, Clone, Default)]
pub struct ParsedLog {
    pub records: Vec<TraceRecord>,
    pub report: ParseReport,
    /// Lines lost to log rate limits, per platform.
    pub dropped: BTreeMap<String, u64>,
    pub phases: Vec<PhaseWindow>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    pub lines: usize,
    pub parse_errors: usize,
    /// Line number and reason for the first few errors.
    pub first_errors: Vec<(usize, String)>,
    pub run_ids: BTreeSet<String>,
}

const KEPT_ERRORS: usize = 10;

impl ParsedLog {
    pub fn total_dropped(&self) -> u64 {
        self.dropped.values().sum()
    }

    fn error(&mut self, line_no: usize, why: String) {
        self.report.parse_errors += 1;
        if self.report.first_errors.len() < KEPT_ERRORS {
            self.report.first_errors.push((line_no, why));
        }
    }
}

/// Parses log lines. Malformed lines are counted and skipped; a header with
/// an unknown schema version is fatal.
pub fn parse_logs<'a>(lines: impl IntoIterator<Item = &'a str>) -> Result<ParsedLog, Error> {
    let mut log = ParsedLog::default();
    for (i, raw) in lines.into_iter().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        log.report.lines += 1;
        if let Some(rest) = line.strip_prefix(HEADER_TAG) {
            let version = rest.trim_start_matches('\t');
            if version != format!("v{SCHEMA_VERSION}") {
                return Err(Error::UnsupportedSchemaVersion(version.to_string()));
            }
            continue;
        }
        if line.starts_with(DROPPED_TAG) {
            let f: Vec<&str> = line.split('\t').collect();
            match (f.len(), f.get(3).and_then(|c| c.parse::<u64>().ok())) {
                (4, Some(count)) => *log.dropped.entry(f[2].to_string()).or_default() += count,
                _ => log.error(line_no, "bad drop counter line".into()),
            }
            continue;
        }
        if line.starts_with(PHASE_TAG) {
            match PhaseWindow::parse_line(line) {
                Some((_, window)) => log.phases.push(window),
                None => log.error(line_no, "bad phase line".into()),
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        match line.parse::<TraceRecord>() {
            Ok(record) => {
                log.report.run_ids.insert(record.run_id.clone());
                log.records.push(record);
            }
            Err(e) => log.error(line_no, e.to_string()),
        }
    }
    Ok(log)
}
