//! Reading archived post records, retweet repair and the filtration ledger.

pub mod fetch;
pub mod ledger;
pub mod record;
pub mod retweet;

use std::collections::HashSet;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::exec::{self, Execution};
use crate::{Error, Result};

pub use ledger::{Exclusion, FiltrationLedger, StageCount};
pub use record::{sort_canonical, PostKind, PostRecord};
pub use retweet::{detect_truncated_retweet, repair_retweets, RepairOutcome, RepairStats};

/// A line that could not be turned into a record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineError {
    /// 1-based line number in the source file.
    pub line: usize,
    pub message: String,
    pub raw: String,
}

#[derive(Clone, Debug, Default)]
pub struct CorpusRead {
    /// Valid records in file order, first occurrence of each id.
    pub records: Vec<PostRecord>,
    pub errors: Vec<LineError>,
    pub duplicates: Vec<LineError>,
}

fn parse_line(line: &str) -> Result<PostRecord, String> {
    let rec: PostRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    rec.validate()?;
    Ok(rec)
}

/// Parse line-delimited records. Blank lines are skipped; malformed lines
/// and repeated ids are reported rather than aborting.
pub fn parse_corpus(text: &str, exec: Execution) -> CorpusRead {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();
    let parsed = exec::map(exec, &lines, |&(_, l)| parse_line(l));

    let mut out = CorpusRead::default();
    let mut seen = HashSet::new();
    for ((line, raw), result) in lines.into_iter().zip(parsed) {
        match result {
            Ok(rec) => {
                if seen.insert(rec.id.clone()) {
                    out.records.push(rec);
                } else {
                    log::warn!("line {line}: duplicate id {:?} ignored", rec.id);
                    out.duplicates.push(LineError {
                        line,
                        message: format!("duplicate id {:?}", rec.id),
                        raw: raw.to_string(),
                    });
                }
            }
            Err(message) => out.errors.push(LineError {
                line,
                message,
                raw: raw.to_string(),
            }),
        }
    }
    out
}

pub fn read_corpus(path: &Path, exec: Execution) -> Result<CorpusRead> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_corpus(&text, exec))
}

/// Inclusive collection window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TimeWindow {
    pub from: Option<DateTime<Utc>>,
    pub to: Option<DateTime<Utc>>,
}

impl TimeWindow {
    pub fn contains(&self, ts: DateTime<Utc>) -> bool {
        self.from.is_none_or(|f| ts >= f) && self.to.is_none_or(|t| ts <= t)
    }
}

#[derive(Clone, Debug)]
pub struct IngestOutput {
    /// Repaired corpus in `(created_at, id)` order.
    pub records: Vec<PostRecord>,
    pub ledger: FiltrationLedger,
    pub repair: RepairStats,
    pub dropped_ids: Vec<String>,
    pub outside_window: usize,
}

/// Window the parsed corpus, repair truncated retweets and open the ledger.
///
/// Records outside `window` are outside the collection query and never
/// enter the ledger.
pub fn ingest(records: Vec<PostRecord>, window: &TimeWindow) -> Result<IngestOutput> {
    let before = records.len();
    let records: Vec<PostRecord> = records
        .into_iter()
        .filter(|r| window.contains(r.created_at))
        .collect();
    let outside_window = before - records.len();

    let total_in = records.len() as u64;
    let mut ledger = FiltrationLedger::new(total_in);
    let RepairOutcome {
        mut records,
        mut dropped_ids,
        stats,
    } = repair_retweets(records);
    ledger.record_stage(
        "ingest",
        total_in,
        &[(Exclusion::UnresolvableRetweet, stats.dropped as u64)],
    )?;
    sort_canonical(&mut records);
    dropped_ids.sort();
    Ok(IngestOutput {
        records,
        ledger,
        repair: stats,
        dropped_ids,
        outside_window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, text: &str) -> String {
        format!(
            r#"{{"id":"{id}","author_id":"a","author_handle":"h","created_at":"2020-01-0{id}T00:00:00Z","text":"{text}","like_count":0,"retweet_count":0,"post_geo":null,"user_location":null,"kind":"original"}}"#
        )
    }

    #[test]
    fn three_good_lines() {
        let text = [line("1", "a"), line("2", "b"), line("3", "c")].join("\n");
        let read = parse_corpus(&text, Execution::Parallel);
        assert_eq!(read.records.len(), 3);
        assert!(read.errors.is_empty());
        assert_eq!(read.records[2].id, "3");
    }

    #[test]
    fn truncated_line_is_reported_by_number() {
        let bad = line("3", "c");
        let text = [line("1", "a"), line("2", "b"), bad[..bad.len() / 2].to_string()].join("\n");
        let read = parse_corpus(&text, Execution::Sequential);
        assert_eq!(read.records.len(), 2);
        assert_eq!(read.errors.len(), 1);
        assert_eq!(read.errors[0].line, 3);
    }

    #[test]
    fn duplicate_ids_keep_first() {
        let text = [line("1", "first"), line("1", "second")].join("\n");
        let read = parse_corpus(&text, Execution::Sequential);
        assert_eq!(read.records.len(), 1);
        assert_eq!(read.records[0].text, "first");
        assert_eq!(read.duplicates[0].line, 2);
    }

    #[test]
    fn window_filters_before_ledger() {
        let text = [line("1", "a"), line("2", "b"), line("3", "c")].join("\n");
        let read = parse_corpus(&text, Execution::Sequential);
        let window = TimeWindow {
            from: Some(record::rfc3339_secs::parse("2020-01-02T00:00:00Z").unwrap()),
            to: None,
        };
        let out = ingest(read.records, &window).unwrap();
        assert_eq!(out.outside_window, 1);
        assert_eq!(out.ledger.total_in, 2);
        assert!(out.ledger.is_conserved());
    }
}
