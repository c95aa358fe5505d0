use std::fmt;

use chrono::{DateTime, Datelike, SecondsFormat, Timelike, Utc};
use serde::{Deserialize, Serialize};

/// Platform limit on handle length.
pub const MAX_HANDLE_CHARS: usize = 15;

/// Earliest year a corpus may contain.
pub const EARLIEST_YEAR: i32 = 2006;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostKind {
    Original,
    Retweet,
    Quote,
}

impl fmt::Display for PostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PostKind::Original => "original",
            PostKind::Retweet => "retweet",
            PostKind::Quote => "quote",
        })
    }
}

/// One archived post, as stored one JSON object per line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostRecord {
    pub id: String,
    pub author_id: String,
    pub author_handle: String,
    #[serde(with = "rfc3339_secs")]
    pub created_at: DateTime<Utc>,
    pub text: String,
    pub like_count: u64,
    pub retweet_count: u64,
    #[serde(default)]
    pub post_geo: Option<String>,
    #[serde(default)]
    pub user_location: Option<String>,
    pub kind: PostKind,
}

impl PostRecord {
    /// Check the per-record invariants that the line format alone cannot
    /// express.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if self.author_id.trim().is_empty() {
            return Err("empty author_id".into());
        }
        let handle_len = self.author_handle.chars().count();
        if handle_len == 0 || handle_len > MAX_HANDLE_CHARS {
            return Err(format!(
                "author_handle must be 1..={MAX_HANDLE_CHARS} characters, got {handle_len}"
            ));
        }
        if self.created_at.year() < EARLIEST_YEAR {
            return Err(format!(
                "created_at {} predates {EARLIEST_YEAR}",
                self.created_at.to_rfc3339()
            ));
        }
        if self.kind == PostKind::Retweet && super::retweet::parse_marker(&self.text).is_none() {
            return Err("retweet text does not start with a retweet marker".into());
        }
        Ok(())
    }

    /// Total order used for every emitted corpus.
    pub fn sort_key(&self) -> (DateTime<Utc>, &str) {
        (self.created_at, self.id.as_str())
    }

    pub fn has_geodata(&self) -> bool {
        let present = |s: &Option<String>| s.as_deref().is_some_and(|v| !v.trim().is_empty());
        present(&self.post_geo) || present(&self.user_location)
    }
}

/// Sort into the canonical `(created_at, id)` order.
pub fn sort_canonical(records: &mut [PostRecord]) {
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

pub(crate) mod rfc3339_secs {
    use super::*;
    use serde::{de::Error as _, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&ts.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        parse(&raw).map_err(D::Error::custom)
    }

    pub fn parse(raw: &str) -> Result<DateTime<Utc>, String> {
        let ts = DateTime::parse_from_rfc3339(raw)
            .map_err(|e| format!("invalid RFC 3339 timestamp {raw:?}: {e}"))?
            .with_timezone(&Utc);
        // second precision
        Ok(ts.with_nanosecond(0).expect("zero nanoseconds is always valid"))
    }
}
