//! Aggregate statistics: yearly user statistics, sentiment share series,
//! normalized regional trends and survey comparisons.

pub mod series;
pub mod survey;
pub mod users;

use std::fmt;

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};

use crate::classify::BinaryLabel;
use crate::geocode::{RegionCode, ResolvedPost};
use crate::ingest::PostRecord;

pub use series::{
    long_format, normalized_regional_trends, sentiment_series, series_by_region, Granularity,
    LongRow, NormalizedPoint, RegionFilter, RegionTimeSeries,
};
pub use survey::{read_survey, survey_delta, CoverageGap, SurveyComparison, SurveyRow};
pub use users::{user_frequency_distribution, yearly_user_stats, YearlyUserStats};

/// Region key used for the whole-country aggregate.
pub const ALL_REGIONS: &str = "ALL";

/// Author and timestamp of a post.
pub trait PostMeta {
    fn author_id(&self) -> &str;
    fn created_at(&self) -> DateTime<Utc>;
}

impl PostMeta for PostRecord {
    fn author_id(&self) -> &str {
        &self.author_id
    }
    fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }
}

impl PostMeta for ResolvedPost {
    fn author_id(&self) -> &str {
        &self.record.author_id
    }
    fn created_at(&self) -> DateTime<Utc> {
        self.record.created_at
    }
}

/// A retained post with its region and binary sentiment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifiedPost {
    pub post_id: String,
    pub author_id: String,
    #[serde(with = "crate::ingest::record::rfc3339_secs")]
    pub created_at: DateTime<Utc>,
    pub region: RegionCode,
    pub label: BinaryLabel,
}

impl PostMeta for ClassifiedPost {
    fn author_id(&self) -> &str {
        &self.author_id
    }
    fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }
}

/// Calendar period in UTC.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Period {
    Year(i32),
    Month(i32, u32),
}

impl Period {
    pub fn of(ts: DateTime<Utc>, granularity: Granularity) -> Self {
        match granularity {
            Granularity::Year => Period::Year(ts.year()),
            Granularity::Month => Period::Month(ts.year(), ts.month()),
        }
    }

    pub fn next(self) -> Self {
        match self {
            Period::Year(y) => Period::Year(y + 1),
            Period::Month(y, 12) => Period::Month(y + 1, 1),
            Period::Month(y, m) => Period::Month(y, m + 1),
        }
    }

    pub fn year(self) -> i32 {
        match self {
            Period::Year(y) | Period::Month(y, _) => y,
        }
    }

    /// Every period from `first` to `last` inclusive.
    pub fn range(first: Period, last: Period) -> Vec<Period> {
        let mut out = Vec::new();
        let mut p = first;
        while p <= last {
            out.push(p);
            p = p.next();
        }
        out
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Year(y) => write!(f, "{y}"),
            Period::Month(y, m) => write!(f, "{y}-{m:02}"),
        }
    }
}

impl Serialize for Period {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Round to two decimals for display.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn period_arithmetic() {
        assert_eq!(Period::Month(2019, 12).next(), Period::Month(2020, 1));
        assert_eq!(Period::range(Period::Month(2019, 11), Period::Month(2020, 2)).len(), 4);
        assert_eq!(Period::Month(2020, 6).to_string(), "2020-06");
        assert_eq!(Period::Year(2020).to_string(), "2020");
        assert!(Period::range(Period::Year(2021), Period::Year(2020)).is_empty());
    }
}
