//! Comparison of yearly negative shares against survey results.

use std::collections::HashMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{Period, RegionTimeSeries};
use crate::{Error, Result};

/// `region,year,share_negative,source`; region is a NUTS3 code or `ALL`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurveyRow {
    pub region: String,
    pub year: i32,
    pub share_negative: f64,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurveyComparison {
    pub region: String,
    pub year: i32,
    pub source: String,
    pub twitter_share_negative: f64,
    pub survey_share_negative: f64,
    pub delta: f64,
}

/// A survey row with no matching yearly share in the post data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageGap {
    pub region: String,
    pub year: i32,
    pub source: String,
    pub reason: &'static str,
}

pub fn read_survey<R: Read>(reader: R) -> Result<Vec<SurveyRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize::<SurveyRow>()
        .enumerate()
        .map(|(i, r)| {
            let row = i + 2;
            let r = r.map_err(|e| Error::Input(format!("survey row {row}: {e}")))?;
            if !(0.0..=1.0).contains(&r.share_negative) {
                return Err(Error::Input(format!(
                    "survey row {row}: share_negative {} outside [0, 1]",
                    r.share_negative
                )));
            }
            Ok(r)
        })
        .collect()
}

/// Inner join on (region, year) against yearly series. Survey rows with no
/// yearly share go to the coverage report.
pub fn survey_delta(yearly: &[RegionTimeSeries], survey: &[SurveyRow]) -> (Vec<SurveyComparison>, Vec<CoverageGap>) {
    let twitter: HashMap<(&str, i32), Option<f64>> = yearly
        .iter()
        .filter_map(|s| match s.period {
            Period::Year(y) => Some(((s.region.as_str(), y), s.share_negative)),
            Period::Month(..) => None,
        })
        .collect();
    let mut matched = Vec::new();
    let mut gaps = Vec::new();
    for row in survey {
        match twitter.get(&(row.region.as_str(), row.year)) {
            Some(Some(share)) => matched.push(SurveyComparison {
                region: row.region.clone(),
                year: row.year,
                source: row.source.clone(),
                twitter_share_negative: *share,
                survey_share_negative: row.share_negative,
                delta: share - row.share_negative,
            }),
            Some(None) => gaps.push(CoverageGap {
                region: row.region.clone(),
                year: row.year,
                source: row.source.clone(),
                reason: "no posts in year",
            }),
            None => gaps.push(CoverageGap {
                region: row.region.clone(),
                year: row.year,
                source: row.source.clone(),
                reason: "year or region absent from post data",
            }),
        }
    }
    (matched, gaps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn yearly(region: &str, year: i32, neg: u64, non: u64) -> RegionTimeSeries {
        RegionTimeSeries {
            region: region.into(),
            period: Period::Year(year),
            negative_count: neg,
            non_negative_count: non,
            share_negative: (neg + non > 0).then(|| neg as f64 / (neg + non) as f64),
        }
    }

    fn row(region: &str, year: i32, share: f64) -> SurveyRow {
        SurveyRow {
            region: region.into(),
            year,
            share_negative: share,
            source: "panel".into(),
        }
    }

    #[test]
    fn delta_examples() {
        let t = [yearly("ALL", 2019, 3, 7), yearly("ALL", 2020, 0, 0)];
        let (m, gaps) = survey_delta(&t, &[row("ALL", 2019, 0.4), row("ALL", 2018, 0.2), row("ALL", 2020, 0.5)]);
        assert_eq!(m.len(), 1);
        assert!((m[0].delta - (-0.1)).abs() < 1e-12);
        assert_eq!(gaps.len(), 2);
        assert_eq!(gaps[0].year, 2018);
    }

    #[test]
    fn equal_sources_give_zero_delta() {
        let t = [yearly("NO081", 2019, 1, 3), yearly("NO0A2", 2019, 2, 2)];
        let (m, gaps) = survey_delta(&t, &[row("NO081", 2019, 0.25), row("NO0A2", 2019, 0.5)]);
        assert!(gaps.is_empty());
        assert!(m.iter().all(|c| c.delta == 0.0));
    }

    #[test]
    fn malformed_survey_names_row() {
        let bad = "region,year,share_negative,source\nALL,2019,0.3,x\nALL,twenty,0.3,x\n";
        let err = read_survey(bad.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");
        let out_of_range = "region,year,share_negative,source\nALL,2019,1.3,x\n";
        assert!(read_survey(out_of_range.as_bytes()).is_err());
    }
}
