use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{ClassifiedPost, Period, ALL_REGIONS};
use crate::classify::BinaryLabel;
use crate::exec::{self, Execution};
use crate::geocode::RegionCode;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Year,
    Month,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RegionFilter {
    All,
    Region(RegionCode),
}

impl RegionFilter {
    pub fn key(&self) -> &str {
        match self {
            RegionFilter::All => ALL_REGIONS,
            RegionFilter::Region(r) => r.as_str(),
        }
    }

    fn admits(&self, region: &RegionCode) -> bool {
        match self {
            RegionFilter::All => true,
            RegionFilter::Region(r) => r == region,
        }
    }
}

/// Negative and non-negative counts for one region and period. The share is
/// absent for periods without posts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionTimeSeries {
    pub region: String,
    pub period: Period,
    pub negative_count: u64,
    pub non_negative_count: u64,
    pub share_negative: Option<f64>,
}

impl RegionTimeSeries {
    pub fn total(&self) -> u64 {
        self.negative_count + self.non_negative_count
    }
}

type Counts = HashMap<(RegionCode, Period), [u64; 2]>;

fn count(posts: &[ClassifiedPost], granularity: Granularity, exec: Execution) -> Counts {
    exec::fold_merge(
        exec,
        posts,
        Counts::new,
        |mut m, p| {
            let slot = m
                .entry((p.region.clone(), Period::of(p.created_at, granularity)))
                .or_default();
            slot[p.label.index()] += 1;
            m
        },
        |mut a, b| {
            for (k, v) in b {
                let slot = a.entry(k).or_default();
                slot[0] += v[0];
                slot[1] += v[1];
            }
            a
        },
    )
}

fn window(posts: &[ClassifiedPost], granularity: Granularity) -> Vec<Period> {
    let first = posts.iter().map(|p| p.created_at).min();
    let last = posts.iter().map(|p| p.created_at).max();
    match (first, last) {
        (Some(f), Some(l)) => Period::range(Period::of(f, granularity), Period::of(l, granularity)),
        _ => Vec::new(),
    }
}

fn emit(key: &str, periods: &[Period], counts: &BTreeMap<Period, [u64; 2]>) -> Vec<RegionTimeSeries> {
    periods
        .iter()
        .map(|&period| {
            let [neg, non] = counts.get(&period).copied().unwrap_or_default();
            RegionTimeSeries {
                region: key.to_string(),
                period,
                negative_count: neg,
                non_negative_count: non,
                share_negative: (neg + non > 0).then(|| neg as f64 / (neg + non) as f64),
            }
        })
        .collect()
}

/// Gap-free series over the window spanned by all of `posts`, restricted to
/// the filtered region.
pub fn sentiment_series(
    posts: &[ClassifiedPost],
    granularity: Granularity,
    filter: &RegionFilter,
    exec: Execution,
) -> Vec<RegionTimeSeries> {
    let periods = window(posts, granularity);
    let mut merged: BTreeMap<Period, [u64; 2]> = BTreeMap::new();
    for ((region, period), c) in count(posts, granularity, exec) {
        if filter.admits(&region) {
            let slot = merged.entry(period).or_default();
            slot[0] += c[0];
            slot[1] += c[1];
        }
    }
    emit(filter.key(), &periods, &merged)
}

/// The `ALL` series followed by one series per region, all on the same
/// period grid.
pub fn series_by_region(
    posts: &[ClassifiedPost],
    granularity: Granularity,
    regions: &[RegionCode],
    exec: Execution,
) -> Vec<RegionTimeSeries> {
    let periods = window(posts, granularity);
    let counts = count(posts, granularity, exec);
    let mut all: BTreeMap<Period, [u64; 2]> = BTreeMap::new();
    let mut per_region: BTreeMap<&RegionCode, BTreeMap<Period, [u64; 2]>> =
        regions.iter().map(|r| (r, BTreeMap::new())).collect();
    for ((region, period), c) in &counts {
        let slot = all.entry(*period).or_default();
        slot[0] += c[0];
        slot[1] += c[1];
        if let Some(m) = per_region.get_mut(region) {
            m.insert(*period, *c);
        }
    }
    let mut out = emit(ALL_REGIONS, &periods, &all);
    for (region, m) in per_region {
        out.extend(emit(region.as_str(), &periods, &m));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormalizedPoint {
    pub region: String,
    pub period: Period,
    pub count: u64,
    pub normalized: Option<f64>,
}

/// Scale each region's per-period post counts by that region's total, so
/// each region's series sums to 1. Regions without posts come out as all
/// null.
pub fn normalized_regional_trends(series: &[RegionTimeSeries]) -> Result<Vec<NormalizedPoint>> {
    let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
    for s in series {
        *totals.entry(&s.region).or_default() += s.total();
    }
    if !totals.values().any(|t| *t > 0) {
        return Err(Error::Input("no region has any posts to normalize".into()));
    }
    for (region, t) in &totals {
        if *t == 0 {
            log::warn!("region {region} has no posts; its normalized trend is null");
        }
    }
    Ok(series
        .iter()
        .map(|s| {
            let total = totals[s.region.as_str()];
            NormalizedPoint {
                region: s.region.clone(),
                period: s.period,
                count: s.total(),
                normalized: (total > 0).then(|| s.total() as f64 / total as f64),
            }
        })
        .collect())
}

/// One row per (region, period, category), ready for plotting.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LongRow {
    pub region: String,
    pub period: Period,
    pub category: &'static str,
    pub count: u64,
    pub share: Option<f64>,
}

pub fn long_format(series: &[RegionTimeSeries]) -> Vec<LongRow> {
    series
        .iter()
        .flat_map(|s| {
            let total = s.total();
            [
                (BinaryLabel::Negative, s.negative_count),
                (BinaryLabel::NonNegative, s.non_negative_count),
            ]
            .into_iter()
            .map(move |(label, n)| LongRow {
                region: s.region.clone(),
                period: s.period,
                category: label.name(),
                count: n,
                share: (total > 0).then(|| n as f64 / total as f64),
            })
        })
        .collect()
}
