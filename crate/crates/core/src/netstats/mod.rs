//! Interaction network, community detection and the region × community
//! association test.

pub mod graphml;
pub mod louvain;
pub mod network;
pub mod stats;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::geocode::RegionCode;
use crate::Result;

pub use graphml::{read_graphml, write_graphml};
pub use louvain::{detect_communities, modularity, Partition};
pub use network::{build_network, build_network_from, NetworkPost, UserNetwork};
pub use stats::{chi_square_independence, chi_square_sf, cramers_v, ChiSquare};

pub const DEFAULT_RESOLUTION: f64 = 1.0;
pub const DEFAULT_MIN_COMMUNITY_SIZE: usize = 5;
pub const OTHER_COLUMN: &str = "other";

/// Region × community contingency table of users with its test statistics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetworkAssociation {
    pub regions: Vec<RegionCode>,
    /// Community ids as strings, with pooled small communities last as
    /// [`OTHER_COLUMN`].
    pub communities: Vec<String>,
    pub contingency: Vec<Vec<u64>>,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    pub n: u64,
    pub p_value: f64,
    pub cramers_v: f64,
}

impl NetworkAssociation {
    /// Long-format cells `(region, community, count)`.
    pub fn cells(&self) -> impl Iterator<Item = (&RegionCode, &str, u64)> + '_ {
        self.regions.iter().enumerate().flat_map(move |(i, r)| {
            self.communities
                .iter()
                .enumerate()
                .map(move |(j, c)| (r, c.as_str(), self.contingency[i][j]))
        })
    }
}

/// Cross-tabulate node regions against communities and test independence.
///
/// Communities with fewer than `min_size` members (counted over the whole
/// graph) are pooled into one `other` column. Users without a region are
/// left out of the table. Empty rows and columns are dropped before the test.
pub fn associate(net: &UserNetwork, partition: &Partition, min_size: usize) -> Result<NetworkAssociation> {
    let sizes = partition.sizes();
    let column_of = |c: usize| -> Option<usize> { (sizes[c] >= min_size).then_some(c) };

    // None is the pooled column, which sorts first in Option order; move it last.
    let mut table: BTreeMap<&RegionCode, BTreeMap<Option<usize>, u64>> = BTreeMap::new();
    for (node, &c) in net.nodes.iter().zip(&partition.assignment) {
        if let Some(region) = &node.region {
            *table.entry(region).or_default().entry(column_of(c)).or_default() += 1;
        }
    }
    let mut columns: Vec<Option<usize>> = table.values().flat_map(|row| row.keys().copied()).collect();
    columns.sort_by_key(|c| (c.is_none(), *c));
    columns.dedup();

    let regions: Vec<RegionCode> = table.keys().map(|r| (*r).clone()).collect();
    let contingency: Vec<Vec<u64>> = table
        .values()
        .map(|row| columns.iter().map(|c| row.get(c).copied().unwrap_or(0)).collect())
        .collect();
    let communities = columns
        .iter()
        .map(|c| c.map_or_else(|| OTHER_COLUMN.to_string(), |c| c.to_string()))
        .collect();

    let test = chi_square_independence(&contingency)?;
    let cramers_v = cramers_v(test.statistic, test.n, regions.len(), columns.len())?;
    Ok(NetworkAssociation {
        regions,
        communities,
        contingency,
        chi_square: test.statistic,
        degrees_of_freedom: test.df,
        n: test.n,
        p_value: test.p_value,
        cramers_v,
    })
}
