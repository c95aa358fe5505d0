//! Author interaction network.

use std::collections::{BTreeMap, HashMap};
use std::sync::LazyLock;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::Serialize;

use crate::exec::{self, Execution};
use crate::geocode::{RegionCode, ResolvedPost};
use crate::ingest::record::{PostKind, PostRecord};
use crate::ingest::retweet::parse_marker;

static STATUS_URL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:twitter\.com|x\.com)/([A-Za-z0-9_]{1,15})/status(?:es)?/\d+").unwrap()
});

/// One post as seen by the network builder.
#[derive(Clone, Copy, Debug)]
pub struct NetworkPost<'a> {
    pub record: &'a PostRecord,
    pub region: Option<&'a RegionCode>,
}

impl<'a> From<&'a ResolvedPost> for NetworkPost<'a> {
    fn from(p: &'a ResolvedPost) -> Self {
        NetworkPost {
            record: &p.record,
            region: Some(&p.region),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NetworkNode {
    pub author_id: String,
    pub handle: String,
    /// Most frequent region over the author's posts; ties go to the smallest code.
    pub region: Option<RegionCode>,
}

/// Directed interaction edge between node indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: u64,
}

/// Interaction graph among authors. Nodes are sorted by author id and only
/// authors incident to at least one edge are kept.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct UserNetwork {
    pub nodes: Vec<NetworkNode>,
    pub edges: Vec<Edge>,
}

impl UserNetwork {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn index_of(&self, author_id: &str) -> Option<usize> {
        self.nodes
            .binary_search_by(|n| n.author_id.as_str().cmp(author_id))
            .ok()
    }

    /// Symmetrized edge list `(u, v, w)` with `u < v`, summing both
    /// directions.
    pub fn undirected(&self) -> Vec<(usize, usize, f64)> {
        let mut merged: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for e in &self.edges {
            let key = (e.source.min(e.target), e.source.max(e.target));
            *merged.entry(key).or_default() += e.weight;
        }
        merged
            .into_iter()
            .map(|((u, v), w)| (u, v, w as f64))
            .collect()
    }

    /// Build a network directly from node ids and undirected weighted edges.
    /// Mostly useful for fixtures.
    pub fn from_edges(ids: &[&str], edges: &[(usize, usize, u64)]) -> Self {
        let mut order: Vec<usize> = (0..ids.len()).collect();
        order.sort_by_key(|&i| ids[i]);
        let mut rank = vec![0; ids.len()];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r;
        }
        let nodes = order
            .iter()
            .map(|&i| NetworkNode {
                author_id: ids[i].to_string(),
                handle: ids[i].to_string(),
                region: None,
            })
            .collect();
        let mut edges: Vec<Edge> = edges
            .iter()
            .filter(|(u, v, w)| u != v && *w > 0)
            .map(|&(u, v, weight)| Edge {
                source: rank[u],
                target: rank[v],
                weight,
            })
            .collect();
        edges.sort_by_key(|e| (e.source, e.target));
        UserNetwork { nodes, edges }
    }
}

/// Handle of the account a post retweets or quotes, if any.
pub fn interaction_target(record: &PostRecord) -> Option<&str> {
    match record.kind {
        PostKind::Quote => STATUS_URL
            .captures(&record.text)
            .and_then(|c| c.get(1))
            .map(|m| m.as_str()),
        PostKind::Retweet | PostKind::Original => parse_marker(&record.text).map(|m| m.handle),
    }
}

#[derive(Default)]
struct AuthorAcc {
    latest: Option<(DateTime<Utc>, String)>,
    regions: HashMap<RegionCode, u64>,
}

#[derive(Default)]
struct Acc {
    authors: HashMap<String, AuthorAcc>,
    // lowercase handle -> author ids using it
    handles: HashMap<String, Vec<String>>,
    // (source author id, lowercase target handle) -> count
    interactions: HashMap<(String, String), u64>,
}

impl Acc {
    fn add(mut self, post: &NetworkPost<'_>) -> Self {
        let r = post.record;
        let a = self.authors.entry(r.author_id.clone()).or_default();
        let candidate = (r.created_at, r.author_handle.clone());
        if a.latest.as_ref().is_none_or(|l| candidate > *l) {
            a.latest = Some(candidate);
        }
        if let Some(region) = post.region {
            *a.regions.entry(region.clone()).or_default() += 1;
        }
        let ids = self.handles.entry(r.author_handle.to_lowercase()).or_default();
        if !ids.contains(&r.author_id) {
            ids.push(r.author_id.clone());
        }
        if let Some(target) = interaction_target(r) {
            *self
                .interactions
                .entry((r.author_id.clone(), target.to_lowercase()))
                .or_default() += 1;
        }
        self
    }

    fn merge(mut self, other: Acc) -> Self {
        for (id, b) in other.authors {
            let a = self.authors.entry(id).or_default();
            if let Some(l) = b.latest {
                if a.latest.as_ref().is_none_or(|cur| l > *cur) {
                    a.latest = Some(l);
                }
            }
            for (region, n) in b.regions {
                *a.regions.entry(region).or_default() += n;
            }
        }
        for (h, ids) in other.handles {
            let mine = self.handles.entry(h).or_default();
            for id in ids {
                if !mine.contains(&id) {
                    mine.push(id);
                }
            }
        }
        for (k, n) in other.interactions {
            *self.interactions.entry(k).or_default() += n;
        }
        self
    }
}

fn majority_region(regions: &HashMap<RegionCode, u64>) -> Option<RegionCode> {
    regions
        .iter()
        .max_by(|(ra, na), (rb, nb)| na.cmp(nb).then_with(|| rb.cmp(ra)))
        .map(|(r, _)| r.clone())
}

/// Build the interaction graph: an edge `u -> v` weighted by how often `u`
/// retweeted or quoted `v`. Targets are resolved by handle
/// (case-insensitive) against authors present in the corpus; a handle shared
/// by several author ids resolves to the smallest id. Self-interactions and
/// interactions with unknown handles are dropped.
pub fn build_network(posts: &[ResolvedPost], exec: Execution) -> UserNetwork {
    let posts: Vec<NetworkPost<'_>> = posts.iter().map(NetworkPost::from).collect();
    build_network_from(&posts, exec)
}

/// [`build_network`] over already-converted posts.
pub fn build_network_from(posts: &[NetworkPost<'_>], exec: Execution) -> UserNetwork {
    let acc = exec::fold_merge(exec, posts, Acc::default, Acc::add, Acc::merge);

    let handle_owner: HashMap<&str, &str> = acc
        .handles
        .iter()
        .filter_map(|(h, ids)| ids.iter().min().map(|id| (h.as_str(), id.as_str())))
        .collect();

    let mut directed: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for ((src, target_handle), n) in &acc.interactions {
        let Some(&dst) = handle_owner.get(target_handle.as_str()) else {
            continue;
        };
        if dst == src {
            continue;
        }
        *directed.entry((src.as_str(), dst)).or_default() += n;
    }

    let mut ids: Vec<&str> = directed.keys().flat_map(|&(s, t)| [s, t]).collect();
    ids.sort_unstable();
    ids.dedup();

    let nodes: Vec<NetworkNode> = ids
        .iter()
        .map(|&id| {
            let a = &acc.authors[id];
            NetworkNode {
                author_id: id.to_string(),
                handle: a.latest.as_ref().map(|(_, h)| h.clone()).unwrap_or_default(),
                region: majority_region(&a.regions),
            }
        })
        .collect();
    let index = |id: &str| ids.binary_search(&id).expect("node collected above");
    let edges = directed
        .into_iter()
        .map(|((s, t), weight)| Edge {
            source: index(s),
            target: index(t),
            weight,
        })
        .collect();
    UserNetwork { nodes, edges }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::record::rfc3339_secs;

    fn post(id: &str, author: &str, handle: &str, text: &str, kind: PostKind) -> PostRecord {
        PostRecord {
            id: id.into(),
            author_id: author.into(),
            author_handle: handle.into(),
            created_at: rfc3339_secs::parse("2020-01-01T00:00:00Z").unwrap(),
            text: text.into(),
            like_count: 0,
            retweet_count: 0,
            post_geo: None,
            user_location: None,
            kind,
        }
    }

    fn net(records: &[PostRecord]) -> UserNetwork {
        let posts: Vec<NetworkPost> = records
            .iter()
            .map(|record| NetworkPost { record, region: None })
            .collect();
        build_network_from(&posts, Execution::Sequential)
    }

    #[test]
    fn repeated_retweets_accumulate_weight() {
        let rs = vec![
            post("1", "a", "alice", "vind er fint", PostKind::Original),
            post("2", "b", "bob", "RT @alice: vind er fint", PostKind::Retweet),
            post("3", "b", "bob", "RT @Alice: vind igjen", PostKind::Retweet),
        ];
        let n = net(&rs);
        assert_eq!(n.node_count(), 2);
        assert_eq!(n.edges, vec![Edge { source: 1, target: 0, weight: 2 }]);
    }

    #[test]
    fn originals_only_give_no_edges() {
        let rs = vec![
            post("1", "a", "alice", "hei", PostKind::Original),
            post("2", "b", "bob", "hallo", PostKind::Original),
        ];
        assert!(net(&rs).is_empty());
        assert_eq!(net(&rs).node_count(), 0);
    }

    #[test]
    fn self_retweets_are_dropped() {
        let rs = vec![post("1", "a", "alice", "RT @alice: meg selv", PostKind::Retweet)];
        assert!(net(&rs).is_empty());
    }

    #[test]
    fn quotes_resolve_through_status_urls() {
        let rs = vec![
            post("1", "a", "alice", "original", PostKind::Original),
            post("2", "c", "carol", "enig https://twitter.com/alice/status/1", PostKind::Quote),
            post("3", "c", "carol", "ukjent https://x.com/nobody/status/9", PostKind::Quote),
        ];
        let n = net(&rs);
        assert_eq!(n.edge_count(), 1);
        assert_eq!(n.nodes[n.edges[0].source].author_id, "c");
    }

    #[test]
    fn undirected_view_sums_both_directions() {
        let rs = vec![
            post("1", "a", "alice", "RT @bob: x", PostKind::Retweet),
            post("2", "b", "bob", "RT @alice: y", PostKind::Retweet),
            post("3", "b", "bob", "RT @alice: z", PostKind::Retweet),
        ];
        assert_eq!(net(&rs).undirected(), vec![(0, 1, 3.0)]);
    }

    #[test]
    fn node_region_is_the_majority_with_smallest_code_on_ties() {
        let rs = [
            post("1", "a", "alice", "RT @bob: x", PostKind::Retweet),
            post("2", "a", "alice", "y", PostKind::Original),
            post("3", "b", "bob", "z", PostKind::Original),
        ];
        let oslo = RegionCode::new("NO081");
        let viken = RegionCode::new("NO082");
        let posts = vec![
            NetworkPost { record: &rs[0], region: Some(&viken) },
            NetworkPost { record: &rs[1], region: Some(&oslo) },
            NetworkPost { record: &rs[2], region: None },
        ];
        let n = build_network_from(&posts, Execution::Sequential);
        assert_eq!(n.nodes[0].region, Some(oslo));
        assert_eq!(n.nodes[1].region, None);
    }

    #[test]
    fn parallel_build_matches_sequential() {
        let mut rs = Vec::new();
        for i in 0..500 {
            let a = i % 37;
            let b = (i * 7 + 3) % 37;
            rs.push(post(&format!("o{i}"), &format!("u{a}"), &format!("h{a}"), "tekst", PostKind::Original));
            rs.push(post(&format!("r{i}"), &format!("u{a}"), &format!("h{a}"), &format!("RT @h{b}: tekst"), PostKind::Retweet));
        }
        let posts: Vec<NetworkPost> = rs.iter().map(|record| NetworkPost { record, region: None }).collect();
        assert_eq!(
            build_network_from(&posts, Execution::Sequential),
            build_network_from(&posts, Execution::Parallel)
        );
    }
}
