//! Louvain community detection on the symmetrized interaction graph.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::network::UserNetwork;
use crate::{Error, Result};

const GAIN_EPS: f64 = 1e-12;

/// Community assignment for every node of a [`UserNetwork`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Partition {
    /// Community id per node index. Ids are numbered by the smallest node
    /// index they contain, starting at 0.
    pub assignment: Vec<usize>,
    pub community_count: usize,
    pub modularity: f64,
    pub resolution: f64,
    /// Aggregation levels that changed the partition.
    pub levels: usize,
}

impl Partition {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.community_count];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }
}

/// Weighted undirected graph with explicit self-loop weights, as used
/// between aggregation levels.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
}

impl Level {
    fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        let mut self_loops = vec![0.0; n];
        for &(u, v, w) in edges {
            if u == v {
                self_loops[u] += w;
            } else {
                adj[u].push((v, w));
                adj[v].push((u, w));
            }
        }
        for list in &mut adj {
            list.sort_by_key(|&(v, _)| v);
        }
        Level { adj, self_loops }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    fn degree(&self, i: usize) -> f64 {
        2.0 * self.self_loops[i] + self.adj[i].iter().map(|&(_, w)| w).sum::<f64>()
    }

    /// One round of local moves until no node improves. Returns the
    /// community per node (ids not yet compacted) and whether anything moved.
    fn local_moves(&self, gamma: f64, m2: f64, order: &[usize]) -> (Vec<usize>, bool) {
        let n = self.len();
        let k: Vec<f64> = (0..n).map(|i| self.degree(i)).collect();
        let mut comm: Vec<usize> = (0..n).collect();
        let mut tot = k.clone();
        let mut weight_to = vec![0.0; n];
        let mut seen = vec![false; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut moved_any = false;

        loop {
            let mut moved = false;
            for &i in order {
                let own = comm[i];
                touched.clear();
                touched.push(own);
                seen[own] = true;
                for &(j, w) in &self.adj[i] {
                    let c = comm[j];
                    if !seen[c] {
                        seen[c] = true;
                        touched.push(c);
                    }
                    weight_to[c] += w;
                }
                tot[own] -= k[i];

                let gain = |c: usize, w: f64| w - gamma * tot[c] * k[i] / m2;
                let mut best = own;
                let mut best_gain = gain(own, weight_to[own]);
                for &c in &touched[1..] {
                    let g = gain(c, weight_to[c]);
                    if g > best_gain + GAIN_EPS {
                        best = c;
                        best_gain = g;
                    }
                }
                tot[best] += k[i];
                comm[i] = best;
                if best != own {
                    moved = true;
                }
                for &c in &touched {
                    weight_to[c] = 0.0;
                    seen[c] = false;
                }
            }
            if !moved {
                break;
            }
            moved_any = true;
        }
        (comm, moved_any)
    }

    fn aggregate(&self, comm: &[usize], count: usize) -> Level {
        let mut edges: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
        for i in 0..self.len() {
            if self.self_loops[i] != 0.0 {
                *edges.entry((comm[i], comm[i])).or_default() += self.self_loops[i];
            }
            for &(j, w) in &self.adj[i] {
                if i < j {
                    let (a, b) = (comm[i].min(comm[j]), comm[i].max(comm[j]));
                    *edges.entry((a, b)).or_default() += w;
                }
            }
        }
        let list: Vec<(usize, usize, f64)> = edges.into_iter().map(|((a, b), w)| (a, b, w)).collect();
        Level::from_edges(count, &list)
    }
}

/// Renumber ids by first appearance.
fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = vec![usize::MAX; labels.iter().max().map_or(0, |m| m + 1)];
    let mut next = 0;
    let out = labels
        .iter()
        .map(|&l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l]
        })
        .collect();
    (out, next)
}

/// Detect communities by greedy modularity optimization: local node moves
/// followed by graph aggregation, repeated until a level changes nothing.
///
/// With `seed = None` nodes are visited in index order, which is sorted
/// author id order. With a seed, each level visits nodes in an order
/// shuffled by a ChaCha8 stream derived from it.
pub fn detect_communities(net: &UserNetwork, resolution: f64, seed: Option<u64>) -> Result<Partition> {
    if net.is_empty() {
        return Err(Error::NoEdges);
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::Config(format!("resolution must be positive, got {resolution}")));
    }
    let edges = net.undirected();
    let n = net.node_count();
    let mut level = Level::from_edges(n, &edges);
    let m2: f64 = 2.0 * edges.iter().map(|&(_, _, w)| w).sum::<f64>();
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);

    let mut assignment: Vec<usize> = (0..n).collect();
    let mut levels = 0;
    loop {
        let mut order: Vec<usize> = (0..level.len()).collect();
        if let Some(rng) = rng.as_mut() {
            order.shuffle(rng);
        }
        let (comm, moved) = level.local_moves(resolution, m2, &order);
        if !moved {
            break;
        }
        levels += 1;
        let (comm, count) = compact(&comm);
        for a in assignment.iter_mut() {
            *a = comm[*a];
        }
        if count == level.len() {
            break;
        }
        level = level.aggregate(&comm, count);
    }

    let (assignment, community_count) = compact(&assignment);
    let modularity = modularity(net, &assignment, resolution);
    Ok(Partition {
        assignment,
        community_count,
        modularity,
        resolution,
        levels,
    })
}

/// Newman modularity of `assignment` on the symmetrized graph:
/// `Q = Σ_c [ L_c / m − γ (d_c / 2m)² ]` with `L_c` the edge weight inside
/// community `c` and `d_c` the total degree of its members.
pub fn modularity(net: &UserNetwork, assignment: &[usize], resolution: f64) -> f64 {
    let edges = net.undirected();
    let m: f64 = edges.iter().map(|&(_, _, w)| w).sum();
    if m == 0.0 {
        return 0.0;
    }
    let count = assignment.iter().max().map_or(0, |c| c + 1);
    let mut inside = vec![0.0; count];
    let mut degree = vec![0.0; count];
    for &(u, v, w) in &edges {
        degree[assignment[u]] += w;
        degree[assignment[v]] += w;
        if assignment[u] == assignment[v] {
            inside[assignment[u]] += w;
        }
    }
    inside
        .iter()
        .zip(&degree)
        .map(|(l, d)| l / m - resolution * (d / (2.0 * m)).powi(2))
        .sum()
}
