//! Deterministic linear baseline: hashed unigram and bigram features,
//! L2-regularized multinomial logistic regression fitted with L-BFGS.

use std::collections::VecDeque;
use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use super::{AnnotatedSet, Prediction};
use crate::textprep::CleanedDocument;
use crate::{Error, Result};

const K: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Feature space has `2^hash_bits` buckets.
    pub hash_bits: u32,
    pub l2: f64,
    /// Stop once the largest gradient component falls below this.
    pub tolerance: f64,
    pub max_iter: usize,
    /// L-BFGS history length.
    pub history: usize,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            hash_bits: 16,
            l2: 1e-3,
            tolerance: 1e-6,
            max_iter: 300,
            history: 10,
            seed: 0x5eed,
        }
    }
}

fn bucket(seed: u64, kind: u8, parts: &[&str], mask: u64) -> u32 {
    let mut h = FnvHasher::default();
    h.write_u64(seed);
    h.write_u8(kind);
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            h.write_u8(0x1f);
        }
        h.write(p.as_bytes());
    }
    (h.finish() & mask) as u32
}

/// Sparse, L2-normalized feature vector sorted by bucket.
pub fn features(tokens: &[String], hash_bits: u32, seed: u64) -> Vec<(u32, f64)> {
    let mask = (1u64 << hash_bits) - 1;
    let mut idx: Vec<u32> = Vec::with_capacity(tokens.len() * 2);
    for t in tokens {
        idx.push(bucket(seed, b'u', &[t], mask));
    }
    for w in tokens.windows(2) {
        idx.push(bucket(seed, b'b', &[&w[0], &w[1]], mask));
    }
    idx.sort_unstable();
    let mut out: Vec<(u32, f64)> = Vec::with_capacity(idx.len());
    for i in idx {
        match out.last_mut() {
            Some((j, v)) if *j == i => *v += 1.0,
            _ => out.push((i, 1.0)),
        }
    }
    let norm = out.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, v) in &mut out {
            *v /= norm;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub gradient_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub hash_bits: u32,
    pub seed: u64,
    /// Classes seen in training; the others always score 0.
    pub classes: [bool; K],
    pub bias: [f64; K],
    /// Non-zero rows `(bucket, weights per class)`, sorted by bucket.
    pub weights: Vec<(u32, [f64; K])>,
    pub summary: TrainingSummary,
    #[serde(skip)]
    dense: Vec<f64>,
}

impl BaselineModel {
    fn rebuild_dense(&mut self) {
        let mut dense = vec![0.0; (1usize << self.hash_bits) * K];
        for (b, w) in &self.weights {
            let o = *b as usize * K;
            dense[o..o + K].copy_from_slice(w);
        }
        self.dense = dense;
    }

    pub fn scores(&self, tokens: &[String]) -> [f64; K] {
        let x = features(tokens, self.hash_bits, self.seed);
        let mut z = self.bias;
        for (b, v) in &x {
            let o = *b as usize * K;
            for (zk, w) in z.iter_mut().zip(&self.dense[o..o + K]) {
                *zk += w * v;
            }
        }
        softmax(&z, &self.classes)
    }

    pub fn predict(&self, doc: &CleanedDocument) -> Prediction {
        Prediction::from_scores(doc.post_id.clone(), self.scores(&doc.tokens))
            .expect("softmax output lies on the simplex")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut m: BaselineModel =
            serde_json::from_str(s).map_err(|e| Error::Input(format!("baseline model: {e}")))?;
        if m.hash_bits == 0 || m.hash_bits > 28 {
            return Err(Error::Input(format!("baseline model: hash_bits {}", m.hash_bits)));
        }
        if m.weights.iter().any(|(b, _)| (*b as u64) >> m.hash_bits != 0) {
            return Err(Error::Input("baseline model: bucket out of range".into()));
        }
        m.rebuild_dense();
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

fn softmax(z: &[f64; K], active: &[bool; K]) -> [f64; K] {
    let max = (0..K)
        .filter(|&k| active[k])
        .map(|k| z[k])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; K];
    let mut sum = 0.0;
    for k in 0..K {
        if active[k] {
            p[k] = (z[k] - max).exp();
            sum += p[k];
        }
    }
    for v in &mut p {
        *v /= sum;
    }
    p
}

struct Problem {
    docs: Vec<Vec<(u32, f64)>>,
    labels: Vec<usize>,
    active: [bool; K],
    dim: usize,
    l2: f64,
}

impl Problem {
    fn n_params(&self) -> usize {
        self.dim * K + K
    }

    /// Mean cross-entropy plus `l2/2 * |W|^2`; the bias is not penalized.
    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let (w, b) = theta.split_at(self.dim * K);
        grad.fill(0.0);
        let n = self.docs.len() as f64;
        let mut loss = 0.0;
        for (x, &y) in self.docs.iter().zip(&self.labels) {
            let mut z = [b[0], b[1], b[2]];
            for (j, v) in x {
                let o = *j as usize * K;
                for k in 0..K {
                    z[k] += w[o + k] * v;
                }
            }
            let p = softmax(&z, &self.active);
            loss -= p[y].max(f64::MIN_POSITIVE).ln();
            for k in 0..K {
                if !self.active[k] {
                    continue;
                }
                let r = (p[k] - if k == y { 1.0 } else { 0.0 }) / n;
                for (j, v) in x {
                    grad[*j as usize * K + k] += r * v;
                }
                grad[self.dim * K + k] += r;
            }
        }
        let mut reg = 0.0;
        for (g, wi) in grad[..self.dim * K].iter_mut().zip(w) {
            reg += wi * wi;
            *g += self.l2 * wi;
        }
        loss / n + 0.5 * self.l2 * reg
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimize a smooth convex objective with L-BFGS and Armijo backtracking.
fn lbfgs(problem: &Problem, cfg: &BaselineConfig) -> (Vec<f64>, TrainingSummary) {
    let n = problem.n_params();
    let mut x = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut f = problem.eval(&x, &mut g);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = max_abs(&g) <= cfg.tolerance;

    while !converged && iterations < cfg.max_iter {
        iterations += 1;
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = match hist.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / max_abs(&g).max(1.0),
        };
        for v in &mut d {
            *v *= gamma;
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let beta = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - beta) * si;
            }
        }

        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            // not a descent direction; restart from steepest descent
            hist.clear();
            for (di, gi) in d.iter_mut().zip(&g) {
                *di = -gi;
            }
            slope = dot(&g, &d);
        }

        let mut step = 1.0;
        let mut f_new;
        loop {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            f_new = problem.eval(&x_new, &mut g_new);
            if f_new <= f + 1e-4 * step * slope || step < 1e-16 {
                break;
            }
            step *= 0.5;
        }
        // Also stops on NaN.
        if f_new.is_nan() || f_new >= f {
            break;
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if hist.len() == cfg.history {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        converged = max_abs(&g) <= cfg.tolerance;
    }

    let summary = TrainingSummary {
        iterations,
        converged,
        objective: f,
        gradient_norm: max_abs(&g),
    };
    (x, summary)
}

/// Fit the baseline on an annotated set. Needs at least two classes.
pub fn train_baseline(train: &AnnotatedSet, cfg: &BaselineConfig) -> Result<BaselineModel> {
    if train.is_empty() {
        return Err(Error::DegenerateTraining("empty training set".into()));
    }
    let counts = train.counts();
    let active = counts.map(|c| c > 0);
    if active.iter().filter(|a| **a).count() < 2 {
        return Err(Error::DegenerateTraining(format!(
            "only one class present (counts {counts:?})"
        )));
    }
    if !(1..=28).contains(&cfg.hash_bits) {
        return Err(Error::Config(format!("hash_bits {} outside 1..=28", cfg.hash_bits)));
    }
    let problem = Problem {
        docs: train
            .items
            .iter()
            .map(|it| features(&it.doc.tokens, cfg.hash_bits, cfg.seed))
            .collect(),
        labels: train.items.iter().map(|it| it.label.index()).collect(),
        active,
        dim: 1 << cfg.hash_bits,
        l2: cfg.l2,
    };
    let (theta, summary) = lbfgs(&problem, cfg);
    if !summary.converged {
        log::warn!(
            "baseline stopped after {} iterations with gradient {:.3e}",
            summary.iterations,
            summary.gradient_norm
        );
    }
    let (w, b) = theta.split_at(problem.dim * K);
    let weights = w
        .chunks_exact(K)
        .enumerate()
        .filter(|(_, row)| row.iter().any(|v| *v != 0.0))
        .map(|(i, row)| (i as u32, [row[0], row[1], row[2]]))
        .collect();
    let mut model = BaselineModel {
        hash_bits: cfg.hash_bits,
        seed: cfg.seed,
        classes: active,
        bias: [b[0], b[1], b[2]],
        weights,
        summary,
        dense: Vec::new(),
    };
    model.rebuild_dense();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{evaluate, AnnotatedItem, Scheme, SentimentLabel};

    fn item(id: usize, words: &[&str], label: SentimentLabel) -> AnnotatedItem {
        let tokens: Vec<String> = words.iter().map(|s| s.to_string()).collect();
        let len = tokens.iter().map(|t| t.chars().count()).sum::<usize>() + tokens.len() - 1;
        AnnotatedItem {
            doc: CleanedDocument {
                post_id: format!("d{id:02}"),
                tokens,
                raw_length: len,
                clean_length: len,
            },
            label,
        }
    }

    fn toy() -> AnnotatedSet {
        let neg = ["stygg", "ødelegger", "protest", "nei"];
        let pos = ["grønn", "fornybar", "bra", "fremtid"];
        let shared = ["turbin", "fjell", "strøm", "anlegg", "kommune"];
        let items = (0..20)
            .map(|i| {
                let (sig, label) = if i % 2 == 0 {
                    (neg[i / 2 % 4], SentimentLabel::Negative)
                } else {
                    (pos[i / 2 % 4], SentimentLabel::Positive)
                };
                item(i, &[shared[i % 5], sig, shared[(i + 2) % 5]], label)
            })
            .collect();
        AnnotatedSet::new(items)
    }

    #[test]
    fn feature_vector_is_unit_and_sorted() {
        let toks: Vec<String> = ["a", "b", "a"].iter().map(|s| s.to_string()).collect();
        let f = features(&toks, 16, 1);
        assert!(f.windows(2).all(|w| w[0].0 < w[1].0));
        let norm: f64 = f.iter().map(|(_, v)| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(features(&[], 16, 1).is_empty());
    }

    #[test]
    fn separable_toy_set_fits_perfectly() {
        let set = toy();
        let model = train_baseline(&set, &BaselineConfig::default()).unwrap();
        assert!(model.summary.converged, "{:?}", model.summary);
        let preds: Vec<_> = set.items.iter().map(|it| model.predict(&it.doc)).collect();
        let r = evaluate(&preds, &set.gold(), Scheme::Ternary).unwrap();
        assert_eq!(r.class("negative").unwrap().f1, 1.0);
        assert_eq!(r.class("positive").unwrap().f1, 1.0);
        // neutral never seen, never predicted
        assert!(preds.iter().all(|p| p.scores[1] == 0.0));
    }

    #[test]
    fn training_is_bit_identical() {
        let set = toy();
        let a = train_baseline(&set, &BaselineConfig::default()).unwrap();
        let b = train_baseline(&set, &BaselineConfig::default()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let back = BaselineModel::from_json(&a.to_json()).unwrap();
        let doc = &set.items[3].doc;
        assert_eq!(back.predict(doc), a.predict(doc));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            train_baseline(&AnnotatedSet::default(), &BaselineConfig::default()),
            Err(Error::DegenerateTraining(_))
        ));
        let one = AnnotatedSet::new(vec![
            item(0, &["a", "b"], SentimentLabel::Neutral),
            item(1, &["c", "d"], SentimentLabel::Neutral),
        ]);
        assert!(matches!(
            train_baseline(&one, &BaselineConfig::default()),
            Err(Error::DegenerateTraining(_))
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let set = toy();
        let cfg = BaselineConfig { hash_bits: 4, ..BaselineConfig::default() };
        let problem = Problem {
            docs: set.items.iter().map(|it| features(&it.doc.tokens, 4, cfg.seed)).collect(),
            labels: set.items.iter().map(|it| it.label.index()).collect(),
            active: [true; 3],
            dim: 16,
            l2: 0.1,
        };
        let n = problem.n_params();
        let theta: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.5).collect();
        let mut g = vec![0.0; n];
        problem.eval(&theta, &mut g);
        let mut scratch = vec![0.0; n];
        let h = 1e-6;
        for i in (0..n).step_by(5) {
            let mut up = theta.clone();
            up[i] += h;
            let mut dn = theta.clone();
            dn[i] -= h;
            let fd = (problem.eval(&up, &mut scratch) - problem.eval(&dn, &mut scratch)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6, "param {i}: {fd} vs {}", g[i]);
        }
    }
}
