//! Picking predictions to send back for annotation.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Prediction;

/// The `k` predictions with the smallest top-two score gap, ties broken by
/// post id.
pub fn lowest_margin(predictions: &[Prediction], k: usize) -> Vec<&Prediction> {
    let mut all: Vec<&Prediction> = predictions.iter().collect();
    all.sort_by(|a, b| {
        a.margin()
            .total_cmp(&b.margin())
            .then_with(|| a.post_id.cmp(&b.post_id))
    });
    all.truncate(k);
    all
}

/// `k` predictions drawn uniformly without replacement, returned in post id
/// order.
pub fn random_sample(predictions: &[Prediction], k: usize, seed: u64) -> Vec<&Prediction> {
    let mut all: Vec<&Prediction> = predictions.iter().collect();
    all.sort_by(|a, b| a.post_id.cmp(&b.post_id));
    let k = k.min(all.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = sample(&mut rng, all.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| all[i]).collect()
}
