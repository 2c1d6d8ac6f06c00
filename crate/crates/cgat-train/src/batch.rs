//! Class-balanced batch construction by inverse-frequency resampling.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Draw one epoch's batches over `labels` (positions into the training
/// list). Samples are drawn WITH replacement, each weighted by the inverse
/// frequency of its class, so expected class mass per batch is uniform.
/// ceil(N / batch_size) batches per epoch; deterministic in (seed, epoch).
pub fn balanced_batches(
    labels: &[usize],
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Vec<Vec<usize>> {
    if labels.is_empty() || batch_size == 0 {
        return Vec::new();
    }
    let classes = labels.iter().max().unwrap() + 1;
    let mut counts = vec![0usize; classes];
    for &l in labels {
        counts[l] += 1;
    }
    let weights: Vec<f64> = labels.iter().map(|&l| 1.0 / counts[l] as f64).collect();
    let sampler = WeightedIndex::new(&weights).expect("weights are positive and finite");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let n_batches = labels.len().div_ceil(batch_size);
    (0..n_batches)
        .map(|_| (0..batch_size).map(|_| sampler.sample(&mut rng)).collect())
        .collect()
}
