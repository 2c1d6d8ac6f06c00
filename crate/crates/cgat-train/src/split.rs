//! Stratified train/validation/test assignment.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Result, TrainError};

const FRACTIONS: [f64; 3] = [0.80, 0.05, 0.15];

/// Dataset indices per partition. Disjoint and jointly exhaustive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Assign every sample to train/val/test at 80/5/15, independently per
/// class with largest-remainder rounding, so class proportions carry over
/// into each partition. Every class lands at least one training sample.
pub fn stratified_split(labels: &[usize], classes: usize, seed: u64) -> Result<Split> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(TrainError::DataMismatch {
                detail: format!("label {label} outside {classes} classes"),
            });
        }
        per_class[label].push(i);
    }
    let mut split = Split { train: Vec::new(), val: Vec::new(), test: Vec::new() };
    for (class, members) in per_class.iter_mut().enumerate() {
        if members.is_empty() {
            return Err(TrainError::EmptyClass { class });
        }
        members.shuffle(&mut rng);
        let counts = largest_remainder(members.len());
        let (t, v) = (counts[0], counts[1]);
        split.train.extend_from_slice(&members[..t]);
        split.val.extend_from_slice(&members[t..t + v]);
        split.test.extend_from_slice(&members[t + v..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Integer partition of `n` into three buckets proportional to FRACTIONS:
/// floors first, then leftovers to the largest fractional remainders
/// (ties broken toward the earlier bucket). With the 0.80 share always
/// owning the largest remainder at n = 1, train is never left empty.
fn largest_remainder(n: usize) -> [usize; 3] {
    let mut counts = [0usize; 3];
    let mut remainders = [0.0f64; 3];
    let mut assigned = 0;
    for (i, f) in FRACTIONS.iter().enumerate() {
        let exact = f * n as f64;
        counts[i] = exact.floor() as usize;
        remainders[i] = exact - exact.floor();
        assigned += counts[i];
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| remainders[b].partial_cmp(&remainders[a]).unwrap().then(a.cmp(&b)));
    for i in 0..n - assigned {
        counts[order[i % 3]] += 1;
    }
    counts
}
