//! Display clipping: squeeze rollout scores into a shared range so one
//! color scale works across every exported mesh.

use crate::rollout::RolloutResult;

/// Score sets clamped into `[lo, hi]`, where `lo` is the minimum and `hi`
/// is the mean plus the minimum of all scores pooled across samples. The
/// shared bounds preserve relative scale between samples.
#[derive(Clone, Debug)]
pub struct ClippedScores {
    pub sets: Vec<Vec<f64>>,
    pub lo: f64,
    pub hi: f64,
}

pub fn clip_for_display(score_sets: &[RolloutResult]) -> ClippedScores {
    assert!(!score_sets.is_empty(), "clipping needs at least one sample");
    let mut count = 0usize;
    let mut sum = 0.0;
    let mut lo = f64::INFINITY;
    for set in score_sets {
        for &s in &set.scores {
            sum += s;
            count += 1;
            if s < lo {
                lo = s;
            }
        }
    }
    assert!(count > 0, "clipping needs at least one score");
    let hi = sum / count as f64 + lo;
    let sets = score_sets
        .iter()
        .map(|set| set.scores.iter().map(|&s| s.clamp(lo, hi)).collect())
        .collect();
    ClippedScores { sets, lo, hi }
}
