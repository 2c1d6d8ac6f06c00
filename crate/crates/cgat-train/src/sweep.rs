//! Depth/direction/feature sweep: train R seeded repeats per cell and
//! report mean test metrics in a depth-by-variant grid.

use cgat_graph::ClsMode;
use cgat_mesh::FeatureChannels;
use cgat_model::{Model, ModelConfig};
use rayon::prelude::*;

use crate::metrics::evaluate;
use crate::split::Split;
use crate::train::{train, TrainConfig};
use crate::{Dataset, Result};

/// Aggregated result for one (depth, direction, features) combination.
#[derive(Clone, Debug)]
pub struct SweepCell {
    pub blocks: usize,
    pub cls_mode: ClsMode,
    pub channels: FeatureChannels,
    pub runs: usize,
    pub mean_f1: f64,
    pub mean_mae: f64,
    pub per_run_f1: Vec<f64>,
}

/// Shorthand for one model variant, e.g. "6-CGAT→-both".
pub fn variant_label(arch: &str, blocks: usize, mode: ClsMode, channels: FeatureChannels) -> String {
    let arrow = match mode {
        ClsMode::Directed => "→",
        ClsMode::Undirected => "↔",
    };
    format!("{}-{}{}-{}", blocks, arch.to_uppercase(), arrow, channels.name())
}

fn mix_seed(root: u64, salt: u64) -> u64 {
    let mut z = root ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Train `repeats` seeded models per combination and evaluate each run's
/// best checkpoint on the test partition. Runs execute in parallel on the
/// global thread pool; results are deterministic because every run derives
/// its own seeds from (root seed, cell, repeat).
#[allow(clippy::too_many_arguments)]
pub fn depth_sweep(
    arch: &str,
    data: &Dataset,
    split: &Split,
    base: &ModelConfig,
    tconf: &TrainConfig,
    blocks: &[usize],
    modes: &[ClsMode],
    channels: &[FeatureChannels],
    repeats: usize,
) -> Result<Vec<SweepCell>> {
    let mut projected: Vec<(FeatureChannels, Dataset)> = Vec::new();
    for &ch in channels {
        if !projected.iter().any(|(c, _)| *c == ch) {
            projected.push((ch, data.with_features(ch)?));
        }
    }
    let mut cells: Vec<(usize, ClsMode, FeatureChannels)> = Vec::new();
    for &l in blocks {
        for &mode in modes {
            for &ch in channels {
                cells.push((l, mode, ch));
            }
        }
    }
    let runs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..repeats).map(move |r| (c, r)))
        .collect();
    let results: Vec<(f64, f64)> = runs
        .par_iter()
        .map(|&(cell_idx, repeat)| -> Result<(f64, f64)> {
            let (l, mode, ch) = cells[cell_idx];
            let proj = &projected.iter().find(|(c, _)| *c == ch).expect("projected above").1;
            let run_seed = mix_seed(tconf.seed, (cell_idx * repeats + repeat) as u64 + 1);
            let config = ModelConfig { blocks: l, cls_mode: mode, features: ch, ..*base };
            let model = Model::init(arch, config, mix_seed(run_seed, 0xA11CE))?;
            let outcome = train(model, proj, split, &TrainConfig { seed: run_seed, ..*tconf })?;
            let metrics = evaluate(&outcome.best_model, proj, &split.test, tconf.batch_size)?;
            Ok((metrics.weighted_f1, metrics.mae))
        })
        .collect::<Result<_>>()?;

    Ok(cells
        .iter()
        .enumerate()
        .map(|(cell_idx, &(l, mode, ch))| {
            let per_run_f1: Vec<f64> =
                (0..repeats).map(|r| results[cell_idx * repeats + r].0).collect();
            let mean_f1 = per_run_f1.iter().sum::<f64>() / repeats as f64;
            let mean_mae = (0..repeats)
                .map(|r| results[cell_idx * repeats + r].1)
                .sum::<f64>()
                / repeats as f64;
            SweepCell { blocks: l, cls_mode: mode, channels: ch, runs: repeats, mean_f1, mean_mae, per_run_f1 }
        })
        .collect())
}

/// Render cells as a tab-separated grid: one row per depth and direction,
/// one mean-F1 column per feature set.
pub fn sweep_grid(cells: &[SweepCell], arch: &str) -> String {
    let mut channel_order: Vec<FeatureChannels> = Vec::new();
    let mut rows: Vec<(usize, ClsMode)> = Vec::new();
    for cell in cells {
        if !channel_order.contains(&cell.channels) {
            channel_order.push(cell.channels);
        }
        if !rows.contains(&(cell.blocks, cell.cls_mode)) {
            rows.push((cell.blocks, cell.cls_mode));
        }
    }
    let mut out = String::from("model");
    for ch in &channel_order {
        out.push('\t');
        out.push_str(ch.name());
    }
    out.push('\n');
    for &(blocks, mode) in &rows {
        let arrow = match mode {
            ClsMode::Directed => "→",
            ClsMode::Undirected => "↔",
        };
        out.push_str(&format!("{}-{}{}", blocks, arch.to_uppercase(), arrow));
        for &ch in &channel_order {
            let cell = cells
                .iter()
                .find(|c| c.blocks == blocks && c.cls_mode == mode && c.channels == ch);
            match cell {
                Some(c) => out.push_str(&format!("\t{:.4}", c.mean_f1)),
                None => out.push_str("\t-"),
            }
        }
        out.push('\n');
    }
    out
}
