//! `sweep`: train a grid of (depth, CLS wiring, feature set) variants with
//! repeated seeds and tabulate mean test scores.

use std::path::PathBuf;

use cgat_mesh::FeatureChannels;
use cgat_model::{architecture, ModelConfig};
use cgat_train::{depth_sweep, stratified_split, sweep_grid, variant_label};

use crate::cache::load_dataset;
use crate::config::{self, FileConfig};
use crate::error::{file_error, CliError, Result};
use crate::run_manifest::RunManifest;
use crate::train::{record_training_config, resolve_training};

#[derive(clap::Args)]
pub struct SweepArgs {
    /// Graph cache directory produced by preprocess.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for the grid and per-cell scores.
    #[arg(long)]
    pub out: PathBuf,
    /// Root seed; every run derives its own stream [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optional key=value config file; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Architecture: cgat, gcn, or gat [default: cgat].
    #[arg(long)]
    pub arch: Option<String>,
    /// Comma-separated block counts [default: 1,3,6].
    #[arg(long)]
    pub blocks: Option<String>,
    /// Comma-separated CLS wirings [default: directed,undirected].
    #[arg(long)]
    pub cls: Option<String>,
    /// Comma-separated feature sets [default: both].
    #[arg(long)]
    pub features: Option<String>,
    /// Training repeats per cell [default: 2].
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Attention heads per block [default: 8].
    #[arg(long)]
    pub heads: Option<usize>,
    /// Hidden width [default: 128].
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Training epochs per run [default: 150].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Resampled batch size [default: 32].
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    /// Initial learning rate [default: 0.001].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Attention scoring: static or dynamic [default: dynamic].
    #[arg(long)]
    pub attention: Option<String>,
    /// Head merge: max, mean, or concat [default: max].
    #[arg(long = "head-merge")]
    pub head_merge: Option<String>,
}

pub fn run(args: &SweepArgs) -> Result<()> {
    let cfg = FileConfig::from_flag(args.config.as_deref())?;
    let seed = args.seed.or(cfg.number("seed")?).unwrap_or(0);
    let blocks = config::parse_list(
        args.blocks.as_deref().or(cfg.raw("blocks")).unwrap_or("1,3,6"),
        config::parse_count,
    )?;
    let modes = config::parse_list(
        args.cls.as_deref().or(cfg.raw("cls")).unwrap_or("directed,undirected"),
        config::parse_cls,
    )?;
    let channels = config::parse_list(
        args.features.as_deref().or(cfg.raw("features")).unwrap_or("both"),
        config::parse_features,
    )?;
    let repeats = args.repeats.or(cfg.number("repeats")?).unwrap_or(2);
    if repeats == 0 {
        return Err(CliError::Usage("repeats must be at least 1".into()));
    }
    let resolved = resolve_training(
        &cfg,
        seed,
        args.arch.as_deref(),
        Some(channels[0].name()),
        Some(blocks[0]),
        Some(modes[0].name()),
        args.heads,
        args.hidden,
        args.epochs,
        args.batch_size,
        args.lr,
        args.attention.as_deref(),
        args.head_merge.as_deref(),
    )?;
    if architecture(&resolved.arch).is_none() {
        return Err(CliError::Usage(format!("unknown architecture {:?}", resolved.arch)));
    }
    for &l in &blocks {
        for &mode in &modes {
            for &ch in &channels {
                let cell =
                    ModelConfig { blocks: l, cls_mode: mode, features: ch, ..resolved.model };
                cell.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            }
        }
    }

    let loaded = load_dataset(&args.data, FeatureChannels::Both)?;
    let split = stratified_split(&loaded.dataset.labels, loaded.dataset.classes, seed)?;
    let cells = depth_sweep(
        &resolved.arch,
        &loaded.dataset,
        &split,
        &resolved.model,
        &resolved.train,
        &blocks,
        &modes,
        &channels,
        repeats,
    )?;
    let grid = sweep_grid(&cells, &resolved.arch);
    print!("{grid}");

    std::fs::create_dir_all(&args.out).map_err(|e| file_error(&args.out, e))?;
    let mut manifest = RunManifest::new("sweep", seed);
    record_training_config(&mut manifest, &resolved);
    manifest.config("sweep-blocks", blocks.iter().map(ToString::to_string).collect::<Vec<_>>().join(","));
    manifest.config("sweep-cls", modes.iter().map(|m| m.name()).collect::<Vec<_>>().join(","));
    manifest.config("sweep-features", channels.iter().map(|c| c.name()).collect::<Vec<_>>().join(","));
    manifest.config("repeats", repeats);
    manifest.input(&loaded.manifest_path)?;
    for file in &loaded.files {
        manifest.input(file)?;
    }

    let grid_path = args.out.join("sweep.tsv");
    std::fs::write(&grid_path, &grid).map_err(|e| file_error(&grid_path, e))?;
    manifest.output(&grid_path);
    let mut cell_rows = String::from("model\truns\tmean_f1\tmean_mae\tper_run_f1\n");
    for cell in &cells {
        let label = variant_label(&resolved.arch, cell.blocks, cell.cls_mode, cell.channels);
        let per_run: Vec<String> = cell.per_run_f1.iter().map(|f| format!("{f:.4}")).collect();
        cell_rows.push_str(&format!(
            "{label}\t{}\t{:.4}\t{:.4}\t{}\n",
            cell.runs,
            cell.mean_f1,
            cell.mean_mae,
            per_run.join(",")
        ));
    }
    let cells_path = args.out.join("cells.tsv");
    std::fs::write(&cells_path, cell_rows).map_err(|e| file_error(&cells_path, e))?;
    manifest.output(&cells_path);
    manifest.write(&args.out)?;
    Ok(())
}
