//! `train`: fit one model variant on a graph cache and write checkpoints,
//! history, split assignments, and test metrics.

use std::path::PathBuf;

use cgat_mesh::N_STAGES;
use cgat_model::{Model, ModelConfig, ModelError};
use cgat_train::{evaluate, history_table, stratified_split, variant_label, TrainConfig};

use crate::cache::{load_dataset, split_to_text};
use crate::config::{self, FileConfig};
use crate::error::{file_error, CliError, Result};
use crate::report::metrics_to_text;
use crate::run_manifest::RunManifest;

#[derive(clap::Args)]
pub struct TrainArgs {
    /// Graph cache directory produced by preprocess.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for checkpoints, history, splits, and metrics.
    #[arg(long)]
    pub out: PathBuf,
    /// Root seed for splitting, initialization, and batching [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optional key=value config file; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Architecture: cgat, gcn, or gat [default: cgat].
    #[arg(long)]
    pub arch: Option<String>,
    /// Feature channels: curv, dist, or both [default: both].
    #[arg(long)]
    pub features: Option<String>,
    /// Attention block count [default: 6].
    #[arg(long)]
    pub blocks: Option<usize>,
    /// CLS wiring: directed or undirected [default: directed].
    #[arg(long)]
    pub cls: Option<String>,
    /// Attention heads per block [default: 8].
    #[arg(long)]
    pub heads: Option<usize>,
    /// Hidden width [default: 128].
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Training epochs [default: 150].
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

/// Resolved model and optimizer settings shared by train and sweep.
pub struct ResolvedTraining {
    pub arch: String,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

/// Apply flag > config file > default resolution to the training surface.
/// `features`/`cls`/`blocks` hold the single-variant values; sweep overrides
/// them per cell.
pub fn resolve_training(
    cfg: &FileConfig,
    seed: u64,
    arch: Option<&str>,
    features: Option<&str>,
    blocks: Option<usize>,
    cls: Option<&str>,
    heads: Option<usize>,
    hidden: Option<usize>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    lr: Option<f64>,
    attention: Option<&str>,
    head_merge: Option<&str>,
) -> Result<ResolvedTraining> {
    let arch = arch.or(cfg.raw("arch")).unwrap_or("cgat").to_string();
    let model = ModelConfig {
        blocks: blocks.or(cfg.number("blocks")?).unwrap_or(6),
        heads: heads.or(cfg.number("heads")?).unwrap_or(8),
        hidden: hidden.or(cfg.number("hidden")?).unwrap_or(128),
        features: config::parse_features(features.or(cfg.raw("features")).unwrap_or("both"))?,
        cls_mode: config::parse_cls(cls.or(cfg.raw("cls")).unwrap_or("directed"))?,
        attention: config::parse_attention(
            attention.or(cfg.raw("attention")).unwrap_or("dynamic"),
        )?,
        head_merge: config::parse_head_merge(
            head_merge.or(cfg.raw("head-merge")).unwrap_or("max"),
        )?,
        classes: N_STAGES,
        ..ModelConfig::default()
    };
    let train = TrainConfig {
        lr0: lr.or(cfg.number("lr")?).unwrap_or(0.001),
        epochs: epochs.or(cfg.number("epochs")?).unwrap_or(150),
        batch_size: batch_size.or(cfg.number("batch-size")?).unwrap_or(32),
        seed,
        ..TrainConfig::default()
    };
    train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(ResolvedTraining { arch, model, train })
}

/// Configuration mistakes are usage errors; everything else stays a data
/// error.
pub fn init_model(arch: &str, config: ModelConfig, seed: u64) -> Result<Model> {
    Model::init(arch, config, seed).map_err(|e| match e {
        ModelError::UnknownArchitecture(_) | ModelError::InvalidConfig { .. } => {
            CliError::Usage(e.to_string())
        }
        other => CliError::Data(other.to_string()),
    })
}

pub fn record_training_config(manifest: &mut RunManifest, resolved: &ResolvedTraining) {
    let m = &resolved.model;
    let t = &resolved.train;
    manifest.config("arch", &resolved.arch);
    manifest.config("features", m.features.name());
    manifest.config("blocks", m.blocks);
    manifest.config("cls", m.cls_mode.name());
    manifest.config("heads", m.heads);
    manifest.config("hidden", m.hidden);
    manifest.config("attention", m.attention.name());
    manifest.config("head-merge", m.head_merge.name());
    manifest.config("dropout", m.dropout_p);
    manifest.config("epochs", t.epochs);
    manifest.config("batch-size", t.batch_size);
    manifest.config("lr", t.lr0);
    manifest.config("patience", t.patience);
    manifest.config("factor", t.factor);
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let cfg = FileConfig::from_flag(args.config.as_deref())?;
    let seed = args.seed.or(cfg.number("seed")?).unwrap_or(0);
    let resolved = resolve_training(
        &cfg,
        seed,
        args.arch.as_deref(),
        args.features.as_deref(),
        args.blocks,
        args.cls.as_deref(),
        args.heads,
        args.hidden,
        args.epochs,
        args.batch_size,
        args.lr,
        args.attention.as_deref(),
        args.head_merge.as_deref(),
    )?;
    let model = init_model(&resolved.arch, resolved.model, seed)?;

    let loaded = load_dataset(&args.data, resolved.model.features)?;
    let split = stratified_split(&loaded.dataset.labels, loaded.dataset.classes, seed)?;
    std::fs::create_dir_all(&args.out).map_err(|e| file_error(&args.out, e))?;

    let mut manifest = RunManifest::new("train", seed);
    record_training_config(&mut manifest, &resolved);
    manifest.input(&loaded.manifest_path)?;
    for file in &loaded.files {
        manifest.input(file)?;
    }

    let outcome = cgat_train::train(model, &loaded.dataset, &split, &resolved.train)?;
    let label = variant_label(
        &resolved.arch,
        resolved.model.blocks,
        resolved.model.cls_mode,
        resolved.model.features,
    );
    for row in &outcome.history {
        println!(
            "{label} epoch {} train_loss {:.4} val_loss {:.4} val_f1 {:.4} lr {:.6}",
            row.epoch, row.train_loss, row.val_loss, row.val_f1, row.lr
        );
    }

    let best_path = args.out.join("best.ckpt");
    outcome.best_model.save(&best_path).map_err(|e| file_error(&best_path, e))?;
    manifest.output(&best_path);
    let final_path = args.out.join("final.ckpt");
    outcome.final_model.save(&final_path).map_err(|e| file_error(&final_path, e))?;
    manifest.output(&final_path);
    let history_path = args.out.join("history.tsv");
    std::fs::write(&history_path, history_table(&outcome.history))
        .map_err(|e| file_error(&history_path, e))?;
    manifest.output(&history_path);
    let splits_path = args.out.join("splits.tsv");
    std::fs::write(&splits_path, split_to_text(&split))
        .map_err(|e| file_error(&splits_path, e))?;
    manifest.output(&splits_path);

    if split.test.is_empty() {
        println!("{label} test split is empty; no metrics written");
    } else {
        let metrics =
            evaluate(&outcome.best_model, &loaded.dataset, &split.test, resolved.train.batch_size)?;
        let metrics_path = args.out.join("metrics.tsv");
        std::fs::write(&metrics_path, metrics_to_text(&metrics))
            .map_err(|e| file_error(&metrics_path, e))?;
        manifest.output(&metrics_path);
        println!(
            "{label} test weighted_f1 {:.4} mae {:.4} over {} samples",
            metrics.weighted_f1,
            metrics.mae,
            split.test.len()
        );
    }
    manifest.write(&args.out)?;
    Ok(())
}
