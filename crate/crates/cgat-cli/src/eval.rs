//! `eval`: score a saved checkpoint on a graph cache, optionally restricted
//! to one partition of a split file written by train.

use std::path::PathBuf;

use cgat_model::Model;
use cgat_train::evaluate;

use crate::cache::{load_dataset, parse_split_file};
use crate::config::FileConfig;
use crate::error::{file_error, CliError, Result};
use crate::report::metrics_to_text;
use crate::run_manifest::RunManifest;

#[derive(clap::Args)]
pub struct EvalArgs {
    /// Checkpoint to evaluate.
    #[arg(long)]
    pub model: PathBuf,
    /// Graph cache directory produced by preprocess.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for metrics and the run record.
    #[arg(long)]
    pub out: PathBuf,
    /// Split assignment file written by train; restricts scoring to one
    /// partition.
    #[arg(long)]
    pub splits: Option<PathBuf>,
    /// Partition to score when --splits is given: train, val, or test
    /// [default: test].
    #[arg(long)]
    pub split: Option<String>,
    /// Evaluation batch size [default: 32].
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    /// Root seed recorded for provenance [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optional key=value config file; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let cfg = FileConfig::from_flag(args.config.as_deref())?;
    let seed = args.seed.or(cfg.number("seed")?).unwrap_or(0);
    let batch_size = args.batch_size.or(cfg.number("batch-size")?).unwrap_or(32);
    if batch_size == 0 {
        return Err(CliError::Usage("batch-size must be at least 1".into()));
    }
    let partition = args.split.as_deref().or(cfg.raw("split")).unwrap_or("test");
    if !matches!(partition, "train" | "val" | "test") {
        return Err(CliError::Usage(format!(
            "unknown split {partition:?}, expected train|val|test"
        )));
    }
    if args.split.is_some() && args.splits.is_none() {
        return Err(CliError::Usage("--split needs a --splits assignment file".into()));
    }

    let model = Model::load(&args.model).map_err(|e| file_error(&args.model, e))?;
    let loaded = load_dataset(&args.data, model.config().features)?;
    let indices: Vec<usize> = match &args.splits {
        None => (0..loaded.dataset.len()).collect(),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| file_error(path, e))?;
            let split = parse_split_file(&text, path, loaded.dataset.len())?;
            match partition {
                "train" => split.train,
                "val" => split.val,
                _ => split.test,
            }
        }
    };
    if indices.is_empty() {
        return Err(CliError::Data(format!("the {partition} partition is empty")));
    }
    let metrics = evaluate(&model, &loaded.dataset, &indices, batch_size)?;

    std::fs::create_dir_all(&args.out).map_err(|e| file_error(&args.out, e))?;
    let mut manifest = RunManifest::new("eval", seed);
    manifest.config("batch-size", batch_size);
    if args.splits.is_some() {
        manifest.config("split", partition);
    }
    manifest.input(&args.model)?;
    manifest.input(&loaded.manifest_path)?;
    for file in &loaded.files {
        manifest.input(file)?;
    }
    if let Some(path) = &args.splits {
        manifest.input(path)?;
    }
    let metrics_path = args.out.join("metrics.tsv");
    std::fs::write(&metrics_path, metrics_to_text(&metrics))
        .map_err(|e| file_error(&metrics_path, e))?;
    manifest.output(&metrics_path);
    manifest.write(&args.out)?;
    println!(
        "weighted_f1 {:.4} mae {:.4} over {} samples",
        metrics.weighted_f1,
        metrics.mae,
        indices.len()
    );
    Ok(())
}
