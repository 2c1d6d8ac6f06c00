//! `gen`: write a synthetic staged-tooth dataset and its manifest.

use std::path::PathBuf;

use cgat_mesh::{
    generate_dataset, write_manifest, write_ply, ClassProfile, ManifestEntry, N_STAGES,
};

use crate::config::FileConfig;
use crate::error::{file_error, CliError, Result};
use crate::run_manifest::RunManifest;

#[derive(clap::Args)]
pub struct GenArgs {
    /// Output directory for meshes and the dataset manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Root seed for shape sampling [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optional key=value config file; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Class profile: balanced or imbalanced [default: balanced].
    #[arg(long)]
    pub profile: Option<String>,
    /// Samples per class for the balanced profile [default: 10].
    #[arg(long = "per-class")]
    pub per_class: Option<usize>,
    /// Total sample count for the imbalanced profile [default: 528].
    #[arg(long)]
    pub total: Option<usize>,
}

pub fn run(args: &GenArgs) -> Result<()> {
    let cfg = FileConfig::from_flag(args.config.as_deref())?;
    let seed = args.seed.or(cfg.number("seed")?).unwrap_or(0);
    let profile_name = args.profile.as_deref().or(cfg.raw("profile")).unwrap_or("balanced");
    let profile = match profile_name {
        "balanced" => {
            let per_class = args.per_class.or(cfg.number("per-class")?).unwrap_or(10);
            if per_class == 0 {
                return Err(CliError::Usage("per-class must be at least 1".into()));
            }
            ClassProfile::Balanced { per_class }
        }
        "imbalanced" => {
            let total = args.total.or(cfg.number("total")?).unwrap_or(528);
            let profile = ClassProfile::Imbalanced { total };
            if profile.counts().iter().any(|&c| c == 0) {
                return Err(CliError::Usage(format!(
                    "total {total} is too small to populate all {N_STAGES} classes"
                )));
            }
            profile
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown profile {other:?}, expected balanced|imbalanced"
            )));
        }
    };

    let mut manifest = RunManifest::new("gen", seed);
    manifest.config("profile", profile_name);
    match &profile {
        ClassProfile::Balanced { per_class } => manifest.config("per-class", per_class),
        ClassProfile::Imbalanced { total } => manifest.config("total", total),
    }

    std::fs::create_dir_all(&args.out).map_err(|e| file_error(&args.out, e))?;
    let samples = generate_dataset(&profile, seed)?;
    let mut entries = Vec::with_capacity(samples.len());
    for (i, sample) in samples.iter().enumerate() {
        let name = format!("tooth_{i:04}.ply");
        let path = args.out.join(&name);
        write_ply(&sample.mesh, &path).map_err(|e| file_error(&path, e))?;
        manifest.output(&path);
        entries.push(ManifestEntry { path: name, label: sample.label, split: None });
    }
    let manifest_path = args.out.join("manifest.tsv");
    write_manifest(&entries, &manifest_path).map_err(|e| file_error(&manifest_path, e))?;
    manifest.output(&manifest_path);
    manifest.write(&args.out)?;
    println!(
        "generated {} meshes across {} stages into {}",
        samples.len(),
        N_STAGES,
        args.out.display()
    );
    Ok(())
}
