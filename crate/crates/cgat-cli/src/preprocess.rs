//! `preprocess`: decimate, normalize, and featurize every mesh in a dataset
//! into the graph cache that training consumes.

use std::path::PathBuf;

use cgat_graph::mesh_to_graph;
use cgat_mesh::{
    apply_scaler, decimate_qem, fit_scaler, load_mesh, normalize_unit_sphere, read_manifest,
    write_manifest, FeatureChannels, FeatureSet, ManifestEntry,
};
use cgat_tensor::Tensor;

use crate::cache::{graph_to_text, CACHE_MANIFEST_FILE, SCALER_FILE};
use crate::config::FileConfig;
use crate::error::{file_error, CliError, Result};
use crate::run_manifest::RunManifest;

#[derive(clap::Args)]
pub struct PreprocessArgs {
    /// Dataset directory holding meshes and a manifest, as written by gen.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for the graph cache.
    #[arg(long)]
    pub out: PathBuf,
    /// Decimation target in vertices [default: 751].
    #[arg(long = "target-vertices")]
    pub target_vertices: Option<usize>,
    /// Root seed recorded for provenance [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optional key=value config file; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: &PreprocessArgs) -> Result<()> {
    let cfg = FileConfig::from_flag(args.config.as_deref())?;
    let seed = args.seed.or(cfg.number("seed")?).unwrap_or(0);
    let target = args.target_vertices.or(cfg.number("target-vertices")?).unwrap_or(751);
    if target < 4 {
        return Err(CliError::Usage(format!(
            "target-vertices must be at least 4, got {target}"
        )));
    }

    let mut manifest = RunManifest::new("preprocess", seed);
    manifest.config("target-vertices", target);

    let source_manifest = args.data.join("manifest.tsv");
    let entries =
        read_manifest(&source_manifest).map_err(|e| file_error(&source_manifest, e))?;
    if entries.is_empty() {
        return Err(file_error(&source_manifest, "empty dataset manifest"));
    }
    manifest.input(&source_manifest)?;

    let mut meshes = Vec::with_capacity(entries.len());
    let mut sets = Vec::with_capacity(entries.len());
    for entry in &entries {
        let path = args.data.join(&entry.path);
        manifest.input(&path)?;
        let mesh = load_mesh(&path).map_err(|e| file_error(&path, e))?;
        let decimated =
            decimate_qem(&mesh, target).map_err(|e| file_error(&path, e))?;
        let normed = normalize_unit_sphere(&decimated).map_err(|e| file_error(&path, e))?;
        let set = FeatureSet::compute(&normed).map_err(|e| file_error(&path, e))?;
        meshes.push(normed);
        sets.push(set);
    }
    let scaler = fit_scaler(&sets, FeatureChannels::Both)?;

    std::fs::create_dir_all(&args.out).map_err(|e| file_error(&args.out, e))?;
    let mut cache_entries = Vec::with_capacity(entries.len());
    for (i, (entry, (mesh, set))) in entries.iter().zip(meshes.iter().zip(&sets)).enumerate() {
        let matrix = apply_scaler(&scaler, set);
        let x = Tensor::new(&[matrix.rows, matrix.cols], matrix.data)?;
        let graph = mesh_to_graph(mesh, x)?;
        let name = format!("sample_{i:04}.graph.tsv");
        let path = args.out.join(&name);
        std::fs::write(&path, graph_to_text(&graph, entry.label))
            .map_err(|e| file_error(&path, e))?;
        manifest.output(&path);
        cache_entries.push(ManifestEntry { path: name, label: entry.label, split: None });
    }
    let cache_manifest = args.out.join(CACHE_MANIFEST_FILE);
    write_manifest(&cache_entries, &cache_manifest)
        .map_err(|e| file_error(&cache_manifest, e))?;
    manifest.output(&cache_manifest);
    let scaler_path = args.out.join(SCALER_FILE);
    scaler.save(&scaler_path).map_err(|e| file_error(&scaler_path, e))?;
    manifest.output(&scaler_path);
    manifest.write(&args.out)?;

    let (lo, hi) = meshes
        .iter()
        .map(|m| m.n_vertices())
        .fold((usize::MAX, 0), |(lo, hi), n| (lo.min(n), hi.max(n)));
    println!(
        "cached {} graphs with {}..={} nodes into {}",
        cache_entries.len(),
        lo,
        hi,
        args.out.display()
    );
    Ok(())
}
