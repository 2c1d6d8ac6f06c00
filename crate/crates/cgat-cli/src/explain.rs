//! `explain`: run a trained model on one mesh and export per-vertex attention
//! as a colorable PLY scalar plus a sidecar describing the clip window.

use std::path::{Path, PathBuf};

use cgat_explain::{clip_for_display, rollout_for_sample, Sidecar};
use cgat_graph::{mesh_to_graph, AugmentedGraph, GraphBatch};
use cgat_mesh::{
    apply_scaler, decimate_qem, load_mesh, normalize_unit_sphere, write_ply_scalar,
    FeatureChannels, FeatureMatrix, FeatureScaler, FeatureSet, VertexScalarField,
};
use cgat_model::{ForwardCapture, Model, RunMode};
use cgat_tensor::{Tape, Tensor};

use crate::config::{self, FileConfig};
use crate::error::{file_error, CliError, Result};
use crate::run_manifest::{sha256_file, RunManifest};

#[derive(clap::Args)]
pub struct ExplainArgs {
    /// Trained checkpoint to explain.
    #[arg(long)]
    pub model: PathBuf,
    /// Input mesh (PLY or OBJ).
    #[arg(long)]
    pub mesh: PathBuf,
    /// Feature scaler saved by preprocess.
    #[arg(long)]
    pub scaler: PathBuf,
    /// Output PLY path; the sidecar lands next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Decimation target in vertices [default: 751].
    #[arg(long = "target-vertices")]
    pub target_vertices: Option<usize>,
    /// Renormalize each rollout factor to row-sum 1: true or false [default: true].
    #[arg(long)]
    pub renormalize: Option<String>,
    /// Merge per-head attention by mean or max [default: mean].
    #[arg(long = "rollout-head-merge")]
    pub rollout_head_merge: Option<String>,
    /// Seed recorded in the run manifest [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optional key=value config file; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Keep the feature columns the model was trained on. The scaler always
/// describes what preprocess cached; a narrower model picks its column out
/// of a two-channel cache.
fn select_columns(
    matrix: &FeatureMatrix,
    cached: FeatureChannels,
    wanted: FeatureChannels,
) -> Result<FeatureMatrix> {
    if cached == wanted {
        return Ok(matrix.clone());
    }
    if cached != FeatureChannels::Both {
        return Err(CliError::Data(format!(
            "scaler provides {} but the model expects {}",
            cached.name(),
            wanted.name()
        )));
    }
    let col = match wanted {
        FeatureChannels::Curvature => 0,
        FeatureChannels::Distance => 1,
        FeatureChannels::Both => unreachable!("handled by the equality check"),
    };
    let data: Vec<f64> =
        (0..matrix.rows).map(|r| matrix.data[r * matrix.cols + col]).collect();
    Ok(FeatureMatrix { data, rows: matrix.rows, cols: 1 })
}

pub fn run(args: &ExplainArgs) -> Result<()> {
    let cfg = FileConfig::from_flag(args.config.as_deref())?;
    let seed = args.seed.or(cfg.number("seed")?).unwrap_or(0);
    let target = args
        .target_vertices
        .or(cfg.number("target-vertices")?)
        .unwrap_or(751);
    if target < 4 {
        return Err(CliError::Usage(format!(
            "target-vertices {target} cannot describe a closed surface"
        )));
    }
    let renormalize = config::parse_bool(
        args.renormalize.as_deref().or(cfg.raw("renormalize")).unwrap_or("true"),
    )?;
    let merge = config::parse_score_merge(
        args.rollout_head_merge
            .as_deref()
            .or(cfg.raw("rollout-head-merge"))
            .unwrap_or("mean"),
    )?;

    let model = Model::load(&args.model).map_err(|e| file_error(&args.model, e))?;
    let mconf = model.config().clone();
    let mesh = load_mesh(&args.mesh).map_err(|e| file_error(&args.mesh, e))?;
    let reduced = decimate_qem(&mesh, target).map_err(|e| file_error(&args.mesh, e))?;
    let normed = normalize_unit_sphere(&reduced).map_err(|e| file_error(&args.mesh, e))?;
    let features = FeatureSet::compute(&normed).map_err(|e| file_error(&args.mesh, e))?;
    let scaler = FeatureScaler::load(&args.scaler).map_err(|e| file_error(&args.scaler, e))?;
    let scaled = apply_scaler(&scaler, &features);
    let matrix = select_columns(&scaled, scaler.channels(), mconf.features)?;

    let x = Tensor::new(&[matrix.rows, matrix.cols], matrix.data)?;
    let graph = mesh_to_graph(&normed, x)?;
    let aug = AugmentedGraph::new(graph, mconf.cls_mode);
    let batch = GraphBatch::from_augmented(std::slice::from_ref(&aug))?;
    let mut capture = ForwardCapture::default();
    let mut tape = Tape::new();
    model.forward(&mut tape, &batch, &mut RunMode::Eval, Some(&mut capture))?;

    let rollout = rollout_for_sample(
        &capture.attention,
        batch.edges(),
        normed.n_vertices(),
        merge,
        renormalize,
    )?;
    let clipped = clip_for_display(std::slice::from_ref(&rollout));
    let field = VertexScalarField::new(clipped.sets[0].clone())?;

    let out_dir = args
        .out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(out_dir).map_err(|e| file_error(out_dir, e))?;
    write_ply_scalar(&normed, &field, &args.out).map_err(|e| file_error(&args.out, e))?;
    let sidecar = Sidecar {
        lo: clipped.lo,
        hi: clipped.hi,
        head_merge: merge,
        renormalize,
        checkpoint_sha256: sha256_file(&args.model)?,
    };
    let sidecar_path = args.out.with_extension("sidecar.tsv");
    std::fs::write(&sidecar_path, sidecar.to_text())
        .map_err(|e| file_error(&sidecar_path, e))?;

    let mut manifest = RunManifest::new("explain", seed);
    manifest.config("target-vertices", target);
    manifest.config("renormalize", renormalize);
    manifest.config("rollout-head-merge", merge.name());
    manifest.input(&args.model)?;
    manifest.input(&args.mesh)?;
    manifest.input(&args.scaler)?;
    manifest.output(&args.out);
    manifest.output(&sidecar_path);
    manifest.write(out_dir)?;
    println!(
        "wrote attention for {} vertices to {}",
        normed.n_vertices(),
        args.out.display()
    );
    Ok(())
}
