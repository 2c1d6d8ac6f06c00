//! Command-line front end for the tooth staging pipeline: synthesize meshes,
//! preprocess them into graph caches, train and evaluate models, sweep model
//! variants, and export per-vertex attention maps.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or IO error.

use std::process::ExitCode;

use clap::Parser;

mod cache;
mod config;
mod error;
mod eval;
mod explain;
mod gen;
mod preprocess;
mod report;
mod run_manifest;
mod sweep;
mod train;

use error::{CliError, Result};

#[derive(Parser)]
#[command(name = "cgat", about = "Graph attention staging for 3D tooth meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand)]
enum Command {
    /// Generate a synthetic labeled tooth mesh dataset.
    Gen(gen::GenArgs),
    /// Decimate, normalize, and featurize meshes into a graph cache.
    Preprocess(preprocess::PreprocessArgs),
    /// Train a classifier on a graph cache.
    Train(train::TrainArgs),
    /// Score a trained checkpoint on a graph cache.
    Eval(eval::EvalArgs),
    /// Train a grid of depth/wiring/feature variants and tabulate scores.
    Sweep(sweep::SweepArgs),
    /// Export per-vertex attention for one mesh as a PLY scalar.
    Explain(explain::ExplainArgs),
}

/// Honor CGAT_THREADS when set; otherwise rayon picks the core count.
fn init_thread_pool() -> Result<()> {
    let Ok(raw) = std::env::var("CGAT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            CliError::Usage(format!("CGAT_THREADS must be a positive integer, got {raw:?}"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Data(format!("thread pool setup failed: {e}")))
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(args) => gen::run(args),
        Command::Preprocess(args) => preprocess::run(args),
        Command::Train(args) => train::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Sweep(args) => sweep::run(args),
        Command::Explain(args) => explain::run(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let run = init_thread_pool().and_then(|()| dispatch(&cli));
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
