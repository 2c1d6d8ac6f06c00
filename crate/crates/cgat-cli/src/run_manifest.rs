//! Provenance record written by every command: the resolved configuration,
//! content hashes of the inputs, and the produced outputs. Re-running the
//! same command over the same inputs reproduces the outputs bitwise; only
//! the recorded wall-clock differs.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::error::{file_error, Result};

pub const RUN_MANIFEST_FILE: &str = "run_manifest.tsv";

pub struct RunManifest {
    command: &'static str,
    seed: u64,
    config: Vec<(String, String)>,
    inputs: Vec<(PathBuf, String)>,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl RunManifest {
    pub fn new(command: &'static str, seed: u64) -> Self {
        Self {
            command,
            seed,
            config: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl Display) {
        self.config.push((key.to_string(), value.to_string()));
    }

    /// Record an input file along with its content hash.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path)?;
        self.inputs.push((path.to_path_buf(), digest));
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Write the record into `dir`, which then holds exactly one manifest:
    /// re-running a command into the same directory replaces it.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("command\t{}\n", self.command));
        out.push_str(&format!("seed\t{}\n", self.seed));
        for (key, value) in &self.config {
            out.push_str(&format!("config\t{key}\t{value}\n"));
        }
        for (path, digest) in &self.inputs {
            out.push_str(&format!("input\t{}\t{}\n", path.display(), digest));
        }
        for path in &self.outputs {
            let shown = path.strip_prefix(dir).unwrap_or(path);
            out.push_str(&format!("output\t{}\n", shown.display()));
        }
        out.push_str(&format!("wall_clock_s\t{:.3}\n", self.started.elapsed().as_secs_f64()));
        let target = dir.join(RUN_MANIFEST_FILE);
        std::fs::write(&target, out).map_err(|e| file_error(&target, e))
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| file_error(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex::encode(hasher.finalize()))
}
