//! End-to-end tests driving the compiled binary through temp directories.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cgat"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("the binary should launch");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{} should be readable: {e}", path.display()))
}

/// One generated+preprocessed dataset shared by the training-path tests,
/// built on first use. Kept tiny so the whole suite stays fast.
fn shared_cache() -> &'static (TempDir, PathBuf, PathBuf) {
    static CACHE: OnceLock<(TempDir, PathBuf, PathBuf)> = OnceLock::new();
    CACHE.get_or_init(|| {
        let dir = TempDir::new().expect("temp dir");
        let meshes = dir.path().join("meshes");
        let cache = dir.path().join("cache");
        run_ok(bin().args([
            "gen",
            "--out",
            meshes.to_str().unwrap(),
            "--per-class",
            "4",
            "--seed",
            "11",
        ]));
        run_ok(bin().args([
            "preprocess",
            "--data",
            meshes.to_str().unwrap(),
            "--out",
            cache.to_str().unwrap(),
            "--target-vertices",
            "80",
        ]));
        (dir, meshes, cache)
    })
}

fn tiny_train(cache: &Path, out: &Path, seed: &str) -> Output {
    run_ok(bin().args([
        "train",
        "--data",
        cache.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--blocks",
        "1",
        "--heads",
        "2",
        "--hidden",
        "8",
        "--epochs",
        "2",
        "--batch-size",
        "4",
        "--seed",
        seed,
    ]))
}

#[test]
fn gen_writes_meshes_manifest_and_run_manifest() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("teeth");
    run_ok(bin().args([
        "gen",
        "--out",
        out.to_str().unwrap(),
        "--per-class",
        "10",
        "--seed",
        "7",
    ]));

    let plys: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".ply"))
        .collect();
    assert_eq!(plys.len(), 50, "10 per class across 5 stages");

    let manifest = read(&out.join("manifest.tsv"));
    let rows: Vec<&str> = manifest.lines().collect();
    assert_eq!(rows.len(), 50, "one manifest row per mesh");
    for label in 0..5u8 {
        let n = rows
            .iter()
            .filter(|r| r.split('\t').nth(1) == Some(&label.to_string()))
            .count();
        assert_eq!(n, 10, "class {label} should have 10 rows");
    }
    assert!(
        rows.iter().all(|r| r.ends_with("\t-")),
        "gen assigns no split"
    );
    let run = read(&out.join("run_manifest.tsv"));
    assert!(run.contains("command\tgen"), "run manifest names the command");
    assert!(run.contains("seed\t7"), "run manifest records the seed");
}

#[test]
fn preprocess_caches_scaled_graphs() {
    let dir = TempDir::new().unwrap();
    let meshes = dir.path().join("meshes");
    let cache = dir.path().join("cache");
    run_ok(bin().args([
        "gen",
        "--out",
        meshes.to_str().unwrap(),
        "--per-class",
        "1",
        "--seed",
        "3",
    ]));
    run_ok(bin().args([
        "preprocess",
        "--data",
        meshes.to_str().unwrap(),
        "--out",
        cache.to_str().unwrap(),
        "--target-vertices",
        "90",
    ]));

    assert!(cache.join("manifest.tsv").is_file(), "cache manifest exists");
    assert!(cache.join("scaler.tsv").is_file(), "scaler exists");
    let graphs: Vec<_> = std::fs::read_dir(&cache)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(".graph.tsv"))
        .collect();
    assert_eq!(graphs.len(), 5, "one cached graph per mesh");
    for path in &graphs {
        for line in read(path).lines().filter(|l| l.starts_with("v\t")) {
            for cell in line.split('\t').skip(1) {
                let v: f64 = cell.parse().expect("feature cells parse");
                assert!(
                    (-1.0..=1.0).contains(&v),
                    "scaled feature {v} escapes [-1, 1] in {}",
                    path.display()
                );
            }
        }
    }
}

#[test]
fn same_seed_training_is_reproducible() {
    let (_dir, _meshes, cache) = shared_cache();
    let out_a = TempDir::new().unwrap();
    let out_b = TempDir::new().unwrap();
    tiny_train(cache, out_a.path(), "5");
    tiny_train(cache, out_b.path(), "5");
    for name in ["best.ckpt", "final.ckpt", "history.tsv"] {
        let a = std::fs::read(out_a.path().join(name)).unwrap();
        let b = std::fs::read(out_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} should be bitwise identical across runs");
    }
}

#[test]
fn explain_exports_ply_and_sidecar() {
    let (_dir, meshes, cache) = shared_cache();
    let train_out = TempDir::new().unwrap();
    tiny_train(cache, train_out.path(), "9");

    let dir = TempDir::new().unwrap();
    let ply_out = dir.path().join("maps").join("tooth.ply");
    let out = run_ok(bin().args([
        "explain",
        "--model",
        train_out.path().join("best.ckpt").to_str().unwrap(),
        "--mesh",
        meshes.join("tooth_0000.ply").to_str().unwrap(),
        "--scaler",
        cache.join("scaler.tsv").to_str().unwrap(),
        "--out",
        ply_out.to_str().unwrap(),
        "--target-vertices",
        "80",
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("wrote attention"), "explain reports its output");

    let ply = read(&ply_out);
    let vertex_line = ply
        .lines()
        .find(|l| l.starts_with("element vertex"))
        .expect("ply declares vertices");
    let n: usize = vertex_line.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!((78..=84).contains(&n), "vertex count {n} should sit near the target");
    assert!(ply.contains("property float quality"), "scalar channel present");

    let sidecar = read(&ply_out.with_extension("sidecar.tsv"));
    let sha = sidecar
        .lines()
        .find(|l| l.starts_with("checkpoint_sha256\t"))
        .and_then(|l| l.split('\t').nth(1))
        .expect("sidecar records the checkpoint hash");
    assert_eq!(sha.len(), 64, "sha256 is 64 hex chars");
    assert!(sha.chars().all(|c| c.is_ascii_hexdigit()), "hash is hex");
    assert!(
        dir.path().join("maps").join("run_manifest.tsv").is_file(),
        "run manifest lands next to the outputs"
    );
}

#[test]
fn usage_errors_exit_with_code_one() {
    let out = bin()
        .args(["gen", "--out", "/nonexistent", "--no-such-flag"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "unknown flag is a usage error");

    let out = bin()
        .args(["train", "--data", "/nonexistent", "--out", "/also-nonexistent", "--features", "neon"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "bad enum value is caught before IO");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("usage error"), "stderr explains: {stderr}");
}

#[test]
fn data_errors_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    let out = bin()
        .args([
            "train",
            "--data",
            dir.path().join("missing").to_str().unwrap(),
            "--out",
            dir.path().join("run").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "missing cache dir is a data error");

    let out = bin()
        .args([
            "eval",
            "--model",
            dir.path().join("missing.ckpt").to_str().unwrap(),
            "--data",
            dir.path().join("missing").to_str().unwrap(),
            "--out",
            dir.path().join("scores").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "missing checkpoint is a data error");
}

#[test]
fn train_help_documents_defaults() {
    let out = run_ok(bin().args(["train", "--help"]));
    let help = String::from_utf8_lossy(&out.stdout);
    for needle in [
        "--features",
        "[default: both]",
        "[default: 0.001]",
        "[default: directed]",
        "[default: max]",
    ] {
        assert!(help.contains(needle), "help should mention {needle}");
    }
}

#[test]
fn flags_outrank_config_file_values() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "per-class=3\nseed=9\n").unwrap();
    let out = dir.path().join("teeth");
    run_ok(bin().args([
        "gen",
        "--out",
        out.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--per-class",
        "1",
    ]));
    let run = read(&out.join("run_manifest.tsv"));
    assert!(
        run.contains("config\tper-class\t1"),
        "flag wins over config: {run}"
    );
    assert!(run.contains("seed\t9"), "config supplies the seed: {run}");
    let plys = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .ends_with(".ply")
        })
        .count();
    assert_eq!(plys, 5, "one mesh per class under --per-class 1");
}

#[test]
fn sweep_prints_and_saves_a_grid() {
    let (_dir, _meshes, cache) = shared_cache();
    let out_dir = TempDir::new().unwrap();
    let out = run_ok(bin().args([
        "sweep",
        "--data",
        cache.to_str().unwrap(),
        "--out",
        out_dir.path().to_str().unwrap(),
        "--blocks",
        "1",
        "--cls",
        "directed",
        "--features",
        "curv",
        "--repeats",
        "1",
        "--heads",
        "2",
        "--hidden",
        "8",
        "--epochs",
        "1",
        "--batch-size",
        "4",
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("model\tcurv"), "grid header printed: {stdout}");
    assert!(stdout.contains("1-CGAT\u{2192}"), "variant row printed: {stdout}");

    let grid = read(&out_dir.path().join("sweep.tsv"));
    assert_eq!(grid, stdout.as_ref(), "saved grid matches the printed one");
    let cells = read(&out_dir.path().join("cells.tsv"));
    assert!(cells.starts_with("model\truns\tmean_f1\tmean_mae\tper_run_f1"));
    assert_eq!(cells.lines().count(), 2, "header plus one cell");
}
