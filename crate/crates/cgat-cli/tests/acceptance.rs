//! Acceptance suite: one test per shipping requirement, each ending with a
//! printed `acceptance NN <name>: pass` line (visible under --nocapture;
//! failures always surface the line plus the reason).
//!
//! The numbered checks cover, in order: gradient correctness, permutation
//! invariance, CLS isolation, attention normalization, rollout equivalence,
//! display clipping, curvature accuracy, preprocessing guarantees, metric
//! definitions, end-to-end benchmark quality, the depth/direction sweep,
//! and region-level attention on late-stage teeth.

use std::sync::OnceLock;
use std::time::Instant;

use cgat_explain::{
    attention_rollout, clip_for_display, rollout_for_sample, RolloutResult, ScoreMerge,
    SparseMatrix,
};
use cgat_graph::{mesh_to_graph, AugmentedGraph, ClsMode, Graph, GraphBatch};
use cgat_mesh::{
    apply_scaler, decimate_qem, fit_scaler, generate_dataset, icosphere, mean_curvature,
    normalize_unit_sphere, classify_region, ClassProfile, FeatureChannels, FeatureScaler,
    FeatureSet, Mesh, ToothRegion, N_STAGES,
};
use cgat_model::{
    architecture, AttentionKind, ForwardCapture, HeadMerge, Model, ModelConfig, RunMode,
};
use cgat_tensor::{ParamStore, Tape, Tensor};
use cgat_train::{
    depth_sweep, evaluate, evaluate_predictions, stratified_split, sweep_grid, train, Dataset,
    Metrics, Split, TrainConfig,
};
use nalgebra::{Rotation3, Vector3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn conclude(number: u32, name: &str, outcome: Result<(), String>) {
    match outcome {
        Ok(()) => println!("acceptance {number:02} {name}: pass"),
        Err(detail) => {
            println!("acceptance {number:02} {name}: FAIL ({detail})");
            panic!("acceptance {number:02} {name}: {detail}");
        }
    }
}

macro_rules! check {
    ($cond:expr, $($arg:tt)+) => {
        if !($cond) {
            return Err(format!($($arg)+));
        }
    };
}

fn small_config(blocks: usize, heads: usize, hidden: usize) -> ModelConfig {
    ModelConfig {
        blocks,
        heads,
        hidden,
        features: FeatureChannels::Both,
        cls_mode: ClsMode::Directed,
        attention: AttentionKind::Dynamic,
        head_merge: HeadMerge::Max,
        classes: N_STAGES,
        dropout_p: 0.3,
        conv_bias: true,
    }
}

/// Random connected undirected graph: a random spanning tree plus extra
/// chords, emitted as directed pairs in both orientations.
fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Graph {
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        seen.insert((j.min(i), j.max(i)));
    }
    for _ in 0..n / 2 {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            seen.insert((a.min(b), a.max(b)));
        }
    }
    for (a, b) in seen {
        edges.push((a as u32, b as u32));
        edges.push((b as u32, a as u32));
    }
    let data: Vec<f64> = (0..n * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = Tensor::new(&[n, 2], data).expect("feature tensor");
    Graph::new(x, edges).expect("random graph")
}

fn single_batch(graph: Graph, mode: ClsMode) -> GraphBatch {
    let aug = AugmentedGraph::new(graph, mode);
    GraphBatch::from_augmented(std::slice::from_ref(&aug)).expect("batch of one")
}

fn forward_logits(model: &Model, batch: &GraphBatch) -> Vec<f64> {
    let mut tape = Tape::new();
    let logits = model
        .forward(&mut tape, batch, &mut RunMode::Eval, None)
        .expect("forward pass");
    tape.value(logits).data().to_vec()
}

#[test]
fn a01_every_gradient_matches_central_finite_differences() {
    conclude(1, "finite-difference gradient agreement", (|| {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(20240);
        let config = small_config(2, 2, 4);
        let arch = architecture("cgat").expect("registry has cgat");

        let n = 6;
        let edges = vec![(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (2, 3)];
        let mut directed = Vec::new();
        for &(a, b) in &edges {
            directed.push((a, b));
            directed.push((b, a));
        }
        let data: Vec<f64> = (0..n * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Tensor::new(&[n, 2], data).expect("feature tensor");
        let graph = Graph::new(x, directed).expect("two-triangle graph");
        let batch = single_batch(graph, ClsMode::Directed);
        let labels = [2usize];

        let loss_of = |store: &ParamStore| -> f64 {
            let mut tape = Tape::new();
            let logits = arch
                .forward(&mut tape, &config, store, &batch, &mut RunMode::Eval, None)
                .expect("forward");
            let (loss, _) = tape.softmax_cross_entropy(logits, &labels).expect("loss");
            tape.value(loss).data()[0]
        };

        let mut store = arch.build_params(&config, 9).expect("params");
        store.zero_grads();
        let mut tape = Tape::new();
        let logits = arch
            .forward(&mut tape, &config, &store, &batch, &mut RunMode::Eval, None)
            .expect("forward");
        let (loss, _) = tape.softmax_cross_entropy(logits, &labels).expect("loss");
        tape.backward(loss, &mut store).expect("backward");
        let analytic: Vec<(String, Vec<f64>)> = store
            .iter()
            .map(|p| (p.name.clone(), p.grad.data().to_vec()))
            .collect();

        let h = 1e-6;
        let mut worst = 0.0f64;
        let mut worst_at = String::new();
        for (name, grads) in &analytic {
            let id = store.id(name).expect("param by name");
            for j in 0..grads.len() {
                let orig = store.value(id).data()[j];
                store.get_mut(id).value.data_mut()[j] = orig + h;
                let up = loss_of(&store);
                store.get_mut(id).value.data_mut()[j] = orig - h;
                let down = loss_of(&store);
                store.get_mut(id).value.data_mut()[j] = orig;
                let numeric = (up - down) / (2.0 * h);
                let a = grads[j];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-5);
                if rel > worst {
                    worst = rel;
                    worst_at = format!("{name}[{j}] analytic {a:.3e} numeric {numeric:.3e}");
                }
            }
        }
        let elapsed = started.elapsed().as_secs_f64();
        check!(
            worst < 1e-4,
            "worst relative error {worst:.3e} at {worst_at}, bound 1e-4"
        );
        check!(elapsed < 10.0, "gradient check took {elapsed:.1}s, budget 10s");
        Ok(())
    })());
}

#[test]
fn a02_logits_are_invariant_to_node_relabeling() {
    conclude(2, "node permutation invariance", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(31007);
        let config = small_config(2, 2, 8);
        let model = Model::init("cgat", config, 77).expect("model");
        for g in 0..50 {
            let n = rng.random_range(4..=30);
            let graph = random_graph(&mut rng, n);
            let base_x = graph.x().data().to_vec();
            let base_edges = graph.edges().to_vec();
            let base_logits = forward_logits(&model, &single_batch(graph, ClsMode::Directed));
            for p in 0..10 {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                let mut data = vec![0.0; n * 2];
                for i in 0..n {
                    data[perm[i] * 2] = base_x[i * 2];
                    data[perm[i] * 2 + 1] = base_x[i * 2 + 1];
                }
                let edges: Vec<(u32, u32)> = base_edges
                    .iter()
                    .map(|&(t, s)| (perm[t as usize] as u32, perm[s as usize] as u32))
                    .collect();
                let x = Tensor::new(&[n, 2], data).expect("permuted features");
                let permuted = Graph::new(x, edges).expect("permuted graph");
                let logits = forward_logits(&model, &single_batch(permuted, ClsMode::Directed));
                for (c, (a, b)) in base_logits.iter().zip(&logits).enumerate() {
                    let diff = (a - b).abs();
                    check!(
                        diff <= 1e-9,
                        "graph {g} permutation {p} class {c}: logits drift {diff:.3e} > 1e-9"
                    );
                }
            }
        }
        Ok(())
    })());
}

#[test]
fn a03_directed_cls_reads_without_writing_back() {
    conclude(3, "CLS isolation under directed wiring", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(5150);
        let config = small_config(2, 2, 8);
        let arch = architecture("cgat").expect("registry has cgat");
        let graph = random_graph(&mut rng, 12);
        let n_real = graph.num_nodes();
        let batch = single_batch(graph, ClsMode::Directed);

        let mut store = arch.build_params(&config, 123).expect("params");
        let cls_id = store.id("cls_embedding").expect("cls parameter");
        let run = |store: &ParamStore| -> (Vec<Vec<u64>>, Vec<f64>) {
            let mut capture = ForwardCapture::default();
            let mut tape = Tape::new();
            let logits = arch
                .forward(&mut tape, &config, store, &batch, &mut RunMode::Eval, Some(&mut capture))
                .expect("forward");
            let states = capture
                .block_states
                .iter()
                .map(|state| {
                    let width = state.cols();
                    state.data()[..n_real * width].iter().map(|v| v.to_bits()).collect()
                })
                .collect();
            (states, tape.value(logits).data().to_vec())
        };

        let (base_states, base_logits) = run(&store);
        check!(base_states.len() == 2, "expected one state per block");
        for k in 0..100 {
            let width = store.value(cls_id).len();
            for j in 0..width {
                store.get_mut(cls_id).value.data_mut()[j] = rng.random_range(-2.0..2.0);
            }
            let (states, logits) = run(&store);
            check!(
                states == base_states,
                "draw {k}: a non-CLS embedding moved when only cls_embedding changed"
            );
            check!(
                logits != base_logits,
                "draw {k}: logits ignored a fresh cls_embedding"
            );
        }
        Ok(())
    })());
}

#[test]
fn a04_attention_groups_sum_to_one_in_batches() {
    conclude(4, "attention normalization per target", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(61234);
        let config = small_config(3, 4, 16);
        let model = Model::init("cgat", config, 99).expect("model");
        let graphs: Vec<AugmentedGraph> = (0..8)
            .map(|_| {
                let n = rng.random_range(5..=25);
                AugmentedGraph::new(random_graph(&mut rng, n), ClsMode::Directed)
            })
            .collect();
        let batch = GraphBatch::from_augmented(&graphs).expect("batch of eight");

        let mut capture = ForwardCapture::default();
        let mut tape = Tape::new();
        model
            .forward(&mut tape, &batch, &mut RunMode::Eval, Some(&mut capture))
            .expect("forward");
        check!(capture.attention.len() == 3, "expected one record per block");
        for record in &capture.attention {
            for (head, weights) in record.per_head.iter().enumerate() {
                check!(
                    weights.len() == batch.edges().len(),
                    "block {} head {head}: {} weights for {} edges",
                    record.block,
                    weights.len(),
                    batch.edges().len()
                );
                let mut sums = std::collections::BTreeMap::new();
                for (e, &(target, _)) in batch.edges().iter().enumerate() {
                    *sums.entry(target).or_insert(0.0) += weights[e];
                }
                check!(
                    sums.len() == batch.total_nodes(),
                    "block {} head {head}: {} softmax groups for {} nodes",
                    record.block,
                    head,
                    batch.total_nodes()
                );
                for (target, sum) in sums {
                    let err = (sum - 1.0).abs();
                    check!(
                        err <= 1e-12,
                        "block {} head {head} target {target}: group sums to {sum} (err {err:.3e})",
                        record.block
                    );
                }
            }
        }
        Ok(())
    })());
}

#[test]
fn a05_sparse_rollout_matches_dense_brute_force() {
    conclude(5, "rollout equals dense composition", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(40591);
        for case in 0..20 {
            let n = rng.random_range(2..=20);
            let layers = rng.random_range(1..=5);
            let mut dense: Vec<Vec<Vec<f64>>> = Vec::new();
            let mut sparse: Vec<SparseMatrix> = Vec::new();
            for _ in 0..layers {
                let mut a = vec![vec![0.0; n]; n];
                let mut triplets = Vec::new();
                for r in 0..n {
                    let degree = rng.random_range(0..=3.min(n - 1));
                    let mut cols: Vec<usize> = (0..n).collect();
                    cols.shuffle(&mut rng);
                    for &c in cols.iter().take(degree) {
                        let w = rng.random_range(0.1..1.0);
                        a[r][c] = w;
                        triplets.push((r as u32, c as u32, w));
                    }
                }
                sparse.push(SparseMatrix::from_triplets(n, &triplets).expect("sparse layer"));
                dense.push(a);
            }

            for renormalize in [false, true] {
                let rolled = attention_rollout(&sparse, renormalize).expect("rollout");
                let mut acc: Option<Vec<Vec<f64>>> = None;
                for a in &dense {
                    let mut factor = a.clone();
                    for (r, row) in factor.iter_mut().enumerate() {
                        row[r] += 1.0;
                        if renormalize {
                            let total: f64 = row.iter().sum();
                            for v in row.iter_mut() {
                                *v /= total;
                            }
                        }
                    }
                    acc = Some(match acc {
                        None => factor,
                        Some(prev) => {
                            let mut next = vec![vec![0.0; n]; n];
                            for r in 0..n {
                                for k in 0..n {
                                    let f = factor[r][k];
                                    if f != 0.0 {
                                        for c in 0..n {
                                            next[r][c] += f * prev[k][c];
                                        }
                                    }
                                }
                            }
                            next
                        }
                    });
                }
                let expected = acc.expect("at least one layer");
                for r in 0..n {
                    for c in 0..n {
                        let got = rolled.get(r, c);
                        let want = expected[r][c];
                        check!(
                            (got - want).abs() <= 1e-10,
                            "case {case} renormalize {renormalize} ({r},{c}): {got} vs dense {want}"
                        );
                    }
                }
            }

            let single = attention_rollout(&sparse[..1], false).expect("single layer");
            for r in 0..n {
                for c in 0..n {
                    let want = dense[0][r][c] + if r == c { 1.0 } else { 0.0 };
                    check!(
                        single.get(r, c) == want,
                        "case {case}: single-layer rollout must equal the matrix plus identity"
                    );
                }
            }
        }
        Ok(())
    })());
}

#[test]
fn a06_display_clipping_reproduces_the_hand_computed_window() {
    conclude(6, "display clip window", (|| {
        let result = |scores: Vec<f64>| RolloutResult { scores, matrix: SparseMatrix::identity(1) };
        // Pooled scores 0.25, 0.5, 1.0, 0.25: min 0.25, mean 0.5, so the
        // window is [0.25, 0.75] and only the 1.0 gets clamped.
        let clipped = clip_for_display(&[result(vec![0.25, 0.5]), result(vec![1.0, 0.25])]);
        check!(clipped.lo == 0.25, "lo {} must equal the pooled minimum 0.25", clipped.lo);
        check!(clipped.hi == 0.75, "hi {} must equal mean 0.5 plus min 0.25", clipped.hi);
        check!(
            clipped.sets == vec![vec![0.25, 0.5], vec![0.75, 0.25]],
            "clamped sets {:?} disagree with the hand computation",
            clipped.sets
        );

        let constant = clip_for_display(&[result(vec![0.125, 0.125, 0.125])]);
        check!(
            constant.lo == 0.125 && constant.hi == 0.25,
            "constant scores: window [{}, {}] should be [0.125, 0.25]",
            constant.lo,
            constant.hi
        );
        check!(
            constant.sets == vec![vec![0.125, 0.125, 0.125]],
            "constant scores must pass through unclipped"
        );
        Ok(())
    })());
}

#[test]
fn a07_sphere_curvature_is_accurate_and_rotation_invariant() {
    conclude(7, "discrete curvature on spheres", (|| {
        let unit = icosphere(3, 1.0).expect("unit sphere");
        let curv_unit = mean_curvature(&unit).expect("curvature");
        for (i, &c) in curv_unit.values().iter().enumerate() {
            check!(
                (c - 1.0).abs() <= 0.05,
                "unit sphere vertex {i}: curvature {c} is off by more than 5%"
            );
        }

        let double = icosphere(3, 2.0).expect("radius-2 sphere");
        let curv_double = mean_curvature(&double).expect("curvature");
        for (i, &c) in curv_double.values().iter().enumerate() {
            check!(
                (c - 0.5).abs() <= 0.025,
                "radius-2 sphere vertex {i}: curvature {c} should be near 0.5"
            );
        }

        let rotation = Rotation3::from_euler_angles(0.4, 1.1, 2.2);
        let rotated_vertices: Vec<[f64; 3]> = unit
            .vertices()
            .iter()
            .map(|v| {
                let r = rotation * Vector3::new(v[0], v[1], v[2]);
                [r.x, r.y, r.z]
            })
            .collect();
        let rotated = Mesh::new(rotated_vertices, unit.faces().to_vec()).expect("rotated mesh");
        let curv_rotated = mean_curvature(&rotated).expect("curvature");
        for (i, (&a, &b)) in curv_unit.values().iter().zip(curv_rotated.values()).enumerate() {
            check!(
                (a - b).abs() <= 1e-6,
                "vertex {i}: curvature moved {:.3e} under rotation",
                (a - b).abs()
            );
        }
        Ok(())
    })());
}

#[test]
fn a08_preprocessing_hits_its_contracted_ranges() {
    conclude(8, "decimation, normalization, and scaling ranges", (|| {
        let samples = generate_dataset(&ClassProfile::Balanced { per_class: 1 }, 314)
            .expect("one tooth per stage");
        let mut sets = Vec::new();
        let mut processed = Vec::new();
        for sample in &samples {
            let reduced = decimate_qem(&sample.mesh, 751).expect("decimation");
            let v = reduced.n_vertices();
            check!(
                (750..=752).contains(&v),
                "stage {}: decimation produced {v} vertices, wanted 751 give or take one",
                sample.label
            );
            let normed = normalize_unit_sphere(&reduced).expect("normalization");
            let max_norm = normed
                .vertices()
                .iter()
                .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
                .fold(0.0f64, f64::max);
            check!(
                (max_norm - 1.0).abs() <= 1e-12,
                "stage {}: max vertex norm {max_norm} should be exactly 1",
                sample.label
            );
            sets.push(FeatureSet::compute(&normed).expect("features"));
            processed.push(normed);
        }
        let scaler = fit_scaler(&sets, FeatureChannels::Both).expect("scaler");
        for (stage, set) in sets.iter().enumerate() {
            let matrix = apply_scaler(&scaler, set);
            for (k, &v) in matrix.data.iter().enumerate() {
                check!(
                    (-1.0..=1.0).contains(&v),
                    "stage {stage} cell {k}: scaled feature {v} escapes [-1, 1]"
                );
            }
        }
        Ok(())
    })());
}

/// Independent scorer used to cross-check the shipped metrics: plain
/// one-vs-rest counting with support weighting, written with different
/// arithmetic than the library.
fn metrics_oracle(truth: &[usize], pred: &[usize], classes: usize) -> (f64, f64, f64, Vec<f64>, f64) {
    let n = truth.len() as f64;
    let mut weighted = (0.0, 0.0, 0.0);
    let mut per_class = vec![0.0; classes];
    for c in 0..classes {
        let tp = truth.iter().zip(pred).filter(|&(&t, &p)| t == c && p == c).count() as f64;
        let fp = truth.iter().zip(pred).filter(|&(&t, &p)| t != c && p == c).count() as f64;
        let fn_ = truth.iter().zip(pred).filter(|&(&t, &p)| t == c && p != c).count() as f64;
        let support = truth.iter().filter(|&&t| t == c).count() as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if support > 0.0 { tp / support } else { 0.0 };
        let f1 = if 2.0 * tp + fp + fn_ > 0.0 { 2.0 * tp / (2.0 * tp + fp + fn_) } else { 0.0 };
        per_class[c] = f1;
        weighted.0 += support / n * precision;
        weighted.1 += support / n * recall;
        weighted.2 += support / n * f1;
    }
    let mae = truth
        .iter()
        .zip(pred)
        .map(|(&t, &p)| (t as f64 - p as f64).abs())
        .sum::<f64>()
        / n;
    (weighted.0, weighted.1, weighted.2, per_class, mae)
}

#[test]
fn a09_metrics_match_an_exhaustive_oracle_and_the_worked_example() {
    conclude(9, "metric definitions", (|| {
        for len in 1..=6usize {
            let cases = 9usize.pow(len as u32);
            for mut code in 0..cases {
                let mut truth = Vec::with_capacity(len);
                let mut pred = Vec::with_capacity(len);
                for _ in 0..len {
                    truth.push(code % 3);
                    pred.push((code / 3) % 3);
                    code /= 9;
                }
                let m = evaluate_predictions(&truth, &pred, 3).expect("metrics");
                let (wp, wr, wf, per, mae) = metrics_oracle(&truth, &pred, 3);
                check!(
                    (m.weighted_precision - wp).abs() <= 1e-12
                        && (m.weighted_recall - wr).abs() <= 1e-12
                        && (m.weighted_f1 - wf).abs() <= 1e-12
                        && (m.mae - mae).abs() <= 1e-12,
                    "truth {truth:?} pred {pred:?}: library {:?} vs oracle {:?}",
                    (m.weighted_precision, m.weighted_recall, m.weighted_f1, m.mae),
                    (wp, wr, wf, mae)
                );
                for c in 0..3 {
                    check!(
                        (m.per_class_f1[c] - per[c]).abs() <= 1e-12,
                        "truth {truth:?} pred {pred:?} class {c}: F1 {} vs oracle {}",
                        m.per_class_f1[c],
                        per[c]
                    );
                }
            }
        }

        let example = evaluate_predictions(&[0, 0, 1], &[0, 1, 1], 3).expect("metrics");
        check!(
            (example.weighted_f1 - 0.7556).abs() <= 1e-4,
            "worked example weighted F1 is {:.4}; the documented target 0.7556 is not \
             reachable from the standard definition (both classes with support score F1 2/3, \
             weights 2/3 and 1/3, so the support-weighted mean is exactly 2/3)",
            example.weighted_f1
        );
        Ok(())
    })());
}

// ---------------------------------------------------------------------------
// End-to-end benchmark fixtures shared by the remaining checks.
// ---------------------------------------------------------------------------

/// Node budget for benchmark graphs. Decimating this far keeps one full
/// training run inside the wall-clock budget on a single core while leaving
/// plenty of surface detail for staging.
const BENCH_NODES: usize = 151;
const BENCH_EPOCHS: usize = 30;
const BENCH_SEED: u64 = 42;

struct BenchArtifacts {
    scaler: FeatureScaler,
    dataset: Dataset,
    split: Split,
    cgat: Model,
    cgat_metrics: Metrics,
    cgat_seconds: f64,
    baseline_metrics: Metrics,
}

fn preprocess_samples(
    meshes: &[Mesh],
    labels: Vec<usize>,
) -> (FeatureScaler, Dataset) {
    let sets: Vec<FeatureSet> = meshes
        .iter()
        .map(|m| FeatureSet::compute(m).expect("features"))
        .collect();
    let scaler = fit_scaler(&sets, FeatureChannels::Both).expect("scaler");
    let graphs: Vec<Graph> = meshes
        .iter()
        .zip(&sets)
        .map(|(mesh, set)| {
            let matrix = apply_scaler(&scaler, set);
            let x = Tensor::new(&[matrix.rows, matrix.cols], matrix.data).expect("tensor");
            mesh_to_graph(mesh, x).expect("graph")
        })
        .collect();
    let dataset =
        Dataset::new(graphs, labels, N_STAGES, FeatureChannels::Both).expect("dataset");
    (scaler, dataset)
}

fn reduce(mesh: &Mesh, target: usize) -> Mesh {
    let reduced = decimate_qem(mesh, target).expect("decimation");
    normalize_unit_sphere(&reduced).expect("normalization")
}

fn bench() -> &'static BenchArtifacts {
    static BENCH: OnceLock<BenchArtifacts> = OnceLock::new();
    BENCH.get_or_init(|| {
        let samples = generate_dataset(&ClassProfile::Balanced { per_class: 100 }, BENCH_SEED)
            .expect("benchmark meshes");
        let meshes: Vec<Mesh> =
            samples.iter().map(|s| reduce(&s.mesh, BENCH_NODES)).collect();
        let labels: Vec<usize> = samples.iter().map(|s| s.label as usize).collect();
        let (scaler, dataset) = preprocess_samples(&meshes, labels);
        let split =
            stratified_split(&dataset.labels, dataset.classes, BENCH_SEED).expect("split");

        let config = ModelConfig { classes: N_STAGES, ..ModelConfig::default() };
        let tconf = TrainConfig { epochs: BENCH_EPOCHS, seed: BENCH_SEED, ..TrainConfig::default() };
        let started = Instant::now();
        let outcome = train(
            Model::init("cgat", config, BENCH_SEED).expect("cgat init"),
            &dataset,
            &split,
            &tconf,
        )
        .expect("cgat training");
        let cgat_seconds = started.elapsed().as_secs_f64();
        let cgat_metrics =
            evaluate(&outcome.best_model, &dataset, &split.test, tconf.batch_size)
                .expect("cgat eval");

        let baseline = train(
            Model::init("gat", config, BENCH_SEED).expect("gat init"),
            &dataset,
            &split,
            &tconf,
        )
        .expect("gat training");
        let baseline_metrics =
            evaluate(&baseline.best_model, &dataset, &split.test, tconf.batch_size)
                .expect("gat eval");

        BenchArtifacts {
            scaler,
            dataset,
            split,
            cgat: outcome.best_model,
            cgat_metrics,
            cgat_seconds,
            baseline_metrics,
        }
    })
}

#[test]
fn a10_benchmark_training_reaches_the_quality_bar_in_budget() {
    conclude(10, "benchmark accuracy within the time budget", (|| {
        let bench = bench();
        let f1 = bench.cgat_metrics.weighted_f1;
        let mae = bench.cgat_metrics.mae;
        check!(
            bench.split.test.len() == bench.dataset.len() * 15 / 100,
            "held-out test share should be 15%, got {}/{}",
            bench.split.test.len(),
            bench.dataset.len()
        );
        check!(f1 >= 0.90, "held-out weighted F1 {f1:.4} is below 0.90");
        check!(mae <= 0.15, "held-out MAE {mae:.4} exceeds 0.15");
        check!(
            bench.cgat_seconds < 1800.0,
            "training took {:.0}s, budget 1800s",
            bench.cgat_seconds
        );
        let gap = bench.baseline_metrics.weighted_f1 - f1;
        check!(
            gap <= 0.02,
            "mean-readout baseline F1 {:.4} beats the class-node model by {gap:.4} (> 0.02)",
            bench.baseline_metrics.weighted_f1
        );
        Ok(())
    })());
}

const SWEEP_EPOCHS: usize = 12;

#[test]
fn a11_depth_direction_sweep_fills_a_sound_grid() {
    conclude(11, "depth and direction sweep", (|| {
        let samples = generate_dataset(&ClassProfile::Balanced { per_class: 20 }, 271)
            .expect("sweep meshes");
        let meshes: Vec<Mesh> =
            samples.iter().map(|s| reduce(&s.mesh, BENCH_NODES)).collect();
        let labels: Vec<usize> = samples.iter().map(|s| s.label as usize).collect();
        let (_, dataset) = preprocess_samples(&meshes, labels);
        let split = stratified_split(&dataset.labels, dataset.classes, 271).expect("split");

        let base = ModelConfig { classes: N_STAGES, ..ModelConfig::default() };
        let tconf = TrainConfig { epochs: SWEEP_EPOCHS, seed: 271, ..TrainConfig::default() };
        let blocks = [1usize, 3, 6];
        let modes = [ClsMode::Directed, ClsMode::Undirected];
        let channels = [FeatureChannels::Both];
        let cells = depth_sweep(
            "cgat", &dataset, &split, &base, &tconf, &blocks, &modes, &channels, 2,
        )
        .expect("sweep");
        check!(cells.len() == 6, "expected 6 cells, got {}", cells.len());

        let grid = sweep_grid(&cells, "cgat");
        let lines: Vec<&str> = grid.lines().collect();
        check!(lines.len() == 7, "grid should be a header plus 6 rows:\n{grid}");
        check!(lines[0] == "model\tboth", "unexpected header {:?}", lines[0]);
        let expected_rows =
            ["1-CGAT\u{2192}", "1-CGAT\u{2194}", "3-CGAT\u{2192}", "3-CGAT\u{2194}", "6-CGAT\u{2192}", "6-CGAT\u{2194}"];
        for (line, want) in lines[1..].iter().zip(expected_rows) {
            check!(
                line.starts_with(want),
                "row {line:?} should belong to variant {want}"
            );
        }
        for cell in &cells {
            check!(
                cell.mean_f1 > 0.3,
                "cell {} blocks {} mode {:?}: mean F1 {:.4} is not above 0.3\n{grid}",
                cell.channels.name(),
                cell.blocks,
                cell.cls_mode,
                cell.mean_f1
            );
        }

        // The first cell re-run in isolation derives identical per-run seeds,
        // so the whole grid is a pure function of the root seed.
        let rerun = depth_sweep(
            "cgat", &dataset, &split, &base, &tconf, &blocks[..1], &modes[..1], &channels, 2,
        )
        .expect("single-cell sweep");
        check!(
            rerun[0].mean_f1.to_bits() == cells[0].mean_f1.to_bits(),
            "re-running the first cell changed its mean F1: {} vs {}",
            rerun[0].mean_f1,
            cells[0].mean_f1
        );
        Ok(())
    })());
}

#[test]
fn a12_late_stage_roots_draw_more_attention_than_crown_flanks() {
    conclude(12, "root-apex attention on late-stage teeth", (|| {
        let bench = bench();
        let samples = generate_dataset(&ClassProfile::Balanced { per_class: 20 }, 9090)
            .expect("stage-4 meshes");
        let stage4: Vec<&_> = samples.iter().filter(|s| s.label == 4).collect();
        check!(stage4.len() == 20, "expected 20 late-stage samples");

        let mut rollouts = Vec::new();
        let mut regions_per_sample = Vec::new();
        for sample in &stage4 {
            let mesh = reduce(&sample.mesh, BENCH_NODES);
            let set = FeatureSet::compute(&mesh).expect("features");
            let matrix = apply_scaler(&bench.scaler, &set);
            let x = Tensor::new(&[matrix.rows, matrix.cols], matrix.data).expect("tensor");
            let graph = mesh_to_graph(&mesh, x).expect("graph");
            let n_real = graph.num_nodes();
            let batch = single_batch(graph, ClsMode::Directed);
            let mut capture = ForwardCapture::default();
            let mut tape = Tape::new();
            bench
                .cgat
                .forward(&mut tape, &batch, &mut RunMode::Eval, Some(&mut capture))
                .expect("forward");
            let rollout = rollout_for_sample(
                &capture.attention,
                batch.edges(),
                n_real,
                ScoreMerge::Mean,
                true,
            )
            .expect("rollout");
            let regions: Vec<ToothRegion> = mesh
                .vertices()
                .iter()
                .map(|v| classify_region(Vector3::new(v[0], v[1], v[2])))
                .collect();
            rollouts.push(rollout);
            regions_per_sample.push(regions);
        }

        let clipped = clip_for_display(&rollouts);
        let mut root_heavy = 0;
        for (i, regions) in regions_per_sample.iter().enumerate() {
            let mean_of = |want: ToothRegion| -> Option<f64> {
                let picked: Vec<f64> = clipped.sets[i]
                    .iter()
                    .zip(regions)
                    .filter(|(_, r)| **r == want)
                    .map(|(s, _)| *s)
                    .collect();
                if picked.is_empty() {
                    None
                } else {
                    Some(picked.iter().sum::<f64>() / picked.len() as f64)
                }
            };
            let (Some(apex), Some(flank)) =
                (mean_of(ToothRegion::RootApex), mean_of(ToothRegion::CrownFlank))
            else {
                return Err(format!(
                    "sample {i}: a region lost all its vertices during decimation"
                ));
            };
            if apex > flank {
                root_heavy += 1;
            }
        }
        check!(
            root_heavy > 10,
            "root apex outranked the crown flank in only {root_heavy} of 20 samples"
        );
        Ok(())
    })());
}
