//! End-to-end behavior of the training loop and the metric/sweep plumbing
//! on small synthetic graph datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cgat_graph::{ClsMode, Graph};
use cgat_mesh::FeatureChannels;
use cgat_model::{Model, ModelConfig, RunMode};
use cgat_tensor::{Tape, Tensor};
use cgat_train::{
    adam_step, depth_sweep, evaluate, evaluate_predictions, history_table, stratified_split,
    sweep_grid, train, AdamState, Dataset, TrainConfig,
};

/// Ring graphs whose feature sign separates two classes cleanly.
fn separable_dataset(rng: &mut ChaCha8Rng, per_class: usize) -> Dataset {
    let mut graphs = Vec::new();
    let mut labels = Vec::new();
    for class in 0..2usize {
        for _ in 0..per_class {
            let n = 5 + rng.random_range(0..4);
            let x: Vec<f64> = (0..n * 2)
                .map(|_| {
                    let magnitude = 0.2 + 0.8 * rng.random::<f64>();
                    if class == 0 {
                        -magnitude
                    } else {
                        magnitude
                    }
                })
                .collect();
            let mut edges = Vec::new();
            for i in 0..n as u32 {
                let j = (i + 1) % n as u32;
                edges.push((i, j));
                edges.push((j, i));
            }
            graphs.push(Graph::new(Tensor::matrix(n, 2, x).unwrap(), edges).unwrap());
            labels.push(class);
        }
    }
    Dataset::new(graphs, labels, 2, FeatureChannels::Both).unwrap()
}

fn small_model_config(blocks: usize, hidden: usize) -> ModelConfig {
    ModelConfig {
        blocks,
        heads: 2,
        hidden,
        features: FeatureChannels::Both,
        classes: 2,
        ..ModelConfig::default()
    }
}

#[test]
fn one_epoch_smoke_run_produces_finite_history() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data = separable_dataset(&mut rng, 4);
    let split = stratified_split(&data.labels, 2, 0).unwrap();
    let model = Model::init("cgat", small_model_config(1, 8), 2).unwrap();
    let config = TrainConfig { epochs: 1, batch_size: 4, ..TrainConfig::default() };
    let outcome = train(model, &data, &split, &config).unwrap();
    assert_eq!(outcome.history.len(), 1);
    let row = outcome.history[0];
    assert!(row.train_loss.is_finite());
    assert_eq!(row.lr, 0.001);
    let table = history_table(&outcome.history);
    assert!(table.starts_with("epoch\ttrain_loss\tval_loss\tval_f1\tlr\n"));
    assert_eq!(table.lines().count(), 2);
}

#[test]
fn same_seed_training_runs_are_bitwise_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = separable_dataset(&mut rng, 20);
    let split = stratified_split(&data.labels, 2, 1).unwrap();
    let config = TrainConfig { epochs: 3, batch_size: 4, seed: 11, ..TrainConfig::default() };
    let run = || {
        let model = Model::init("cgat", small_model_config(1, 8), 4).unwrap();
        train(model, &data, &split, &config).unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a.history, b.history, "history must replay exactly");
    for (pa, pb) in a.final_model.store().iter().zip(b.final_model.store().iter()) {
        assert_eq!(pa.value.data(), pb.value.data(), "{} drifted between runs", pa.name);
    }
    for (pa, pb) in a.best_model.store().iter().zip(b.best_model.store().iter()) {
        assert_eq!(pa.value.data(), pb.value.data());
    }
    assert_eq!(a.best_epoch, b.best_epoch);
}

#[test]
fn training_separable_data_improves_the_loss_and_f1() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = separable_dataset(&mut rng, 12);
    let split = stratified_split(&data.labels, 2, 2).unwrap();
    let model = Model::init("cgat", small_model_config(1, 16), 6).unwrap();
    let config = TrainConfig { epochs: 12, batch_size: 8, seed: 7, ..TrainConfig::default() };
    let outcome = train(model, &data, &split, &config).unwrap();
    let first = outcome.history.first().unwrap();
    let last = outcome.history.last().unwrap();
    assert!(
        last.train_loss < first.train_loss,
        "loss should fall: {} -> {}",
        first.train_loss,
        last.train_loss
    );
    let metrics = evaluate(&outcome.best_model, &data, &split.test, 8).unwrap();
    assert!(
        metrics.weighted_f1 > 0.7,
        "clean sign separation should be learnable, got F1 {}",
        metrics.weighted_f1
    );
}

/// An 8-sample batch of cleanly separable graphs must be overfittable: a
/// 2-block, 32-wide model drives the batch loss below 0.05 within 200
/// Adam steps at the default learning rate.
#[test]
fn overfitting_one_batch_drives_the_loss_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data = separable_dataset(&mut rng, 4);
    let indices: Vec<usize> = (0..8).collect();
    let config = ModelConfig { dropout_p: 0.0, ..small_model_config(2, 32) };
    let mut model = Model::init("cgat", config, 9).unwrap();
    let batch = data.batch(&indices, Some(ClsMode::Directed)).unwrap();
    let labels = data.labels_of(&indices);
    let mut adam = AdamState::new(model.store(), 0.9, 0.999, 1e-8);
    let mut losses = Vec::new();
    for _ in 0..200 {
        model.store_mut().zero_grads();
        let mut tape = Tape::new();
        let logits = model.forward(&mut tape, &batch, &mut RunMode::Eval, None).unwrap();
        let (loss, _) = tape.softmax_cross_entropy(logits, &labels).unwrap();
        losses.push(tape.value(loss).item());
        if *losses.last().unwrap() < 0.05 {
            break;
        }
        tape.backward(loss, model.store_mut()).unwrap();
        adam_step(model.store_mut(), &mut adam, 0.001);
    }
    assert!(
        losses.last().unwrap() < &0.05,
        "loss stuck at {} after {} steps",
        losses.last().unwrap(),
        losses.len()
    );
    assert!(losses.len() <= 200, "threshold must arrive within the step budget");
    let midpoint = losses.len().min(50) - 1;
    assert!(
        losses[midpoint] < losses[0],
        "the descent should be visible well before convergence: {} -> {}",
        losses[0],
        losses[midpoint]
    );
}

#[test]
fn evaluate_matches_an_exhaustive_confusion_oracle() {
    // Independent oracle: per-class precision/recall composed into F1,
    // support weighting, direct MAE. Checked against every pair of truth
    // and prediction vectors over 3 classes up to length 4 and a random
    // slice of the longer vectors up to length 6.
    let oracle = |truth: &[usize], predicted: &[usize], classes: usize| -> (f64, f64) {
        let n = truth.len() as f64;
        let mut weighted_f1 = 0.0;
        for c in 0..classes {
            let tp = truth
                .iter()
                .zip(predicted)
                .filter(|&(&t, &p)| t == c && p == c)
                .count() as f64;
            let support = truth.iter().filter(|&&t| t == c).count() as f64;
            let predicted_c = predicted.iter().filter(|&&p| p == c).count() as f64;
            let precision = if predicted_c > 0.0 { tp / predicted_c } else { 0.0 };
            let recall = if support > 0.0 { tp / support } else { 0.0 };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            weighted_f1 += support / n * f1;
        }
        let mae = truth
            .iter()
            .zip(predicted)
            .map(|(&t, &p)| (t as f64 - p as f64).abs())
            .sum::<f64>()
            / n;
        (weighted_f1, mae)
    };

    let unpack = |mut code: usize, len: usize| -> Vec<usize> {
        let mut v = vec![0usize; len];
        for slot in v.iter_mut() {
            *slot = code % 3;
            code /= 3;
        }
        v
    };
    for len in 1..=4usize {
        let combos = 3usize.pow(len as u32);
        for t_code in 0..combos {
            let truth = unpack(t_code, len);
            for p_code in 0..combos {
                let predicted = unpack(p_code, len);
                let metrics = evaluate_predictions(&truth, &predicted, 3).unwrap();
                let (f1, mae) = oracle(&truth, &predicted, 3);
                assert!(
                    (metrics.weighted_f1 - f1).abs() < 1e-12,
                    "truth {truth:?} predicted {predicted:?}: {} vs {f1}",
                    metrics.weighted_f1
                );
                assert!((metrics.mae - mae).abs() < 1e-12);
                let support_sum: usize = metrics.confusion.iter().flatten().sum();
                assert_eq!(support_sum, len);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for len in 5..=6usize {
        for _ in 0..20_000 {
            let truth: Vec<usize> = (0..len).map(|_| rng.random_range(0..3)).collect();
            let predicted: Vec<usize> = (0..len).map(|_| rng.random_range(0..3)).collect();
            let metrics = evaluate_predictions(&truth, &predicted, 3).unwrap();
            let (f1, mae) = oracle(&truth, &predicted, 3);
            assert!((metrics.weighted_f1 - f1).abs() < 1e-12);
            assert!((metrics.mae - mae).abs() < 1e-12);
        }
    }
}

#[test]
fn depth_sweep_emits_a_deterministic_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let data = separable_dataset(&mut rng, 10);
    let split = stratified_split(&data.labels, 2, 3).unwrap();
    let base = small_model_config(1, 8);
    let tconf = TrainConfig { epochs: 2, batch_size: 4, seed: 13, ..TrainConfig::default() };
    let run = || {
        depth_sweep(
            "cgat",
            &data,
            &split,
            &base,
            &tconf,
            &[1, 2],
            &[ClsMode::Directed],
            &[FeatureChannels::Both, FeatureChannels::Curvature],
            1,
        )
        .unwrap()
    };
    let cells = run();
    assert_eq!(cells.len(), 4, "2 depths x 1 mode x 2 feature sets");
    for cell in &cells {
        assert!(cell.mean_f1.is_finite());
        assert!(cell.mean_mae.is_finite());
        assert_eq!(cell.per_run_f1.len(), 1);
    }
    let again = run();
    for (a, b) in cells.iter().zip(&again) {
        assert_eq!(a.per_run_f1, b.per_run_f1, "sweep must be reproducible");
    }
    let grid = sweep_grid(&cells, "cgat");
    let lines: Vec<&str> = grid.lines().collect();
    assert_eq!(lines[0], "model\tboth\tcurv");
    assert_eq!(lines.len(), 3, "header plus one row per (depth, direction)");
    assert!(lines[1].starts_with("1-CGAT→\t"));
    assert!(lines[2].starts_with("2-CGAT→\t"));
}

#[test]
fn feature_projection_narrows_the_dataset() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let data = separable_dataset(&mut rng, 3);
    let curv = data.with_features(FeatureChannels::Curvature).unwrap();
    assert_eq!(curv.graphs[0].d_in(), 1);
    assert_eq!(curv.labels, data.labels);
    for (a, b) in data.graphs.iter().zip(&curv.graphs) {
        assert_eq!(a.edges(), b.edges());
        for r in 0..a.num_nodes() {
            assert_eq!(a.x().row(r)[0], b.x().row(r)[0], "column 0 is the curvature channel");
        }
    }
    assert!(curv.with_features(FeatureChannels::Distance).is_err());
}
