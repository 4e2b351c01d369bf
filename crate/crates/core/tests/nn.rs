use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use silofed::dataset::{EncodedDataset, FeatureSpan};
use silofed::nn::{
    backward, block_outputs, forward, init_model, predict, projected_input, train_local,
    weighted_bce_loss, Architecture, HighwayNetConfig, ModelParams, TensorRole, TrainOptions,
};

fn config(input_dim: usize, width: usize, blocks: usize, seed: u64) -> HighwayNetConfig {
    HighwayNetConfig {
        input_dim,
        hidden_width: width,
        n_blocks: blocks,
        init_seed: seed,
        ..Default::default()
    }
}

fn random_batch(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

fn loss_at(params: &ModelParams, x: &Array2<f64>, y: &[u8], w: f64) -> f64 {
    let (p, _) = forward(params, x.view()).unwrap();
    weighted_bce_loss(&p, y, w).unwrap()
}

/// Central finite differences of the loss, one coordinate at a time.
fn numeric_gradient(params: &ModelParams, x: &Array2<f64>, y: &[u8], w: f64, h: f64) -> Vec<f64> {
    let mut probe = params.clone();
    (0..params.len())
        .map(|i| {
            let orig = probe.values[i];
            probe.values[i] = orig + h;
            let up = loss_at(&probe, x, y, w);
            probe.values[i] = orig - h;
            let down = loss_at(&probe, x, y, w);
            probe.values[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn worst_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .filter(|(a, _)| a.abs() > 1e-7)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()))
        .fold(0.0, f64::max)
}

#[test]
fn gradient_matches_finite_differences_on_random_configs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..24 {
        let dim = rng.gen_range(1..=6);
        let width = rng.gen_range(1..=8);
        let blocks = rng.gen_range(1..=3);
        let mut cfg = config(dim, width, blocks, case);
        cfg.gate_bias_init = rng.gen_range(-1.5..1.5);
        if case % 4 == 3 {
            cfg.architecture = Architecture::Plain;
        }
        let params = init_model(&cfg).unwrap();
        let rows = rng.gen_range(1..=5);
        let x = random_batch(&mut rng, rows, dim);
        let y: Vec<u8> = (0..rows).map(|_| rng.gen_range(0..2)).collect();
        let w = rng.gen_range(0.5..6.0);
        let (_, cache) = forward(&params, x.view()).unwrap();
        let analytic = backward(&params, &cache, &y, w).unwrap();
        let numeric = numeric_gradient(&params, &x, &y, w, 1e-5);
        let err = worst_relative_error(&analytic, &numeric);
        assert!(err <= 1e-4, "case {case}: relative error {err}");
    }
}

#[test]
fn gradient_with_zero_gate_and_transform_weights() {
    let cfg = config(5, 4, 2, 3);
    let mut params = init_model(&cfg).unwrap();
    let layout = params.layout.clone();
    for t in &layout.tensors {
        if t.name.starts_with("block") && t.role == TensorRole::Weight {
            params.tensor_mut(t).fill(0.0);
        }
        // Keep transform pre-activations off the ReLU kink.
        if t.name.ends_with("transform.bias") {
            params.tensor_mut(t).fill(0.3);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_batch(&mut rng, 1, 5);
    for (y, w) in [(1u8, 4.0), (0u8, 4.0)] {
        let (_, cache) = forward(&params, x.view()).unwrap();
        let analytic = backward(&params, &cache, &[y], w).unwrap();
        let numeric = numeric_gradient(&params, &x, &[y], w, 1e-5);
        assert!(worst_relative_error(&analytic, &numeric) <= 1e-4);
    }
}

#[test]
fn duplicated_rows_give_single_row_gradient() {
    let params = init_model(&config(4, 3, 2, 8)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let one = random_batch(&mut rng, 1, 4);
    let mut two = Array2::zeros((2, 4));
    two.row_mut(0).assign(&one.row(0));
    two.row_mut(1).assign(&one.row(0));
    let (_, c1) = forward(&params, one.view()).unwrap();
    let (_, c2) = forward(&params, two.view()).unwrap();
    let g1 = backward(&params, &c1, &[1], 2.0).unwrap();
    let g2 = backward(&params, &c2, &[1, 1], 2.0).unwrap();
    for (a, b) in g1.iter().zip(&g2) {
        assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
    }
}

#[test]
fn positive_weight_does_not_touch_negative_rows() {
    let params = init_model(&config(4, 3, 2, 9)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_batch(&mut rng, 6, 4);
    let (_, cache) = forward(&params, x.view()).unwrap();
    let y = [0u8; 6];
    assert_eq!(
        backward(&params, &cache, &y, 1.0).unwrap(),
        backward(&params, &cache, &y, 2.0).unwrap()
    );
}

#[test]
fn stale_cache_is_rejected() {
    let a = init_model(&config(4, 3, 2, 1)).unwrap();
    let b = init_model(&config(4, 5, 2, 1)).unwrap();
    let x = Array2::zeros((2, 4));
    let (_, cache) = forward(&a, x.view()).unwrap();
    assert!(backward(&b, &cache, &[0, 1], 1.0).is_err());
    assert!(backward(&a, &cache, &[0], 1.0).is_err());
}

fn force_gates(params: &mut ModelParams, bias: f64) {
    let layout = params.layout.clone();
    for t in &layout.tensors {
        if t.name.contains(".gate.weight") {
            params.tensor_mut(t).fill(0.0);
        }
        if t.role == TensorRole::GateBias {
            params.tensor_mut(t).fill(bias);
        }
    }
}

#[test]
fn closed_gates_carry_the_input() {
    let mut params = init_model(&config(6, 5, 4, 11)).unwrap();
    force_gates(&mut params, -40.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_batch(&mut rng, 7, 6);
    let stack_in = projected_input(&params, x.view()).unwrap();
    let stack_out = block_outputs(&params, x.view()).unwrap();
    let worst = (&stack_in - &stack_out).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn open_gate_takes_the_transform_path() {
    let mut params = init_model(&config(3, 4, 1, 12)).unwrap();
    force_gates(&mut params, 40.0);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = random_batch(&mut rng, 5, 3);
    let stack_in = projected_input(&params, x.view()).unwrap();
    let w = params.layout.tensor("block0.transform.weight").unwrap().clone();
    let b = params.layout.tensor("block0.transform.bias").unwrap().clone();
    let w = Array2::from_shape_vec((4, 4), params.tensor(&w).to_vec()).unwrap();
    let b = ndarray::Array1::from(params.tensor(&b).to_vec());
    let relu = (stack_in.dot(&w) + &b).mapv(|v| v.max(0.0));
    let out = block_outputs(&params, x.view()).unwrap();
    let worst = (&relu - &out).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn probabilities_are_finite_and_open() {
    let params = init_model(&config(8, 6, 3, 13)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = random_batch(&mut rng, 50, 8);
    let p = predict(&params, x.view()).unwrap();
    assert!(p.iter().all(|v| v.is_finite() && *v > 0.0 && *v < 1.0));
    let (q, _) = forward(&params, x.view()).unwrap();
    assert_eq!(p, q);
}

#[test]
fn wrong_width_is_a_shape_error() {
    let params = init_model(&config(8, 6, 3, 13)).unwrap();
    let x = Array2::zeros((2, 7));
    assert!(matches!(
        forward(&params, x.view()),
        Err(silofed::Error::Shape { .. })
    ));
}

/// Two binary features, label = first feature (linearly separable).
fn separable(n: usize, seed: u64) -> EncodedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut design = Array2::zeros((n, 4));
    let mut labels = Vec::new();
    for i in 0..n {
        let a = rng.gen_range(0..2);
        let b = rng.gen_range(0..2);
        design[[i, a]] = 1.0;
        design[[i, 2 + b]] = 1.0;
        labels.push(a as u8);
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    EncodedDataset {
        design,
        labels,
        silo_ids: vec![1; n],
        spans: vec![
            FeatureSpan {
                name: "a".into(),
                start: 0,
                codes: vec![0, 1],
                derived: None,
            },
            FeatureSpan {
                name: "b".into(),
                start: 2,
                codes: vec![0, 1],
                derived: None,
            },
        ],
        n_pos,
        n_neg: n - n_pos,
    }
}

fn opts(epochs: usize) -> TrainOptions {
    TrainOptions {
        epochs,
        batch_size: 16,
        pos_weight: 1.0,
        seed: 4,
    }
}

#[test]
fn zero_epochs_is_identity() {
    let ds = separable(40, 1);
    let cfg = config(4, 4, 2, 1);
    let p0 = init_model(&cfg).unwrap();
    let rows: Vec<usize> = (0..40).collect();
    let (p, stats) = train_local(p0.clone(), &ds, &rows, &[], &cfg, &opts(0)).unwrap();
    assert_eq!(p, p0);
    assert!(stats.epoch_losses.is_empty());
    assert!(!stats.warnings.is_empty());
}

#[test]
fn separable_loss_decreases() {
    let ds = separable(200, 2);
    let cfg = config(4, 8, 2, 1);
    let rows: Vec<usize> = (0..200).collect();
    let (_, stats) = train_local(init_model(&cfg).unwrap(), &ds, &rows, &[], &cfg, &opts(20)).unwrap();
    assert_eq!(stats.epoch_losses.len(), 20);
    for w in stats.epoch_losses[..5].windows(2) {
        assert!(w[1] < w[0], "{:?}", stats.epoch_losses);
    }
    assert!(stats.epoch_losses[19] < stats.epoch_losses[0]);
}

#[test]
fn patience_one_stops_early_and_restores_best() {
    let ds = separable(120, 3);
    let cfg = HighwayNetConfig {
        early_stop_patience: 1,
        ..config(4, 4, 2, 5)
    };
    let train: Vec<usize> = (0..100).collect();
    // Two validation rows: F1 saturates or stalls within a few epochs.
    let val = [100usize, 101];
    let (params, stats) =
        train_local(init_model(&cfg).unwrap(), &ds, &train, &val, &cfg, &opts(60)).unwrap();
    assert!(stats.stopped_early);
    assert!(stats.epoch_losses.len() < 60);
    let best = stats.best_epoch.unwrap();
    assert_eq!(stats.epoch_losses.len(), best + 2);
    let f1 = silofed::metrics::evaluate_partition(&params, &ds, &val, 0.5).unwrap().f1;
    assert_eq!(f1, stats.best_val_f1);
}

#[test]
fn training_is_deterministic() {
    let ds = separable(64, 4);
    let cfg = config(4, 4, 2, 6);
    let rows: Vec<usize> = (0..64).collect();
    let run = || train_local(init_model(&cfg).unwrap(), &ds, &rows, &[], &cfg, &opts(3)).unwrap();
    let (a, sa) = run();
    let (b, sb) = run();
    assert_eq!(a, b);
    assert_eq!(sa, sb);
}
