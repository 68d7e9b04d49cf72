use proptest::prelude::*;
use rand::Rng as _;
use subreg::learners::{
    logistic_objective, margin_quantile, normalized_margin, normalized_margins, train_logreg, train_perceptron,
    LinearModel, LogRegConfig, Matrix, PerceptronConfig, SavedModel, TrainConfig,
};
use subreg::seeds::rng_from_seed;

fn random_instance(seed: u64) -> (Matrix, Vec<i8>, Vec<f64>, f64, f64) {
    let mut rng = rng_from_seed(seed);
    let rows = rng.random_range(2..8);
    let cols = rng.random_range(1..6);
    let dense: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let y = (0..rows).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
    let w = (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b = rng.random_range(-1.0..1.0);
    let l2 = if seed.is_multiple_of(2) { 0.0 } else { rng.random_range(0.0..0.1) };
    (Matrix::from_dense(cols, &dense).unwrap(), y, w, b, l2)
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs()).max(1e-8)
}

#[test]
fn gradient_matches_central_differences() {
    let h = 1e-5;
    for seed in 0..20 {
        let (x, y, w, b, l2) = random_instance(seed);
        let (_, gw, gb) = logistic_objective(&x, &y, &w, b, l2);
        for j in 0..w.len() {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[j] += h;
            down[j] -= h;
            let numeric =
                (logistic_objective(&x, &y, &up, b, l2).0 - logistic_objective(&x, &y, &down, b, l2).0) / (2.0 * h);
            assert!(rel_err(gw[j], numeric) < 1e-6, "seed {seed} w{j}: {} vs {numeric}", gw[j]);
        }
        let numeric =
            (logistic_objective(&x, &y, &w, b + h, l2).0 - logistic_objective(&x, &y, &w, b - h, l2).0) / (2.0 * h);
        assert!(rel_err(gb, numeric) < 1e-6, "seed {seed} bias: {gb} vs {numeric}");
    }
}

#[test]
fn objective_at_zero_is_log_two() {
    let (x, y, w, _, _) = random_instance(3);
    let (loss, _, _) = logistic_objective(&x, &y, &vec![0.0; w.len()], 0.0, 0.5);
    assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn logreg_fits_separable_one_hot_data() {
    let mut x = Matrix::new(4);
    let mut y = Vec::new();
    for i in 0..40 {
        x.push_one_hot(i % 4).unwrap();
        y.push(if i % 4 < 2 { 1 } else { -1 });
    }
    let run = train_logreg(&x, &y, LogRegConfig::SEPARABLE).unwrap();
    let margins = normalized_margins(&run.model, &x, &y).unwrap();
    assert!(margins.iter().all(|&m| m > 0.0));
}

#[test]
fn perceptron_stops_on_first_clean_epoch() {
    let x = Matrix::from_dense(2, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let run = train_perceptron(&x, &[1, -1], PerceptronConfig::default()).unwrap();
    assert!(run.converged);
    assert_eq!(run.mistakes, 2);
    assert_eq!(run.epochs, 2);
}

#[test]
fn quantile_is_nearest_rank() {
    let m: Vec<f64> = (1..=200).rev().map(f64::from).collect();
    assert_eq!(margin_quantile(&m, 0.01).unwrap(), 2.0);
    assert_eq!(margin_quantile(&m[..50], 0.01).unwrap(), 151.0);
    assert!(margin_quantile(&[], 0.01).is_err());
    assert!(margin_quantile(&m, 0.0).is_err());
}

#[test]
fn saved_model_round_trip_preserves_margins() {
    let (x, y, w, b, _) = random_instance(11);
    let model = LinearModel::from_parts(w, b);
    let saved = SavedModel {
        model: model.clone(),
        config: TrainConfig::Logreg(LogRegConfig::NOISY),
        dataset_fingerprint: "0123456789abcdef".into(),
        features: None,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    saved.save(&path).unwrap();
    let back = SavedModel::load(&path).unwrap();
    assert_eq!(back, saved);
    assert_eq!(normalized_margins(&back.model, &x, &y).unwrap(), normalized_margins(&model, &x, &y).unwrap());
}

proptest! {
    #[test]
    fn normalized_margin_is_scale_invariant(seed in 0u64..1000, c in 0.01f64..100.0) {
        let (x, y, w, b, _) = random_instance(seed);
        prop_assume!(w.iter().any(|&v| v != 0.0));
        let m = LinearModel::from_parts(w, b);
        for (i, &label) in y.iter().enumerate() {
            let row = x.to_dense_row(i);
            let a = normalized_margin(&m, &row, label).unwrap();
            let s = normalized_margin(&m.scaled(c), &row, label).unwrap();
            prop_assert!((a - s).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn perceptron_separates_one_hot_labels_within_bound(labels in prop::collection::vec(any::<bool>(), 4), seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let idx: Vec<usize> = (0..60).map(|_| rng.random_range(0..4)).collect();
        let y: Vec<i8> = idx.iter().map(|&i| if labels[i] { 1 } else { -1 }).collect();
        let mut x = Matrix::new(4);
        for &i in &idx {
            x.push_one_hot(i).unwrap();
        }
        let run = train_perceptron(&x, &y, PerceptronConfig::default()).unwrap();
        prop_assert!(run.converged);
        let s = labels.iter().filter(|&&l| l).count().max(1);
        prop_assert!(run.mistakes <= 4 * s);
        let preds: Vec<i8> = (0..x.nrows()).map(|i| subreg::learners::predict(&run.model, &x.to_dense_row(i)).unwrap()).collect();
        prop_assert_eq!(preds, y);
    }
}
