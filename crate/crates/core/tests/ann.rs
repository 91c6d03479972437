use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use revenue_core::agent::synthetic::{standard_set, two_clusters};
use revenue_core::agent::*;

fn accuracy(model: &AnnModel, data: &[(Vec<f64>, f64)]) -> f64 {
    let right = data.iter().filter(|(x, y)| (model.forward(x).unwrap() >= 0.5) == (*y >= 0.5)).count();
    right as f64 / data.len() as f64
}

#[test]
fn separable_clusters_are_learned_in_500_epochs() {
    let data = two_clusters(400, 17);
    let opts = TrainOptions { epochs: 500, learning_rate: 1.0, seed: 3, base_version: 0 };
    let (model, curve) = train(&LAYER_SIZES, &data, opts).unwrap();
    let acc = accuracy(&model, &data);
    assert!(acc >= 0.95, "accuracy {acc}");
    assert_eq!(model.version, 1);
    assert!(curve.last().unwrap() < &curve[0]);
}

#[test]
fn loss_never_rises_at_small_learning_rate() {
    let data = two_clusters(400, 17);
    let opts = TrainOptions { epochs: 500, learning_rate: 0.1, seed: 3, base_version: 0 };
    let (_, curve) = train(&LAYER_SIZES, &data, opts).unwrap();
    for (epoch, w) in curve.windows(2).enumerate() {
        assert!(w[1] <= w[0], "loss rose at epoch {epoch}: {} -> {}", w[0], w[1]);
    }
}

#[test]
fn same_seed_same_bits() {
    let data = two_clusters(100, 5);
    let opts = TrainOptions { epochs: 50, learning_rate: 0.5, seed: 11, base_version: 4 };
    let (a, ca) = train(&LAYER_SIZES, &data, opts).unwrap();
    let (b, cb) = train(&LAYER_SIZES, &data, opts).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(ca.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), cb.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.version, 5);
    let (c, _) = train(&LAYER_SIZES, &data, TrainOptions { seed: 12, ..opts }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn zero_model_has_chance_auc() {
    let set = standard_set(1000, 8);
    let zero = AnnModel::zeros(&LAYER_SIZES, 0);
    let scores: Vec<f64> = set.iter().map(|e| zero.forward(&e.features.to_array()).unwrap()).collect();
    let labels: Vec<bool> = set.iter().map(LabeledExample::is_fraud).collect();
    let m = evaluate(&scores, &labels, DEFAULT_ALERT_THRESHOLD);
    assert!((m.auc - 0.5).abs() <= 0.05);
    assert_eq!(m.recall, 0.0);
}

fn trained_on_standard_set() -> AnnModel {
    let pairs = to_training_pairs(&standard_set(1000, 21));
    let opts = TrainOptions { epochs: 3000, learning_rate: 2.0, seed: 9, base_version: 0 };
    train(&LAYER_SIZES, &pairs, opts).unwrap().0
}

#[test]
fn standard_set_is_learned() {
    let model = trained_on_standard_set();
    let held_out = standard_set(1000, 22);
    let scores: Vec<f64> = held_out.iter().map(|e| model.forward(&e.features.to_array()).unwrap()).collect();
    let labels: Vec<bool> = held_out.iter().map(LabeledExample::is_fraud).collect();
    let m = evaluate(&scores, &labels, DEFAULT_ALERT_THRESHOLD);
    assert!(m.recall >= 0.9 && m.precision >= 0.8, "{m:?}");
}

#[test]
fn larger_deviation_rarely_lowers_the_score() {
    let model = trained_on_standard_set();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let probes = 2000;
    let mut monotone = 0;
    for _ in 0..probes {
        let mut x: [f64; 6] = std::array::from_fn(|_| rng.random::<f64>());
        x[5] = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        let (a, b) = (rng.random::<f64>(), rng.random::<f64>());
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        x[0] = lo;
        let s_lo = model.forward(&x).unwrap();
        x[0] = hi;
        let s_hi = model.forward(&x).unwrap();
        if s_hi >= s_lo {
            monotone += 1;
        }
    }
    let share = monotone as f64 / probes as f64;
    assert!(share >= 0.95, "monotone share {share}");
}
