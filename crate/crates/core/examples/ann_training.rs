//! Train the fraud scorer on labeled transactions and measure it on a
//! held-out set.
//!
//! ```bash
//! cargo run -p revenue-core --example ann_training
//! ```

use revenue_core::agent::synthetic::standard_set;
use revenue_core::agent::{evaluate, to_training_pairs, train, AnnModel, TrainOptions, DEFAULT_ALERT_THRESHOLD, LAYER_SIZES};

fn main() {
    let train_set = standard_set(1_000, 1);
    let test_set = standard_set(1_000, 2);
    let fraud = train_set.iter().filter(|e| e.is_fraud()).count();
    println!("training on {} examples ({fraud} fraudulent), layers {:?}", train_set.len(), LAYER_SIZES);

    let opts = TrainOptions { epochs: 2_000, learning_rate: 1.0, seed: 7, base_version: 0 };
    let (model, curve) = train(&LAYER_SIZES, &to_training_pairs(&train_set), opts).unwrap();
    for (epoch, loss) in curve.iter().enumerate().step_by(400) {
        println!("  epoch {epoch:>5}  loss {loss:.5}");
    }
    println!("  final loss {:.5}, model version {}", curve.last().unwrap(), model.version);

    let labels: Vec<bool> = test_set.iter().map(|e| e.is_fraud()).collect();
    for (name, m) in [("untrained", AnnModel::zeros(&LAYER_SIZES, 0)), ("trained", model.clone())] {
        let scores: Vec<f64> = test_set.iter().map(|e| m.forward(&e.features.to_array()).unwrap()).collect();
        let r = evaluate(&scores, &labels, DEFAULT_ALERT_THRESHOLD);
        println!(
            "{name:>9}: precision {:.3} recall {:.3} accuracy {:.3} auc {:.3}",
            r.precision, r.recall, r.accuracy, r.auc
        );
    }

    let path = std::env::temp_dir().join("revenue-example-model.json");
    model.save(&path).unwrap();
    let back = AnnModel::load(&path).unwrap();
    println!("saved to {} and reloaded: identical = {}", path.display(), back == model);
}
