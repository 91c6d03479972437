//! Small fully connected network with logistic units throughout, trained
//! by full-batch gradient descent on mean binary cross-entropy.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Input width, hidden width and output width of the fraud scorer.
pub const LAYER_SIZES: [usize; 3] = [6, 8, 1];

#[derive(Debug, Error, PartialEq)]
pub enum AnnError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("training data needs both labels")]
    DegenerateData,
    #[error("loss became non-finite at epoch {0}")]
    NonFiniteLoss(usize),
    #[error("model file: {0}")]
    ModelFile(String),
}

/// Weights are stored per layer, row-major `[out][in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnModel {
    pub version: u32,
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Same shape as the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Version of the model being replaced; the result is one higher.
    pub base_version: u32,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl AnnModel {
    pub fn zeros(layer_sizes: &[usize], version: u32) -> Self {
        let (weights, biases) = layer_sizes
            .windows(2)
            .map(|w| (vec![0.0; w[0] * w[1]], vec![0.0; w[1]]))
            .unzip();
        AnnModel { version, layer_sizes: layer_sizes.to_vec(), weights, biases }
    }

    /// Xavier-uniform weights and zero biases, fixed by `seed`.
    pub fn random(layer_sizes: &[usize], seed: u64, version: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Self::zeros(layer_sizes, version);
        for (l, w) in model.weights.iter_mut().enumerate() {
            let limit = (6.0 / (layer_sizes[l] + layer_sizes[l + 1]) as f64).sqrt();
            for v in w.iter_mut() {
                *v = rng.random_range(-limit..limit);
            }
        }
        model
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn validate(&self) -> Result<(), AnnError> {
        let mismatch = |why: String| Err(AnnError::DimensionMismatch(why));
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return mismatch(format!("layer sizes {:?}", self.layer_sizes));
        }
        if *self.layer_sizes.last().unwrap() != 1 {
            return mismatch("the output layer must have one unit".into());
        }
        let layers = self.layer_sizes.len() - 1;
        if self.weights.len() != layers || self.biases.len() != layers {
            return mismatch(format!("{layers} layers but {} weight and {} bias blocks", self.weights.len(), self.biases.len()));
        }
        for l in 0..layers {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            if self.weights[l].len() != fan_in * fan_out || self.biases[l].len() != fan_out {
                return mismatch(format!("layer {l} parameters do not match {fan_in}x{fan_out}"));
            }
        }
        let finite = self.weights.iter().chain(&self.biases).flatten().all(|v| v.is_finite());
        if !finite {
            return mismatch("parameters must be finite".into());
        }
        Ok(())
    }

    /// Activations of every layer, input first. The last entry holds the
    /// output logit instead of its sigmoid.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let layers = self.weights.len();
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        for l in 0..layers {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let prev = &acts[l];
            let next: Vec<f64> = (0..fan_out)
                .map(|j| {
                    let row = &self.weights[l][j * fan_in..(j + 1) * fan_in];
                    let z = self.biases[l][j] + row.iter().zip(prev).map(|(w, a)| w * a).sum::<f64>();
                    if l + 1 == layers {
                        z
                    } else {
                        sigmoid(z)
                    }
                })
                .collect();
            acts.push(next);
        }
        acts
    }

    fn check_input(&self, x: &[f64]) -> Result<(), AnnError> {
        if x.len() != self.input_width() {
            return Err(AnnError::DimensionMismatch(format!("input has {} values, model expects {}", x.len(), self.input_width())));
        }
        Ok(())
    }

    /// Score in (0, 1).
    pub fn forward(&self, x: &[f64]) -> Result<f64, AnnError> {
        self.check_input(x)?;
        Ok(sigmoid(self.activations(x).last().unwrap()[0]))
    }

    /// Mean binary cross-entropy over `data` and its exact gradient.
    pub fn loss_and_gradient(&self, data: &[(Vec<f64>, f64)]) -> Result<(f64, Gradient), AnnError> {
        let layers = self.weights.len();
        let mut grad = Gradient {
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        };
        if data.is_empty() {
            return Ok((0.0, grad));
        }
        let mut loss = 0.0;
        for (x, y) in data {
            self.check_input(x)?;
            let acts = self.activations(x);
            let logit = acts[layers][0];
            loss += softplus(logit) - y * logit;

            // delta holds dLoss/dz for the current layer's pre-activations.
            let mut delta = vec![sigmoid(logit) - y];
            for l in (0..layers).rev() {
                let fan_in = self.layer_sizes[l];
                let input = &acts[l];
                for (j, d) in delta.iter().enumerate() {
                    grad.biases[l][j] += d;
                    let row = &mut grad.weights[l][j * fan_in..(j + 1) * fan_in];
                    for (g, a) in row.iter_mut().zip(input) {
                        *g += d * a;
                    }
                }
                if l > 0 {
                    delta = (0..fan_in)
                        .map(|i| {
                            let back: f64 = delta.iter().enumerate().map(|(j, d)| d * self.weights[l][j * fan_in + i]).sum();
                            back * input[i] * (1.0 - input[i])
                        })
                        .collect();
                }
            }
        }
        let n = data.len() as f64;
        for v in grad.weights.iter_mut().chain(grad.biases.iter_mut()).flatten() {
            *v /= n;
        }
        Ok((loss / n, grad))
    }

    pub fn loss(&self, data: &[(Vec<f64>, f64)]) -> Result<f64, AnnError> {
        let mut total = 0.0;
        for (x, y) in data {
            self.check_input(x)?;
            let logit = self.activations(x).last().unwrap()[0];
            total += softplus(logit) - y * logit;
        }
        Ok(if data.is_empty() { 0.0 } else { total / data.len() as f64 })
    }

    /// All parameters, weights then biases, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in 0..self.weights.len() {
            out.extend(&self.weights[l]);
            out.extend(&self.biases[l]);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for l in 0..self.weights.len() {
            for v in self.weights[l].iter_mut().chain(self.biases[l].iter_mut()) {
                *v = it.next().expect("parameter count");
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model always serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, AnnError> {
        let model: AnnModel = serde_json::from_str(text).map_err(|e| AnnError::ModelFile(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), AnnError> {
        std::fs::write(path, self.to_json()).map_err(|e| AnnError::ModelFile(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, AnnError> {
        let text = std::fs::read_to_string(path).map_err(|e| AnnError::ModelFile(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

impl Gradient {
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in 0..self.weights.len() {
            out.extend(&self.weights[l]);
            out.extend(&self.biases[l]);
        }
        out
    }
}

/// Trains a fresh network of `layer_sizes` on `(features, label)` pairs.
/// Returns the model and the loss before each epoch's update, followed by
/// the final loss.
pub fn train(
    layer_sizes: &[usize],
    data: &[(Vec<f64>, f64)],
    opts: TrainOptions,
) -> Result<(AnnModel, Vec<f64>), AnnError> {
    let positives = data.iter().filter(|(_, y)| *y >= 0.5).count();
    if positives == 0 || positives == data.len() {
        return Err(AnnError::DegenerateData);
    }
    let mut model = AnnModel::random(layer_sizes, opts.seed, opts.base_version + 1);
    model.validate()?;
    let mut curve = Vec::with_capacity(opts.epochs + 1);
    for epoch in 0..opts.epochs {
        let (loss, grad) = model.loss_and_gradient(data)?;
        if !loss.is_finite() {
            return Err(AnnError::NonFiniteLoss(epoch));
        }
        curve.push(loss);
        for l in 0..model.weights.len() {
            for (w, g) in model.weights[l].iter_mut().zip(&grad.weights[l]) {
                *w -= opts.learning_rate * g;
            }
            for (b, g) in model.biases[l].iter_mut().zip(&grad.biases[l]) {
                *b -= opts.learning_rate * g;
            }
        }
    }
    let last = model.loss(data)?;
    if !last.is_finite() || model.validate().is_err() {
        return Err(AnnError::NonFiniteLoss(opts.epochs));
    }
    curve.push(last);
    Ok((model, curve))
}
