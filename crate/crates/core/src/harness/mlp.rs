//! A small fully connected ReLU network trained with SGD and momentum.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FrameError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// ReLU between layers, raw logits at the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MlpJson", try_from = "MlpJson")]
pub struct MlpModel {
    pub sizes: Vec<usize>,
    pub layers: Vec<Layer>,
}

/// Per-layer gradients, same shapes as the model.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl MlpModel {
    /// Weights and biases uniform in `±1/√fan_in`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(FrameError::InvalidInput(format!(
                "bad layer sizes {sizes:?}"
            )));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let mut draw = || rng.random_range(-bound..bound);
                Layer {
                    weights: DMatrix::from_fn(w[1], w[0], |_, _| draw()),
                    bias: DVector::from_fn(w[1], |_, _| draw()),
                }
            })
            .collect();
        Ok(Self {
            sizes: sizes.to_vec(),
            layers,
        })
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().expect("nonempty")
    }

    pub fn forward(&self, input: &[f64]) -> DVector<f64> {
        self.activations(input).pop().expect("nonempty")
    }

    /// Outputs of every layer, starting with the input.
    fn activations(&self, input: &[f64]) -> Vec<DVector<f64>> {
        assert_eq!(input.len(), self.input_size(), "input size");
        let mut acts = vec![DVector::from_column_slice(input)];
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.weights * acts.last().expect("nonempty") + &layer.bias;
            if l < last {
                z.apply(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weights: DMatrix::zeros(l.weights.nrows(), l.weights.ncols()),
                    bias: DVector::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    /// Adds the gradient of the cross-entropy loss at `(input, label)` to
    /// `grads` and returns the loss.
    pub fn accumulate(&self, input: &[f64], label: usize, grads: &mut Gradients) -> f64 {
        let acts = self.activations(input);
        let logits = acts.last().expect("nonempty");
        let probs = softmax(logits);
        let loss = -probs[label].max(f64::MIN_POSITIVE).ln();
        let mut delta = probs;
        delta[label] -= 1.0;
        for l in (0..self.layers.len()).rev() {
            let g = &mut grads.layers[l];
            g.weights.ger(1.0, &delta, &acts[l], 1.0);
            g.bias += &delta;
            if l > 0 {
                let mut back = self.layers[l].weights.tr_mul(&delta);
                for (b, a) in back.iter_mut().zip(acts[l].iter()) {
                    if *a <= 0.0 {
                        *b = 0.0;
                    }
                }
                delta = back;
            }
        }
        loss
    }
}

/// JSON form: weight matrices as lists of rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpJson {
    pub sizes: Vec<usize>,
    pub layers: Vec<LayerJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerJson {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl From<MlpModel> for MlpJson {
    fn from(m: MlpModel) -> Self {
        let layers = m
            .layers
            .iter()
            .map(|l| LayerJson {
                weights: l
                    .weights
                    .row_iter()
                    .map(|r| r.iter().copied().collect())
                    .collect(),
                bias: l.bias.iter().copied().collect(),
            })
            .collect();
        Self {
            sizes: m.sizes,
            layers,
        }
    }
}

impl TryFrom<MlpJson> for MlpModel {
    type Error = FrameError;

    fn try_from(j: MlpJson) -> Result<Self> {
        if j.sizes.len() != j.layers.len() + 1 {
            return Err(FrameError::InvalidInput(
                "layer count does not match sizes".into(),
            ));
        }
        let mut layers = Vec::with_capacity(j.layers.len());
        for (k, l) in j.layers.into_iter().enumerate() {
            let (rows, cols) = (j.sizes[k + 1], j.sizes[k]);
            if l.weights.len() != rows
                || l.weights.iter().any(|r| r.len() != cols)
                || l.bias.len() != rows
            {
                return Err(FrameError::InvalidInput(format!(
                    "layer {k} does not have shape {rows}x{cols}"
                )));
            }
            let flat: Vec<f64> = l.weights.into_iter().flatten().collect();
            layers.push(Layer {
                weights: DMatrix::from_row_slice(rows, cols, &flat),
                bias: DVector::from_vec(l.bias),
            });
        }
        Ok(Self {
            sizes: j.sizes,
            layers,
        })
    }
}

pub fn softmax(logits: &DVector<f64>) -> DVector<f64> {
    let top = logits.max();
    let e = logits.map(|v| (v - top).exp());
    let s = e.sum();
    e / s
}

/// SGD with heavy-ball momentum: `v ← m v + g`, `θ ← θ − lr v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub momentum: f64,
    velocity: Gradients,
}

impl Sgd {
    pub fn new(model: &MlpModel, momentum: f64) -> Self {
        Self {
            momentum,
            velocity: model.zero_gradients(),
        }
    }

    pub fn step(
        &mut self,
        model: &mut MlpModel,
        grads: &Gradients,
        lr: f64,
        scale: f64,
    ) -> Result<()> {
        for ((layer, v), g) in model
            .layers
            .iter_mut()
            .zip(&mut self.velocity.layers)
            .zip(&grads.layers)
        {
            v.weights *= self.momentum;
            v.weights += &g.weights * scale;
            v.bias *= self.momentum;
            v.bias.axpy(scale, &g.bias, 1.0);
            layer.weights -= &v.weights * lr;
            layer.bias.axpy(-lr, &v.bias, 1.0);
        }
        if model
            .layers
            .iter()
            .any(|l| !l.weights.iter().all(|v| v.is_finite()))
        {
            return Err(FrameError::Diverged(
                "non-finite weights after update".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = MlpModel::new(&[4, 5, 3], &mut rng).unwrap();
        let x = [0.3, -0.7, 1.1, 0.2];
        let mut grads = model.zero_gradients();
        model.accumulate(&x, 2, &mut grads);
        let loss = |m: &MlpModel| -softmax(&m.forward(&x))[2].ln();
        let h = 1e-6;
        for (l, (i, j)) in [(0, (1, 2)), (1, (2, 4)), (0, (4, 0))] {
            let mut up = model.clone();
            up.layers[l].weights[(i, j)] += h;
            let mut down = model.clone();
            down.layers[l].weights[(i, j)] -= h;
            let fd = (loss(&up) - loss(&down)) / (2.0 * h);
            assert!((fd - grads.layers[l].weights[(i, j)]).abs() < 1e-6);
        }
    }

    #[test]
    fn json_round_trip() {
        let model = MlpModel::new(&[3, 4, 2], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let s = serde_json::to_string(&model).unwrap();
        assert_eq!(serde_json::from_str::<MlpModel>(&s).unwrap(), model);
    }

    #[test]
    fn training_reduces_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = MlpModel::new(&[2, 8, 2], &mut rng).unwrap();
        let data = [
            ([1.0, 0.0], 0),
            ([0.0, 1.0], 1),
            ([0.9, 0.1], 0),
            ([0.2, 0.8], 1),
        ];
        let total = |m: &MlpModel| {
            data.iter()
                .map(|(x, y)| -softmax(&m.forward(x))[*y].ln())
                .sum::<f64>()
        };
        let before = total(&model);
        let mut opt = Sgd::new(&model, 0.9);
        for _ in 0..50 {
            let mut g = model.zero_gradients();
            for (x, y) in &data {
                model.accumulate(x, *y, &mut g);
            }
            opt.step(&mut model, &g, 0.05, 0.25).unwrap();
        }
        assert!(total(&model) < 0.5 * before);
    }
}
