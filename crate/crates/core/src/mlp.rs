//! Fully connected sigmoid network trained by online back-propagation on
//! the squared error `E = 1/2 sum_k (y_k - t_k)^2`.
//!
//! Every non-input unit computes `f(sum_j w_ij y_j + w_i0)` with the
//! logistic `f`, output layer included. Weights start uniform in
//! `[-0.5, 0.5]` from [`SeededRng`]; epochs visit samples in a seeded
//! shuffled order and update after every sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::label::{Expression, NUM_CLASSES};
use crate::rng::{mix_seed, SeededRng};

/// Logistic function, evaluated so that `exp` never overflows.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`: `weights[i * inputs + j]` is `w_ij`.
    pub weights: Vec<f64>,
    /// `w_i0`.
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.bias) {
            let s: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b;
            out.push(sigmoid(s));
        }
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct MlpModel {
    pub topology: Vec<usize>,
    pub layers: Vec<Layer>,
}

fn check_topology(topology: &[usize]) -> Result<()> {
    if topology.len() < 2 || topology.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "topology {topology:?} needs at least two layers, all non-empty"
        )));
    }
    Ok(())
}

/// Weights and biases drawn uniformly from `[-0.5, 0.5]`, layer by layer,
/// weights row-major before biases.
pub fn init_weights(topology: &[usize], seed: u64) -> Result<MlpModel> {
    check_topology(topology)?;
    let mut rng = SeededRng::new(seed);
    let layers = topology
        .windows(2)
        .map(|w| {
            let mut layer = Layer::zeros(w[0], w[1]);
            layer
                .weights
                .iter_mut()
                .for_each(|v| *v = rng.uniform(-0.5, 0.5));
            layer
                .bias
                .iter_mut()
                .for_each(|v| *v = rng.uniform(-0.5, 0.5));
            layer
        })
        .collect();
    Ok(MlpModel {
        topology: topology.to_vec(),
        layers,
    })
}

/// Per-layer activations; index 0 is the input itself.
#[derive(Clone, Debug)]
pub struct Activations(pub Vec<Vec<f64>>);

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.0.last().expect("activations include the input layer")
    }
}

/// Gradients of the per-sample error, shaped like the model's layers.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl MlpModel {
    /// Model with every weight and bias zero.
    pub fn zeros(topology: &[usize]) -> Result<Self> {
        check_topology(topology)?;
        Ok(MlpModel {
            topology: topology.to_vec(),
            layers: topology
                .windows(2)
                .map(|w| Layer::zeros(w[0], w[1]))
                .collect(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.topology[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.topology.last().expect("topology is non-empty")
    }

    pub fn validate(&self) -> Result<()> {
        check_topology(&self.topology).map_err(|e| Error::InvalidModel(e.to_string()))?;
        if self.layers.len() != self.topology.len() - 1 {
            return Err(Error::InvalidModel(
                "layer count does not match topology".into(),
            ));
        }
        for (l, w) in self.layers.iter().zip(self.topology.windows(2)) {
            if l.inputs != w[0]
                || l.outputs != w[1]
                || l.weights.len() != w[0] * w[1]
                || l.bias.len() != w[1]
            {
                return Err(Error::InvalidModel(
                    "layer shape does not match topology".into(),
                ));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel("non-finite weight".into()));
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Activations> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for layer in &self.layers {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward_into(acts.last().unwrap(), &mut out);
            acts.push(out);
        }
        Ok(Activations(acts))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.0.pop().unwrap())
    }

    fn check_target(&self, target: &[f64]) -> Result<()> {
        if target.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: target.len(),
            });
        }
        if target.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training target"));
        }
        Ok(())
    }

    /// Analytic gradient of `E` for one sample, plus `E` itself.
    pub fn gradients(&self, x: &[f64], target: &[f64]) -> Result<(Gradients, f64)> {
        self.check_target(target)?;
        let acts = self.forward(x)?;
        let (deltas, error) = self.deltas(&acts, target);
        let layers = self
            .layers
            .iter()
            .zip(&deltas)
            .zip(&acts.0)
            .map(|((layer, delta), input)| {
                let mut g = Layer::zeros(layer.inputs, layer.outputs);
                for (i, d) in delta.iter().enumerate() {
                    g.bias[i] = *d;
                    for (j, y) in input.iter().enumerate() {
                        g.weights[i * layer.inputs + j] = d * y;
                    }
                }
                g
            })
            .collect();
        Ok((Gradients { layers }, error))
    }

    /// `dE/ds` for every non-input unit, computed with the current weights.
    fn deltas(&self, acts: &Activations, target: &[f64]) -> (Vec<Vec<f64>>, f64) {
        let out = acts.output();
        let mut error = 0.0;
        let mut delta: Vec<f64> = out
            .iter()
            .zip(target)
            .map(|(y, t)| {
                error += 0.5 * (y - t) * (y - t);
                (y - t) * y * (1.0 - y)
            })
            .collect();
        let mut all = vec![Vec::new(); self.layers.len()];
        for l in (0..self.layers.len()).rev() {
            let next = if l > 0 {
                let layer = &self.layers[l];
                let below = &acts.0[l];
                Some(
                    (0..layer.inputs)
                        .map(|j| {
                            let back: f64 = delta
                                .iter()
                                .enumerate()
                                .map(|(i, d)| d * layer.weights[i * layer.inputs + j])
                                .sum();
                            back * below[j] * (1.0 - below[j])
                        })
                        .collect(),
                )
            } else {
                None
            };
            all[l] = std::mem::take(&mut delta);
            if let Some(n) = next {
                delta = n;
            }
        }
        (all, error)
    }

    /// One gradient-descent update on a single sample; returns the error
    /// before the update.
    pub fn backprop_step(&mut self, x: &[f64], target: &[f64], rate: f64) -> Result<f64> {
        self.check_target(target)?;
        if !rate.is_finite() {
            return Err(Error::NonFinite("learning rate"));
        }
        let acts = self.forward(x)?;
        let (deltas, error) = self.deltas(&acts, target);
        for ((layer, delta), input) in self.layers.iter_mut().zip(&deltas).zip(&acts.0) {
            for (i, d) in delta.iter().enumerate() {
                let step = rate * d;
                layer.bias[i] -= step;
                let row = &mut layer.weights[i * layer.inputs..(i + 1) * layer.inputs];
                for (w, y) in row.iter_mut().zip(input) {
                    *w -= step * y;
                }
            }
        }
        Ok(error)
    }

    /// Output activations and the argmax label; ties go to the lower index.
    pub fn classify(&self, x: &[f64]) -> Result<(Expression, Vec<f64>)> {
        if self.output_dim() != NUM_CLASSES {
            return Err(Error::DimensionMismatch {
                expected: NUM_CLASSES,
                got: self.output_dim(),
            });
        }
        let out = self.predict(x)?;
        Ok((argmax_label(&out)?, out))
    }
}

pub fn argmax_label(outputs: &[f64]) -> Result<Expression> {
    if outputs.len() != NUM_CLASSES {
        return Err(Error::DimensionMismatch {
            expected: NUM_CLASSES,
            got: outputs.len(),
        });
    }
    let mut best = 0;
    for (i, v) in outputs.iter().enumerate() {
        if *v > outputs[best] {
            best = i;
        }
    }
    Ok(Expression::ALL[best])
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Training stops once the epoch MSE is at or below this.
    pub target_error: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.3,
            max_epochs: 200_000,
            target_error: 1e-7,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidArgument(
                "max_epochs must be at least 1".into(),
            ));
        }
        if self.target_error.is_nan() || self.target_error < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "target error must be non-negative, got {}",
                self.target_error
            )));
        }
        Ok(())
    }

    /// Rates above 1 are outside the usual regime but allowed.
    pub fn rate_is_unusual(&self) -> bool {
        self.learning_rate > 1.0
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct TrainReport {
    /// MSE of each epoch: squared output errors accumulated during the pass
    /// (before each sample's update), averaged over samples and outputs.
    pub history: Vec<f64>,
    pub final_mse: f64,
    pub epochs_run: usize,
    pub reached_target: bool,
}

/// Online training in place; `inputs[i]` pairs with `targets[i]`.
pub fn train(
    model: &mut MlpModel,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            got: targets.len(),
        });
    }
    for (x, t) in inputs.iter().zip(targets) {
        model.check_input(x)?;
        model.check_target(t)?;
    }
    let mut rng = SeededRng::new(mix_seed(cfg.seed));
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let denom = (inputs.len() * model.output_dim()) as f64;
    let mut history = Vec::new();
    let mut reached_target = false;
    for _ in 0..cfg.max_epochs {
        rng.shuffle(&mut order);
        let mut sum = 0.0;
        for &i in &order {
            sum += 2.0 * model.backprop_step(&inputs[i], &targets[i], cfg.learning_rate)?;
        }
        let mse = sum / denom;
        history.push(mse);
        if !mse.is_finite() {
            return Err(Error::NonFinite("training error"));
        }
        if mse <= cfg.target_error {
            reached_target = true;
            break;
        }
    }
    Ok(TrainReport {
        final_mse: *history.last().unwrap(),
        epochs_run: history.len(),
        history,
        reached_target,
    })
}

/// `epoch,mse` CSV, epochs numbered from 1.
pub fn history_csv(history: &[f64]) -> String {
    let mut s = String::from("epoch,mse\n");
    for (i, m) in history.iter().enumerate() {
        s.push_str(&format!("{},{:e}\n", i + 1, m));
    }
    s
}
