//! Classifier models, their cross-entropy gradients, and the sign-vote update.

use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, DatasetShard};
use super::sign::SignReport;
use crate::error::{Error, Result};
use crate::seed::{rng_for, Stream};

/// Parameter layout of the classifier.
///
/// `Logistic` is multinomial logistic regression: weights `W` (classes x
/// inputs, row-major) followed by biases. `Mlp` is one tanh hidden layer:
/// `W1, b1, W2, b2` in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Logistic {
        inputs: usize,
        classes: usize,
    },
    Mlp {
        inputs: usize,
        hidden: usize,
        classes: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Mlp,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(ModelKind::Logistic),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(Error::arg(format!("unknown model `{other}`"))),
        }
    }
}

pub const DEFAULT_HIDDEN: usize = 32;

impl Architecture {
    pub fn for_dataset(kind: ModelKind, data: &Dataset) -> Self {
        match kind {
            ModelKind::Logistic => Architecture::Logistic {
                inputs: data.input_dim(),
                classes: data.num_classes(),
            },
            ModelKind::Mlp => Architecture::Mlp {
                inputs: data.input_dim(),
                hidden: DEFAULT_HIDDEN,
                classes: data.num_classes(),
            },
        }
    }

    pub fn num_params(&self) -> usize {
        match *self {
            Architecture::Logistic { inputs, classes } => inputs * classes + classes,
            Architecture::Mlp {
                inputs,
                hidden,
                classes,
            } => inputs * hidden + hidden + hidden * classes + classes,
        }
    }

    pub fn inputs(&self) -> usize {
        match *self {
            Architecture::Logistic { inputs, .. } | Architecture::Mlp { inputs, .. } => inputs,
        }
    }

    pub fn classes(&self) -> usize {
        match *self {
            Architecture::Logistic { classes, .. } | Architecture::Mlp { classes, .. } => classes,
        }
    }

    /// Initial parameters: zeros for the convex model, small uniform weights
    /// (zero biases) for the MLP so hidden units are not symmetric.
    pub fn init(&self, seed: u64) -> ModelState {
        let mut weights = vec![0.0; self.num_params()];
        if let Architecture::Mlp {
            inputs,
            hidden,
            classes,
        } = *self
        {
            let mut rng = rng_for(seed, Stream::Init, &[]);
            let w1 = inputs * hidden;
            let b1 = w1 + hidden;
            let w2 = b1 + hidden * classes;
            let r1 = 1.0 / (inputs as f64).sqrt();
            let r2 = 1.0 / (hidden as f64).sqrt();
            for w in &mut weights[..w1] {
                *w = rng.random_range(-r1..r1);
            }
            for w in &mut weights[b1..w2] {
                *w = rng.random_range(-r2..r2);
            }
        }
        ModelState { weights, round: 0 }
    }

    fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.input_dim() != self.inputs() || data.num_classes() != self.classes() {
            return Err(Error::Dimension(format!(
                "model expects {} inputs / {} classes, dataset has {} / {}",
                self.inputs(),
                self.classes(),
                data.input_dim(),
                data.num_classes()
            )));
        }
        Ok(())
    }

    /// Class scores for one input row.
    pub fn logits(&self, w: &[f64], x: &[f32], out: &mut [f64]) {
        match *self {
            Architecture::Logistic { inputs, classes } => {
                let bias = &w[inputs * classes..];
                for k in 0..classes {
                    let row = &w[k * inputs..(k + 1) * inputs];
                    out[k] = bias[k] + dot(row, x);
                }
            }
            Architecture::Mlp {
                inputs,
                hidden,
                classes,
            } => {
                let mut h = vec![0.0; hidden];
                self.mlp_forward(w, x, &mut h, out, inputs, hidden, classes);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn mlp_forward(
        &self,
        w: &[f64],
        x: &[f32],
        h: &mut [f64],
        out: &mut [f64],
        inputs: usize,
        hidden: usize,
        classes: usize,
    ) {
        let (w1, rest) = w.split_at(inputs * hidden);
        let (b1, rest) = rest.split_at(hidden);
        let (w2, b2) = rest.split_at(hidden * classes);
        for j in 0..hidden {
            h[j] = (b1[j] + dot(&w1[j * inputs..(j + 1) * inputs], x)).tanh();
        }
        for k in 0..classes {
            let row = &w2[k * hidden..(k + 1) * hidden];
            out[k] = b2[k] + row.iter().zip(h.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Mean cross-entropy over `rows` and its gradient.
    pub fn loss_and_grad(
        &self,
        w: &[f64],
        data: &Dataset,
        rows: &[usize],
    ) -> Result<(f64, Vec<f64>)> {
        self.check_dataset(data)?;
        let classes = self.classes();
        let mut grad = vec![0.0; self.num_params()];
        let mut z = vec![0.0; classes];
        let mut hidden_buf = match *self {
            Architecture::Mlp { hidden, .. } => vec![0.0; hidden],
            Architecture::Logistic { .. } => Vec::new(),
        };
        let mut loss = 0.0;
        for &i in rows {
            let x = data.row(i);
            let y = data.label(i);
            match *self {
                Architecture::Logistic { inputs, classes } => {
                    self.logits(w, x, &mut z);
                    loss += softmax_xent(&mut z, y);
                    let (gw, gb) = grad.split_at_mut(inputs * classes);
                    for k in 0..classes {
                        let d = z[k];
                        gb[k] += d;
                        for (g, &xj) in gw[k * inputs..(k + 1) * inputs].iter_mut().zip(x) {
                            *g += d * xj as f64;
                        }
                    }
                }
                Architecture::Mlp {
                    inputs,
                    hidden,
                    classes,
                } => {
                    let h = &mut hidden_buf;
                    self.mlp_forward(w, x, h, &mut z, inputs, hidden, classes);
                    loss += softmax_xent(&mut z, y);
                    let w2 = &w[inputs * hidden + hidden..inputs * hidden + hidden + hidden * classes];
                    let (gw1, rest) = grad.split_at_mut(inputs * hidden);
                    let (gb1, rest) = rest.split_at_mut(hidden);
                    let (gw2, gb2) = rest.split_at_mut(hidden * classes);
                    for k in 0..classes {
                        gb2[k] += z[k];
                        for j in 0..hidden {
                            gw2[k * hidden + j] += z[k] * h[j];
                        }
                    }
                    for j in 0..hidden {
                        let back: f64 = (0..classes).map(|k| w2[k * hidden + j] * z[k]).sum();
                        let dh = back * (1.0 - h[j] * h[j]);
                        gb1[j] += dh;
                        for (g, &xi) in gw1[j * inputs..(j + 1) * inputs].iter_mut().zip(x) {
                            *g += dh * xi as f64;
                        }
                    }
                }
            }
        }
        let n = rows.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        loss /= n;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss is {loss}")));
        }
        if let Some(k) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient entry {k} is {}", grad[k])));
        }
        Ok((loss, grad))
    }

    pub fn loss(&self, w: &[f64], data: &Dataset, rows: &[usize]) -> Result<f64> {
        self.check_dataset(data)?;
        let mut z = vec![0.0; self.classes()];
        let total: f64 = rows
            .iter()
            .map(|&i| {
                self.logits(w, data.row(i), &mut z);
                softmax_xent(&mut z, data.label(i))
            })
            .sum();
        Ok(total / rows.len().max(1) as f64)
    }
}

fn dot(w: &[f64], x: &[f32]) -> f64 {
    w.iter().zip(x).map(|(a, &b)| a * b as f64).sum()
}

/// Returns `-log softmax(z)[y]` and overwrites `z` with `softmax(z) - onehot(y)`.
fn softmax_xent(z: &mut [f64], y: usize) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let loss = -(z[y] / sum).ln();
    for v in z.iter_mut() {
        *v /= sum;
    }
    z[y] -= 1.0;
    loss
}

/// Flattened parameters `w` and the number of completed rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub weights: Vec<f64>,
    pub round: u64,
}

impl ModelState {
    pub fn zeros(q: usize) -> Self {
        ModelState {
            weights: vec![0.0; q],
            round: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    pub values: Vec<f64>,
    pub batch_size: usize,
}

/// Mini-batch gradient of one device: `d_b` rows drawn without replacement
/// from `shard`, loss averaged over the batch.
pub fn compute_local_gradient(
    arch: &Architecture,
    model: &ModelState,
    dataset: &Dataset,
    shard: &DatasetShard,
    batch_size: usize,
    seed: u64,
) -> Result<GradientVector> {
    if batch_size == 0 || batch_size > shard.len() {
        return Err(Error::arg(format!(
            "batch size {batch_size} invalid for shard of {} samples",
            shard.len()
        )));
    }
    let mut rng = rng_for(seed, Stream::Batch, &[]);
    let mut picks = index::sample(&mut rng, shard.len(), batch_size).into_vec();
    // Fixed summation order: a full-shard batch is seed-independent.
    picks.sort_unstable();
    let rows: Vec<usize> = picks.iter().map(|&p| shard.sample_indices[p]).collect();
    let (_, values) = arch.loss_and_grad(&model.weights, dataset, &rows)?;
    Ok(GradientVector { values, batch_size })
}

/// Gradient of the loss averaged over all of `rows`.
pub fn full_gradient(
    arch: &Architecture,
    model: &ModelState,
    dataset: &Dataset,
    rows: &[usize],
) -> Result<GradientVector> {
    let (_, values) = arch.loss_and_grad(&model.weights, dataset, rows)?;
    Ok(GradientVector {
        values,
        batch_size: rows.len(),
    })
}

/// `w <- w - lr * vote`, and the round counter advances.
pub fn apply_global_update(
    model: &ModelState,
    vote: &SignReport,
    learning_rate: f64,
) -> Result<ModelState> {
    if vote.len() != model.len() {
        return Err(Error::Dimension(format!(
            "vote has {} entries, model has {}",
            vote.len(),
            model.len()
        )));
    }
    let weights = model
        .weights
        .iter()
        .zip(vote.iter())
        .map(|(w, v)| w - learning_rate * v as f64)
        .collect();
    Ok(ModelState {
        weights,
        round: model.round + 1,
    })
}

/// Plain gradient step, used by the FedAvg baseline.
pub fn apply_gradient_step(model: &ModelState, gradient: &[f64], learning_rate: f64) -> ModelState {
    ModelState {
        weights: model
            .weights
            .iter()
            .zip(gradient)
            .map(|(w, g)| w - learning_rate * g)
            .collect(),
        round: model.round + 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_loss: f64,
}

/// Accuracy and mean loss over the whole dataset. Argmax ties go to the
/// lowest class index.
pub fn evaluate(arch: &Architecture, model: &ModelState, dataset: &Dataset) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::arg("cannot evaluate on an empty dataset"));
    }
    arch.check_dataset(dataset)?;
    let mut z = vec![0.0; arch.classes()];
    let mut correct = 0usize;
    let mut loss = 0.0;
    for i in 0..dataset.len() {
        arch.logits(&model.weights, dataset.row(i), &mut z);
        let mut best = 0;
        for k in 1..z.len() {
            if z[k] > z[best] {
                best = k;
            }
        }
        let y = dataset.label(i);
        correct += usize::from(best == y);
        loss += softmax_xent(&mut z, y);
    }
    let n = dataset.len() as f64;
    Ok(Evaluation {
        accuracy: correct as f64 / n,
        mean_loss: loss / n,
    })
}
