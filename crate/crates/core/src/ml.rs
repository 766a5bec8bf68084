//! Small differentiable classifiers: multinomial logistic regression and
//! fully connected ReLU networks, trained with softmax cross-entropy.
//!
//! # Weight layout
//!
//! Weights live in one flat vector, layer-major. Each dense layer stores its
//! weight matrix `[out × in]` row-major followed by its bias `[out]`. The
//! logistic model is a single dense layer `input_dim → n_classes`; the MLP
//! is `input_dim → hidden[0] → … → n_classes` with ReLU between layers.
//! Gradient vectors use the same order, and so does the codec, so this
//! layout is part of the wire contract.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{ensure_dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    LogisticRegression,
    Mlp {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
    },
}

fn default_hidden() -> Vec<usize> {
    vec![64]
}

impl Default for ModelKind {
    fn default() -> Self {
        ModelKind::Mlp {
            hidden: default_hidden(),
        }
    }
}

impl ModelKind {
    fn hidden(&self) -> &[usize] {
        match self {
            ModelKind::LogisticRegression => &[],
            ModelKind::Mlp { hidden } => hidden,
        }
    }
}

/// Dense gradient (or pseudo-gradient) in canonical weight order.
#[derive(Clone, PartialEq, Default)]
pub struct GradVector(Vec<f64>);

impl GradVector {
    /// Wraps `values`, rejecting non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "gradient entry {j} is not finite ({})",
                values[j]
            )));
        }
        Ok(GradVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        GradVector(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `self += weight * other`.
    pub fn add_scaled(&mut self, other: &GradVector, weight: f64) -> Result<()> {
        ensure_dim(self.len(), other.len())?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += weight * b;
        }
        Ok(())
    }
}

/// Unchecked conversion; use [`GradVector::new`] for untrusted values.
impl From<Vec<f64>> for GradVector {
    fn from(values: Vec<f64>) -> Self {
        GradVector(values)
    }
}

impl fmt::Debug for GradVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() <= 8 {
            f.debug_tuple("GradVector").field(&self.0).finish()
        } else {
            write!(f, "GradVector(dim={}, norm={})", self.0.len(), self.norm())
        }
    }
}

/// A borrowed batch: `labels.len()` rows of `input_dim` features.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    features: &'a [f64],
    labels: &'a [usize],
    input_dim: usize,
}

impl<'a> Batch<'a> {
    pub fn new(features: &'a [f64], labels: &'a [usize], input_dim: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("batch must hold at least one sample".into()));
        }
        ensure_dim(labels.len() * input_dim, features.len())?;
        Ok(Batch {
            features,
            labels,
            input_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn labels(&self) -> &'a [usize] {
        self.labels
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    kind: ModelKind,
    input_dim: usize,
    n_classes: usize,
    weights: Vec<f64>,
}

/// Shape of one dense layer and its offset in the flat weight vector.
#[derive(Debug, Clone, Copy)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    offset: usize,
}

impl Layer {
    fn weight_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    fn bias_range(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.fan_in * self.fan_out;
        start..start + self.fan_out
    }

    fn size(&self) -> usize {
        (self.fan_in + 1) * self.fan_out
    }
}

fn layers_for(kind: &ModelKind, input_dim: usize, n_classes: usize) -> Vec<Layer> {
    let mut dims = vec![input_dim];
    dims.extend_from_slice(kind.hidden());
    dims.push(n_classes);
    let mut offset = 0;
    dims.windows(2)
        .map(|w| {
            let layer = Layer {
                fan_in: w[0],
                fan_out: w[1],
                offset,
            };
            offset += layer.size();
            layer
        })
        .collect()
}

impl Model {
    /// All-zero weights: the uniform-logits model.
    pub fn zeros(kind: ModelKind, input_dim: usize, n_classes: usize) -> Result<Self> {
        if input_dim == 0 || n_classes < 2 {
            return Err(Error::Config(format!(
                "model needs input_dim >= 1 and n_classes >= 2 (got {input_dim}, {n_classes})"
            )));
        }
        if kind.hidden().contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        let p = layers_for(&kind, input_dim, n_classes)
            .iter()
            .map(Layer::size)
            .sum();
        Ok(Model {
            kind,
            input_dim,
            n_classes,
            weights: vec![0.0; p],
        })
    }

    /// Uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for
    /// every weight and bias of a layer.
    pub fn init<R: Rng + ?Sized>(
        kind: ModelKind,
        input_dim: usize,
        n_classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut model = Model::zeros(kind, input_dim, n_classes)?;
        for layer in model.layers() {
            let bound = 1.0 / (layer.fan_in as f64).sqrt();
            for w in &mut model.weights[layer.offset..layer.offset + layer.size()] {
                *w = rng.random_range(-bound..=bound);
            }
        }
        Ok(model)
    }

    pub fn from_weights(
        kind: ModelKind,
        input_dim: usize,
        n_classes: usize,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let mut model = Model::zeros(kind, input_dim, n_classes)?;
        ensure_dim(model.weights.len(), weights.len())?;
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput("model weights must be finite".into()));
        }
        model.weights = weights;
        Ok(model)
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Number of trainable parameters, `P`.
    pub fn param_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn layers(&self) -> Vec<Layer> {
        layers_for(&self.kind, self.input_dim, self.n_classes)
    }

    fn check_batch(&self, batch: &Batch<'_>) -> Result<()> {
        if batch.input_dim() != self.input_dim {
            return Err(Error::Config(format!(
                "batch has {} features but the model expects {}",
                batch.input_dim(),
                self.input_dim
            )));
        }
        if let Some(&bad) = batch.labels().iter().find(|&&y| y >= self.n_classes) {
            return Err(Error::Config(format!(
                "label {bad} out of range for {} classes",
                self.n_classes
            )));
        }
        Ok(())
    }

    /// Forward pass for one sample. Fills `acts[l]` with the post-activation
    /// output of layer `l` (logits for the last layer).
    fn forward_sample(&self, layers: &[Layer], x: &[f64], acts: &mut [Vec<f64>]) {
        for (l, layer) in layers.iter().enumerate() {
            let (before, rest) = acts.split_at_mut(l);
            let input: &[f64] = if l == 0 { x } else { &before[l - 1] };
            let out = &mut rest[0];
            let w = &self.weights[layer.weight_range()];
            let b = &self.weights[layer.bias_range()];
            for o in 0..layer.fan_out {
                let row = &w[o * layer.fan_in..(o + 1) * layer.fan_in];
                let mut z = b[o];
                for (wi, xi) in row.iter().zip(input) {
                    z += wi * xi;
                }
                out[o] = if l + 1 < layers.len() { z.max(0.0) } else { z };
            }
        }
    }

    fn scratch(layers: &[Layer]) -> Vec<Vec<f64>> {
        layers.iter().map(|l| vec![0.0; l.fan_out]).collect()
    }

    /// Mean softmax cross-entropy over the batch.
    pub fn forward_loss(&self, batch: &Batch<'_>) -> Result<f64> {
        self.check_batch(batch)?;
        let layers = self.layers();
        let mut acts = Self::scratch(&layers);
        let mut total = 0.0;
        for i in 0..batch.len() {
            self.forward_sample(&layers, batch.row(i), &mut acts);
            total += cross_entropy(acts.last().unwrap(), batch.labels()[i]);
        }
        Ok(total / batch.len() as f64)
    }

    /// Analytic gradient of [`Model::forward_loss`] in canonical order.
    pub fn gradient(&self, batch: &Batch<'_>) -> Result<GradVector> {
        self.loss_and_gradient(batch).map(|(_, g)| g)
    }

    pub fn loss_and_gradient(&self, batch: &Batch<'_>) -> Result<(f64, GradVector)> {
        self.check_batch(batch)?;
        let layers = self.layers();
        let mut acts = Self::scratch(&layers);
        let mut deltas = Self::scratch(&layers);
        let mut grad = vec![0.0; self.weights.len()];
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;

        for i in 0..batch.len() {
            let x = batch.row(i);
            let y = batch.labels()[i];
            self.forward_sample(&layers, x, &mut acts);
            let logits = acts.last().unwrap();
            total += cross_entropy(logits, y);

            // dL/dz at the output: softmax - one_hot, averaged over the batch.
            let last = deltas.last_mut().unwrap();
            softmax_into(logits, last);
            last[y] -= 1.0;
            for d in last.iter_mut() {
                *d *= scale;
            }

            for l in (0..layers.len()).rev() {
                let layer = layers[l];
                let input: &[f64] = if l == 0 { x } else { &acts[l - 1] };
                let (lower, upper) = deltas.split_at_mut(l);
                let delta = &upper[0];
                let wr = layer.weight_range();
                for o in 0..layer.fan_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let g_row = &mut grad[wr.start + o * layer.fan_in..wr.start + (o + 1) * layer.fan_in];
                    for (g, xi) in g_row.iter_mut().zip(input) {
                        *g += d * xi;
                    }
                }
                for (g, d) in grad[layer.bias_range()].iter_mut().zip(delta) {
                    *g += d;
                }
                if l > 0 {
                    // Back through W then the ReLU of layer l-1.
                    let prev = &mut lower[l - 1];
                    prev.iter_mut().for_each(|v| *v = 0.0);
                    let w = &self.weights[wr];
                    for o in 0..layer.fan_out {
                        let d = delta[o];
                        if d == 0.0 {
                            continue;
                        }
                        let row = &w[o * layer.fan_in..(o + 1) * layer.fan_in];
                        for (p, wi) in prev.iter_mut().zip(row) {
                            *p += d * wi;
                        }
                    }
                    for (p, a) in prev.iter_mut().zip(&acts[l - 1]) {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                }
            }
        }
        Ok((total * scale, GradVector(grad)))
    }

    /// Returns `weights - lr * g`.
    pub fn sgd_step(&self, g: &GradVector, lr: f64) -> Result<Model> {
        let mut next = self.clone();
        next.apply_sgd(g, lr)?;
        Ok(next)
    }

    /// In-place `weights -= lr * g`.
    pub fn apply_sgd(&mut self, g: &GradVector, lr: f64) -> Result<()> {
        ensure_dim(self.weights.len(), g.len())?;
        if !(lr >= 0.0) || !lr.is_finite() {
            return Err(Error::InvalidInput(format!("learning rate must be >= 0, got {lr}")));
        }
        for (w, gi) in self.weights.iter_mut().zip(g.as_slice()) {
            *w -= lr * gi;
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        ensure_dim(self.input_dim, x.len())?;
        let layers = self.layers();
        let mut acts = Self::scratch(&layers);
        self.forward_sample(&layers, x, &mut acts);
        Ok(argmax(acts.last().unwrap()))
    }

    /// Full deterministic pass: mean cross-entropy and argmax accuracy.
    pub fn evaluate(&self, dataset: &Dataset) -> Result<Evaluation> {
        if dataset.is_empty() {
            return Err(Error::InvalidInput("cannot evaluate on an empty dataset".into()));
        }
        let batch = dataset.as_batch();
        self.check_batch(&batch)?;
        let layers = self.layers();
        let mut acts = Self::scratch(&layers);
        let mut loss = 0.0;
        let mut correct = 0usize;
        for i in 0..batch.len() {
            self.forward_sample(&layers, batch.row(i), &mut acts);
            let logits = acts.last().unwrap();
            let y = batch.labels()[i];
            loss += cross_entropy(logits, y);
            if argmax(logits) == y {
                correct += 1;
            }
        }
        let n = batch.len() as f64;
        Ok(Evaluation {
            loss: loss / n,
            accuracy: correct as f64 / n,
        })
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    // Clamp tiny negative rounding residue so the loss stays nonnegative.
    (log_sum_exp(logits) - logits[label]).max(0.0)
}

fn softmax_into(z: &[f64], out: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, v) in out.iter_mut().zip(z) {
        *o = (v - m).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Step-decayed learning rate `base * decay^round`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base: f64,
    pub decay: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            base: 0.01,
            decay: 0.995,
        }
    }
}

impl LrSchedule {
    pub fn at_round(&self, round: usize) -> f64 {
        self.base * self.decay.powi(round as i32)
    }
}

/// Default schedule: `0.01 * 0.995^round`.
pub fn lr_at_round(round: usize) -> f64 {
    LrSchedule::default().at_round(round)
}
