//! Client-side primitives: local training, pseudo-gradients, upload
//! encoding, and the server's weighted aggregation.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{
    dense_size_bits, qsgd_decode, qsgd_encode, topk_decode, topk_encode, QuantizedGradient, SparseGradient,
    FLOAT_BITS,
};
use crate::data::Dataset;
use crate::error::{ensure_dim, Error, Result};
use crate::ml::{Batch, GradVector, Model};

/// Runs `epochs` passes of minibatch SGD over `data`, reshuffling each
/// epoch. The final batch of an epoch may be short.
pub fn local_sgd<R: Rng + ?Sized>(
    model: &Model,
    data: &Dataset,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    rng: &mut R,
) -> Result<Model> {
    if batch_size == 0 {
        return Err(Error::InvalidInput("batch size must be positive".into()));
    }
    if data.is_empty() {
        return Err(Error::InsufficientData("client has no training samples".into()));
    }
    let dim = data.input_dim();
    let mut model = model.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut features = Vec::with_capacity(batch_size * dim);
    let mut labels = Vec::with_capacity(batch_size);
    for _ in 0..epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch_size) {
            features.clear();
            labels.clear();
            for &i in chunk {
                features.extend_from_slice(data.row(i));
                labels.push(data.labels()[i]);
            }
            let g = model.gradient(&Batch::new(&features, &labels, dim)?)?;
            model.apply_sgd(&g, lr)?;
        }
    }
    Ok(model)
}

/// `(start - end) / lr`: the update a client uploads. For a single SGD
/// step this is that step's gradient.
pub fn pseudo_gradient(start: &Model, end: &Model, lr: f64) -> Result<GradVector> {
    ensure_dim(start.param_count(), end.param_count())?;
    if !(lr > 0.0) {
        return Err(Error::InvalidInput(format!("learning rate must be positive, got {lr}")));
    }
    GradVector::new(
        start
            .weights()
            .iter()
            .zip(end.weights())
            .map(|(s, e)| (s - e) / lr)
            .collect(),
    )
}

/// `Σ p_i · u_i`, accumulated in slice order.
pub fn aggregate(updates: &[GradVector], weights: &[f64]) -> Result<GradVector> {
    if updates.is_empty() {
        return Err(Error::Protocol("no updates to aggregate".into()));
    }
    ensure_dim(updates.len(), weights.len())?;
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 || weights.iter().any(|&p| !(p >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "aggregation weights must be non-negative and sum to 1 (sum {total})"
        )));
    }
    let mut acc = GradVector::zeros(updates[0].len());
    for (u, &p) in updates.iter().zip(weights) {
        acc.add_scaled(u, p)?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodecKind {
    #[default]
    Qsgd,
    /// Full-precision uploads; the limit of infinite resolution.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Upload {
    Quantized(QuantizedGradient),
    Sparse(SparseGradient),
    Dense(GradVector),
}

impl Upload {
    pub fn qsgd<R: Rng + ?Sized>(g: &GradVector, levels: u32, rng: &mut R) -> Result<Self> {
        Ok(Upload::Quantized(qsgd_encode(g, levels, rng)?))
    }

    pub fn topk(g: &GradVector, fraction: f64) -> Result<Self> {
        Ok(Upload::Sparse(topk_encode(g, fraction)?))
    }

    pub fn size_bits(&self) -> u64 {
        match self {
            Upload::Quantized(q) => crate::codec::encoded_size_bits(q),
            Upload::Sparse(s) => s.size_bits(),
            Upload::Dense(g) => dense_size_bits(g.len()),
        }
    }

    /// Bit width used by the time model: `⌊log2 s⌋ + 1` for quantized
    /// uploads, the float width otherwise.
    pub fn bit_width(&self) -> u32 {
        match self {
            Upload::Quantized(q) => q.bit_width(),
            _ => FLOAT_BITS as u32,
        }
    }

    pub fn levels(&self) -> Option<u32> {
        match self {
            Upload::Quantized(q) => Some(q.levels()),
            _ => None,
        }
    }

    pub fn decode(&self, dim: usize) -> Result<GradVector> {
        let g = match self {
            Upload::Quantized(q) => qsgd_decode(q)?,
            Upload::Sparse(s) => topk_decode(s, dim)?,
            Upload::Dense(g) => g.clone(),
        };
        ensure_dim(dim, g.len())?;
        Ok(g)
    }
}
