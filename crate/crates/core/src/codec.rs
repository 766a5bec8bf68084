//! Gradient compression: QSGD stochastic uniform quantization with fixed-width
//! bit packing, and magnitude Top-k sparsification.
//!
//! # QSGD wire layout
//!
//! All integers little-endian:
//!
//! ```text
//! [dim: u32][levels: u16][norm: f32][payload]
//! ```
//!
//! The payload holds one record per coordinate in canonical weight order.
//! A record is a sign bit (1 = negative) followed by the level index
//! `l ∈ [0, s]` in `index_bits(s) = ⌊log2 s⌋ + 1` bits, least significant bit
//! first. Bits fill each byte starting at its least significant bit; the
//! final byte is zero-padded.
//!
//! Size accounting counts the payload plus the 32-bit norm. `dim` and
//! `levels` are treated as session metadata that both ends already know.

use rand::Rng;

use crate::error::{Error, Result};
use crate::ml::GradVector;

/// Bits counted for the norm header in every quantized upload.
pub const NORM_HEADER_BITS: u64 = 32;
/// Bits per value for full-precision (32-bit float) transfers.
pub const FLOAT_BITS: u64 = 32;
const WIRE_HEADER_BYTES: usize = 4 + 2 + 4;

/// Quantization bit width `b = ⌊log2 s⌋ + 1`.
pub fn bit_width(levels: u32) -> u32 {
    assert!(levels >= 1, "levels must be >= 1");
    32 - levels.leading_zeros()
}

/// Number of levels for a bit width: `2^b - 1`, the largest `s` with
/// `bit_width(s) == b`.
pub fn levels_for_bits(bits: u32) -> u32 {
    assert!((1..=16).contains(&bits), "bit width {bits} outside 1..=16");
    (1u32 << bits) - 1
}

fn index_bits(levels: u32) -> u32 {
    bit_width(levels)
}

fn record_bits(levels: u32) -> u64 {
    1 + index_bits(levels) as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedGradient {
    norm: f32,
    levels: u32,
    dim: usize,
    payload: Vec<u8>,
    payload_bits: u64,
}

struct BitWriter {
    bytes: Vec<u8>,
    bits: u64,
}

impl BitWriter {
    fn with_capacity_bits(bits: u64) -> Self {
        BitWriter {
            bytes: Vec::with_capacity(bits.div_ceil(8) as usize),
            bits: 0,
        }
    }

    fn push(&mut self, value: u32, width: u32) {
        for k in 0..width {
            let bit = (value >> k) & 1;
            let pos = self.bits;
            if pos % 8 == 0 {
                self.bytes.push(0);
            }
            if bit == 1 {
                *self.bytes.last_mut().unwrap() |= 1 << (pos % 8);
            }
            self.bits += 1;
        }
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl BitReader<'_> {
    fn take(&mut self, width: u32) -> u32 {
        let mut value = 0;
        for k in 0..width {
            let byte = self.bytes[(self.pos / 8) as usize];
            value |= (((byte >> (self.pos % 8)) & 1) as u32) << k;
            self.pos += 1;
        }
        value
    }
}

impl QuantizedGradient {
    pub fn norm(&self) -> f32 {
        self.norm
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Paper-style bit width `⌊log2 s⌋ + 1`.
    pub fn bit_width(&self) -> u32 {
        bit_width(self.levels)
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    /// Exact number of payload bits written by the packer.
    pub fn payload_bits(&self) -> u64 {
        self.payload_bits
    }

    /// `(sign_negative, level_index)` for every coordinate.
    pub fn records(&self) -> Result<Vec<(bool, u32)>> {
        let need = self.dim as u64 * record_bits(self.levels);
        if (self.payload.len() as u64) * 8 < need {
            return Err(Error::Format(format!(
                "truncated payload: {} bytes hold fewer than the {need} bits needed for {} coordinates",
                self.payload.len(),
                self.dim
            )));
        }
        let width = index_bits(self.levels);
        let mut reader = BitReader {
            bytes: &self.payload,
            pos: 0,
        };
        let mut out = Vec::with_capacity(self.dim);
        for j in 0..self.dim {
            let negative = reader.take(1) == 1;
            let index = reader.take(width);
            if index > self.levels {
                return Err(Error::Format(format!(
                    "coordinate {j}: level index {index} exceeds s = {}",
                    self.levels
                )));
            }
            out.push((negative, index));
        }
        Ok(out)
    }

    /// Packs hand-specified records. Used for fixtures and by the encoder.
    pub fn from_records(norm: f32, levels: u32, records: &[(bool, u32)]) -> Result<Self> {
        check_levels(levels)?;
        if !(norm >= 0.0) || !norm.is_finite() {
            return Err(Error::InvalidInput(format!("norm must be finite and >= 0, got {norm}")));
        }
        let width = index_bits(levels);
        let mut writer = BitWriter::with_capacity_bits(records.len() as u64 * record_bits(levels));
        for (j, &(negative, index)) in records.iter().enumerate() {
            if index > levels {
                return Err(Error::InvalidInput(format!(
                    "coordinate {j}: level index {index} exceeds s = {levels}"
                )));
            }
            writer.push(negative as u32, 1);
            writer.push(index, width);
        }
        Ok(QuantizedGradient {
            norm,
            levels,
            dim: records.len(),
            payload: writer.bytes,
            payload_bits: writer.bits,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(WIRE_HEADER_BYTES + self.payload.len());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.levels as u16).to_le_bytes());
        out.extend_from_slice(&self.norm.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < WIRE_HEADER_BYTES {
            return Err(Error::Format(format!(
                "truncated header: {} bytes, need {WIRE_HEADER_BYTES}",
                bytes.len()
            )));
        }
        let dim = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let levels = u16::from_le_bytes(bytes[4..6].try_into().unwrap()) as u32;
        let norm = f32::from_le_bytes(bytes[6..10].try_into().unwrap());
        if levels == 0 {
            return Err(Error::Format("levels field is 0".into()));
        }
        let payload_bits = dim as u64 * record_bits(levels);
        let need = payload_bits.div_ceil(8) as usize;
        let payload = &bytes[WIRE_HEADER_BYTES..];
        if payload.len() != need {
            return Err(Error::Format(format!(
                "payload is {} bytes, expected {need} for dim {dim} at s = {levels}",
                payload.len()
            )));
        }
        if !(norm >= 0.0) || !norm.is_finite() {
            return Err(Error::Format(format!("invalid norm {norm}")));
        }
        let q = QuantizedGradient {
            norm,
            levels,
            dim,
            payload: payload.to_vec(),
            payload_bits,
        };
        // Validates every index.
        q.records()?;
        Ok(q)
    }
}

fn check_levels(levels: u32) -> Result<()> {
    if levels < 1 {
        return Err(Error::InvalidInput("quantization levels must be >= 1".into()));
    }
    if levels > u16::MAX as u32 {
        return Err(Error::InvalidInput(format!(
            "quantization levels {levels} exceed the 16-bit wire field"
        )));
    }
    Ok(())
}

/// Stochastic uniform quantization. With `r = |v_j| / ‖v‖ · s` and
/// `l = ⌊r⌋`, coordinate `j` gets index `l + 1` with probability `r - l`
/// and `l` otherwise, so `E[decode] = v`. The zero vector encodes to norm 0
/// with all-zero records.
///
/// One uniform draw is consumed per coordinate regardless of its value.
pub fn qsgd_encode<R: Rng + ?Sized>(v: &GradVector, levels: u32, rng: &mut R) -> Result<QuantizedGradient> {
    check_levels(levels)?;
    if !v.is_finite() {
        return Err(Error::InvalidInput("cannot quantize a non-finite gradient".into()));
    }
    let norm = v.norm();
    if !norm.is_finite() {
        return Err(Error::InvalidInput("gradient norm overflows".into()));
    }
    let s = levels as f64;
    let mut records = Vec::with_capacity(v.len());
    for &x in v.as_slice() {
        let u: f64 = rng.random();
        if norm == 0.0 {
            records.push((false, 0));
            continue;
        }
        let r = (x.abs() / norm * s).min(s);
        let lower = r.floor();
        let up = u < r - lower;
        let index = lower as u32 + up as u32;
        records.push((x < 0.0, index.min(levels)));
    }
    QuantizedGradient::from_records(norm as f32, levels, &records)
}

/// `values[j] = norm · sign_j · l_j / s`.
pub fn qsgd_decode(q: &QuantizedGradient) -> Result<GradVector> {
    let records = q.records()?;
    let norm = q.norm as f64;
    let s = q.levels as f64;
    Ok(GradVector::from(
        records
            .into_iter()
            .map(|(negative, index)| {
                let magnitude = norm * (index as f64 / s);
                if negative {
                    -magnitude
                } else {
                    magnitude
                }
            })
            .collect::<Vec<_>>(),
    ))
}

/// Uploaded size: packed payload bits plus the 32-bit norm header.
pub fn encoded_size_bits(q: &QuantizedGradient) -> u64 {
    q.payload_bits + NORM_HEADER_BITS
}

/// Size a QSGD upload of `dim` coordinates at `levels` would have, without
/// encoding anything.
pub fn qsgd_size_bits(dim: usize, levels: u32) -> u64 {
    dim as u64 * record_bits(levels) + NORM_HEADER_BITS
}

/// Full-precision dense upload: 32 bits per value plus a 32-bit header.
pub fn dense_size_bits(dim: usize) -> u64 {
    dim as u64 * FLOAT_BITS + NORM_HEADER_BITS
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseGradient {
    indices: Vec<u32>,
    values: Vec<f64>,
    dim: usize,
}

impl SparseGradient {
    pub fn new(indices: Vec<u32>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::Format(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format("indices must be strictly increasing".into()));
        }
        if let Some(&last) = indices.last() {
            if last as usize >= dim {
                return Err(Error::Format(format!("index {last} out of range for dim {dim}")));
            }
        }
        Ok(SparseGradient { indices, values, dim })
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k_kept(&self) -> usize {
        self.indices.len()
    }

    /// `k · (32 value bits + ⌈log2 P⌉ index bits)`.
    pub fn size_bits(&self) -> u64 {
        topk_size_bits(self.dim, self.k_kept())
    }
}

pub fn topk_size_bits(dim: usize, k: usize) -> u64 {
    let index_bits = if dim <= 1 {
        0
    } else {
        64 - ((dim - 1) as u64).leading_zeros() as u64
    };
    k as u64 * (FLOAT_BITS + index_bits)
}

/// Number of coordinates kept for a fraction: `⌈fraction · P⌉`, at least 1
/// for a non-empty vector.
pub fn topk_count(dim: usize, fraction: f64) -> usize {
    // The small slack keeps e.g. 0.1 * 1000 from rounding up to 101.
    let k = (fraction * dim as f64 - 1e-9).ceil().max(0.0) as usize;
    k.clamp(dim.min(1), dim)
}

/// Keeps the `⌈fraction · P⌉` largest-magnitude coordinates; ties go to the
/// lower index.
pub fn topk_encode(v: &GradVector, fraction: f64) -> Result<SparseGradient> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "top-k fraction must be in (0, 1], got {fraction}"
        )));
    }
    let x = v.as_slice();
    let k = topk_count(x.len(), fraction);
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    let mut kept: Vec<usize> = order.into_iter().take(k).collect();
    kept.sort_unstable();
    SparseGradient::new(
        kept.iter().map(|&i| i as u32).collect(),
        kept.iter().map(|&i| x[i]).collect(),
        x.len(),
    )
}

pub fn topk_decode(sg: &SparseGradient, dim: usize) -> Result<GradVector> {
    if sg.dim != dim {
        return Err(Error::Format(format!(
            "sparse gradient has dim {} but {dim} was expected",
            sg.dim
        )));
    }
    let mut dense = vec![0.0; dim];
    for (&i, &v) in sg.indices.iter().zip(&sg.values) {
        dense[i as usize] = v;
    }
    Ok(GradVector::from(dense))
}
