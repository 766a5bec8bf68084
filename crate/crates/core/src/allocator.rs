//! Heterogeneous per-client bit allocation.
//!
//! The expected local time of client `i` is modelled as
//! `E[t_i] = mean_compute_i + b_i · coeff_i`, where `coeff_i` is the
//! transmission seconds per unit of bit width observed last round. Fixing
//! one client's bits determines every other client's bits by equating
//! expected times. The anchor client and its bit width are chosen by
//! exhaustive search so that the mean of the resulting levels is as close as
//! possible to the controller's target `s_next`.

use serde::{Deserialize, Serialize};

use crate::codec::{bit_width, levels_for_bits};
use crate::error::{Error, Result};
use crate::telemetry::RoundTelemetry;

pub const MIN_BITS: u32 = 1;
pub const MAX_BITS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClientTimeStats {
    pub client_id: usize,
    /// Mean of every recorded local training time, seconds.
    pub mean_compute_s: f64,
    /// Last round's upload time divided by its bit width, seconds per bit.
    pub trans_coeff_s_per_bit: f64,
    pub last_bits: u32,
}

impl ClientTimeStats {
    /// Model-predicted local time at `bits`.
    pub fn expected_time(&self, bits: u32) -> f64 {
        self.mean_compute_s + bits as f64 * self.trans_coeff_s_per_bit
    }

    fn is_usable(&self) -> bool {
        self.mean_compute_s.is_finite()
            && self.mean_compute_s >= 0.0
            && self.trans_coeff_s_per_bit.is_finite()
            && self.trans_coeff_s_per_bit > 0.0
    }
}

pub fn estimate_time_stats(history: &[RoundTelemetry], client_id: usize) -> Result<ClientTimeStats> {
    let records: Vec<_> = history.iter().filter_map(|r| r.client(client_id)).collect();
    let last = records.last().ok_or_else(|| {
        Error::InvalidInput(format!("no completed rounds recorded for client {client_id}"))
    })?;
    if last.bits == 0 {
        return Err(Error::InvalidInput(format!(
            "client {client_id} reported a zero bit width"
        )));
    }
    let mean_compute_s = records.iter().map(|c| c.t_cp).sum::<f64>() / records.len() as f64;
    Ok(ClientTimeStats {
        client_id,
        mean_compute_s,
        trans_coeff_s_per_bit: last.t_cm / last.bits as f64,
        last_bits: last.bits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeBits {
    pub bits: f64,
    /// Set when the equal-time solution was below one bit and got clamped.
    pub clamped: bool,
}

/// Bits for `other` that equalize its expected local time with `anchor`
/// holding `anchor_bits`:
/// `b_j = (mean_cp_i - mean_cp_j + b_i · coeff_i) / coeff_j`.
pub fn relative_bits(anchor: &ClientTimeStats, anchor_bits: u32, other: &ClientTimeStats) -> Result<RelativeBits> {
    if !(anchor.trans_coeff_s_per_bit > 0.0) || !(other.trans_coeff_s_per_bit > 0.0) {
        return Err(Error::InvalidInput(
            "transmission coefficients must be positive".into(),
        ));
    }
    let raw = (anchor.mean_compute_s - other.mean_compute_s
        + anchor_bits as f64 * anchor.trans_coeff_s_per_bit)
        / other.trans_coeff_s_per_bit;
    Ok(if raw < MIN_BITS as f64 {
        RelativeBits {
            bits: MIN_BITS as f64,
            clamped: true,
        }
    } else {
        RelativeBits {
            bits: raw,
            clamped: false,
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanSource {
    /// Equal-time plan anchored at `client` holding `bits`.
    Anchored { client: usize, bits: u32 },
    /// Stats were missing or unusable.
    Degenerate,
    /// The uniform plan predicted a tighter time spread than every anchored
    /// candidate after rounding.
    UniformTighter,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    /// Per-client bit widths, indexed like the input stats.
    pub bits: Vec<u32>,
    /// Per-client levels, `2^b - 1`.
    pub levels: Vec<u32>,
    pub mean_levels: f64,
    pub source: PlanSource,
}

impl AllocationPlan {
    fn from_bits(bits: Vec<u32>, source: PlanSource) -> Self {
        let levels: Vec<u32> = bits.iter().map(|&b| levels_for_bits(b)).collect();
        let mean_levels = levels.iter().map(|&s| s as f64).sum::<f64>() / levels.len().max(1) as f64;
        AllocationPlan {
            bits,
            levels,
            mean_levels,
            source,
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// The uniform bit width whose level `2^b - 1` is nearest `target`; ties
/// go to fewer bits.
pub fn uniform_bits(target: f64) -> u32 {
    (MIN_BITS..=MAX_BITS)
        .min_by(|&a, &b| {
            let da = (levels_for_bits(a) as f64 - target).abs();
            let db = (levels_for_bits(b) as f64 - target).abs();
            da.total_cmp(&db).then(a.cmp(&b))
        })
        .unwrap()
}

pub fn uniform_plan(target: f64, n: usize) -> AllocationPlan {
    AllocationPlan::from_bits(vec![uniform_bits(target); n], PlanSource::Uniform)
}

pub fn predicted_local_times(bits: &[u32], stats: &[ClientTimeStats]) -> Vec<f64> {
    bits.iter().zip(stats).map(|(&b, s)| s.expected_time(b)).collect()
}

/// `max / min` of predicted local times; 1 for a perfectly balanced plan.
pub fn time_spread(times: &[f64]) -> f64 {
    let max = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = times.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn anchored_bits(stats: &[ClientTimeStats], anchor: usize, anchor_bits: u32) -> Vec<u32> {
    stats
        .iter()
        .enumerate()
        .map(|(j, other)| {
            if j == anchor {
                anchor_bits
            } else {
                let rel = relative_bits(&stats[anchor], anchor_bits, other)
                    .expect("stats validated before the search");
                (rel.bits.round() as u32).clamp(MIN_BITS, MAX_BITS)
            }
        })
        .collect()
}

/// Chooses per-client bits for mean target `s_next`.
///
/// Candidates are every (anchor client, anchor bits in 1..=16) pair; the
/// plan whose mean level is nearest `s_next` wins, then fewer total bits,
/// then the lower anchor. If rounding leaves that plan with a wider
/// predicted time spread than the uniform plan for the same target, the
/// uniform plan is returned instead.
pub fn allocate(s_next: f64, stats: &[ClientTimeStats]) -> AllocationPlan {
    let n = stats.len();
    if n == 0 {
        return AllocationPlan::from_bits(vec![], PlanSource::Degenerate);
    }
    if !stats.iter().all(ClientTimeStats::is_usable) {
        return AllocationPlan::from_bits(vec![uniform_bits(s_next); n], PlanSource::Degenerate);
    }

    let mut best: Option<(f64, u32, AllocationPlan)> = None;
    for anchor in 0..n {
        for anchor_bits in MIN_BITS..=MAX_BITS {
            let plan = AllocationPlan::from_bits(
                anchored_bits(stats, anchor, anchor_bits),
                PlanSource::Anchored {
                    client: stats[anchor].client_id,
                    bits: anchor_bits,
                },
            );
            let gap = (plan.mean_levels - s_next).abs();
            let total: u32 = plan.bits.iter().sum();
            let better = match &best {
                None => true,
                Some((g, t, _)) => gap < *g || (gap == *g && total < *t),
            };
            if better {
                best = Some((gap, total, plan));
            }
        }
    }
    let (_, _, chosen) = best.unwrap();

    let uniform = uniform_plan(s_next, n);
    let chosen_spread = time_spread(&predicted_local_times(&chosen.bits, stats));
    let uniform_spread = time_spread(&predicted_local_times(&uniform.bits, stats));
    if uniform_spread < chosen_spread {
        AllocationPlan {
            source: PlanSource::UniformTighter,
            ..uniform
        }
    } else {
        chosen
    }
}

/// Checks `b == ⌊log2 s⌋ + 1` for every client of a plan.
pub fn plan_is_consistent(plan: &AllocationPlan) -> bool {
    plan.bits.len() == plan.levels.len()
        && plan
            .bits
            .iter()
            .zip(&plan.levels)
            .all(|(&b, &s)| (MIN_BITS..=MAX_BITS).contains(&b) && bit_width(s) == b)
}
