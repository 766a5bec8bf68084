//! Server-side adaptive quantization resolution.
//!
//! Each round the server compares the loss decrease rate achieved at the
//! current mean level `s_k` against the rate estimated for the auxiliary
//! level `s'_k = ⌊s_k / 2⌋`, moves `s_k` one bit against the sign of the
//! estimated slope, then nudges it by the change in log2 gradient norm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimates {
    /// Loss decrease per second at the current levels.
    pub current: f64,
    /// Loss decrease per second estimated for the auxiliary levels.
    pub auxiliary: f64,
}

/// Sign of the slope of the rate-gap objective with respect to `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
    Zero,
}

impl Sign {
    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Positive => 1,
            Sign::Negative => -1,
            Sign::Zero => 0,
        }
    }
}

/// `R = (L_prev - L̄) / T`, `R' = (L_prev - L̄') / T'`.
pub fn loss_decrease_rates(
    loss_prev: f64,
    loss_current: f64,
    loss_auxiliary: f64,
    round_time: f64,
    round_time_auxiliary: f64,
) -> Result<RateEstimates> {
    if !(round_time > 0.0) || !(round_time_auxiliary > 0.0) {
        return Err(Error::InvalidInput(format!(
            "round times must be positive (got {round_time}, {round_time_auxiliary})"
        )));
    }
    Ok(RateEstimates {
        current: (loss_prev - loss_current) / round_time,
        auxiliary: (loss_prev - loss_auxiliary) / round_time_auxiliary,
    })
}

/// `sign((R' - R) / (s - s'))`; exact ties give [`Sign::Zero`].
pub fn derivative_sign(rates: RateEstimates, levels: f64, aux_levels: f64) -> Result<Sign> {
    if !(levels > aux_levels) {
        return Err(Error::InvalidInput(format!(
            "auxiliary levels {aux_levels} must be below current levels {levels}"
        )));
    }
    let slope = (rates.auxiliary - rates.current) / (levels - aux_levels);
    Ok(if slope > 0.0 {
        Sign::Positive
    } else if slope < 0.0 {
        Sign::Negative
    } else {
        Sign::Zero
    })
}

/// One-bit move against the slope: halve on `+`, double on `-`, hold on 0.
pub fn update_mean_levels(levels: f64, sign: Sign) -> f64 {
    match sign {
        Sign::Positive => levels - levels / 2.0,
        Sign::Negative => levels + levels,
        Sign::Zero => levels,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibrated {
    pub levels: f64,
    /// Set when a non-positive norm made the log-ratio undefined.
    pub skipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for LevelBounds {
    fn default() -> Self {
        LevelBounds {
            min: 1.0,
            max: 32767.0,
        }
    }
}

impl LevelBounds {
    pub fn clamp(&self, s: f64) -> f64 {
        s.clamp(self.min, self.max)
    }
}

/// `s_next = ŝ + λ_g (log2 ‖g_k‖ - log2 ‖g_{k-1}‖)`, clamped to `bounds`.
pub fn calibrate_with_norm(
    s_hat: f64,
    norm: f64,
    norm_prev: f64,
    lambda_g: f64,
    bounds: LevelBounds,
) -> Calibrated {
    if !(norm > 0.0) || !(norm_prev > 0.0) {
        return Calibrated {
            levels: bounds.clamp(s_hat),
            skipped: true,
        };
    }
    Calibrated {
        levels: bounds.clamp(s_hat + lambda_g * (norm.log2() - norm_prev.log2())),
        skipped: false,
    }
}

/// `⌊s / 2⌋`, never below 1.
pub fn auxiliary_levels(levels: f64) -> u32 {
    ((levels / 2.0).floor() as u32).max(1)
}

/// Norm-only adaptation `s_k = s_{k-1} + log2(‖g_k‖ / ‖g_{k-1}‖)`.
pub fn norm_only_update(prev: f64, norm: f64, norm_prev: f64) -> Result<f64> {
    if !(norm > 0.0) || !(norm_prev > 0.0) {
        return Err(Error::InvalidInput(format!(
            "norms must be positive (got {norm}, {norm_prev})"
        )));
    }
    Ok(prev + (norm / norm_prev).log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    /// Initial mean levels `s_0`.
    pub initial_levels: f64,
    pub lambda_g: f64,
    pub bounds: LevelBounds,
}

impl Default for ControllerParams {
    fn default() -> Self {
        ControllerParams {
            initial_levels: 255.0,
            lambda_g: 1.0,
            bounds: LevelBounds::default(),
        }
    }
}

/// Everything the server measured for round `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerInputs {
    /// Real loss at the end of round `k - 1`.
    pub loss_prev: f64,
    /// Mean probe loss with the aggregate re-quantized at `s_{i,k}`.
    pub loss_current: f64,
    /// Mean probe loss with the aggregate re-quantized at `s'_{i,k}`.
    pub loss_auxiliary: f64,
    pub round_time: f64,
    pub round_time_auxiliary: f64,
    /// `‖g_k‖` of the aggregate produced in round `k`.
    pub grad_norm: f64,
}

/// One logged controller decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub levels: f64,
    pub aux_levels: u32,
    pub rates: Option<RateEstimates>,
    pub sign: Sign,
    pub s_hat: f64,
    pub next_levels: f64,
    pub next_aux_levels: u32,
    pub grad_norm: f64,
    pub calibration_skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    params: ControllerParams,
    levels: f64,
    prev_norm: Option<f64>,
}

impl ControllerState {
    pub fn new(params: ControllerParams) -> Self {
        ControllerState {
            levels: params.bounds.clamp(params.initial_levels),
            params,
            prev_norm: None,
        }
    }

    /// Current mean levels `s_k`.
    pub fn levels(&self) -> f64 {
        self.levels
    }

    /// Current auxiliary levels `s'_k`.
    pub fn aux_levels(&self) -> u32 {
        auxiliary_levels(self.levels)
    }

    pub fn params(&self) -> &ControllerParams {
        &self.params
    }

    pub fn prev_norm(&self) -> Option<f64> {
        self.prev_norm
    }

    /// Records `‖g_k‖` without changing the levels (bootstrap rounds).
    pub fn observe_norm(&mut self, norm: f64) {
        self.prev_norm = Some(norm);
    }

    /// Full update from round `k` measurements to `s_{k+1}`.
    ///
    /// When `s_k` is below 2 the auxiliary level coincides with it, the
    /// comparison carries no information, and the sign is held at zero.
    pub fn step(&mut self, inputs: &ControllerInputs) -> Result<Decision> {
        let levels = self.levels;
        let aux = auxiliary_levels(levels);
        let rates = loss_decrease_rates(
            inputs.loss_prev,
            inputs.loss_current,
            inputs.loss_auxiliary,
            inputs.round_time,
            inputs.round_time_auxiliary,
        )?;
        let sign = if levels > aux as f64 {
            derivative_sign(rates, levels, aux as f64)?
        } else {
            Sign::Zero
        };
        let s_hat = update_mean_levels(levels, sign);
        let calibrated = match self.prev_norm {
            Some(prev) => calibrate_with_norm(
                s_hat,
                inputs.grad_norm,
                prev,
                self.params.lambda_g,
                self.params.bounds,
            ),
            None => Calibrated {
                levels: self.params.bounds.clamp(s_hat),
                skipped: true,
            },
        };
        self.levels = calibrated.levels;
        self.prev_norm = Some(inputs.grad_norm);
        Ok(Decision {
            levels,
            aux_levels: aux,
            rates: Some(rates),
            sign,
            s_hat,
            next_levels: self.levels,
            next_aux_levels: auxiliary_levels(self.levels),
            grad_norm: inputs.grad_norm,
            calibration_skipped: calibrated.skipped,
        })
    }
}
