//! Experiment configuration: a strict TOML schema with documented defaults.
//!
//! A minimal file is a single line, `strategy = "qsgd"`. Unknown keys are
//! rejected. `key=value` overrides use dotted paths (`controller.lambda_g=0.5`)
//! and are applied to the parsed document before validation, so they obey
//! the same schema.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::{ControllerParams, LevelBounds};
use crate::codec::levels_for_bits;
use crate::data::DatasetSpec;
use crate::engine::{CodecKind, Strategy};
use crate::error::{Error, Result};
use crate::ml::{LrSchedule, ModelKind};
use crate::simnet::{DownlinkMode, NetworkParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub strategy: Strategy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_n_clients")]
    pub n_clients: usize,
    /// Fraction of each client's data drawn from its dominant class.
    #[serde(default = "d_sigma_d")]
    pub sigma_d: f64,
    /// Fastest-to-slowest rate ratio. When set, the slowest rate becomes
    /// `rate_range_mbps[1] / sigma_r`.
    #[serde(default)]
    pub sigma_r: Option<f64>,
    #[serde(default = "d_rate_range")]
    pub rate_range_mbps: [f64; 2],
    #[serde(default)]
    pub rate_jitter: f64,
    #[serde(default = "d_round_cap")]
    pub round_cap: usize,
    #[serde(default)]
    pub target_loss: Option<f64>,
    #[serde(default = "d_target_accuracy")]
    pub target_accuracy: Option<f64>,
    #[serde(default = "d_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub lr: LrConfig,
    #[serde(default = "d_t_server")]
    pub t_server_s: f64,
    #[serde(default = "d_compute_range")]
    pub compute_range_s: [f64; 2],
    #[serde(default = "d_compute_noise")]
    pub compute_noise_sigma: f64,
    #[serde(default)]
    pub downlink: DownlinkMode,
    /// Share of each partition held out as the client's probe set.
    #[serde(default = "d_probe_fraction")]
    pub probe_fraction: f64,
    #[serde(default)]
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub model: ModelKind,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub strategy_params: StrategyParams,
}

fn d_n_clients() -> usize {
    20
}
fn d_sigma_d() -> f64 {
    0.5
}
fn d_rate_range() -> [f64; 2] {
    [5.0, 20.0]
}
fn d_round_cap() -> usize {
    200
}
fn d_target_accuracy() -> Option<f64> {
    Some(0.8)
}
fn d_batch_size() -> usize {
    32
}
fn d_t_server() -> f64 {
    0.05
}
fn d_compute_range() -> [f64; 2] {
    [0.5, 1.5]
}
fn d_compute_noise() -> f64 {
    0.05
}
fn d_probe_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrConfig {
    #[serde(default = "d_lr_base")]
    pub base: f64,
    #[serde(default = "d_lr_decay")]
    pub decay: f64,
}

fn d_lr_base() -> f64 {
    0.1
}
fn d_lr_decay() -> f64 {
    0.995
}

impl Default for LrConfig {
    fn default() -> Self {
        LrConfig {
            base: d_lr_base(),
            decay: d_lr_decay(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    /// Starting bit width; the starting level count is `2^bits - 1`.
    #[serde(default = "d_initial_bits")]
    pub initial_bits: u32,
    #[serde(default = "d_lambda_g")]
    pub lambda_g: f64,
    #[serde(default = "d_s_min")]
    pub s_min: f64,
    #[serde(default = "d_s_max")]
    pub s_max: f64,
}

fn d_initial_bits() -> u32 {
    8
}
fn d_lambda_g() -> f64 {
    1.0
}
fn d_s_min() -> f64 {
    LevelBounds::default().min
}
fn d_s_max() -> f64 {
    LevelBounds::default().max
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            initial_bits: d_initial_bits(),
            lambda_g: d_lambda_g(),
            s_min: d_s_min(),
            s_max: d_s_max(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyParams {
    /// Bit width of fixed-resolution QSGD uploads (QSGD, FedPAQ) and the
    /// starting width of NormAdaptive.
    #[serde(default = "d_qsgd_bits")]
    pub qsgd_bits: u32,
    #[serde(default = "d_topk_fraction")]
    pub topk_fraction: f64,
    /// Overrides the strategy's default number of local epochs.
    #[serde(default)]
    pub local_epochs: Option<usize>,
    /// Upload codec for AdaGQ; `identity` disables compression.
    #[serde(default)]
    pub codec: CodecKind,
}

fn d_qsgd_bits() -> u32 {
    8
}
fn d_topk_fraction() -> f64 {
    0.1
}

impl Default for StrategyParams {
    fn default() -> Self {
        StrategyParams {
            qsgd_bits: d_qsgd_bits(),
            topk_fraction: d_topk_fraction(),
            local_epochs: None,
            codec: CodecKind::default(),
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

impl ExperimentConfig {
    /// A config with every default and the given strategy.
    pub fn new(strategy: Strategy) -> Self {
        let mut table = toml::Table::new();
        table.insert(
            "strategy".into(),
            toml::Value::String(strategy.name().into()),
        );
        Self::from_table(table).expect("defaults are valid")
    }

    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, overrides).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.n_clients >= 1, || "n_clients must be >= 1".into())?;
        check((0.0..=1.0).contains(&self.sigma_d), || {
            format!("sigma_d must be in [0, 1], got {}", self.sigma_d)
        })?;
        if let Some(r) = self.sigma_r {
            check(r >= 1.0 && r.is_finite(), || format!("sigma_r must be >= 1, got {r}"))?;
        }
        let [lo, hi] = self.rate_range_mbps;
        check(lo > 0.0 && lo <= hi && hi.is_finite(), || {
            format!("rate_range_mbps must satisfy 0 < min <= max, got [{lo}, {hi}]")
        })?;
        check((0.0..1.0).contains(&self.rate_jitter), || {
            format!("rate_jitter must be in [0, 1), got {}", self.rate_jitter)
        })?;
        if let Some(t) = self.target_loss {
            check(t.is_finite() && t >= 0.0, || format!("target_loss must be >= 0, got {t}"))?;
        }
        if let Some(t) = self.target_accuracy {
            check((0.0..=1.0).contains(&t), || format!("target_accuracy must be in [0, 1], got {t}"))?;
        }
        check(self.batch_size >= 1, || "batch_size must be >= 1".into())?;
        check(
            self.lr.base > 0.0 && self.lr.base.is_finite() && self.lr.decay > 0.0 && self.lr.decay <= 1.0,
            || format!("lr needs base > 0 and decay in (0, 1], got {:?}", self.lr),
        )?;
        check(self.t_server_s >= 0.0 && self.t_server_s.is_finite(), || {
            format!("t_server_s must be >= 0, got {}", self.t_server_s)
        })?;
        let [lo, hi] = self.compute_range_s;
        check(lo > 0.0 && lo <= hi && hi.is_finite(), || {
            format!("compute_range_s must satisfy 0 < min <= max, got [{lo}, {hi}]")
        })?;
        check(self.compute_noise_sigma >= 0.0 && self.compute_noise_sigma.is_finite(), || {
            format!("compute_noise_sigma must be >= 0, got {}", self.compute_noise_sigma)
        })?;
        check(self.probe_fraction > 0.0 && self.probe_fraction < 1.0, || {
            format!("probe_fraction must be in (0, 1), got {}", self.probe_fraction)
        })?;
        let c = &self.controller;
        check((1..=16).contains(&c.initial_bits), || {
            format!("controller.initial_bits must be in 1..=16, got {}", c.initial_bits)
        })?;
        check(c.lambda_g >= 0.0 && c.lambda_g.is_finite(), || {
            format!("controller.lambda_g must be >= 0, got {}", c.lambda_g)
        })?;
        check(c.s_min >= 1.0 && c.s_min <= c.s_max && c.s_max <= 65535.0, || {
            format!("controller bounds need 1 <= s_min <= s_max <= 65535, got [{}, {}]", c.s_min, c.s_max)
        })?;
        let p = &self.strategy_params;
        check((1..=16).contains(&p.qsgd_bits), || {
            format!("strategy_params.qsgd_bits must be in 1..=16, got {}", p.qsgd_bits)
        })?;
        check(p.topk_fraction > 0.0 && p.topk_fraction <= 1.0, || {
            format!("strategy_params.topk_fraction must be in (0, 1], got {}", p.topk_fraction)
        })?;
        if let Some(e) = p.local_epochs {
            check(e >= 1, || "strategy_params.local_epochs must be >= 1".into())?;
        }
        Ok(())
    }

    /// Resolved fastest-to-slowest rate ratio.
    pub fn resolved_sigma_r(&self) -> f64 {
        let [lo, hi] = self.rate_range_mbps;
        self.sigma_r.unwrap_or(hi / lo)
    }

    pub fn network_params(&self) -> NetworkParams {
        NetworkParams {
            n_clients: self.n_clients,
            rounds: self.round_cap,
            max_rate_mbps: self.rate_range_mbps[1],
            sigma_r: self.resolved_sigma_r(),
            rate_jitter: self.rate_jitter,
            compute_range_s: self.compute_range_s,
            compute_noise_sigma: self.compute_noise_sigma,
        }
    }

    pub fn lr_schedule(&self) -> LrSchedule {
        LrSchedule {
            base: self.lr.base,
            decay: self.lr.decay,
        }
    }

    pub fn controller_params(&self) -> ControllerParams {
        ControllerParams {
            initial_levels: levels_for_bits(self.controller.initial_bits) as f64,
            lambda_g: self.controller.lambda_g,
            bounds: LevelBounds {
                min: self.controller.s_min,
                max: self.controller.s_max,
            },
        }
    }

    pub fn local_epochs(&self) -> usize {
        self.strategy_params
            .local_epochs
            .unwrap_or_else(|| self.strategy.default_local_epochs())
    }
}

/// Parses a TOML scalar or array; anything unparseable is taken as a bare
/// string so `strategy=qsgd` works without quotes.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    toml::from_str::<toml::Table>(&doc)
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key {key:?} is malformed")));
    }
    let mut cursor = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key {key:?}: {part} is not a table")))?;
    }
    cursor.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}
