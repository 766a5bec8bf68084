//! Browser demo: three interactive views over the simulator, exported to
//! JavaScript with `wasm-bindgen`. Each export returns a JSON string.
//!
//! The plain Rust functions are usable and tested natively; the
//! `#[wasm_bindgen]` wrappers only convert errors.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use adagq::allocator::{allocate, predicted_local_times, time_spread, uniform_plan, ClientTimeStats};
use adagq::codec::{qsgd_decode, qsgd_encode};
use adagq::config::ExperimentConfig;
use adagq::data::DatasetSpec;
use adagq::engine::{run_experiment, Strategy};
use adagq::ml::{GradVector, ModelKind};
use adagq::rng::{stream, Purpose};
use adagq::simnet::DownlinkMode;

pub const MAX_DRAWS: u32 = 200_000;
pub const MAX_ROUNDS: usize = 150;

#[derive(Debug, Serialize)]
pub struct Outcome {
    pub value: f64,
    pub analytic: f64,
    pub empirical: f64,
}

#[derive(Debug, Serialize)]
pub struct CoordinateLaw {
    pub input: f64,
    pub outcomes: Vec<Outcome>,
    pub empirical_mean: f64,
}

/// Quantizes `values` `draws` times at `levels` and tabulates, per
/// coordinate, how often each grid point came out against the analytic
/// two-point law.
pub fn quantize_demo(values: &[f64], levels: u32, draws: u32, seed: u64) -> Result<Vec<CoordinateLaw>, String> {
    if draws == 0 || draws > MAX_DRAWS {
        return Err(format!("draws must be in 1..={MAX_DRAWS}"));
    }
    let v = GradVector::new(values.to_vec()).map_err(|e| e.to_string())?;
    let norm = v.norm();
    let mut rng = stream(seed, Purpose::Demo, 0, 0);
    let mut hits: Vec<Vec<(f64, u32)>> = vec![Vec::new(); values.len()];
    let mut sums = vec![0.0; values.len()];
    for _ in 0..draws {
        let q = qsgd_encode(&v, levels, &mut rng).map_err(|e| e.to_string())?;
        let d = qsgd_decode(&q).map_err(|e| e.to_string())?;
        for (j, &x) in d.as_slice().iter().enumerate() {
            sums[j] += x;
            match hits[j].iter_mut().find(|(val, _)| (*val - x).abs() <= 1e-9 * norm.max(1.0)) {
                Some(entry) => entry.1 += 1,
                None => hits[j].push((x, 1)),
            }
        }
    }
    Ok(values
        .iter()
        .enumerate()
        .map(|(j, &input)| {
            let scaled = if norm > 0.0 { input.abs() / norm * levels as f64 } else { 0.0 };
            let low = scaled.floor();
            let p_high = scaled - low;
            let sign = if input < 0.0 { -1.0 } else { 1.0 };
            let step = norm / levels as f64;
            let mut points = vec![(sign * low * step, 1.0 - p_high)];
            if p_high > 0.0 {
                points.push((sign * (low + 1.0) * step, p_high));
            }
            let outcomes = points
                .into_iter()
                .map(|(value, analytic)| {
                    let count = hits[j]
                        .iter()
                        .filter(|(x, _)| (x - value).abs() <= 1e-6 * step.max(1e-12))
                        .map(|(_, c)| *c)
                        .sum::<u32>();
                    Outcome {
                        value,
                        analytic,
                        empirical: count as f64 / draws as f64,
                    }
                })
                .collect();
            CoordinateLaw {
                input,
                outcomes,
                empirical_mean: sums[j] / draws as f64,
            }
        })
        .collect())
}

#[derive(Debug, Serialize)]
pub struct AllocationView {
    pub bits: Vec<u32>,
    pub levels: Vec<u32>,
    pub mean_levels: f64,
    pub predicted_times: Vec<f64>,
    pub spread: f64,
    pub uniform_bits: Vec<u32>,
    pub uniform_times: Vec<f64>,
    pub uniform_spread: f64,
}

/// Allocates bits for clients with the given link rates and per-round
/// compute seconds, for a model of `params` parameters.
pub fn allocate_demo(
    rates_mbps: &[f64],
    compute_s: &[f64],
    params: usize,
    target_levels: f64,
) -> Result<AllocationView, String> {
    if rates_mbps.len() != compute_s.len() || rates_mbps.is_empty() {
        return Err("need one compute time per rate, and at least one client".into());
    }
    if rates_mbps.iter().any(|r| !(*r > 0.0)) || compute_s.iter().any(|c| !(*c >= 0.0)) {
        return Err("rates must be positive and compute times non-negative".into());
    }
    if !(target_levels >= 1.0) {
        return Err("target levels must be >= 1".into());
    }
    let stats: Vec<ClientTimeStats> = rates_mbps
        .iter()
        .zip(compute_s)
        .enumerate()
        .map(|(i, (&rate, &cp))| ClientTimeStats {
            client_id: i,
            mean_compute_s: cp,
            trans_coeff_s_per_bit: params as f64 / (rate * 1e6),
            last_bits: 8,
        })
        .collect();
    let plan = allocate(target_levels, &stats);
    let uniform = uniform_plan(target_levels, stats.len());
    let predicted_times = predicted_local_times(&plan.bits, &stats);
    let uniform_times = predicted_local_times(&uniform.bits, &stats);
    Ok(AllocationView {
        spread: time_spread(&predicted_times),
        uniform_spread: time_spread(&uniform_times),
        bits: plan.bits,
        levels: plan.levels,
        mean_levels: plan.mean_levels,
        predicted_times,
        uniform_bits: uniform.bits,
        uniform_times,
    })
}

#[derive(Debug, Serialize)]
pub struct Point {
    pub round: usize,
    pub time_s: f64,
    pub accuracy: f64,
    pub train_loss: f64,
    pub mean_bits: f64,
}

#[derive(Debug, Serialize)]
pub struct Series {
    pub strategy: String,
    pub points: Vec<Point>,
}

/// A small communication-bound scenario: 8 clients whose slowest link is
/// `sigma_r` times slower than the fastest.
pub fn demo_config(strategy: Strategy, sigma_r: f64, rounds: usize, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(strategy);
    c.seed = seed;
    c.n_clients = 8;
    c.sigma_r = Some(sigma_r);
    c.rate_range_mbps = [0.001, 0.004];
    c.downlink = DownlinkMode::MirrorUplink;
    c.round_cap = rounds;
    c.target_accuracy = None;
    c.dataset = DatasetSpec::Synthetic {
        n_classes: 8,
        input_dim: 16,
        n_train: 2400,
        n_test: 400,
        class_sep: 4.0,
    };
    c.model = ModelKind::Mlp { hidden: vec![16] };
    c
}

/// Accuracy-versus-simulated-time curves for AdaGQ and fixed 8-bit QSGD.
pub fn simulate_demo(sigma_r: f64, rounds: usize, seed: u64) -> Result<Vec<Series>, String> {
    if !(sigma_r >= 1.0) {
        return Err("sigma_r must be >= 1".into());
    }
    if rounds == 0 || rounds > MAX_ROUNDS {
        return Err(format!("rounds must be in 1..={MAX_ROUNDS}"));
    }
    [Strategy::AdaGq, Strategy::Qsgd]
        .into_iter()
        .map(|s| {
            let out = run_experiment(&demo_config(s, sigma_r, rounds, seed)).map_err(|e| e.to_string())?;
            Ok(Series {
                strategy: s.name().to_string(),
                points: out
                    .records
                    .iter()
                    .map(|r| Point {
                        round: r.round,
                        time_s: r.sim_time_s,
                        accuracy: r.test_accuracy,
                        train_loss: r.train_loss,
                        mean_bits: r.bits.iter().map(|&b| b as f64).sum::<f64>() / r.bits.len() as f64,
                    })
                    .collect(),
            })
        })
        .collect()
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = quantizeDemo)]
pub fn quantize_demo_js(values: Vec<f64>, levels: u32, draws: u32, seed: u64) -> Result<String, JsValue> {
    to_js(quantize_demo(&values, levels, draws, seed))
}

#[wasm_bindgen(js_name = allocateDemo)]
pub fn allocate_demo_js(
    rates_mbps: Vec<f64>,
    compute_s: Vec<f64>,
    params: usize,
    target_levels: f64,
) -> Result<String, JsValue> {
    to_js(allocate_demo(&rates_mbps, &compute_s, params, target_levels))
}

#[wasm_bindgen(js_name = simulateDemo)]
pub fn simulate_demo_js(sigma_r: f64, rounds: usize, seed: u64) -> Result<String, JsValue> {
    to_js(simulate_demo(sigma_r, rounds, seed))
}
