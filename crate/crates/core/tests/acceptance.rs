//! Acceptance suite: one check per criterion, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the report is always printed. The
//! process exits non-zero if any criterion fails or overruns its budget.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::Rng;

use adagq::allocator::{
    allocate, plan_is_consistent, predicted_local_times, time_spread, uniform_plan, ClientTimeStats,
};
use adagq::cli::{run_to_dir, METRICS_FILE};
use adagq::codec::{bit_width, encoded_size_bits, qsgd_decode, qsgd_encode, qsgd_size_bits, QuantizedGradient};
use adagq::config::ExperimentConfig;
use adagq::controller::{ControllerInputs, ControllerParams, ControllerState};
use adagq::engine::{local_sgd, partition_noniid, CodecKind, Simulation, Strategy};
use adagq::metrics::RunStatus;
use adagq::ml::{Batch, GradVector, Model, ModelKind};
use adagq::rng::{stream, Purpose, SimRng};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn rng(seed: u64) -> SimRng {
    stream(seed, Purpose::Demo, 0, 0)
}

/// Default desk-scale experiment with no early stop.
fn desk_default(strategy: Strategy) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(strategy);
    c.target_accuracy = None;
    c.target_loss = None;
    c
}

fn quantizer_law() -> Check {
    let v = GradVector::from(vec![3.0, 4.0]);
    let n = 100_000;
    let mut r = rng(1);
    let mut high = 0usize;
    for _ in 0..n {
        let x = qsgd_decode(&qsgd_encode(&v, 4, &mut r).map_err(e2s)?).map_err(e2s)?.as_slice()[0];
        if (x - 3.75).abs() < 1e-6 {
            high += 1;
        } else {
            ensure((x - 2.5).abs() < 1e-6, || format!("value {x} outside {{2.5, 3.75}}"))?;
        }
    }
    let p_hat = high as f64 / n as f64;
    let sigma = (0.4 * 0.6 / n as f64).sqrt();
    ensure((p_hat - 0.4).abs() <= 3.0 * sigma, || {
        format!("P(3.75) = {p_hat}, expected 0.4 ± {:.5}", 3.0 * sigma)
    })?;
    Ok(format!("P(3.75) = {p_hat:.4}, P(2.5) = {:.4}", 1.0 - p_hat))
}

fn unbiasedness() -> Check {
    let mut r = rng(2);
    let v: Vec<f64> = (0..100).map(|_| r.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let g = GradVector::from(v.clone());
    let draws = 20_000;
    let mut worst: f64 = 0.0;
    for s in [1u32, 3, 15, 255] {
        let mut sum = vec![0.0; 100];
        for _ in 0..draws {
            let d = qsgd_decode(&qsgd_encode(&g, s, &mut r).map_err(e2s)?).map_err(e2s)?;
            for (acc, x) in sum.iter_mut().zip(d.as_slice()) {
                *acc += x;
            }
        }
        for j in 0..100 {
            let mean = sum[j] / draws as f64;
            // Each draw takes one of the two grid points around |v_j|.
            let scaled = v[j].abs() / norm * s as f64;
            let p = scaled - scaled.floor();
            let sigma = norm / s as f64 * (p * (1.0 - p) / draws as f64).sqrt();
            // The norm travels as f32; allow its rounding on top of 3 sigma.
            let tol = 3.0 * sigma + v[j].abs() * f32::EPSILON as f64;
            let dev = (mean - v[j]).abs();
            ensure(dev <= tol, || format!("s={s}, coord {j}: mean {mean}, v {}, tol {tol}", v[j]))?;
            if sigma > 0.0 {
                worst = worst.max(dev / sigma);
            }
        }
    }
    Ok(format!("400 coordinate means, worst deviation {worst:.2} sigma"))
}

fn bit_accounting() -> Check {
    let mut r = rng(3);
    for _ in 0..2000 {
        let dim = r.random_range(1..300);
        let s = if r.random_bool(0.5) { r.random_range(1..=300) } else { r.random_range(1..=65535) };
        let g = GradVector::from((0..dim).map(|_| r.random_range(-5.0..5.0)).collect::<Vec<f64>>());
        let q = qsgd_encode(&g, s, &mut r).map_err(e2s)?;
        let bytes = q.to_bytes();
        let back = QuantizedGradient::from_bytes(&bytes).map_err(e2s)?;
        let payload_bits = dim as u64 * (bit_width(s) as u64 + 1);
        ensure(encoded_size_bits(&q) == payload_bits + 32, || format!("P={dim}, s={s}: size mismatch"))?;
        ensure(encoded_size_bits(&q) == qsgd_size_bits(dim, s), || format!("P={dim}, s={s}: formula mismatch"))?;
        ensure(bytes.len() as u64 == 10 + payload_bits.div_ceil(8), || format!("P={dim}, s={s}: wire length"))?;
        ensure(back == q, || format!("P={dim}, s={s}: wire round trip"))?;
        ensure(bit_width(s) == (s as f64).log2().floor() as u32 + 1, || format!("s={s}: bit width"))?;
    }
    let mut plans = 0;
    for _ in 0..1000 {
        let stats = random_stats(&mut r);
        let target = 2f64.powf(r.random_range(0.0..16.0));
        let plan = allocate(target, &stats);
        ensure(plan_is_consistent(&plan), || format!("inconsistent plan {plan:?}"))?;
        for (&b, &s) in plan.bits.iter().zip(&plan.levels) {
            ensure(b == (s as f64).log2().floor() as u32 + 1, || format!("plan pair (b={b}, s={s})"))?;
        }
        plans += 1;
    }
    Ok(format!("2000 encodings and {plans} allocator plans consistent"))
}

fn controller_trajectory() -> Check {
    let mut c = ControllerState::new(ControllerParams::default());
    let mut step = |rate: f64, aux_rate: f64, norm: f64| {
        let inputs = ControllerInputs {
            loss_prev: 1.0,
            loss_current: 1.0 - rate,
            loss_auxiliary: 1.0 - aux_rate,
            round_time: 1.0,
            round_time_auxiliary: 1.0,
            grad_norm: norm,
        };
        c.step(&inputs).map(|d| d.next_levels).map_err(e2s)
    };
    let mut s = vec![255.0];
    // The first step has no previous norm and skips calibration.
    s.push(step(0.010, 0.012, 1.0)?);
    s.push(step(0.010, 0.008, 1.0)?);
    s.push(step(0.010, 0.010, 0.5)?);
    let expected = [255.0, 127.5, 255.0, 254.0];
    ensure(s == expected, || format!("trajectory {s:?}, expected {expected:?}"))?;
    Ok(format!("s_k = {s:?}"))
}

fn random_stats(r: &mut SimRng) -> Vec<ClientTimeStats> {
    let n = r.random_range(2..=20);
    (0..n)
        .map(|i| ClientTimeStats {
            client_id: i,
            mean_compute_s: r.random_range(0.0..3.0),
            trans_coeff_s_per_bit: 10f64.powf(r.random_range(-4.0..0.0)),
            last_bits: r.random_range(1..=16),
        })
        .collect()
}

fn allocator_oracle() -> Check {
    let mut r = rng(5);
    let mut tighter = 0;
    for case in 0..1000 {
        let stats = random_stats(&mut r);
        let target = 2f64.powf(r.random_range(0.0..16.0));
        let plan = allocate(target, &stats);
        let uniform = uniform_plan(target, stats.len());
        let a = time_spread(&predicted_local_times(&plan.bits, &stats));
        let u = time_spread(&predicted_local_times(&uniform.bits, &stats));
        ensure(a <= u, || format!("case {case}: plan spread {a} > uniform {u}"))?;
        if a < u {
            tighter += 1;
        }
    }
    let two = vec![
        ClientTimeStats {
            client_id: 0,
            mean_compute_s: 1.0,
            trans_coeff_s_per_bit: 0.5,
            last_bits: 8,
        },
        ClientTimeStats {
            client_id: 1,
            mean_compute_s: 1.0,
            trans_coeff_s_per_bit: 2.0,
            last_bits: 8,
        },
    ];
    let plan = allocate(129.0, &two);
    ensure(plan.bits == vec![8, 2], || format!("worked case gave {:?}", plan.bits))?;
    Ok(format!("1000 cases never wider than uniform ({tighter} strictly tighter); worked case {{8, 2}}"))
}

fn gradient_check() -> Check {
    let mut worst: f64 = 0.0;
    for (k, kind) in [ModelKind::LogisticRegression, ModelKind::Mlp { hidden: vec![7, 5] }]
        .into_iter()
        .enumerate()
    {
        let mut r = rng(6 + k as u64);
        let (dim, classes, n) = (6, 4, 9);
        let model = Model::init(kind, dim, classes, &mut r).map_err(e2s)?;
        let x: Vec<f64> = (0..n * dim).map(|_| r.random_range(0.0..1.0)).collect();
        let y: Vec<usize> = (0..n).map(|_| r.random_range(0..classes)).collect();
        let batch = Batch::new(&x, &y, dim).map_err(e2s)?;
        let g = model.gradient(&batch).map_err(e2s)?;
        let h = 1e-5;
        for _ in 0..100 {
            let j = r.random_range(0..model.param_count());
            let mut w = model.weights().to_vec();
            w[j] += h;
            let plus = Model::from_weights(model.kind().clone(), dim, classes, w.clone()).map_err(e2s)?;
            w[j] -= 2.0 * h;
            let minus = Model::from_weights(model.kind().clone(), dim, classes, w).map_err(e2s)?;
            let fd = (plus.forward_loss(&batch).map_err(e2s)? - minus.forward_loss(&batch).map_err(e2s)?) / (2.0 * h);
            let an = g.as_slice()[j];
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
            ensure(rel <= 1e-5, || format!("param {j}: analytic {an}, numeric {fd}, rel {rel:e}"))?;
            worst = worst.max(rel);
        }
    }
    Ok(format!("200 probes, worst relative error {worst:.2e}"))
}

fn identity_limit() -> Check {
    let mut cfg = desk_default(Strategy::AdaGq);
    cfg.strategy_params.codec = CodecKind::Identity;
    cfg.strategy_params.local_epochs = Some(1);
    cfg.round_cap = 20;
    let mut sim = Simulation::new(&cfg).map_err(e2s)?;
    let clients = sim.clients().to_vec();
    let mut w = sim.initial_model().clone();
    let schedule = cfg.lr_schedule();
    for round in 0..20 {
        sim.step().map_err(e2s)?;
        // Plain synchronous FedSGD: every client runs one local epoch from
        // the global model; the server takes the weighted mean update.
        let lr = schedule.at_round(round);
        let mut update = vec![0.0; w.param_count()];
        for c in &clients {
            let mut shuffle = stream(cfg.seed, Purpose::Shuffle, c.id as u64, round as u64);
            let end = local_sgd(&w, &c.train, 1, cfg.batch_size, lr, &mut shuffle).map_err(e2s)?;
            for ((u, a), b) in update.iter_mut().zip(w.weights()).zip(end.weights()) {
                *u += c.weight * ((a - b) / lr);
            }
        }
        let next: Vec<f64> = w.weights().iter().zip(&update).map(|(a, u)| a - lr * u).collect();
        w = Model::from_weights(w.kind().clone(), w.input_dim(), w.n_classes(), next).map_err(e2s)?;
        let same = sim.model().weights().iter().zip(w.weights()).all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(same, || format!("trajectories diverge at round {round}"))?;
    }
    Ok(format!("20 rounds bitwise identical ({} parameters)", w.param_count()))
}

fn motivation_norm_adaptive() -> Check {
    let q = adagq::engine::run_experiment(&desk_default(Strategy::Qsgd)).map_err(e2s)?;
    let n = adagq::engine::run_experiment(&desk_default(Strategy::NormAdaptive)).map_err(e2s)?;
    let acc_q = q.summary.final_test_accuracy.unwrap_or(0.0);
    let acc_n = n.summary.final_test_accuracy.unwrap_or(0.0);
    let (bytes_q, bytes_n) = (q.summary.total_uploaded_bytes, n.summary.total_uploaded_bytes);
    let detail = format!(
        "accuracy {acc_n:.4} vs QSGD {acc_q:.4}; uploaded {bytes_n} vs {bytes_q} bytes ({:.1}%)",
        100.0 * bytes_n as f64 / bytes_q as f64
    );
    ensure(acc_n >= acc_q - 0.005, || format!("accuracy gap too large: {detail}"))?;
    ensure(bytes_n < bytes_q, || format!("no upload savings: {detail}"))?;
    Ok(detail)
}

fn straggler_config() -> Result<ExperimentConfig, String> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/straggler.toml");
    ExperimentConfig::load(&path, &[]).map_err(e2s)
}

fn motivation_straggler() -> Check {
    let base = straggler_config()?;
    let mut times = [0.0f64; 2];
    let seeds = [0u64, 1, 2, 3];
    let mut per_seed = Vec::new();
    for &seed in &seeds {
        let mut pair = [0.0; 2];
        for (k, strategy) in [Strategy::AdaGq, Strategy::Qsgd].into_iter().enumerate() {
            let mut cfg = base.clone();
            cfg.seed = seed;
            cfg.strategy = strategy;
            let out = adagq::engine::run_experiment(&cfg).map_err(e2s)?;
            ensure(out.summary.status == RunStatus::Reached, || {
                format!("{strategy} seed {seed} missed the target loss within {} rounds", cfg.round_cap)
            })?;
            pair[k] = out.summary.total_time_s;
            times[k] += out.summary.total_time_s / seeds.len() as f64;
        }
        per_seed.push(format!("{:.2}", pair[0] / pair[1]));
    }
    let ratio = times[0] / times[1];
    let detail = format!(
        "mean time to target {:.1} s vs QSGD {:.1} s, ratio {ratio:.3} (per seed {})",
        times[0],
        times[1],
        per_seed.join(", ")
    );
    ensure(ratio <= 0.8, || format!("speedup below 20%: {detail}"))?;
    Ok(detail)
}

fn determinism_and_accounting() -> Check {
    let mut cfg = desk_default(Strategy::AdaGq);
    cfg.round_cap = 25;
    let tmp = tempfile::tempdir().map_err(e2s)?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_to_dir(&cfg, &a, None).map_err(e2s)?;
    run_to_dir(&cfg, &b, None).map_err(e2s)?;
    let csv_a = std::fs::read(a.join(METRICS_FILE)).map_err(e2s)?;
    let csv_b = std::fs::read(b.join(METRICS_FILE)).map_err(e2s)?;
    ensure(csv_a == csv_b, || "metrics.csv differs between identical runs".into())?;

    let sim = Simulation::new(&cfg).map_err(e2s)?;
    let p = sim.model().param_count();
    let out = sim.run().map_err(e2s)?;
    let mut bytes = 0u64;
    for t in &out.telemetry {
        for c in &t.clients {
            let levels = c.levels.ok_or("quantized upload without levels")?;
            ensure(c.uploaded_bits == qsgd_size_bits(p, levels), || {
                format!("round {} client {}: bits {} != encoded size", t.round, c.client_id, c.uploaded_bits)
            })?;
            bytes += c.uploaded_bits.div_ceil(8);
        }
    }
    let total = out.records.last().map_or(0, |r| r.uploaded_bytes_total);
    ensure(total == bytes, || format!("cumulative {total} != sum of encoded sizes {bytes}"))?;
    Ok(format!("{} byte-identical CSV; {bytes} bytes accounted over 25 rounds", csv_a.len()))
}

fn partitioner() -> Check {
    let cfg = desk_default(Strategy::Qsgd);
    let (train, _) = cfg.dataset.load(cfg.seed).map_err(e2s)?;
    let mut worst: f64 = 0.0;
    for sigma in [0.2, 0.5, 0.8] {
        let parts = partition_noniid(train.labels(), train.n_classes(), 20, sigma, &mut rng(11)).map_err(e2s)?;
        for (i, part) in parts.iter().enumerate() {
            let dom = part.dominant_class.ok_or("missing dominant class")?;
            let count = part.indices.iter().filter(|&&j| train.labels()[j] == dom).count();
            let dev = (count as f64 - sigma * part.indices.len() as f64).abs();
            ensure(dev <= 1.0, || format!("sigma_d {sigma}, client {i}: {count} of {}", part.indices.len()))?;
            worst = worst.max(dev);
        }
    }
    Ok(format!("60 partitions, worst deviation {worst} samples"))
}

fn main() {
    let criteria: [(&str, u64, fn() -> Check); 11] = [
        ("quantizer two-point law", 5, quantizer_law),
        ("quantizer unbiasedness", 30, unbiasedness),
        ("bit accounting", 5, bit_accounting),
        ("controller trajectory", 1, controller_trajectory),
        ("allocator oracle", 10, allocator_oracle),
        ("gradient finite differences", 30, gradient_check),
        ("identity-limit equivalence", 60, identity_limit),
        ("norm-adaptive vs fixed 8-bit", 600, motivation_norm_adaptive),
        ("straggler speedup", 900, motivation_straggler),
        ("determinism and accounting", 120, determinism_and_accounting),
        ("non-iid partitioner", 1, partitioner),
    ];
    let mut failed = 0;
    for (i, (name, budget_s, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let budget = Duration::from_secs(*budget_s);
        let (ok, detail) = match result {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over time budget")),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {detail} [{:.2}s / {budget_s}s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
