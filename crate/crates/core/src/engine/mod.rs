//! Federated training orchestration: the synchronous round protocol for
//! AdaGQ and the baseline strategies.
//!
//! # Round `r`
//!
//! 1. Clients receive the previous aggregate `g_{r-1}` (round 0: the
//!    initial weights). Adaptive runs probe first: each client re-quantizes
//!    `g_{r-1}` at its current and auxiliary levels and measures, on its
//!    probe split, the loss of its replica before the update and after each
//!    re-quantized update.
//! 2. The server turns round `r-1`'s probes and timing into new levels
//!    (controller) and a per-client assignment (allocator).
//! 3. Clients apply `g_{r-1}` exactly, train locally, and upload
//!    `(w_start - w_end) / lr` encoded as their strategy prescribes.
//! 4. The server aggregates uploads in client order and steps the model.
//!
//! With full participation and a lossless broadcast every replica equals
//! the server model after step 3's update, so one copy is kept.

mod client;
mod partition;

use serde::{Deserialize, Serialize};

pub use client::{aggregate, local_sgd, pseudo_gradient, CodecKind, Upload};
pub use partition::{partition_noniid, Partition};

use crate::allocator::{allocate, estimate_time_stats, uniform_plan, AllocationPlan, MAX_BITS, MIN_BITS};
use crate::codec::{dense_size_bits, levels_for_bits, qsgd_decode, qsgd_encode};
use crate::config::ExperimentConfig;
use crate::controller::{norm_only_update, ControllerInputs, ControllerState, Decision};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{RoundRecord, RunStatus, Summary};
use crate::ml::{GradVector, LrSchedule, Model};
use crate::rng::{stream, Purpose, SERVER};
use crate::simnet::{
    hypothetical_round_time, round_time, transmission_time, ClientTimes, DownlinkMode, NetworkTrace, RoundTiming,
};
use crate::telemetry::{ClientTelemetry, ProbeLosses, RoundTelemetry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "adagq")]
    AdaGq,
    #[serde(rename = "fedavg")]
    FedAvg,
    #[serde(rename = "qsgd")]
    Qsgd,
    #[serde(rename = "topk")]
    TopK,
    #[serde(rename = "fedpaq")]
    FedPaq,
    #[serde(rename = "norm_adaptive")]
    NormAdaptive,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::AdaGq,
        Strategy::FedAvg,
        Strategy::Qsgd,
        Strategy::TopK,
        Strategy::FedPaq,
        Strategy::NormAdaptive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::AdaGq => "adagq",
            Strategy::FedAvg => "fedavg",
            Strategy::Qsgd => "qsgd",
            Strategy::TopK => "topk",
            Strategy::FedPaq => "fedpaq",
            Strategy::NormAdaptive => "norm_adaptive",
        }
    }

    /// Periodic-averaging strategies train five epochs between uploads.
    pub fn default_local_epochs(self) -> usize {
        match self {
            Strategy::FedAvg | Strategy::FedPaq => 5,
            _ => 1,
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Strategy::ALL.iter().map(|s| s.name()).collect();
                Error::Config(format!("unknown strategy {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Runs `f` for every client id and collects results in id order.
fn map_clients<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ClientData {
    pub id: usize,
    pub train: Dataset,
    /// Held-out local split used for probe losses.
    pub probe: Dataset,
    /// Aggregation weight `p_i`, proportional to the training split size.
    pub weight: f64,
}

/// Splits the training set into client partitions with probe splits.
pub fn build_clients(train: &Dataset, cfg: &ExperimentConfig) -> Result<Vec<ClientData>> {
    let parts = partition_noniid(
        train.labels(),
        train.n_classes(),
        cfg.n_clients,
        cfg.sigma_d,
        &mut stream(cfg.seed, Purpose::Partition, SERVER, 0),
    )?;
    let mut clients = Vec::with_capacity(parts.len());
    for (id, part) in parts.into_iter().enumerate() {
        let n_probe = ((part.indices.len() as f64 * cfg.probe_fraction).round() as usize).max(1);
        if n_probe >= part.indices.len() {
            return Err(Error::InsufficientData(format!(
                "client {id} has {} samples, too few for a probe split",
                part.indices.len()
            )));
        }
        let (probe, rest) = part.indices.split_at(n_probe);
        clients.push(ClientData {
            id,
            train: train.subset(rest),
            probe: train.subset(probe),
            weight: 0.0,
        });
    }
    let total: usize = clients.iter().map(|c| c.train.len()).sum();
    for c in &mut clients {
        c.weight = c.train.len() as f64 / total as f64;
    }
    Ok(clients)
}

/// Levels assigned to every client for one round.
#[derive(Debug, Clone, PartialEq)]
struct Assignment {
    plan: AllocationPlan,
    aux: Option<AllocationPlan>,
    target: Option<f64>,
    decision: Option<Decision>,
}

/// What the clients need from the previous round to probe and update.
#[derive(Debug, Clone)]
struct Previous {
    model: Model,
    aggregate: GradVector,
    lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<RoundRecord>,
    pub telemetry: Vec<RoundTelemetry>,
    /// Controller decision of each round, when one was made.
    pub decisions: Vec<Option<Decision>>,
    pub summary: Summary,
}

pub struct Simulation {
    cfg: ExperimentConfig,
    clients: Vec<ClientData>,
    test: Dataset,
    trace: NetworkTrace,
    lr: LrSchedule,
    epochs: usize,
    /// Server model at the start of the current round.
    model: Model,
    initial_model: Model,
    prev: Option<Previous>,
    assignment: Option<Assignment>,
    controller: ControllerState,
    /// NormAdaptive resolution in bits, before rounding.
    norm_bits: f64,
    norms: Vec<f64>,
    timings: Vec<RoundTiming>,
    history: Vec<RoundTelemetry>,
    decisions: Vec<Option<Decision>>,
    records: Vec<RoundRecord>,
    uploaded_bytes: Vec<u64>,
    last_upload_bits: Vec<u64>,
    status: Option<RunStatus>,
}

impl Simulation {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let trace = NetworkTrace::generate(&cfg.network_params(), cfg.seed)?;
        Self::with_trace(cfg, trace)
    }

    /// Uses a recorded trace instead of drawing a new one.
    pub fn with_trace(cfg: &ExperimentConfig, trace: NetworkTrace) -> Result<Self> {
        cfg.validate()?;
        trace.validate()?;
        if trace.n_clients() != cfg.n_clients {
            return Err(Error::Config(format!(
                "trace has {} clients but the config has {}",
                trace.n_clients(),
                cfg.n_clients
            )));
        }
        if trace.rounds() < cfg.round_cap {
            return Err(Error::Config(format!(
                "trace covers {} rounds but round_cap is {}",
                trace.rounds(),
                cfg.round_cap
            )));
        }
        let (train, test) = cfg.dataset.load(cfg.seed)?;
        let clients = build_clients(&train, cfg)?;
        let model = Model::init(
            cfg.model.clone(),
            train.input_dim(),
            train.n_classes(),
            &mut stream(cfg.seed, Purpose::ModelInit, SERVER, 0),
        )?;
        let n = cfg.n_clients;
        Ok(Simulation {
            lr: cfg.lr_schedule(),
            epochs: cfg.local_epochs(),
            controller: ControllerState::new(cfg.controller_params()),
            norm_bits: cfg.strategy_params.qsgd_bits as f64,
            cfg: cfg.clone(),
            clients,
            test,
            trace,
            initial_model: model.clone(),
            model,
            prev: None,
            assignment: None,
            norms: Vec::new(),
            timings: Vec::new(),
            history: Vec::new(),
            decisions: Vec::new(),
            records: Vec::new(),
            uploaded_bytes: vec![0; n],
            last_upload_bits: vec![0; n],
            status: None,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn clients(&self) -> &[ClientData] {
        &self.clients
    }

    pub fn test_set(&self) -> &Dataset {
        &self.test
    }

    pub fn trace(&self) -> &NetworkTrace {
        &self.trace
    }

    /// Server model at the start of the next round.
    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn initial_model(&self) -> &Model {
        &self.initial_model
    }

    pub fn round(&self) -> usize {
        self.records.len()
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn telemetry(&self) -> &[RoundTelemetry] {
        &self.history
    }

    pub fn status(&self) -> Option<RunStatus> {
        self.status
    }

    fn adaptive(&self) -> bool {
        self.cfg.strategy == Strategy::AdaGq
    }

    fn identity(&self) -> bool {
        self.adaptive() && self.cfg.strategy_params.codec == CodecKind::Identity
    }

    fn target_reached(&self, rec: &RoundRecord) -> bool {
        let loss = self.cfg.target_loss.map(|t| rec.train_loss <= t);
        let acc = self.cfg.target_accuracy.map(|t| rec.test_accuracy >= t);
        match (loss, acc) {
            (None, None) => false,
            (l, a) => l.unwrap_or(true) && a.unwrap_or(true),
        }
    }

    fn probe(&self, i: usize, r: usize, prev: &Previous, assignment: &Assignment) -> Result<ProbeLosses> {
        let probe = &self.clients[i].probe;
        let base = prev.model.evaluate(probe)?.loss;
        let mut rng = stream(self.cfg.seed, Purpose::Probe, i as u64, r as u64);
        let mut loss_at = |levels: u32| -> Result<f64> {
            let q = if self.identity() {
                prev.aggregate.clone()
            } else {
                qsgd_decode(&qsgd_encode(&prev.aggregate, levels, &mut rng)?)?
            };
            Ok(prev.model.sgd_step(&q, prev.lr)?.evaluate(probe)?.loss)
        };
        let current = loss_at(assignment.plan.levels[i])?;
        let aux_levels = assignment.aux.as_ref().map_or(assignment.plan.levels[i], |a| a.levels[i]);
        let auxiliary = loss_at(aux_levels)?;
        Ok(ProbeLosses {
            base,
            current,
            auxiliary,
        })
    }

    fn fixed_plan(&self, bits: u32) -> AllocationPlan {
        uniform_plan(levels_for_bits(bits) as f64, self.cfg.n_clients)
    }

    /// Decides this round's levels from everything measured so far.
    fn assign(&mut self, r: usize, probes: Option<&[ProbeLosses]>) -> Result<Assignment> {
        let n = self.cfg.n_clients;
        match self.cfg.strategy {
            Strategy::AdaGq => {
                if r == 1 {
                    self.controller.observe_norm(self.norms[0]);
                }
                let decision = if r >= 2 {
                    let probes = probes.expect("adaptive rounds probe from round 1");
                    let prev_assignment = self.assignment.as_ref().expect("assignment of previous round");
                    let weighted = |f: fn(&ProbeLosses) -> f64| -> f64 {
                        probes.iter().zip(&self.clients).map(|(p, c)| c.weight * f(p)).sum()
                    };
                    let timing = &self.timings[r - 1];
                    let aux_bits = &prev_assignment.aux.as_ref().expect("adaptive rounds carry aux plans").bits;
                    let inputs = ControllerInputs {
                        loss_prev: weighted(|p| p.base),
                        loss_current: weighted(|p| p.current),
                        loss_auxiliary: weighted(|p| p.auxiliary),
                        round_time: timing.total,
                        round_time_auxiliary: hypothetical_round_time(timing, &prev_assignment.plan.bits, aux_bits)?,
                        grad_norm: self.norms[r - 1],
                    };
                    Some(self.controller.step(&inputs)?)
                } else {
                    None
                };
                let target = self.controller.levels();
                let aux_target = self.controller.aux_levels() as f64;
                let (plan, aux) = if r >= 2 {
                    let stats = (0..n)
                        .map(|i| estimate_time_stats(&self.history, i))
                        .collect::<Result<Vec<_>>>()?;
                    (allocate(target, &stats), allocate(aux_target, &stats))
                } else {
                    (uniform_plan(target, n), uniform_plan(aux_target, n))
                };
                Ok(Assignment {
                    plan,
                    aux: Some(aux),
                    target: Some(target),
                    decision,
                })
            }
            Strategy::NormAdaptive => {
                if r >= 2 {
                    self.norm_bits = norm_only_update(self.norm_bits, self.norms[r - 1], self.norms[r - 2])?;
                }
                let bits = (self.norm_bits.round().clamp(MIN_BITS as f64, MAX_BITS as f64)) as u32;
                Ok(Assignment {
                    plan: self.fixed_plan(bits),
                    aux: None,
                    target: Some(self.norm_bits),
                    decision: None,
                })
            }
            _ => Ok(Assignment {
                plan: self.fixed_plan(self.cfg.strategy_params.qsgd_bits),
                aux: None,
                target: None,
                decision: None,
            }),
        }
    }

    fn encode(&self, i: usize, r: usize, g: GradVector, levels: u32) -> Result<Upload> {
        let mut rng = stream(self.cfg.seed, Purpose::Quantize, i as u64, r as u64);
        match self.cfg.strategy {
            Strategy::FedAvg => Ok(Upload::Dense(g)),
            Strategy::TopK => Upload::topk(&g, self.cfg.strategy_params.topk_fraction),
            Strategy::AdaGq if self.identity() => Ok(Upload::Dense(g)),
            _ => Upload::qsgd(&g, levels, &mut rng),
        }
    }

    fn downlink_bits(&self, i: usize, r: usize) -> u64 {
        let full = dense_size_bits(self.model.param_count());
        match self.cfg.downlink {
            _ if r == 0 => full,
            DownlinkMode::FullPrecision => full,
            DownlinkMode::MirrorUplink => self.last_upload_bits[i],
        }
    }

    /// Runs one round. Returns `None` once the run has finished.
    pub fn step(&mut self) -> Result<Option<RoundRecord>> {
        if self.status.is_some() {
            return Ok(None);
        }
        let r = self.records.len();
        if r >= self.cfg.round_cap {
            self.status = Some(RunStatus::CapReached);
            return Ok(None);
        }
        let n = self.cfg.n_clients;

        let probes = match (&self.prev, &self.assignment) {
            (Some(prev), Some(assignment)) if self.adaptive() => {
                Some(map_clients(n, |i| self.probe(i, r, prev, assignment))?)
            }
            _ => None,
        };
        let assignment = self.assign(r, probes.as_deref())?;

        let lr = self.lr.at_round(r);
        let uploads = map_clients(n, |i| {
            let start = &self.model;
            let mut rng = stream(self.cfg.seed, Purpose::Shuffle, i as u64, r as u64);
            let end = local_sgd(start, &self.clients[i].train, self.epochs, self.cfg.batch_size, lr, &mut rng)?;
            let g = pseudo_gradient(start, &end, lr)?;
            self.encode(i, r, g, assignment.plan.levels[i])
        })?;

        let mut times = Vec::with_capacity(n);
        let mut clients = Vec::with_capacity(n);
        for (i, up) in uploads.iter().enumerate() {
            let rate = self.trace.rate(i, r)?;
            let bits = up.size_bits();
            let t = ClientTimes {
                t_cp: self.trace.compute_seconds(i, r, self.epochs)?,
                t_cm: transmission_time(bits, rate)?,
                t_down: transmission_time(self.downlink_bits(i, r), rate)?,
            };
            times.push(t);
            clients.push(ClientTelemetry {
                client_id: i,
                t_down: t.t_down,
                t_cp: t.t_cp,
                t_cm: t.t_cm,
                uploaded_bits: bits,
                bits: up.bit_width(),
                levels: up.levels(),
                aux_levels: assignment.aux.as_ref().map(|a| a.levels[i]),
                probe: probes.as_ref().map(|p| p[i]),
            });
        }
        let prev_clock = self.timings.last().map_or(0.0, |t| t.cumulative);
        let timing = round_time(times, self.cfg.t_server_s, prev_clock)?;

        let dim = self.model.param_count();
        let decoded = uploads.iter().map(|u| u.decode(dim)).collect::<Result<Vec<_>>>()?;
        let weights: Vec<f64> = self.clients.iter().map(|c| c.weight).collect();
        let g = aggregate(&decoded, &weights)?;
        let norm = g.norm();
        let next = self.model.sgd_step(&g, lr)?;

        let losses = map_clients(n, |i| Ok(next.evaluate(&self.clients[i].train)?.loss))?;
        let train_loss: f64 = losses.iter().zip(&weights).map(|(l, p)| l * p).sum();
        let test = next.evaluate(&self.test)?;

        for (i, c) in clients.iter().enumerate() {
            self.uploaded_bytes[i] += c.uploaded_bits.div_ceil(8);
            self.last_upload_bits[i] = c.uploaded_bits;
        }
        let quantized: Vec<u32> = clients.iter().filter_map(|c| c.levels).collect();
        let record = RoundRecord {
            round: r,
            sim_time_s: timing.cumulative,
            round_time_s: timing.total,
            train_loss,
            test_accuracy: test.accuracy,
            test_loss: test.loss,
            target_levels: assignment.target,
            mean_levels: (!quantized.is_empty())
                .then(|| quantized.iter().map(|&s| s as f64).sum::<f64>() / quantized.len() as f64),
            ctrl_sign: assignment.decision.map(|d| d.sign.as_i8()),
            grad_norm: norm,
            bits: clients.iter().map(|c| c.bits).collect(),
            levels: clients.iter().map(|c| c.levels).collect(),
            t_cp: timing.clients.iter().map(|t| t.t_cp).collect(),
            t_cm: timing.clients.iter().map(|t| t.t_cm).collect(),
            t_down: timing.clients.iter().map(|t| t.t_down).collect(),
            uploaded_bytes_cum: self.uploaded_bytes.clone(),
            uploaded_bytes_total: self.uploaded_bytes.iter().sum(),
        };

        self.prev = Some(Previous {
            model: std::mem::replace(&mut self.model, next),
            aggregate: g,
            lr,
        });
        self.norms.push(norm);
        self.timings.push(timing);
        self.history.push(RoundTelemetry { round: r, clients });
        self.decisions.push(assignment.decision);
        self.assignment = Some(assignment);
        self.records.push(record.clone());

        if self.target_reached(&record) {
            self.status = Some(RunStatus::Reached);
        } else if self.records.len() >= self.cfg.round_cap {
            self.status = Some(RunStatus::CapReached);
        }
        Ok(Some(record))
    }

    pub fn run(mut self) -> Result<RunOutput> {
        while self.step()?.is_some() {}
        let status = self.status.unwrap_or(RunStatus::CapReached);
        Ok(RunOutput {
            summary: Summary::from_records(self.cfg.strategy.name(), status, &self.records),
            records: self.records,
            telemetry: self.history,
            decisions: self.decisions,
        })
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    Simulation::new(cfg)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::qsgd_size_bits;
    use crate::data::DatasetSpec;

    fn small(strategy: Strategy) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(strategy);
        c.n_clients = 4;
        c.round_cap = 6;
        c.target_accuracy = None;
        c.dataset = DatasetSpec::Synthetic {
            n_classes: 4,
            input_dim: 8,
            n_train: 400,
            n_test: 100,
            class_sep: 3.0,
        };
        c.model = crate::ml::ModelKind::Mlp { hidden: vec![8] };
        c
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("nope".parse::<Strategy>().is_err());
    }

    #[test]
    fn client_weights_sum_to_one() {
        let sim = Simulation::new(&small(Strategy::Qsgd)).unwrap();
        let total: f64 = sim.clients().iter().map(|c| c.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(sim.clients().iter().all(|c| c.probe.len() == 10 && c.train.len() == 90));
    }

    #[test]
    fn round_cap_zero_is_empty_and_flagged() {
        let mut c = small(Strategy::Qsgd);
        c.round_cap = 0;
        let out = run_experiment(&c).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.summary.status, RunStatus::CapReached);
    }

    #[test]
    fn baseline_upload_sizes() {
        let sim = Simulation::new(&small(Strategy::Qsgd)).unwrap();
        let p = sim.model().param_count();
        let out = sim.run().unwrap();
        for t in &out.telemetry {
            for c in &t.clients {
                assert_eq!(c.uploaded_bits, qsgd_size_bits(p, 255));
                assert_eq!(c.bits, 8);
            }
        }
        let out = run_experiment(&small(Strategy::FedAvg)).unwrap();
        assert!(out.telemetry.iter().flat_map(|t| &t.clients).all(|c| c.uploaded_bits == p as u64 * 32 + 32));
        let out = run_experiment(&small(Strategy::FedPaq)).unwrap();
        assert!(out.telemetry.iter().flat_map(|t| &t.clients).all(|c| c.uploaded_bits == qsgd_size_bits(p, 255)));
    }

    #[test]
    fn periodic_strategies_train_longer() {
        let a = run_experiment(&small(Strategy::FedAvg)).unwrap();
        let q = run_experiment(&small(Strategy::Qsgd)).unwrap();
        assert!(a.records[0].t_cp[0] > 4.9 * q.records[0].t_cp[0] && a.records[0].t_cp[0] < 5.1 * q.records[0].t_cp[0]);
    }

    #[test]
    fn adaptive_run_accounting_and_bootstrap() {
        let sim = Simulation::new(&small(Strategy::AdaGq)).unwrap();
        let p = sim.model().param_count();
        let out = sim.run().unwrap();
        assert_eq!(out.records.len(), 6);
        assert!(out.records[..2].iter().all(|r| r.bits.iter().all(|&b| b == 8)));
        assert!(out.decisions[..2].iter().all(Option::is_none));
        assert!(out.decisions[2..].iter().all(Option::is_some));
        assert!(out.telemetry[0].clients.iter().all(|c| c.probe.is_none()));
        assert!(out.telemetry[1].clients.iter().all(|c| c.probe.is_some()));
        let bytes: u64 = out
            .telemetry
            .iter()
            .flat_map(|t| &t.clients)
            .map(|c| c.uploaded_bits.div_ceil(8))
            .sum();
        assert_eq!(out.records.last().unwrap().uploaded_bytes_total, bytes);
        for t in &out.telemetry {
            for c in &t.clients {
                assert_eq!(c.uploaded_bits, qsgd_size_bits(p, c.levels.unwrap()));
            }
        }
        let clock: Vec<f64> = out.records.iter().map(|r| r.sim_time_s).collect();
        assert!(clock.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(out.summary.total_time_s, *clock.last().unwrap());
    }

    #[test]
    fn reaching_the_target_stops_early() {
        let mut c = small(Strategy::Qsgd);
        c.target_accuracy = Some(0.0);
        let out = run_experiment(&c).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.summary.status, RunStatus::Reached);
    }

    #[test]
    fn runs_are_deterministic() {
        for s in [Strategy::AdaGq, Strategy::TopK, Strategy::NormAdaptive] {
            let a = run_experiment(&small(s)).unwrap();
            let b = run_experiment(&small(s)).unwrap();
            assert_eq!(a, b, "{s}");
        }
    }

    #[test]
    fn mirror_downlink_matches_previous_upload() {
        let mut c = small(Strategy::Qsgd);
        c.downlink = DownlinkMode::MirrorUplink;
        let sim = Simulation::new(&c).unwrap();
        let rate = sim.trace().rate(0, 1).unwrap();
        let out = sim.run().unwrap();
        let expected = transmission_time(out.telemetry[0].clients[0].uploaded_bits, rate).unwrap();
        assert_eq!(out.telemetry[1].clients[0].t_down, expected);
    }

    #[test]
    fn trace_must_cover_the_run() {
        let c = small(Strategy::Qsgd);
        let mut short = c.clone();
        short.round_cap = 2;
        let trace = NetworkTrace::generate(&short.network_params(), 0).unwrap();
        assert!(Simulation::with_trace(&c, trace).is_err());
    }
}
