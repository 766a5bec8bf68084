//! Network and time model: the simulator's logical clock.
//!
//! Nothing here measures real time. Upload and download times follow from
//! payload sizes and per-client link rates; compute times follow from a
//! per-client speed drawn once plus small per-round noise. Every draw is
//! made up front into a [`NetworkTrace`], which can be written to JSON and
//! loaded back to replay a run under identical conditions.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose, SERVER};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DownlinkMode {
    /// The server broadcasts the aggregate at full precision.
    #[default]
    FullPrecision,
    /// The broadcast is as large as the client's own previous upload.
    MirrorUplink,
}

/// Draws `n` link rates between `max_rate / sigma_r` and `max_rate`. One
/// client is pinned at each end; the rest are uniform in between. Which
/// client gets which rate is shuffled.
pub fn sample_rates<R: Rng + ?Sized>(n: usize, sigma_r: f64, max_rate_mbps: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(sigma_r >= 1.0) || !sigma_r.is_finite() {
        return Err(Error::InvalidInput(format!(
            "rate heterogeneity must be >= 1, got {sigma_r}"
        )));
    }
    if !(max_rate_mbps > 0.0) || !max_rate_mbps.is_finite() {
        return Err(Error::InvalidInput(format!(
            "maximum rate must be positive, got {max_rate_mbps}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInput("need at least one client".into()));
    }
    let min_rate = max_rate_mbps / sigma_r;
    let mut rates = vec![max_rate_mbps];
    if n >= 2 {
        rates.push(min_rate);
    }
    for _ in 2..n {
        rates.push(if sigma_r == 1.0 {
            max_rate_mbps
        } else {
            rng.random_range(min_rate..=max_rate_mbps)
        });
    }
    rates.shuffle(rng);
    Ok(rates)
}

pub fn transmission_time(bits: u64, rate_mbps: f64) -> Result<f64> {
    if !(rate_mbps > 0.0) || !rate_mbps.is_finite() {
        return Err(Error::InvalidInput(format!("rate must be positive, got {rate_mbps}")));
    }
    Ok(bits as f64 / (rate_mbps * 1e6))
}

/// Seconds for `epochs` local epochs at `base_s_per_epoch`, scaled by a
/// per-round noise factor.
pub fn compute_time(base_s_per_epoch: f64, epochs: usize, noise: f64) -> f64 {
    base_s_per_epoch * epochs as f64 * noise
}

/// Mean-one lognormal noise with shape `sigma`.
pub fn compute_noise(sigma: f64) -> Result<LogNormal<f64>> {
    LogNormal::new(-sigma * sigma / 2.0, sigma)
        .map_err(|e| Error::InvalidInput(format!("compute noise sigma {sigma}: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClientTimes {
    pub t_cp: f64,
    pub t_cm: f64,
    pub t_down: f64,
}

impl ClientTimes {
    pub fn total(&self) -> f64 {
        self.t_cp + self.t_cm + self.t_down
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTiming {
    pub clients: Vec<ClientTimes>,
    pub t_server: f64,
    /// Round duration: the slowest client plus server time.
    pub total: f64,
    /// Clock reading at the end of the round.
    pub cumulative: f64,
}

fn check_times(clients: &[ClientTimes], t_server: f64) -> Result<()> {
    if clients.is_empty() {
        return Err(Error::InvalidInput("round has no clients".into()));
    }
    let ok = |x: f64| x.is_finite() && x >= 0.0;
    if !ok(t_server) || !clients.iter().all(|c| ok(c.t_cp) && ok(c.t_cm) && ok(c.t_down)) {
        return Err(Error::InvalidInput(
            "time components must be finite and non-negative".into(),
        ));
    }
    Ok(())
}

fn slowest(clients: &[ClientTimes]) -> f64 {
    clients.iter().map(ClientTimes::total).fold(0.0, f64::max)
}

pub fn round_time(clients: Vec<ClientTimes>, t_server: f64, prev_cumulative: f64) -> Result<RoundTiming> {
    check_times(&clients, t_server)?;
    let total = slowest(&clients) + t_server;
    Ok(RoundTiming {
        clients,
        t_server,
        total,
        cumulative: prev_cumulative + total,
    })
}

/// Round time had each client uploaded at `aux_bits` instead of `bits`;
/// only the upload term scales, by `aux_bits / bits`.
pub fn hypothetical_round_time(timing: &RoundTiming, bits: &[u32], aux_bits: &[u32]) -> Result<f64> {
    let n = timing.clients.len();
    if bits.len() != n || aux_bits.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: if bits.len() != n { bits.len() } else { aux_bits.len() },
        });
    }
    if bits.iter().chain(aux_bits).any(|&b| b == 0) {
        return Err(Error::InvalidInput("bit widths must be at least 1".into()));
    }
    let scaled: Vec<ClientTimes> = timing
        .clients
        .iter()
        .zip(bits.iter().zip(aux_bits))
        .map(|(c, (&b, &b_aux))| ClientTimes {
            t_cm: c.t_cm * b_aux as f64 / b as f64,
            ..*c
        })
        .collect();
    Ok(slowest(&scaled) + timing.t_server)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkProfile {
    pub client_id: usize,
    pub base_rate_mbps: f64,
    /// Rate in effect during each round.
    pub rates_mbps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeProfile {
    pub client_id: usize,
    pub base_s_per_epoch: f64,
    /// Multiplicative noise for each round.
    pub noise: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub n_clients: usize,
    pub rounds: usize,
    pub max_rate_mbps: f64,
    pub sigma_r: f64,
    /// Half-width of the uniform per-round rate jitter; 0 disables it.
    pub rate_jitter: f64,
    pub compute_range_s: [f64; 2],
    pub compute_noise_sigma: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            n_clients: 20,
            rounds: 200,
            max_rate_mbps: 20.0,
            sigma_r: 4.0,
            rate_jitter: 0.0,
            compute_range_s: [0.5, 1.5],
            compute_noise_sigma: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTrace {
    pub schema_version: u32,
    pub links: Vec<LinkProfile>,
    pub compute: Vec<ComputeProfile>,
}

impl NetworkTrace {
    pub fn generate(params: &NetworkParams, seed: u64) -> Result<Self> {
        let [lo, hi] = params.compute_range_s;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "compute range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
            )));
        }
        if !(0.0..1.0).contains(&params.rate_jitter) {
            return Err(Error::InvalidInput(format!(
                "rate jitter must be in [0, 1), got {}",
                params.rate_jitter
            )));
        }
        let noise = compute_noise(params.compute_noise_sigma)?;
        let base_rates = sample_rates(
            params.n_clients,
            params.sigma_r,
            params.max_rate_mbps,
            &mut stream(seed, Purpose::Rates, SERVER, 0),
        )?;

        let mut links = Vec::with_capacity(params.n_clients);
        let mut compute = Vec::with_capacity(params.n_clients);
        for (id, &base) in base_rates.iter().enumerate() {
            let mut rng = stream(seed, Purpose::Rates, id as u64, 0);
            let rates_mbps = (0..params.rounds)
                .map(|_| {
                    if params.rate_jitter > 0.0 {
                        base * rng.random_range(1.0 - params.rate_jitter..=1.0 + params.rate_jitter)
                    } else {
                        base
                    }
                })
                .collect();
            links.push(LinkProfile {
                client_id: id,
                base_rate_mbps: base,
                rates_mbps,
            });

            let mut rng = stream(seed, Purpose::Compute, id as u64, 0);
            let base_s_per_epoch = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            let noise = (0..params.rounds)
                .map(|_| {
                    if params.compute_noise_sigma > 0.0 {
                        noise.sample(&mut rng)
                    } else {
                        1.0
                    }
                })
                .collect();
            compute.push(ComputeProfile {
                client_id: id,
                base_s_per_epoch,
                noise,
            });
        }
        Ok(NetworkTrace {
            schema_version: TRACE_SCHEMA_VERSION,
            links,
            compute,
        })
    }

    pub fn n_clients(&self) -> usize {
        self.links.len()
    }

    /// Number of rounds the trace covers.
    pub fn rounds(&self) -> usize {
        self.links.iter().map(|l| l.rates_mbps.len()).min().unwrap_or(0)
    }

    pub fn rate(&self, client: usize, round: usize) -> Result<f64> {
        self.links
            .get(client)
            .and_then(|l| l.rates_mbps.get(round))
            .copied()
            .ok_or_else(|| self.out_of_range(client, round))
    }

    pub fn compute_seconds(&self, client: usize, round: usize, epochs: usize) -> Result<f64> {
        let profile = self.compute.get(client).ok_or_else(|| self.out_of_range(client, round))?;
        let noise = profile.noise.get(round).ok_or_else(|| self.out_of_range(client, round))?;
        Ok(compute_time(profile.base_s_per_epoch, epochs, *noise))
    }

    fn out_of_range(&self, client: usize, round: usize) -> Error {
        Error::InvalidInput(format!(
            "trace covers {} clients x {} rounds; requested client {client}, round {round}",
            self.n_clients(),
            self.rounds()
        ))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != TRACE_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported trace schema version {}",
                self.schema_version
            )));
        }
        if self.links.len() != self.compute.len() {
            return Err(Error::Format(format!(
                "trace has {} link profiles but {} compute profiles",
                self.links.len(),
                self.compute.len()
            )));
        }
        for (i, (l, c)) in self.links.iter().zip(&self.compute).enumerate() {
            if l.client_id != i || c.client_id != i {
                return Err(Error::Format(format!("trace profiles out of order at index {i}")));
            }
            if !l.rates_mbps.iter().all(|r| r.is_finite() && *r > 0.0) {
                return Err(Error::Format(format!("client {i} has a non-positive rate")));
            }
            if !(c.base_s_per_epoch.is_finite() && c.base_s_per_epoch >= 0.0)
                || !c.noise.iter().all(|x| x.is_finite() && *x >= 0.0)
            {
                return Err(Error::Format(format!("client {i} has invalid compute times")));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let trace: NetworkTrace = serde_json::from_str(&text)?;
        trace.validate()?;
        Ok(trace)
    }
}
