//! Per-round measurements reported by clients to the server.

use serde::{Deserialize, Serialize};

/// Probe losses measured on a client's local test split at the start of a
/// round, before it applies the broadcast aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeLosses {
    /// Loss of the replica as received (the real loss at the end of the
    /// previous round).
    pub base: f64,
    /// Loss after applying the aggregate re-quantized at the client's current levels.
    pub current: f64,
    /// Loss after applying the aggregate re-quantized at its auxiliary levels.
    pub auxiliary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientTelemetry {
    pub client_id: usize,
    pub t_down: f64,
    pub t_cp: f64,
    pub t_cm: f64,
    pub uploaded_bits: u64,
    /// Accounting bit width of the upload (`⌊log2 s⌋ + 1` for QSGD, 32 for
    /// full precision).
    pub bits: u32,
    /// Quantization levels of the upload, when quantized.
    pub levels: Option<u32>,
    /// Auxiliary levels assigned for the next probe, when the strategy probes.
    pub aux_levels: Option<u32>,
    pub probe: Option<ProbeLosses>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTelemetry {
    pub round: usize,
    pub clients: Vec<ClientTelemetry>,
}

impl RoundTelemetry {
    pub fn client(&self, client_id: usize) -> Option<&ClientTelemetry> {
        self.clients.iter().find(|c| c.client_id == client_id)
    }
}
