//! Energy and timing figures of merit.
//!
//! A synaptic operation is one presynaptic spike delivered over one nonzero
//! coupling; every simulation counts them as it detects spikes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::network::SimResult;
use crate::units::{to_ps, NS, PJ};

/// Energy per synaptic operation quoted for AFM synapses (J).
pub const DEFAULT_ENERGY_PER_OP: f64 = 1e-3 * PJ;

pub const OP_CONVENTION: &str =
    "one synaptic op = one detected presynaptic spike x one nonzero outgoing coupling";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub synaptic_op_count: u64,
    /// J per op.
    pub energy_per_op: f64,
    /// J.
    pub total_energy: f64,
    /// Simulated physical time covered by the counted runs (s).
    pub sim_time: f64,
}

impl EnergyReport {
    pub fn from_counts(ops: u64, sim_time: f64, energy_per_op: f64) -> Self {
        Self {
            synaptic_op_count: ops,
            energy_per_op,
            total_energy: ops as f64 * energy_per_op,
            sim_time,
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "synaptic_op_count = {}\n\
             energy_per_op_pj = {:e}\n\
             total_energy_pj = {:.6}\n\
             sim_time_ns = {:.6}\n\
             convention = \"{OP_CONVENTION}\"\n",
            self.synaptic_op_count,
            self.energy_per_op / PJ,
            self.total_energy / PJ,
            self.sim_time / NS,
        )
    }
}

pub fn energy_report(results: &[SimResult], energy_per_op: f64) -> EnergyReport {
    let ops = results.iter().map(|r| r.synaptic_op_count).sum();
    let time = results.iter().filter_map(|r| r.times.last()).sum();
    EnergyReport::from_counts(ops, time, energy_per_op)
}

/// Timing figures of merit of a training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    /// Input stimulus to output-neuron spike (s), when a readout was run.
    pub inference_latency: Option<f64>,
    pub epochs: usize,
    pub library_size: usize,
    /// Simulated time per presented symbol (s).
    pub horizon: f64,
    /// First epoch with the correct-symbol error inside the bound.
    pub epochs_to_converge: Option<usize>,
}

impl TimingSummary {
    /// epochs × library size × horizon.
    pub fn training_sim_time(&self) -> f64 {
        self.epochs as f64 * self.library_size as f64 * self.horizon
    }

    /// Convergence epochs × library size × per-symbol latency, the
    /// accounting behind a "tens of ns" training estimate.
    pub fn converged_training_time(&self, per_symbol: f64) -> Option<f64> {
        self.epochs_to_converge
            .map(|e| e as f64 * self.library_size as f64 * per_symbol)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match self.inference_latency {
            Some(t) => writeln!(s, "inference_latency_ps = {:.3}", to_ps(t)).unwrap(),
            None => writeln!(s, "inference_latency_ps = nan").unwrap(),
        }
        writeln!(s, "epochs = {}", self.epochs).unwrap();
        writeln!(s, "library_size = {}", self.library_size).unwrap();
        writeln!(s, "horizon_ps = {:.3}", to_ps(self.horizon)).unwrap();
        writeln!(s, "training_sim_time_ns = {:.3}", self.training_sim_time() / NS).unwrap();
        match self.epochs_to_converge {
            Some(e) => writeln!(s, "epochs_to_converge = {e}").unwrap(),
            None => writeln!(s, "epochs_to_converge = none").unwrap(),
        }
        let per_symbol = self.inference_latency.unwrap_or(self.horizon);
        if let Some(t) = self.converged_training_time(per_symbol) {
            writeln!(s, "converged_training_time_ns = {:.3}", t / NS).unwrap();
        }
        writeln!(
            s,
            "convention = \"training time = epochs x library size x time per symbol; \
             converged figure uses epochs_to_converge and the inference latency\""
        )
        .unwrap();
        s
    }
}
