//! SPAN training of the input → output couplings.
//!
//! Every black pixel fires its input neuron at t ≈ 0; the single output
//! ("SPAN") neuron integrates the weighted input spikes and fires after a
//! latency set by the summed weight. Training moves that spike to the target
//! time of each library symbol using the kernel rule
//!
//! ```text
//! Δκ = λ (e/2)² [ (t_d − t_i + τ) e^{−(t_d − t_i)/τ} − (t_a − t_i + τ) e^{−(t_a − t_i)/τ} ]
//! ```
//!
//! with times measured in units of τ. Updates are averaged over the library,
//! applied once per epoch and projected onto non-negative weights.

use std::fmt::Write as _;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::Calibration;
use crate::error::{Error, Result};
use crate::network::{simulate, CouplingMatrix, DriveWaveform, SimConfig, SimResult, KAPPA_0};
use crate::patterns::{SymbolGrid, TrainingLibrary, GRID_CELLS};
use crate::units::PS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    /// λ.
    pub learning_rate: f64,
    /// τ (s).
    pub tau: f64,
    pub epochs: usize,
    /// Full width of the recognition window (s).
    pub window: f64,
    /// Physical coupling added per unit of averaged Δκ.
    pub update_scale: f64,
    /// Initial weights are drawn uniformly from `[0, init_max]`.
    pub init_max: f64,
    /// Simulated time per symbol (s); also stands in for a missing output spike.
    pub horizon: f64,
    /// Fixed input spike time (s) overriding the detected per-input times.
    pub t_input: Option<f64>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            tau: 100.0 * PS,
            epochs: 60,
            window: 10.0 * PS,
            update_scale: 0.04,
            init_max: KAPPA_0,
            horizon: 300.0 * PS,
            t_input: None,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("learning_rate", self.learning_rate),
            ("tau", self.tau),
            ("window", self.window),
            ("update_scale", self.update_scale),
            ("horizon", self.horizon),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.init_max.is_finite() && self.init_max >= 0.0) {
            return Err(Error::InvalidParameter("init_max must be >= 0".into()));
        }
        Ok(())
    }
}

/// Kernel rule for one input: positive when the output fired late
/// (`t_a > t_d`), negative when it fired early.
pub fn delta_weight(t_i: f64, t_d: f64, t_a: f64, cfg: &TrainerConfig) -> f64 {
    let kernel = |t: f64| {
        let u = (t - t_i) / cfg.tau;
        (u + 1.0) * (-u).exp()
    };
    let e_half = std::f64::consts::E / 2.0;
    cfg.learning_rate * e_half * e_half * (kernel(t_d) - kernel(t_a))
}

/// Input layer plus one trainable output neuron, all with the calibrated physics.
#[derive(Debug, Clone)]
pub struct SpanNetwork {
    pub calibration: Calibration,
    pub sim: SimConfig,
    pub input_count: usize,
}

/// Spike times seen when presenting one symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolResponse {
    pub label: String,
    /// First spike of each input neuron, `None` for silent inputs.
    pub input_times: Vec<Option<f64>>,
    /// First spike of the output neuron.
    pub output_time: Option<f64>,
    pub synaptic_ops: u64,
}

impl SpanNetwork {
    pub fn new(calibration: Calibration, base: &SimConfig, horizon: f64) -> Self {
        Self {
            calibration,
            sim: calibration.sim_config(base).with_t_end(horizon),
            input_count: GRID_CELLS,
        }
    }

    pub fn output_index(&self) -> usize {
        self.input_count
    }

    /// Drives for the input layer: one stimulus at t = 0 per black pixel.
    pub fn input_drives(&self, symbol: &SymbolGrid) -> Vec<DriveWaveform> {
        (0..self.input_count)
            .map(|k| {
                if symbol.is_black(k) {
                    self.calibration.stimulus.at(0.0)
                } else {
                    DriveWaveform::silent()
                }
            })
            .collect()
    }

    pub fn coupling(&self, weights: &[f64]) -> Result<CouplingMatrix> {
        if weights.len() != self.input_count {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} inputs",
                weights.len(),
                self.input_count
            )));
        }
        let n = self.input_count + 1;
        let out = self.output_index();
        let mut c = CouplingMatrix::zeros(n);
        for (k, &w) in weights.iter().enumerate() {
            c.set(out, k, w)?;
            c.set_trainable(out, k, true);
        }
        Ok(c)
    }

    pub fn simulate(&self, weights: &[f64], symbol: &SymbolGrid) -> Result<SimResult> {
        let c = self.coupling(weights)?;
        let mut drives = self.input_drives(symbol);
        drives.push(DriveWaveform::silent());
        let params = vec![self.calibration.params; self.input_count + 1];
        simulate(&params, &c, &drives, &self.sim)
    }

    pub fn respond(&self, weights: &[f64], symbol: &SymbolGrid) -> Result<SymbolResponse> {
        let r = self.simulate(weights, symbol)?;
        Ok(SymbolResponse {
            label: symbol.label.clone(),
            input_times: (0..self.input_count).map(|k| r.first_spike(k)).collect(),
            output_time: r.first_spike(self.output_index()),
            synaptic_ops: r.synaptic_op_count,
        })
    }
}

/// Averaged, clamped update from already simulated responses.
///
/// `responses[j]` must belong to the symbol whose target is `targets[j]`.
pub fn apply_epoch_update(
    weights: &[f64],
    responses: &[SymbolResponse],
    targets: &[f64],
    cfg: &TrainerConfig,
) -> Vec<f64> {
    let mut sum = vec![0.0; weights.len()];
    for (resp, &t_d) in responses.iter().zip(targets) {
        let t_a = resp.output_time.unwrap_or(cfg.horizon);
        for (k, t_i) in resp.input_times.iter().enumerate() {
            if let Some(t_i) = cfg.t_input.or(*t_i) {
                sum[k] += delta_weight(t_i, t_d, t_a, cfg);
            }
        }
    }
    let count = responses.len().max(1) as f64;
    weights
        .iter()
        .zip(&sum)
        .map(|(w, s)| (w + cfg.update_scale * s / count).max(0.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochResult {
    pub weights: Vec<f64>,
    /// `t_a − t_d` of the correct symbol (s), measured before the update.
    pub error: f64,
    pub responses: Vec<SymbolResponse>,
    pub synaptic_ops: u64,
}

/// Present every library symbol once, then apply the averaged update.
pub fn train_epoch(
    net: &SpanNetwork,
    library: &TrainingLibrary,
    weights: &[f64],
    cfg: &TrainerConfig,
) -> Result<EpochResult> {
    if weights.len() != net.input_count {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} inputs",
            weights.len(),
            net.input_count
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::InvalidParameter(format!("negative weight {w}")));
    }
    let entries = library.entries();
    let responses = entries
        .par_iter()
        .map(|e| net.respond(weights, &e.grid))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = entries.iter().map(|e| e.target).collect();
    let new_weights = apply_epoch_update(weights, &responses, &targets, cfg);
    let error = responses[0].output_time.unwrap_or(cfg.horizon) - library.base_time;
    let synaptic_ops = responses.iter().map(|r| r.synaptic_ops).sum();
    Ok(EpochResult {
        weights: new_weights,
        error,
        responses,
        synaptic_ops,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochEntry {
    pub epoch: usize,
    /// `t_a − t_d` of the correct symbol before this epoch's update (s).
    pub error: f64,
    /// Weights after this epoch's update.
    pub weights: Vec<f64>,
    pub synaptic_ops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub initial_weights: Vec<f64>,
    pub epochs: Vec<EpochEntry>,
}

impl TrainingRecord {
    pub fn errors_ps(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.error / PS).collect()
    }

    /// First epoch (1-based) whose error magnitude is below `bound`.
    pub fn first_epoch_within(&self, bound: f64) -> Option<usize> {
        self.epochs.iter().find(|e| e.error.abs() < bound).map(|e| e.epoch)
    }

    pub fn min_weight(&self) -> f64 {
        self.epochs
            .iter()
            .flat_map(|e| e.weights.iter())
            .chain(self.initial_weights.iter())
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn total_synaptic_ops(&self) -> u64 {
        self.epochs.iter().map(|e| e.synaptic_ops).sum()
    }

    /// `epoch error_ps w_1 .. w_n`; epoch 0 holds the initial weights.
    pub fn to_columnar(&self) -> String {
        let n = self.initial_weights.len();
        let mut out = String::from("epoch error_ps");
        for k in 1..=n {
            write!(out, " w_{k}").unwrap();
        }
        out.push('\n');
        write!(out, "0 nan").unwrap();
        for w in &self.initial_weights {
            write!(out, " {w:.9e}").unwrap();
        }
        out.push('\n');
        for e in &self.epochs {
            write!(out, "{} {:.4}", e.epoch, e.error / PS).unwrap();
            for w in &e.weights {
                write!(out, " {w:.9e}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub fn initial_weights(n: usize, max: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>() * max).collect()
}

/// Train from seeded random weights for `cfg.epochs` epochs.
pub fn train(
    net: &SpanNetwork,
    library: &TrainingLibrary,
    cfg: &TrainerConfig,
    seed: u64,
) -> Result<(Vec<f64>, TrainingRecord)> {
    cfg.validate()?;
    let initial = initial_weights(net.input_count, cfg.init_max, seed);
    let mut weights = initial.clone();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let r = train_epoch(net, library, &weights, cfg)?;
        weights = r.weights;
        epochs.push(EpochEntry {
            epoch,
            error: r.error,
            weights: weights.clone(),
            synaptic_ops: r.synaptic_ops,
        });
    }
    Ok((
        weights,
        TrainingRecord {
            initial_weights: initial,
            epochs,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    InWindow(f64),
    OutOfWindow(f64),
    NoSpike,
}

impl Verdict {
    pub fn is_recognised(&self) -> bool {
        matches!(self, Verdict::InWindow(_))
    }

    pub fn spike_time(&self) -> Option<f64> {
        match *self {
            Verdict::InWindow(t) | Verdict::OutOfWindow(t) => Some(t),
            Verdict::NoSpike => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Verdict::InWindow(_) => "in-window",
            Verdict::OutOfWindow(_) => "out-of-window",
            Verdict::NoSpike => "no-spike",
        }
    }
}

/// Classify a first output spike against `t_target ± window/2`.
pub fn verdict_for(output_time: Option<f64>, t_target: f64, window: f64) -> Verdict {
    match output_time {
        None => Verdict::NoSpike,
        Some(t) if (t - t_target).abs() <= 0.5 * window => Verdict::InWindow(t),
        Some(t) => Verdict::OutOfWindow(t),
    }
}

pub fn evaluate(
    net: &SpanNetwork,
    weights: &[f64],
    symbol: &SymbolGrid,
    t_target: f64,
    window: f64,
) -> Result<Verdict> {
    let r = net.respond(weights, symbol)?;
    Ok(verdict_for(r.output_time, t_target, window))
}

/// Trained weights with the seed and trainer settings that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedSpan {
    pub label: String,
    pub seed: u64,
    pub trainer: TrainerConfig,
    pub weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WeightsFile {
    label: String,
    seed: u64,
    learning_rate: f64,
    tau_ps: f64,
    epochs: usize,
    window_ps: f64,
    update_scale: f64,
    init_max: f64,
    horizon_ps: f64,
    t_input_ps: Option<f64>,
    weights: Vec<f64>,
}

impl TrainedSpan {
    pub fn to_text(&self) -> String {
        let t = &self.trainer;
        toml::to_string(&WeightsFile {
            label: self.label.clone(),
            seed: self.seed,
            learning_rate: t.learning_rate,
            tau_ps: t.tau / PS,
            epochs: t.epochs,
            window_ps: t.window / PS,
            update_scale: t.update_scale,
            init_max: t.init_max,
            horizon_ps: t.horizon / PS,
            t_input_ps: t.t_input.map(|t| t / PS),
            weights: self.weights.clone(),
        })
        .expect("weights serialise")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let f: WeightsFile =
            toml::from_str(text).map_err(|e| Error::parse("weights file", e.to_string()))?;
        Ok(Self {
            label: f.label,
            seed: f.seed,
            trainer: TrainerConfig {
                learning_rate: f.learning_rate,
                tau: f.tau_ps * PS,
                epochs: f.epochs,
                window: f.window_ps * PS,
                update_scale: f.update_scale,
                init_max: f.init_max,
                horizon: f.horizon_ps * PS,
                t_input: f.t_input_ps.map(|t| t * PS),
            },
            weights: f.weights,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> TrainerConfig {
        TrainerConfig::default()
    }

    #[test]
    fn equal_times_give_zero_change() {
        for t in [50.0, 100.0, 137.5] {
            assert_eq!(delta_weight(3.0 * PS, t * PS, t * PS, &cfg()), 0.0);
        }
    }

    #[test]
    fn late_spike_increases_weight() {
        // λ (e/2)² [2 e^-1 − 2.2 e^-1.2]
        let e = std::f64::consts::E;
        let expected = 0.05 * (e / 2.0).powi(2) * (2.0 * (-1.0f64).exp() - 2.2 * (-1.2f64).exp());
        let got = delta_weight(0.0, 100.0 * PS, 120.0 * PS, &cfg());
        assert!(got > 0.0);
        assert!((got - expected).abs() < 1e-15, "{got} vs {expected}");
    }

    #[test]
    fn early_spike_decreases_weight() {
        let e = std::f64::consts::E;
        let expected = 0.05 * (e / 2.0).powi(2) * (2.0 * (-1.0f64).exp() - 1.8 * (-0.8f64).exp());
        let got = delta_weight(0.0, 100.0 * PS, 80.0 * PS, &cfg());
        assert!(got < 0.0);
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn converged_responses_leave_weights_unchanged() {
        let w = vec![0.001, 0.0, 0.02];
        let resp = vec![
            SymbolResponse {
                label: "a".into(),
                input_times: vec![Some(10.0 * PS), None, Some(12.0 * PS)],
                output_time: Some(100.0 * PS),
                synaptic_ops: 0,
            },
            SymbolResponse {
                label: "b".into(),
                input_times: vec![Some(10.0 * PS), Some(11.0 * PS), None],
                output_time: Some(90.0 * PS),
                synaptic_ops: 0,
            },
        ];
        let out = apply_epoch_update(&w, &resp, &[100.0 * PS, 90.0 * PS], &cfg());
        assert_eq!(out, w);
    }

    #[test]
    fn zero_weight_with_negative_update_stays_zero() {
        let resp = vec![SymbolResponse {
            label: "early".into(),
            input_times: vec![Some(10.0 * PS)],
            output_time: Some(40.0 * PS),
            synaptic_ops: 0,
        }];
        let out = apply_epoch_update(&[0.0], &resp, &[100.0 * PS], &cfg());
        assert_eq!(out, vec![0.0]);
    }

    #[test]
    fn missing_output_spike_counts_as_horizon() {
        let c = cfg();
        let resp = vec![SymbolResponse {
            label: "silent".into(),
            input_times: vec![Some(10.0 * PS)],
            output_time: None,
            synaptic_ops: 0,
        }];
        let out = apply_epoch_update(&[0.0], &resp, &[100.0 * PS], &c);
        let expect = c.update_scale * delta_weight(10.0 * PS, 100.0 * PS, c.horizon, &c);
        assert!(expect > 0.0);
        assert!((out[0] - expect).abs() < 1e-18);
    }

    #[test]
    fn verdict_window_is_inclusive_half_width() {
        let w = 10.0 * PS;
        assert!(verdict_for(Some(105.0 * PS), 100.0 * PS, w).is_recognised());
        assert!(!verdict_for(Some(105.5 * PS), 100.0 * PS, w).is_recognised());
        assert_eq!(verdict_for(None, 100.0 * PS, w), Verdict::NoSpike);
    }

    #[test]
    fn initial_weights_are_seeded_and_bounded() {
        let a = initial_weights(25, KAPPA_0, 9);
        assert_eq!(a, initial_weights(25, KAPPA_0, 9));
        assert_ne!(a, initial_weights(25, KAPPA_0, 10));
        assert!(a.iter().all(|&w| (0.0..=KAPPA_0).contains(&w)));
    }
}
