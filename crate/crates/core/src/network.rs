//! Networks of coupled AFM neurons integrated on a shared clock.
//!
//! Neuron `i` receives `Σ_k κ_ik φ̇_k` on the right-hand side of its equation
//! of motion. All neurons are advanced together by one RK4 step, so every
//! stage sees the stage values of every other neuron.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{rk4_step, Rk4Workspace};
use crate::neuron::{acceleration, equilibrium_angle, NeuronParams, NeuronState};
use crate::spikes::{detect_spikes, SampledTrace, SpikeEvent};
use crate::units::PS;

/// Reference coupling coefficient of a two-neuron chain.
pub const KAPPA_0: f64 = 0.011;

/// Dense `n × n` coupling coefficients; entry `(i, k)` weights neuron `k`'s
/// output into neuron `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    n: usize,
    kappa: Vec<f64>,
    trainable: Vec<bool>,
}

impl CouplingMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            kappa: vec![0.0; n * n],
            trainable: vec![false; n * n],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.kappa[i * self.n + k]
    }

    pub fn is_trainable(&self, i: usize, k: usize) -> bool {
        self.trainable[i * self.n + k]
    }

    /// Set `κ_ik`. Self-coupling and negative or non-finite values are rejected.
    pub fn set(&mut self, i: usize, k: usize, value: f64) -> Result<()> {
        if i >= self.n || k >= self.n {
            return Err(Error::DimensionMismatch(format!(
                "index ({i}, {k}) outside {n}x{n} matrix",
                n = self.n
            )));
        }
        if i == k && value != 0.0 {
            return Err(Error::InvalidParameter(format!("self-coupling on neuron {i}")));
        }
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "coupling ({i}, {k}) must be finite and >= 0, got {value}"
            )));
        }
        self.kappa[i * self.n + k] = value;
        Ok(())
    }

    pub fn set_trainable(&mut self, i: usize, k: usize, flag: bool) {
        self.trainable[i * self.n + k] = flag;
    }

    /// Number of synapses leaving neuron `k` with a nonzero weight.
    pub fn outgoing_count(&self, k: usize) -> usize {
        (0..self.n).filter(|&i| self.get(i, k) != 0.0).count()
    }

    /// Relabel neurons so that old neuron `perm[j]` becomes neuron `j`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for k in 0..self.n {
                let src = perm[i] * self.n + perm[k];
                out.kappa[i * self.n + k] = self.kappa[src];
                out.trainable[i * self.n + k] = self.trainable[src];
            }
        }
        Ok(out)
    }

    fn incoming(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .filter_map(|k| {
                        let w = self.get(i, k);
                        (w != 0.0).then_some((k, w))
                    })
                    .collect()
            })
            .collect()
    }
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "permutation of length {} for {n} neurons",
            perm.len()
        )));
    }
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidParameter("not a permutation".into()));
        }
    }
    Ok(())
}

/// Rectangular current pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub t_start: f64,
    pub duration: f64,
    pub amplitude: f64,
}

impl Pulse {
    fn active(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_start + self.duration
    }
}

/// Extra drive current of one neuron on top of its bias.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DriveWaveform {
    pub pulses: Vec<Pulse>,
    pub baseline: f64,
}

impl DriveWaveform {
    pub fn silent() -> Self {
        Self::default()
    }

    pub fn single(pulse: Pulse) -> Self {
        Self {
            pulses: vec![pulse],
            baseline: 0.0,
        }
    }

    pub fn current_at(&self, t: f64) -> f64 {
        self.baseline
            + self
                .pulses
                .iter()
                .filter(|p| p.active(t))
                .map(|p| p.amplitude)
                .sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.baseline.is_finite() {
            return Err(Error::InvalidParameter("baseline must be finite".into()));
        }
        let mut sorted: Vec<&Pulse> = self.pulses.iter().collect();
        sorted.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
        for p in &sorted {
            if !(p.duration > 0.0 && p.duration.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "pulse duration must be > 0, got {}",
                    p.duration
                )));
            }
            if !(p.amplitude.is_finite() && p.t_start.is_finite()) {
                return Err(Error::InvalidParameter("pulse fields must be finite".into()));
            }
        }
        for w in sorted.windows(2) {
            if w[0].t_start + w[0].duration > w[1].t_start {
                return Err(Error::InvalidParameter("overlapping pulses".into()));
            }
        }
        Ok(())
    }
}

/// Integration and capture settings shared by every neuron of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Integration step (s).
    pub dt: f64,
    /// Simulated horizon (s).
    pub t_end: f64,
    /// Trace sampling interval (s); rounded to a whole number of steps.
    pub sample_interval: f64,
    /// Spike detection threshold on the output voltage (V).
    pub threshold_v: f64,
    /// Uniform synaptic delay (s); zero couples instantaneously.
    pub synaptic_delay: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01 * PS,
            t_end: 300.0 * PS,
            sample_interval: 0.1 * PS,
            threshold_v: 5.0e-6,
            synaptic_delay: 0.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter("t_end must be > 0".into()));
        }
        if !(self.sample_interval >= self.dt) {
            return Err(Error::InvalidParameter(
                "sample interval must be at least one step".into(),
            ));
        }
        if !(self.threshold_v > 0.0) {
            return Err(Error::InvalidParameter("threshold must be > 0".into()));
        }
        if !(self.synaptic_delay >= 0.0 && self.synaptic_delay.is_finite()) {
            return Err(Error::InvalidParameter("synaptic delay must be >= 0".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn stride(&self) -> usize {
        ((self.sample_interval / self.dt).round() as usize).max(1)
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Sample times (s); `times[0] == 0`.
    pub times: Vec<f64>,
    pub phi_traces: Vec<Vec<f64>>,
    pub phi_dot_traces: Vec<Vec<f64>>,
    pub voltage_traces: Vec<Vec<f64>>,
    pub spikes: Vec<Vec<SpikeEvent>>,
    pub synaptic_op_count: u64,
}

impl SimResult {
    pub fn first_spike(&self, neuron: usize) -> Option<f64> {
        self.spikes[neuron].first().map(|e| e.t_spike)
    }

    pub fn spike_count(&self, neuron: usize) -> usize {
        self.spikes[neuron].len()
    }

    pub fn total_spikes(&self) -> usize {
        self.spikes.iter().map(Vec::len).sum()
    }

    /// Columnar text: header naming columns with units, then one row per sample.
    pub fn to_columnar(&self, labels: Option<&[String]>) -> String {
        let n = self.voltage_traces.len();
        let mut out = String::from("time_ps");
        for i in 0..n {
            match labels.and_then(|l| l.get(i)) {
                Some(name) => write!(out, " V_{name}_V").unwrap(),
                None => write!(out, " V_{}_V", i + 1).unwrap(),
            }
        }
        out.push('\n');
        for (j, t) in self.times.iter().enumerate() {
            write!(out, "{:.3}", t / PS).unwrap();
            for trace in &self.voltage_traces {
                write!(out, " {:.6e}", trace[j]).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Like [`to_columnar`](Self::to_columnar) but only for the selected
    /// `(neuron, label)` pairs.
    pub fn columns(&self, selection: &[(usize, String)]) -> String {
        let mut out = String::from("time_ps");
        for (_, name) in selection {
            write!(out, " V_{name}_V").unwrap();
        }
        out.push('\n');
        for (j, t) in self.times.iter().enumerate() {
            write!(out, "{:.3}", t / PS).unwrap();
            for (i, _) in selection {
                write!(out, " {:.6e}", self.voltage_traces[*i][j]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Integrate the coupled system from each neuron's resting state.
pub fn simulate(
    params: &[NeuronParams],
    coupling: &CouplingMatrix,
    drives: &[DriveWaveform],
    cfg: &SimConfig,
) -> Result<SimResult> {
    let n = params.len();
    if coupling.len() != n || drives.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} neurons, {}x{0} coupling, {} drives",
            coupling.len(),
            drives.len()
        )));
    }
    cfg.validate()?;
    for p in params {
        p.validate()?;
    }
    for d in drives {
        d.validate()?;
    }

    let incoming = coupling.incoming();
    let steps = cfg.steps();
    let stride = cfg.stride();
    let delay_steps = (cfg.synaptic_delay / cfg.dt).round() as usize;

    let mut y = vec![0.0; 2 * n];
    for i in 0..n {
        // A supercritical constant drive has no equilibrium; start from the
        // last one that exists (φ = ±π/4).
        let sigma_i = params[i].sigma * (params[i].i_bias + drives[i].baseline);
        let s = NeuronState {
            phi: equilibrium_angle(
                sigma_i.clamp(-0.5 * params[i].omega_e, 0.5 * params[i].omega_e),
                params[i].omega_e,
            ),
            phi_dot: 0.0,
        };
        y[2 * i] = s.phi;
        y[2 * i + 1] = s.phi_dot;
    }

    let samples = steps / stride + 1;
    let mut times = Vec::with_capacity(samples);
    let mut phi_traces = vec![Vec::with_capacity(samples); n];
    let mut phi_dot_traces = vec![Vec::with_capacity(samples); n];
    let record = |y: &[f64], t: f64, times: &mut Vec<f64>, ph: &mut [Vec<f64>], pd: &mut [Vec<f64>]| {
        times.push(t);
        for i in 0..n {
            ph[i].push(y[2 * i]);
            pd[i].push(y[2 * i + 1]);
        }
    };
    record(&y, 0.0, &mut times, &mut phi_traces, &mut phi_dot_traces);

    // φ̇ at every step boundary, kept only when a delay is in effect.
    let mut history: Vec<Vec<f64>> = Vec::new();
    if delay_steps > 0 {
        history.push((0..n).map(|i| y[2 * i + 1]).collect());
    }

    let mut ws = Rk4Workspace::new(2 * n);
    let mut t = 0.0;
    for s in 0..steps {
        let hist = &history;
        let step_start = t;
        rk4_step(&mut y, t, cfg.dt, &mut ws, |tt, ys, dy| {
            for i in 0..n {
                let state = NeuronState {
                    phi: ys[2 * i],
                    phi_dot: ys[2 * i + 1],
                };
                let c: f64 = if delay_steps == 0 {
                    incoming[i].iter().map(|&(k, w)| w * ys[2 * k + 1]).sum()
                } else {
                    let frac = (tt - step_start) / cfg.dt;
                    incoming[i]
                        .iter()
                        .map(|&(k, w)| w * delayed(hist, s, delay_steps, frac, k))
                        .sum()
                };
                dy[2 * i] = state.phi_dot;
                dy[2 * i + 1] = acceleration(state, &params[i], drives[i].current_at(tt), c);
            }
        });
        // Recompute the time from the step index so the clock does not drift.
        t = (s + 1) as f64 * cfg.dt;
        if let Some(i) = (0..n).find(|&i| !(y[2 * i].is_finite() && y[2 * i + 1].is_finite())) {
            return Err(Error::NonFinite {
                neuron: i,
                time_ps: t / PS,
            });
        }
        if delay_steps > 0 {
            history.push((0..n).map(|i| y[2 * i + 1]).collect());
        }
        if (s + 1) % stride == 0 {
            record(&y, t, &mut times, &mut phi_traces, &mut phi_dot_traces);
        }
    }

    let interval = stride as f64 * cfg.dt;
    let voltage_traces: Vec<Vec<f64>> = phi_dot_traces
        .iter()
        .zip(params)
        .map(|(tr, p)| tr.iter().map(|v| p.beta * v).collect())
        .collect();
    let spikes = voltage_traces
        .iter()
        .enumerate()
        .map(|(i, v)| detect_spikes(SampledTrace::new(0.0, interval, v), cfg.threshold_v, i))
        .collect::<Result<Vec<_>>>()?;
    let synaptic_op_count = spikes
        .iter()
        .enumerate()
        .map(|(k, ev)| (ev.len() * coupling.outgoing_count(k)) as u64)
        .sum();

    Ok(SimResult {
        times,
        phi_traces,
        phi_dot_traces,
        voltage_traces,
        spikes,
        synaptic_op_count,
    })
}

/// φ̇ of neuron `k` at `delay` steps before step `s + frac`, linearly
/// interpolated between stored step boundaries.
fn delayed(history: &[Vec<f64>], s: usize, delay: usize, frac: f64, k: usize) -> f64 {
    if s < delay {
        return history[0][k];
    }
    let a = history[s - delay][k];
    let b = history[s - delay + 1][k];
    a + frac * (b - a)
}

/// Stimulus applied to an input neuron to make it fire once: a rectangular
/// pulse starting at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulusPulse {
    /// Extra current during the pulse (A).
    pub amplitude: f64,
    /// Pulse length (s).
    pub duration: f64,
}

impl StimulusPulse {
    pub fn at(&self, t_start: f64) -> DriveWaveform {
        DriveWaveform::single(Pulse {
            t_start,
            duration: self.duration,
            amplitude: self.amplitude,
        })
    }
}

/// Spike times of a two-neuron chain where neuron 0 is stimulated and drives
/// neuron 1 through `kappa`.
pub fn chain_spikes(
    params: &NeuronParams,
    kappa: f64,
    stimulus: &StimulusPulse,
    cfg: &SimConfig,
) -> Result<SimResult> {
    let mut c = CouplingMatrix::zeros(2);
    c.set(1, 0, kappa)?;
    simulate(
        &[*params, *params],
        &c,
        &[stimulus.at(0.0), DriveWaveform::silent()],
        cfg,
    )
}

/// Response latency `t₂ − t₁` of the stimulated chain.
pub fn latency(
    params: &NeuronParams,
    kappa: f64,
    stimulus: &StimulusPulse,
    cfg: &SimConfig,
) -> Result<f64> {
    let r = chain_spikes(params, kappa, stimulus, cfg)?;
    let t1 = r.first_spike(0).ok_or(Error::NoSpike(0))?;
    let t2 = r.first_spike(1).ok_or(Error::NoSpike(1))?;
    Ok(t2 - t1)
}
