//! Multi-SPAN readout: trained SPANs share one input layer; each drives an
//! output neuron through a weak coupling that also receives a clock neuron
//! firing at the target time. Only a SPAN spike coinciding with the clock
//! carries enough current to fire its output.
//!
//! Neuron layout: inputs `0..n_in`, SPANs `n_in..n_in+S`, clock `n_in+S`,
//! outputs `n_in+S+1..n_in+2S+1`.

use serde::{Deserialize, Serialize};

use crate::calibration::Calibration;
use crate::error::{Error, Result};
use crate::network::{simulate, CouplingMatrix, DriveWaveform, SimConfig, SimResult, KAPPA_0};
use crate::patterns::{SymbolGrid, GRID_CELLS};
use crate::units::{to_ps, PS};

/// Separation used to check that distant spikes do not add up.
pub const FAR_SEPARATION: f64 = 50.0 * PS;

/// Probe network mirroring what an output neuron sees: an unforced relay
/// spike (driver → relay at κ₀, as a SPAN fires) and a stimulus-driven
/// spike (as the clock fires). Layout: driver, relay, clock, output.
struct Probe<'a> {
    cal: &'a Calibration,
    sim: SimConfig,
    relay_time: f64,
    clock_latency: f64,
}

impl<'a> Probe<'a> {
    fn new(cal: &'a Calibration, base: &SimConfig) -> Result<Self> {
        let sim = cal.sim_config(base);
        let short = sim.with_t_end(400.0 * PS);
        let mut c = CouplingMatrix::zeros(2);
        c.set(1, 0, KAPPA_0)?;
        let r = simulate(&[cal.params; 2], &c, &[cal.stimulus.at(0.0), DriveWaveform::silent()], &short)?;
        let relay_time = r.first_spike(1).ok_or(Error::NoSpike(1))?;
        let r = simulate(&[cal.params], &CouplingMatrix::zeros(1), &[cal.stimulus.at(0.0)], &short)?;
        let clock_latency = r.first_spike(0).ok_or(Error::NoSpike(0))?;
        Ok(Self {
            cal,
            sim: sim.with_t_end(relay_time + FAR_SEPARATION + 400.0 * PS),
            relay_time,
            clock_latency,
        })
    }

    /// Output spike count with the relay (if `relay`) and the clock spiking
    /// `clock_offset` after the relay spike (if given).
    fn output_spikes(&self, kappa: f64, relay: bool, clock_offset: Option<f64>) -> Result<usize> {
        let mut c = CouplingMatrix::zeros(4);
        let mut drives = vec![DriveWaveform::silent(); 4];
        if relay {
            c.set(1, 0, KAPPA_0)?;
            c.set(3, 1, kappa)?;
            drives[0] = self.cal.stimulus.at(0.0);
        }
        if let Some(dt) = clock_offset {
            c.set(3, 2, kappa)?;
            drives[2] = self.cal.stimulus.at(self.relay_time + dt - self.clock_latency);
        }
        let r = simulate(&[self.cal.params; 4], &c, &drives, &self.sim)?;
        if relay && r.first_spike(1).is_none() {
            return Err(Error::NoSpike(1));
        }
        if clock_offset.is_some() && r.first_spike(2).is_none() {
            return Err(Error::NoSpike(2));
        }
        Ok(r.spike_count(3))
    }

    fn pair_fires(&self, kappa: f64, tolerance: f64) -> Result<bool> {
        Ok(self.output_spikes(kappa, true, Some(tolerance))? > 0
            && self.output_spikes(kappa, true, Some(-tolerance))? > 0)
    }

    fn single_fires(&self, kappa: f64) -> Result<bool> {
        Ok(self.output_spikes(kappa, true, None)? > 0 || self.output_spikes(kappa, false, Some(0.0))? > 0)
    }

    fn acceptable(&self, kappa: f64, tolerance: f64) -> Result<bool> {
        Ok(!self.single_fires(kappa)?
            && self.output_spikes(kappa, true, Some(0.0))? == 1
            && self.output_spikes(kappa, true, Some(tolerance))? == 1
            && self.output_spikes(kappa, true, Some(-tolerance))? == 1
            && self.output_spikes(kappa, true, Some(FAR_SEPARATION))? == 0
            && self.output_spikes(kappa, true, Some(-FAR_SEPARATION))? == 0)
    }
}

/// Bisect for the boundary where `fires` switches from false (at `lo`) to true (at `hi`).
fn boundary(mut lo: f64, mut hi: f64, iters: usize, mut fires: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if fires(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Weak output-layer coupling: one spike alone (unforced or clock-like)
/// never fires the output, an unforced spike and a clock spike within
/// `tolerance` of each other fire it exactly once.
///
/// Searches `[0.1 κ₀, 2 κ₀]` and returns a value just above the smallest
/// coupling at which a pair separated by `tolerance` still fires, so the
/// effective coincidence window is as narrow as the tolerance allows.
pub fn calibrate_weak_coupling(cal: &Calibration, base: &SimConfig, tolerance: f64) -> Result<f64> {
    if !(0.0..FAR_SEPARATION).contains(&tolerance) {
        return Err(Error::InvalidParameter(format!(
            "coincidence tolerance must be in [0, {} ps)",
            to_ps(FAR_SEPARATION)
        )));
    }
    let probe = Probe::new(cal, base)?;
    let (lo, hi) = (0.1 * KAPPA_0, 2.0 * KAPPA_0);
    let none = || Error::NoFeasibleCoupling { lo, hi };

    if probe.pair_fires(lo, tolerance)? {
        return Err(none());
    }
    let k_single = if probe.single_fires(hi)? {
        boundary(lo, hi, 30, |k| probe.single_fires(k))?
    } else {
        hi
    };
    if !probe.pair_fires(k_single, tolerance)? {
        return Err(none());
    }
    let k_pair = boundary(lo, k_single, 30, |k| probe.pair_fires(k, tolerance))?;
    for margin in [0.05, 0.1, 0.2, 0.3] {
        let k = k_pair + margin * (k_single - k_pair);
        if probe.acceptable(k, tolerance)? {
            return Ok(k);
        }
    }
    Err(none())
}

/// Drive for the clock neuron so that it spikes at `target`.
pub fn clock_drive(cal: &Calibration, base: &SimConfig, target: f64) -> Result<DriveWaveform> {
    let sim = cal.sim_config(base).with_t_end(target + 100.0 * PS);
    let spike_at = |t_start: f64| -> Result<f64> {
        let r = simulate(
            &[cal.params],
            &CouplingMatrix::zeros(1),
            &[cal.stimulus.at(t_start)],
            &sim,
        )?;
        r.first_spike(0).ok_or(Error::NoSpike(0))
    };
    let own_latency = spike_at(0.0)?;
    let mut t_start = target - own_latency;
    if t_start < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "target {} ps precedes the stimulus response ({} ps)",
            to_ps(target),
            to_ps(own_latency)
        )));
    }
    // The response is shift-invariant up to the time grid; one correction
    // absorbs the sampling offset.
    t_start += target - spike_at(t_start)?;
    Ok(cal.stimulus.at(t_start.max(0.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedChannel {
    pub label: String,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MultiSpanNetwork {
    pub calibration: Calibration,
    pub sim: SimConfig,
    pub input_count: usize,
    pub spans: Vec<TrainedChannel>,
    pub clock_drive: DriveWaveform,
    pub kappa_weak: f64,
    pub target: f64,
}

/// Spike summary of one classification run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutRun {
    pub result: SimResult,
    pub span_times: Vec<Option<f64>>,
    pub clock_time: Option<f64>,
    /// Spike count per output neuron.
    pub output_spikes: Vec<usize>,
}

impl MultiSpanNetwork {
    pub fn new(
        calibration: Calibration,
        sim: SimConfig,
        spans: Vec<TrainedChannel>,
        clock_drive: DriveWaveform,
        kappa_weak: f64,
        target: f64,
    ) -> Result<Self> {
        if spans.is_empty() {
            return Err(Error::InvalidParameter("no SPAN channels".into()));
        }
        for s in &spans {
            if s.weights.len() != GRID_CELLS {
                return Err(Error::DimensionMismatch(format!(
                    "channel {} has {} weights",
                    s.label,
                    s.weights.len()
                )));
            }
        }
        clock_drive.validate()?;
        Ok(Self {
            calibration,
            sim: calibration.sim_config(&sim),
            input_count: GRID_CELLS,
            spans,
            clock_drive,
            kappa_weak,
            target,
        })
    }

    pub fn output_count(&self) -> usize {
        self.spans.len()
    }

    pub fn span_index(&self, s: usize) -> usize {
        self.input_count + s
    }

    pub fn clock_index(&self) -> usize {
        self.input_count + self.spans.len()
    }

    pub fn output_index(&self, s: usize) -> usize {
        self.clock_index() + 1 + s
    }

    pub fn neuron_count(&self) -> usize {
        self.input_count + 2 * self.spans.len() + 1
    }

    pub fn coupling(&self) -> Result<CouplingMatrix> {
        let mut c = CouplingMatrix::zeros(self.neuron_count());
        for (s, ch) in self.spans.iter().enumerate() {
            for (k, &w) in ch.weights.iter().enumerate() {
                c.set(self.span_index(s), k, w)?;
            }
            c.set(self.output_index(s), self.span_index(s), self.kappa_weak)?;
            c.set(self.output_index(s), self.clock_index(), self.kappa_weak)?;
        }
        Ok(c)
    }

    pub fn labels(&self) -> Vec<String> {
        let mut l: Vec<String> = (1..=self.input_count).map(|k| format!("in{k}")).collect();
        l.extend(self.spans.iter().map(|s| format!("span_{}", s.label)));
        l.push("clock".into());
        l.extend(self.spans.iter().map(|s| format!("out_{}", s.label)));
        l
    }

    pub fn run(&self, symbol: &SymbolGrid) -> Result<ReadoutRun> {
        let n = self.neuron_count();
        let mut drives: Vec<DriveWaveform> = (0..self.input_count)
            .map(|k| {
                if symbol.is_black(k) {
                    self.calibration.stimulus.at(0.0)
                } else {
                    DriveWaveform::silent()
                }
            })
            .collect();
        drives.extend((0..self.spans.len()).map(|_| DriveWaveform::silent()));
        drives.push(self.clock_drive.clone());
        drives.extend((0..self.spans.len()).map(|_| DriveWaveform::silent()));
        let result = simulate(&vec![self.calibration.params; n], &self.coupling()?, &drives, &self.sim)?;
        Ok(ReadoutRun {
            span_times: (0..self.spans.len()).map(|s| result.first_spike(self.span_index(s))).collect(),
            clock_time: result.first_spike(self.clock_index()),
            output_spikes: (0..self.spans.len())
                .map(|s| result.spike_count(self.output_index(s)))
                .collect(),
            result,
        })
    }

    /// Label of the single output that fired, `None` if none did.
    pub fn classify(&self, symbol: &SymbolGrid) -> Result<Option<String>> {
        self.decide(&self.run(symbol)?)
    }

    pub fn decide(&self, run: &ReadoutRun) -> Result<Option<String>> {
        let fired: Vec<usize> = (0..self.spans.len())
            .filter(|&s| run.output_spikes[s] > 0)
            .collect();
        match fired.as_slice() {
            [] => Ok(None),
            [s] => Ok(Some(self.spans[*s].label.clone())),
            many => Err(Error::Ambiguous(many.len())),
        }
    }

    pub fn to_text(&self) -> String {
        #[derive(Serialize)]
        struct Pulse {
            t_start_ps: f64,
            duration_ps: f64,
            amplitude_ma: f64,
        }
        #[derive(Serialize)]
        struct File<'a> {
            kappa_weak: f64,
            target_ps: f64,
            clock_pulse: Vec<Pulse>,
            span: &'a [TrainedChannel],
        }
        let clock_pulse = self
            .clock_drive
            .pulses
            .iter()
            .map(|p| Pulse {
                t_start_ps: to_ps(p.t_start),
                duration_ps: to_ps(p.duration),
                amplitude_ma: p.amplitude * 1e3,
            })
            .collect();
        toml::to_string(&File {
            kappa_weak: self.kappa_weak,
            target_ps: to_ps(self.target),
            clock_pulse,
            span: &self.spans,
        })
        .expect("network serialises")
    }
}

