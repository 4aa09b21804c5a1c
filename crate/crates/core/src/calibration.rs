//! Fitting the free neuron constants to the two-neuron chain latencies.
//!
//! The exchange and anisotropy frequencies stay at their configured values.
//! Damping and the bias fraction are searched: an inner bisection over the
//! bias makes the latency at κ₀ hit its target, and an outer bisection over
//! the damping makes the latency at 1.5κ₀ hit its target. The stimulus pulse
//! used for the driven neuron is rebuilt for every candidate so it always
//! produces exactly one half-turn.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{chain_spikes, latency, SimConfig, StimulusPulse, KAPPA_0};
use crate::neuron::{step, NeuronParams};
use crate::units::{to_ps, PS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyTargets {
    pub kappa_0: f64,
    /// Latency wanted at `kappa_0` (s).
    pub at_kappa_0: f64,
    /// Coupling multiplier of the second anchor.
    pub strong_factor: f64,
    /// Latency wanted at `strong_factor * kappa_0` (s).
    pub at_strong: f64,
    /// Accepted relative deviation.
    pub tolerance: f64,
}

impl Default for LatencyTargets {
    fn default() -> Self {
        Self {
            kappa_0: KAPPA_0,
            at_kappa_0: 100.0 * PS,
            strong_factor: 1.5,
            at_strong: 50.0 * PS,
            tolerance: 0.10,
        }
    }
}

/// Bounds of the calibration search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub alpha: (f64, f64),
    pub bias_fraction: (f64, f64),
    /// Bisection iterations per dimension.
    pub iterations: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            alpha: (0.08, 0.17),
            bias_fraction: (0.5, 0.9999),
            iterations: 24,
        }
    }
}

impl SearchSpace {
    fn is_empty(&self) -> bool {
        !(self.alpha.0 < self.alpha.1
            && self.bias_fraction.0 < self.bias_fraction.1
            && self.alpha.0 > 0.0
            && self.bias_fraction.1 < 1.0
            && self.iterations > 0)
    }
}

/// Calibrated neuron, stimulus and detection threshold, plus what was achieved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub params: NeuronParams,
    pub stimulus: StimulusPulse,
    /// Stimulus drive as a multiple of the static threshold current.
    pub stimulus_drive_factor: f64,
    pub threshold_v: f64,
    /// Peak voltage of an unforced spike (neuron 2 of the chain at κ₀).
    pub isolated_peak_v: f64,
    pub latency_k0: f64,
    pub latency_strong: f64,
    /// Smallest chain coupling that still makes neuron 2 fire.
    pub kappa_cutoff: f64,
    pub targets: LatencyTargets,
}

impl Calibration {
    /// Simulation settings with this calibration's detection threshold.
    pub fn sim_config(&self, base: &SimConfig) -> SimConfig {
        SimConfig {
            threshold_v: self.threshold_v,
            ..*base
        }
    }

    pub fn report(&self) -> String {
        let p = &self.params;
        format!(
            "# calibration report\n\
             f_ex_thz = {:.4}\n\
             f_e_ghz = {:.4}\n\
             alpha = {:.6}\n\
             bias_fraction = {:.6}\n\
             sigma_rad_per_s_a = {:.6e}\n\
             i_bias_ma = {:.6}\n\
             stimulus_amplitude_ma = {:.6}\n\
             stimulus_duration_ps = {:.4}\n\
             stimulus_drive_factor = {:.3}\n\
             isolated_peak_uv = {:.4}\n\
             threshold_uv = {:.4}\n\
             latency_k0_ps = {:.3} (target {:.1} +/- {:.0}%)\n\
             latency_{:.1}k0_ps = {:.3} (target {:.1} +/- {:.0}%)\n\
             kappa_cutoff = {:.6}\n",
            p.omega_ex / (2.0 * std::f64::consts::PI) / 1e12,
            p.omega_e / (2.0 * std::f64::consts::PI) / 1e9,
            p.alpha,
            p.bias_fraction(),
            p.sigma,
            p.i_bias * 1e3,
            self.stimulus.amplitude * 1e3,
            to_ps(self.stimulus.duration),
            self.stimulus_drive_factor,
            self.isolated_peak_v * 1e6,
            self.threshold_v * 1e6,
            to_ps(self.latency_k0),
            to_ps(self.targets.at_kappa_0),
            self.targets.tolerance * 100.0,
            self.targets.strong_factor,
            to_ps(self.latency_strong),
            to_ps(self.targets.at_strong),
            self.targets.tolerance * 100.0,
            self.kappa_cutoff,
        )
    }
}

/// Settings for [`calibrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSetup {
    /// Neuron constants; `alpha` and `i_bias` are overwritten by the search.
    pub base: NeuronParams,
    pub targets: LatencyTargets,
    pub space: SearchSpace,
    /// Total stimulus drive as a multiple of the threshold current.
    pub stimulus_drive_factor: f64,
    /// Detection threshold as a fraction of the isolated spike peak.
    pub threshold_fraction: f64,
    pub sim: SimConfig,
}

impl Default for CalibrationSetup {
    fn default() -> Self {
        Self {
            base: NeuronParams::default(),
            targets: LatencyTargets::default(),
            space: SearchSpace::default(),
            stimulus_drive_factor: 3.0,
            threshold_fraction: 0.5,
            sim: SimConfig::default().with_t_end(500.0 * PS),
        }
    }
}

/// Stimulus that drives a resting neuron at `drive_factor` times the static
/// threshold for exactly the time its first half-turn takes.
pub fn half_turn_stimulus(params: &NeuronParams, drive_factor: f64, dt: f64) -> Result<StimulusPulse> {
    if !(drive_factor > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "stimulus drive factor must exceed 1, got {drive_factor}"
        )));
    }
    let amplitude = drive_factor * params.threshold_current() - params.i_bias;
    let mut s = params.rest_state();
    let target = s.phi + std::f64::consts::PI;
    let mut t = 0.0;
    let limit = 10_000.0 * PS;
    while s.phi < target {
        s = step(s, params, |_| amplitude, |_| 0.0, t, dt)?;
        t += dt;
        if t > limit {
            return Err(Error::InvalidParameter(
                "stimulus never completes a half-turn".into(),
            ));
        }
    }
    Ok(StimulusPulse {
        amplitude,
        duration: t,
    })
}

/// Rough peak velocity of an unforced spike in the overdamped limit,
/// `(σ I_bias + ω_e/2) / α`, turned into a voltage. Used only to pick a
/// provisional detection threshold while searching.
fn provisional_threshold(params: &NeuronParams, fraction: f64) -> f64 {
    let v = (params.sigma * params.i_bias + 0.5 * params.omega_e) / params.alpha;
    fraction * params.beta * v
}

struct Probe {
    params: NeuronParams,
    stimulus: StimulusPulse,
    sim: SimConfig,
}

impl Probe {
    fn new(setup: &CalibrationSetup, alpha: f64, bias: f64) -> Result<Self> {
        let params = NeuronParams {
            alpha,
            ..setup.base
        }
        .with_bias_fraction(bias);
        let stimulus = half_turn_stimulus(&params, setup.stimulus_drive_factor, setup.sim.dt)?;
        let sim = SimConfig {
            threshold_v: provisional_threshold(&params, setup.threshold_fraction),
            ..setup.sim
        };
        Ok(Self {
            params,
            stimulus,
            sim,
        })
    }

    /// Latency, or infinity when the driven neuron does not fire.
    fn latency(&self, kappa: f64) -> Result<f64> {
        match latency(&self.params, kappa, &self.stimulus, &self.sim) {
            Ok(l) => Ok(l),
            Err(Error::NoSpike(1)) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }
}

/// Bias fraction at which the κ₀ latency equals its target, for fixed damping.
fn fit_bias(setup: &CalibrationSetup, alpha: f64) -> Result<Option<(f64, Probe)>> {
    let (mut lo, mut hi) = setup.space.bias_fraction;
    let k0 = setup.targets.kappa_0;
    let want = setup.targets.at_kappa_0;
    // Latency falls as the bias approaches threshold.
    if Probe::new(setup, alpha, hi)?.latency(k0)? > want
        || Probe::new(setup, alpha, lo)?.latency(k0)? < want
    {
        return Ok(None);
    }
    for _ in 0..setup.space.iterations {
        let mid = 0.5 * (lo + hi);
        if Probe::new(setup, alpha, mid)?.latency(k0)? > want {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let bias = 0.5 * (lo + hi);
    Ok(Some((bias, Probe::new(setup, alpha, bias)?)))
}

/// Search damping and bias so the chain reproduces both latency anchors.
pub fn calibrate(setup: &CalibrationSetup) -> Result<Calibration> {
    let fail = |reason: &str, l0: Option<f64>, l1: Option<f64>| Error::CalibrationFailed {
        reason: reason.to_string(),
        lat_k0_ps: l0.map(to_ps),
        lat_k15_ps: l1.map(to_ps),
    };
    if setup.space.is_empty() {
        return Err(fail("empty search space", None, None));
    }
    setup.sim.validate()?;
    let t = setup.targets;
    let strong = t.strong_factor * t.kappa_0;

    // The strong-coupling latency grows with damping once the κ₀ latency is pinned.
    let strong_latency = |alpha: f64| -> Result<Option<(f64, Probe)>> {
        match fit_bias(setup, alpha)? {
            Some((_, probe)) => Ok(Some((probe.latency(strong)?, probe))),
            None => Ok(None),
        }
    };

    let (mut lo, mut hi) = setup.space.alpha;
    let at_lo = strong_latency(lo)?;
    let at_hi = strong_latency(hi)?;
    let (l_lo, l_hi) = match (&at_lo, &at_hi) {
        (Some((a, _)), Some((b, _))) => (*a, *b),
        _ => {
            return Err(fail(
                "κ₀ latency target unreachable at a damping bound",
                None,
                at_lo.as_ref().or(at_hi.as_ref()).map(|x| x.0),
            ))
        }
    };
    if !(l_lo <= t.at_strong && t.at_strong <= l_hi) {
        return Err(fail(
            "strong-coupling latency not bracketed by the damping range",
            Some(t.at_kappa_0),
            Some(if l_lo > t.at_strong { l_lo } else { l_hi }),
        ));
    }
    let mut best = at_lo.map(|x| x.1);
    for _ in 0..setup.space.iterations {
        let mid = 0.5 * (lo + hi);
        match strong_latency(mid)? {
            Some((l, probe)) => {
                if l < t.at_strong {
                    lo = mid;
                } else {
                    hi = mid;
                }
                best = Some(probe);
            }
            None => return Err(fail("κ₀ latency target unreachable", None, None)),
        }
    }
    let probe = best.ok_or_else(|| fail("no candidate evaluated", None, None))?;
    finish(setup, probe)
}

/// Check the damping and bias already in `setup.base` against the targets
/// without searching. Fails like [`calibrate`] when they miss.
pub fn calibrate_fixed(setup: &CalibrationSetup) -> Result<Calibration> {
    setup.base.validate()?;
    setup.sim.validate()?;
    let probe = Probe::new(setup, setup.base.alpha, setup.base.bias_fraction())?;
    finish(setup, probe)
}

fn finish(setup: &CalibrationSetup, probe: Probe) -> Result<Calibration> {
    let t = setup.targets;
    let reference = chain_spikes(&probe.params, t.kappa_0, &probe.stimulus, &probe.sim)?;
    let first = reference.spikes[1]
        .first()
        .ok_or(Error::NoSpike(1))?;
    let isolated_peak_v = first.v_peak;
    let threshold_v = setup.threshold_fraction * isolated_peak_v;
    let sim = SimConfig {
        threshold_v,
        ..setup.sim
    };

    let measure = |k: f64| latency(&probe.params, k, &probe.stimulus, &sim).ok();
    let l0 = measure(t.kappa_0);
    let l1 = measure(t.strong_factor * t.kappa_0);
    let within = |l: Option<f64>, target: f64| {
        l.is_some_and(|l| ((l - target) / target).abs() <= t.tolerance)
    };
    if !(within(l0, t.at_kappa_0) && within(l1, t.at_strong)) {
        return Err(Error::CalibrationFailed {
            reason: "latencies outside tolerance".into(),
            lat_k0_ps: l0.map(to_ps),
            lat_k15_ps: l1.map(to_ps),
        });
    }
    let kappa_cutoff = latency_cutoff(&probe.params, &probe.stimulus, &sim, 0.0, t.kappa_0, 40)?;
    Ok(Calibration {
        params: probe.params,
        stimulus: probe.stimulus,
        stimulus_drive_factor: setup.stimulus_drive_factor,
        threshold_v,
        isolated_peak_v,
        latency_k0: l0.unwrap_or(f64::NAN),
        latency_strong: l1.unwrap_or(f64::NAN),
        kappa_cutoff,
        targets: t,
    })
}

/// Smallest chain coupling in `[lo, hi]` at which the driven neuron fires,
/// found by bisection. `hi` must fire.
pub fn latency_cutoff(
    params: &NeuronParams,
    stimulus: &StimulusPulse,
    sim: &SimConfig,
    mut lo: f64,
    mut hi: f64,
    iterations: usize,
) -> Result<f64> {
    let fires = |k: f64| -> Result<bool> {
        match latency(params, k, stimulus, sim) {
            Ok(_) => Ok(true),
            Err(Error::NoSpike(1)) => Ok(false),
            Err(e) => Err(e),
        }
    };
    if !fires(hi)? {
        return Err(Error::NoSpike(1));
    }
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if fires(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_search_space_fails() {
        let setup = CalibrationSetup {
            space: SearchSpace {
                alpha: (0.2, 0.1),
                ..SearchSpace::default()
            },
            ..CalibrationSetup::default()
        };
        assert!(matches!(
            calibrate(&setup),
            Err(Error::CalibrationFailed { .. })
        ));
    }

    #[test]
    fn unreachable_targets_fail_with_residuals() {
        let setup = CalibrationSetup {
            space: SearchSpace {
                alpha: (0.05, 0.06),
                bias_fraction: (0.5, 0.6),
                iterations: 4,
            },
            ..CalibrationSetup::default()
        };
        assert!(matches!(
            calibrate(&setup),
            Err(Error::CalibrationFailed { .. })
        ));
    }

    #[test]
    fn half_turn_stimulus_fires_once() {
        let p = NeuronParams::default();
        let s = half_turn_stimulus(&p, 3.0, 0.01 * PS).unwrap();
        assert!(s.duration > 0.0 && s.amplitude > 0.0);
        assert!(half_turn_stimulus(&p, 0.9, 0.01 * PS).is_err());
    }
}
