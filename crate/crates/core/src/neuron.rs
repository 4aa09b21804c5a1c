//! Single AFM neuron: pendulum-like dynamics of the in-plane Neel angle and
//! the spin-pumping output voltage.
//!
//! The angle obeys
//!
//! ```text
//! φ̈ / ω_ex + α φ̇ + (ω_e / 2) sin 2φ = σ I + Σ_k κ_k φ̇_k
//! ```
//!
//! and the emitted voltage is `V = β φ̇`. The angle is kept unwrapped so that
//! every half-turn (one spike) advances it by π.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{rk4_step, Rk4Workspace};

/// Spin-pumping efficiency in V·s.
pub const DEFAULT_BETA: f64 = 0.11e-15;

/// Reference exchange frequency of NiO (Hz). Literature value, used as a default.
pub const NIO_F_EX_HZ: f64 = 27.5e12;
/// Reference easy-axis anisotropy frequency of NiO (Hz). Literature value, used as a default.
pub const NIO_F_E_HZ: f64 = 1.75e9;
/// Static rotation threshold current the default `sigma` is normalised to (A).
pub const REFERENCE_THRESHOLD_CURRENT: f64 = 1.0e-3;

/// Damping found by the latency calibration with the NiO frequencies.
pub const CALIBRATED_ALPHA: f64 = 0.135324;
/// Bias current over the static threshold found by the latency calibration.
pub const CALIBRATED_BIAS_FRACTION: f64 = 0.983131;

/// Physical constants of one AFM neuron. SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    /// Exchange angular frequency (rad/s).
    pub omega_ex: f64,
    /// Effective Gilbert damping.
    pub alpha: f64,
    /// Easy-axis anisotropy angular frequency (rad/s).
    pub omega_e: f64,
    /// Spin-torque efficiency (rad/s per A).
    pub sigma: f64,
    /// Spin-pumping efficiency (V·s).
    pub beta: f64,
    /// Constant subcritical bias current (A).
    pub i_bias: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        let omega_e = 2.0 * std::f64::consts::PI * NIO_F_E_HZ;
        let sigma = omega_e / (2.0 * REFERENCE_THRESHOLD_CURRENT);
        let p = NeuronParams {
            omega_ex: 2.0 * std::f64::consts::PI * NIO_F_EX_HZ,
            alpha: CALIBRATED_ALPHA,
            omega_e,
            sigma,
            beta: DEFAULT_BETA,
            i_bias: 0.0,
        };
        p.with_bias_fraction(CALIBRATED_BIAS_FRACTION)
    }
}

impl NeuronParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_ex", self.omega_ex),
            ("omega_e", self.omega_e),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("sigma", self.sigma),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if !self.i_bias.is_finite() {
            return Err(Error::InvalidParameter("i_bias must be finite".into()));
        }
        if self.sigma * self.i_bias.abs() >= 0.5 * self.omega_e {
            return Err(Error::InvalidParameter(format!(
                "bias current {:.4e} A is at or above the static rotation threshold {:.4e} A",
                self.i_bias,
                self.threshold_current()
            )));
        }
        Ok(())
    }

    /// Current at which σI equals ω_e/2 and the neuron rotates continuously.
    pub fn threshold_current(&self) -> f64 {
        0.5 * self.omega_e / self.sigma
    }

    /// Bias current as a fraction of [`threshold_current`](Self::threshold_current).
    pub fn bias_fraction(&self) -> f64 {
        self.i_bias / self.threshold_current()
    }

    pub fn with_bias_fraction(mut self, fraction: f64) -> Self {
        self.i_bias = fraction * self.threshold_current();
        self
    }

    /// Stable equilibrium under the bias current alone.
    pub fn rest_state(&self) -> NeuronState {
        NeuronState {
            phi: equilibrium_angle(self.sigma * self.i_bias, self.omega_e),
            phi_dot: 0.0,
        }
    }
}

/// `½·arcsin(2σI/ω_e)`: the resting angle for a constant subcritical drive σI.
pub fn equilibrium_angle(sigma_i: f64, omega_e: f64) -> f64 {
    0.5 * (2.0 * sigma_i / omega_e).asin()
}

/// Phase-space point of one neuron.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NeuronState {
    /// Unwrapped in-plane Neel angle (rad).
    pub phi: f64,
    /// Angular velocity (rad/s).
    pub phi_dot: f64,
}

impl NeuronState {
    pub fn is_finite(&self) -> bool {
        self.phi.is_finite() && self.phi_dot.is_finite()
    }
}

/// Angular acceleration φ̈ for the given state, extra drive current and
/// synaptic input `coupling_in = Σ_k κ_k φ̇_k`.
#[inline]
pub fn acceleration(
    state: NeuronState,
    params: &NeuronParams,
    i_drive: f64,
    coupling_in: f64,
) -> f64 {
    params.omega_ex
        * (params.sigma * (params.i_bias + i_drive) + coupling_in
            - params.alpha * state.phi_dot
            - 0.5 * params.omega_e * (2.0 * state.phi).sin())
}

/// Spin-pumping voltage `β φ̇`.
#[inline]
pub fn voltage(state: NeuronState, params: &NeuronParams) -> f64 {
    params.beta * state.phi_dot
}

/// Advance one neuron by a single RK4 step of size `dt` starting at `t`.
///
/// `drive` gives the extra current and `coupling` the synaptic input, both as
/// functions of time.
pub fn step<D, C>(
    state: NeuronState,
    params: &NeuronParams,
    drive: D,
    coupling: C,
    t: f64,
    dt: f64,
) -> Result<NeuronState>
where
    D: Fn(f64) -> f64,
    C: Fn(f64) -> f64,
{
    let mut ws = Rk4Workspace::new(2);
    let mut y = [state.phi, state.phi_dot];
    rk4_step(&mut y, t, dt, &mut ws, |tt, y, d| {
        let s = NeuronState {
            phi: y[0],
            phi_dot: y[1],
        };
        d[0] = y[1];
        d[1] = acceleration(s, params, drive(tt), coupling(tt));
    });
    let next = NeuronState {
        phi: y[0],
        phi_dot: y[1],
    };
    if !next.is_finite() {
        return Err(Error::NonFinite {
            neuron: 0,
            time_ps: (t + dt) * 1e12,
        });
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    const PS: f64 = 1e-12;

    fn zero_bias() -> NeuronParams {
        NeuronParams {
            i_bias: 0.0,
            ..NeuronParams::default()
        }
    }

    #[test]
    fn rest_equilibrium_has_zero_acceleration() {
        let p = zero_bias();
        assert_eq!(acceleration(NeuronState::default(), &p, 0.0, 0.0), 0.0);
    }

    #[test]
    fn balance_point_at_quarter_pi() {
        let p = zero_bias();
        let s = NeuronState {
            phi: FRAC_PI_4,
            phi_dot: 0.0,
        };
        let i = p.threshold_current();
        let a = acceleration(s, &p, i, 0.0);
        assert!(a.abs() < 1e-6 * p.omega_ex * p.omega_e, "{a}");
    }

    #[test]
    fn generic_point_matches_scalar_evaluation() {
        // Independent evaluation of φ̈ = ω_ex (σI + c − α φ̇ − (ω_e/2) sin 2φ),
        // written out from the rearranged pendulum equation.
        let p = NeuronParams {
            omega_ex: 1.7e14,
            alpha: 0.02,
            omega_e: 1.1e10,
            sigma: 5.5e12,
            beta: DEFAULT_BETA,
            i_bias: 3.0e-4,
        };
        let (phi, phi_dot, i, c) = (0.7_f64, 2.5e10_f64, 1.2e-4_f64, 3.0e8_f64);
        let lhs_without_inertia = p.alpha * phi_dot + p.omega_e / 2.0 * (2.0 * phi).sin();
        let rhs = p.sigma * (p.i_bias + i) + c;
        let expected = (rhs - lhs_without_inertia) * p.omega_ex;
        let got = acceleration(NeuronState { phi, phi_dot }, &p, i, c);
        assert!(((got - expected) / expected).abs() < 1e-14);
    }

    #[test]
    fn voltage_is_beta_times_velocity() {
        let p = NeuronParams::default();
        assert_eq!(voltage(NeuronState::default(), &p), 0.0);
        let v = voltage(
            NeuronState {
                phi: 0.0,
                phi_dot: 1e12,
            },
            &p,
        );
        assert!((v - 1.1e-4).abs() < 1e-18);
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let p = NeuronParams::default();
        let mut s = p.rest_state();
        let start = s;
        for n in 0..1000 {
            s = step(s, &p, |_| 0.0, |_| 0.0, n as f64 * 0.01 * PS, 0.01 * PS).unwrap();
        }
        assert!((s.phi - start.phi).abs() < 1e-12);
        assert!(s.phi_dot.abs() < 1e-3);
    }

    #[test]
    fn subcritical_drive_settles_at_analytic_angle() {
        let p = zero_bias();
        let drive = 0.4 * p.threshold_current();
        let mut s = NeuronState::default();
        let dt = 0.01 * PS;
        for n in 0..200_000 {
            s = step(s, &p, |_| drive, |_| 0.0, n as f64 * dt, dt).unwrap();
        }
        let expected = 0.5 * 0.4f64.asin();
        assert!((s.phi - expected).abs() < 1e-3, "{} vs {}", s.phi, expected);
    }

    #[test]
    fn suprathreshold_pulse_gives_single_half_turn() {
        let p = NeuronParams::default();
        let amp = 3.0 * p.threshold_current() - p.i_bias;
        let dt = 0.01 * PS;
        let mut s = p.rest_state();
        let start = s.phi;
        let pulse_end = 25.0 * PS;
        for n in 0..60_000 {
            let t = n as f64 * dt;
            s = step(
                s,
                &p,
                |tt| if tt < pulse_end { amp } else { 0.0 },
                |_| 0.0,
                t,
                dt,
            )
            .unwrap();
        }
        assert!(((s.phi - start) - PI).abs() < 1e-3, "advance {}", s.phi - start);
    }

    #[test]
    fn huge_step_reports_non_finite() {
        let p = NeuronParams::default();
        let mut s = NeuronState {
            phi: 0.3,
            phi_dot: 1e12,
        };
        let mut err = None;
        for n in 0..10_000 {
            match step(s, &p, |_| 0.0, |_| 0.0, n as f64 * 1e-9, 1e-9) {
                Ok(next) => s = next,
                Err(e) => {
                    err = Some(e);
                    break;
                }
            }
        }
        assert!(matches!(err, Some(Error::NonFinite { .. })));
    }

    #[test]
    fn validate_rejects_supercritical_bias() {
        let p = NeuronParams::default().with_bias_fraction(1.2);
        assert!(p.validate().is_err());
        assert!(NeuronParams::default().validate().is_ok());
    }
}
