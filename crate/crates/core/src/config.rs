//! Run configuration: one TOML file, every physical quantity with its unit in
//! the key name.
//!
//! ```toml
//! seed = 1
//!
//! [neuron]
//! f_ex_thz = 27.5
//! f_e_ghz = 1.75
//!
//! [trainer]
//! epochs = 60
//! ```
//!
//! Everything except `seed` has a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationSetup, LatencyTargets, SearchSpace};
use crate::error::{Error, Result};
use crate::network::SimConfig;
use crate::neuron::{
    NeuronParams, CALIBRATED_ALPHA, CALIBRATED_BIAS_FRACTION, DEFAULT_BETA, NIO_F_EX_HZ, NIO_F_E_HZ,
    REFERENCE_THRESHOLD_CURRENT,
};
use crate::patterns::{
    DEFAULT_BASE_TIME, DEFAULT_LIBRARY_SIZE, DEFAULT_MAX_FLIPS, DEFAULT_SHIFT_PER_PIXEL,
};
use crate::span::TrainerConfig;
use crate::units::{to_ps, PS};

const TAU: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub neuron: NeuronSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub calibration: CalibrationSection,
    #[serde(default)]
    pub library: LibrarySection,
    #[serde(default)]
    pub trainer: TrainerSection,
    #[serde(default)]
    pub readout: ReadoutSection,
    #[serde(default)]
    pub energy: EnergySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuronSection {
    /// Defaults are literature values for NiO, not fitted here.
    pub f_ex_thz: f64,
    pub f_e_ghz: f64,
    pub beta_v_s: f64,
    /// Static rotation threshold the torque efficiency is scaled to.
    pub threshold_current_ma: f64,
    /// Used until a calibration replaces it.
    pub alpha: f64,
    /// Bias current over the threshold current; must stay below 1.
    pub bias_fraction: f64,
}

impl Default for NeuronSection {
    fn default() -> Self {
        Self {
            f_ex_thz: NIO_F_EX_HZ / 1e12,
            f_e_ghz: NIO_F_E_HZ / 1e9,
            beta_v_s: DEFAULT_BETA,
            threshold_current_ma: REFERENCE_THRESHOLD_CURRENT * 1e3,
            alpha: CALIBRATED_ALPHA,
            bias_fraction: CALIBRATED_BIAS_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub dt_ps: f64,
    pub horizon_ps: f64,
    pub sample_interval_ps: f64,
    pub synaptic_delay_ps: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            dt_ps: 0.01,
            horizon_ps: 300.0,
            sample_interval_ps: 0.1,
            synaptic_delay_ps: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    pub kappa_0: f64,
    pub latency_k0_ps: f64,
    pub strong_factor: f64,
    pub latency_strong_ps: f64,
    pub tolerance: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub bias_fraction_min: f64,
    pub bias_fraction_max: f64,
    pub iterations: usize,
    pub stimulus_drive_factor: f64,
    pub threshold_fraction: f64,
    pub horizon_ps: f64,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        let t = LatencyTargets::default();
        let s = SearchSpace::default();
        let c = CalibrationSetup::default();
        Self {
            kappa_0: t.kappa_0,
            latency_k0_ps: to_ps(t.at_kappa_0),
            strong_factor: t.strong_factor,
            latency_strong_ps: to_ps(t.at_strong),
            tolerance: t.tolerance,
            alpha_min: s.alpha.0,
            alpha_max: s.alpha.1,
            bias_fraction_min: s.bias_fraction.0,
            bias_fraction_max: s.bias_fraction.1,
            iterations: s.iterations,
            stimulus_drive_factor: c.stimulus_drive_factor,
            threshold_fraction: c.threshold_fraction,
            horizon_ps: to_ps(c.sim.t_end),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LibrarySection {
    pub symbol: String,
    pub size: usize,
    pub max_flips: usize,
    pub base_time_ps: f64,
    pub shift_per_pixel_ps: f64,
    /// Target shift per missing pixel; negative moves the target later.
    pub missing_shift_per_pixel_ps: f64,
}

impl Default for LibrarySection {
    fn default() -> Self {
        Self {
            symbol: "O".into(),
            size: DEFAULT_LIBRARY_SIZE,
            max_flips: DEFAULT_MAX_FLIPS,
            base_time_ps: to_ps(DEFAULT_BASE_TIME),
            shift_per_pixel_ps: to_ps(DEFAULT_SHIFT_PER_PIXEL),
            missing_shift_per_pixel_ps: to_ps(DEFAULT_SHIFT_PER_PIXEL),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerSection {
    pub learning_rate: f64,
    pub tau_ps: f64,
    pub epochs: usize,
    pub window_ps: f64,
    pub update_scale: f64,
    pub init_max: f64,
    /// Overrides the detected input spike times when set.
    pub t_input_ps: Option<f64>,
}

impl Default for TrainerSection {
    fn default() -> Self {
        let t = TrainerConfig::default();
        Self {
            learning_rate: t.learning_rate,
            tau_ps: to_ps(t.tau),
            epochs: t.epochs,
            window_ps: to_ps(t.window),
            update_scale: t.update_scale,
            init_max: t.init_max,
            t_input_ps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutSection {
    pub symbols: Vec<String>,
    pub coincidence_tolerance_ps: f64,
    pub horizon_ps: f64,
}

impl Default for ReadoutSection {
    fn default() -> Self {
        Self {
            symbols: vec!["Z".into(), "O".into(), "X".into()],
            coincidence_tolerance_ps: 10.0,
            horizon_ps: 400.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergySection {
    pub energy_per_op_pj: f64,
}

impl Default for EnergySection {
    fn default() -> Self {
        Self {
            energy_per_op_pj: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be a positive number, got {v}")))
    }
}

impl RunConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            neuron: Default::default(),
            simulation: Default::default(),
            calibration: Default::default(),
            library: Default::default(),
            trainer: Default::default(),
            readout: Default::default(),
            energy: Default::default(),
            output: Default::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.neuron;
        positive("neuron.f_ex_thz", n.f_ex_thz)?;
        positive("neuron.f_e_ghz", n.f_e_ghz)?;
        positive("neuron.beta_v_s", n.beta_v_s)?;
        positive("neuron.threshold_current_ma", n.threshold_current_ma)?;
        positive("neuron.alpha", n.alpha)?;
        if !(n.bias_fraction >= 0.0 && n.bias_fraction < 1.0) {
            return Err(Error::Config(format!(
                "neuron.bias_fraction must be in [0, 1) (subcritical), got {}",
                n.bias_fraction
            )));
        }
        self.neuron_params()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.sim_config()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;

        let c = &self.calibration;
        for (name, v) in [
            ("calibration.kappa_0", c.kappa_0),
            ("calibration.latency_k0_ps", c.latency_k0_ps),
            ("calibration.strong_factor", c.strong_factor),
            ("calibration.latency_strong_ps", c.latency_strong_ps),
            ("calibration.tolerance", c.tolerance),
            ("calibration.threshold_fraction", c.threshold_fraction),
            ("calibration.horizon_ps", c.horizon_ps),
        ] {
            positive(name, v)?;
        }
        if !(c.stimulus_drive_factor > 1.0) {
            return Err(Error::Config("calibration.stimulus_drive_factor must exceed 1".into()));
        }

        let l = &self.library;
        if crate::patterns::builtin_symbol(&l.symbol).is_none() {
            return Err(Error::Config(format!("unknown symbol {:?}", l.symbol)));
        }
        if l.size < 2 || l.max_flips < 1 {
            return Err(Error::Config("library needs size >= 2 and max_flips >= 1".into()));
        }
        positive("library.base_time_ps", l.base_time_ps)?;
        if !(l.shift_per_pixel_ps >= 0.0) {
            return Err(Error::Config("library.shift_per_pixel_ps must be >= 0".into()));
        }
        if !l.missing_shift_per_pixel_ps.is_finite() {
            return Err(Error::Config("library.missing_shift_per_pixel_ps must be finite".into()));
        }

        self.trainer_config()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;

        let r = &self.readout;
        if r.symbols.is_empty() {
            return Err(Error::Config("readout.symbols is empty".into()));
        }
        for s in &r.symbols {
            if crate::patterns::builtin_symbol(s).is_none() {
                return Err(Error::Config(format!("unknown readout symbol {s:?}")));
            }
        }
        positive("readout.horizon_ps", r.horizon_ps)?;
        if !(r.coincidence_tolerance_ps >= 0.0) {
            return Err(Error::Config("readout.coincidence_tolerance_ps must be >= 0".into()));
        }
        if !(self.energy.energy_per_op_pj >= 0.0) {
            return Err(Error::Config("energy.energy_per_op_pj must be >= 0".into()));
        }
        Ok(())
    }

    pub fn neuron_params(&self) -> NeuronParams {
        let n = &self.neuron;
        let omega_e = TAU * n.f_e_ghz * 1e9;
        NeuronParams {
            omega_ex: TAU * n.f_ex_thz * 1e12,
            alpha: n.alpha,
            omega_e,
            sigma: omega_e / (2.0 * n.threshold_current_ma * 1e-3),
            beta: n.beta_v_s,
            i_bias: 0.0,
        }
        .with_bias_fraction(n.bias_fraction)
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.simulation;
        SimConfig {
            dt: s.dt_ps * PS,
            t_end: s.horizon_ps * PS,
            sample_interval: s.sample_interval_ps * PS,
            synaptic_delay: s.synaptic_delay_ps * PS,
            ..SimConfig::default()
        }
    }

    pub fn calibration_setup(&self) -> CalibrationSetup {
        let c = &self.calibration;
        CalibrationSetup {
            base: self.neuron_params(),
            targets: LatencyTargets {
                kappa_0: c.kappa_0,
                at_kappa_0: c.latency_k0_ps * PS,
                strong_factor: c.strong_factor,
                at_strong: c.latency_strong_ps * PS,
                tolerance: c.tolerance,
            },
            space: SearchSpace {
                alpha: (c.alpha_min, c.alpha_max),
                bias_fraction: (c.bias_fraction_min, c.bias_fraction_max),
                iterations: c.iterations,
            },
            stimulus_drive_factor: c.stimulus_drive_factor,
            threshold_fraction: c.threshold_fraction,
            sim: self.sim_config().with_t_end(c.horizon_ps * PS),
        }
    }

    pub fn trainer_config(&self) -> TrainerConfig {
        let t = &self.trainer;
        TrainerConfig {
            learning_rate: t.learning_rate,
            tau: t.tau_ps * PS,
            epochs: t.epochs,
            window: t.window_ps * PS,
            update_scale: t.update_scale,
            init_max: t.init_max,
            horizon: self.simulation.horizon_ps * PS,
            t_input: t.t_input_ps.map(|t| t * PS),
        }
    }

    pub fn energy_per_op(&self) -> f64 {
        self.energy.energy_per_op_pj * crate::units::PJ
    }
}

impl Default for RunConfig {
    /// Defaults with seed 1; file-based configs must still state their seed.
    fn default() -> Self {
        Self::with_seed(1)
    }
}
