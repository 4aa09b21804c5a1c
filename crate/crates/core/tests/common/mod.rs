#![allow(dead_code)]

use std::sync::OnceLock;

use afm_span::calibration::{calibrate_fixed, Calibration, CalibrationSetup};
use afm_span::network::SimConfig;

/// Calibration at the stored default constants (no search).
pub fn calibration() -> Calibration {
    static CAL: OnceLock<Calibration> = OnceLock::new();
    *CAL.get_or_init(|| calibrate_fixed(&CalibrationSetup::default()).expect("default constants calibrate"))
}

pub fn sim() -> SimConfig {
    calibration().sim_config(&SimConfig::default())
}
