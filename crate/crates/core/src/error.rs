use std::path::PathBuf;

/// Errors produced by the simulator, trainer and harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state became non-finite for neuron {neuron} at t = {time_ps:.3} ps (dt too large?)")]
    NonFinite { neuron: usize, time_ps: f64 },

    #[error("trace has {0} samples, at least 3 are required")]
    EmptyTrace(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("neuron {0} never fired")]
    NoSpike(usize),

    #[error("cannot build {wanted} distinct variants with at most {max_flips} flipped pixels")]
    Unsatisfiable { wanted: usize, max_flips: usize },

    #[error("no coupling in [{lo:.5}, {hi:.5}] separates single from coincident spikes")]
    NoFeasibleCoupling { lo: f64, hi: f64 },

    #[error("{0} output neurons fired")]
    Ambiguous(usize),

    #[error("calibration failed: {reason} (latency at k0 {lat_k0_ps:?} ps, at 1.5 k0 {lat_k15_ps:?} ps)")]
    CalibrationFailed {
        reason: String,
        lat_k0_ps: Option<f64>,
        lat_k15_ps: Option<f64>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {what}: {msg}")]
    Parse { what: String, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            msg: msg.into(),
        }
    }
}
