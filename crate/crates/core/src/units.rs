//! Unit helpers. Everything inside the crate is SI; these convert at the edges.

/// One picosecond in seconds.
pub const PS: f64 = 1e-12;
/// One nanosecond in seconds.
pub const NS: f64 = 1e-9;
/// One picojoule in joules.
pub const PJ: f64 = 1e-12;

pub fn ps(t: f64) -> f64 {
    t * PS
}

pub fn to_ps(t: f64) -> f64 {
    t / PS
}
