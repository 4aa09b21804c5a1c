//! Spike extraction from uniformly sampled voltage traces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub neuron_id: usize,
    /// Peak time (s).
    pub t_spike: f64,
    /// Peak voltage (V).
    pub v_peak: f64,
}

/// A uniformly sampled series: sample `i` is taken at `start + i * interval`.
#[derive(Debug, Clone, Copy)]
pub struct SampledTrace<'a> {
    pub start: f64,
    pub interval: f64,
    pub values: &'a [f64],
}

impl<'a> SampledTrace<'a> {
    pub fn new(start: f64, interval: f64, values: &'a [f64]) -> Self {
        Self {
            start,
            interval,
            values,
        }
    }
}

/// One event per contiguous run of samples strictly above `threshold`.
///
/// The spike time is the location of the largest sample of the run, refined
/// by fitting a parabola through it and its two neighbours.
pub fn detect_spikes(
    trace: SampledTrace<'_>,
    threshold: f64,
    neuron_id: usize,
) -> Result<Vec<SpikeEvent>> {
    let y = trace.values;
    if y.len() < 3 {
        return Err(Error::EmptyTrace(y.len()));
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "detection threshold must be > 0, got {threshold}"
        )));
    }
    if !(trace.interval > 0.0) {
        return Err(Error::InvalidParameter("sampling interval must be > 0".into()));
    }

    let mut events = Vec::new();
    let mut i = 0;
    while i < y.len() {
        if y[i] <= threshold {
            i += 1;
            continue;
        }
        let begin = i;
        let mut peak = i;
        while i < y.len() && y[i] > threshold {
            if y[i] > y[peak] {
                peak = i;
            }
            i += 1;
        }
        debug_assert!(peak >= begin);
        let (offset, v_peak) = refine_peak(y, peak);
        events.push(SpikeEvent {
            neuron_id,
            t_spike: trace.start + (peak as f64 + offset) * trace.interval,
            v_peak,
        });
    }
    Ok(events)
}

/// Sub-sample offset in [-0.5, 0.5] and height of the parabola through
/// `y[k-1], y[k], y[k+1]`. Falls back to the raw sample at the boundaries.
fn refine_peak(y: &[f64], k: usize) -> (f64, f64) {
    if k == 0 || k + 1 >= y.len() {
        return (0.0, y[k]);
    }
    let (a, b, c) = (y[k - 1], y[k], y[k + 1]);
    let curvature = a - 2.0 * b + c;
    if curvature >= 0.0 {
        return (0.0, b);
    }
    let offset = (0.5 * (a - c) / curvature).clamp(-0.5, 0.5);
    let height = b - 0.25 * (a - c) * offset;
    (offset, height.max(b))
}

/// First spike time of a list, if any.
pub fn first_spike_time(events: &[SpikeEvent]) -> Option<f64> {
    events.first().map(|e| e.t_spike)
}
