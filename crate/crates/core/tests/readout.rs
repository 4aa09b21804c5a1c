mod common;

use std::sync::OnceLock;

use afm_span::network::{simulate, CouplingMatrix, DriveWaveform, SimConfig};
use afm_span::patterns::{builtin_symbol, SymbolGrid};
use afm_span::readout::{calibrate_weak_coupling, clock_drive, MultiSpanNetwork, TrainedChannel};
use afm_span::span::SpanNetwork;
use afm_span::units::PS;
use afm_span::Error;

fn kappa_weak() -> f64 {
    static K: OnceLock<f64> = OnceLock::new();
    *K.get_or_init(|| calibrate_weak_coupling(&common::calibration(), &SimConfig::default(), 10.0 * PS).unwrap())
}

/// Output spikes of a neuron fed by stimulated sources fired at `offsets`.
fn fan_in(kappa: f64, offsets: &[f64]) -> usize {
    let cal = common::calibration();
    let n = offsets.len() + 1;
    let mut c = CouplingMatrix::zeros(n);
    let mut d: Vec<DriveWaveform> = offsets.iter().map(|&t| cal.stimulus.at(t)).collect();
    d.push(DriveWaveform::silent());
    for k in 0..offsets.len() {
        c.set(n - 1, k, kappa).unwrap();
    }
    let r = simulate(&vec![cal.params; n], &c, &d, &common::sim().with_t_end(500.0 * PS)).unwrap();
    r.spike_count(n - 1)
}

/// Uniform weights on the black pixels of `symbol` that put its SPAN spike at `t`.
fn weights_spiking_at(symbol: &SymbolGrid, t: f64) -> Vec<f64> {
    let net = SpanNetwork::new(common::calibration(), &SimConfig::default(), 300.0 * PS);
    let spike = |w: f64| {
        let ws: Vec<f64> = (0..25).map(|k| if symbol.is_black(k) { w } else { 0.0 }).collect();
        net.respond(&ws, symbol).unwrap().output_time.unwrap_or(f64::INFINITY)
    };
    let (mut lo, mut hi) = (1e-4, 1e-2);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if spike(mid) > t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0..25).map(|k| if symbol.is_black(k) { hi } else { 0.0 }).collect()
}

fn readout(channels: Vec<TrainedChannel>) -> MultiSpanNetwork {
    let cal = common::calibration();
    let base = SimConfig::default();
    let clock = clock_drive(&cal, &base, 100.0 * PS).unwrap();
    MultiSpanNetwork::new(cal, base.with_t_end(400.0 * PS), channels, clock, kappa_weak(), 100.0 * PS).unwrap()
}

#[test]
fn single_spike_at_weak_coupling_is_silent() {
    let k = kappa_weak();
    assert_eq!(fan_in(k, &[0.0]), 0);
    assert_eq!(fan_in(k, &[0.0, 50.0 * PS]), 0);

    let o = builtin_symbol("O").unwrap();
    let mut net = readout(vec![TrainedChannel { label: "O".into(), weights: weights_spiking_at(&o, 100.0 * PS) }]);
    net.clock_drive = DriveWaveform::silent();
    let run = net.run(&o).unwrap();
    assert!(run.span_times[0].is_some());
    assert_eq!(run.output_spikes, vec![0]);
}

#[test]
fn clock_fires_on_target_regardless_of_input() {
    let o = builtin_symbol("O").unwrap();
    let net = readout(vec![TrainedChannel { label: "O".into(), weights: weights_spiking_at(&o, 100.0 * PS) }]);
    let mut times = Vec::new();
    for s in ["O", "Z", "X", "T"] {
        times.push(net.run(&builtin_symbol(s).unwrap()).unwrap().clock_time.unwrap());
    }
    times.push(net.run(&SymbolGrid::blank("blank")).unwrap().clock_time.unwrap());
    for t in &times {
        assert!((t - 100.0 * PS).abs() < 0.1 * PS, "{t}");
        assert!((t - times[0]).abs() < 1.0 * PS);
    }
}

#[test]
fn only_coincident_channel_passes() {
    let o = builtin_symbol("O").unwrap();
    let net = readout(vec![
        TrainedChannel { label: "on_time".into(), weights: weights_spiking_at(&o, 100.0 * PS) },
        TrainedChannel { label: "early".into(), weights: weights_spiking_at(&o, 60.0 * PS) },
    ]);
    let run = net.run(&o).unwrap();
    assert_eq!(run.output_spikes, vec![1, 0]);
    assert_eq!(net.classify(&o).unwrap().as_deref(), Some("on_time"));
    assert_eq!(net.classify(&SymbolGrid::blank("blank")).unwrap(), None);
}

#[test]
fn two_matching_channels_are_ambiguous() {
    let o = builtin_symbol("O").unwrap();
    let w = weights_spiking_at(&o, 100.0 * PS);
    let net = readout(vec![
        TrainedChannel { label: "a".into(), weights: w.clone() },
        TrainedChannel { label: "b".into(), weights: w },
    ]);
    assert!(matches!(net.classify(&o), Err(Error::Ambiguous(2))));
}

#[test]
fn network_description_serialises() {
    let o = builtin_symbol("O").unwrap();
    let net = readout(vec![TrainedChannel { label: "O".into(), weights: weights_spiking_at(&o, 100.0 * PS) }]);
    let text = net.to_text();
    assert!(text.contains("kappa_weak"));
    assert!(text.contains("t_start_ps"));
    assert!(text.contains("[[span]]"));
}
