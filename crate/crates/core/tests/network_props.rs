mod common;

use afm_span::network::{chain_spikes, latency, simulate, CouplingMatrix, DriveWaveform, Pulse, KAPPA_0};
use afm_span::neuron::{equilibrium_angle, NeuronParams};
use afm_span::units::PS;
use proptest::prelude::*;

fn constant_drive(params: &NeuronParams, multiple_of_threshold: f64) -> DriveWaveform {
    // Total current = multiple × threshold, so the extra drive removes the bias share.
    DriveWaveform {
        pulses: vec![],
        baseline: multiple_of_threshold * params.threshold_current() - params.i_bias,
    }
}

#[test]
fn uncoupled_neurons_ignore_each_other() {
    let cal = common::calibration();
    let p = cal.params;
    let sim = common::sim().with_t_end(150.0 * PS);
    let alone = simulate(&[p], &CouplingMatrix::zeros(1), &[cal.stimulus.at(0.0)], &sim).unwrap();
    let drives = vec![cal.stimulus.at(0.0), DriveWaveform::silent(), cal.stimulus.at(20.0 * PS)];
    let trio = simulate(&[p; 3], &CouplingMatrix::zeros(3), &drives, &sim).unwrap();
    let rest = p.rest_state().phi;
    for (a, b) in alone.phi_traces[0].iter().zip(&trio.phi_traces[0]) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(trio.phi_traces[1].iter().all(|phi| (phi - rest).abs() < 1e-12));
    assert!(trio.spikes[1].is_empty());
    assert_eq!(trio.synaptic_op_count, 0);
}

#[test]
fn synaptic_ops_count_spikes_times_fanout() {
    let cal = common::calibration();
    let mut c = CouplingMatrix::zeros(4);
    // 0 feeds 1, 2 and 3 strongly; nothing else is coupled.
    for i in 1..4 {
        c.set(i, 0, 2.0 * KAPPA_0).unwrap();
    }
    let mut drives = vec![DriveWaveform::silent(); 4];
    drives[0] = cal.stimulus.at(0.0);
    let r = simulate(&[cal.params; 4], &c, &drives, &common::sim()).unwrap();
    assert_eq!(r.spike_count(0), 1);
    assert_eq!(r.synaptic_op_count, 3);
    let spikes_with_fanout: u64 = (0..4).map(|k| (r.spike_count(k) * c.outgoing_count(k)) as u64).sum();
    assert_eq!(r.synaptic_op_count, spikes_with_fanout);
}

#[test]
fn halving_the_step_moves_chain_spikes_by_less_than_a_tenth_ps() {
    let cal = common::calibration();
    let sim = common::sim();
    for kappa in [KAPPA_0, 1.5 * KAPPA_0] {
        let a = chain_spikes(&cal.params, kappa, &cal.stimulus, &sim).unwrap();
        let b = chain_spikes(&cal.params, kappa, &cal.stimulus, &sim.with_dt(0.5 * sim.dt)).unwrap();
        for k in 0..2 {
            assert_eq!(a.spike_count(k), b.spike_count(k));
            for (x, y) in a.spikes[k].iter().zip(&b.spikes[k]) {
                assert!((x.t_spike - y.t_spike).abs() < 0.1 * PS, "{} vs {}", x.t_spike, y.t_spike);
            }
        }
    }
}

#[test]
fn latency_falls_strictly_with_coupling() {
    let cal = common::calibration();
    let sim = common::sim().with_t_end(500.0 * PS);
    let (lo, hi) = (cal.kappa_cutoff, 2.0 * KAPPA_0);
    let lat: Vec<f64> = (0..10)
        .map(|i| latency(&cal.params, lo + (hi - lo) * i as f64 / 9.0, &cal.stimulus, &sim).unwrap())
        .collect();
    for w in lat.windows(2) {
        assert!(w[1] < w[0], "{lat:?}");
    }
}

#[test]
fn below_cutoff_the_chain_does_not_fire() {
    let cal = common::calibration();
    let sim = common::sim().with_t_end(500.0 * PS);
    let r = chain_spikes(&cal.params, 0.9 * cal.kappa_cutoff, &cal.stimulus, &sim).unwrap();
    assert_eq!(r.spike_count(0), 1);
    assert_eq!(r.spike_count(1), 0);
}

#[test]
fn static_threshold_is_bracketed() {
    let p = common::calibration().params;
    let sim = common::sim().with_t_end(400.0 * PS);
    let run = |m: f64| simulate(&[p], &CouplingMatrix::zeros(1), &[constant_drive(&p, m)], &sim).unwrap();
    let below = run(0.9);
    let max_phi = below.phi_traces[0].iter().cloned().fold(f64::MIN, f64::max);
    assert!(max_phi < std::f64::consts::FRAC_PI_4 + 1e-9);
    assert!(below.spikes[0].is_empty());
    let above = run(1.5);
    assert!(above.spike_count(0) >= 2, "1.5x threshold must keep rotating");
}

#[test]
fn subcritical_drive_settles_on_the_analytic_angle() {
    let p = NeuronParams::default();
    let sim = common::sim().with_t_end(2000.0 * PS);
    let r = simulate(&[p], &CouplingMatrix::zeros(1), &[constant_drive(&p, 0.4)], &sim).unwrap();
    let last = *r.phi_traces[0].last().unwrap();
    assert!((last - 0.5 * 0.4f64.asin()).abs() < 1e-3);
    assert!((last - equilibrium_angle(0.4 * 0.5 * p.omega_e, p.omega_e)).abs() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn relabelling_neurons_permutes_spike_times(
        k01 in 0.5f64..2.0,
        k12 in 0.5f64..2.0,
        k02 in 0.0f64..1.0,
        delay in 0.0f64..30.0,
        perm_idx in 0usize..6,
    ) {
        let cal = common::calibration();
        let sim = common::sim().with_t_end(200.0 * PS);
        let mut c = CouplingMatrix::zeros(3);
        c.set(1, 0, k01 * KAPPA_0).unwrap();
        c.set(2, 1, k12 * KAPPA_0).unwrap();
        c.set(2, 0, k02 * KAPPA_0).unwrap();
        let drives = vec![
            cal.stimulus.at(0.0),
            DriveWaveform::single(Pulse { t_start: delay * PS, duration: 2.0 * PS, amplitude: 1e-4 }),
            DriveWaveform::silent(),
        ];
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let perm = perms[perm_idx];
        let a = simulate(&[cal.params; 3], &c, &drives, &sim).unwrap();
        let pc = c.permuted(&perm).unwrap();
        // New neuron j is old neuron perm[j].
        let pd: Vec<DriveWaveform> = perm.iter().map(|&old| drives[old].clone()).collect();
        let b = simulate(&[cal.params; 3], &pc, &pd, &sim).unwrap();
        prop_assert_eq!(a.synaptic_op_count, b.synaptic_op_count);
        for (j, &old) in perm.iter().enumerate() {
            let (x, y) = (&a.spikes[old], &b.spikes[j]);
            prop_assert_eq!(x.len(), y.len());
            for (ex, ey) in x.iter().zip(y) {
                prop_assert!((ex.t_spike - ey.t_spike).abs() < 1e-3 * PS);
            }
        }
    }
}
