//! Closed-loop simulation behavior on the worked example.

mod common;

use distcomp::batch::{gain_sweep_configs, run_batch, run_batch_sequential};
use distcomp::golden;
use distcomp::model::{DisturbanceChannel, FilterPair, HarmonicComponent};
use distcomp::sim::{run_scenario, simulate, synthesize_scenario, DIVERGENCE_LIMIT};
use distcomp::{load_scenario, Algorithm, Error, ScenarioConfig};

use common::expm;

fn base(algorithm: Algorithm, duration: f64) -> ScenarioConfig {
    let mut cfg = load_scenario("worked_example").unwrap();
    cfg.algorithm = algorithm;
    cfg.duration = duration;
    if algorithm == Algorithm::Gradient {
        cfg.adapt_gain = 5.0;
    }
    cfg
}

fn scaled_channels(scale: f64) -> Vec<DisturbanceChannel> {
    golden::channels()
        .iter()
        .map(|ch| {
            let comps = ch
                .components()
                .iter()
                .map(|c| HarmonicComponent { amplitude: c.amplitude * scale, ..*c })
                .collect();
            DisturbanceChannel::new(comps, ch.bias() * scale).unwrap()
        })
        .collect()
}

#[test]
fn open_loop_without_disturbance_follows_free_response() {
    // Zero-amplitude harmonics keep the generator order; filters are order two.
    let mut cfg = base(Algorithm::OpenLoop, 20.0);
    cfg.channels = vec![
        DisturbanceChannel::new(vec![HarmonicComponent { amplitude: 0.0, frequency: 2.0, phase: 0.0 }], 0.0).unwrap(),
        DisturbanceChannel::new(vec![HarmonicComponent { amplitude: 0.0, frequency: 3.0, phase: 0.0 }], 0.0).unwrap(),
    ];
    let pair = golden::filter_pairs()[0].clone();
    cfg.filters = vec![pair.clone(), FilterPair::new(pair.g().clone(), pair.l().clone()).unwrap()];
    let (trace, metrics) = run_scenario(&cfg).unwrap();
    for t in [0.5, 1.0, 2.0, 5.0, 10.0] {
        let s = trace.at(t).unwrap();
        let want = cfg.plant.c() * expm(&(cfg.plant.a() * s.t)) * cfg.plant.x0();
        assert!((&s.y - want).amax() < 1e-9, "t = {t}");
    }
    assert!(metrics.terminal_y_norm <= 1e-6);
}

#[test]
fn open_loop_with_disturbance_does_not_converge() {
    let (_, metrics) = run_scenario(&base(Algorithm::OpenLoop, 30.0)).unwrap();
    assert!(metrics.settling_time.is_none());
    assert!(metrics.terminal_y_norm > 0.5);
    assert_eq!(metrics.peak_u_norm, 0.0);
}

#[test]
fn ideal_feedback_rejects_disturbance() {
    let (trace, metrics) = run_scenario(&base(Algorithm::Ideal, 30.0)).unwrap();
    assert!(metrics.settling_time.is_some());
    assert!(metrics.terminal_y_norm < 1e-6);
    assert!(trace.samples.iter().all(|s| s.psi_hat.iter().all(|v| *v == 0.0)));
}

#[test]
fn estimation_error_ignores_disturbance_amplitude() {
    let mut a = base(Algorithm::Mre, 10.0);
    let mut b = a.clone();
    // Larger amplitudes stiffen the memory matrix beyond what RK4 at this step tolerates.
    a.channels = scaled_channels(0.5);
    b.channels = scaled_channels(1.0);
    let (ta, _) = run_scenario(&a).unwrap();
    let (tb, _) = run_scenario(&b).unwrap();
    for (sa, sb) in ta.samples.iter().zip(&tb.samples) {
        let ea = &sa.x - &sa.x_hat;
        let eb = &sb.x - &sb.x_hat;
        assert!((ea - eb).amax() < 1e-8, "t = {}", sa.t);
    }
}

#[test]
fn disturbance_reconstruction_converges() {
    let (trace, _) = run_scenario(&base(Algorithm::Mre, 20.0)).unwrap();
    let last = trace.last().unwrap();
    assert!((&last.f - &last.f_hat).amax() < 1e-4);
}

#[test]
fn recorded_grid_is_uniform() {
    let mut cfg = base(Algorithm::Gradient, 3.0);
    cfg.stride = 7;
    let (trace, _) = run_scenario(&cfg).unwrap();
    let times = trace.times();
    let dt = times[1] - times[0];
    assert!((dt - 7e-3).abs() < 1e-12);
    for w in times.windows(2) {
        assert!((w[1] - w[0] - dt).abs() < 1e-9);
    }
    assert_eq!(times.len(), 3000 / 7 + 1);
}

#[test]
fn excessive_gain_reports_divergence_with_partial_trace() {
    let mut cfg = base(Algorithm::Gradient, 20.0);
    cfg.adapt_gain = 1e4;
    match run_scenario(&cfg) {
        Err(Error::Diverged { t, limit, partial }) => {
            assert_eq!(limit, DIVERGENCE_LIMIT);
            assert!(t < 20.0);
            assert!(!partial.samples.is_empty());
        }
        Err(Error::NonFinite { .. }) => {}
        other => panic!("expected divergence, got {:?}", other.map(|(_, m)| m)),
    }
}

#[test]
fn invalid_run_parameters_rejected() {
    let mut cfg = base(Algorithm::Mre, 1.0);
    cfg.step = 0.02;
    assert!(matches!(run_scenario(&cfg), Err(Error::Config(_))));
    let mut cfg = base(Algorithm::Mre, 1.0);
    cfg.stride = 0;
    assert!(matches!(run_scenario(&cfg), Err(Error::Config(_))));
    let mut cfg = base(Algorithm::Mre, 1.0);
    cfg.duration = 0.0;
    assert!(matches!(run_scenario(&cfg), Err(Error::Config(_))));
    let mut cfg = base(Algorithm::Mre, 1.0);
    cfg.tau = -1.0;
    assert!(run_scenario(&cfg).is_err());
}

#[test]
fn harmonic_bound_enforced() {
    let mut cfg = base(Algorithm::Mre, 1.0);
    cfg.max_harmonics = Some(0);
    assert!(matches!(run_scenario(&cfg), Err(Error::Assumption { .. })));
}

#[test]
fn simulation_reuses_synthesis() {
    let cfg = base(Algorithm::Mre, 2.0);
    let syn = synthesize_scenario(&cfg).unwrap();
    let direct = simulate(&cfg, &syn).unwrap();
    let (full, _) = run_scenario(&cfg).unwrap();
    assert_eq!(direct, full);
    assert_eq!(direct.terminal_state.len(), 3 + 3 + 5 + 5 + 2 * 3 * 5 + 3 + 10 + 10 + 100);
}

#[test]
fn parallel_batch_matches_sequential() {
    let cfg = base(Algorithm::Mre, 2.0);
    let configs = gain_sweep_configs(&cfg, &[5.0, 10.0, 25.0, 40.0]);
    let par: Vec<_> = run_batch(&configs).into_iter().map(Result::unwrap).collect();
    let seq: Vec<_> = run_batch_sequential(&configs).into_iter().map(Result::unwrap).collect();
    assert_eq!(par, seq);
}
