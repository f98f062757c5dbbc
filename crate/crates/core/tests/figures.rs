use sirmpc::analysis::{herd_immunity, DEFAULT_QSS_THRESHOLD};
use sirmpc::integrator::SamplingConfig;
use sirmpc::model::{EpidemicState, ModelParams};
use sirmpc::scenario::{
    execute, phase_portrait, s_infinity_sweep, ScenarioConfig, ScenarioOutcome,
};

fn r25() -> ModelParams {
    ModelParams::new(2.5, 0.85, 1e-3).unwrap()
}

#[test]
fn portrait_settles_in_the_stable_set() {
    let cfg = ScenarioConfig::from_preset("fig1_portrait").unwrap();
    let ScenarioOutcome::Portrait {
        trajectories,
        s_star,
        ..
    } = execute(&cfg).unwrap()
    else {
        panic!("not a portrait")
    };
    assert!(trajectories.len() > 5);
    for t in &trajectories {
        let x = t.terminal_state().unwrap();
        assert!(x.i() < DEFAULT_QSS_THRESHOLD, "I = {}", x.i());
        assert!(x.s() <= s_star + 5e-3, "S = {}", x.s());
    }
}

#[test]
fn portrait_examples() {
    let starts = [
        EpidemicState::new(0.2, 0.8, 0.0).unwrap(),
        EpidemicState::new(1.0 - 1e-6, 1e-6, 0.0).unwrap(),
        EpidemicState::new(0.1, 0.0, 0.9).unwrap(),
    ];
    let out = phase_portrait(&r25(), &starts, &SamplingConfig::default(), 60.0).unwrap();
    let end: Vec<EpidemicState> = out.iter().map(|t| t.terminal_state().unwrap()).collect();
    assert!(end[0].s() > 0.0 && end[0].s() <= 0.2 && end[0].i() < 1e-6);
    assert!(end[1].s() < 0.4);
    assert_eq!(end[2], starts[2]);
}

#[test]
fn sweep_rows_follow_the_final_size_shape() {
    let s_star = herd_immunity(2.5).unwrap();
    let low: Vec<f64> = (0..=40).map(|k| s_star * k as f64 / 40.0).collect();
    let g = s_infinity_sweep(2.5, &[0.0], &low).unwrap();
    for (v, s0) in g.values[0].iter().zip(&low) {
        assert_eq!(v.unwrap(), *s0);
    }

    let high: Vec<f64> = (0..=55)
        .map(|k| 0.45 + 0.01 * k as f64)
        .filter(|s| *s <= 0.999)
        .collect();
    let row = &s_infinity_sweep(2.5, &[1e-3], &high).unwrap().values[0];
    for w in row.windows(2) {
        assert!(w[1].unwrap() < w[0].unwrap());
    }
    assert!(row.iter().all(|v| v.unwrap() < 0.4));

    let mid: Vec<f64> = (0..=30).map(|k| 0.05 + 0.01 * k as f64).collect();
    let row = &s_infinity_sweep(2.5, &[1e-3], &mid).unwrap().values[0];
    for w in row.windows(2) {
        assert!(w[1].unwrap() > w[0].unwrap());
    }
}

#[test]
fn fig2_preset_rows_peak_below_the_threshold() {
    let cfg = ScenarioConfig::from_preset("fig2_sweep").unwrap();
    let ScenarioOutcome::Sweep { grid, s_star } = execute(&cfg).unwrap() else {
        panic!("not a sweep")
    };
    assert_eq!(grid.i0.len(), 3);
    for row in &grid.values {
        let best = row.iter().flatten().copied().fold(0.0, f64::max);
        assert!(best <= s_star + 1e-12);
    }
}
