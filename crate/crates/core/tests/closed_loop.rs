use proptest::prelude::*;
use sirmpc::analysis::{detect_events, herd_immunity};
use sirmpc::integrator::{dense_trajectory, InputSchedule, SamplingConfig};
use sirmpc::model::ModelParams;
use sirmpc::mpc::{closed_loop, ClosedLoopRun, MpcConfig};

fn params() -> ModelParams {
    ModelParams::new(3.0, 0.85, 1e-3).unwrap()
}

fn run(i_max: Option<f64>) -> ClosedLoopRun {
    let cfg = MpcConfig {
        i_max,
        ..MpcConfig::default()
    };
    closed_loop(&params(), &cfg, 2.0, 30.0).unwrap()
}

fn assert_closed_loop_properties(run: &ClosedLoopRun, i_max: Option<f64>) {
    let qss = MpcConfig::default().qss_threshold;
    if let Some(cap) = i_max {
        assert!(
            run.max_infected() <= cap + 2e-3,
            "cap {cap}: max I {}",
            run.max_infected()
        );
    }
    let events = detect_events(&run.trajectory, run.release_time, qss);
    assert!(events.second_wave.is_none(), "{:?}", events.second_wave);
    assert!(run.trajectory.max_conservation_error() <= 1e-10);
    assert!(run.trajectory.is_monotone());
}

#[test]
fn cap_sweep_properties() {
    let p = params();
    let schedule = InputSchedule::constant(&p, 0.0).unwrap();
    let free = dense_trajectory(
        &p.initial_state(),
        &schedule,
        &SamplingConfig::default(),
        30.0,
    )
    .unwrap();
    let free_s = free.terminal_state().unwrap().s();
    let s_star = herd_immunity(3.0).unwrap();

    let mut last_duration = 0.0;
    for cap in [None, Some(0.15), Some(0.10), Some(0.05)] {
        let r = run(cap);
        assert_closed_loop_properties(&r, cap);
        let s = r.terminal_state().s();
        assert!(s >= free_s, "{s} < uncontrolled {free_s}");
        assert!((s - s_star).abs() <= 0.02, "cap {cap:?}: terminal S {s}");
        assert!(
            r.distancing_duration >= last_duration,
            "cap {cap:?}: {} < {last_duration}",
            r.distancing_duration
        );
        last_duration = r.distancing_duration;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// I(2) is about 0.049 here, so every cap starts out satisfied.
    #[test]
    fn capped_runs_respect_the_cap(cap in 0.05f64..0.25, horizon in 3usize..6) {
        let cfg = MpcConfig { horizon, i_max: Some(cap), ..MpcConfig::default() };
        let r = closed_loop(&params(), &cfg, 2.0, 30.0).unwrap();
        prop_assert!(r.max_infected() <= cap + 2e-3, "cap {} max {}", cap, r.max_infected());
        prop_assert!(r.trajectory.is_monotone());
        for step in &r.steps {
            let leaves = (cfg.grid.len() as u64).pow(horizon as u32);
            prop_assert!(step.nodes_explored <= leaves);
        }
    }
}
