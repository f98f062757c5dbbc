//! One distancing interval on [2, 20] at several strengths. Strong
//! distancing postpones the epidemic into a second wave; the quasi-optimal
//! strength lands on the herd immunity threshold.

use sirmpc::analysis::{detect_events, herd_immunity, DEFAULT_QSS_THRESHOLD};
use sirmpc::integrator::SamplingConfig;
use sirmpc::model::ModelParams;
use sirmpc::single_interval::{
    optimal_ri, released_final_size, simulate_single_interval, SingleInterval,
};

fn main() -> sirmpc::Result<()> {
    let eps = std::env::args()
        .nth(1)
        .map_or(Ok(5e-3), |a| a.parse())
        .expect("epsilon");
    let params = ModelParams::new(2.5, 0.85, eps)?;
    let cfg = SamplingConfig::default();
    let r_op = optimal_ri(&params, 2.0, &cfg)?.r_i;

    println!("epsilon {eps}, S* = {}", herd_immunity(params.r0())?);
    println!(
        "{:>8} {:>10} {:>12} {:>14}",
        "R_i", "S(60)", "second wave", "S_inf(hold 60)"
    );
    for r_i in [0.5, 1.0, r_op, 1.9, 2.5] {
        let iv = SingleInterval::new(2.0, 20.0, r_i)?;
        let traj = simulate_single_interval(&params, &iv, &cfg, 60.0)?;
        let wave = detect_events(&traj, Some(iv.t_end()), DEFAULT_QSS_THRESHOLD).second_wave;
        let long = released_final_size(&params, &SingleInterval::new(2.0, 60.0, r_i)?, &cfg)?;
        println!(
            "{r_i:>8.4} {:>10.4} {:>12} {long:>14.5}",
            traj.terminal_state().unwrap().s(),
            wave.map_or("none".to_string(), |w| format!("tau {:.1}", w.tau)),
        );
    }
    Ok(())
}
