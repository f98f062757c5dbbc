//! Closed-form quantities for an outbreak at R = 2.5, checked against a
//! dense simulation.

use sirmpc::analysis::{
    average_infection_time, classify_equilibrium, herd_immunity, peak_prevalence, s_infinity,
    DEFAULT_QSS_THRESHOLD,
};
use sirmpc::integrator::{dense_trajectory, InputSchedule, SamplingConfig};
use sirmpc::model::ModelParams;

fn main() -> sirmpc::Result<()> {
    let params = ModelParams::new(2.5, 0.85, 1e-3)?;
    let x0 = params.initial_state();
    let r = params.r0();

    let s_star = herd_immunity(r)?;
    let final_s = s_infinity(x0.s(), x0.i(), r)?;
    let peak = peak_prevalence(x0.s(), x0.i(), r)?;

    let schedule = InputSchedule::constant(&params, 0.0)?;
    let traj = dense_trajectory(&x0, &schedule, &SamplingConfig::default(), 60.0)?;
    let (t_peak, i_peak) = traj.max_infected().expect("non-empty");

    println!("herd immunity threshold S*      {s_star:.6}");
    println!(
        "final susceptible S_inf         {final_s:.6}  (simulated {:.6})",
        traj.terminal_state().unwrap().s()
    );
    println!(
        "peak prevalence                 {:.6}  (simulated {i_peak:.6} at tau {t_peak:.2})",
        peak.value
    );
    println!(
        "mean infection time             {:.3}",
        average_infection_time(&traj, DEFAULT_QSS_THRESHOLD)?
    );

    for s_bar in [0.2, 0.4, 0.6] {
        let c = classify_equilibrium(s_bar, r)?;
        println!("equilibrium S = {s_bar:.1}: {:?}", c.stability);
    }
    Ok(())
}
