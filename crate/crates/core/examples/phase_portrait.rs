use sirmpc::analysis::herd_immunity;
use sirmpc::integrator::SamplingConfig;
use sirmpc::model::{EpidemicState, ModelParams};
use sirmpc::scenario::phase_portrait;

fn main() -> sirmpc::Result<()> {
    let params = ModelParams::new(2.5, 0.85, 1e-3)?;
    let starts: Vec<EpidemicState> = [0.999999, 0.9, 0.7, 0.5, 0.3, 0.1]
        .into_iter()
        .map(|s| EpidemicState::from_si(s, 1.0 - s))
        .collect::<Result<_, _>>()?;
    let trajectories = phase_portrait(&params, &starts, &SamplingConfig::default(), 60.0)?;

    println!("S* = {}", herd_immunity(params.r0())?);
    println!(
        "{:>10} {:>10} -> {:>10} {:>10}",
        "S0", "I0", "S_end", "I_end"
    );
    for (x0, traj) in starts.iter().zip(&trajectories) {
        let end = traj.terminal_state().unwrap();
        println!(
            "{:>10.6} {:>10.6} -> {:>10.6} {:>10.2e}",
            x0.s(),
            x0.i(),
            end.s(),
            end.i()
        );
    }
    Ok(())
}
