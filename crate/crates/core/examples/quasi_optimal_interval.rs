use sirmpc::analysis::DEFAULT_QSS_THRESHOLD;
use sirmpc::integrator::SamplingConfig;
use sirmpc::model::ModelParams;
use sirmpc::single_interval::{quasi_optimal_interval, simulate_single_interval};

fn main() -> sirmpc::Result<()> {
    let params = ModelParams::new(2.5, 0.85, 5e-3)?;
    let cfg = SamplingConfig::default();
    for t_start in [0.0, 1.0, 2.0, 3.0] {
        let (opt, iv) =
            quasi_optimal_interval(&params, t_start, &cfg, DEFAULT_QSS_THRESHOLD, 200.0)?;
        let traj = simulate_single_interval(&params, &iv, &cfg, iv.t_end() + 40.0)?;
        println!(
            "start {t_start:.1}: R_i^op = {:.4} (realizable {}), release at {:.2}, terminal S = {:.5}",
            opt.r_i,
            opt.realizable,
            iv.t_end(),
            traj.terminal_state().unwrap().s()
        );
    }
    Ok(())
}
