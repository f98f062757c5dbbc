//! A single open-loop solve, compared across horizons.

use sirmpc::model::{EpidemicState, ModelParams};
use sirmpc::mpc::{solve, MpcConfig};

fn main() -> sirmpc::Result<()> {
    let params = ModelParams::new(3.0, 0.85, 1e-3)?;
    let x0 = EpidemicState::new(0.9, 0.05, 0.05)?;
    for horizon in [2, 4, 6, 8] {
        let cfg = MpcConfig {
            horizon,
            i_max: Some(0.1),
            ..MpcConfig::default()
        };
        let sol = solve(&x0, &params, &cfg)?;
        println!(
            "N = {horizon}: u = {:?}, cost {:.6}, feasible {}, leaves {} of {}",
            sol.input_sequence,
            sol.cost,
            sol.feasible,
            sol.nodes_explored,
            cfg.grid.len().pow(horizon as u32)
        );
    }
    Ok(())
}
