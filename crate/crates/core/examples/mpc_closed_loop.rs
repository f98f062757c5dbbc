//! Receding-horizon distancing from tau = 2. Pass a peak cap as the first
//! argument, e.g. `cargo run --example mpc_closed_loop -- 0.05`.

use sirmpc::model::ModelParams;
use sirmpc::mpc::{closed_loop, MpcConfig};

fn main() -> sirmpc::Result<()> {
    let i_max = std::env::args()
        .nth(1)
        .map(|a| a.parse::<f64>().expect("peak cap"));
    let params = ModelParams::new(3.0, 0.85, 1e-3)?;
    let cfg = MpcConfig {
        i_max,
        ..MpcConfig::default()
    };
    let run = closed_loop(&params, &cfg, 2.0, 30.0)?;

    println!("{:>6} {:>8} {:>8} {:>5}", "tau", "S", "I", "u");
    for step in &run.steps {
        println!(
            "{:>6.1} {:>8.4} {:>8.4} {:>5.2}",
            step.tau,
            step.state.s(),
            step.state.i(),
            step.u
        );
    }
    println!("distancing duration {:.1}", run.distancing_duration);
    println!("herd immunity at    {:?}", run.herd_immunity_time);
    println!("max I               {:.4}", run.max_infected());
    println!(
        "terminal S          {:.4} (S* = {:.4})",
        run.terminal_state().s(),
        run.s_star
    );
    Ok(())
}
