use sirmpc::model::ModelParams;
use sirmpc::mpc::{closed_loop, MpcConfig};

fn main() -> sirmpc::Result<()> {
    let params = ModelParams::new(3.0, 0.85, 1e-3)?;
    println!(
        "{:>6} {:>9} {:>7} {:>7} {:>7}",
        "i_max", "duration", "herd", "max I", "S_end"
    );
    for cap in [
        None,
        Some(0.2),
        Some(0.15),
        Some(0.1),
        Some(0.075),
        Some(0.05),
    ] {
        let cfg = MpcConfig {
            i_max: cap,
            ..MpcConfig::default()
        };
        let run = closed_loop(&params, &cfg, 2.0, 30.0)?;
        println!(
            "{:>6} {:>9.1} {:>7} {:>7.4} {:>7.4}",
            cap.map_or("none".to_string(), |c| c.to_string()),
            run.distancing_duration,
            run.herd_immunity_time
                .map_or("-".to_string(), |h| format!("{h:.1}")),
            run.max_infected(),
            run.terminal_state().s()
        );
    }
    Ok(())
}
