//! Runs every bundled scenario and writes its files under `target/presets/`.

use std::path::Path;

use sirmpc::scenario::{run_scenario, ScenarioConfig, PRESETS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = Path::new("target/presets");
    for (name, _) in PRESETS {
        let config = ScenarioConfig::from_preset(name)?;
        let files = run_scenario(&config, &root.join(name))?;
        println!(
            "{name:<20} {:<18} {} files",
            config.kind().name(),
            files.len()
        );
    }
    Ok(())
}
