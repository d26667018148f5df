//! Loading, validating and re-serializing experiment configurations.

use corrlab::lab::config::{bundled, BUNDLED};
use corrlab::lab::ExperimentConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (name, _) in BUNDLED {
        let cfg = bundled(name).expect("bundled configuration");
        let text = cfg.to_toml_string();
        let back = ExperimentConfig::from_toml_str(&text)?;
        println!(
            "{name}: {} representation(s), d = {}, round trip {}",
            cfg.representations.len(),
            cfg.r.len(),
            if back == cfg { "exact" } else { "differs" }
        );
    }
    match ExperimentConfig::from_toml_str("name = \"broken\"\nmax_word_length = 4\n") {
        Ok(_) => println!("unexpectedly valid"),
        Err(e) => println!("incomplete file rejected: {e}"),
    }
    Ok(())
}
