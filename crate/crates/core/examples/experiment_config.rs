//! Runs a small ensemble experiment from a TOML configuration, the same
//! path the command-line tool takes, and prints the summary as JSON.
//! Pass `--out DIR` to also write curves.csv and summary.json.
//!
//! cargo run --release --example experiment_config [-- --out results]

use hsb::experiment::{run_synthetic, ExperimentConfig};

const CONFIG: &str = r#"
horizon = 20000
seeds = [1, 2, 3]
presentations = 2
curve_stride = 5000

[environment]
kind = "sinusoidal"
phase = "stationary"

[[algorithms]]
algorithm = "hsb-bt"
depth = 4
regions = 3

[[algorithms]]
algorithm = "hsb-lg"
leaves = 8
regions = 3

[[algorithms]]
algorithm = "exp4-flat"
depth = 2

[[algorithms]]
algorithm = "sexp3"
depth = 4
"#;

fn main() -> hsb::Result<()> {
    let mut cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    let args: Vec<String> = std::env::args().collect();
    if let Some(i) = args.iter().position(|a| a == "--out") {
        cfg.output_dir = args.get(i + 1).map(Into::into);
    }
    let outcome = run_synthetic(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&outcome)?);
    Ok(())
}
