//! Run an experiment from a TOML file (or a small built-in one) and write
//! the CSV tables.
//!
//! cargo run --release --example run_experiment -- configs/robustness.toml out/

use std::path::PathBuf;

use anosov_flex::experiment::{run, write_outputs, ExperimentConfig};

const BUILT_IN: &str = r#"
[matrix]
preset = "t3"

[params]
n = [12]
nu = 0.2
epsilon = [0.0, 0.001, 0.01]

[run]
mode = "robustness"
iterations = 20000
orbits = 100
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let text = match args.next() {
        Some(path) => std::fs::read_to_string(path)?,
        None => BUILT_IN.to_string(),
    };
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));
    let cfg = ExperimentConfig::from_toml_str(&text, None)?;
    let report = run(&cfg)?;
    print!("{}", report.summary());
    for f in write_outputs(&out, &report, false)? {
        println!("  {}", out.join(f).display());
    }
    std::process::exit(report.outcome.exit_code());
}
