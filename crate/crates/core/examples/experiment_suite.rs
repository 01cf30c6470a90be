//! Configuration-driven experiment: every variant over several seeds,
//! written as `traces.csv` and `summary.json`.
//!
//! cargo run --release --example experiment_suite -- [OUT_DIR]

use std::path::PathBuf;

use duelay::harness::{run_suite, write_outputs, ExperimentConfig};

const CONFIG: &str = r#"
[environment]
reward = "linear"
dim = 8
arms = 10

[delay]
kind = "geometric"
p = 0.3
threshold = 3

[run]
algorithm = "linear"
horizon = 400
seeds = [0, 1, 2, 3, 4, 5]

[linear]
lambda = 0.5
beta_scale = 0.05
"#;

fn main() -> duelay::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("duelay-suite"));
    let cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    cfg.validate()?;
    let traces = run_suite(&cfg, 2)?;
    let summary = write_outputs(&cfg, &traces, &out)?;
    for v in &summary.variants {
        println!(
            "{:<10} R_T = {:7.2} ± {:.2}",
            v.variant.name(),
            v.final_mean,
            v.final_stderr
        );
    }
    println!("outputs in {}", out.display());
    Ok(())
}
