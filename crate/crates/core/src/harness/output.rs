//! `traces.csv` and `summary.json`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, RegretTrace};
use crate::error::{Error, Result};
use crate::policy::Variant;

pub const CSV_HEADER: &str = "algo,variant,seed,t,inst_regret,cum_regret";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    /// Mean of `R_T` over seeds.
    pub final_mean: f64,
    /// Standard error of `R_T` (sample standard deviation over `√n`).
    pub final_stderr: f64,
    /// `R_T` per seed, in ascending seed order.
    pub final_regrets: Vec<f64>,
    /// Mean `R_t` for `t = 1..=T`.
    pub mean_curve: Vec<f64>,
    pub stderr_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: String,
    pub reward: String,
    pub horizon: usize,
    pub rho: f64,
    pub seeds: Vec<u64>,
    pub variants: Vec<VariantSummary>,
}

impl Summary {
    pub fn variant(&self, v: Variant) -> Option<&VariantSummary> {
        self.variants.iter().find(|s| s.variant == v)
    }
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregates traces per variant. Seeds are processed in ascending order,
/// so the result does not depend on how the traces were ordered.
pub fn summarize(config: &ExperimentConfig, traces: &[RegretTrace]) -> Summary {
    let mut seeds: Vec<u64> = traces.iter().map(|t| t.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let variants = config
        .run
        .variants
        .iter()
        .map(|&v| {
            let mut runs: Vec<&RegretTrace> = traces.iter().filter(|t| t.variant == v).collect();
            runs.sort_by_key(|t| t.seed);
            let horizon = runs.iter().map(|t| t.horizon()).min().unwrap_or(0);
            let (mean_curve, stderr_curve) = (0..horizon)
                .map(|i| mean_stderr(&runs.iter().map(|t| t.cumulative[i]).collect::<Vec<_>>()))
                .unzip();
            let final_regrets: Vec<f64> = runs.iter().map(|t| t.final_regret()).collect();
            let (final_mean, final_stderr) = mean_stderr(&final_regrets);
            VariantSummary {
                variant: v,
                final_mean,
                final_stderr,
                final_regrets,
                mean_curve,
                stderr_curve,
            }
        })
        .collect();
    Summary {
        algorithm: config.run.algorithm.name().to_string(),
        reward: config.environment.reward.name().to_string(),
        horizon: config.run.horizon,
        rho: config.delay_model().map(|d| d.rho()).unwrap_or(f64::NAN),
        seeds,
        variants,
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One row per (trace, round); floats carry 17 significant digits.
pub fn write_traces(traces: &[RegretTrace], path: &Path) -> Result<()> {
    let err = io_err(path);
    let mut w = BufWriter::new(File::create(path).map_err(&err)?);
    writeln!(w, "{CSV_HEADER}").map_err(&err)?;
    for trace in traces {
        for (i, (r, c)) in trace.instantaneous.iter().zip(&trace.cumulative).enumerate() {
            writeln!(
                w,
                "{},{},{},{},{:.16e},{:.16e}",
                trace.algorithm.name(),
                trace.variant,
                trace.seed,
                i + 1,
                r,
                c
            )
            .map_err(&err)?;
        }
    }
    w.flush().map_err(&err)
}

pub fn write_summary(summary: &Summary, path: &Path) -> Result<()> {
    let err = io_err(path);
    let text = serde_json::to_string_pretty(summary).expect("summary serializes");
    std::fs::write(path, text + "\n").map_err(&err)
}

/// Writes `traces.csv`, `summary.json` and the resolved `config.toml` into `dir`.
pub fn write_outputs(config: &ExperimentConfig, traces: &[RegretTrace], dir: &Path) -> Result<Summary> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_traces(traces, &dir.join("traces.csv"))?;
    let summary = summarize(config, traces);
    write_summary(&summary, &dir.join("summary.json"))?;
    let cfg_path = dir.join("config.toml");
    std::fs::write(&cfg_path, config.to_toml_string()).map_err(io_err(&cfg_path))?;
    Ok(summary)
}
