//! Command-line front end: `run`, `check` and `demo`.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a
//! run fails.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::environment::RewardKind;
use crate::error::Error;
use crate::harness::{demo_config, run_and_write, Algorithm, ExperimentConfig, Summary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "duelay",
    version,
    about = "Dueling bandits with delayed, censored preference feedback"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every variant and seed of a configuration and write traces.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `run.output` from the config, then `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Validate a configuration and print the derived constants.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a bundled demo configuration.
    Demo {
        #[arg(long, value_enum)]
        setting: Setting,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Setting {
    Linear,
    Quadratic,
    Cubic,
}

impl From<Setting> for RewardKind {
    fn from(s: Setting) -> Self {
        match s {
            Setting::Linear => RewardKind::Linear,
            Setting::Quadratic => RewardKind::Quadratic,
            Setting::Cubic => RewardKind::Cubic,
        }
    }
}

fn load_checked(path: &Path) -> Result<ExperimentConfig, Error> {
    let cfg = ExperimentConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(summary: &Summary, out: &Path) {
    println!(
        "{} / {}: T = {}, {} seeds, rho = {:.6}",
        summary.algorithm,
        summary.reward,
        summary.horizon,
        summary.seeds.len(),
        summary.rho
    );
    for v in &summary.variants {
        println!(
            "  {:<10} mean R_T = {:.4} (stderr {:.4})",
            v.variant.name(),
            v.final_mean,
            v.final_stderr
        );
    }
    println!("wrote {}", out.display());
}

fn execute(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> i32 {
    match run_and_write(cfg, out, jobs) {
        Ok(summary) => {
            print_summary(&summary, out);
            EXIT_OK
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn check(path: &Path) -> i32 {
    let cfg = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let rho = match cfg.delay_model() {
        Ok(d) => d.rho(),
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    println!("rho = {rho:.12}");
    match cfg.run.algorithm {
        Algorithm::Linear => {
            let kappa = cfg.linear_kappa();
            let l = cfg.linear.feature_bound;
            let floor = kappa * l * l;
            println!("kappa_mu = {kappa:.12}");
            println!(
                "lambda = {} {} kappa_mu * L^2 = {floor:.12}",
                cfg.linear.lambda,
                if cfg.linear.lambda > floor { ">" } else { "<=" }
            );
        }
        Algorithm::Neural => {
            println!("kappa_mu = {:.12}", cfg.neural_kappa());
            println!("lambda = {} (must be > 0)", cfg.neural.lambda);
        }
    }
    match cfg.validate() {
        Ok(()) => {
            println!("ok");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run { config, out, jobs } => {
            let cfg = match load_checked(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_CONFIG;
                }
            };
            let out = out
                .or_else(|| cfg.run.output.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            execute(&cfg, &out, jobs)
        }
        Command::Check { config } => check(&config),
        Command::Demo { setting, out, jobs } => execute(&demo_config(setting.into()), &out, jobs),
    }
}
