//! Seeded experiment runs and their persisted outputs.
//!
//! A run couples one policy with a synthetic environment and delay model
//! for `T` rounds and records the per-round regret. All randomness comes
//! from per-seed streams, so every variant sharing a seed faces identical
//! arm sets, delay draws and preference noise.

mod config;
mod output;

use std::path::Path;

use rayon::prelude::*;

use crate::delay::DelayModel;
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::linear_policy::LinearPolicy;
use crate::neural_policy::NeuralPolicy;
use crate::policy::{Duel, DuelOracle, DuelingPolicy, Outcome, Variant};
use crate::rng::{stream_rng, Stream};

pub use config::{
    demo_config, seed_offset, Algorithm, DelaySection, EnvironmentSection, ExperimentConfig, LinearSection,
    NeuralSection, RunSection, DEMO_CUBIC, DEMO_LINEAR, DEMO_QUADRATIC, SEED_OFFSET_VAR,
};
pub use output::{summarize, write_outputs, write_summary, write_traces, Summary, VariantSummary, CSV_HEADER};

/// Draws duel outcomes from an environment and a delay model. Round `t`
/// uses substream `t` of the seed's preference and delay streams.
#[derive(Debug, Clone)]
pub struct SyntheticDuels {
    env: Environment,
    delay: DelayModel,
    seed: u64,
}

impl SyntheticDuels {
    pub fn new(env: Environment, delay: DelayModel, seed: u64) -> Self {
        Self { env, delay, seed }
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn delay_model(&self) -> &DelayModel {
        &self.delay
    }
}

impl DuelOracle for SyntheticDuels {
    fn duel(&mut self, round: usize, first: &[f64], second: &[f64]) -> Result<Outcome> {
        let mut pref_rng = stream_rng(self.seed, Stream::Preference, round as u64);
        let preference = self.env.sample_preference(first, second, &mut pref_rng)?;
        let mut delay_rng = stream_rng(self.seed, Stream::Delay, round as u64);
        Ok(Outcome {
            preference,
            delay: self.delay.sample_delay(&mut delay_rng),
        })
    }
}

/// Regret of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub algorithm: Algorithm,
    pub variant: Variant,
    pub seed: u64,
    /// `r_t` for `t = 1..=T`.
    pub instantaneous: Vec<f64>,
    /// `R_t = Σ_{s≤t} r_s`.
    pub cumulative: Vec<f64>,
}

impl RegretTrace {
    pub fn new(algorithm: Algorithm, variant: Variant, seed: u64, instantaneous: Vec<f64>) -> Self {
        let cumulative = instantaneous
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect();
        Self {
            algorithm,
            variant,
            seed,
            instantaneous,
            cumulative,
        }
    }

    pub fn horizon(&self) -> usize {
        self.instantaneous.len()
    }

    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Plays `horizon` rounds of `policy`, calling `observe` after each round,
/// and returns the instantaneous regrets.
pub fn run_policy<P: DuelingPolicy>(
    policy: &mut P,
    env: &Environment,
    delay: DelayModel,
    seed: u64,
    horizon: usize,
    mut observe: impl FnMut(&P, &Duel, f64) -> Result<()>,
) -> Result<Vec<f64>> {
    let mut oracle = SyntheticDuels::new(env.clone(), delay, seed);
    let mut regrets = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let wrap = |e: Error| Error::Run {
            seed,
            round: t,
            source: Box::new(e),
        };
        let arms = env.draw_arms(t);
        let duel = policy.step(&arms, &mut oracle).map_err(wrap)?;
        let r = env.instantaneous_regret(&arms, duel.first, duel.second).map_err(wrap)?;
        observe(policy, &duel, r).map_err(wrap)?;
        regrets.push(r);
    }
    Ok(regrets)
}

/// The environment a configuration induces for `seed`.
pub fn environment_for(config: &ExperimentConfig, seed: u64) -> Result<Environment> {
    let e = &config.environment;
    Environment::new(e.reward, e.dim, e.arms, seed)
}

/// Runs one variant on one seed.
pub fn run_single(config: &ExperimentConfig, variant: Variant, seed: u64) -> Result<RegretTrace> {
    let env = environment_for(config, seed)?;
    let delay = config.delay_model()?;
    let horizon = config.run.horizon;
    let dim = config.environment.dim;
    let regrets = match config.run.algorithm {
        Algorithm::Linear => {
            let mut p = LinearPolicy::new(config.linear_policy(variant)?, dim)?;
            run_policy(&mut p, &env, delay, seed, horizon, |_, _, _| Ok(()))?
        }
        Algorithm::Neural => {
            let mut p = NeuralPolicy::new(config.neural_policy(variant)?, dim, seed)?;
            run_policy(&mut p, &env, delay, seed, horizon, |_, _, _| Ok(()))?
        }
    };
    Ok(RegretTrace::new(config.run.algorithm, variant, seed, regrets))
}

/// Runs every (variant, seed) pair of the configuration on `jobs` threads.
/// Traces come back sorted by variant order in the config, then seed.
pub fn run_suite(config: &ExperimentConfig, jobs: usize) -> Result<Vec<RegretTrace>> {
    config.validate()?;
    let seeds = config.effective_seeds()?;
    let tasks: Vec<(usize, Variant, u64)> = config
        .run
        .variants
        .iter()
        .enumerate()
        .flat_map(|(i, &v)| seeds.iter().map(move |&s| (i, v, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let mut results: Vec<(usize, RegretTrace)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(i, v, s)| run_single(config, v, s).map(|t| (i, t)))
            .collect::<Result<Vec<_>>>()
    })?;
    results.sort_by_key(|(i, t)| (*i, t.seed));
    Ok(results.into_iter().map(|(_, t)| t).collect())
}

/// Runs the suite and writes `traces.csv` and `summary.json` into `out`.
pub fn run_and_write(config: &ExperimentConfig, out: &Path, jobs: usize) -> Result<Summary> {
    let traces = run_suite(config, jobs)?;
    write_outputs(config, &traces, out)
}
