//! Neural dueling bandit on the cubic utility `(θ*ᵀx)³`.
//!
//! A narrow network keeps this quick; the bundled demo uses m = 64.
//!
//! cargo run --release --example neural_dueling

use duelay::delay::{DelayKind, DelayModel};
use duelay::environment::{Environment, RewardKind};
use duelay::harness::run_policy;
use duelay::neural_policy::{drift_bound, NeuralPolicy, NeuralPolicyConfig, TrainConfig};
use duelay::policy::Variant;

fn main() -> duelay::Result<()> {
    let (dim, arms, horizon, seed) = (5, 10, 200, 3);
    let env = Environment::new(RewardKind::Cubic, dim, arms, seed)?;
    let delay = DelayModel::new(DelayKind::Geometric { p: 0.3 }, 3)?;

    for variant in Variant::ALL {
        let cfg = NeuralPolicyConfig {
            width: 16,
            train: TrainConfig {
                epochs: 20,
                ..TrainConfig::default()
            },
            ..NeuralPolicyConfig::new(1.0, 0.1, delay.threshold(), delay.rho(), variant)
        };
        let mut policy = NeuralPolicy::new(cfg, dim, seed)?;
        let mut total = 0.0;
        let mut max_drift_ratio: f64 = 0.0;
        run_policy(&mut policy, &env, delay, seed, horizon, |p, duel, r| {
            total += r;
            max_drift_ratio = max_drift_ratio.max(p.drift() / drift_bound(duel.round, cfg.width, cfg.lambda));
            Ok(())
        })?;
        let stats = policy.last_round();
        println!(
            "{:<10} R_T = {total:7.2}  nu = {:.3}  rows = {:3}  max drift / bound = {max_drift_ratio:.3}",
            variant.name(),
            stats.nu,
            stats.dataset_rows
        );
    }
    Ok(())
}
