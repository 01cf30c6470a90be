//! Linear dueling bandit on a synthetic problem with geometric delays.
//!
//! Runs the three variants side by side on one seed and prints cumulative
//! regret together with how well each estimate aligns with θ*.
//!
//! cargo run --release --example linear_dueling

use duelay::delay::{DelayKind, DelayModel};
use duelay::environment::{Environment, RewardKind};
use duelay::harness::run_policy;
use duelay::linalg::{dot, norm2};
use duelay::linear_policy::{LinearPolicy, LinearPolicyConfig};
use duelay::policy::Variant;

fn main() -> duelay::Result<()> {
    let (dim, arms, horizon, seed) = (10, 15, 1000, 7);
    let env = Environment::new(RewardKind::Linear, dim, arms, seed)?;
    let delay = DelayModel::new(DelayKind::Geometric { p: 0.3 }, 3)?;
    println!("rho = {:.3}", delay.rho());

    for variant in Variant::ALL {
        let cfg = LinearPolicyConfig {
            beta_scale: 0.05,
            ..LinearPolicyConfig::new(0.5, 0.1, delay.threshold(), delay.rho(), variant)
        };
        let mut policy = LinearPolicy::new(cfg, dim)?;
        let mut checkpoints = Vec::new();
        let mut total = 0.0;
        run_policy(&mut policy, &env, delay, seed, horizon, |_, duel, r| {
            total += r;
            if duel.round % 250 == 0 {
                checkpoints.push(format!("R_{}={total:.1}", duel.round));
            }
            Ok(())
        })?;
        let th = policy.theta_hat();
        let cos = dot(th, env.theta_star()) / norm2(th).max(1e-12);
        println!(
            "{:<10} {}  cos(θ̂, θ*) = {cos:.3}",
            variant.name(),
            checkpoints.join("  ")
        );
    }
    Ok(())
}
