//! Inverse-propensity labels versus dropping unobserved duels.
//!
//! Both fits target θ*; the weighted one keeps every row and rescales the
//! arrived positives by `1/ρ`.
//!
//! cargo run --release --example ipw_estimator

use rand::Rng;

use duelay::delay::{DelayKind, DelayModel};
use duelay::environment::sample_unit_ball;
use duelay::linalg::{dot, norm2, sub};
use duelay::linear_mle::{sigmoid, solve_mle, MleConfig, ObservedDataset};
use duelay::rng::{stream_rng, Stream};

fn main() -> duelay::Result<()> {
    let dim = 4;
    let theta_star = vec![2.0, -1.0, 0.5, 1.5];
    let model = DelayModel::new(DelayKind::Geometric { p: 0.3 }, 2)?;
    let rho = model.rho();
    let cfg = MleConfig {
        lambda: 1.0,
        ..MleConfig::default()
    };

    for n in [100, 1000, 10_000] {
        let mut rng = stream_rng(n as u64, Stream::Arms, 0);
        let mut weighted = ObservedDataset::new(dim);
        let mut observed_only = ObservedDataset::new(dim);
        for _ in 0..n {
            let d = sub(&sample_unit_ball(&mut rng, dim), &sample_unit_ball(&mut rng, dim));
            let y = rng.random::<f64>() < sigmoid(dot(&theta_star, &d));
            let arrived = model.sample_delay(&mut rng) <= model.threshold();
            let label = if arrived && y { 1.0 / rho } else { 0.0 };
            weighted.push(d.clone(), label)?;
            if arrived {
                observed_only.push(d, f64::from(u8::from(y)))?;
            }
        }
        let a = solve_mle(&weighted, &cfg, &vec![0.0; dim])?;
        let b = solve_mle(&observed_only, &cfg, &vec![0.0; dim])?;
        println!(
            "n = {n:6}: ‖θ̂_ipw − θ*‖ = {:.3}   ‖θ̂_observed − θ*‖ = {:.3}  ({} rows observed)",
            norm2(&sub(&a, &theta_star)),
            norm2(&sub(&b, &theta_star)),
            observed_only.len()
        );
    }
    Ok(())
}
