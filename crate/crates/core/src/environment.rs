//! Synthetic dueling environments.
//!
//! A hidden unit vector `θ*` defines the latent utility of an arm through a
//! [`RewardKind`]; preferences between two arms follow the Bradley–Terry–Luce
//! model with the logistic link.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{dot, norm2};
use crate::linear_mle::sigmoid;
use crate::rng::{stream_rng, Stream};

/// Shape of the latent utility `f(x)` as a function of `θ*ᵀx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardKind {
    Linear,
    Quadratic,
    Cubic,
}

impl RewardKind {
    pub fn apply(self, score: f64) -> f64 {
        match self {
            RewardKind::Linear => score,
            RewardKind::Quadratic => score * score,
            RewardKind::Cubic => score * score * score,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RewardKind::Linear => "linear",
            RewardKind::Quadratic => "quadratic",
            RewardKind::Cubic => "cubic",
        }
    }
}

/// The candidate arms offered in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSet {
    pub round: usize,
    pub arms: Vec<Vec<f64>>,
}

impl ArmSet {
    pub fn new(round: usize, arms: Vec<Vec<f64>>) -> Result<Self> {
        if arms.is_empty() {
            return Err(invalid("arm set is empty"));
        }
        let d = arms[0].len();
        if arms.iter().any(|a| a.len() != d) {
            return Err(invalid("arms have inconsistent dimensions"));
        }
        Ok(Self { round, arms })
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.arms.first().map_or(0, Vec::len)
    }

    pub fn get(&self, i: usize) -> Result<&[f64]> {
        self.arms
            .get(i)
            .map(Vec::as_slice)
            .ok_or_else(|| invalid(format!("arm index {i} not in set of {}", self.arms.len())))
    }
}

/// Ground truth of a synthetic dueling problem.
#[derive(Debug, Clone)]
pub struct Environment {
    theta_star: Vec<f64>,
    kind: RewardKind,
    arms_per_round: usize,
    seed: u64,
}

fn gaussian_vec(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Uniform draw from the unit sphere in `d` dimensions.
pub fn sample_unit_sphere(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, d);
        let n = norm2(&v);
        if n > 1e-300 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Uniform draw from the closed unit ball in `d` dimensions.
pub fn sample_unit_ball(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    let dir = sample_unit_sphere(rng, d);
    let u: f64 = rng.random();
    let radius = u.powf(1.0 / d as f64);
    dir.into_iter().map(|x| x * radius).collect()
}

impl Environment {
    pub fn new(kind: RewardKind, dim: usize, arms_per_round: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("feature dimension must be at least 1"));
        }
        if arms_per_round < 2 {
            return Err(invalid(format!("need at least 2 arms per round, got {arms_per_round}")));
        }
        let mut rng = stream_rng(seed, Stream::Theta, 0);
        let theta_star = sample_unit_sphere(&mut rng, dim);
        Ok(Self {
            theta_star,
            kind,
            arms_per_round,
            seed,
        })
    }

    /// Environment with an explicit ground truth (normalized to unit length).
    pub fn with_theta(kind: RewardKind, theta: Vec<f64>, arms_per_round: usize) -> Result<Self> {
        let n = norm2(&theta);
        if theta.is_empty() || !(n > 0.0) || !n.is_finite() {
            return Err(invalid("ground-truth vector must be non-zero and finite"));
        }
        if arms_per_round < 2 {
            return Err(invalid("need at least 2 arms per round"));
        }
        Ok(Self {
            theta_star: theta.into_iter().map(|x| x / n).collect(),
            kind,
            arms_per_round,
            seed: 0,
        })
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn kind(&self) -> RewardKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn arms_per_round(&self) -> usize {
        self.arms_per_round
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Arm set for round `t`, i.i.d. uniform on the unit ball.
    pub fn draw_arms(&self, t: usize) -> ArmSet {
        let mut rng = stream_rng(self.seed, Stream::Arms, t as u64);
        let arms = (0..self.arms_per_round)
            .map(|_| sample_unit_ball(&mut rng, self.dim()))
            .collect();
        ArmSet { round: t, arms }
    }

    pub fn reward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(invalid(format!(
                "arm has dimension {}, environment has {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(self.kind.apply(dot(&self.theta_star, x)))
    }

    /// `P(x1 ≻ x2) = μ(f(x1) − f(x2))`.
    pub fn preference_probability(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.reward(x1)? - self.reward(x2)?))
    }

    /// Bernoulli draw of `1{x1 ≻ x2}`.
    pub fn sample_preference(&self, x1: &[f64], x2: &[f64], rng: &mut impl Rng) -> Result<bool> {
        let p = self.preference_probability(x1, x2)?;
        let u: f64 = rng.random();
        Ok(u < p)
    }

    /// Index of the best arm, lowest index on ties.
    pub fn best_arm(&self, arms: &ArmSet) -> Result<usize> {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (i, a) in arms.arms.iter().enumerate() {
            let v = self.reward(a)?;
            if v > best_val {
                best = i;
                best_val = v;
            }
        }
        Ok(best)
    }

    /// `2·max f − f(x_first) − f(x_second)`.
    pub fn instantaneous_regret(&self, arms: &ArmSet, first: usize, second: usize) -> Result<f64> {
        let f1 = self.reward(arms.get(first)?)?;
        let f2 = self.reward(arms.get(second)?)?;
        let best = self.reward(&arms.arms[self.best_arm(arms)?])?;
        Ok((2.0 * best - f1 - f2).max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_star_is_unit_and_deterministic() {
        let env = Environment::new(RewardKind::Linear, 20, 20, 7).unwrap();
        assert!((norm2(env.theta_star()) - 1.0).abs() < 1e-12);
        let again = Environment::new(RewardKind::Linear, 20, 20, 7).unwrap();
        assert_eq!(env.theta_star(), again.theta_star());
        let one = Environment::new(RewardKind::Linear, 1, 2, 0).unwrap();
        assert!(one.theta_star()[0] == 1.0 || one.theta_star()[0] == -1.0);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Environment::new(RewardKind::Linear, 0, 5, 0).is_err());
        assert!(Environment::new(RewardKind::Linear, 3, 1, 0).is_err());
        let env = Environment::new(RewardKind::Linear, 3, 2, 0).unwrap();
        assert!(env.reward(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn arms_are_in_ball_and_reproducible() {
        let env = Environment::new(RewardKind::Cubic, 6, 9, 3).unwrap();
        let a = env.draw_arms(4);
        assert_eq!(a.len(), 9);
        assert!(a.arms.iter().all(|x| norm2(x) <= 1.0));
        assert_eq!(a, env.draw_arms(4));
        assert_ne!(a, env.draw_arms(5));
    }

    #[test]
    fn arm_mean_is_centered() {
        let env = Environment::new(RewardKind::Linear, 2, 10, 1).unwrap();
        let mut mean = [0.0; 2];
        let mut n = 0.0;
        for t in 1..=1000 {
            for a in env.draw_arms(t).arms {
                mean[0] += a[0];
                mean[1] += a[1];
                n += 1.0;
            }
        }
        assert!((mean[0] / n).abs() < 0.05 && (mean[1] / n).abs() < 0.05);
    }

    #[test]
    fn reward_kinds() {
        let lin = Environment::with_theta(RewardKind::Linear, vec![1.0, 0.0], 2).unwrap();
        assert_eq!(lin.reward(&[0.0, 1.0]).unwrap(), 0.0);
        let quad = Environment::with_theta(RewardKind::Quadratic, vec![1.0, 0.0], 2).unwrap();
        assert_eq!(quad.reward(&[-0.5, 0.3]).unwrap(), 0.25);
        let cub = Environment::with_theta(RewardKind::Cubic, vec![0.6, 0.8], 2).unwrap();
        assert!((cub.reward(&[0.6, 0.8]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(quad.reward(&[0.3, 0.1]).unwrap(), quad.reward(&[0.3, 0.1]).unwrap());
    }

    #[test]
    fn regret_examples() {
        let env = Environment::with_theta(RewardKind::Linear, vec![1.0, 0.0], 2).unwrap();
        let arms = ArmSet::new(1, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(env.instantaneous_regret(&arms, 0, 0).unwrap(), 0.0);
        assert_eq!(env.instantaneous_regret(&arms, 0, 1).unwrap(), 1.0);
        assert!(env.instantaneous_regret(&arms, 0, 2).is_err());
    }

    #[test]
    fn regret_matches_exhaustive_scan() {
        for seed in 0..20 {
            let env = Environment::new(RewardKind::Quadratic, 4, 7, seed).unwrap();
            let arms = env.draw_arms(1);
            let vals: Vec<f64> = arms
                .arms
                .iter()
                .map(|a| {
                    let s: f64 = a.iter().zip(env.theta_star()).map(|(x, y)| x * y).sum();
                    s * s
                })
                .collect();
            let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for i in 0..7 {
                for j in 0..7 {
                    let r = env.instantaneous_regret(&arms, i, j).unwrap();
                    assert!((r - (2.0 * max - vals[i] - vals[j])).abs() < 1e-14);
                    assert!(r >= 0.0);
                }
            }
        }
    }

    #[test]
    fn preference_rates() {
        let env = Environment::with_theta(RewardKind::Linear, vec![1.0, 0.0], 2).unwrap();
        let mut rng = stream_rng(9, Stream::Preference, 0);
        let n = 100_000;
        let count = |x1: &[f64], x2: &[f64], rng: &mut rand_chacha::ChaCha12Rng| {
            (0..n).filter(|_| env.sample_preference(x1, x2, rng).unwrap()).count() as f64 / n as f64
        };
        let tie = count(&[0.3, 0.2], &[0.3, -0.4], &mut rng);
        assert!((0.495..=0.505).contains(&tie), "{tie}");

        let q = sigmoid(1.0);
        let rate = count(&[0.5, 0.0], &[-0.5, 0.0], &mut rng);
        let sd = (q * (1.0 - q) / n as f64).sqrt();
        assert!((rate - q).abs() < 3.0 * sd, "{rate} vs {q}");

        // swapped order gives the complementary rate
        let swapped = 1.0 - count(&[-0.5, 0.0], &[0.5, 0.0], &mut rng);
        assert!((swapped - q).abs() < 3.0 * sd * 2f64.sqrt());

        let far = Environment::with_theta(RewardKind::Linear, vec![1.0], 2).unwrap();
        let wins = (0..n)
            .filter(|_| {
                let u: f64 = rng.random();
                u < sigmoid(50.0)
            })
            .count();
        assert!(wins as f64 / n as f64 > 0.9999);
        assert!(far.preference_probability(&[1.0], &[-1.0]).unwrap() > 0.88);
    }
}
