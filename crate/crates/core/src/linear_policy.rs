//! Linear dueling bandit with delayed, censored feedback.
//!
//! Each round the policy absorbs newly arrived feedback, refits the
//! weighted logistic estimate `θ̂_t`, plays the greedy arm against the arm
//! with the highest optimistic advantage over it, and folds the played
//! feature difference into the information matrix straight away (features
//! are known at play time, only the preference is delayed).

use serde::{Deserialize, Serialize};

use crate::delay::{DuelRecord, PendingQueue};
use crate::environment::ArmSet;
use crate::error::{invalid, Result};
use crate::linalg::{dot, sub, InfoMatrix, Information};
use crate::linear_mle::{default_kappa_mu, sigmoid, solve_mle, MleConfig, ObservedDataset};
use crate::policy::{argmax, Duel, DuelOracle, DuelingPolicy, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearPolicyConfig {
    /// Ridge weight `λ`.
    pub lambda: f64,
    /// Lower bound `κ_μ` on the link derivative.
    pub kappa_mu: f64,
    /// Confidence level `δ`.
    pub delta: f64,
    /// Bound `L` on `‖Δφ‖₂`.
    pub feature_bound: f64,
    /// Censoring threshold `M`.
    pub threshold: u32,
    /// Observation probability `ρ`.
    pub rho: f64,
    pub variant: Variant,
    /// Multiplier on the confidence radius.
    pub beta_scale: f64,
    pub grad_tol: f64,
    pub max_iters: usize,
}

impl LinearPolicyConfig {
    /// Configuration with `κ_μ = μ'(1·L)` and `L = 2`, the bounds for unit
    /// arms and a unit-norm parameter.
    pub fn new(lambda: f64, delta: f64, threshold: u32, rho: f64, variant: Variant) -> Self {
        Self {
            lambda,
            kappa_mu: default_kappa_mu(1.0, 2.0),
            delta,
            feature_bound: 2.0,
            threshold,
            rho,
            variant,
            beta_scale: 1.0,
            grad_tol: 1e-8,
            max_iters: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_mu > 0.0 && self.kappa_mu <= 0.25) {
            return Err(invalid(format!("kappa_mu must lie in (0, 1/4], got {}", self.kappa_mu)));
        }
        if !(self.feature_bound > 0.0) {
            return Err(invalid("feature bound L must be positive"));
        }
        let floor = self.kappa_mu * self.feature_bound * self.feature_bound;
        if !(self.lambda > floor) {
            return Err(invalid(format!(
                "regret-bound condition violated: lambda ({}) must exceed kappa_mu * L^2 ({floor})",
                self.lambda
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(invalid(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        if !(self.beta_scale >= 0.0) || !self.beta_scale.is_finite() {
            return Err(invalid("beta_scale must be finite and non-negative"));
        }
        self.mle().validate()
    }

    pub fn mle(&self) -> MleConfig {
        MleConfig {
            lambda: self.lambda,
            grad_tol: self.grad_tol,
            max_iters: self.max_iters,
        }
    }

    /// Ridge `λ/κ_μ` of the initial information matrix.
    pub fn ridge(&self) -> f64 {
        self.lambda / self.kappa_mu
    }
}

/// Unscaled confidence radius
/// `√(2 log(1/δ) + d log(1 + t L² κ_μ / (d λ))) + M L + √(λ κ_μ)`.
pub fn confidence_radius(
    delta: f64,
    dim: usize,
    t: usize,
    feature_bound: f64,
    kappa_mu: f64,
    lambda: f64,
    threshold: u32,
) -> f64 {
    let d = dim as f64;
    let info = d * (1.0 + t as f64 * feature_bound * feature_bound * kappa_mu / (d * lambda)).ln();
    (2.0 * (1.0 / delta).ln() + info).sqrt() + threshold as f64 * feature_bound + (lambda * kappa_mu).sqrt()
}

/// `β_t` scaled by `beta_scale`.
pub fn beta_t(cfg: &LinearPolicyConfig, t: usize, dim: usize) -> f64 {
    cfg.beta_scale
        * confidence_radius(
            cfg.delta,
            dim,
            t,
            cfg.feature_bound,
            cfg.kappa_mu,
            cfg.lambda,
            cfg.threshold,
        )
}

/// `2d log(1 + T L² κ_μ / (d λ))`, the cap on `Σ_t ‖Δφ_t‖²_{V_{t−1}⁻¹}`.
pub fn information_gain_budget(cfg: &LinearPolicyConfig, horizon: usize, dim: usize) -> f64 {
    let d = dim as f64;
    let l2 = cfg.feature_bound * cfg.feature_bound;
    2.0 * d * (1.0 + horizon as f64 * l2 * cfg.kappa_mu / (d * cfg.lambda)).ln()
}

#[derive(Debug, Clone)]
struct HistoryRow {
    delta_phi: Vec<f64>,
    feedback: Option<bool>,
}

/// Per-round quantities kept for inspection.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinearRoundStats {
    pub beta: f64,
    /// `‖Δφ_t‖²_{V_{t−1}⁻¹}` of the played pair.
    pub info_gain: f64,
    /// Rows in the dataset the estimate was fit on.
    pub dataset_rows: usize,
}

#[derive(Debug, Clone)]
pub struct LinearPolicy {
    cfg: LinearPolicyConfig,
    dim: usize,
    theta_hat: Vec<f64>,
    info: InfoMatrix,
    history: Vec<HistoryRow>,
    pending: PendingQueue,
    dataset: ObservedDataset,
    t: usize,
    info_gain_total: f64,
    last: LinearRoundStats,
}

impl LinearPolicy {
    pub fn new(cfg: LinearPolicyConfig, dim: usize) -> Result<Self> {
        cfg.validate()?;
        if dim == 0 {
            return Err(invalid("feature dimension must be positive"));
        }
        Ok(Self {
            info: InfoMatrix::new(dim, cfg.ridge())?,
            cfg,
            dim,
            theta_hat: vec![0.0; dim],
            history: Vec::new(),
            pending: PendingQueue::new(),
            dataset: ObservedDataset::new(dim),
            t: 1,
            info_gain_total: 0.0,
            last: LinearRoundStats::default(),
        })
    }

    pub fn config(&self) -> &LinearPolicyConfig {
        &self.cfg
    }

    pub fn theta_hat(&self) -> &[f64] {
        &self.theta_hat
    }

    /// Information matrix after the most recent update.
    pub fn info(&self) -> &InfoMatrix {
        &self.info
    }

    /// Dataset the current estimate was fit on.
    pub fn dataset(&self) -> &ObservedDataset {
        &self.dataset
    }

    pub fn pending(&self) -> &PendingQueue {
        &self.pending
    }

    /// `Σ_t ‖Δφ_t‖²_{V_{t−1}⁻¹}` over the rounds played so far.
    pub fn info_gain_total(&self) -> f64 {
        self.info_gain_total
    }

    pub fn last_round(&self) -> LinearRoundStats {
        self.last
    }

    fn check_arms(&self, arms: &ArmSet) -> Result<()> {
        if arms.is_empty() {
            return Err(invalid("arm set is empty"));
        }
        if arms.dim() != self.dim {
            return Err(invalid(format!(
                "arms have dimension {}, policy expects {}",
                arms.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `argmax_x θ̂ᵀx`.
    pub fn select_first_arm(&self, arms: &ArmSet) -> Result<usize> {
        self.check_arms(arms)?;
        Ok(argmax(arms.arms.iter().map(|x| dot(&self.theta_hat, x))).expect("non-empty"))
    }

    /// Optimistic advantage of `x` over `first` under the current state.
    pub fn ucb_score(&self, x: &[f64], first: &[f64]) -> Result<f64> {
        let diff = sub(x, first);
        let rho = self.cfg.variant.effective_rho(self.cfg.rho);
        let width = beta_t(&self.cfg, self.t, self.dim) / (rho * self.cfg.kappa_mu);
        Ok(dot(&self.theta_hat, &diff) + width * self.info.inverse_norm(&diff)?)
    }

    /// `argmax_x θ̂ᵀ(x − x₁) + β_t/(ρκ_μ) ‖x − x₁‖_{V_{t−1}⁻¹}`.
    pub fn select_second_arm(&self, arms: &ArmSet, first: usize) -> Result<usize> {
        self.check_arms(arms)?;
        let x1 = arms.get(first)?;
        let scores = arms
            .arms
            .iter()
            .map(|x| self.ucb_score(x, x1))
            .collect::<Result<Vec<_>>>()?;
        Ok(argmax(scores).expect("non-empty"))
    }

    /// Builds the fitting dataset for the current round according to the variant.
    fn materialize(&self) -> Result<ObservedDataset> {
        let mut data = ObservedDataset::new(self.dim);
        let inv_rho = 1.0 / self.cfg.rho;
        for row in &self.history {
            let label = match (self.cfg.variant, row.feedback) {
                (Variant::Ipw, Some(y)) => f64::from(u8::from(y)) * inv_rho,
                (Variant::Ipw, None) => 0.0,
                (Variant::Ignore, Some(y)) => f64::from(u8::from(y)),
                (Variant::Ignore, None) => continue,
                (Variant::Heuristic, Some(y)) => f64::from(u8::from(y)),
                (Variant::Heuristic, None) => sigmoid(dot(&self.theta_hat, &row.delta_phi)),
            };
            data.push(row.delta_phi.clone(), label)?;
        }
        Ok(data)
    }
}

impl DuelingPolicy for LinearPolicy {
    fn round(&self) -> usize {
        self.t
    }

    fn step(&mut self, arms: &ArmSet, oracle: &mut dyn DuelOracle) -> Result<Duel> {
        self.check_arms(arms)?;
        let t = self.t;
        for record in self.pending.poll(t, self.cfg.threshold) {
            self.history[record.round - 1].feedback = Some(record.preference);
        }

        self.dataset = self.materialize()?;
        self.theta_hat = solve_mle(&self.dataset, &self.cfg.mle(), &self.theta_hat)?;

        let first = self.select_first_arm(arms)?;
        let second = self.select_second_arm(arms, first)?;
        let (x1, x2) = (arms.get(first)?, arms.get(second)?);
        let outcome = oracle.duel(t, x1, x2)?;

        let delta_phi = sub(x1, x2);
        let info_gain = self.info.inverse_quadratic(&delta_phi)?;
        self.info.rank_one_update(&delta_phi, 1.0)?;
        self.info_gain_total += info_gain;
        self.last = LinearRoundStats {
            beta: beta_t(&self.cfg, t, self.dim),
            info_gain,
            dataset_rows: self.dataset.len(),
        };
        self.pending.push(DuelRecord {
            round: t,
            first: x1.to_vec(),
            second: x2.to_vec(),
            preference: outcome.preference,
            delay: outcome.delay,
            delivered: false,
        });
        self.history.push(HistoryRow {
            delta_phi,
            feedback: None,
        });
        self.t += 1;
        Ok(Duel {
            round: t,
            first,
            second,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Outcome;

    struct Scripted {
        prefs: Vec<bool>,
        delay: u32,
    }

    impl DuelOracle for Scripted {
        fn duel(&mut self, round: usize, _: &[f64], _: &[f64]) -> Result<Outcome> {
            Ok(Outcome {
                preference: self.prefs[(round - 1) % self.prefs.len()],
                delay: self.delay,
            })
        }
    }

    fn cfg(variant: Variant) -> LinearPolicyConfig {
        LinearPolicyConfig::new(0.5, 0.1, 3, 1.0, variant)
    }

    #[test]
    fn lambda_condition_is_enforced() {
        let mut c = cfg(Variant::Ipw);
        c.lambda = 0.4;
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("kappa_mu * L^2"), "{err}");
        assert!(LinearPolicy::new(cfg(Variant::Ipw), 2).is_ok());
    }

    #[test]
    fn beta_closed_form_and_monotone() {
        let c = LinearPolicyConfig {
            kappa_mu: 0.105,
            lambda: 0.5,
            ..LinearPolicyConfig::new(0.5, 0.1, 3, 1.0, Variant::Ipw)
        };
        let expected = (2.0 * 10f64.ln() + 20.0 * (1.0 + 100.0 * 4.0 * 0.105 / 10.0f64).ln()).sqrt()
            + 6.0
            + (0.5f64 * 0.105).sqrt();
        assert!((beta_t(&c, 100, 20) - expected).abs() < 1e-12);
        assert!(beta_t(&c, 1, 20) <= beta_t(&c, 1_000_000, 20));
        // δ = 1, M = 0 leaves the information and ridge terms only
        let r = confidence_radius(1.0, 4, 10, 2.0, 0.1, 0.5, 0);
        let info = (4.0 * (1.0 + 10.0 * 4.0 * 0.1 / 2.0f64).ln()).sqrt();
        assert!((r - info - 0.05f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn first_arm_selection() {
        let p = LinearPolicy::new(cfg(Variant::Ipw), 2).unwrap();
        let arms = ArmSet::new(1, vec![vec![0.3, 0.1], vec![-0.2, 0.9]]).unwrap();
        assert_eq!(p.select_first_arm(&arms).unwrap(), 0);
        let mut p = p;
        p.theta_hat = vec![1.0, 0.0];
        let arms = ArmSet::new(1, vec![vec![-1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(p.select_first_arm(&arms).unwrap(), 1);
        p.theta_hat = vec![37.0, 0.0];
        assert_eq!(p.select_first_arm(&arms).unwrap(), 1);
    }

    #[test]
    fn second_arm_is_pure_exploration_at_start() {
        let p = LinearPolicy::new(cfg(Variant::Ipw), 2).unwrap();
        let arms = ArmSet::new(1, vec![vec![0.5, 0.0], vec![0.4, 0.1], vec![-0.5, 0.2], vec![0.0, 0.3]]).unwrap();
        assert_eq!(p.select_second_arm(&arms, 0).unwrap(), 2);
        let single = ArmSet::new(1, vec![vec![0.5, 0.0]]).unwrap();
        assert_eq!(p.select_second_arm(&single, 0).unwrap(), 0);
        assert_eq!(p.ucb_score(&[0.5, 0.0], &[0.5, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn immediate_feedback_uses_every_past_round() {
        let mut p = LinearPolicy::new(cfg(Variant::Ipw), 2).unwrap();
        let mut oracle = Scripted {
            prefs: vec![true, false, true],
            delay: 1,
        };
        let arms = ArmSet::new(1, vec![vec![0.5, 0.1], vec![-0.3, 0.4], vec![0.0, -0.6]]).unwrap();
        for _ in 0..6 {
            p.step(&arms, &mut oracle).unwrap();
        }
        assert_eq!(p.dataset().len(), 5);
        assert!(p.dataset().rows().iter().all(|(_, l)| *l == 0.0 || *l == 1.0));
        assert!(p.info().logdet() >= p.info().logdet0());
    }

    #[test]
    fn hand_trace_with_constant_delay() {
        // rounds 1–3, D = 2, ρ = 1: round 3 sees round-1 feedback only
        let arms = ArmSet::new(1, vec![vec![0.5, 0.1], vec![-0.3, 0.4]]).unwrap();
        for (variant, rows) in [(Variant::Ipw, [0, 1, 2]), (Variant::Ignore, [0, 0, 1])] {
            let mut p = LinearPolicy::new(cfg(variant), 2).unwrap();
            let mut oracle = Scripted {
                prefs: vec![true, false, true],
                delay: 2,
            };
            for (t, expected_rows) in rows.iter().enumerate() {
                p.step(&arms, &mut oracle).unwrap();
                assert_eq!(p.dataset().len(), *expected_rows, "{variant} round {}", t + 1);
            }
            let labels: Vec<f64> = p.dataset().rows().iter().map(|(_, l)| *l).collect();
            match variant {
                Variant::Ipw => assert_eq!(labels, vec![1.0, 0.0]),
                _ => assert_eq!(labels, vec![1.0]),
            }
        }
    }

    #[test]
    fn heuristic_imputes_pending_rows() {
        let arms = ArmSet::new(1, vec![vec![0.5, 0.1], vec![-0.3, 0.4]]).unwrap();
        let mut p = LinearPolicy::new(cfg(Variant::Heuristic), 2).unwrap();
        let mut oracle = Scripted {
            prefs: vec![true],
            delay: 3,
        };
        for _ in 0..3 {
            p.step(&arms, &mut oracle).unwrap();
        }
        let labels: Vec<f64> = p.dataset().rows().iter().map(|(_, l)| *l).collect();
        assert_eq!(labels.len(), 2);
        assert!(labels.iter().all(|l| *l > 0.0 && *l < 1.0));
    }

    #[test]
    fn rejects_mismatched_arms() {
        let mut p = LinearPolicy::new(cfg(Variant::Ipw), 3).unwrap();
        let arms = ArmSet::new(1, vec![vec![0.5, 0.1], vec![-0.3, 0.4]]).unwrap();
        let mut oracle = Scripted {
            prefs: vec![true],
            delay: 1,
        };
        assert!(p.step(&arms, &mut oracle).is_err());
    }
}
