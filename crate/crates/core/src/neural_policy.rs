//! Neural dueling bandit with delayed, censored feedback.
//!
//! The utility is modelled by an MLP trained on a weighted cross-entropy
//! loss anchored at the mirrored initialization `θ₀`. Exploration uses
//! gradient features at `θ₀`: the information matrix
//! `V = (λ/κ_μ) I + (1/m) Σ g'_s g'_sᵀ` and the bonus
//! `σ(x, x') = √(λ/κ_μ) ‖(g(x;θ₀) − g(x';θ₀))/√m‖_{V⁻¹}`.

use serde::{Deserialize, Serialize};

use crate::delay::{DuelRecord, PendingQueue};
use crate::environment::ArmSet;
use crate::error::{invalid, Result};
use crate::linalg::{dot, norm2, KernelGram, REFRESH_INTERVAL};
use crate::linear_mle::{default_kappa_mu, sigmoid, softplus};
use crate::neural_model::{
    accumulate_grad_raw, backprop, forward, forward_pass, forward_raw, grad, grad_factors, grad_inner, init_symmetric,
    pad_context, GradFactors, MlpParams, MlpShape, PaddedContext,
};
use crate::policy::{argmax, Duel, DuelOracle, DuelingPolicy, Variant};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Maximum gradient steps (accepted or rejected) per round.
    pub epochs: usize,
    pub grad_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 200,
            grad_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuralPolicyConfig {
    pub lambda: f64,
    pub kappa_mu: f64,
    pub delta: f64,
    /// Censoring threshold `M`.
    pub threshold: u32,
    pub rho: f64,
    /// Norm bound `B` on the target in the gradient feature space.
    pub norm_bound: f64,
    pub width: usize,
    pub depth: usize,
    pub train: TrainConfig,
    pub variant: Variant,
    /// Multiplier on `ν`.
    pub nu_scale: f64,
}

impl NeuralPolicyConfig {
    pub fn new(lambda: f64, delta: f64, threshold: u32, rho: f64, variant: Variant) -> Self {
        Self {
            lambda,
            kappa_mu: default_kappa_mu(1.0, 2.0),
            delta,
            threshold,
            rho,
            norm_bound: 1.0,
            width: 64,
            depth: 2,
            train: TrainConfig::default(),
            variant,
            nu_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.kappa_mu > 0.0 && self.kappa_mu <= 0.25) {
            return Err(invalid(format!("kappa_mu must lie in (0, 1/4], got {}", self.kappa_mu)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(invalid(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        if !(self.norm_bound >= 0.0) || !self.norm_bound.is_finite() {
            return Err(invalid("norm bound B must be finite and non-negative"));
        }
        if self.width == 0 || !self.width.is_multiple_of(2) {
            return Err(invalid(format!(
                "network width must be positive and even, got {}",
                self.width
            )));
        }
        if self.depth < 2 {
            return Err(invalid(format!("network depth must be at least 2, got {}", self.depth)));
        }
        if !(self.train.learning_rate > 0.0) || !self.train.learning_rate.is_finite() {
            return Err(invalid("learning rate must be positive"));
        }
        if !(self.train.grad_tol > 0.0) {
            return Err(invalid("gradient tolerance must be positive"));
        }
        if !(self.nu_scale >= 0.0) || !self.nu_scale.is_finite() {
            return Err(invalid("nu_scale must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn ridge(&self) -> f64 {
        self.lambda / self.kappa_mu
    }

    /// Weight `mλ/2` of `‖θ − θ₀‖²` in the training loss.
    pub fn regularizer(&self) -> f64 {
        0.5 * self.width as f64 * self.lambda
    }
}

/// `ν = nu_scale · (β_T/ρ + B√(λ/κ_μ) + 1 + M/(κ_μ m ρ)) · κ_μ/λ` with
/// `β_T = √(d̃ + 2 log(1/δ)) / κ_μ`. `ρ` is the variant's effective rate.
pub fn nu_value(cfg: &NeuralPolicyConfig, effective_dim: f64) -> f64 {
    let (k, l) = (cfg.kappa_mu, cfg.lambda);
    let rho = cfg.variant.effective_rho(cfg.rho);
    let beta = (effective_dim.max(0.0) + 2.0 * (1.0 / cfg.delta).ln()).sqrt() / k;
    let m = cfg.width as f64;
    cfg.nu_scale * (beta / rho + cfg.norm_bound * (l / k).sqrt() + 1.0 + cfg.threshold as f64 / (k * m * rho)) * k / l
}

/// Bound `√(2t/(mλ))` on `‖θ_t − θ₀‖₂`.
pub fn drift_bound(t: usize, width: usize, lambda: f64) -> f64 {
    (2.0 * t as f64 / (width as f64 * lambda)).sqrt()
}

#[derive(Debug, Clone)]
struct NeuralRow {
    x1: PaddedContext,
    x2: PaddedContext,
    // h(x1; θ₀) − h(x2; θ₀)
    z0: f64,
    feedback: Option<bool>,
}

/// Outcome of one training call.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrainReport {
    pub loss: f64,
    pub loss_at_init: f64,
    pub grad_norm: f64,
    pub steps: usize,
    pub accepted: usize,
    /// Training started from `θ₀` because the previous iterate scored worse.
    pub restarted: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeuralRoundStats {
    pub nu: f64,
    pub train: TrainReport,
    pub drift: f64,
    pub dataset_rows: usize,
}

#[derive(Debug, Clone)]
pub struct NeuralPolicy {
    cfg: NeuralPolicyConfig,
    input_dim: usize,
    params: MlpParams,
    params0: MlpParams,
    // V in kernel form; column s is (g(x1_s; θ₀) − g(x2_s; θ₀))/√m
    info: KernelGram,
    played: Vec<[GradFactors; 2]>,
    rows: Vec<NeuralRow>,
    labels: Vec<(usize, f64)>,
    pending: PendingQueue,
    t: usize,
    last: NeuralRoundStats,
}

impl NeuralPolicy {
    /// `dim` is the raw arm dimension; the network sees padded inputs of
    /// length `2·dim`. `seed` keys the initialization stream.
    pub fn new(cfg: NeuralPolicyConfig, dim: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if dim == 0 {
            return Err(invalid("arm dimension must be positive"));
        }
        let shape = MlpShape::new(2 * dim, cfg.width, cfg.depth)?;
        let params0 = init_symmetric(shape, &mut stream_rng(seed, Stream::Init, 0))?;
        Ok(Self {
            info: KernelGram::new(shape.param_count(), cfg.ridge())?,
            played: Vec::new(),
            cfg,
            input_dim: dim,
            params: params0.clone(),
            params0,
            rows: Vec::new(),
            labels: Vec::new(),
            pending: PendingQueue::new(),
            t: 1,
            last: NeuralRoundStats::default(),
        })
    }

    pub fn config(&self) -> &NeuralPolicyConfig {
        &self.cfg
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn params0(&self) -> &MlpParams {
        &self.params0
    }

    pub fn info(&self) -> &KernelGram {
        &self.info
    }

    /// `(row index, label)` pairs of the current training set.
    pub fn labels(&self) -> &[(usize, f64)] {
        &self.labels
    }

    pub fn last_round(&self) -> NeuralRoundStats {
        self.last
    }

    /// `‖θ_t − θ₀‖₂`.
    pub fn drift(&self) -> f64 {
        param_distance(&self.params, &self.params0)
    }

    /// `g(x1; θ₀) − g(x2; θ₀)`.
    pub fn ntk_feature(&self, x1: &PaddedContext, x2: &PaddedContext) -> Result<Vec<f64>> {
        let mut g = grad(&self.params0, x1)?;
        accumulate_grad_raw(&self.params0, x2.as_slice(), -1.0, &mut g)?;
        Ok(g)
    }

    fn factors0(&self, x: &PaddedContext) -> Result<GradFactors> {
        grad_factors(&self.params0, x.as_slice())
    }

    /// `(⟨g(x), g(x1_s)⟩, ⟨g(x), g(x2_s)⟩)` for every played pair `s`.
    fn played_kernel(&self, f: &GradFactors) -> Vec<(f64, f64)> {
        self.played
            .iter()
            .map(|[a, b]| (grad_inner(f, a), grad_inner(f, b)))
            .collect()
    }

    /// Inner products of the column `(g(x) − g(x'))/√m` with itself and with
    /// every stored column, from the kernel rows of `x` and `x'`.
    fn column_products(
        &self,
        fx: &GradFactors,
        fy: &GradFactors,
        kx: &[(f64, f64)],
        ky: &[(f64, f64)],
    ) -> (f64, Vec<f64>) {
        let inv_m = 1.0 / self.cfg.width as f64;
        let sq = (fx.sq_norm() - 2.0 * grad_inner(fx, fy) + fy.sq_norm()) * inv_m;
        let cross = kx
            .iter()
            .zip(ky)
            .map(|(a, b)| ((a.0 - b.0) - (a.1 - b.1)) * inv_m)
            .collect();
        (sq, cross)
    }

    fn sigma_of(&self, sq: f64, cross: &[f64]) -> Result<f64> {
        Ok((self.cfg.ridge() * self.info.inverse_quadratic(sq, cross)?.max(0.0)).sqrt())
    }

    /// `σ_{t−1}(x, x')` under the current information matrix.
    pub fn sigma(&self, x: &PaddedContext, x_prime: &PaddedContext) -> Result<f64> {
        let (fx, fy) = (self.factors0(x)?, self.factors0(x_prime)?);
        let (sq, cross) = self.column_products(&fx, &fy, &self.played_kernel(&fx), &self.played_kernel(&fy));
        self.sigma_of(sq, &cross)
    }

    /// Adds the column of the pair `(x1, x2)` to `V`.
    fn record_pair(&mut self, x1: &PaddedContext, x2: &PaddedContext) -> Result<()> {
        let (f1, f2) = (self.factors0(x1)?, self.factors0(x2)?);
        let (sq, cross) = self.column_products(&f1, &f2, &self.played_kernel(&f1), &self.played_kernel(&f2));
        self.info.push(sq, &cross)?;
        self.played.push([f1, f2]);
        if self.played.len().is_multiple_of(REFRESH_INTERVAL) {
            self.refactor_info()?;
        }
        Ok(())
    }

    fn refactor_info(&mut self) -> Result<()> {
        let k = self.played.len();
        let inv_m = 1.0 / self.cfg.width as f64;
        let mut gram = vec![0.0; k * k];
        for i in 0..k {
            let [a1, a2] = &self.played[i];
            for j in 0..=i {
                let [b1, b2] = &self.played[j];
                let g = (grad_inner(a1, b1) - grad_inner(a1, b2) - grad_inner(a2, b1) + grad_inner(a2, b2)) * inv_m;
                gram[i * k + j] = g;
                gram[j * k + i] = g;
            }
        }
        self.info.refactor(&gram)
    }

    /// `log det V − log det V₀`, the online effective-dimension proxy.
    pub fn effective_dim(&self) -> f64 {
        (self.info.logdet() - self.info.logdet0()).max(0.0)
    }

    pub fn nu(&self) -> f64 {
        nu_value(&self.cfg, self.effective_dim())
    }

    /// Training loss `Σ softplus(z) − y z + (mλ/2)‖θ − θ₀‖²` with
    /// `z = h(x1) − h(x2)`, and its gradient if requested.
    pub fn objective(&self, params: &MlpParams, want_grad: bool) -> Result<(f64, Option<Vec<f64>>)> {
        let reg = self.cfg.regularizer();
        let mut loss = 0.0;
        let mut g = want_grad.then(|| vec![0.0; params.len()]);
        for &(i, label) in &self.labels {
            let row = &self.rows[i];
            let (x1, x2) = (row.x1.as_slice(), row.x2.as_slice());
            if let Some(g) = g.as_mut() {
                let p1 = forward_pass(params, x1)?;
                let p2 = forward_pass(params, x2)?;
                let z = p1.output - p2.output;
                loss += softplus(z) - label * z;
                let r = sigmoid(z) - label;
                backprop(params, x1, &p1, r, g)?;
                backprop(params, x2, &p2, -r, g)?;
            } else {
                let z = forward_raw(params, x1)? - forward_raw(params, x2)?;
                loss += softplus(z) - label * z;
            }
        }
        let mut sq = 0.0;
        for (k, (a, b)) in params.flat().iter().zip(self.params0.flat()).enumerate() {
            let d = a - b;
            sq += d * d;
            if let Some(g) = g.as_mut() {
                g[k] += 2.0 * reg * d;
            }
        }
        loss += reg * sq;
        if !loss.is_finite() {
            return Err(invalid("training loss is not finite"));
        }
        Ok((loss, g))
    }

    /// Training loss at `θ₀`, from the cached initial outputs.
    pub fn loss_at_init(&self) -> f64 {
        self.labels
            .iter()
            .map(|&(i, label)| {
                let z = self.rows[i].z0;
                softplus(z) - label * z
            })
            .sum()
    }

    /// Full-batch gradient descent from the previous iterate, or from `θ₀`
    /// when that scores better. A step that raises the loss is rejected and
    /// the learning rate halved, so the loss never increases.
    pub fn train_network(&mut self) -> Result<TrainReport> {
        let loss0 = self.loss_at_init();
        let (mut loss, g) = self.objective(&self.params, true)?;
        let mut g = g.expect("gradient requested");
        let restarted = loss > loss0;
        if restarted {
            self.params = self.params0.clone();
            let (l, g0) = self.objective(&self.params, true)?;
            loss = l;
            g = g0.expect("gradient requested");
        }
        let mut lr = self.cfg.train.learning_rate;
        let mut report = TrainReport {
            loss_at_init: loss0,
            restarted,
            ..TrainReport::default()
        };
        let mut gn = norm2(&g);
        while report.steps < self.cfg.train.epochs && gn >= self.cfg.train.grad_tol {
            report.steps += 1;
            let mut trial = self.params.clone();
            for (p, gi) in trial.flat_mut().iter_mut().zip(&g) {
                *p -= lr * gi;
            }
            let (trial_loss, trial_grad) = self.objective(&trial, true)?;
            if trial_loss <= loss {
                self.params = trial;
                loss = trial_loss;
                g = trial_grad.expect("gradient requested");
                gn = norm2(&g);
                report.accepted += 1;
            } else {
                lr *= 0.5;
            }
        }
        report.loss = loss;
        report.grad_norm = gn;
        Ok(report)
    }

    /// Training labels for the current round according to the variant.
    fn materialize(&mut self) -> Result<()> {
        let inv_rho = 1.0 / self.cfg.rho;
        let mut labels = Vec::with_capacity(self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            let label = match (self.cfg.variant, row.feedback) {
                (Variant::Ipw, Some(y)) => f64::from(u8::from(y)) * inv_rho,
                (Variant::Ipw, None) => 0.0,
                (Variant::Ignore, Some(y)) => f64::from(u8::from(y)),
                (Variant::Ignore, None) => continue,
                (Variant::Heuristic, Some(y)) => f64::from(u8::from(y)),
                (Variant::Heuristic, None) => {
                    sigmoid(forward(&self.params, &row.x1)? - forward(&self.params, &row.x2)?)
                }
            };
            labels.push((i, label));
        }
        self.labels = labels;
        Ok(())
    }

    fn pad_arms(&self, arms: &ArmSet) -> Result<Vec<PaddedContext>> {
        if arms.is_empty() {
            return Err(invalid("arm set is empty"));
        }
        if arms.dim() != self.input_dim {
            return Err(invalid(format!(
                "arms have dimension {}, policy expects {}",
                arms.dim(),
                self.input_dim
            )));
        }
        arms.arms.iter().map(|x| pad_context(x)).collect()
    }

    /// Greedy first arm and optimistic second arm under the current network.
    pub fn select_pair(&self, arms: &ArmSet) -> Result<(usize, usize)> {
        let padded = self.pad_arms(arms)?;
        let h = padded
            .iter()
            .map(|x| forward(&self.params, x))
            .collect::<Result<Vec<_>>>()?;
        let first = argmax(h.iter().copied()).expect("non-empty");
        let factors = padded.iter().map(|x| self.factors0(x)).collect::<Result<Vec<_>>>()?;
        let kernels: Vec<Vec<(f64, f64)>> = factors.iter().map(|f| self.played_kernel(f)).collect();
        let nu = self.nu();
        let mut scores = Vec::with_capacity(padded.len());
        for i in 0..padded.len() {
            let (sq, cross) = self.column_products(&factors[i], &factors[first], &kernels[i], &kernels[first]);
            scores.push(h[i] + nu * self.sigma_of(sq, &cross)?);
        }
        Ok((first, argmax(scores).expect("non-empty")))
    }
}

impl DuelingPolicy for NeuralPolicy {
    fn round(&self) -> usize {
        self.t
    }

    fn step(&mut self, arms: &ArmSet, oracle: &mut dyn DuelOracle) -> Result<Duel> {
        let t = self.t;
        // the training set at round t holds feedback visible by round t − 1
        for record in self.pending.poll(t - 1, self.cfg.threshold) {
            self.rows[record.round - 1].feedback = Some(record.preference);
        }
        self.materialize()?;
        let train = self.train_network()?;
        let nu = self.nu();
        let (first, second) = self.select_pair(arms)?;
        let (x1, x2) = (arms.get(first)?, arms.get(second)?);
        let outcome = oracle.duel(t, x1, x2)?;

        let (p1, p2) = (pad_context(x1)?, pad_context(x2)?);
        self.record_pair(&p1, &p2)?;
        self.last = NeuralRoundStats {
            nu,
            train,
            drift: self.drift(),
            dataset_rows: self.labels.len(),
        };
        self.pending.push(DuelRecord {
            round: t,
            first: x1.to_vec(),
            second: x2.to_vec(),
            preference: outcome.preference,
            delay: outcome.delay,
            delivered: false,
        });
        let z0 = forward(&self.params0, &p1)? - forward(&self.params0, &p2)?;
        self.rows.push(NeuralRow {
            x1: p1,
            x2: p2,
            z0,
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

/// `‖a − b‖₂` over the flattened parameters.
pub fn param_distance(a: &MlpParams, b: &MlpParams) -> f64 {
    let d: Vec<f64> = a.flat().iter().zip(b.flat()).map(|(x, y)| x - y).collect();
    dot(&d, &d).sqrt()
}
