//! Inverse-probability-weighted logistic maximum likelihood.
//!
//! The estimator minimizes
//!
//! ```text
//! L(θ) = −Σ_s [ p_s log μ(θᵀΔφ_s) + (1 − p_s) log μ(−θᵀΔφ_s) ] + (λ/2)‖θ‖²
//! ```
//!
//! where the pseudo-label `p_s` is `ω_{s,t}·y_s ∈ {0, 1/ρ}` for the weighted
//! estimator. `p_s` may exceed one, so this is a convex surrogate rather than a
//! likelihood; each summand equals `softplus(z) − p z` with `z = θᵀΔφ_s`, and
//! the ridge keeps it strictly convex.

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm2, Cholesky};

/// Logistic link `μ(z) = 1 / (1 + e^{−z})`.
///
/// Each branch only exponentiates a non-positive number, so it never overflows.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `μ'(z) = μ(z) μ(−z)`.
pub fn sigmoid_derivative(z: f64) -> f64 {
    sigmoid(z) * sigmoid(-z)
}

/// `log(1 + e^z)`, stable for large `|z|`.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `log μ(z) = −softplus(−z)`.
pub fn log_sigmoid(z: f64) -> f64 {
    -softplus(-z)
}

/// Lower bound on the link derivative over scores `|z| ≤ param_bound · feature_bound`.
pub fn default_kappa_mu(param_bound: f64, feature_bound: f64) -> f64 {
    sigmoid_derivative(param_bound * feature_bound)
}

/// Per-row contribution `softplus(z) − p·z`.
pub fn row_loss(z: f64, label: f64) -> f64 {
    softplus(z) - label * z
}

/// Feature differences with their pseudo-labels.
#[derive(Debug, Clone, Default)]
pub struct ObservedDataset {
    dim: usize,
    rows: Vec<(Vec<f64>, f64)>,
}

impl ObservedDataset {
    pub fn new(dim: usize) -> Self {
        Self { dim, rows: Vec::new() }
    }

    pub fn push(&mut self, delta_phi: Vec<f64>, pseudo_label: f64) -> Result<()> {
        if delta_phi.len() != self.dim {
            return Err(invalid(format!(
                "row has dimension {}, dataset has {}",
                delta_phi.len(),
                self.dim
            )));
        }
        if !(pseudo_label >= 0.0) || !pseudo_label.is_finite() {
            return Err(invalid(format!(
                "pseudo-label must be finite and >= 0, got {pseudo_label}"
            )));
        }
        self.rows.push((delta_phi, pseudo_label));
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[(Vec<f64>, f64)] {
        &self.rows
    }

    /// Largest `‖Δφ‖₂` among the rows.
    pub fn max_feature_norm(&self) -> f64 {
        self.rows.iter().map(|(d, _)| norm2(d)).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleConfig {
    /// Ridge weight `λ`.
    pub lambda: f64,
    pub grad_tol: f64,
    pub max_iters: usize,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            grad_tol: 1e-8,
            max_iters: 100,
        }
    }
}

impl MleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.grad_tol > 0.0) {
            return Err(invalid("grad_tol must be positive"));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be positive"));
        }
        Ok(())
    }
}

fn check_theta(theta: &[f64], data: &ObservedDataset) -> Result<()> {
    if theta.len() != data.dim() {
        return Err(invalid(format!(
            "parameter has dimension {}, dataset has {}",
            theta.len(),
            data.dim()
        )));
    }
    Ok(())
}

pub fn ipw_loss(theta: &[f64], data: &ObservedDataset, cfg: &MleConfig) -> Result<f64> {
    check_theta(theta, data)?;
    let data_term: f64 = data.rows().iter().map(|(d, p)| row_loss(dot(theta, d), *p)).sum();
    Ok(data_term + 0.5 * cfg.lambda * dot(theta, theta))
}

/// `∇L = Σ (μ(θᵀΔφ_s) − p_s) Δφ_s + λθ`.
pub fn ipw_grad(theta: &[f64], data: &ObservedDataset, cfg: &MleConfig) -> Result<Vec<f64>> {
    check_theta(theta, data)?;
    let mut g: Vec<f64> = theta.iter().map(|x| cfg.lambda * x).collect();
    for (d, p) in data.rows() {
        let c = sigmoid(dot(theta, d)) - p;
        for (gi, di) in g.iter_mut().zip(d) {
            *gi += c * di;
        }
    }
    Ok(g)
}

/// `∇²L = Σ μ'(θᵀΔφ_s) Δφ_s Δφ_sᵀ + λI`, row-major.
pub fn ipw_hessian(theta: &[f64], data: &ObservedDataset, cfg: &MleConfig) -> Result<Vec<f64>> {
    check_theta(theta, data)?;
    let n = theta.len();
    let mut h = vec![0.0; n * n];
    for (d, _) in data.rows() {
        let w = sigmoid_derivative(dot(theta, d));
        for i in 0..n {
            let wi = w * d[i];
            let row = &mut h[i * n..i * n + i + 1];
            for (hij, dj) in row.iter_mut().zip(d) {
                *hij += wi * dj;
            }
        }
    }
    for i in 0..n {
        h[i * n + i] += cfg.lambda;
        for j in 0..i {
            h[j * n + i] = h[i * n + j];
        }
    }
    Ok(h)
}

/// Damped Newton minimization of [`ipw_loss`] from `warm_start`.
pub fn solve_mle(data: &ObservedDataset, cfg: &MleConfig, warm_start: &[f64]) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_theta(warm_start, data)?;
    let mut theta = warm_start.to_vec();
    let mut loss = ipw_loss(&theta, data, cfg)?;
    let mut grad_norm = f64::INFINITY;
    for _ in 0..cfg.max_iters {
        let grad = ipw_grad(&theta, data, cfg)?;
        grad_norm = norm2(&grad);
        if grad_norm < cfg.grad_tol {
            return Ok(theta);
        }
        let hess = ipw_hessian(&theta, data, cfg)?;
        let step = Cholesky::factor(&hess, theta.len())?.solve(&grad);
        let slope = -dot(&grad, &step);
        let slack = 1e-12 * (1.0 + loss.abs());
        let mut alpha = 1.0;
        loop {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t - alpha * s).collect();
            let cand_loss = ipw_loss(&cand, data, cfg)?;
            if cand_loss <= loss + 1e-4 * alpha * slope + slack {
                theta = cand;
                loss = cand_loss;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                return Err(Error::Convergence {
                    iterations: cfg.max_iters,
                    grad_norm,
                });
            }
        }
    }
    let grad_norm_final = norm2(&ipw_grad(&theta, data, cfg)?);
    if grad_norm_final < cfg.grad_tol {
        Ok(theta)
    } else {
        Err(Error::Convergence {
            iterations: cfg.max_iters,
            grad_norm: grad_norm_final.min(grad_norm),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dataset(rng: &mut impl Rng, dim: usize, n: usize, rho: f64) -> ObservedDataset {
        let mut data = ObservedDataset::new(dim);
        for _ in 0..n {
            let d: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.6..0.6)).collect();
            let label = if rng.random_bool(0.5) { 1.0 / rho } else { 0.0 };
            data.push(d, label).unwrap();
        }
        data
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        for z in [0.1, 1.0, 5.0, 37.5, 700.0] {
            assert!((sigmoid(z) + sigmoid(-z) - 1.0).abs() < 1e-15);
        }
        assert!((sigmoid(1.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
        assert!(sigmoid(-700.0) > 0.0 && sigmoid(700.0) <= 1.0);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
    }

    #[test]
    fn kappa_default_value() {
        assert!((default_kappa_mu(1.0, 2.0) - 0.104_993_585_403_507_4).abs() < 1e-12);
    }

    #[test]
    fn loss_base_cases() {
        let cfg = MleConfig::default();
        let empty = ObservedDataset::new(3);
        assert_eq!(ipw_loss(&[0.0; 3], &empty, &cfg).unwrap(), 0.0);
        let mut one = ObservedDataset::new(2);
        one.push(vec![0.5, -0.2], 0.0).unwrap();
        assert!((ipw_loss(&[0.0, 0.0], &one, &cfg).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn loss_matches_verbatim_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cfg = MleConfig {
            lambda: 0.7,
            ..Default::default()
        };
        let data = random_dataset(&mut rng, 4, 30, 0.6);
        let theta: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut verbatim = 0.0;
        for (d, p) in data.rows() {
            let z: f64 = d.iter().zip(&theta).map(|(a, b)| a * b).sum();
            let mu = 1.0 / (1.0 + (-z).exp());
            verbatim -= p * mu.ln() + (1.0 - p) * (1.0 - mu).ln();
        }
        verbatim += 0.35 * theta.iter().map(|x| x * x).sum::<f64>();
        let got = ipw_loss(&theta, &data, &cfg).unwrap();
        assert!((got - verbatim).abs() < 1e-10 * verbatim.abs().max(1.0));
    }

    #[test]
    fn empty_gradient_is_ridge() {
        let cfg = MleConfig {
            lambda: 2.5,
            ..Default::default()
        };
        let g = ipw_grad(&[1.0, -2.0], &ObservedDataset::new(2), &cfg).unwrap();
        assert_eq!(g, vec![2.5, -5.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cfg = MleConfig {
            lambda: 0.3,
            ..Default::default()
        };
        for _ in 0..20 {
            let data = random_dataset(&mut rng, 3, 15, 0.5);
            let theta: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = ipw_grad(&theta, &data, &cfg).unwrap();
            for i in 0..3 {
                let h = 1e-6;
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[i] += h;
                tm[i] -= h;
                let fd = (ipw_loss(&tp, &data, &cfg).unwrap() - ipw_loss(&tm, &data, &cfg).unwrap()) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn solver_basics() {
        let cfg = MleConfig {
            lambda: 1.0,
            ..Default::default()
        };
        let empty = ObservedDataset::new(3);
        assert_eq!(solve_mle(&empty, &cfg, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert_eq!(solve_mle(&empty, &cfg, &[1.0, 2.0, 3.0]).unwrap(), vec![0.0; 3]);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = random_dataset(&mut rng, 4, 40, 0.4);
        let a = solve_mle(&data, &cfg, &[0.0; 4]).unwrap();
        let b = solve_mle(&data, &cfg, &[3.0, -3.0, 1.0, 2.0]).unwrap();
        assert!(norm2(&ipw_grad(&a, &data, &cfg).unwrap()) < cfg.grad_tol);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn solver_reports_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = random_dataset(&mut rng, 4, 40, 0.4);
        let cfg = MleConfig {
            lambda: 1.0,
            grad_tol: 1e-8,
            max_iters: 1,
        };
        match solve_mle(&data, &cfg, &[5.0; 4]) {
            Err(Error::Convergence { grad_norm, .. }) => assert!(grad_norm > 0.0),
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let cfg = MleConfig::default();
        let data = ObservedDataset::new(2);
        assert!(ipw_loss(&[0.0], &data, &cfg).is_err());
        let mut d = ObservedDataset::new(2);
        assert!(d.push(vec![1.0], 0.0).is_err());
        assert!(d.push(vec![1.0, 0.0], -1.0).is_err());
    }
}
