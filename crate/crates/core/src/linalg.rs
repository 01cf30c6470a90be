//! Small dense linear-algebra kernel.
//!
//! Only what the policies need: dot products, a Cholesky factorization,
//! and two representations of the regularized information matrix
//! `V = r·I + Σ sᵢ vᵢ vᵢᵀ`:
//!
//! * [`InfoMatrix`] stores `V` and `V⁻¹` densely and maintains the inverse
//!   through Sherman–Morrison updates. Used for the low-dimensional linear
//!   policy.
//! * [`GramInfoMatrix`] stores the update vectors and a growing Cholesky
//!   factor of the `k×k` Gram system `r·I + UᵀU`. Quadratic forms and the
//!   log-determinant are exact through the Woodbury identity, at `O(k·p)`
//!   per query instead of `O(p²)`.
//! * [`KernelGram`] is the same factorization driven purely by inner
//!   products, for features that are never formed explicitly. The neural
//!   policy feeds it NTK inner products, since the parameter dimension
//!   dwarfs the number of rounds.

use crate::error::{invalid, Error, Result};

/// Refresh interval of the maintained dense inverse.
pub const REFRESH_INTERVAL: usize = 500;

/// Lowest admissible value of the Sherman–Morrison denominator.
const DEGENERATE_DENOMINATOR: f64 = 1e-12;

/// Inner product over the common prefix, summed in four interleaved lanes.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `a - b`, elementwise.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid("vector contains non-finite entries"))
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    // row-major, only the lower triangle is meaningful
    l: Vec<f64>,
}

impl Cholesky {
    /// Factor the row-major `n×n` matrix `a`.
    pub fn factor(a: &[f64], n: usize) -> Result<Self> {
        if a.len() != n * n {
            return Err(invalid(format!("expected {}x{} matrix, got {} entries", n, n, a.len())));
        }
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `log det A = 2 Σ log Lᵢᵢ`.
    pub fn logdet(&self) -> f64 {
        (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum::<f64>() * 2.0
    }

    /// Solves `L y = b` in place.
    pub fn forward_solve(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s = b[i] - dot(row, &b[..i]);
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        self.forward_solve(&mut x);
        for i in (0..n).rev() {
            let s = x[i] - (i + 1..n).map(|k| self.l[k * n + i] * x[k]).sum::<f64>();
            x[i] = s / self.l[i * n + i];
        }
        x
    }

    /// Dense `A⁻¹`, row-major.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        // symmetrize away rounding asymmetry
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (inv[i * n + j] + inv[j * n + i]);
                inv[i * n + j] = avg;
                inv[j * n + i] = avg;
            }
        }
        inv
    }
}

/// Common surface of the two information-matrix representations.
pub trait Information {
    fn dim(&self) -> usize;

    /// Ridge `r` of the initialization `V₀ = r·I`.
    fn ridge(&self) -> f64;

    fn logdet(&self) -> f64;

    /// `log det V₀ = dim · log r`.
    fn logdet0(&self) -> f64;

    /// Number of rank-one updates applied so far.
    fn updates(&self) -> usize;

    /// `V ← V + scale · v vᵀ`.
    fn rank_one_update(&mut self, v: &[f64], scale: f64) -> Result<()>;

    /// `vᵀ V⁻¹ v`.
    fn inverse_quadratic(&self, v: &[f64]) -> Result<f64>;

    /// `‖v‖_{V⁻¹}`.
    fn inverse_norm(&self, v: &[f64]) -> Result<f64> {
        Ok(self.inverse_quadratic(v)?.max(0.0).sqrt())
    }
}

/// Which matrix a weighted norm is taken under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// `‖v‖_V`
    Direct,
    /// `‖v‖_{V⁻¹}`
    Inverse,
}

/// Regularized design matrix with a maintained inverse and log-determinant.
#[derive(Debug, Clone)]
pub struct InfoMatrix {
    dim: usize,
    ridge: f64,
    mat: Vec<f64>,
    inv: Vec<f64>,
    logdet: f64,
    logdet0: f64,
    updates: usize,
    since_refresh: usize,
}

impl InfoMatrix {
    /// `V₀ = ridge · I`.
    pub fn new(dim: usize, ridge: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("information matrix dimension must be positive"));
        }
        if !(ridge > 0.0) || !ridge.is_finite() {
            return Err(invalid(format!("ridge must be positive and finite, got {ridge}")));
        }
        let mut mat = vec![0.0; dim * dim];
        let mut inv = vec![0.0; dim * dim];
        for i in 0..dim {
            mat[i * dim + i] = ridge;
            inv[i * dim + i] = 1.0 / ridge;
        }
        let logdet0 = dim as f64 * ridge.ln();
        Ok(Self {
            dim,
            ridge,
            mat,
            inv,
            logdet: logdet0,
            logdet0,
            updates: 0,
            since_refresh: 0,
        })
    }

    /// Row-major `V`.
    pub fn matrix(&self) -> &[f64] {
        &self.mat
    }

    /// Row-major maintained `V⁻¹`.
    pub fn inverse(&self) -> &[f64] {
        &self.inv
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(invalid(format!(
                "vector length {} does not match matrix dimension {}",
                v.len(),
                self.dim
            )));
        }
        Ok(())
    }

    fn mat_vec(m: &[f64], dim: usize, v: &[f64]) -> Vec<f64> {
        (0..dim).map(|i| dot(&m[i * dim..(i + 1) * dim], v)).collect()
    }

    /// `√(vᵀ M v)` with `M = V` or `M = V⁻¹`.
    pub fn weighted_norm(&self, v: &[f64], kind: NormKind) -> Result<f64> {
        self.check_dim(v)?;
        let m = match kind {
            NormKind::Direct => &self.mat,
            NormKind::Inverse => &self.inv,
        };
        let mv = Self::mat_vec(m, self.dim, v);
        Ok(dot(v, &mv).max(0.0).sqrt())
    }

    /// Frobenius norm of `V⁻¹·V − I`.
    pub fn inverse_residual(&self) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.inv[i * n + k] * self.mat[k * n + j];
                }
                if i == j {
                    s -= 1.0;
                }
                acc += s * s;
            }
        }
        acc.sqrt()
    }

    /// Recomputes `V⁻¹` and `log det V` from `V` by Cholesky.
    pub fn refresh(&mut self) -> Result<()> {
        let chol = Cholesky::factor(&self.mat, self.dim)?;
        self.inv = chol.inverse();
        self.logdet = chol.logdet();
        self.since_refresh = 0;
        Ok(())
    }
}

impl Information for InfoMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    fn ridge(&self) -> f64 {
        self.ridge
    }

    fn logdet(&self) -> f64 {
        self.logdet
    }

    fn logdet0(&self) -> f64 {
        self.logdet0
    }

    fn updates(&self) -> usize {
        self.updates
    }

    fn rank_one_update(&mut self, v: &[f64], scale: f64) -> Result<()> {
        self.check_dim(v)?;
        check_finite(v)?;
        if !(scale >= 0.0) || !scale.is_finite() {
            return Err(invalid(format!("update scale must be non-negative, got {scale}")));
        }
        let n = self.dim;
        let u = Self::mat_vec(&self.inv, n, v);
        let denom = 1.0 + scale * dot(v, &u);
        if denom <= DEGENERATE_DENOMINATOR {
            return Err(invalid(format!(
                "degenerate rank-one update (1 + s·vᵀV⁻¹v = {denom:e})"
            )));
        }
        let c = scale / denom;
        for i in 0..n {
            let (vi, ui) = (v[i], u[i]);
            let mrow = &mut self.mat[i * n..(i + 1) * n];
            for (m, vj) in mrow.iter_mut().zip(v) {
                *m += scale * vi * vj;
            }
            let irow = &mut self.inv[i * n..(i + 1) * n];
            for (w, uj) in irow.iter_mut().zip(&u) {
                *w -= c * ui * uj;
            }
        }
        self.logdet += denom.ln();
        self.updates += 1;
        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_INTERVAL {
            self.refresh()?;
        }
        Ok(())
    }

    fn inverse_quadratic(&self, v: &[f64]) -> Result<f64> {
        self.check_dim(v)?;
        let u = Self::mat_vec(&self.inv, self.dim, v);
        Ok(dot(v, &u))
    }
}

/// Information matrix `r·I + Σ_j c_j c_jᵀ` reached only through inner
/// products with its columns `c_j`.
///
/// With `C = [c₁, …, c_k]` and `A = r·I_k + CᵀC = L Lᵀ`:
///
/// * `xᵀ V⁻¹ x = (‖x‖² − ‖L⁻¹ Cᵀx‖²) / r`
/// * `log det V = (p − k)·log r + log det A`
#[derive(Debug, Clone)]
pub struct KernelGram {
    dim: usize,
    ridge: f64,
    // packed lower-triangular rows of the Cholesky factor of A
    chol_rows: Vec<Vec<f64>>,
    logdet_gram: f64,
    logdet0: f64,
}

impl KernelGram {
    pub fn new(dim: usize, ridge: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("information matrix dimension must be positive"));
        }
        if !(ridge > 0.0) || !ridge.is_finite() {
            return Err(invalid(format!("ridge must be positive and finite, got {ridge}")));
        }
        Ok(Self {
            dim,
            ridge,
            chol_rows: Vec::new(),
            logdet_gram: 0.0,
            logdet0: dim as f64 * ridge.ln(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Number of stored columns.
    pub fn len(&self) -> usize {
        self.chol_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chol_rows.is_empty()
    }

    pub fn logdet(&self) -> f64 {
        (self.dim as f64 - self.len() as f64) * self.ridge.ln() + self.logdet_gram
    }

    pub fn logdet0(&self) -> f64 {
        self.logdet0
    }

    fn forward_solve(&self, b: &mut [f64]) {
        for (i, row) in self.chol_rows.iter().enumerate() {
            let s = b[i] - dot(&row[..i], &b[..i]);
            b[i] = s / row[i];
        }
    }

    fn check_cross(&self, cross: &[f64]) -> Result<()> {
        if cross.len() != self.len() {
            return Err(invalid(format!(
                "expected {} cross products, got {}",
                self.len(),
                cross.len()
            )));
        }
        Ok(())
    }

    /// `xᵀ V⁻¹ x` from `‖x‖²` and `cross[j] = ⟨c_j, x⟩`.
    pub fn inverse_quadratic(&self, sq_norm: f64, cross: &[f64]) -> Result<f64> {
        self.check_cross(cross)?;
        let mut b = cross.to_vec();
        self.forward_solve(&mut b);
        Ok((sq_norm - dot(&b, &b)) / self.ridge)
    }

    /// Appends column `c` given `‖c‖²` and `cross[j] = ⟨c_j, c⟩`.
    pub fn push(&mut self, sq_norm: f64, cross: &[f64]) -> Result<()> {
        self.check_cross(cross)?;
        if !sq_norm.is_finite() || cross.iter().any(|v| !v.is_finite()) {
            return Err(invalid("column inner products must be finite"));
        }
        let mut row = cross.to_vec();
        self.forward_solve(&mut row);
        let pivot = self.ridge + sq_norm - dot(&row, &row);
        // pivot / r equals 1 + cᵀV⁻¹c
        if pivot / self.ridge <= DEGENERATE_DENOMINATOR {
            return Err(invalid(format!(
                "degenerate rank-one update (1 + vᵀV⁻¹v = {:e})",
                pivot / self.ridge
            )));
        }
        row.push(pivot.sqrt());
        self.logdet_gram += pivot.ln();
        self.chol_rows.push(row);
        Ok(())
    }

    /// Refactors from the full `k×k` matrix of column inner products.
    pub fn refactor(&mut self, gram: &[f64]) -> Result<()> {
        let k = self.len();
        if gram.len() != k * k {
            return Err(invalid("Gram matrix has the wrong size"));
        }
        let mut a = gram.to_vec();
        for i in 0..k {
            a[i * k + i] += self.ridge;
        }
        let chol = Cholesky::factor(&a, k)?;
        self.logdet_gram = chol.logdet();
        self.chol_rows = (0..k).map(|i| chol.l[i * k..i * k + i + 1].to_vec()).collect();
        Ok(())
    }
}

/// Information matrix held in Gram (dual) form with explicit columns
/// `√s·v` of every update. Memory and query cost grow with the number of
/// updates rather than with `dim²`.
#[derive(Debug, Clone)]
pub struct GramInfoMatrix {
    kernel: KernelGram,
    columns: Vec<Vec<f64>>,
}

impl GramInfoMatrix {
    pub fn new(dim: usize, ridge: f64) -> Result<Self> {
        Ok(Self {
            kernel: KernelGram::new(dim, ridge)?,
            columns: Vec::new(),
        })
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.kernel.dim() {
            return Err(invalid(format!(
                "vector length {} does not match matrix dimension {}",
                v.len(),
                self.kernel.dim()
            )));
        }
        Ok(())
    }

    fn project(&self, v: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|c| dot(c, v)).collect()
    }

    /// Dense `V`, for verification on small dimensions.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.kernel.dim();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = self.kernel.ridge();
        }
        for c in &self.columns {
            for i in 0..n {
                for j in 0..n {
                    m[i * n + j] += c[i] * c[j];
                }
            }
        }
        m
    }

    /// Rebuilds the Cholesky factor of the Gram system from the stored columns.
    pub fn refresh(&mut self) -> Result<()> {
        let k = self.columns.len();
        let mut a = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..=i {
                let g = dot(&self.columns[i], &self.columns[j]);
                a[i * k + j] = g;
                a[j * k + i] = g;
            }
        }
        self.kernel.refactor(&a)
    }
}

impl Information for GramInfoMatrix {
    fn dim(&self) -> usize {
        self.kernel.dim()
    }

    fn ridge(&self) -> f64 {
        self.kernel.ridge()
    }

    fn logdet(&self) -> f64 {
        self.kernel.logdet()
    }

    fn logdet0(&self) -> f64 {
        self.kernel.logdet0()
    }

    fn updates(&self) -> usize {
        self.columns.len()
    }

    fn rank_one_update(&mut self, v: &[f64], scale: f64) -> Result<()> {
        self.check_dim(v)?;
        check_finite(v)?;
        if !(scale >= 0.0) || !scale.is_finite() {
            return Err(invalid(format!("update scale must be non-negative, got {scale}")));
        }
        let root = scale.sqrt();
        let col: Vec<f64> = v.iter().map(|x| x * root).collect();
        let cross = self.project(&col);
        self.kernel.push(dot(&col, &col), &cross)?;
        self.columns.push(col);
        if self.columns.len().is_multiple_of(REFRESH_INTERVAL) {
            self.refresh()?;
        }
        Ok(())
    }

    fn inverse_quadratic(&self, v: &[f64]) -> Result<f64> {
        self.check_dim(v)?;
        self.kernel.inverse_quadratic(dot(v, v), &self.project(v))
    }
}
