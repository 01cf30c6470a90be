//! Fully connected ReLU network `h(x; θ) = W_L ReLU(W_{L−1} ⋯ ReLU(W_1 x))`
//! with mirrored initialization, forward pass and reverse-mode gradient.
//!
//! Parameters are stored flattened in layer order, each weight matrix
//! row-major: `W_1` (m×d), then `W_2 … W_{L−1}` (m×m), then the output row
//! `W_L` (length m).

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};
use crate::linalg::{dot, norm2};

/// Layer sizes of an MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpShape {
    /// Input dimension (after padding).
    pub input_dim: usize,
    pub width: usize,
    /// Number of weight matrices, at least 2.
    pub depth: usize,
}

impl MlpShape {
    pub fn new(input_dim: usize, width: usize, depth: usize) -> Result<Self> {
        if input_dim == 0 || width == 0 {
            return Err(invalid("network input dimension and width must be positive"));
        }
        if depth < 2 {
            return Err(invalid(format!("network depth must be at least 2, got {depth}")));
        }
        Ok(Self {
            input_dim,
            width,
            depth,
        })
    }

    /// `p = m·d + (L−2)·m² + m`.
    pub fn param_count(&self) -> usize {
        let m = self.width;
        m * self.input_dim + (self.depth - 2) * m * m + m
    }

    /// Offset and (rows, cols) of weight matrix `l` (0-based) in the flat vector.
    pub fn layer(&self, l: usize) -> (usize, usize, usize) {
        let m = self.width;
        let first = m * self.input_dim;
        match l {
            0 => (0, m, self.input_dim),
            l if l + 1 < self.depth => (first + (l - 1) * m * m, m, m),
            _ => (first + (self.depth - 2) * m * m, 1, m),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    shape: MlpShape,
    theta: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(shape: MlpShape) -> Self {
        Self {
            theta: vec![0.0; shape.param_count()],
            shape,
        }
    }

    pub fn from_flat(shape: MlpShape, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != shape.param_count() {
            return Err(invalid(format!(
                "expected {} parameters, got {}",
                shape.param_count(),
                theta.len()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(invalid("network parameters must be finite"));
        }
        Ok(Self { shape, theta })
    }

    pub fn shape(&self) -> MlpShape {
        self.shape
    }

    pub fn flat(&self) -> &[f64] {
        &self.theta
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Weights of layer `l` (0-based), row-major.
    pub fn layer(&self, l: usize) -> &[f64] {
        let (off, r, c) = self.shape.layer(l);
        &self.theta[off..off + r * c]
    }

    pub fn layer_mut(&mut self, l: usize) -> &mut [f64] {
        let (off, r, c) = self.shape.layer(l);
        &mut self.theta[off..off + r * c]
    }
}

/// Unit-norm input whose two halves coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedContext {
    x: Vec<f64>,
}

impl PaddedContext {
    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Normalizes `x` and returns `(x, x)/√2`.
pub fn pad_context(x: &[f64]) -> Result<PaddedContext> {
    let n = norm2(x);
    if !(n > 0.0) || !n.is_finite() {
        return Err(invalid("cannot pad a zero or non-finite context"));
    }
    let half: Vec<f64> = x.iter().map(|v| v / n * std::f64::consts::FRAC_1_SQRT_2).collect();
    let mut padded = half.clone();
    padded.extend_from_slice(&half);
    Ok(PaddedContext { x: padded })
}

/// Mirrored initialization: hidden layers are block diagonal `[[W, 0], [0, W]]`
/// with `W ~ N(0, 4/m)` and the output row is `[w, −w]` with `w ~ N(0, 2/m)`,
/// so the network output is zero on every padded context.
pub fn init_symmetric(shape: MlpShape, rng: &mut impl Rng) -> Result<MlpParams> {
    let (d, m) = (shape.input_dim, shape.width);
    if !d.is_multiple_of(2) || !m.is_multiple_of(2) {
        return Err(invalid(format!(
            "mirrored initialization needs even input dimension and width, got d = {d}, m = {m}"
        )));
    }
    let hidden = Normal::new(0.0, (4.0 / m as f64).sqrt()).expect("positive variance");
    let output = Normal::new(0.0, (2.0 / m as f64).sqrt()).expect("positive variance");
    let mut params = MlpParams::zeros(shape);
    let (hm, hd) = (m / 2, d / 2);
    for l in 0..shape.depth - 1 {
        let cols = if l == 0 { d } else { m };
        let half_cols = if l == 0 { hd } else { hm };
        let w = params.layer_mut(l);
        for i in 0..hm {
            for j in 0..half_cols {
                let v = hidden.sample(rng);
                w[i * cols + j] = v;
                w[(i + hm) * cols + j + half_cols] = v;
            }
        }
    }
    let out = params.layer_mut(shape.depth - 1);
    for i in 0..hm {
        let v = output.sample(rng);
        out[i] = v;
        out[i + hm] = -v;
    }
    Ok(params)
}

fn check_input(params: &MlpParams, x: &[f64]) -> Result<()> {
    if x.len() != params.shape.input_dim {
        return Err(invalid(format!(
            "context has length {}, network expects {}",
            x.len(),
            params.shape.input_dim
        )));
    }
    Ok(())
}

/// Pre-activations of every hidden layer.
fn hidden_preactivations(params: &MlpParams, x: &[f64]) -> Vec<Vec<f64>> {
    let shape = params.shape;
    let mut pre = Vec::with_capacity(shape.depth - 1);
    let mut input: Vec<f64> = x.to_vec();
    for l in 0..shape.depth - 1 {
        let (_, rows, cols) = shape.layer(l);
        let w = params.layer(l);
        let z: Vec<f64> = (0..rows).map(|i| dot(&w[i * cols..(i + 1) * cols], &input)).collect();
        input = z.iter().map(|v| v.max(0.0)).collect();
        pre.push(z);
    }
    pre
}

fn relu(z: &[f64]) -> Vec<f64> {
    z.iter().map(|v| v.max(0.0)).collect()
}

fn output_of(params: &MlpParams, last_pre: &[f64]) -> f64 {
    let w = params.layer(params.shape.depth - 1);
    w.iter().zip(last_pre).map(|(a, z)| a * z.max(0.0)).sum()
}

/// `h(x; θ)` on a raw input vector of the network's input dimension.
pub fn forward_raw(params: &MlpParams, x: &[f64]) -> Result<f64> {
    check_input(params, x)?;
    let pre = hidden_preactivations(params, x);
    Ok(output_of(params, pre.last().expect("depth ≥ 2")))
}

/// `h(x; θ)`.
pub fn forward(params: &MlpParams, x: &PaddedContext) -> Result<f64> {
    forward_raw(params, &x.x)
}

/// Hidden pre-activations of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pre: Vec<Vec<f64>>,
    pub output: f64,
}

pub fn forward_pass(params: &MlpParams, x: &[f64]) -> Result<ForwardPass> {
    check_input(params, x)?;
    let pre = hidden_preactivations(params, x);
    let output = output_of(params, pre.last().expect("depth ≥ 2"));
    Ok(ForwardPass { pre, output })
}

/// Adds `scale · ∇_θ h(x; θ)` into `out`, reusing the activations of `pass`
/// (which must come from the same `params` and `x`).
///
/// The ReLU derivative at exactly zero is taken as zero.
pub fn backprop(params: &MlpParams, x: &[f64], pass: &ForwardPass, scale: f64, out: &mut [f64]) -> Result<()> {
    check_input(params, x)?;
    if out.len() != params.len() {
        return Err(invalid("gradient buffer has the wrong length"));
    }
    let shape = params.shape;
    let depth = shape.depth;
    let pre = &pass.pre;

    // output row: ∂h/∂W_L = a_{L−1}
    let (off, _, _) = shape.layer(depth - 1);
    for (o, z) in out[off..].iter_mut().zip(&pre[depth - 2]) {
        *o += scale * z.max(0.0);
    }
    let mut delta: Vec<f64> = params
        .layer(depth - 1)
        .iter()
        .zip(&pre[depth - 2])
        .map(|(w, z)| if *z > 0.0 { scale * w } else { 0.0 })
        .collect();

    for l in (0..depth - 1).rev() {
        let (off, rows, cols) = shape.layer(l);
        let activated;
        let input: &[f64] = if l == 0 {
            x
        } else {
            activated = relu(&pre[l - 1]);
            &activated
        };
        for (i, &di) in delta.iter().enumerate().take(rows) {
            if di == 0.0 {
                continue;
            }
            let row = &mut out[off + i * cols..off + (i + 1) * cols];
            for (o, a) in row.iter_mut().zip(input) {
                *o += di * a;
            }
        }
        if l > 0 {
            let w = params.layer(l);
            let mut next = vec![0.0; cols];
            for (i, &di) in delta.iter().enumerate().take(rows) {
                if di == 0.0 {
                    continue;
                }
                for (n, wij) in next.iter_mut().zip(&w[i * cols..(i + 1) * cols]) {
                    *n += di * wij;
                }
            }
            for (n, z) in next.iter_mut().zip(&pre[l - 1]) {
                if *z <= 0.0 {
                    *n = 0.0;
                }
            }
            delta = next;
        }
    }
    Ok(())
}

/// Adds `scale · ∇_θ h(x; θ)` into `out` and returns `h(x; θ)`.
/// The gradient of `h(x; θ)` in factored form: the block of layer `l` is
/// the outer product `δ_l a_{l−1}ᵀ`, where `δ_l` is the backpropagated
/// signal and `a_{l−1}` the layer input. The output layer has `δ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradFactors {
    layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl GradFactors {
    /// `‖∇h‖²` without forming the gradient.
    pub fn sq_norm(&self) -> f64 {
        grad_inner(self, self)
    }

    /// Expands to the flat gradient vector.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (delta, input) in &self.layers {
            for d in delta {
                out.extend(input.iter().map(|a| d * a));
            }
        }
        out
    }
}

/// `⟨∇h(x), ∇h(x')⟩` in `O(L·m)` instead of `O(p)`.
pub fn grad_inner(a: &GradFactors, b: &GradFactors) -> f64 {
    a.layers
        .iter()
        .zip(&b.layers)
        .map(|((da, ia), (db, ib))| dot(da, db) * dot(ia, ib))
        .sum()
}

pub fn grad_factors(params: &MlpParams, x: &[f64]) -> Result<GradFactors> {
    let pass = forward_pass(params, x)?;
    let shape = params.shape;
    let depth = shape.depth;
    let pre = &pass.pre;
    let mut layers = vec![(Vec::new(), Vec::new()); depth];
    layers[depth - 1] = (vec![1.0], relu(&pre[depth - 2]));
    let mut delta: Vec<f64> = params
        .layer(depth - 1)
        .iter()
        .zip(&pre[depth - 2])
        .map(|(w, z)| if *z > 0.0 { *w } else { 0.0 })
        .collect();
    for l in (0..depth - 1).rev() {
        let input = if l == 0 { x.to_vec() } else { relu(&pre[l - 1]) };
        let next = if l > 0 {
            let (_, rows, cols) = shape.layer(l);
            let w = params.layer(l);
            let mut next = vec![0.0; cols];
            for (i, &di) in delta.iter().enumerate().take(rows) {
                if di == 0.0 {
                    continue;
                }
                for (n, wij) in next.iter_mut().zip(&w[i * cols..(i + 1) * cols]) {
                    *n += di * wij;
                }
            }
            for (n, z) in next.iter_mut().zip(&pre[l - 1]) {
                if *z <= 0.0 {
                    *n = 0.0;
                }
            }
            next
        } else {
            Vec::new()
        };
        layers[l] = (std::mem::replace(&mut delta, next), input);
    }
    Ok(GradFactors { layers })
}

pub fn accumulate_grad_raw(params: &MlpParams, x: &[f64], scale: f64, out: &mut [f64]) -> Result<f64> {
    let pass = forward_pass(params, x)?;
    backprop(params, x, &pass, scale, out)?;
    Ok(pass.output)
}

/// `g(x; θ) = ∇_θ h(x; θ)`.
pub fn grad(params: &MlpParams, x: &PaddedContext) -> Result<Vec<f64>> {
    let mut g = vec![0.0; params.len()];
    accumulate_grad_raw(params, &x.x, 1.0, &mut g)?;
    Ok(g)
}

/// Smallest `|pre-activation|` over all hidden units, used to keep finite
/// differences away from ReLU kinks.
pub fn min_abs_preactivation(params: &MlpParams, x: &[f64]) -> Result<f64> {
    check_input(params, x)?;
    Ok(hidden_preactivations(params, x)
        .iter()
        .flatten()
        .fold(f64::INFINITY, |m, z| m.min(z.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::sample_unit_sphere;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn param_count_and_layout() {
        let s = MlpShape::new(40, 64, 2).unwrap();
        assert_eq!(s.param_count(), 2624);
        let s3 = MlpShape::new(4, 6, 3).unwrap();
        assert_eq!(s3.param_count(), 24 + 36 + 6);
        assert_eq!(s3.layer(1), (24, 6, 6));
        assert_eq!(s3.layer(2), (60, 1, 6));
        assert!(MlpShape::new(4, 6, 1).is_err());
    }

    #[test]
    fn padding() {
        let p = pad_context(&[1.0, 0.0]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(p.as_slice(), &[r, 0.0, r, 0.0]);
        assert!(pad_context(&[0.0, 0.0]).is_err());
        let mut rng = stream_rng(3, Stream::Arms, 0);
        for _ in 0..100 {
            let x = sample_unit_sphere(&mut rng, 7);
            let p = pad_context(&x).unwrap();
            assert!((norm2(p.as_slice()) - 1.0).abs() < 1e-12);
            assert_eq!(p.as_slice()[..7], p.as_slice()[7..]);
        }
    }

    #[test]
    fn mirrored_init_structure() {
        let shape = MlpShape::new(6, 8, 3).unwrap();
        let params = init_symmetric(shape, &mut stream_rng(1, Stream::Init, 0)).unwrap();
        let w1 = params.layer(0);
        for i in 0..8 {
            for j in 0..6 {
                let off_diag = (i < 4) != (j < 3);
                if off_diag {
                    assert_eq!(w1[i * 6 + j], 0.0);
                }
            }
        }
        let w2 = params.layer(1);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(w2[i * 8 + j], w2[(i + 4) * 8 + j + 4]);
                assert_eq!(w2[i * 8 + j + 4], 0.0);
            }
        }
        let out = params.layer(2);
        for i in 0..4 {
            assert_eq!(out[i], -out[i + 4]);
        }
        assert!(init_symmetric(MlpShape::new(5, 8, 2).unwrap(), &mut stream_rng(1, Stream::Init, 0)).is_err());
        assert!(init_symmetric(MlpShape::new(6, 7, 2).unwrap(), &mut stream_rng(1, Stream::Init, 0)).is_err());
    }

    #[test]
    fn zero_output_at_init() {
        for (m, depth) in [(16, 2), (64, 3)] {
            let shape = MlpShape::new(10, m, depth).unwrap();
            let params = init_symmetric(shape, &mut stream_rng(2, Stream::Init, 0)).unwrap();
            let mut rng = stream_rng(2, Stream::Arms, 0);
            for _ in 0..100 {
                let x = pad_context(&sample_unit_sphere(&mut rng, 5)).unwrap();
                assert!(forward(&params, &x).unwrap().abs() < 1e-10);
            }
        }
    }

    #[test]
    fn hand_computed_forward() {
        // W1 = [[1, 0, 0, 0], [0, 0, -1, 2]], W2 = [3, 5], x = (1, 0, 1, 0)/√2
        let shape = MlpShape::new(4, 2, 2).unwrap();
        let theta = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 2.0, 3.0, 5.0];
        let params = MlpParams::from_flat(shape, theta).unwrap();
        let x = pad_context(&[1.0, 0.0]).unwrap();
        // z = (1/√2, −1/√2) → a = (1/√2, 0) → h = 3/√2
        let h = forward(&params, &x).unwrap();
        assert!((h - 3.0 * std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let g = grad(&params, &x).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [3.0 * r, 0.0, 3.0 * r, 0.0, 0.0, 0.0, 0.0, 0.0, r, 0.0];
        for (a, b) in g.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn layer_homogeneity() {
        let shape = MlpShape::new(6, 8, 3).unwrap();
        let mut rng = stream_rng(5, Stream::Init, 0);
        let theta: Vec<f64> = (0..shape.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let params = MlpParams::from_flat(shape, theta).unwrap();
        let x = pad_context(&[0.3, -0.2, 0.9]).unwrap();
        let h = forward(&params, &x).unwrap();
        for l in 0..3 {
            let mut scaled = params.clone();
            scaled.layer_mut(l).iter_mut().for_each(|w| *w *= 2.5);
            assert!((forward(&scaled, &x).unwrap() - 2.5 * h).abs() < 1e-12 * (1.0 + h.abs()));
        }
    }

    #[test]
    fn output_gradient_is_last_activation() {
        let shape = MlpShape::new(4, 6, 2).unwrap();
        let params = init_symmetric(shape, &mut stream_rng(6, Stream::Init, 0)).unwrap();
        let x = pad_context(&[0.6, 0.8]).unwrap();
        let g = grad(&params, &x).unwrap();
        let pre = hidden_preactivations(&params, x.as_slice());
        let (off, _, _) = shape.layer(1);
        assert_eq!(&g[off..], relu(&pre[0]).as_slice());
        // mirrored halves: output gradients equal, first-layer gradients flip sign
        assert_eq!(g[off..off + 3], g[off + 3..]);
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(g[i * 4 + j], -g[(i + 3) * 4 + j + 2]);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let shape = MlpShape::new(6, 8, 3).unwrap();
        let mut rng = stream_rng(7, Stream::Init, 0);
        let mut checked = 0;
        while checked < 10 {
            let theta: Vec<f64> = (0..shape.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let params = MlpParams::from_flat(shape, theta).unwrap();
            let x = pad_context(&sample_unit_sphere(&mut rng, 3)).unwrap();
            if min_abs_preactivation(&params, x.as_slice()).unwrap() < 1e-3 {
                continue;
            }
            let g = grad(&params, &x).unwrap();
            let eps = 1e-6;
            for (k, &gk) in g.iter().enumerate() {
                let mut plus = params.clone();
                plus.flat_mut()[k] += eps;
                let mut minus = params.clone();
                minus.flat_mut()[k] -= eps;
                let fd = (forward(&plus, &x).unwrap() - forward(&minus, &x).unwrap()) / (2.0 * eps);
                assert!((fd - gk).abs() <= 1e-5 * (1.0 + gk.abs()), "{k}: {fd} vs {gk}");
            }
            checked += 1;
        }
    }

    #[test]
    fn factored_gradient_matches_flat() {
        for depth in [2, 3, 4] {
            let mut rng = stream_rng(11, Stream::Init, depth as u64);
            let shape = MlpShape::new(6, 8, depth).unwrap();
            let params = init_symmetric(shape, &mut rng).unwrap();
            let xs: Vec<PaddedContext> = (0..4)
                .map(|_| pad_context(&(0..3).map(|_| rng.random::<f64>() - 0.5).collect::<Vec<_>>()).unwrap())
                .collect();
            let fs: Vec<GradFactors> = xs
                .iter()
                .map(|x| grad_factors(&params, x.as_slice()).unwrap())
                .collect();
            let gs: Vec<Vec<f64>> = xs.iter().map(|x| grad(&params, x).unwrap()).collect();
            for (f, g) in fs.iter().zip(&gs) {
                assert_eq!(f.to_flat().len(), g.len());
                for (a, b) in f.to_flat().iter().zip(g) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
            for i in 0..4 {
                for j in 0..4 {
                    let direct: f64 = gs[i].iter().zip(&gs[j]).map(|(a, b)| a * b).sum();
                    assert!((grad_inner(&fs[i], &fs[j]) - direct).abs() < 1e-10 * (1.0 + direct.abs()));
                }
            }
        }
    }
}
