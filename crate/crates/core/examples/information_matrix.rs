//! Three interchangeable views of `V = r·I + Σ v vᵀ`.
//!
//! cargo run --release --example information_matrix

use std::time::Instant;

use duelay::environment::sample_unit_ball;
use duelay::linalg::{dot, GramInfoMatrix, InfoMatrix, Information, KernelGram};
use duelay::rng::{stream_rng, Stream};

fn main() -> duelay::Result<()> {
    let (dim, updates, ridge) = (400, 300, 2.0);
    let mut rng = stream_rng(1, Stream::Arms, 0);
    let vs: Vec<Vec<f64>> = (0..updates).map(|_| sample_unit_ball(&mut rng, dim)).collect();
    let probe = sample_unit_ball(&mut rng, dim);

    let start = Instant::now();
    let mut dense = InfoMatrix::new(dim, ridge)?;
    for v in &vs {
        dense.rank_one_update(v, 1.0)?;
    }
    let q_dense = dense.inverse_quadratic(&probe)?;
    println!(
        "dense    {:>8.2?}  xᵀV⁻¹x = {q_dense:.12}  logdet = {:.6}",
        start.elapsed(),
        dense.logdet()
    );

    let start = Instant::now();
    let mut gram = GramInfoMatrix::new(dim, ridge)?;
    for v in &vs {
        gram.rank_one_update(v, 1.0)?;
    }
    let q_gram = gram.inverse_quadratic(&probe)?;
    println!(
        "gram     {:>8.2?}  xᵀV⁻¹x = {q_gram:.12}  logdet = {:.6}",
        start.elapsed(),
        gram.logdet()
    );

    // only inner products cross this interface
    let start = Instant::now();
    let mut kernel = KernelGram::new(dim, ridge)?;
    for (i, v) in vs.iter().enumerate() {
        let cross: Vec<f64> = vs[..i].iter().map(|u| dot(u, v)).collect();
        kernel.push(dot(v, v), &cross)?;
    }
    let cross: Vec<f64> = vs.iter().map(|u| dot(u, &probe)).collect();
    let q_kernel = kernel.inverse_quadratic(dot(&probe, &probe), &cross)?;
    println!(
        "kernel   {:>8.2?}  xᵀV⁻¹x = {q_kernel:.12}  logdet = {:.6}",
        start.elapsed(),
        kernel.logdet()
    );
    Ok(())
}
