//! Mirrored initialization: the network output is exactly zero at θ₀ for
//! every padded context, while its gradient is not.
//!
//! cargo run --release --example symmetric_init

use duelay::environment::sample_unit_ball;
use duelay::linalg::norm2;
use duelay::neural_model::{forward, grad, init_symmetric, pad_context, MlpShape};
use duelay::rng::{stream_rng, Stream};

fn main() -> duelay::Result<()> {
    let raw_dim = 20;
    for (width, depth) in [(16, 2), (64, 3)] {
        let shape = MlpShape::new(2 * raw_dim, width, depth)?;
        let theta0 = init_symmetric(shape, &mut stream_rng(0, Stream::Init, 0))?;
        let mut rng = stream_rng(0, Stream::Arms, 0);
        let mut max_out: f64 = 0.0;
        let mut grad_norms = Vec::new();
        for _ in 0..100 {
            let x = pad_context(&sample_unit_ball(&mut rng, raw_dim))?;
            max_out = max_out.max(forward(&theta0, &x)?.abs());
            grad_norms.push(norm2(&grad(&theta0, &x)?));
        }
        let mean_grad = grad_norms.iter().sum::<f64>() / grad_norms.len() as f64;
        println!(
            "m={width:3} L={depth}: {} parameters, max |h(x;θ₀)| = {max_out:.1e}, mean ‖∇h‖ = {mean_grad:.3}",
            shape.param_count()
        );
    }
    Ok(())
}
