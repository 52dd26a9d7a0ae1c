//! Dot-product test ⟨Ax, y⟩ = ⟨x, Aᵀy⟩ for every forward operator.

use sapg_crr::operators::{gaussian_blur_kernel, LinearOperator};
use sapg_crr::rng::{sample_std_normal, RngStream};

fn main() -> sapg_crr::Result<()> {
    let shape = [3, 12, 10];
    let mut r = RngStream::new(0, 0);
    let ops = [
        LinearOperator::identity(&shape)?,
        LinearOperator::conv2d(gaussian_blur_kernel(7, 2.0)?, &shape)?,
        LinearOperator::random_mask(&shape, 0.3, &mut r)?,
        LinearOperator::finite_difference(&shape)?,
    ];
    for op in &ops {
        let x = sample_std_normal(&mut r, &shape);
        let y = sample_std_normal(&mut r, &op.output_shape());
        let (a, b) = (op.apply(&x)?.dot(&y), x.dot(&op.adjoint(&y)?));
        println!("{:<24} {a:+.12e} {b:+.12e}", op.name());
    }
    Ok(())
}
