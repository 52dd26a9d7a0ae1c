//! ULA on a standard normal: the stationary variance is 2/(2−γ), not 1.

use sapg_crr::rng::RngStream;
use sapg_crr::samplers::{ula_step, ChainState};
use sapg_crr::Tensor;

fn main() -> sapg_crr::Result<()> {
    for gamma in [0.4, 0.1, 0.025] {
        let mut c = ChainState::new(Tensor::zeros(&[1]), RngStream::new(0, 0));
        for _ in 0..1_000 {
            ula_step(&mut c, |x| Ok(x.clone()), gamma)?;
        }
        c.attach_welford();
        for _ in 0..200_000 {
            ula_step(&mut c, |x| Ok(x.clone()), gamma)?;
        }
        let (_, var) = c.take_welford().expect("attached").mean_var()?;
        println!("γ {gamma:<6} empirical var {:.4}  theory {:.4}", var.data()[0], 2.0 / (2.0 - gamma));
    }
    Ok(())
}
