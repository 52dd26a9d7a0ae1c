//! Adversarial warm start: lower g on clean images, raise it on noisy ones.

use sapg_crr::crr::{CrrArchitecture, CrrParams};
use sapg_crr::rng::{sample_std_normal, RngStream};
use sapg_crr::sapg::warmstart_adversarial;
use sapg_crr::synthetic::blob_dataset;

fn main() -> sapg_crr::Result<()> {
    let clean = blob_dataset(4, 1, 12, 12, 0)?.tensors();
    let mut r = RngStream::new(1, 0);
    let noisy: Vec<_> = clean
        .iter()
        .map(|x| {
            let mut y = x.clone();
            y.axpy(0.1, &sample_std_normal(&mut r, x.shape()));
            y
        })
        .collect();
    let arch = CrrArchitecture { mid_ch: 4, channels: 8, kernel_size: 5, ..Default::default() };
    let theta0 = CrrParams::init(arch, &mut RngStream::new(0, 0))?;
    let (theta, losses) = warmstart_adversarial(&theta0, &clean, &noisy, 60, 1e-3)?;
    for (i, l) in losses.iter().enumerate().step_by(10) {
        println!("step {i:>3}: loss {l:.4}");
    }
    println!("Lipschitz bound {:.3} → {:.3}", theta0.lipschitz_bound(12, 12)?, theta.lipschitz_bound(12, 12)?);
    Ok(())
}
