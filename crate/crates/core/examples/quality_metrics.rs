//! PSNR and SSIM of a clean image against noisy copies.

use sapg_crr::metrics::{psnr, ssim};
use sapg_crr::rng::{sample_std_normal, RngStream};
use sapg_crr::synthetic::blob_dataset;

fn main() -> sapg_crr::Result<()> {
    let x = blob_dataset(1, 1, 32, 32, 3)?.items()[0].tensor().clone();
    let z = sample_std_normal(&mut RngStream::new(0, 0), x.shape());
    for sigma in [0.0, 0.01, 0.05, 0.1, 0.2] {
        let mut y = x.clone();
        y.axpy(sigma, &z);
        println!("σ {sigma:<5} psnr {:6.2} dB  ssim {:.4}", psnr(&y, &x, 1.0)?, ssim(&y, &x)?);
    }
    Ok(())
}
