//! Charbonnier-smoothed TV denoising, grid-searched for the best PSNR.

use sapg_crr::baselines::SmoothedTV;
use sapg_crr::estimators::{run_map, MapConfig, Optimizer};
use sapg_crr::likelihoods::{GaussianLikelihood, Likelihood};
use sapg_crr::metrics::psnr;
use sapg_crr::operators::LinearOperator;
use sapg_crr::rng::{sample_std_normal, RngStream};
use sapg_crr::synthetic::blob_dataset;

fn main() -> sapg_crr::Result<()> {
    let x = blob_dataset(1, 1, 32, 32, 2)?.items()[0].tensor().clone();
    let mut y = x.clone();
    y.axpy(0.1, &sample_std_normal(&mut RngStream::new(0, 0), x.shape()));
    let lik: Likelihood = GaussianLikelihood::new(LinearOperator::identity(x.shape())?, y.clone(), 0.1)?.into();
    let config = MapConfig {
        lambdas: vec![2.0, 5.0, 10.0, 20.0],
        max_iters: 3_000,
        step: 1e-2,
        optimizer: Optimizer::Adam,
        tol: 1e-6,
    };
    let res = run_map(&SmoothedTV::new(1.0, 1e-3)?, &lik, &config, &y, Some(&x))?;
    println!("noisy {:.2} dB", psnr(&y, &x, 1.0)?);
    for (l, p) in &res.scores {
        println!("λ {l:<4} {p:.2} dB");
    }
    Ok(())
}
