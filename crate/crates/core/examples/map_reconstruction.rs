//! MAP denoising with a CRR prior and a grid search over λ.

use sapg_crr::crr::{CrrArchitecture, CrrParams};
use sapg_crr::estimators::{run_map, MapConfig, Optimizer};
use sapg_crr::likelihoods::{GaussianLikelihood, Likelihood};
use sapg_crr::metrics::psnr;
use sapg_crr::operators::LinearOperator;
use sapg_crr::rng::{sample_std_normal, RngStream};
use sapg_crr::synthetic::blob_dataset;

fn main() -> sapg_crr::Result<()> {
    let x = blob_dataset(1, 1, 24, 24, 5)?.items()[0].tensor().clone();
    let mut y = x.clone();
    y.axpy(0.1, &sample_std_normal(&mut RngStream::new(0, 0), x.shape()));
    let lik: Likelihood = GaussianLikelihood::new(LinearOperator::identity(x.shape())?, y.clone(), 0.1)?.into();

    // untrained prior with finite-difference front end
    let arch = CrrArchitecture { mid_ch: 4, channels: 8, kernel_size: 5, use_diff: true, ..Default::default() };
    let prior = CrrParams::init(arch, &mut RngStream::new(1, 0))?;
    let config = MapConfig {
        lambdas: vec![0.1, 0.3, 1.0, 3.0, 10.0],
        max_iters: 2_000,
        step: 1e-2,
        optimizer: Optimizer::Adam,
        tol: 1e-6,
    };
    let res = run_map(&prior, &lik, &config, &y, Some(&x))?;
    for (l, p) in &res.scores {
        println!("λ {l:<5} {p:.2} dB");
    }
    println!("noisy {:.2} dB, best λ {} gives {:.2} dB", psnr(&y, &x, 1.0)?, res.lambda, psnr(&res.x, &x, 1.0)?);
    Ok(())
}
