//! Posterior mean and uncertainty map with a quadratic prior, where the
//! posterior is Gaussian and the mean is a closed-form shrinkage of y.

use sapg_crr::baselines::QuadraticPrior;
use sapg_crr::estimators::{run_mmse, MmseConfig};
use sapg_crr::likelihoods::{GaussianLikelihood, Likelihood};
use sapg_crr::operators::LinearOperator;
use sapg_crr::rng::{sample_std_normal, RngStream};

fn main() -> sapg_crr::Result<()> {
    let (sigma, theta) = (0.5, 1.0);
    let y = sample_std_normal(&mut RngStream::new(0, 0), &[1, 4, 4]);
    let lik: Likelihood = GaussianLikelihood::new(LinearOperator::identity(y.shape())?, y.clone(), sigma)?.into();
    let config = MmseConfig { warmstart: 1_000, samples: 50_000, gamma: 1e-2, ..Default::default() };
    let est = run_mmse(&QuadraticPrior::new(theta)?, &lik, &config)?;

    let prec = 1.0 / (sigma * sigma) + theta;
    for i in 0..4 {
        let want = y.data()[i] / (sigma * sigma) / prec;
        println!("pixel {i}: mean {:+.4} (exact {want:+.4})  std {:.4} (exact {:.4})", est.mean.data()[i], est.std.data()[i], prec.powf(-0.5));
    }
    Ok(())
}
