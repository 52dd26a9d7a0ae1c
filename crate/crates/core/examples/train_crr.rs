//! Batched SAPG training of a small CRR from noisy blob images only.

use sapg_crr::crr::{CrrArchitecture, CrrParams};
use sapg_crr::likelihoods::{corrupt_gaussian_with, GaussianLikelihood, Likelihood};
use sapg_crr::operators::LinearOperator;
use sapg_crr::rng::RngStream;
use sapg_crr::sapg::{perturbed_prior_init, train_batched, SapgConfig, TrainState};
use sapg_crr::synthetic::blob_dataset;

fn main() -> sapg_crr::Result<()> {
    let shape = [1, 16, 16];
    let sigma = 0.1;
    let clean = blob_dataset(16, 1, 16, 16, 0)?;
    let op = LinearOperator::identity(&shape)?;
    let noisy = corrupt_gaussian_with(&clean, &op, sigma, 1)?;
    let likelihoods: Vec<Likelihood> = noisy
        .tensors()
        .into_iter()
        .map(|y| GaussianLikelihood::new(op.clone(), y, sigma).map(Into::into))
        .collect::<sapg_crr::Result<_>>()?;
    let batches: Vec<Vec<Likelihood>> = likelihoods.chunks(4).map(<[_]>::to_vec).collect();

    let arch = CrrArchitecture { mid_ch: 4, channels: 8, kernel_size: 5, ..Default::default() };
    let theta = CrrParams::init(arch, &mut RngStream::new(0, 0))?;
    let starts: Vec<_> = batches[0].iter().map(Likelihood::initial_estimate).collect::<sapg_crr::Result<_>>()?;
    let mut state = TrainState::from_likelihoods(theta, &batches, perturbed_prior_init(&starts, 0), 0)?;
    let config = SapgConfig {
        delta: SapgConfig::scaled_delta(3e-4, 256),
        iterations: 300,
        gamma: 1e-3,
        gamma_prime: 1e-3,
        checkpoint_every: 100,
        ..Default::default()
    };
    let mut sink = |it: u64, th: &CrrParams| {
        println!("iteration {it}: Lipschitz bound {:.2}", th.lipschitz_bound(16, 16)?);
        Ok(())
    };
    train_batched(&config, &batches, &mut state, &mut sink)?;
    let tail = &state.loss[state.loss.len() - 50..];
    println!("mean posterior − prior energy over the last 50 steps: {:.4}", tail.iter().sum::<f64>() / 50.0);
    Ok(())
}
