//! Stochastic approximation proximal gradient trainers.
//!
//! [`train_single`] runs one posterior chain and one prior chain; [`train_batched`]
//! runs one posterior chain per image of every measurement batch against a
//! single shared prior chain. Both interleave `m_n` Langevin steps with one
//! projected ascent step on θ.

use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::crr::CrrParams;
use crate::error::{Error, Result};
use crate::likelihoods::Likelihood;
use crate::regularizer::{GroupScales, ParamVector, Potential, Regularizer};
use crate::rng::RngStream;
use crate::samplers::{ChainState, KernelKind};
use crate::tensor::Tensor;

/// Stream id of the `i`-th posterior chain, counting across batches.
pub const POSTERIOR_STREAM_BASE: u64 = 1_000;
/// Stream id of the `j`-th prior chain image.
pub const PRIOR_STREAM_BASE: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SapgConfig {
    /// θ step size δ (already divided by the pixel count when using [`SapgConfig::scaled_delta`])
    pub delta: f64,
    pub m_n: usize,
    pub iterations: u64,
    /// posterior chain step γ
    pub gamma: f64,
    /// prior chain step γ′
    pub gamma_prime: f64,
    pub posterior_kernel: KernelKind,
    pub prior_kernel: KernelKind,
    pub checkpoint_every: u64,
    pub seed: u64,
    pub scales: GroupScales,
    /// Divide the accumulated batch direction by `B`.
    pub normalize_by_batches: bool,
}

impl Default for SapgConfig {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            m_n: 1,
            iterations: 1000,
            gamma: 1e-4,
            gamma_prime: 1e-4,
            posterior_kernel: KernelKind::Ula,
            prior_kernel: KernelKind::Ula,
            checkpoint_every: 500,
            seed: 0,
            scales: GroupScales::default(),
            normalize_by_batches: false,
        }
    }
}

impl SapgConfig {
    /// `δ₀ / d` for images with `d` pixels.
    pub fn scaled_delta(delta0: f64, pixels: usize) -> f64 {
        delta0 / pixels as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad("delta must be positive");
        }
        if self.m_n == 0 {
            return bad("m_n must be at least 1");
        }
        if !(self.gamma > 0.0 && self.gamma_prime > 0.0) {
            return bad("gamma and gamma_prime must be positive");
        }
        Ok(())
    }
}

/// Trainer state: θ, chains and the monitoring trace.
#[derive(Debug)]
pub struct TrainState<R: Regularizer> {
    pub theta: R,
    /// `posterior[b][i]` is the chain of image `i` in batch `b`
    pub posterior: Vec<Vec<ChainState>>,
    pub prior: Vec<ChainState>,
    pub iteration: u64,
    pub loss: Vec<f64>,
}

impl<R: Regularizer> TrainState<R> {
    /// Chains from explicit starting points, with streams derived from `seed`.
    pub fn new(theta: R, posterior_init: Vec<Vec<Tensor>>, prior_init: Vec<Tensor>, seed: u64) -> Result<Self> {
        if posterior_init.is_empty() || posterior_init.iter().any(|b| b.is_empty()) {
            return Err(Error::InvalidArgument("every batch needs at least one chain".into()));
        }
        if prior_init.is_empty() {
            return Err(Error::InvalidArgument("the prior chain needs a starting point".into()));
        }
        let mut id = POSTERIOR_STREAM_BASE;
        let posterior = posterior_init
            .into_iter()
            .map(|batch| {
                batch
                    .into_iter()
                    .map(|x| {
                        id += 1;
                        ChainState::new(x, RngStream::new(seed, id - 1))
                    })
                    .collect()
            })
            .collect();
        let prior = prior_init
            .into_iter()
            .enumerate()
            .map(|(j, x)| ChainState::new(x, RngStream::new(seed, PRIOR_STREAM_BASE + j as u64)))
            .collect();
        Ok(Self {
            theta,
            posterior,
            prior,
            iteration: 0,
            loss: Vec::new(),
        })
    }

    /// Posterior chains start at each likelihood's initial estimate.
    pub fn from_likelihoods(
        theta: R,
        batches: &[Vec<Likelihood>],
        prior_init: Vec<Tensor>,
        seed: u64,
    ) -> Result<Self> {
        let init = batches
            .iter()
            .map(|b| b.iter().map(Likelihood::initial_estimate).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(theta, init, prior_init, seed)
    }

    pub fn batch_count(&self) -> usize {
        self.posterior.len()
    }
}

/// Prior chain starting points: `x + 0.1 · rms(x) · Z` for each sample.
pub fn perturbed_prior_init(samples: &[Tensor], seed: u64) -> Vec<Tensor> {
    let mut rng = RngStream::new(seed, PRIOR_STREAM_BASE - 1);
    samples
        .iter()
        .map(|x| {
            let rms = (x.norm_sq() / x.len().max(1) as f64).sqrt();
            let s = 0.1 * if rms > 0.0 { rms } else { 1.0 };
            x.map(|v| v + s * rng.std_normal())
        })
        .collect()
}

fn non_finite(iteration: u64, what: &str) -> Error {
    Error::NonFinite {
        context: format!("{what} at iteration {iteration}"),
    }
}

/// `Σ_j ∇_θ g(x_j)` and `Σ_j g(x_j)`, reduced in index order.
fn summed_grad<R: Regularizer>(theta: &R, xs: &[&Tensor]) -> Result<(f64, R::Grad)> {
    let parts: Vec<(f64, R::Grad)> = xs
        .par_iter()
        .map(|x| theta.value_grad_theta(x))
        .collect::<Result<_>>()?;
    let mut iter = parts.into_iter();
    let (mut value, mut grad) = iter.next().expect("non-empty sample set");
    for (v, g) in iter {
        value += v;
        grad.axpy(1.0, &g);
    }
    Ok((value, grad))
}

/// `θ ← Π_Θ[θ + (δ/m_n) Σ_k {∇_θ g(x̄_k) − ∇_θ g(x_k)}]`
pub fn soul_step<R: Regularizer>(
    theta: &mut R,
    prior_samples: &[Tensor],
    posterior_samples: &[Tensor],
    delta: f64,
    m_n: usize,
) -> Result<()> {
    soul_step_scaled(theta, prior_samples, posterior_samples, delta, m_n, &GroupScales::default())
}

pub fn soul_step_scaled<R: Regularizer>(
    theta: &mut R,
    prior_samples: &[Tensor],
    posterior_samples: &[Tensor],
    delta: f64,
    m_n: usize,
    scales: &GroupScales,
) -> Result<()> {
    if prior_samples.len() != posterior_samples.len() || prior_samples.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "need equally many prior and posterior samples, got {} and {}",
            prior_samples.len(),
            posterior_samples.len()
        )));
    }
    let mut dir = theta.zero_grad();
    for (p, q) in prior_samples.iter().zip(posterior_samples) {
        p.check_shape(q.shape())?;
        accumulate(&mut dir, &theta.grad_theta(p)?, 1.0, &theta.grad_theta(q)?);
    }
    finish_step(theta, dir, delta / m_n as f64, scales, 0)
}

#[inline]
fn accumulate<G: ParamVector>(dir: &mut G, prior: &G, weight: f64, posterior: &G) {
    dir.axpy(weight, prior);
    dir.axpy(-1.0, posterior);
}

fn finish_step<R: Regularizer>(
    theta: &mut R,
    mut dir: R::Grad,
    factor: f64,
    scales: &GroupScales,
    iteration: u64,
) -> Result<()> {
    if !dir.is_finite() {
        return Err(non_finite(iteration, "SOUL direction"));
    }
    dir.scale(factor);
    theta.apply_step(&dir, scales);
    theta.project();
    Ok(())
}

/// Callback receiving `(iteration, θ)` at the checkpoint cadence.
pub type CheckpointSink<'a, R> = dyn FnMut(u64, &R) -> Result<()> + 'a;

fn check_single<R: Regularizer>(state: &TrainState<R>) -> Result<()> {
    if state.posterior.len() != 1 || state.posterior[0].len() != 1 || state.prior.len() != 1 {
        return Err(Error::InvalidArgument(
            "the single-measurement trainer uses exactly one posterior and one prior chain".into(),
        ));
    }
    Ok(())
}

/// SAPG with one posterior chain (one measurement) and one prior chain.
pub fn train_single<R: Regularizer>(
    config: &SapgConfig,
    likelihood: &Likelihood,
    state: &mut TrainState<R>,
    sink: &mut CheckpointSink<'_, R>,
) -> Result<()> {
    config.validate()?;
    check_single(state)?;
    for _ in 0..config.iterations {
        let n = state.iteration;
        let theta = &state.theta;
        let mut dir = theta.zero_grad();
        let mut loss = 0.0;
        for _ in 0..config.m_n {
            let post = &mut state.posterior[0][0];
            config
                .posterior_kernel
                .step(post, |x| posterior_energy_grad(likelihood, theta, x), config.gamma)?;
            let prior = &mut state.prior[0];
            config
                .prior_kernel
                .step(prior, |x| theta.grad_x(x), config.gamma_prime)?;
            let (gp, dp) = theta.value_grad_theta(&state.prior[0].x)?;
            let (gq, dq) = theta.value_grad_theta(&state.posterior[0][0].x)?;
            accumulate(&mut dir, &dp, 1.0, &dq);
            loss += gq - gp;
        }
        let mut theta = state.theta.clone();
        finish_step(&mut theta, dir, config.delta / config.m_n as f64, &config.scales, n)?;
        state.theta = theta;
        state.loss.push(loss / config.m_n as f64);
        state.iteration += 1;
        emit_checkpoint(config, state, sink)?;
    }
    Ok(())
}

fn posterior_energy_grad<R: Potential>(likelihood: &Likelihood, theta: &R, x: &Tensor) -> Result<Tensor> {
    let mut g = likelihood.grad(x)?;
    g.axpy(1.0, &theta.grad_x(x)?);
    Ok(g)
}

fn emit_checkpoint<R: Regularizer>(
    config: &SapgConfig,
    state: &TrainState<R>,
    sink: &mut CheckpointSink<'_, R>,
) -> Result<()> {
    if config.checkpoint_every > 0 && state.iteration.is_multiple_of(config.checkpoint_every) {
        sink(state.iteration, &state.theta)?;
    }
    Ok(())
}

/// Batched SAPG: `batches[b][i]` is the likelihood of image `i` in batch `b`.
///
/// The prior term enters once per batch. For a batch of `n_b` images and a
/// prior chain of `n̄` images it is weighted by `n_b / n̄`, so each batch pairs
/// a full batch worth of posterior gradients with a matched prior estimate.
pub fn train_batched<R: Regularizer>(
    config: &SapgConfig,
    batches: &[Vec<Likelihood>],
    state: &mut TrainState<R>,
    sink: &mut CheckpointSink<'_, R>,
) -> Result<()> {
    config.validate()?;
    if batches.len() != state.posterior.len()
        || batches.iter().zip(&state.posterior).any(|(l, c)| l.len() != c.len())
    {
        return Err(Error::InvalidArgument(
            "posterior chains do not match the measurement batches".into(),
        ));
    }
    let n_prior = state.prior.len();
    let weights: Vec<f64> = batches
        .iter()
        .map(|b| if b.len() == n_prior { 1.0 } else { b.len() as f64 / n_prior as f64 })
        .collect();
    let post_count: usize = batches.iter().map(Vec::len).sum();
    let factor = config.delta / config.m_n as f64
        / if config.normalize_by_batches { batches.len() as f64 } else { 1.0 };

    for _ in 0..config.iterations {
        let n = state.iteration;
        let theta = &state.theta;
        let mut dir = theta.zero_grad();
        let mut loss = 0.0;
        for _ in 0..config.m_n {
            state
                .prior
                .par_iter_mut()
                .map(|c| config.prior_kernel.step(c, |x| theta.grad_x(x), config.gamma_prime))
                .collect::<Result<Vec<_>>>()?;
            for (chains, lik) in state.posterior.iter_mut().zip(batches) {
                chains
                    .par_iter_mut()
                    .zip(lik.par_iter())
                    .map(|(c, l)| {
                        config
                            .posterior_kernel
                            .step(c, |x| posterior_energy_grad(l, theta, x), config.gamma)
                    })
                    .collect::<Result<Vec<_>>>()?;
            }
            let prior_x: Vec<&Tensor> = state.prior.iter().map(|c| &c.x).collect();
            let (gp, dp) = summed_grad(theta, &prior_x)?;
            let mut gq_total = 0.0;
            for (chains, &w) in state.posterior.iter().zip(&weights) {
                let xs: Vec<&Tensor> = chains.iter().map(|c| &c.x).collect();
                let (gq, dq) = summed_grad(theta, &xs)?;
                accumulate(&mut dir, &dp, w, &dq);
                gq_total += gq;
            }
            loss += gq_total / post_count as f64 - gp / n_prior as f64;
        }
        let mut theta = state.theta.clone();
        finish_step(&mut theta, dir, factor, &config.scales, n)?;
        state.theta = theta;
        state.loss.push(loss / config.m_n as f64);
        state.iteration += 1;
        emit_checkpoint(config, state, sink)?;
    }
    Ok(())
}

/// Per-iteration `g_θ(X) − g_θ(X̄)` recorded during training.
pub fn loss_trace<R: Regularizer>(state: &TrainState<R>) -> &[f64] {
    &state.loss
}

pub fn write_loss_csv(path: impl AsRef<Path>, loss: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("iter,loss\n");
    for (i, l) in loss.iter().enumerate() {
        out.push_str(&format!("{},{:e}\n", i + 1, l));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Adversarial warm start of a CRR from paired clean and noisy images.
///
/// Descends `L(θ) = mean[g(x_clean) − g(x_noisy)] + max(1, Lip(θ))`, projecting
/// after each step, and returns the final θ with the loss before every step.
pub fn warmstart_adversarial(
    theta0: &CrrParams,
    clean: &[Tensor],
    noisy: &[Tensor],
    iters: usize,
    step: f64,
) -> Result<(CrrParams, Vec<f64>)> {
    if clean.len() != noisy.len() || clean.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "warm start needs equally many clean and noisy images, got {} and {}",
            clean.len(),
            noisy.len()
        )));
    }
    let (h, w) = match *clean[0].shape() {
        [_, h, w] => (h, w),
        _ => return Err(Error::shape(&[0, 0, 0], clean[0].shape())),
    };
    let mut theta = theta0.clone().projected();
    let mut losses = Vec::with_capacity(iters);
    for _ in 0..iters {
        let (loss, grad) = warmstart_loss_grad(&theta, clean, noisy, h, w)?;
        losses.push(loss);
        let mut step_dir = grad;
        step_dir.scale(-step);
        theta.apply_step(&step_dir, &GroupScales::default());
        theta.project_params();
    }
    Ok((theta, losses))
}

/// Warm-start objective and its θ-gradient.
pub fn warmstart_loss_grad(
    theta: &CrrParams,
    clean: &[Tensor],
    noisy: &[Tensor],
    h: usize,
    w: usize,
) -> Result<(f64, crate::crr::ThetaGradient)> {
    let m = clean.len() as f64;
    let mut grad = theta.zero_theta_grad();
    let mut loss = 0.0;
    for (c, n) in clean.iter().zip(noisy) {
        let (gc, dc) = theta.g_value_grad_theta(c)?;
        let (gn, dn) = theta.g_value_grad_theta(n)?;
        loss += (gc - gn) / m;
        grad.axpy(1.0 / m, &dc);
        grad.axpy(-1.0 / m, &dn);
    }
    let (lip, dlip) = theta.lipschitz_bound_grad(h, w)?;
    if lip > 1.0 {
        loss += lip;
        grad.axpy(1.0, &dlip);
    } else {
        loss += 1.0;
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::QuadraticPrior;
    use crate::likelihoods::GaussianLikelihood;
    use crate::operators::LinearOperator;

    fn noop<R>(_: u64, _: &R) -> Result<()> {
        Ok(())
    }

    #[test]
    fn identical_samples_leave_theta_unchanged() {
        let mut q = QuadraticPrior::new(1.7).unwrap();
        let x = Tensor::from_fn(&[4], |i| i as f64);
        soul_step(&mut q, std::slice::from_ref(&x), std::slice::from_ref(&x), 0.1, 1).unwrap();
        assert_eq!(q.theta, 1.7);
    }

    #[test]
    fn quadratic_update_direction() {
        let mut q = QuadraticPrior::new(1.0).unwrap();
        let xbar = Tensor::filled(&[2], 2.0);
        let x = Tensor::filled(&[2], 1.0);
        // (δ/2)(‖x̄‖² − ‖x‖²) = 0.05 * (8 − 2)
        soul_step(&mut q, &[xbar], &[x], 0.1, 1).unwrap();
        assert!((q.theta - 1.3).abs() < 1e-15);
    }

    #[test]
    fn zero_iterations_return_initial_theta() {
        let q = QuadraticPrior::new(0.4).unwrap();
        let y = Tensor::filled(&[1, 2, 2], 0.5);
        let lik: Likelihood = GaussianLikelihood::new(LinearOperator::identity(&[1, 2, 2]).unwrap(), y.clone(), 0.5)
            .unwrap()
            .into();
        let mut s = TrainState::new(q, vec![vec![y.clone()]], vec![y], 0).unwrap();
        let cfg = SapgConfig {
            iterations: 0,
            ..Default::default()
        };
        train_single(&cfg, &lik, &mut s, &mut noop).unwrap();
        assert_eq!(s.theta, q);
        assert!(s.loss.is_empty());
    }

    #[test]
    fn mismatched_sample_counts_error() {
        let mut q = QuadraticPrior::new(1.0).unwrap();
        let x = Tensor::zeros(&[2]);
        assert!(soul_step(&mut q, &[x.clone(), x.clone()], &[x], 0.1, 1).is_err());
    }
}
