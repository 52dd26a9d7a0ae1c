//! Posterior-mean sampling and MAP reconstruction with a fixed prior.

use crate::error::{Error, Result};
use crate::likelihoods::{Likelihood, LikelihoodDomain};
use crate::metrics::psnr;
use crate::regularizer::Potential;
use crate::rng::RngStream;
use crate::samplers::{ChainState, KernelKind, TrajectoryDump};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct MmseConfig {
    pub warmstart: u64,
    pub samples: u64,
    pub gamma: f64,
    /// `None` picks the kernel matching the likelihood domain.
    pub kernel: Option<KernelKind>,
    pub seed: u64,
    pub stream: u64,
    pub dump: Option<TrajectoryDump>,
}

impl Default for MmseConfig {
    fn default() -> Self {
        Self {
            warmstart: 5_000,
            samples: 20_000,
            gamma: 1e-4,
            kernel: None,
            seed: 0,
            stream: 0,
            dump: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmseEstimate {
    pub mean: Tensor,
    /// pixel-wise population standard deviation
    pub std: Tensor,
}

/// Posterior mean and standard deviation of `exp(−f_y − g)` from one chain
/// started at the likelihood's initial estimate.
pub fn run_mmse<P: Potential + ?Sized>(
    prior: &P,
    likelihood: &Likelihood,
    config: &MmseConfig,
) -> Result<MmseEstimate> {
    if config.samples == 0 {
        return Err(Error::InvalidArgument("MMSE needs at least one sample".into()));
    }
    let kernel = config
        .kernel
        .unwrap_or_else(|| KernelKind::for_domain(likelihood.domain()));
    let mut x0 = likelihood.initial_estimate()?;
    if likelihood.domain() == LikelihoodDomain::NonNegative {
        x0.data_mut().iter_mut().for_each(|v| *v = v.abs());
    }
    let mut chain = ChainState::new(x0, RngStream::new(config.seed, config.stream));
    let grad = |x: &Tensor| -> Result<Tensor> {
        let mut g = likelihood.grad(x)?;
        g.axpy(1.0, &prior.grad_x(x)?);
        Ok(g)
    };
    for _ in 0..config.warmstart {
        kernel.step(&mut chain, grad, config.gamma)?;
    }
    chain.attach_welford();
    chain.dump = config.dump.clone();
    for _ in 0..config.samples {
        kernel.step(&mut chain, grad, config.gamma)?;
    }
    let acc = chain.take_welford().expect("accumulator attached above");
    let (mean, var) = acc.mean_var()?;
    Ok(MmseEstimate {
        mean,
        std: var.map(|v| v.max(0.0).sqrt()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Adam,
    GradientDescent,
}

impl Optimizer {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "adam" => Some(Optimizer::Adam),
            "gd" | "gradient_descent" => Some(Optimizer::GradientDescent),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MapConfig {
    pub lambdas: Vec<f64>,
    pub max_iters: usize,
    pub step: f64,
    pub optimizer: Optimizer,
    /// stop once `‖∇φ‖∞` falls below this
    pub tol: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            lambdas: (1..=10).map(|k| k as f64 / 10.0).collect(),
            max_iters: 10_000,
            step: 1e-3,
            optimizer: Optimizer::Adam,
            tol: 1e-6,
        }
    }
}

impl MapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() || self.lambdas.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidArgument("lambda grid must be non-empty and positive".into()));
        }
        if !(self.step > 0.0) {
            return Err(Error::InvalidArgument("optimizer step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MapRun {
    pub x: Tensor,
    /// `φ` before each iteration, then at the returned point
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `φ(x) = f_y(x) + λ g(x)` from `x0`. Non-negative likelihoods
/// project each iterate onto `x ≥ 0`.
pub fn minimize_map<P: Potential + ?Sized>(
    prior: &P,
    likelihood: &Likelihood,
    lambda: f64,
    config: &MapConfig,
    x0: &Tensor,
) -> Result<MapRun> {
    let nonneg = likelihood.domain() == LikelihoodDomain::NonNegative;
    let objective = |x: &Tensor| -> Result<(f64, Tensor)> {
        let (fv, mut fg) = likelihood.value_grad(x)?;
        let (gv, gg) = prior.value_grad_x(x)?;
        fg.axpy(lambda, &gg);
        let v = fv + lambda * gv;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: "MAP objective".into(),
            });
        }
        Ok((v, fg))
    };
    let mut x = x0.clone();
    if nonneg {
        x.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    }
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut m = Tensor::zeros(x.shape());
    let mut v = Tensor::zeros(x.shape());
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=config.max_iters {
        let (val, g) = objective(&x)?;
        trace.push(val);
        let gnorm = if nonneg {
            // projected gradient at the boundary
            x.data()
                .iter()
                .zip(g.data())
                .map(|(&xi, &gi)| if xi <= 0.0 && gi > 0.0 { 0.0 } else { gi.abs() })
                .fold(0.0, f64::max)
        } else {
            g.max_abs()
        };
        if gnorm <= config.tol {
            converged = true;
            break;
        }
        iterations = t;
        match config.optimizer {
            Optimizer::GradientDescent => x.axpy(-config.step, &g),
            Optimizer::Adam => {
                let (c1, c2) = (1.0 - b1.powi(t as i32), 1.0 - b2.powi(t as i32));
                for (((xi, mi), vi), &gi) in x
                    .data_mut()
                    .iter_mut()
                    .zip(m.data_mut())
                    .zip(v.data_mut())
                    .zip(g.data())
                {
                    *mi = b1 * *mi + (1.0 - b1) * gi;
                    *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                    *xi -= config.step * (*mi / c1) / ((*vi / c2).sqrt() + eps);
                }
            }
        }
        if nonneg {
            x.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }
    if !converged {
        trace.push(objective(&x)?.0);
    }
    Ok(MapRun {
        x,
        objective: trace,
        iterations,
        converged,
    })
}

/// `argmax` of PSNR over λ; ties go to the smaller λ.
pub fn map_tie_break(psnr_by_lambda: &[(f64, f64)]) -> f64 {
    let mut best = psnr_by_lambda[0];
    for &(l, p) in &psnr_by_lambda[1..] {
        if p > best.1 || (p == best.1 && l < best.0) {
            best = (l, p);
        }
    }
    best.0
}

#[derive(Debug, Clone)]
pub struct MapResult {
    pub x: Tensor,
    pub lambda: f64,
    /// `(λ, PSNR)` per grid point, empty in single-λ mode
    pub scores: Vec<(f64, f64)>,
}

/// MAP over the λ grid. With more than one λ the ground truth is required
/// and the λ with the best PSNR wins.
pub fn run_map<P: Potential + ?Sized>(
    prior: &P,
    likelihood: &Likelihood,
    config: &MapConfig,
    x0: &Tensor,
    truth: Option<&Tensor>,
) -> Result<MapResult> {
    config.validate()?;
    if config.lambdas.len() == 1 {
        let lambda = config.lambdas[0];
        let run = minimize_map(prior, likelihood, lambda, config, x0)?;
        let scores = match truth {
            Some(t) => vec![(lambda, psnr(&run.x, t, 1.0)?)],
            None => Vec::new(),
        };
        return Ok(MapResult {
            x: run.x,
            lambda,
            scores,
        });
    }
    let truth = truth.ok_or_else(|| {
        Error::InvalidArgument("a lambda grid search needs the ground truth".into())
    })?;
    let mut scores = Vec::new();
    let mut runs = Vec::new();
    for &lambda in &config.lambdas {
        let run = minimize_map(prior, likelihood, lambda, config, x0)?;
        scores.push((lambda, psnr(&run.x, truth, 1.0)?));
        runs.push(run.x);
    }
    let lambda = map_tie_break(&scores);
    let idx = config.lambdas.iter().position(|&l| l == lambda).expect("chosen from grid");
    Ok(MapResult {
        x: runs.swap_remove(idx),
        lambda,
        scores,
    })
}

/// Conjugate gradients for a symmetric positive definite `apply`.
pub fn conjugate_gradient(
    apply: impl Fn(&Tensor) -> Result<Tensor>,
    b: &Tensor,
    tol: f64,
    max_iters: usize,
) -> Result<Tensor> {
    let mut x = Tensor::zeros(b.shape());
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.norm_sq();
    let stop = tol * tol * b.norm_sq();
    for _ in 0..max_iters {
        if rr <= stop {
            return Ok(x);
        }
        let ap = apply(&p)?;
        let alpha = rr / p.dot(&ap);
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        let rr_new = r.norm_sq();
        p = r.zip_map(&p, |ri, pi| ri + (rr_new / rr) * pi);
        rr = rr_new;
    }
    if rr <= stop {
        Ok(x)
    } else {
        Err(Error::NoConvergence(format!(
            "conjugate gradients, residual {}",
            rr.sqrt()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::QuadraticPrior;
    use crate::likelihoods::GaussianLikelihood;
    use crate::operators::LinearOperator;

    fn gaussian(y: Tensor, sigma: f64) -> Likelihood {
        GaussianLikelihood::new(LinearOperator::identity(y.shape()).unwrap(), y, sigma)
            .unwrap()
            .into()
    }

    #[test]
    fn tie_break_rules() {
        assert_eq!(map_tie_break(&[(0.1, 20.0), (0.2, 21.0)]), 0.2);
        assert_eq!(map_tie_break(&[(0.1, 21.0), (0.2, 21.0)]), 0.1);
        assert_eq!(map_tie_break(&[(0.2, 21.0), (0.1, 21.0)]), 0.1);
        assert_eq!(map_tie_break(&[(0.7, 3.0)]), 0.7);
    }

    #[test]
    fn vanishing_lambda_returns_measurement() {
        let y = Tensor::from_fn(&[1, 3, 3], |i| 0.1 * i as f64);
        let lik = gaussian(y.clone(), 0.1);
        let q = QuadraticPrior::new(1.0).unwrap();
        let cfg = MapConfig {
            lambdas: vec![1e-8],
            optimizer: Optimizer::GradientDescent,
            step: 5e-3,
            ..Default::default()
        };
        let r = run_map(&q, &lik, &cfg, &Tensor::zeros(y.shape()), None).unwrap();
        assert_eq!(r.lambda, 1e-8);
        assert!(r.x.sub(&y).max_abs() <= 1e-4);
    }

    #[test]
    fn gradient_descent_objective_is_monotone() {
        let y = Tensor::from_fn(&[1, 4, 4], |i| (i as f64).sin());
        let lik = gaussian(y.clone(), 0.5);
        let q = QuadraticPrior::new(3.0).unwrap();
        let cfg = MapConfig {
            lambdas: vec![1.0],
            optimizer: Optimizer::GradientDescent,
            step: 0.1,
            max_iters: 500,
            ..Default::default()
        };
        let run = minimize_map(&q, &lik, 1.0, &cfg, &y).unwrap();
        assert!(run.objective.windows(2).all(|w| w[1] <= w[0]));
        // closed form y / (1 + σ²θ)
        let want = y.scaled(1.0 / (1.0 + 0.25 * 3.0));
        assert!(run.x.sub(&want).max_abs() < 1e-6);
    }

    #[test]
    fn grid_needs_truth() {
        let y = Tensor::zeros(&[1, 2, 2]);
        let lik = gaussian(y.clone(), 0.5);
        let q = QuadraticPrior::new(1.0).unwrap();
        assert!(run_map(&q, &lik, &MapConfig::default(), &y, None).is_err());
    }

    #[test]
    fn cg_solves_diagonal_system() {
        let b = Tensor::from_fn(&[5], |i| i as f64 + 1.0);
        let x = conjugate_gradient(|v| Ok(Tensor::from_fn(&[5], |i| (i as f64 + 2.0) * v.data()[i])), &b, 1e-12, 50).unwrap();
        for i in 0..5 {
            assert!((x.data()[i] - (i as f64 + 1.0) / (i as f64 + 2.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn mmse_is_seed_deterministic_and_std_non_negative() {
        let y = Tensor::from_fn(&[1, 2, 2], |i| i as f64 * 0.2);
        let lik = gaussian(y, 0.5);
        let q = QuadraticPrior::new(2.0).unwrap();
        let cfg = MmseConfig {
            warmstart: 100,
            samples: 500,
            gamma: 1e-2,
            ..Default::default()
        };
        let a = run_mmse(&q, &lik, &cfg).unwrap();
        let b = run_mmse(&q, &lik, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.std.data().iter().all(|&s| s >= 0.0));
    }
}
