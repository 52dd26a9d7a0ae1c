//! Langevin Markov kernels and streaming moments.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::io;
use crate::likelihoods::{Likelihood, LikelihoodDomain};
use crate::regularizer::Potential;
use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Chains whose sup-norm exceeds this are reported as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Ula,
    ReflectedUla,
}

impl KernelKind {
    pub fn for_domain(domain: LikelihoodDomain) -> Self {
        match domain {
            LikelihoodDomain::Unrestricted => KernelKind::Ula,
            LikelihoodDomain::NonNegative => KernelKind::ReflectedUla,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ula" => Some(KernelKind::Ula),
            "reflected" | "reflected_ula" | "rula" => Some(KernelKind::ReflectedUla),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Ula => "ula",
            KernelKind::ReflectedUla => "reflected_ula",
        }
    }

    pub fn step(
        self,
        state: &mut ChainState,
        grad: impl FnOnce(&Tensor) -> Result<Tensor>,
        gamma: f64,
    ) -> Result<()> {
        match self {
            KernelKind::Ula => ula_step(state, grad, gamma),
            KernelKind::ReflectedUla => reflected_ula_step(state, grad, gamma),
        }
    }
}

/// Single-pass mean and population variance of a tensor stream.
#[derive(Debug, Clone, PartialEq)]
pub struct WelfordAccumulator {
    count: u64,
    mean: Tensor,
    m2: Tensor,
}

impl WelfordAccumulator {
    pub fn new(shape: &[usize]) -> Self {
        Self {
            count: 0,
            mean: Tensor::zeros(shape),
            m2: Tensor::zeros(shape),
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn update(&mut self, x: &Tensor) -> Result<()> {
        x.check_shape(self.mean.shape())?;
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self
            .mean
            .data_mut()
            .iter_mut()
            .zip(self.m2.data_mut())
            .zip(x.data())
        {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
        Ok(())
    }

    pub fn mean(&self) -> Result<&Tensor> {
        if self.count == 0 {
            return Err(Error::InvalidArgument(
                "mean of an empty accumulator".into(),
            ));
        }
        Ok(&self.mean)
    }

    /// `(mean, M2 / n)`
    pub fn mean_var(&self) -> Result<(Tensor, Tensor)> {
        let mean = self.mean()?.clone();
        Ok((mean, self.m2.scaled(1.0 / self.count as f64)))
    }
}

/// Writes the chain iterate as TNSR every `every` steps.
#[derive(Debug, Clone)]
pub struct TrajectoryDump {
    pub dir: PathBuf,
    pub every: u64,
}

/// One Markov chain: iterate, private random stream and optional moments.
#[derive(Debug)]
pub struct ChainState {
    pub x: Tensor,
    rng: RngStream,
    step_count: u64,
    pub welford: Option<WelfordAccumulator>,
    pub dump: Option<TrajectoryDump>,
    zero_noise: bool,
}

impl ChainState {
    pub fn new(x: Tensor, rng: RngStream) -> Self {
        Self {
            x,
            rng,
            step_count: 0,
            welford: None,
            dump: None,
            zero_noise: false,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn rng(&self) -> &RngStream {
        &self.rng
    }

    pub fn attach_welford(&mut self) {
        self.welford = Some(WelfordAccumulator::new(self.x.shape()));
    }

    pub fn take_welford(&mut self) -> Option<WelfordAccumulator> {
        self.welford.take()
    }

    /// Test hook: replace the Gaussian increments by zeros.
    #[doc(hidden)]
    pub fn force_zero_noise(&mut self, on: bool) {
        self.zero_noise = on;
    }

    fn proposal(&mut self, grad: Tensor, gamma: f64) -> Result<Tensor> {
        if !grad.is_finite() {
            return Err(Error::ChainDiverged {
                step: self.step_count,
            });
        }
        grad.check_shape(self.x.shape())?;
        let noise = (2.0 * gamma).sqrt();
        let mut next = self.x.clone();
        next.axpy(-gamma, &grad);
        if !self.zero_noise {
            for v in next.data_mut() {
                *v += noise * self.rng.std_normal();
            }
        }
        Ok(next)
    }

    fn accept(&mut self, next: Tensor) -> Result<()> {
        if !next.is_finite() || next.max_abs() > DIVERGENCE_LIMIT {
            return Err(Error::ChainDiverged {
                step: self.step_count,
            });
        }
        self.x = next;
        self.step_count += 1;
        if let Some(w) = &mut self.welford {
            w.update(&self.x)?;
        }
        if let Some(d) = &self.dump {
            if d.every > 0 && self.step_count.is_multiple_of(d.every) {
                io::write_tensor(
                    d.dir.join(format!("step_{:08}.tnsr", self.step_count)),
                    &self.x,
                )?;
            }
        }
        Ok(())
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "step size must be positive, got {gamma}"
        )))
    }
}

/// `x ← x − γ ∇E(x) + √(2γ) Z`
pub fn ula_step(
    state: &mut ChainState,
    grad: impl FnOnce(&Tensor) -> Result<Tensor>,
    gamma: f64,
) -> Result<()> {
    check_gamma(gamma)?;
    let g = grad(&state.x)?;
    let next = state.proposal(g, gamma)?;
    state.accept(next)
}

/// `x ← |x − γ ∇E(x) + √(2γ) Z|` componentwise.
pub fn reflected_ula_step(
    state: &mut ChainState,
    grad: impl FnOnce(&Tensor) -> Result<Tensor>,
    gamma: f64,
) -> Result<()> {
    check_gamma(gamma)?;
    let g = grad(&state.x)?;
    let mut next = state.proposal(g, gamma)?;
    next.data_mut().iter_mut().for_each(|v| *v = v.abs());
    state.accept(next)
}

/// `∇_x (f_y + g)`
pub fn posterior_grad<'a, P: Potential + ?Sized>(
    likelihood: &'a Likelihood,
    prior: &'a P,
) -> impl Fn(&Tensor) -> Result<Tensor> + 'a {
    move |x| {
        let mut g = likelihood.grad(x)?;
        g.axpy(1.0, &prior.grad_x(x)?);
        Ok(g)
    }
}

/// `∇_x g`
pub fn prior_grad<P: Potential + ?Sized>(prior: &P) -> impl Fn(&Tensor) -> Result<Tensor> + '_ {
    move |x| prior.grad_x(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_chain(x0: f64, seed: u64) -> ChainState {
        ChainState::new(Tensor::filled(&[1], x0), RngStream::new(seed, 0))
    }

    #[test]
    fn zero_gradient_zero_noise_is_fixed_point() {
        let mut s = scalar_chain(0.7, 0);
        s.force_zero_noise(true);
        ula_step(&mut s, |x| Ok(Tensor::zeros(x.shape())), 0.5).unwrap();
        assert_eq!(s.x.data(), &[0.7]);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn deterministic_contraction() {
        let (gamma, var) = (0.1, 2.0);
        let mut s = scalar_chain(3.0, 0);
        s.force_zero_noise(true);
        let rate: f64 = 1.0 - gamma / var;
        for k in 1..=50 {
            ula_step(&mut s, |x| Ok(x.scaled(1.0 / var)), gamma).unwrap();
            let want = 3.0 * rate.powi(k);
            assert!((s.x.data()[0] - want).abs() < 1e-13 * 3.0);
        }
    }

    #[test]
    fn reflection_flips_negative_entries() {
        let mut s = ChainState::new(Tensor::new(vec![2], vec![0.0, 1.0]).unwrap(), RngStream::new(0, 0));
        s.force_zero_noise(true);
        reflected_ula_step(
            &mut s,
            |_| Ok(Tensor::new(vec![2], vec![3.0, 1.0]).unwrap()),
            0.1,
        )
        .unwrap();
        assert!((s.x.data()[0] - 0.3).abs() < 1e-15);
        assert!((s.x.data()[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn reflected_matches_plain_when_positive() {
        let grad = |x: &Tensor| Ok(x.map(|v| v - 5.0));
        let mut a = ChainState::new(Tensor::filled(&[8], 5.0), RngStream::new(3, 1));
        let mut b = ChainState::new(Tensor::filled(&[8], 5.0), RngStream::new(3, 1));
        ula_step(&mut a, grad, 0.01).unwrap();
        reflected_ula_step(&mut b, grad, 0.01).unwrap();
        assert!(a.x.data().iter().all(|&v| v > 0.0));
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn non_finite_gradient_reports_divergence() {
        let mut s = scalar_chain(1.0, 0);
        for _ in 0..3 {
            ula_step(&mut s, |x| Ok(x.clone()), 0.01).unwrap();
        }
        let err = ula_step(&mut s, |_| Ok(Tensor::filled(&[1], f64::NAN)), 0.01).unwrap_err();
        assert!(matches!(err, Error::ChainDiverged { step: 3 }));
    }

    #[test]
    fn runaway_chain_trips_guard() {
        let mut s = scalar_chain(1.0, 0);
        let err = (0..1000)
            .try_for_each(|_| ula_step(&mut s, |x| Ok(x.scaled(-100.0)), 0.1))
            .unwrap_err();
        assert!(matches!(err, Error::ChainDiverged { .. }));
        assert!(s.x.max_abs() <= DIVERGENCE_LIMIT);
    }

    #[test]
    fn bad_step_size_rejected() {
        let mut s = scalar_chain(1.0, 0);
        assert!(ula_step(&mut s, |x| Ok(x.clone()), 0.0).is_err());
    }

    #[test]
    fn welford_small_cases() {
        let mut w = WelfordAccumulator::new(&[2]);
        assert!(w.mean_var().is_err());
        w.update(&Tensor::new(vec![2], vec![4.0, -1.0]).unwrap()).unwrap();
        let (m, v) = w.mean_var().unwrap();
        assert_eq!(m.data(), &[4.0, -1.0]);
        assert_eq!(v.data(), &[0.0, 0.0]);

        let mut w = WelfordAccumulator::new(&[1]);
        for s in [1.0, 2.0, 3.0] {
            w.update(&Tensor::filled(&[1], s)).unwrap();
        }
        let (m, v) = w.mean_var().unwrap();
        assert!((m.data()[0] - 2.0).abs() < 1e-15);
        assert!((v.data()[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn welford_matches_two_pass() {
        let mut r = RngStream::new(12, 0);
        let samples: Vec<Tensor> = (0..10_000)
            .map(|_| Tensor::from_fn(&[3], |k| 3.0 * k as f64 + r.std_normal()))
            .collect();
        let mut w = WelfordAccumulator::new(&[3]);
        samples.iter().for_each(|s| w.update(s).unwrap());
        let (m, v) = w.mean_var().unwrap();
        for i in 0..3 {
            let mean = samples.iter().map(|s| s.data()[i]).sum::<f64>() / 1e4;
            let var = samples
                .iter()
                .map(|s| (s.data()[i] - mean).powi(2))
                .sum::<f64>()
                / 1e4;
            assert!((m.data()[i] - mean).abs() < 1e-10);
            assert!((v.data()[i] - var).abs() < 1e-10);
        }
    }
}
