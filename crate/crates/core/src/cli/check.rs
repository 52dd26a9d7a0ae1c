//! Self-test battery behind the `check` subcommand.

use crate::baselines::{QuadraticPrior, SmoothedTV};
use crate::crr::{CrrArchitecture, CrrParams, SplineBank};
use crate::error::Result;
use crate::gradcheck::{directional_difference, relative_error};
use crate::likelihoods::{GaussianLikelihood, Likelihood, PoissonLikelihood};
use crate::operators::{gaussian_blur_kernel, uniform_blur_kernel, LinearOperator};
use crate::regularizer::{ParamVector, Potential, Regularizer};
use crate::rng::{sample_std_normal, RngStream};
use crate::samplers::{ula_step, ChainState, WelfordAccumulator};
use crate::sapg::{train_single, SapgConfig, TrainState};
use crate::tensor::Tensor;

pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn suite(name: &'static str, run: impl FnOnce() -> Result<(bool, String)>) -> SuiteResult {
    match run() {
        Ok((passed, detail)) => SuiteResult { name, passed, detail },
        Err(e) => SuiteResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

pub fn run_all() -> Vec<SuiteResult> {
    vec![
        suite("adjoint", adjoint_suite),
        suite("likelihood_gradients", likelihood_gradient_suite),
        suite("crr_gradients", crr_gradient_suite),
        suite("tv_gradient", tv_gradient_suite),
        suite("spline_quadrature", spline_quadrature_suite),
        suite("welford", welford_suite),
        suite("ula_stationary_variance", ula_variance_suite),
        suite("sapg_scalar_oracle", sapg_oracle_suite),
    ]
}

fn adjoint_suite() -> Result<(bool, String)> {
    let shape = [2, 9, 8];
    let mut r = RngStream::new(1, 0);
    let ops = vec![
        LinearOperator::identity(&shape)?,
        LinearOperator::conv2d(gaussian_blur_kernel(5, 1.0)?, &shape)?,
        LinearOperator::conv2d(uniform_blur_kernel(3)?, &shape)?,
        LinearOperator::random_mask(&shape, 0.4, &mut r)?,
        LinearOperator::finite_difference(&shape)?,
    ];
    let mut worst: f64 = 0.0;
    for op in &ops {
        for _ in 0..20 {
            let x = sample_std_normal(&mut r, &shape);
            let y = sample_std_normal(&mut r, &op.output_shape());
            let lhs = op.apply(&x)?.dot(&y);
            let rhs = x.dot(&op.adjoint(&y)?);
            worst = worst.max(relative_error(lhs, rhs, 1e-300));
        }
    }
    Ok((worst <= 1e-10, format!("worst relative error {worst:.2e} over {} operators", ops.len())))
}

/// Worst relative error of `grad · dir` against central differences.
fn worst_directional(
    f: impl Fn(&Tensor) -> Result<f64> + Copy,
    grad: impl Fn(&Tensor) -> Result<Tensor>,
    points: &[Tensor],
    r: &mut RngStream,
    h: f64,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in points {
        let dir = sample_std_normal(r, x.shape());
        let fd = directional_difference(f, x, &dir, h)?;
        let an = grad(x)?.dot(&dir);
        worst = worst.max(relative_error(fd, an, 1e-8));
    }
    Ok(worst)
}

fn likelihood_gradient_suite() -> Result<(bool, String)> {
    let shape = [1, 6, 6];
    let mut r = RngStream::new(2, 0);
    let y = sample_std_normal(&mut r, &shape);
    let g: Likelihood = GaussianLikelihood::new(
        LinearOperator::conv2d(gaussian_blur_kernel(5, 1.0)?, &shape)?,
        y,
        0.3,
    )?
    .into();
    let points: Vec<Tensor> = (0..10).map(|_| sample_std_normal(&mut r, &shape)).collect();
    let eg = worst_directional(|x| g.value(x), |x| g.grad(x), &points, &mut r, 1e-5)?;
    let counts = Tensor::from_fn(&shape, |_| r.poisson(4.0));
    let p: Likelihood = PoissonLikelihood::new(counts, 8.0, 0.25)?.into();
    let points: Vec<Tensor> = (0..10)
        .map(|_| Tensor::from_fn(&shape, |_| 0.2 + r.uniform()))
        .collect();
    let ep = worst_directional(|x| p.value(x), |x| p.grad(x), &points, &mut r, 1e-6)?;
    Ok((
        eg <= 1e-6 && ep <= 1e-6,
        format!("gaussian {eg:.2e}, poisson {ep:.2e}"),
    ))
}

fn crr_gradient_suite() -> Result<(bool, String)> {
    let arch = CrrArchitecture {
        mid_ch: 2,
        channels: 3,
        kernel_size: 3,
        half_knots: 5,
        use_diff: true,
        use_bias: true,
        learn_log_scale: true,
        ..Default::default()
    };
    let mut r = RngStream::new(3, 0);
    let mut p = CrrParams::init(arch, &mut r)?;
    for s in p.splines.slopes_mut() {
        *s = 0.2 + 2.0 * r.uniform();
    }
    p.bias = vec![0.01, -0.02, 0.005];
    p.log_scale = 0.3;
    let shape = [1, 7, 6];
    let points: Vec<Tensor> = (0..10).map(|_| sample_std_normal(&mut r, &shape).scaled(0.05)).collect();
    let ex = worst_directional(|x| p.value(x), |x| p.grad_x(x), &points, &mut r, 1e-6)?;
    // θ-direction derivative through a perturbed copy
    let mut et: f64 = 0.0;
    for x in &points {
        let mut dir = p.zero_grad();
        dir.conv1.iter_mut().chain(&mut dir.conv2).chain(&mut dir.slopes).chain(&mut dir.bias)
            .for_each(|v| *v = r.std_normal());
        dir.log_scale = r.std_normal();
        let h = 1e-6;
        let shifted = |s: f64| -> Result<f64> {
            let mut q = p.clone();
            let mut step = dir.clone();
            step.scale(s);
            q.apply_step(&step, &Default::default());
            q.value(x)
        };
        let fd = (shifted(h)? - shifted(-h)?) / (2.0 * h);
        let an = p.grad_theta(x)?.dot(&dir);
        et = et.max(relative_error(fd, an, 1e-8));
    }
    Ok((ex <= 1e-5 && et <= 1e-5, format!("grad_x {ex:.2e}, grad_theta {et:.2e}")))
}

fn tv_gradient_suite() -> Result<(bool, String)> {
    let tv = SmoothedTV::new(0.8, 1e-3)?;
    let mut r = RngStream::new(4, 0);
    let points: Vec<Tensor> = (0..10).map(|_| sample_std_normal(&mut r, &[2, 6, 5])).collect();
    let e = worst_directional(|x| tv.value(x), |x| tv.grad_x(x), &points, &mut r, 1e-6)?;
    Ok((e <= 1e-6, format!("worst {e:.2e}")))
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn spline_quadrature_suite() -> Result<(bool, String)> {
    let mut r = RngStream::new(5, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let slopes = (0..20).map(|_| 1e-3 + 5.0 * r.uniform()).collect();
        let b = SplineBank::from_slopes(1, 10, 0.01, slopes, 1e-3, 5.0);
        let t = 0.3 * (2.0 * r.uniform() - 1.0);
        // σ is piecewise linear, so Simpson is exact on each knot interval
        let mut knots = vec![0.0];
        knots.extend((1..=30).map(|k| k as f64 * 0.01 * t.signum()).take_while(|k| k.abs() < t.abs()));
        knots.push(t);
        let q: f64 = knots.windows(2).map(|w| simpson(|s| b.sigma_eval(0, s), w[0], w[1], 2)).sum();
        worst = worst.max((q - b.psi_eval(0, t)).abs());
    }
    Ok((worst <= 1e-9, format!("worst absolute error {worst:.2e}")))
}

fn welford_suite() -> Result<(bool, String)> {
    let mut r = RngStream::new(6, 0);
    let xs: Vec<Tensor> = (0..10_000).map(|_| sample_std_normal(&mut r, &[4]).scaled(3.0)).collect();
    let mut acc = WelfordAccumulator::new(&[4]);
    for x in &xs {
        acc.update(x)?;
    }
    let (m, v) = acc.mean_var()?;
    let n = xs.len() as f64;
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        let mean = xs.iter().map(|x| x.data()[i]).sum::<f64>() / n;
        let var = xs.iter().map(|x| (x.data()[i] - mean).powi(2)).sum::<f64>() / n;
        worst = worst.max((mean - m.data()[i]).abs()).max((var - v.data()[i]).abs());
    }
    Ok((worst <= 1e-10, format!("worst deviation {worst:.2e}")))
}

fn ula_variance_suite() -> Result<(bool, String)> {
    let gamma = 0.1;
    let mut c = ChainState::new(Tensor::zeros(&[1]), RngStream::new(7, 0));
    for _ in 0..1_000 {
        ula_step(&mut c, |x| Ok(x.clone()), gamma)?;
    }
    c.attach_welford();
    for _ in 0..1_000_000 {
        ula_step(&mut c, |x| Ok(x.clone()), gamma)?;
    }
    let (_, v) = c.take_welford().expect("attached").mean_var()?;
    let want = 2.0 / (2.0 - gamma);
    let rel = (v.data()[0] - want).abs() / want;
    Ok((rel <= 0.01, format!("variance {:.5}, expected {want:.5}", v.data()[0])))
}

/// Conjugate model `x ~ N(0, I/θ)`, `y = x + σz`: marginal MLE `1/(‖y‖²/d − σ²)`.
/// Images are `(1, 8, 8)`, so `d = 64`.
pub fn scalar_oracle(sigma: f64, seed: u64) -> Result<(Tensor, f64)> {
    let shape = [1, 8, 8];
    let d = 64;
    let mut r = RngStream::new(seed, 0);
    let x = sample_std_normal(&mut r, &shape);
    let mut y = x;
    y.axpy(sigma, &sample_std_normal(&mut r, &shape));
    let theta_hat = 1.0 / (y.norm_sq() / d as f64 - sigma * sigma);
    Ok((y, theta_hat))
}

/// SAPG on the conjugate model started at `θ = 1`; returns `(θ_N, θ̂)`.
pub fn run_scalar_sapg(iterations: u64, gamma: f64, seed: u64) -> Result<(f64, f64)> {
    let sigma = 0.5;
    let (y, theta_hat) = scalar_oracle(sigma, seed)?;
    let lik: Likelihood = GaussianLikelihood::new(LinearOperator::identity(y.shape())?, y.clone(), sigma)?.into();
    let y_len = y.len();
    let prior_start = crate::sapg::perturbed_prior_init(std::slice::from_ref(&y), seed);
    let mut state = TrainState::new(QuadraticPrior::new(1.0)?, vec![vec![y]], prior_start, seed)?;
    let cfg = SapgConfig {
        delta: SapgConfig::scaled_delta(1e-3, y_len),
        iterations,
        gamma,
        gamma_prime: gamma,
        checkpoint_every: 0,
        seed,
        ..Default::default()
    };
    train_single(&cfg, &lik, &mut state, &mut |_, _| Ok(()))?;
    Ok((state.theta.theta, theta_hat))
}

fn sapg_oracle_suite() -> Result<(bool, String)> {
    let (theta, hat) = run_scalar_sapg(5_000, 1e-3, 0)?;
    let rel = (theta - hat).abs() / hat;
    Ok((rel <= 0.10, format!("theta {theta:.4}, MLE {hat:.4}, relative error {rel:.3}")))
}
