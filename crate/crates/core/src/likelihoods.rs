//! Data-fidelity terms `f_y` (negative log-likelihoods) and measurement
//! simulation.

use crate::error::{Error, Result};
use crate::operators::{Kernel, LinearOperator};
use crate::rng::{sample_std_normal, RngStream};
use crate::tensor::{Dataset, Image, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LikelihoodDomain {
    Unrestricted,
    NonNegative,
}

/// `f_y(x) = ‖Ax − y‖² / (2σ²)`
#[derive(Debug, Clone)]
pub struct GaussianLikelihood {
    op: LinearOperator,
    y: Tensor,
    sigma: f64,
}

impl GaussianLikelihood {
    pub fn new(op: LinearOperator, y: Tensor, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise level must be positive, got {sigma}"
            )));
        }
        y.check_shape(&op.output_shape())?;
        Ok(Self { op, y, sigma })
    }

    pub fn op(&self) -> &LinearOperator {
        &self.op
    }

    pub fn y(&self) -> &Tensor {
        &self.y
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn value_grad(&self, x: &Tensor) -> Result<(f64, Tensor)> {
        let mut r = self.op.apply(x)?;
        r.axpy(-1.0, &self.y);
        let s2 = self.sigma * self.sigma;
        let value = r.norm_sq() / (2.0 * s2);
        let mut g = self.op.adjoint(&r)?;
        g.scale(1.0 / s2);
        Ok((value, g))
    }
}

/// Mollified Poisson fidelity
/// `f_y(x) = Σ_i η(x_i + b) − y_i log(η(x_i + b))`, optionally `+ log(y_i!)`.
#[derive(Debug, Clone)]
pub struct PoissonLikelihood {
    y: Tensor,
    eta: f64,
    b: f64,
    exact_value: bool,
}

impl PoissonLikelihood {
    pub fn new(y: Tensor, eta: f64, b: f64) -> Result<Self> {
        if !(eta > 0.0) || !(b > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "poisson needs eta > 0 and b > 0, got eta={eta} b={b}"
            )));
        }
        if let Some(bad) = y.data().iter().find(|&&v| v < 0.0 || v.fract() != 0.0) {
            return Err(Error::InvalidArgument(format!(
                "poisson counts must be non-negative integers, found {bad}"
            )));
        }
        Ok(Self {
            y,
            eta,
            b,
            exact_value: false,
        })
    }

    /// Include the `log(y_i!)` constant in reported values.
    pub fn with_exact_value(mut self, exact: bool) -> Self {
        self.exact_value = exact;
        self
    }

    pub fn y(&self) -> &Tensor {
        &self.y
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn value_grad(&self, x: &Tensor) -> Result<(f64, Tensor)> {
        x.check_shape(self.y.shape())?;
        let mut grad = Tensor::zeros(x.shape());
        let mut value = 0.0;
        for (i, ((&xi, &yi), g)) in x
            .data()
            .iter()
            .zip(self.y.data())
            .zip(grad.data_mut())
            .enumerate()
        {
            let s = xi + self.b;
            if !(s > 0.0) {
                return Err(Error::Domain { index: i, value: xi });
            }
            let rate = self.eta * s;
            value += rate - if yi > 0.0 { yi * rate.ln() } else { 0.0 };
            if self.exact_value {
                value += log_factorial(yi);
            }
            *g = self.eta - yi / s;
        }
        Ok((value, grad))
    }
}

fn log_factorial(n: f64) -> f64 {
    (2..=n as u64).map(|k| (k as f64).ln()).sum()
}

#[derive(Debug, Clone)]
pub enum Likelihood {
    Gaussian(GaussianLikelihood),
    Poisson(PoissonLikelihood),
}

impl Likelihood {
    pub fn domain(&self) -> LikelihoodDomain {
        match self {
            Likelihood::Gaussian(_) => LikelihoodDomain::Unrestricted,
            Likelihood::Poisson(_) => LikelihoodDomain::NonNegative,
        }
    }

    pub fn value_grad(&self, x: &Tensor) -> Result<(f64, Tensor)> {
        match self {
            Likelihood::Gaussian(l) => l.value_grad(x),
            Likelihood::Poisson(l) => l.value_grad(x),
        }
    }

    pub fn value(&self, x: &Tensor) -> Result<f64> {
        Ok(self.value_grad(x)?.0)
    }

    pub fn grad(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.value_grad(x)?.1)
    }

    pub fn input_shape(&self) -> Vec<usize> {
        match self {
            Likelihood::Gaussian(l) => l.op.input_shape().to_vec(),
            Likelihood::Poisson(l) => l.y.shape().to_vec(),
        }
    }

    /// Starting point for chains and optimizers: `y`, `Aᵀy`, or `y / η`.
    pub fn initial_estimate(&self) -> Result<Tensor> {
        match self {
            Likelihood::Gaussian(l) if l.op.is_identity() => Ok(l.y.clone()),
            Likelihood::Gaussian(l) => l.op.adjoint(&l.y),
            Likelihood::Poisson(l) => Ok(l.y.scaled(1.0 / l.eta)),
        }
    }
}

impl From<GaussianLikelihood> for Likelihood {
    fn from(l: GaussianLikelihood) -> Self {
        Likelihood::Gaussian(l)
    }
}

impl From<PoissonLikelihood> for Likelihood {
    fn from(l: PoissonLikelihood) -> Self {
        Likelihood::Poisson(l)
    }
}

/// `y = A x + σ z` for each image, with A the channel-wise blur by `kernel`.
pub fn corrupt_gaussian(ds: &Dataset, kernel: &Kernel, sigma: f64, seed: u64) -> Result<Dataset> {
    let op = LinearOperator::conv2d(kernel.clone(), ds.image_shape())?;
    let mut out = corrupt_gaussian_with(ds, &op, sigma, seed)?;
    out.metadata.insert("operator".into(), kernel.name().into());
    out.metadata.insert("kernel_size".into(), kernel.size().to_string());
    Ok(out)
}

/// `y = A x + σ z` for any operator `A` with matching input shape.
pub fn corrupt_gaussian_with(ds: &Dataset, op: &LinearOperator, sigma: f64, seed: u64) -> Result<Dataset> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise level must be non-negative, got {sigma}"
        )));
    }
    let items = ds
        .items()
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let mut y = op.apply(img.tensor())?;
            let z = sample_std_normal(&mut RngStream::new(seed, i as u64), y.shape());
            y.axpy(sigma, &z);
            Image::new(y)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Dataset::new(items)?;
    out.metadata = ds.metadata.clone();
    out.metadata.insert("noise".into(), "gaussian".into());
    out.metadata.insert("operator".into(), op.name());
    out.metadata.insert("sigma".into(), sigma.to_string());
    out.metadata.insert("seed".into(), seed.to_string());
    Ok(out)
}

/// `y_i ~ Poisson(η x_i)` with `η = miv / mean(x)` per image. Returns the
/// counts and the per-image `η`; the mollifier `b = miv / 100` is recorded
/// in the metadata.
pub fn corrupt_poisson(ds: &Dataset, miv: f64, seed: u64) -> Result<(Dataset, Vec<f64>)> {
    if !(miv > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mean intensity value must be positive, got {miv}"
        )));
    }
    let mut etas = Vec::with_capacity(ds.len());
    let mut items = Vec::with_capacity(ds.len());
    for (i, img) in ds.items().iter().enumerate() {
        let x = img.tensor();
        let mean = x.mean();
        if !(mean > 0.0) || x.data().iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "image {i} must be non-negative with positive mean intensity"
            )));
        }
        let eta = miv / mean;
        let mut rng = RngStream::new(seed, i as u64);
        items.push(Image::new(x.map(|v| rng.poisson(eta * v)))?);
        etas.push(eta);
    }
    let mut out = Dataset::new(items)?;
    out.metadata = ds.metadata.clone();
    out.metadata.insert("noise".into(), "poisson".into());
    out.metadata.insert("operator".into(), "identity".into());
    out.metadata.insert("miv".into(), miv.to_string());
    out.metadata.insert("b".into(), (miv / 100.0).to_string());
    out.metadata.insert("seed".into(), seed.to_string());
    for (i, eta) in etas.iter().enumerate() {
        out.metadata.insert(format!("eta.{i}"), eta.to_string());
    }
    Ok((out, etas))
}
