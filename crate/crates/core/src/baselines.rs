//! Smoothed total variation and the scalar quadratic prior.

use crate::error::{Error, Result};
use crate::operators::{forward_diff, forward_diff_adjoint};
use crate::regularizer::{GroupScales, Potential, Regularizer};
use crate::tensor::Tensor;

/// `λ Σ_p (√(|Dx|_p² + ε²) − ε)`, isotropic over the two difference directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedTV {
    pub weight: f64,
    pub eps: f64,
}

impl Default for SmoothedTV {
    fn default() -> Self {
        Self {
            weight: 1.0,
            eps: 1e-3,
        }
    }
}

impl SmoothedTV {
    pub fn new(weight: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !weight.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "TV needs eps > 0 and a finite weight (eps={eps}, weight={weight})"
            )));
        }
        Ok(Self { weight, eps })
    }

    fn dims(x: &Tensor) -> Result<(usize, usize, usize)> {
        match *x.shape() {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::InvalidArgument(format!(
                "TV expects a (C,H,W) tensor, got {:?}",
                x.shape()
            ))),
        }
    }

    pub fn value_grad(&self, x: &Tensor) -> Result<(f64, Tensor)> {
        let (c, h, w) = Self::dims(x)?;
        let hw = h * w;
        let mut d = vec![0.0; 2 * c * hw];
        forward_diff(x.data(), &mut d, c, h, w);
        let e2 = self.eps * self.eps;
        let mut value = 0.0;
        let (hor, ver) = d.split_at_mut(c * hw);
        for (a, b) in hor.iter_mut().zip(ver.iter_mut()) {
            let r = (*a * *a + *b * *b + e2).sqrt();
            value += r - self.eps;
            *a /= r;
            *b /= r;
        }
        let mut grad = Tensor::zeros(x.shape());
        forward_diff_adjoint(&d, grad.data_mut(), c, h, w);
        grad.scale(self.weight);
        Ok((self.weight * value, grad))
    }
}

impl Potential for SmoothedTV {
    fn value(&self, x: &Tensor) -> Result<f64> {
        Ok(self.value_grad(x)?.0)
    }

    fn value_grad_x(&self, x: &Tensor) -> Result<(f64, Tensor)> {
        self.value_grad(x)
    }
}

/// `g_θ(x) = θ ‖x‖² / 2`, with `θ` clamped to `[theta_min, theta_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticPrior {
    pub theta: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl QuadraticPrior {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "quadratic prior needs theta > 0, got {theta}"
            )));
        }
        Ok(Self {
            theta,
            theta_min: 1e-8,
            theta_max: 1e8,
        })
    }
}

impl Potential for QuadraticPrior {
    fn value(&self, x: &Tensor) -> Result<f64> {
        Ok(0.5 * self.theta * x.norm_sq())
    }

    fn value_grad_x(&self, x: &Tensor) -> Result<(f64, Tensor)> {
        Ok((0.5 * self.theta * x.norm_sq(), x.scaled(self.theta)))
    }

    fn grad_x(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.scaled(self.theta))
    }
}

impl Regularizer for QuadraticPrior {
    type Grad = f64;

    fn grad_theta(&self, x: &Tensor) -> Result<f64> {
        Ok(0.5 * x.norm_sq())
    }

    fn zero_grad(&self) -> f64 {
        0.0
    }

    fn apply_step(&mut self, step: &f64, scales: &GroupScales) {
        self.theta += scales.spline * step;
    }

    fn project(&mut self) {
        self.theta = self.theta.clamp(self.theta_min, self.theta_max);
    }

    fn is_feasible(&self) -> bool {
        self.theta >= self.theta_min && self.theta <= self.theta_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{sample_std_normal, RngStream};

    #[test]
    fn constant_image_is_free() {
        let tv = SmoothedTV::default();
        let (v, g) = tv.value_grad(&Tensor::filled(&[1, 5, 5], 0.3)).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn ramp_counts_horizontal_steps() {
        let tv = SmoothedTV::new(1.0, 1e-9).unwrap();
        let x = Tensor::from_fn(&[1, 4, 4], |p| (p % 4) as f64);
        let v = tv.value(&x).unwrap();
        assert!((v - 12.0).abs() < 1e-7, "{v}");
    }

    #[test]
    fn gradient_matches_central_differences() {
        let tv = SmoothedTV::new(0.7, 1e-3).unwrap();
        let mut r = RngStream::new(2, 0);
        let x = sample_std_normal(&mut r, &[2, 5, 6]);
        let (_, g) = tv.value_grad(&x).unwrap();
        let h = 1e-6;
        for p in 0..x.len() {
            let mut a = x.clone();
            a.data_mut()[p] += h;
            let mut b = x.clone();
            b.data_mut()[p] -= h;
            let fd = (tv.value(&a).unwrap() - tv.value(&b).unwrap()) / (2.0 * h);
            assert!((fd - g.data()[p]).abs() <= 1e-6 * g.data()[p].abs().max(1.0));
        }
    }

    #[test]
    fn midpoint_convexity() {
        let tv = SmoothedTV::default();
        let mut r = RngStream::new(6, 0);
        for _ in 0..20 {
            let a = sample_std_normal(&mut r, &[1, 6, 6]);
            let b = sample_std_normal(&mut r, &[1, 6, 6]);
            let m = a.add(&b).scaled(0.5);
            let lhs = tv.value(&m).unwrap();
            let rhs = 0.5 * (tv.value(&a).unwrap() + tv.value(&b).unwrap());
            assert!(lhs <= rhs + 1e-9);
        }
    }

    #[test]
    fn quadratic_prior_gradients() {
        let q = QuadraticPrior::new(2.5).unwrap();
        let x = Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
        assert_eq!(q.grad_x(&x).unwrap(), x.scaled(2.5));
        assert_eq!(q.grad_theta(&x).unwrap(), 0.5 * 5.25);
        assert!(QuadraticPrior::new(0.0).is_err());
    }
}
