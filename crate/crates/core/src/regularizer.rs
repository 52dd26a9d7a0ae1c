//! Traits shared by every prior the samplers, trainers and estimators accept.

use std::fmt::Debug;

use crate::error::Result;
use crate::tensor::Tensor;

/// A differentiable energy in `x`.
pub trait Potential: Send + Sync {
    fn value(&self, x: &Tensor) -> Result<f64>;

    fn value_grad_x(&self, x: &Tensor) -> Result<(f64, Tensor)>;

    fn grad_x(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.value_grad_x(x)?.1)
    }
}

/// Vector-space operations on a parameter gradient.
pub trait ParamVector: Clone + Debug + Send + Sync {
    /// `self += alpha * other`
    fn axpy(&mut self, alpha: f64, other: &Self);
    fn scale(&mut self, alpha: f64);
    fn dot(&self, other: &Self) -> f64;
    fn is_finite(&self) -> bool;

    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl ParamVector for f64 {
    fn axpy(&mut self, alpha: f64, other: &Self) {
        *self += alpha * other;
    }

    fn scale(&mut self, alpha: f64) {
        *self *= alpha;
    }

    fn dot(&self, other: &Self) -> f64 {
        self * other
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

/// Multipliers applied per parameter group when taking a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupScales {
    pub conv: f64,
    pub spline: f64,
    pub bias: f64,
    pub log_scale: f64,
}

impl Default for GroupScales {
    fn default() -> Self {
        Self {
            conv: 1.0,
            spline: 1.0,
            bias: 1.0,
            log_scale: 1.0,
        }
    }
}

/// A parameterized prior `g_θ` that can be learned.
pub trait Regularizer: Potential + Clone + Debug {
    type Grad: ParamVector;

    fn grad_theta(&self, x: &Tensor) -> Result<Self::Grad>;

    /// `(g_θ(x), ∇_θ g_θ(x))`
    fn value_grad_theta(&self, x: &Tensor) -> Result<(f64, Self::Grad)> {
        Ok((self.value(x)?, self.grad_theta(x)?))
    }

    fn zero_grad(&self) -> Self::Grad;

    /// θ ← θ + step, scaled group-wise.
    fn apply_step(&mut self, step: &Self::Grad, scales: &GroupScales);

    /// Projection onto the feasible set Θ.
    fn project(&mut self);

    fn is_feasible(&self) -> bool;

    /// Serialized snapshot, when the prior has a checkpoint format.
    fn to_checkpoint_bytes(&self, _iteration: u64, _seed: u64) -> Option<Vec<u8>> {
        None
    }
}
