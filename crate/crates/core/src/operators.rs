//! Linear forward operators with exact adjoints.
//!
//! All boundaries are zero padded. Convolutions are cross-correlations (the
//! kernel is not flipped); every kernel built here is symmetric, so the two
//! conventions coincide for them.

use crate::conv::{correlate_acc, correlate_adjoint_acc};
use crate::error::{Error, Result};
use crate::io;
use crate::rng::RngStream;
use crate::tensor::Tensor;

/// Odd-sized square kernel applied channel-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    size: usize,
    weights: Vec<f64>,
    name: String,
}

impl Kernel {
    pub fn new(size: usize, weights: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        if size.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "kernel size must be odd, got {size}"
            )));
        }
        if weights.len() != size * size {
            return Err(Error::InvalidArgument(format!(
                "kernel of size {size} needs {} weights, got {}",
                size * size,
                weights.len()
            )));
        }
        Ok(Self {
            size,
            weights,
            name: name.into(),
        })
    }

    /// Single centre tap of weight one.
    pub fn delta(size: usize) -> Result<Self> {
        let mut w = vec![0.0; size * size];
        w[size * size / 2] = 1.0;
        Self::new(size, w, "delta")
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(vec![self.size, self.size], self.weights.clone()).expect("square kernel")
    }

    pub fn from_tensor(t: &Tensor, name: impl Into<String>) -> Result<Self> {
        if t.rank() != 2 || t.shape()[0] != t.shape()[1] {
            return Err(Error::InvalidArgument(format!(
                "kernel tensors must be square rank-2, got {:?}",
                t.shape()
            )));
        }
        Self::new(t.shape()[0], t.data().to_vec(), name)
    }
}

/// Normalized isotropic Gaussian kernel with standard deviation `strength`.
pub fn gaussian_blur_kernel(size: usize, strength: f64) -> Result<Kernel> {
    if size.is_multiple_of(2) || size == 0 {
        return Err(Error::InvalidArgument(format!(
            "kernel size must be odd, got {size}"
        )));
    }
    if !(strength > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "blur strength must be positive, got {strength}"
        )));
    }
    let c = (size - 1) as f64 / 2.0;
    let mut w: Vec<f64> = (0..size * size)
        .map(|k| {
            let (i, j) = ((k / size) as f64, (k % size) as f64);
            (-((i - c).powi(2) + (j - c).powi(2)) / (2.0 * strength * strength)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Kernel::new(size, w, format!("gaussian{size}_{strength}"))
}

pub fn uniform_blur_kernel(size: usize) -> Result<Kernel> {
    if size.is_multiple_of(2) || size == 0 {
        return Err(Error::InvalidArgument(format!(
            "kernel size must be odd, got {size}"
        )));
    }
    let v = 1.0 / (size * size) as f64;
    Kernel::new(size, vec![v; size * size], format!("uniform{size}"))
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    Identity,
    Conv2D(Kernel),
    /// 0/1 tensor with the operator's input shape.
    Mask(Tensor),
    /// Forward differences: (C, H, W) -> (2C, H, W), horizontal block first.
    FiniteDifference,
}

/// A linear map between (C, H, W) tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    kind: OperatorKind,
    input_shape: Vec<usize>,
}

impl LinearOperator {
    pub fn identity(shape: &[usize]) -> Result<Self> {
        Self::build(OperatorKind::Identity, shape)
    }

    pub fn conv2d(kernel: Kernel, shape: &[usize]) -> Result<Self> {
        Self::build(OperatorKind::Conv2D(kernel), shape)
    }

    pub fn mask(mask: Tensor) -> Result<Self> {
        if mask.data().iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidArgument("mask entries must be 0 or 1".into()));
        }
        let shape = mask.shape().to_vec();
        Self::build(OperatorKind::Mask(mask), &shape)
    }

    /// Random inpainting mask in which each pixel is dropped with
    /// probability `missing` (shared across channels).
    pub fn random_mask(shape: &[usize], missing: f64, rng: &mut RngStream) -> Result<Self> {
        if !(0.0..=1.0).contains(&missing) {
            return Err(Error::InvalidArgument(format!(
                "missing fraction must be in [0, 1], got {missing}"
            )));
        }
        let (c, hw) = (shape[0], shape[1..].iter().product::<usize>());
        let keep: Vec<f64> = (0..hw)
            .map(|_| if rng.bernoulli(missing) { 0.0 } else { 1.0 })
            .collect();
        let data = (0..c).flat_map(|_| keep.iter().copied()).collect();
        Self::mask(Tensor::new(shape.to_vec(), data)?)
    }

    pub fn finite_difference(shape: &[usize]) -> Result<Self> {
        Self::build(OperatorKind::FiniteDifference, shape)
    }

    fn build(kind: OperatorKind, shape: &[usize]) -> Result<Self> {
        if shape.len() != 3 || shape.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "operators act on (C, H, W) tensors, got {shape:?}"
            )));
        }
        Ok(Self {
            kind,
            input_shape: shape.to_vec(),
        })
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn name(&self) -> String {
        match &self.kind {
            OperatorKind::Identity => "identity".into(),
            OperatorKind::Conv2D(k) => format!("conv:{}", k.name()),
            OperatorKind::Mask(_) => "mask".into(),
            OperatorKind::FiniteDifference => "finite_difference".into(),
        }
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> Vec<usize> {
        match self.kind {
            OperatorKind::FiniteDifference => {
                let s = &self.input_shape;
                vec![2 * s[0], s[1], s[2]]
            }
            _ => self.input_shape.clone(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, OperatorKind::Identity)
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        x.check_shape(&self.input_shape)?;
        let (c, h, w) = (self.input_shape[0], self.input_shape[1], self.input_shape[2]);
        Ok(match &self.kind {
            OperatorKind::Identity => x.clone(),
            OperatorKind::Mask(m) => x.zip_map(m, |a, b| a * b),
            OperatorKind::Conv2D(k) => {
                let mut out = Tensor::zeros(&self.input_shape);
                let hw = h * w;
                for ch in 0..c {
                    correlate_acc(
                        &mut out.data_mut()[ch * hw..(ch + 1) * hw],
                        &x.data()[ch * hw..(ch + 1) * hw],
                        h,
                        w,
                        k.weights(),
                        k.size(),
                    );
                }
                out
            }
            OperatorKind::FiniteDifference => {
                let mut out = Tensor::zeros(&[2 * c, h, w]);
                forward_diff(x.data(), out.data_mut(), c, h, w);
                out
            }
        })
    }

    pub fn adjoint(&self, y: &Tensor) -> Result<Tensor> {
        y.check_shape(&self.output_shape())?;
        let (c, h, w) = (self.input_shape[0], self.input_shape[1], self.input_shape[2]);
        Ok(match &self.kind {
            OperatorKind::Identity => y.clone(),
            OperatorKind::Mask(m) => y.zip_map(m, |a, b| a * b),
            OperatorKind::Conv2D(k) => {
                let mut out = Tensor::zeros(&self.input_shape);
                let hw = h * w;
                for ch in 0..c {
                    correlate_adjoint_acc(
                        &mut out.data_mut()[ch * hw..(ch + 1) * hw],
                        &y.data()[ch * hw..(ch + 1) * hw],
                        h,
                        w,
                        k.weights(),
                        k.size(),
                    );
                }
                out
            }
            OperatorKind::FiniteDifference => {
                let mut out = Tensor::zeros(&self.input_shape);
                forward_diff_adjoint(y.data(), out.data_mut(), c, h, w);
                out
            }
        })
    }

    /// Persist kernel or mask payloads as TNSR; other kinds carry no payload.
    pub fn write_payload(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        match &self.kind {
            OperatorKind::Conv2D(k) => io::write_tensor(path, &k.to_tensor()),
            OperatorKind::Mask(m) => io::write_tensor(path, m),
            _ => Ok(()),
        }
    }
}

/// Forward differences of a (c, h, w) block into (2c, h, w); the last
/// column (horizontal) and last row (vertical) are zero.
pub(crate) fn forward_diff(x: &[f64], out: &mut [f64], c: usize, h: usize, w: usize) {
    let hw = h * w;
    for ch in 0..c {
        let src = &x[ch * hw..(ch + 1) * hw];
        let (hor, rest) = out.split_at_mut(c * hw);
        let hor = &mut hor[ch * hw..(ch + 1) * hw];
        let ver = &mut rest[ch * hw..(ch + 1) * hw];
        for i in 0..h {
            for j in 0..w {
                let p = i * w + j;
                hor[p] = if j + 1 < w { src[p + 1] - src[p] } else { 0.0 };
                ver[p] = if i + 1 < h { src[p + w] - src[p] } else { 0.0 };
            }
        }
    }
}

/// Transpose of [`forward_diff`] (a negative divergence), accumulated into `out`.
pub(crate) fn forward_diff_adjoint(y: &[f64], out: &mut [f64], c: usize, h: usize, w: usize) {
    let hw = h * w;
    for ch in 0..c {
        let hor = &y[ch * hw..(ch + 1) * hw];
        let ver = &y[(c + ch) * hw..(c + ch + 1) * hw];
        let dst = &mut out[ch * hw..(ch + 1) * hw];
        for i in 0..h {
            for j in 0..w {
                let p = i * w + j;
                let mut v = 0.0;
                if j + 1 < w {
                    v -= hor[p];
                }
                if j >= 1 {
                    v += hor[p - 1];
                }
                if i + 1 < h {
                    v -= ver[p];
                }
                if i >= 1 {
                    v += ver[p - w];
                }
                dst[p] += v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::sample_std_normal;

    #[test]
    fn single_tap_kernels() {
        assert_eq!(gaussian_blur_kernel(1, 0.3).unwrap().weights(), &[1.0]);
        assert_eq!(uniform_blur_kernel(1).unwrap().weights(), &[1.0]);
    }

    #[test]
    fn even_sizes_rejected() {
        assert!(gaussian_blur_kernel(4, 1.0).is_err());
        assert!(uniform_blur_kernel(2).is_err());
        assert!(Kernel::new(2, vec![0.25; 4], "x").is_err());
    }

    #[test]
    fn flat_gaussian_limit() {
        let k = gaussian_blur_kernel(3, 1e6).unwrap();
        for &w in k.weights() {
            assert!((w - 1.0 / 9.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gaussian_five_centre_weight() {
        // normalizer by direct summation of the 5x5 exponential grid
        let mut z = 0.0;
        for i in -2i32..=2 {
            for j in -2i32..=2 {
                z += (-((i * i + j * j) as f64) / 2.0).exp();
            }
        }
        let k = gaussian_blur_kernel(5, 1.0).unwrap();
        assert!((k.weights()[12] - 1.0 / z).abs() < 1e-15);
        assert!((k.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn uniform_five() {
        let k = uniform_blur_kernel(5).unwrap();
        assert!(k.weights().iter().all(|&w| (w - 0.04).abs() < 1e-16));
    }

    #[test]
    fn uniform_blur_keeps_constants_in_interior() {
        let op = LinearOperator::conv2d(uniform_blur_kernel(5).unwrap(), &[1, 9, 9]).unwrap();
        let y = op.apply(&Tensor::filled(&[1, 9, 9], 0.7)).unwrap();
        for i in 2..7 {
            for j in 2..7 {
                assert!((y.get3(0, i, j) - 0.7).abs() < 1e-14);
            }
        }
        assert!(y.get3(0, 0, 0) < 0.7);
    }

    #[test]
    fn delta_kernel_is_identity() {
        let x = sample_std_normal(&mut RngStream::new(1, 0), &[3, 6, 5]);
        let op = LinearOperator::conv2d(Kernel::delta(5).unwrap(), &[3, 6, 5]).unwrap();
        assert_eq!(op.apply(&x).unwrap(), x);
    }

    #[test]
    fn differences_of_constant_and_ramp() {
        let op = LinearOperator::finite_difference(&[1, 4, 4]).unwrap();
        let d = op.apply(&Tensor::filled(&[1, 4, 4], 2.5)).unwrap();
        assert!(d.data().iter().all(|&v| v == 0.0));

        let ramp = Tensor::from_fn(&[1, 4, 4], |k| (k % 4) as f64);
        let d = op.apply(&ramp).unwrap();
        assert_eq!(d.shape(), &[2, 4, 4]);
        for i in 0..4 {
            for j in 0..4 {
                let want = if j < 3 { 1.0 } else { 0.0 };
                assert_eq!(d.get3(0, i, j), want);
                assert_eq!(d.get3(1, i, j), 0.0);
            }
        }
    }

    #[test]
    fn shape_mismatch_errors() {
        let op = LinearOperator::identity(&[1, 4, 4]).unwrap();
        assert!(matches!(
            op.apply(&Tensor::zeros(&[1, 4, 5])),
            Err(Error::ShapeMismatch { .. })
        ));
        let d = LinearOperator::finite_difference(&[1, 4, 4]).unwrap();
        assert!(d.adjoint(&Tensor::zeros(&[1, 4, 4])).is_err());
    }

    #[test]
    fn mask_entries_validated() {
        assert!(LinearOperator::mask(Tensor::filled(&[1, 2, 2], 0.5)).is_err());
        let mut r = RngStream::new(3, 0);
        let m = LinearOperator::random_mask(&[3, 8, 8], 0.8, &mut r).unwrap();
        if let OperatorKind::Mask(t) = m.kind() {
            let kept = t.sum() / 3.0;
            assert!(kept < 64.0 * 0.5);
            assert_eq!(t.data()[..64], t.data()[64..128]);
        } else {
            unreachable!();
        }
    }
}
