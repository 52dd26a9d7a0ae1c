//! Convex ridge regularizer
//!
//! `g_θ(x) = e^c Σ_{c,p} ψ_c((W P x)_{c,p} + b_c)` where `W` is two stacked
//! zero-padded convolutions, `P` is either the identity or the forward
//! difference operator, `ψ_c` are convex piecewise-quadratic profiles and `b`
//! an optional per-channel bias.

mod checkpoint;
mod spline;

use crate::conv::{col2im_acc, gemm, im2col_into, with_scratch};
use crate::error::{Error, Result};
use crate::operators::{forward_diff, forward_diff_adjoint};
use crate::regularizer::{GroupScales, ParamVector, Potential, Regularizer};
use crate::rng::RngStream;
use crate::tensor::Tensor;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, Checkpoint, CKPT_MAGIC};
pub use spline::{requ, SplineBank, SplineTable};

#[derive(Debug, Clone, PartialEq)]
pub struct CrrArchitecture {
    pub in_ch: usize,
    pub mid_ch: usize,
    pub channels: usize,
    pub kernel_size: usize,
    /// knots per side, `K`
    pub half_knots: usize,
    pub delta: f64,
    pub use_diff: bool,
    pub use_bias: bool,
    pub learn_log_scale: bool,
    pub m_min: f64,
    pub m_max: f64,
    pub radius: f64,
}

impl Default for CrrArchitecture {
    fn default() -> Self {
        Self {
            in_ch: 1,
            mid_ch: 8,
            channels: 32,
            kernel_size: 7,
            half_knots: 10,
            delta: 0.01,
            use_diff: false,
            use_bias: false,
            learn_log_scale: false,
            m_min: 1e-3,
            m_max: 5.0,
            radius: 100.0,
        }
    }
}

impl CrrArchitecture {
    /// Channels entering the first convolution (doubled by the difference prefix).
    pub fn conv1_in(&self) -> usize {
        if self.use_diff {
            2 * self.in_ch
        } else {
            self.in_ch
        }
    }

    pub fn conv1_len(&self) -> usize {
        self.mid_ch * self.conv1_in() * self.kernel_size * self.kernel_size
    }

    pub fn conv2_len(&self) -> usize {
        self.channels * self.mid_ch * self.kernel_size * self.kernel_size
    }

    pub fn slopes_len(&self) -> usize {
        self.channels * 2 * self.half_knots
    }

    pub fn bias_len(&self) -> usize {
        if self.use_bias {
            self.channels
        } else {
            0
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.conv1_len()
            + self.conv2_len()
            + self.slopes_len()
            + self.bias_len()
            + usize::from(self.learn_log_scale)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (self.in_ch == 1 || self.in_ch == 3)
            && self.mid_ch > 0
            && self.channels > 0
            && self.kernel_size % 2 == 1
            && self.half_knots > 0
            && self.delta > 0.0
            && self.m_min > 0.0
            && self.m_max >= self.m_min
            && self.radius > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid regularizer architecture {self:?}"
            )))
        }
    }
}

/// Learnable parameters θ of the convex ridge regularizer.
#[derive(Debug, Clone, PartialEq)]
pub struct CrrParams {
    arch: CrrArchitecture,
    /// (mid_ch, conv1_in, k, k)
    pub conv1: Vec<f64>,
    /// (channels, mid_ch, k, k)
    pub conv2: Vec<f64>,
    pub splines: SplineBank,
    pub bias: Vec<f64>,
    pub log_scale: f64,
}

/// Same layout as the learnable fields of [`CrrParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaGradient {
    pub conv1: Vec<f64>,
    pub conv2: Vec<f64>,
    pub slopes: Vec<f64>,
    pub bias: Vec<f64>,
    pub log_scale: f64,
}

impl ParamVector for ThetaGradient {
    fn axpy(&mut self, alpha: f64, other: &Self) {
        fn ax(a: &mut [f64], alpha: f64, b: &[f64]) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += alpha * y);
        }
        ax(&mut self.conv1, alpha, &other.conv1);
        ax(&mut self.conv2, alpha, &other.conv2);
        ax(&mut self.slopes, alpha, &other.slopes);
        ax(&mut self.bias, alpha, &other.bias);
        self.log_scale += alpha * other.log_scale;
    }

    fn scale(&mut self, alpha: f64) {
        for v in self.values_mut() {
            *v *= alpha;
        }
    }

    fn dot(&self, other: &Self) -> f64 {
        self.values()
            .zip(other.values())
            .map(|(a, b)| a * b)
            .sum()
    }

    fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }
}

impl ThetaGradient {
    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.conv1
            .iter()
            .chain(&self.conv2)
            .chain(&self.slopes)
            .chain(&self.bias)
            .chain(std::iter::once(&self.log_scale))
            .copied()
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.conv1
            .iter_mut()
            .chain(self.conv2.iter_mut())
            .chain(self.slopes.iter_mut())
            .chain(self.bias.iter_mut())
            .chain(std::iter::once(&mut self.log_scale))
    }
}

/// Intermediate activations of one forward pass.
struct Forward {
    /// `P x`
    pre: Vec<f64>,
    /// first convolution output
    hidden: Vec<f64>,
    /// `W P x + b`
    act: Vec<f64>,
}

fn stack_forward(
    weights: &[f64],
    input: &[f64],
    in_c: usize,
    out_c: usize,
    h: usize,
    w: usize,
    k: usize,
) -> Vec<f64> {
    let hw = h * w;
    let rows = in_c * k * k;
    let mut out = vec![0.0; out_c * hw];
    with_scratch(rows * hw, |cols| {
        im2col_into(input, in_c, h, w, k, cols);
        gemm(out_c, rows, hw, weights, false, cols, false, 0.0, &mut out);
    });
    out
}

fn stack_adjoint(
    weights: &[f64],
    upstream: &[f64],
    in_c: usize,
    out_c: usize,
    h: usize,
    w: usize,
    k: usize,
) -> Vec<f64> {
    let hw = h * w;
    let rows = in_c * k * k;
    let mut out = vec![0.0; in_c * hw];
    with_scratch(rows * hw, |cols| {
        gemm(rows, out_c, hw, weights, true, upstream, false, 0.0, cols);
        col2im_acc(cols, &mut out, in_c, h, w, k);
    });
    out
}

#[allow(clippy::too_many_arguments)]
fn stack_weight_grad(
    grad: &mut [f64],
    upstream: &[f64],
    input: &[f64],
    in_c: usize,
    out_c: usize,
    h: usize,
    w: usize,
    k: usize,
) {
    let hw = h * w;
    let rows = in_c * k * k;
    with_scratch(rows * hw, |cols| {
        im2col_into(input, in_c, h, w, k, cols);
        gemm(out_c, hw, rows, upstream, false, cols, true, 1.0, grad);
    });
}

fn frobenius(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl CrrParams {
    /// Filters i.i.d. `N(0, 1/fan_in)`, unit slopes, zero bias and scale.
    pub fn init(arch: CrrArchitecture, rng: &mut RngStream) -> Result<Self> {
        arch.validate()?;
        let kk = arch.kernel_size * arch.kernel_size;
        let s1 = 1.0 / ((arch.conv1_in() * kk) as f64).sqrt();
        let s2 = 1.0 / ((arch.mid_ch * kk) as f64).sqrt();
        let conv1 = (0..arch.conv1_len()).map(|_| s1 * rng.std_normal()).collect();
        let conv2 = (0..arch.conv2_len()).map(|_| s2 * rng.std_normal()).collect();
        Ok(Self::with_filters(arch, conv1, conv2))
    }

    pub fn with_filters(arch: CrrArchitecture, conv1: Vec<f64>, conv2: Vec<f64>) -> Self {
        assert_eq!(conv1.len(), arch.conv1_len());
        assert_eq!(conv2.len(), arch.conv2_len());
        let splines = SplineBank::identity(
            arch.channels,
            arch.half_knots,
            arch.delta,
            arch.m_min,
            arch.m_max,
        );
        let bias = vec![0.0; arch.bias_len()];
        Self {
            arch,
            conv1,
            conv2,
            splines,
            bias,
            log_scale: 0.0,
        }
    }

    pub fn arch(&self) -> &CrrArchitecture {
        &self.arch
    }

    pub fn parameter_count(&self) -> usize {
        self.arch.parameter_count()
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize)> {
        let s = x.shape();
        if s.len() != 3 || s[0] != self.arch.in_ch {
            let mut want = vec![self.arch.in_ch];
            want.extend(s.iter().skip(1).copied());
            return Err(Error::shape(&want, s));
        }
        Ok((s[1], s[2]))
    }

    /// Apply `P` then both convolutions, without bias.
    fn linear_forward(&self, x: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let a = &self.arch;
        let pre = if a.use_diff {
            let mut d = vec![0.0; 2 * a.in_ch * h * w];
            forward_diff(x, &mut d, a.in_ch, h, w);
            d
        } else {
            x.to_vec()
        };
        let hidden = stack_forward(&self.conv1, &pre, a.conv1_in(), a.mid_ch, h, w, a.kernel_size);
        let out = stack_forward(&self.conv2, &hidden, a.mid_ch, a.channels, h, w, a.kernel_size);
        (pre, hidden, out)
    }

    /// `Pᵀ W₁ᵀ W₂ᵀ v`
    fn linear_adjoint(&self, v: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
        let a = &self.arch;
        let back_hidden =
            stack_adjoint(&self.conv2, v, a.mid_ch, a.channels, h, w, a.kernel_size);
        let back_pre = stack_adjoint(
            &self.conv1,
            &back_hidden,
            a.conv1_in(),
            a.mid_ch,
            h,
            w,
            a.kernel_size,
        );
        let out = if a.use_diff {
            let mut o = vec![0.0; a.in_ch * h * w];
            forward_diff_adjoint(&back_pre, &mut o, a.in_ch, h, w);
            o
        } else {
            back_pre
        };
        (back_hidden, out)
    }

    fn forward(&self, x: &Tensor) -> Result<(Forward, usize, usize)> {
        let (h, w) = self.check_input(x)?;
        let (pre, hidden, mut act) = self.linear_forward(x.data(), h, w);
        if !self.bias.is_empty() {
            let hw = h * w;
            for (c, b) in self.bias.iter().enumerate() {
                act[c * hw..(c + 1) * hw].iter_mut().for_each(|v| *v += b);
            }
        }
        Ok((Forward { pre, hidden, act }, h, w))
    }

    /// Linear part `W P x` as a (channels, H, W) tensor.
    pub fn filter_response(&self, x: &Tensor) -> Result<Tensor> {
        let (h, w) = self.check_input(x)?;
        let out = self.linear_forward(x.data(), h, w).2;
        Tensor::new(vec![self.arch.channels, h, w], out)
    }

    /// Sum of `ψ` over activations and the matching `σ` map (unscaled).
    fn profile(&self, act: &[f64], hw: usize) -> (f64, Vec<f64>) {
        let table = self.splines.table();
        let mut total = 0.0;
        let mut sig = vec![0.0; act.len()];
        for c in 0..self.arch.channels {
            let mut acc = 0.0;
            for (a, s) in act[c * hw..(c + 1) * hw]
                .iter()
                .zip(&mut sig[c * hw..(c + 1) * hw])
            {
                let (p, d) = table.eval(c, *a);
                acc += p;
                *s = d;
            }
            total += acc;
        }
        (total, sig)
    }

    pub fn g_forward(&self, x: &Tensor) -> Result<f64> {
        let (f, h, w) = self.forward(x)?;
        Ok(self.log_scale.exp() * self.profile(&f.act, h * w).0)
    }

    /// `(g(x), ∇_x g(x))`
    pub fn g_value_grad_x(&self, x: &Tensor) -> Result<(f64, Tensor)> {
        let (f, h, w) = self.forward(x)?;
        let scale = self.log_scale.exp();
        let (value, mut sig) = self.profile(&f.act, h * w);
        sig.iter_mut().for_each(|s| *s *= scale);
        let grad = self.linear_adjoint(&sig, h, w).1;
        Ok((scale * value, Tensor::new(x.shape().to_vec(), grad)?))
    }

    pub fn g_grad_x(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.g_value_grad_x(x)?.1)
    }

    pub fn g_grad_theta(&self, x: &Tensor) -> Result<ThetaGradient> {
        Ok(self.g_value_grad_theta(x)?.1)
    }

    pub fn g_value_grad_theta(&self, x: &Tensor) -> Result<(f64, ThetaGradient)> {
        let a = &self.arch;
        let (f, h, w) = self.forward(x)?;
        let hw = h * w;
        let scale = self.log_scale.exp();
        let (value, mut sig) = self.profile(&f.act, hw);
        let mut grad = self.zero_theta_grad();

        let mut slopes = vec![0.0; a.slopes_len()];
        for c in 0..a.channels {
            self.splines
                .psi_slope_grad_batch(c, &f.act[c * hw..(c + 1) * hw], 1.0, &mut slopes);
        }
        grad.slopes = slopes.iter().map(|v| v * scale).collect();

        sig.iter_mut().for_each(|s| *s *= scale);
        if a.use_bias {
            for (c, b) in grad.bias.iter_mut().enumerate() {
                *b = sig[c * hw..(c + 1) * hw].iter().sum();
            }
        }
        stack_weight_grad(
            &mut grad.conv2,
            &sig,
            &f.hidden,
            a.mid_ch,
            a.channels,
            h,
            w,
            a.kernel_size,
        );
        let back_hidden =
            stack_adjoint(&self.conv2, &sig, a.mid_ch, a.channels, h, w, a.kernel_size);
        stack_weight_grad(
            &mut grad.conv1,
            &back_hidden,
            &f.pre,
            a.conv1_in(),
            a.mid_ch,
            h,
            w,
            a.kernel_size,
        );
        let g = scale * value;
        grad.log_scale = if a.learn_log_scale { g } else { 0.0 };
        Ok((g, grad))
    }

    pub fn zero_theta_grad(&self) -> ThetaGradient {
        ThetaGradient {
            conv1: vec![0.0; self.conv1.len()],
            conv2: vec![0.0; self.conv2.len()],
            slopes: vec![0.0; self.splines.slopes().len()],
            bias: vec![0.0; self.bias.len()],
            log_scale: 0.0,
        }
    }

    /// θ ← θ + step (group-wise scaled); a frozen log-scale is left untouched.
    pub fn apply_step(&mut self, step: &ThetaGradient, scales: &GroupScales) {
        self.conv1
            .iter_mut()
            .zip(&step.conv1)
            .for_each(|(p, s)| *p += scales.conv * s);
        self.conv2
            .iter_mut()
            .zip(&step.conv2)
            .for_each(|(p, s)| *p += scales.conv * s);
        self.splines
            .slopes_mut()
            .iter_mut()
            .zip(&step.slopes)
            .for_each(|(p, s)| *p += scales.spline * s);
        self.bias
            .iter_mut()
            .zip(&step.bias)
            .for_each(|(p, s)| *p += scales.bias * s);
        if self.arch.learn_log_scale {
            self.log_scale += scales.log_scale * step.log_scale;
        }
    }

    /// Clamp slopes into `[m_min, m_max]` and shrink each filter stack into
    /// the Frobenius ball of radius `R_Θ`.
    pub fn project_params(&mut self) {
        self.splines.project();
        let r = self.arch.radius;
        for stack in [&mut self.conv1, &mut self.conv2] {
            let n = frobenius(stack);
            // the rescaled norm may land an ulp above r; leave it there
            if n > r * (1.0 + 1e-12) {
                let s = r / n;
                stack.iter_mut().for_each(|v| *v *= s);
            }
        }
    }

    pub fn projected(mut self) -> Self {
        self.project_params();
        self
    }

    pub fn is_feasible(&self) -> bool {
        let r = self.arch.radius * (1.0 + 2e-12);
        self.splines.is_feasible() && frobenius(&self.conv1) <= r && frobenius(&self.conv2) <= r
    }

    /// Squared spectral norm of `W P` on (H, W) images by power iteration on
    /// `(WP)ᵀ WP`, with the top right singular vector.
    pub fn spectral_norm_sq(&self, h: usize, w: usize) -> Result<(f64, Tensor)> {
        let n = self.arch.in_ch * h * w;
        let mut rng = RngStream::new(0x5eed_5eed, 0x11b);
        let mut v: Vec<f64> = (0..n).map(|_| rng.std_normal()).collect();
        normalize(&mut v);
        let mut estimate = 0.0;
        for _ in 0..POWER_ITERS {
            let wv = self.linear_forward(&v, h, w).2;
            let mut m = self.linear_adjoint(&wv, h, w).1;
            let rq: f64 = m.iter().zip(&v).map(|(a, b)| a * b).sum();
            let resid = m
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - rq * b).powi(2))
                .sum::<f64>()
                .sqrt();
            if rq <= 0.0 {
                return Ok((0.0, Tensor::new(vec![self.arch.in_ch, h, w], v)?));
            }
            // Rayleigh quotient plus residual bounds the nearby eigenvalue from above
            estimate = rq + resid;
            if resid <= 1e-6 * rq {
                break;
            }
            normalize(&mut m);
            v = m;
        }
        // near-degenerate top eigenvalues stall the residual; the estimate is still usable
        if !estimate.is_finite() {
            return Err(Error::NonFinite {
                context: "spectral norm power iteration".into(),
            });
        }
        Ok((estimate, Tensor::new(vec![self.arch.in_ch, h, w], v)?))
    }

    /// `e^c · m_max · ‖WP‖²`, an upper bound on the Lipschitz constant of `∇_x g`.
    pub fn lipschitz_bound(&self, h: usize, w: usize) -> Result<f64> {
        let (s, _) = self.spectral_norm_sq(h, w)?;
        Ok(self.log_scale.exp() * self.arch.m_max * s)
    }

    /// θ-gradient of [`Self::lipschitz_bound`] with the singular vector held fixed.
    pub fn lipschitz_bound_grad(&self, h: usize, w: usize) -> Result<(f64, ThetaGradient)> {
        let a = &self.arch;
        let (s, v) = self.spectral_norm_sq(h, w)?;
        let factor = self.log_scale.exp() * a.m_max;
        let (pre, hidden, wv) = self.linear_forward(v.data(), h, w);
        // d‖WPv‖² = 2⟨WPv, dW Pv⟩
        let up: Vec<f64> = wv.iter().map(|x| 2.0 * factor * x).collect();
        let mut grad = self.zero_theta_grad();
        stack_weight_grad(&mut grad.conv2, &up, &hidden, a.mid_ch, a.channels, h, w, a.kernel_size);
        let back = stack_adjoint(&self.conv2, &up, a.mid_ch, a.channels, h, w, a.kernel_size);
        stack_weight_grad(&mut grad.conv1, &back, &pre, a.conv1_in(), a.mid_ch, h, w, a.kernel_size);
        if a.learn_log_scale {
            grad.log_scale = factor * s;
        }
        Ok((factor * s, grad))
    }
}

const POWER_ITERS: usize = 2_000;

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

impl Potential for CrrParams {
    fn value(&self, x: &Tensor) -> Result<f64> {
        self.g_forward(x)
    }

    fn value_grad_x(&self, x: &Tensor) -> Result<(f64, Tensor)> {
        self.g_value_grad_x(x)
    }
}

impl Regularizer for CrrParams {
    type Grad = ThetaGradient;

    fn grad_theta(&self, x: &Tensor) -> Result<ThetaGradient> {
        self.g_grad_theta(x)
    }

    fn value_grad_theta(&self, x: &Tensor) -> Result<(f64, ThetaGradient)> {
        self.g_value_grad_theta(x)
    }

    fn zero_grad(&self) -> ThetaGradient {
        self.zero_theta_grad()
    }

    fn apply_step(&mut self, step: &ThetaGradient, scales: &GroupScales) {
        CrrParams::apply_step(self, step, scales)
    }

    fn project(&mut self) {
        self.project_params()
    }

    fn is_feasible(&self) -> bool {
        CrrParams::is_feasible(self)
    }

    fn to_checkpoint_bytes(&self, iteration: u64, seed: u64) -> Option<Vec<u8>> {
        Some(encode_checkpoint(&Checkpoint {
            params: self.clone(),
            iteration,
            seed,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::sample_std_normal;

    fn small_arch() -> CrrArchitecture {
        CrrArchitecture {
            in_ch: 1,
            mid_ch: 2,
            channels: 3,
            kernel_size: 3,
            half_knots: 4,
            ..Default::default()
        }
    }

    #[test]
    fn zero_image_zero_energy_and_gradients() {
        let mut arch = small_arch();
        arch.use_bias = true;
        let p = CrrParams::init(arch, &mut RngStream::new(1, 0)).unwrap();
        let x = Tensor::zeros(&[1, 6, 6]);
        assert_eq!(p.g_forward(&x).unwrap(), 0.0);
        assert!(p.g_grad_x(&x).unwrap().data().iter().all(|&v| v == 0.0));
        let g = p.g_grad_theta(&x).unwrap();
        assert_eq!(g, p.zero_theta_grad());
    }

    #[test]
    fn defaults_follow_architecture_text() {
        let a = CrrArchitecture {
            in_ch: 3,
            ..Default::default()
        };
        assert_eq!((a.mid_ch, a.channels, a.kernel_size), (8, 32, 7));
        assert_eq!(2 * a.half_knots + 1, 21);
        assert_eq!(a.delta, 0.01);
        // 3*8*49 + 8*32*49 + 32*20
        assert_eq!(a.parameter_count(), 1176 + 12544 + 640);
    }

    #[test]
    fn wrong_channel_count_is_rejected() {
        let p = CrrParams::init(small_arch(), &mut RngStream::new(1, 0)).unwrap();
        assert!(matches!(
            p.g_forward(&Tensor::zeros(&[3, 4, 4])),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn identity_filter_lipschitz_is_m_max() {
        let arch = CrrArchitecture {
            in_ch: 1,
            mid_ch: 1,
            channels: 1,
            kernel_size: 1,
            half_knots: 10,
            m_max: 1.0,
            ..Default::default()
        };
        let p = CrrParams::with_filters(arch, vec![1.0], vec![1.0]);
        let l = p.lipschitz_bound(5, 5).unwrap();
        assert!((l - 1.0).abs() < 1e-9, "bound {l}");
    }

    #[test]
    fn projection_is_idempotent_and_feasible() {
        let mut p = CrrParams::init(small_arch(), &mut RngStream::new(2, 0)).unwrap();
        let mut r = RngStream::new(9, 9);
        p.splines
            .slopes_mut()
            .iter_mut()
            .for_each(|d| *d = 8.0 * r.std_normal());
        p.conv1.iter_mut().for_each(|v| *v *= 500.0);
        let once = p.clone().projected();
        let twice = once.clone().projected();
        assert_eq!(once, twice);
        assert!(once.is_feasible());
        assert!((frobenius(&once.conv1) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn feasible_params_unchanged_by_projection() {
        let p = CrrParams::init(small_arch(), &mut RngStream::new(2, 0)).unwrap();
        assert_eq!(p.clone().projected(), p);
    }

    #[test]
    fn negative_slope_clamped_to_floor() {
        let mut p = CrrParams::init(small_arch(), &mut RngStream::new(2, 0)).unwrap();
        p.splines.slopes_mut()[0] = -0.5;
        p.project_params();
        assert_eq!(p.splines.slopes()[0], 1e-3);
    }

    #[test]
    fn frozen_log_scale_ignores_updates() {
        let mut p = CrrParams::init(small_arch(), &mut RngStream::new(2, 0)).unwrap();
        let mut step = p.zero_theta_grad();
        step.log_scale = 3.0;
        p.apply_step(&step, &GroupScales::default());
        assert_eq!(p.log_scale, 0.0);
        let x = sample_std_normal(&mut RngStream::new(3, 0), &[1, 5, 5]);
        assert_eq!(p.g_grad_theta(&x).unwrap().log_scale, 0.0);
    }
}
