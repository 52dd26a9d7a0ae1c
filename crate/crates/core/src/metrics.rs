//! Image-quality metrics.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const PSNR_CAP: f64 = 99.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

pub fn mse(x: &Tensor, reference: &Tensor) -> Result<f64> {
    x.check_shape(reference.shape())?;
    if x.is_empty() {
        return Err(Error::InvalidArgument("mse of empty tensors".into()));
    }
    let s: f64 = x
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(s / x.len() as f64)
}

/// `10 log10(peak² / MSE)`, capped at [`PSNR_CAP`].
pub fn psnr(x: &Tensor, reference: &Tensor, peak: f64) -> Result<f64> {
    let m = mse(x, reference)?;
    if m == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (peak * peak / m).log10()).min(PSNR_CAP))
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let t = i as f64 - r;
            (-t * t / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable weighted mean over every fully-contained window.
fn filter_valid(plane: &[f64], h: usize, w: usize, win: &[f64]) -> Vec<f64> {
    let n = win.len();
    let (oh, ow) = (h + 1 - n, w + 1 - n);
    let mut rows = vec![0.0; h * ow];
    for i in 0..h {
        for j in 0..ow {
            rows[i * ow + j] = (0..n).map(|k| win[k] * plane[i * w + j + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = (0..n).map(|k| win[k] * rows[(i + k) * ow + j]).sum();
        }
    }
    out
}

/// Single-scale SSIM with an 11×11 Gaussian window (σ = 1.5), peak 1,
/// averaged over valid window positions and channels.
pub fn ssim(x: &Tensor, reference: &Tensor) -> Result<f64> {
    x.check_shape(reference.shape())?;
    let (c, h, w) = match *x.shape() {
        [c, h, w] => (c, h, w),
        [h, w] => (1, h, w),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "ssim expects (C,H,W) or (H,W), got {:?}",
                x.shape()
            )))
        }
    };
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {h}x{w}"
        )));
    }
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let win = gaussian_window();
    let hw = h * w;
    let mut total = 0.0;
    for ch in 0..c {
        let a = &x.data()[ch * hw..(ch + 1) * hw];
        let b = &reference.data()[ch * hw..(ch + 1) * hw];
        let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
        let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = a.iter().zip(b).map(|(u, v)| u * v).collect();
        let mu_a = filter_valid(a, h, w, &win);
        let mu_b = filter_valid(b, h, w, &win);
        let s_aa = filter_valid(&aa, h, w, &win);
        let s_bb = filter_valid(&bb, h, w, &win);
        let s_ab = filter_valid(&ab, h, w, &win);
        let mut acc = 0.0;
        for k in 0..mu_a.len() {
            let (ma, mb) = (mu_a[k], mu_b[k]);
            let va = s_aa[k] - ma * ma;
            let vb = s_bb[k] - mb * mb;
            let cov = s_ab[k] - ma * mb;
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        total += acc / mu_a.len() as f64;
    }
    Ok(total / c as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn psnr_reference_values() {
        let z = Tensor::zeros(&[1, 4, 4]);
        assert_eq!(psnr(&z, &z, 1.0).unwrap(), 99.0);
        let a = Tensor::filled(&[1, 4, 4], 0.1);
        assert!((psnr(&a, &z, 1.0).unwrap() - 20.0).abs() < 1e-12);
        let one = Tensor::filled(&[1, 4, 4], 1.0);
        assert!(psnr(&one, &z, 1.0).unwrap().abs() < 1e-12);
        assert!(psnr(&one, &Tensor::zeros(&[1, 4, 5]), 1.0).is_err());
    }

    #[test]
    fn psnr_decreases_with_noise_scale() {
        let mut r = RngStream::new(1, 0);
        let x = Tensor::from_fn(&[1, 8, 8], |_| r.uniform());
        let eta = Tensor::from_fn(&[1, 8, 8], |_| r.std_normal());
        let vals: Vec<f64> = [0.01, 0.02, 0.05, 0.1]
            .iter()
            .map(|&s| {
                let mut y = x.clone();
                y.axpy(s, &eta);
                psnr(&y, &x, 1.0).unwrap()
            })
            .collect();
        assert!(vals.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn ssim_identity_and_symmetry() {
        let mut r = RngStream::new(2, 0);
        let a = Tensor::from_fn(&[3, 16, 14], |_| r.uniform());
        let b = Tensor::from_fn(&[3, 16, 14], |_| r.uniform());
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let (s1, s2) = (ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        assert!((s1 - s2).abs() < 1e-12);
        assert!(s1 < 0.5);
    }

    #[test]
    fn ssim_of_constants_is_luminance_term() {
        let a = Tensor::filled(&[1, 12, 12], 0.5);
        let b = Tensor::filled(&[1, 12, 12], 0.6);
        let c1 = 1e-4;
        let want = (2.0 * 0.5 * 0.6 + c1) / (0.25 + 0.36 + c1);
        assert!((ssim(&a, &b).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = Tensor::zeros(&[1, 10, 20]);
        assert!(ssim(&a, &a).is_err());
    }
}
