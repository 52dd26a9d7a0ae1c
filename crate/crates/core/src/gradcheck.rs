//! Central finite differences for checking analytic gradients.

use crate::error::Result;
use crate::tensor::Tensor;

/// `(f(x + h e_i) − f(x − h e_i)) / 2h` along direction `dir`.
pub fn directional_difference(
    f: impl Fn(&Tensor) -> Result<f64>,
    x: &Tensor,
    dir: &Tensor,
    h: f64,
) -> Result<f64> {
    let mut a = x.clone();
    a.axpy(h, dir);
    let mut b = x.clone();
    b.axpy(-h, dir);
    Ok((f(&a)? - f(&b)?) / (2.0 * h))
}

/// Every coordinate of the central-difference gradient.
pub fn central_gradient(f: impl Fn(&Tensor) -> Result<f64>, x: &Tensor, h: f64) -> Result<Tensor> {
    let mut g = Tensor::zeros(x.shape());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let v = x.data()[i];
        probe.data_mut()[i] = v + h;
        let up = f(&probe)?;
        probe.data_mut()[i] = v - h;
        let down = f(&probe)?;
        probe.data_mut()[i] = v;
        g.data_mut()[i] = (up - down) / (2.0 * h);
    }
    Ok(g)
}

/// `|a − b| / max(|a|, |b|, floor)`
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, floor)`
pub fn relative_error_tensor(a: &Tensor, b: &Tensor, floor: f64) -> f64 {
    a.sub(b).norm() / a.norm().max(b.norm()).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_gradient() {
        let x = Tensor::new(vec![3], vec![0.5, -1.0, 2.0]).unwrap();
        let f = |t: &Tensor| Ok(t.data().iter().map(|v| v * v * v).sum::<f64>());
        let g = central_gradient(f, &x, 1e-5).unwrap();
        for (gi, xi) in g.data().iter().zip(x.data()) {
            assert!(relative_error(*gi, 3.0 * xi * xi, 1e-12) < 1e-9);
        }
        let d = directional_difference(f, &x, &Tensor::filled(&[3], 1.0), 1e-5).unwrap();
        assert!(relative_error(d, 3.0 * (0.25 + 1.0 + 4.0), 1e-12) < 1e-9);
    }
}
