//! Analytic CRR gradients in x and θ against central differences.

use sapg_crr::crr::{CrrArchitecture, CrrParams};
use sapg_crr::gradcheck::{directional_difference, relative_error};
use sapg_crr::regularizer::{ParamVector, Potential, Regularizer};
use sapg_crr::rng::{sample_std_normal, RngStream};

fn main() -> sapg_crr::Result<()> {
    let arch = CrrArchitecture { mid_ch: 2, channels: 4, kernel_size: 5, use_diff: true, use_bias: true, ..Default::default() };
    let mut r = RngStream::new(0, 0);
    let mut p = CrrParams::init(arch, &mut r)?;
    for s in p.splines.slopes_mut() {
        *s = 0.1 + 3.0 * r.uniform();
    }
    let x = sample_std_normal(&mut r, &[1, 12, 12]).scaled(0.05);

    let dir = sample_std_normal(&mut r, x.shape());
    let fd = directional_difference(|z| p.value(z), &x, &dir, 1e-6)?;
    let an = p.grad_x(&x)?.dot(&dir);
    println!("∇_x: fd {fd:.10e} analytic {an:.10e} rel {:.1e}", relative_error(fd, an, 1e-12));

    let mut step = p.zero_grad();
    step.conv1.iter_mut().chain(&mut step.conv2).chain(&mut step.slopes).chain(&mut step.bias)
        .for_each(|v| *v = r.std_normal());
    let h = 1e-6;
    let at = |s: f64| {
        let mut q = p.clone();
        let mut d = step.clone();
        d.scale(s);
        q.apply_step(&d, &Default::default());
        q.value(&x)
    };
    let fd = (at(h)? - at(-h)?) / (2.0 * h);
    let an = p.grad_theta(&x)?.dot(&step);
    println!("∇_θ: fd {fd:.10e} analytic {an:.10e} rel {:.1e}", relative_error(fd, an, 1e-12));
    Ok(())
}
