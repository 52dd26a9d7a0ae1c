//! A learned-looking spline: σ, its integral ψ and the projection onto slope bounds.

use sapg_crr::crr::SplineBank;

fn main() {
    // steep near zero, shallow in the tails
    let slopes: Vec<f64> = (0..20)
        .map(|i| {
            let j = if i < 10 { i as f64 - 10.0 } else { i as f64 - 9.0 };
            4.0 / (1.0 + j * j) - 0.5
        })
        .collect();
    let mut b = SplineBank::from_slopes(1, 10, 0.01, slopes, 1e-3, 5.0);
    println!("feasible before projection: {}", b.is_feasible());
    b.project();
    println!("feasible after projection: {}", b.is_feasible());
    for k in -6..=6 {
        let t = k as f64 * 0.025;
        println!("t {t:+.3}  σ {:+.5}  ψ {:.6}", b.sigma_eval(0, t), b.psi_eval(0, t));
    }
}
