//! SAPG on a Gaussian model whose marginal MLE is known in closed form.

fn main() -> sapg_crr::Result<()> {
    for seed in 0..5 {
        let (theta, hat) = sapg_crr::cli::run_scalar_sapg(5_000, 1e-3, seed)?;
        println!("seed {seed}: θ_N {theta:.4}  MLE {hat:.4}  rel err {:.3}", (theta - hat).abs() / hat);
    }
    Ok(())
}
