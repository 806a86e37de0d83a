//! Convergence and accuracy summaries on synthetic AR(1) chains with a known
//! stationary law N(0, 1 / (1 - rho^2)).
//!
//! cargo run --release --example diagnostics

use rand::Rng;
use rand_distr::StandardNormal;

use stochepi::diagnostics::{effective_sample_size, gelman_rubin, hpd_interval, pmse};
use stochepi::rng::substream;

fn ar1(rho: f64, n: usize, start: f64, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, "ar1", &[]);
    let mut x = start;
    (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            x = rho * x + z;
            x
        })
        .collect()
}

fn main() -> stochepi::Result<()> {
    // three chains of n steps; the exact ESS is 3n(1 - rho)/(1 + rho)
    let n = 5000;
    println!("{:>5} {:>9} {:>11} {:>8} {:>20} {:>8}", "rho", "ESS", "exact", "R-hat", "95% HPD", "PMSE");
    for rho in [0.0, 0.5, 0.9, 0.99] {
        let chains: Vec<Vec<f64>> = (0..3).map(|k| ar1(rho, n, 0.0, k)).collect();
        let ess: f64 = chains.iter().map(|c| effective_sample_size(c).map(|e| e.value)).sum::<Result<_, _>>()?;
        let (lo, hi) = hpd_interval(&chains[0], 0.95)?;
        println!(
            "{rho:>5} {:>9.0} {:>11.0} {:>8.4} {:>20} {:>8.3}",
            ess,
            3.0 * n as f64 * (1.0 - rho) / (1.0 + rho),
            gelman_rubin(&chains)?,
            format!("({lo:.2}, {hi:.2})"),
            pmse(&chains[0], 0.0)
        );
    }

    // Chains started far apart and stopped early do not agree.
    let spread: Vec<Vec<f64>> = [-50.0, 0.0, 50.0].iter().enumerate().map(|(k, &s)| ar1(0.99, 200, s, k as u64)).collect();
    println!("\noverdispersed starts, 200 steps: R-hat {:.2}", gelman_rubin(&spread)?);
    Ok(())
}
