//! Adaptive random-walk PMMH across reporting probabilities: the β
//! posterior widens as fewer cases are seen. Shortened chains.
//!
//! cargo run --release --example adaptive_sweep

use stochepi::diagnostics::{burn_thin, hpd_interval, mean};
use stochepi::inference::{pmmh_run, PmmhTarget, Proposal};
use stochepi::io::config::SweepField;
use stochepi::io::pipeline::{observe, observed_series, scenario, simulate};

fn main() -> stochepi::Result<()> {
    let base = scenario("sweep-pobs")?;
    println!("{:>6} {:>8} {:>22} {:>10}", "p_obs", "beta", "95% HPD", "accept");
    for p_obs in [0.1, 0.05, 0.01] {
        let cfg = base.with_sweep_value(SweepField::PObs, p_obs)?;
        let series = observed_series(&cfg, &observe(&cfg, &simulate(&cfg)?)?)?;
        let target = PmmhTarget {
            spec: cfg.spec()?,
            base: cfg.base_params(),
            obs_model: cfg.observation_model()?,
            observed: series,
            init: cfg.init()?,
            layout: cfg.layout()?,
            n_particles: 200,
        };
        let proposal = Proposal::adaptive(0.02, 2, 500, 1e-4)?;
        let chain = pmmh_run(&target, &cfg.prior()?, &proposal, &[2.2, 1.1], 2000, cfg.seed)?;
        let beta = burn_thin(&chain.column(0), 500, 1)?;
        let (lo, hi) = hpd_interval(&beta, 0.95)?;
        println!(
            "{p_obs:>6} {:>8.3} {:>22} {:>10.3}",
            mean(&beta),
            format!("({lo:.3}, {hi:.3})"),
            chain.acceptance_rate()
        );
    }
    Ok(())
}
