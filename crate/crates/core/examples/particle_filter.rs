//! Particle-filter likelihood estimates on the noisy SIR data: spread of
//! `ln Z` across seeds for several particle counts, and a profile over β.
//!
//! cargo run --release --example particle_filter

use stochepi::diagnostics::{mean, variance};
use stochepi::io::pipeline::{observe, observed_series, scenario, simulate};
use stochepi::model::Params;
use stochepi::smc::log_likelihood;

fn main() -> stochepi::Result<()> {
    let cfg = scenario("pmmh-noisy")?;
    let spec = cfg.spec()?;
    let init = cfg.init()?;
    let obs_model = cfg.observation_model()?;
    let series = observed_series(&cfg, &observe(&cfg, &simulate(&cfg)?)?)?;
    let truth = Params::sir(2.0, 1.0)?;

    println!("particles   mean ln Z   sd ln Z   (20 seeds at the true parameters)");
    for n in [10, 100, 1000] {
        let lz: Vec<f64> = (0..20)
            .map(|s| log_likelihood(&spec, &truth, &obs_model, &series, &init, n, s))
            .collect::<Result<_, _>>()?;
        println!("{n:>9}   {:>9.2}   {:>7.3}", mean(&lz), variance(&lz).sqrt());
    }

    println!("\nbeta    ln Z (gamma = 1, 100 particles)");
    for b in [1.8, 1.9, 2.0, 2.1, 2.2] {
        let ll = log_likelihood(&spec, &Params::sir(b, 1.0)?, &obs_model, &series, &init, 100, 7)?;
        println!("{b:.1}     {ll:.2}");
    }
    Ok(())
}
