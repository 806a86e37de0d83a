//! Pilot-tuned particle marginal Metropolis-Hastings on under-reported SIR
//! data with the reporting probability known. A shortened version of the
//! `under-known` scenario.
//!
//! cargo run --release --example pmmh_under_reported

use stochepi::diagnostics::summarize;
use stochepi::inference::{pilot_tune, pmmh_chains, PilotConfig, PmmhTarget};
use stochepi::io::pipeline::{observe, observed_series, scenario, simulate};

fn main() -> stochepi::Result<()> {
    let cfg = scenario("under-known")?;
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
    let prior = cfg.prior()?;

    let pilot = pilot_tune(&target, &prior, &[2.5, 1.2], &PilotConfig::default(), 7)?;
    println!("pilot: h = {:.4} after {} segments", pilot.h, pilot.trace.len());
    for b in &pilot.trace {
        println!("  stage {} h {:>8.4} acceptance {:.2}", b.stage, b.h, b.acceptance);
    }

    let chains = pmmh_chains(&target, &prior, &pilot.proposal()?, &pilot.theta_start, 2000, 2, 7)?;
    let s = summarize(&chains, 500, 5, cfg.truth().as_deref())?;
    println!("\nacceptance {:.3}", s.acceptance_raw);
    for p in &s.params {
        println!(
            "{:>6}: mean {:.3}, 95% HPD ({:.3}, {:.3}), ESS {:.0}, R-hat {:.3}",
            p.name,
            p.mean,
            p.hpd_low,
            p.hpd_high,
            p.ess,
            p.rhat.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
