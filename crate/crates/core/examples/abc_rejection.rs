//! Rejection ABC on the noisy SIR data at a few tolerances.
//!
//! cargo run --release --example abc_rejection

use stochepi::diagnostics::{hpd_interval, mean};
use stochepi::inference::abc::observed_summary;
use stochepi::inference::{abc_rejection, AbcConfig, Prior};
use stochepi::io::pipeline::{observe, observed_series, scenario, simulate};

fn main() -> stochepi::Result<()> {
    let cfg = scenario("abc-noisy")?;
    let spec = cfg.spec()?;
    let init = cfg.init()?;
    let series = observed_series(&cfg, &observe(&cfg, &simulate(&cfg)?)?)?;
    let summary = observed_summary(&spec, cfg.observation_model()?.observed_compartments(), &series)?;
    let prior = Prior::uniform(vec![0.0, 0.0], vec![5.0, 5.0])?;

    println!("{:>6} {:>9} {:>8} {:>20} {:>8} {:>20}", "eps", "attempts", "beta", "95% HPD", "gamma", "95% HPD");
    for eps in [600.0, 300.0, 150.0] {
        let res = abc_rejection(
            &spec,
            &cfg.base_params(),
            &cfg.layout()?,
            &prior,
            &summary,
            &series.times,
            &init,
            &AbcConfig::new(eps, 200),
            cfg.seed,
        )?;
        let (b, g) = (res.column(0), res.column(1));
        let (bl, bh) = hpd_interval(&b, 0.95)?;
        let (gl, gh) = hpd_interval(&g, 0.95)?;
        println!(
            "{eps:>6} {:>9} {:>8.3} {:>20} {:>8.3} {:>20}",
            res.attempts,
            mean(&b),
            format!("({bl:.2}, {bh:.2})"),
            mean(&g),
            format!("({gl:.2}, {gh:.2})")
        );
    }
    Ok(())
}
