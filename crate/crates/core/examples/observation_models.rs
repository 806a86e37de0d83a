//! The two emission models applied to one hidden path, with their log densities.
//!
//! cargo run --release --example observation_models

use stochepi::gillespie::simulate_on_grid;
use stochepi::model::{sir_spec, Params};
use stochepi::observation::{ObservationModel, ObservedSeries};
use stochepi::rng::substream;

fn main() -> stochepi::Result<()> {
    let spec = sir_spec(4820)?;
    let init = spec.state(&[4800, 20, 0])?;
    let times: Vec<f64> = (1..=10).map(f64::from).collect();
    let hidden = simulate_on_grid(&spec, &Params::sir(2.0, 1.0)?, &init, 0.0, &times, &mut substream(3, "hidden", &[]))?;
    let real = hidden.to_real();

    let noisy = ObservationModel::gaussian(0.01, 3)?;
    let thinned = ObservationModel::binomial(0.1, 3)?;
    let mut rng = substream(3, "observe", &[]);
    let a = ObservedSeries::simulate(&noisy, &times, &real.states, &mut rng)?;
    let b = ObservedSeries::simulate(&thinned, &times, &real.states, &mut rng)?;

    println!("{:>3} {:>16} {:>22} {:>18}", "t", "hidden S/I/R", "gaussian (n = 0.01)", "binomial (p = 0.1)");
    for k in 0..times.len() {
        let h = hidden.states[k].as_slice();
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.0}")).collect::<Vec<_>>().join("/");
        println!("{:>3} {:>16} {:>22} {:>18}", times[k], format!("{}/{}/{}", h[0], h[1], h[2]), fmt(&a.values[k]), fmt(&b.values[k]));
    }

    let lg: f64 = (0..times.len()).map(|k| noisy.log_density(&hidden.states[k], &a.values[k])).sum();
    let lb: f64 = (0..times.len()).map(|k| thinned.log_density(&hidden.states[k], &b.values[k])).sum();
    println!("\nlog p(y | hidden path): gaussian {lg:.3}, binomial {lb:.3}");
    Ok(())
}
