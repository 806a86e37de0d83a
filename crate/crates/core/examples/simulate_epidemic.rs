//! Deterministic and stochastic SIR/SEIR paths side by side.
//!
//! cargo run --release --example simulate_epidemic

use stochepi::gillespie::{gillespie_run, simulate_on_grid};
use stochepi::model::{basic_reproduction_number, integrate_deterministic, seir_spec, sir_spec, Params};
use stochepi::rng::substream;

fn main() -> stochepi::Result<()> {
    let sir = sir_spec(4820)?;
    let p = Params::sir(2.0, 1.0)?;
    let init = sir.state(&[4800, 20, 0])?;
    println!("SIR, N = 4820, R0 = {}", basic_reproduction_number(&p, &sir)?);

    let grid: Vec<f64> = (0..=15).map(f64::from).collect();
    let ode = integrate_deterministic(&sir, &p, &init.to_f64_vec(), &grid)?;
    let paths: Vec<_> = (0..3)
        .map(|k| simulate_on_grid(&sir, &p, &init, 0.0, &grid, &mut substream(1, "example", &[k])))
        .collect::<Result<_, _>>()?;

    println!("{:>3} {:>9} {:>6} {:>6} {:>6}", "t", "ODE I", "run 1", "run 2", "run 3");
    for (i, t) in grid.iter().enumerate() {
        print!("{t:>3} {:>9.1}", ode.states[i][1]);
        for path in &paths {
            print!(" {:>6}", path.states[i].get(1));
        }
        println!();
    }

    // Event-resolved path: every infection and removal.
    let run = gillespie_run(&sir, &p, &init, 0.0, 15.0, &mut substream(1, "events", &[]))?;
    let last = run.last_state().unwrap();
    println!(
        "\none exact path: {} events, final state {:?}",
        run.len() - 2,
        last.as_slice()
    );

    let seir = seir_spec(4820)?;
    let q = Params::seir(4.0, 1.0, 1.0)?;
    let init = seir.state(&[4800, 0, 20, 0])?;
    let ode = integrate_deterministic(&seir, &q, &init.to_f64_vec(), &grid)?;
    let path = simulate_on_grid(&seir, &q, &init, 0.0, &grid, &mut substream(2, "example", &[]))?;
    println!("\nSEIR (beta 4, gamma 1, alpha 1): final size ODE {:.0}, one run {}", ode.states[15][3], path.states[15].get(3));
    Ok(())
}
