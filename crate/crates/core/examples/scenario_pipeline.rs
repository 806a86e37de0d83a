//! The file-based pipeline on a small configuration: every stage writes its
//! CSV/JSON output into a run directory, as the command-line tool does.
//!
//! cargo run --release --example scenario_pipeline [out-dir]

use std::path::PathBuf;

use stochepi::io::pipeline::{diagnose_to_dir, fit_to_dir, observe, simulate, HIDDEN_FILE, OBSERVED_FILE};
use stochepi::io::ScenarioConfig;

const CONFIG: &str = r#"{
  "id": "small-seir",
  "description": "Small SEIR outbreak observed through 30% reporting",
  "model": "seir",
  "population": 1000,
  "initial": [980, 0, 20, 0],
  "true_params": {"beta": 3.0, "gamma": 1.0, "alpha": 1.5},
  "obs": {"kind": "binomial-thinning", "p_obs": 0.3},
  "grid": {"first": 1, "last": 10},
  "sampler": {
    "kind": "pmmh", "n_steps": 1500, "n_chains": 2, "n_particles": 100, "burn": 300, "thin": 5,
    "free": ["beta", "gamma", "alpha"], "theta0": [3.5, 1.2, 1.2], "band_draws": 200,
    "adaptive": {"t0": 300, "epsilon": 0.0001}, "h": 0.05
  },
  "seed": 2024
}"#;

fn main() -> stochepi::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("stochepi-small-seir"));
    std::fs::create_dir_all(&out)?;
    let cfg = ScenarioConfig::from_json(CONFIG)?;

    let hidden = simulate(&cfg)?;
    hidden.write(&out.join(HIDDEN_FILE))?;
    let observed = observe(&cfg, &hidden)?;
    observed.write(&out.join(OBSERVED_FILE))?;
    fit_to_dir(&cfg, &observed, &out)?;
    let s = diagnose_to_dir(&out)?;

    for p in &s.params {
        println!(
            "{:>6}: mean {:.3} (truth {}), 95% HPD ({:.3}, {:.3}), R-hat {:.3}",
            p.name,
            p.mean,
            p.truth.unwrap_or(f64::NAN),
            p.hpd_low,
            p.hpd_high,
            p.rhat.unwrap_or(f64::NAN)
        );
    }
    let mut files: Vec<_> = std::fs::read_dir(&out)?.map(|e| e.map(|e| e.file_name())).collect::<Result<_, _>>()?;
    files.sort();
    println!("\nwrote {}: {:?}", out.display(), files);
    Ok(())
}
