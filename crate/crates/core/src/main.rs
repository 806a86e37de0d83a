use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stochepi::io::config::SamplerConfig;
use stochepi::io::pipeline::{self, HIDDEN_FILE, OBSERVED_FILE};
use stochepi::io::{ScenarioConfig, Table};
use stochepi::{Error, Result};

#[derive(Parser)]
#[command(name = "stochepi", version, about = "Stochastic epidemic simulation and particle MCMC inference")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the hidden path and write hidden.csv.
    Simulate(Common),
    /// Draw observations from a hidden path and write observed.csv.
    Observe {
        #[command(flatten)]
        common: Common,
        /// Hidden path to read (default: <out>/hidden.csv).
        #[arg(long)]
        hidden: Option<PathBuf>,
    },
    /// Run the configured sampler on observed data.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Observed data to read (default: <out>/observed.csv).
        #[arg(long)]
        observed: Option<PathBuf>,
        /// Overrides the number of PMMH chains.
        #[arg(long)]
        chains: Option<usize>,
    },
    /// Summarize a run directory: summary.json and bands.csv.
    Diagnose {
        /// Run directory written by `fit`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a checked-in scenario end to end.
    Reproduce {
        /// Scenario id; `list` prints the available ids.
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        chains: Option<usize>,
    },
}

fn load(common: &Common, chains: Option<usize>) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(&common.config)?;
    apply_overrides(&mut cfg, common.seed, chains)?;
    Ok(cfg)
}

fn apply_overrides(cfg: &mut ScenarioConfig, seed: Option<u64>, chains: Option<usize>) -> Result<()> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(k) = chains {
        match &mut cfg.sampler {
            SamplerConfig::Pmmh(p) => p.n_chains = k,
            SamplerConfig::Abc(_) => log::warn!("--chains ignored for ABC"),
        }
    }
    cfg.validate()
}

fn create(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = load(&c, None)?;
            create(&c.out)?;
            pipeline::simulate(&cfg)?.write(&c.out.join(HIDDEN_FILE))?;
        }
        Command::Observe { common, hidden } => {
            let cfg = load(&common, None)?;
            let hidden = Table::read(&hidden.unwrap_or_else(|| common.out.join(HIDDEN_FILE)))?;
            create(&common.out)?;
            pipeline::observe(&cfg, &hidden)?.write(&common.out.join(OBSERVED_FILE))?;
        }
        Command::Fit { common, observed, chains } => {
            let cfg = load(&common, chains)?;
            let observed = Table::read(&observed.unwrap_or_else(|| common.out.join(OBSERVED_FILE)))?;
            pipeline::fit_to_dir(&cfg, &observed, &common.out)?;
        }
        Command::Diagnose { out } => {
            let s = pipeline::diagnose_to_dir(&out)?;
            for p in &s.params {
                println!(
                    "{:>6}  mean {:.4}  median {:.4}  95% HPD ({:.4}, {:.4})  ESS {:.0}{}",
                    p.name,
                    p.mean,
                    p.median,
                    p.hpd_low,
                    p.hpd_high,
                    p.ess,
                    p.rhat.map(|r| format!("  R-hat {r:.5}")).unwrap_or_default()
                );
            }
        }
        Command::Reproduce { scenario, out, seed, chains } => {
            if scenario == "list" {
                for (id, text) in pipeline::SCENARIOS {
                    let cfg = ScenarioConfig::from_json(text)?;
                    println!("{id:<18} {}", cfg.description);
                }
                return Ok(());
            }
            let mut cfg = pipeline::scenario(&scenario)?;
            apply_overrides(&mut cfg, seed, chains)?;
            for r in pipeline::run_scenario(&cfg, &out)? {
                let label = r.sweep_value.map(|v| format!(" [{v}]")).unwrap_or_default();
                let means: Vec<String> = r.summary.params.iter().map(|p| format!("{} {:.4}", p.name, p.mean)).collect();
                println!("{}{label}: {}", r.dir.display(), means.join(", "));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not configure {n} threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::TuningFailed { trace, .. } = &e {
                eprintln!("pilot trace ({} segments) written to pilot_trace.json", trace.len());
            }
            ExitCode::FAILURE
        }
    }
}
