//! Seeded end-to-end stages: simulate, observe, fit, diagnose.
//!
//! Every stage is a pure function of the configuration, its input files and
//! the master seed. Child seeds are `derive_seed(seed, role, [])` with roles
//! `hidden`, `observe`, `pilot` and `bands`; chain `k` uses
//! `derive_seed(seed, "chain", [k])`, and ABC attempt `i` uses
//! `substream(seed, "abc", [i])`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::{HiddenSource, SamplerConfig, ScenarioConfig, SweepField};
use super::table::Table;
use crate::diagnostics::{summarize, trajectory_bands, Bands, PosteriorSummary};
use crate::error::{Error, Result};
use crate::gillespie::simulate_on_grid;
use crate::inference::abc::observed_summary;
use crate::inference::pmmh::matrix_rows;
use crate::inference::{
    abc_rejection, default_h, pilot_tune, pmmh_chains, AbcResult, Chain, ChainMeta, PilotBatch, PmmhTarget,
    Proposal, ProposalMode,
};
use crate::model::integrate_deterministic;
use crate::observation::ObservedSeries;
use crate::rng::{derive_seed, substream};

pub const HIDDEN_FILE: &str = "hidden.csv";
pub const OBSERVED_FILE: &str = "observed.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const TUNING_FILE: &str = "tuning.json";
pub const META_FILE: &str = "meta.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const BANDS_FILE: &str = "bands.csv";
pub const POSTERIOR_FILE: &str = "posterior.csv";
pub const ABC_FILE: &str = "abc.json";
pub const PILOT_TRACE_FILE: &str = "pilot_trace.json";
pub const SWEEP_FILE: &str = "sweep.csv";

pub fn chain_file(k: usize) -> String {
    format!("chain_{k}.csv")
}

fn compartment_header(cfg: &ScenarioConfig, cols: &[usize]) -> Result<Vec<String>> {
    let spec = cfg.spec()?;
    let mut h = vec!["t".to_owned()];
    h.extend(cols.iter().map(|&c| spec.compartments()[c].to_owned()));
    Ok(h)
}

/// Hidden path at `t = 0, 1, ..., grid.last`.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Table> {
    let spec = cfg.spec()?;
    let params = cfg
        .true_params
        .ok_or_else(|| Error::Config {
            path: "true_params".into(),
            msg: "simulation needs true parameters".into(),
        })?;
    let times: Vec<f64> = (0..=cfg.grid.last).map(f64::from).collect();
    let states: Vec<Vec<f64>> = match cfg.hidden {
        HiddenSource::Deterministic => {
            let init: Vec<f64> = cfg.initial.iter().map(|&c| f64::from(c)).collect();
            integrate_deterministic(&spec, &params, &init, &times)?.states
        }
        HiddenSource::Stochastic => {
            let mut rng = substream(cfg.seed, "hidden", &[]);
            simulate_on_grid(&spec, &params, &cfg.init()?, 0.0, &times, &mut rng)?
                .to_real()
                .states
        }
    };
    let mut t = Table::new(compartment_header(cfg, &(0..spec.n_compartments()).collect::<Vec<_>>())?);
    for (time, s) in times.iter().zip(states) {
        let mut row = vec![*time];
        row.extend(s);
        t.push(row);
    }
    Ok(t)
}

/// Observations at the grid times, drawn from the hidden table.
pub fn observe(cfg: &ScenarioConfig, hidden: &Table) -> Result<Table> {
    let spec = cfg.spec()?;
    let model = cfg.observation_model()?;
    let expected = compartment_header(cfg, &(0..spec.n_compartments()).collect::<Vec<_>>())?;
    if hidden.header != expected {
        return Err(Error::InvalidArgument(format!(
            "hidden table header {:?} does not match {:?}",
            hidden.header, expected
        )));
    }
    let mut rng = substream(cfg.seed, "observe", &[]);
    let mut out = Table::new(compartment_header(cfg, model.observed_compartments())?);
    for time in cfg.grid.times() {
        let row = hidden
            .rows
            .iter()
            .find(|r| r[0] == time)
            .ok_or_else(|| Error::InvalidArgument(format!("hidden table has no row for t = {time}")))?;
        let mut obs = vec![time];
        obs.extend(model.simulate(&row[1..], &mut rng));
        out.push(obs);
    }
    Ok(out)
}

/// Observed table as a series, checked against the configured compartments.
pub fn observed_series(cfg: &ScenarioConfig, table: &Table) -> Result<ObservedSeries> {
    let model = cfg.observation_model()?;
    let expected = compartment_header(cfg, model.observed_compartments())?;
    if table.header != expected {
        return Err(Error::InvalidArgument(format!(
            "observed table header {:?} does not match {:?}",
            table.header, expected
        )));
    }
    ObservedSeries::new(
        table.rows.iter().map(|r| r[0]).collect(),
        table.rows.iter().map(|r| r[1..].to_vec()).collect(),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningFile {
    pub h: f64,
    pub sigma: Vec<Vec<f64>>,
    pub mode: ProposalMode,
    pub theta_start: Vec<f64>,
    #[serde(default)]
    pub pilot_trace: Vec<PilotBatch>,
    pub chains: Vec<ChainMeta>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbcFile {
    pub epsilon: f64,
    pub accepted: usize,
    pub attempts: u64,
    pub acceptance_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FitOutput {
    Pmmh { chains: Vec<Chain>, tuning: TuningFile },
    Abc(AbcResult),
}

/// Runs the configured sampler on an observed table.
pub fn fit(cfg: &ScenarioConfig, observed: &Table) -> Result<FitOutput> {
    let spec = cfg.spec()?;
    let series = observed_series(cfg, observed)?;
    let layout = cfg.layout()?;
    let prior = cfg.prior()?;
    let init = cfg.init()?;
    match &cfg.sampler {
        SamplerConfig::Abc(a) => {
            let obs_model = cfg.observation_model()?;
            let summary = observed_summary(&spec, obs_model.observed_compartments(), &series)?;
            let res = abc_rejection(
                &spec,
                &cfg.base_params(),
                &layout,
                &prior,
                &summary,
                &series.times,
                &init,
                &a.abc(),
                cfg.seed,
            )?;
            Ok(FitOutput::Abc(res))
        }
        SamplerConfig::Pmmh(p) => {
            let d = layout.dim();
            let target = PmmhTarget {
                spec,
                base: cfg.base_params(),
                obs_model: cfg.observation_model()?,
                observed: series,
                init,
                layout,
                n_particles: p.n_particles,
            };
            let (proposal, start, trace) = if let Some(pc) = &p.pilot {
                let r = pilot_tune(&target, &prior, &p.theta0, pc, derive_seed(cfg.seed, "pilot", &[]))?;
                log::info!("pilot: h = {:.4}, {} segments", r.h, r.trace.len());
                (r.proposal()?, r.theta_start, r.trace)
            } else if let Some(a) = p.adaptive {
                let h = p.h.unwrap_or_else(|| default_h(d));
                (Proposal::adaptive(h, d, a.t0, a.epsilon)?, p.theta0.clone(), Vec::new())
            } else {
                let h = p.h.unwrap_or_else(|| default_h(d));
                (Proposal::fixed(h, DMatrix::identity(d, d))?, p.theta0.clone(), Vec::new())
            };
            let chains = pmmh_chains(&target, &prior, &proposal, &start, p.n_steps, p.n_chains, cfg.seed)?;
            let tuning = TuningFile {
                h: proposal.h,
                sigma: matrix_rows(&proposal.sigma),
                mode: proposal.mode,
                theta_start: start,
                pilot_trace: trace,
                chains: chains.iter().map(|c| c.meta.clone()).collect(),
            };
            Ok(FitOutput::Pmmh { chains, tuning })
        }
    }
}

pub fn chain_table(chain: &Chain) -> Table {
    let mut header = vec!["step".to_owned()];
    header.extend(chain.names.iter().cloned());
    header.push("log_target".into());
    header.push("accepted".into());
    let mut t = Table::new(header);
    for (i, s) in chain.samples.iter().enumerate() {
        let mut row = vec![i as f64];
        row.extend(s);
        row.push(chain.log_target[i]);
        row.push(if chain.accepted[i] { 1.0 } else { 0.0 });
        t.push(row);
    }
    t
}

pub fn abc_table(res: &AbcResult) -> Table {
    let mut header = vec!["draw".to_owned()];
    header.extend(res.names.iter().cloned());
    header.push("distance".into());
    header.push("attempt".into());
    let mut t = Table::new(header);
    for (i, s) in res.samples.iter().enumerate() {
        let mut row = vec![i as f64];
        row.extend(s);
        row.push(res.distances[i]);
        row.push(res.accepted_attempts[i] as f64);
        t.push(row);
    }
    t
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Writes chain or posterior files plus tuning and meta records.
pub fn write_fit(dir: &Path, cfg: &ScenarioConfig, out: &FitOutput, wall_seconds: f64) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_FILE), cfg.to_json())?;
    let mut meta = serde_json::json!({
        "scenario": cfg.id,
        "seed": cfg.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
        "wall_seconds": wall_seconds,
    });
    match out {
        FitOutput::Pmmh { chains, tuning } => {
            for (k, c) in chains.iter().enumerate() {
                chain_table(c).write(&dir.join(chain_file(k)))?;
            }
            write_json(&dir.join(TUNING_FILE), tuning)?;
            meta["chain_seeds"] = chains.iter().map(|c| c.meta.seed).collect::<Vec<_>>().into();
        }
        FitOutput::Abc(res) => {
            abc_table(res).write(&dir.join(POSTERIOR_FILE))?;
            write_json(
                &dir.join(ABC_FILE),
                &AbcFile {
                    epsilon: cfg_abc_epsilon(cfg),
                    accepted: res.samples.len(),
                    attempts: res.attempts,
                    acceptance_rate: res.acceptance_rate(),
                },
            )?;
        }
    }
    write_json(&dir.join(META_FILE), &meta)
}

fn cfg_abc_epsilon(cfg: &ScenarioConfig) -> f64 {
    match &cfg.sampler {
        SamplerConfig::Abc(a) => a.epsilon,
        SamplerConfig::Pmmh(_) => f64::NAN,
    }
}

/// Fits and writes the run directory. A failed pilot leaves its trace in
/// `pilot_trace.json` before the error is returned.
pub fn fit_to_dir(cfg: &ScenarioConfig, observed: &Table, dir: &Path) -> Result<FitOutput> {
    fs::create_dir_all(dir)?;
    let t0 = Instant::now();
    match fit(cfg, observed) {
        Ok(out) => {
            write_fit(dir, cfg, &out, t0.elapsed().as_secs_f64())?;
            Ok(out)
        }
        Err(Error::TuningFailed {
            adjustments,
            last_rate,
            trace,
        }) => {
            write_json(&dir.join(PILOT_TRACE_FILE), &trace)?;
            Err(Error::TuningFailed {
                adjustments,
                last_rate,
                trace,
            })
        }
        Err(e) => Err(e),
    }
}

/// Chains of a PMMH run directory, with their metadata.
pub fn read_chains(dir: &Path) -> Result<Vec<Chain>> {
    let tuning: TuningFile = read_json(&dir.join(TUNING_FILE))?;
    let mut chains = Vec::new();
    for (k, meta) in tuning.chains.into_iter().enumerate() {
        let path = dir.join(chain_file(k));
        let t = Table::read(&path)?;
        let d = t.header.len().checked_sub(3).filter(|&d| d > 0).ok_or_else(|| Error::Parse {
            file: path.clone(),
            line: 1,
            msg: "expected step, parameters, log_target, accepted".into(),
        })?;
        chains.push(Chain {
            names: t.header[1..=d].to_vec(),
            samples: t.rows.iter().map(|r| r[1..=d].to_vec()).collect(),
            log_target: t.rows.iter().map(|r| r[d + 1]).collect(),
            accepted: t.rows.iter().map(|r| r[d + 2] != 0.0).collect(),
            meta,
        });
    }
    if chains.is_empty() {
        return Err(Error::EmptyChain);
    }
    Ok(chains)
}

fn read_abc(dir: &Path) -> Result<(AbcResult, AbcFile)> {
    let t = Table::read(&dir.join(POSTERIOR_FILE))?;
    let d = t.header.len() - 3;
    let info: AbcFile = read_json(&dir.join(ABC_FILE))?;
    let res = AbcResult {
        names: t.header[1..=d].to_vec(),
        samples: t.rows.iter().map(|r| r[1..=d].to_vec()).collect(),
        distances: t.rows.iter().map(|r| r[d + 1]).collect(),
        accepted_attempts: t.rows.iter().map(|r| r[d + 2] as u64).collect(),
        attempts: info.attempts,
    };
    Ok((res, info))
}

pub fn bands_table(b: &Bands) -> Table {
    let mut header = vec!["t".to_owned()];
    for c in &b.compartments {
        for q in ["q2.5", "q50", "q97.5"] {
            header.push(format!("{c}_{q}"));
        }
    }
    let mut t = Table::new(header);
    for (time, row) in b.times.iter().zip(&b.quantiles) {
        let mut r = vec![*time];
        r.extend(row.iter().flatten());
        t.push(r);
    }
    t
}

/// Summary and posterior-predictive bands of a run directory.
pub fn diagnose(dir: &Path) -> Result<(PosteriorSummary, Bands)> {
    let cfg = ScenarioConfig::load(&dir.join(CONFIG_FILE))?;
    let truth = cfg.truth();
    let (summary, pooled, band_draws) = match &cfg.sampler {
        SamplerConfig::Pmmh(p) => {
            let chains = read_chains(dir)?;
            let s = summarize(&chains, p.burn, p.thin, truth.as_deref())?;
            let pooled: Vec<Vec<f64>> = chains
                .iter()
                .map(|c| crate::diagnostics::burn_thin(&c.samples, p.burn, p.thin))
                .collect::<Result<Vec<_>>>()?
                .concat();
            (s, pooled, p.band_draws)
        }
        SamplerConfig::Abc(a) => {
            let (res, info) = read_abc(dir)?;
            let as_chain = Chain {
                names: res.names.clone(),
                samples: res.samples.clone(),
                log_target: vec![0.0; res.samples.len()],
                accepted: vec![true; res.samples.len()],
                meta: ChainMeta {
                    n_particles: 0,
                    seed: cfg.seed,
                    tuning: crate::inference::TuningRecord {
                        h: 0.0,
                        sigma: Vec::new(),
                        mode: ProposalMode::Fixed,
                        checkpoints: Vec::new(),
                    },
                    out_of_support: 0,
                },
            };
            let mut s = summarize(&[as_chain], 0, 1, truth.as_deref())?;
            s.acceptance_raw = info.acceptance_rate;
            s.acceptance_thinned = info.acceptance_rate;
            s.notices = vec![format!("ABC: {} accepted of {} attempts", info.accepted, info.attempts)];
            (s, res.samples, a.band_draws)
        }
    };
    let spec = cfg.spec()?;
    let bands = trajectory_bands(
        &spec,
        &cfg.base_params(),
        &cfg.layout()?,
        &pooled,
        &cfg.init()?,
        &cfg.grid.times(),
        band_draws,
        derive_seed(cfg.seed, "bands", &[]),
    )?;
    Ok((summary, bands))
}

pub fn diagnose_to_dir(dir: &Path) -> Result<PosteriorSummary> {
    let (summary, bands) = diagnose(dir)?;
    for n in &summary.notices {
        log::warn!("{n}");
    }
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    bands_table(&bands).write(&dir.join(BANDS_FILE))?;
    Ok(summary)
}

/// One full pipeline run (or one per sweep value) under `out`.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub sweep_value: Option<f64>,
    pub summary: PosteriorSummary,
}

fn run_single(cfg: &ScenarioConfig, dir: &Path) -> Result<PosteriorSummary> {
    fs::create_dir_all(dir)?;
    let hidden = simulate(cfg)?;
    hidden.write(&dir.join(HIDDEN_FILE))?;
    let observed = observe(cfg, &hidden)?;
    observed.write(&dir.join(OBSERVED_FILE))?;
    fit_to_dir(cfg, &observed, dir)?;
    diagnose_to_dir(dir)
}

fn sweep_label(field: SweepField, v: f64) -> String {
    let f = match field {
        SweepField::NRatio => "n_ratio",
        SweepField::PObs => "p_obs",
        SweepField::GridLast => "grid_last",
    };
    format!("{f}={v}")
}

/// simulate → observe → fit → diagnose, writing every file under `out`.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path) -> Result<Vec<RunReport>> {
    cfg.validate()?;
    let Some(sweep) = &cfg.sweep else {
        return Ok(vec![RunReport {
            dir: out.to_path_buf(),
            sweep_value: None,
            summary: run_single(cfg, out)?,
        }]);
    };
    let mut reports = Vec::new();
    for &v in &sweep.values {
        let sub = cfg.with_sweep_value(sweep.field, v)?;
        let dir = out.join(sweep_label(sweep.field, v));
        log::info!("sweep {}", sweep_label(sweep.field, v));
        reports.push(RunReport {
            dir: dir.clone(),
            sweep_value: Some(v),
            summary: run_single(&sub, &dir)?,
        });
    }
    fs::create_dir_all(out)?;
    fs::write(out.join(CONFIG_FILE), cfg.to_json())?;
    sweep_table(&reports).write(&out.join(SWEEP_FILE))?;
    Ok(reports)
}

/// `value`, then mean / HPD bounds / HPD width / PMSE for each parameter.
pub fn sweep_table(reports: &[RunReport]) -> Table {
    let names: Vec<String> = reports
        .first()
        .map(|r| r.summary.params.iter().map(|p| p.name.clone()).collect())
        .unwrap_or_default();
    let mut header = vec!["value".to_owned()];
    for n in &names {
        for s in ["mean", "hpd_low", "hpd_high", "hpd_width", "pmse"] {
            header.push(format!("{n}_{s}"));
        }
    }
    let mut t = Table::new(header);
    for r in reports {
        let mut row = vec![r.sweep_value.unwrap_or(f64::NAN)];
        for p in &r.summary.params {
            row.extend([p.mean, p.hpd_low, p.hpd_high, p.hpd_high - p.hpd_low, p.pmse.unwrap_or(f64::NAN)]);
        }
        t.push(row);
    }
    t
}

/// Checked-in scenario fixtures, by id.
pub const SCENARIOS: &[(&str, &str)] = &[
    ("abc-noisy", include_str!("../../scenarios/abc-noisy.json")),
    ("pmmh-noisy", include_str!("../../scenarios/pmmh-noisy.json")),
    ("under-known", include_str!("../../scenarios/under-known.json")),
    ("under-unknown", include_str!("../../scenarios/under-unknown.json")),
    ("seir", include_str!("../../scenarios/seir.json")),
    ("sweep-noise", include_str!("../../scenarios/sweep-noise.json")),
    ("sweep-pobs", include_str!("../../scenarios/sweep-pobs.json")),
    ("sweep-truncation", include_str!("../../scenarios/sweep-truncation.json")),
];

pub fn scenario(id: &str) -> Result<ScenarioConfig> {
    let (_, text) = SCENARIOS.iter().find(|(k, _)| *k == id).ok_or_else(|| {
        let known: Vec<&str> = SCENARIOS.iter().map(|(k, _)| *k).collect();
        Error::InvalidArgument(format!("unknown scenario `{id}`; known: {}", known.join(", ")))
    })?;
    ScenarioConfig::from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_parse_and_ids_match() {
        for (id, _) in SCENARIOS {
            let c = scenario(id).unwrap();
            assert_eq!(c.id, *id);
        }
        assert!(scenario("nope").is_err());
    }

    fn small() -> ScenarioConfig {
        let mut c = scenario("under-known").unwrap();
        c.population = 200;
        c.initial = vec![190, 10, 0];
        c.grid.last = 6;
        if let SamplerConfig::Pmmh(p) = &mut c.sampler {
            p.n_steps = 40;
            p.n_chains = 2;
            p.n_particles = 20;
            p.burn = 10;
            p.thin = 1;
            p.pilot = None;
            p.h = Some(0.01);
            p.band_draws = 100;
        }
        c.validate().unwrap();
        c
    }

    #[test]
    fn simulate_conserves_population() {
        let c = scenario("seir").unwrap();
        let t = simulate(&c).unwrap();
        assert_eq!(t.header, vec!["t", "S", "E", "I", "R"]);
        for r in &t.rows {
            assert!((r[1..].iter().sum::<f64>() - 4820.0).abs() < 1e-6);
        }
        assert_eq!(t.rows[0][1..], [4800.0, 0.0, 20.0, 0.0]);
    }

    #[test]
    fn identity_thinning_reproduces_hidden_counts() {
        let mut c = small();
        c.obs = crate::observation::ObservationKind::BinomialThinning { p_obs: 1.0 };
        c.hidden = HiddenSource::Stochastic;
        let h = simulate(&c).unwrap();
        let o = observe(&c, &h).unwrap();
        for r in &o.rows {
            let hr = h.rows.iter().find(|x| x[0] == r[0]).unwrap();
            assert_eq!(r[1..], hr[1..]);
        }
    }

    #[test]
    fn pipeline_round_trip_in_temp_dir() {
        let c = small();
        let dir = tempfile::tempdir().unwrap();
        let reports = run_scenario(&c, dir.path()).unwrap();
        let s = &reports[0].summary;
        assert_eq!(s.schema, 1);
        assert!(s.params.iter().all(|p| p.pmse.is_some() && p.rhat.is_some()));
        let chains = read_chains(dir.path()).unwrap();
        assert_eq!(chains.len(), 2);
        assert_eq!(chains[0].len(), 41);
        assert_ne!(chains[0].meta.seed, chains[1].meta.seed);
        // re-serialize what was read: byte-identical
        let bytes = fs::read(dir.path().join(chain_file(0))).unwrap();
        assert_eq!(chain_table(&chains[0]).to_bytes(), bytes);
        let bands = Table::read(&dir.path().join(BANDS_FILE)).unwrap();
        assert_eq!(bands.rows.len(), c.grid.times().len());
        let hidden = fs::read(dir.path().join(HIDDEN_FILE)).unwrap();
        assert_eq!(Table::parse(&hidden, Path::new("h")).unwrap().to_bytes(), hidden);
    }
}
