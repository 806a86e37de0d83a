//! Bootstrap particle filter over the hidden epidemic chain.
//!
//! The hidden chain starts from a point mass at the known initial state at
//! `t = 0`; observations live at the series times (normally `1..=n`). For
//! each observation the particles are propagated over the gap with the
//! exact jump-process kernel, weighted by the emission density, folded into
//! the running `log Z` with log-sum-exp, and resampled multinomially.
//!
//! Every particle draws from its own substream keyed by
//! `(seed, step, particle)` and every reduction runs in particle order, so
//! the result does not depend on the rayon thread count.

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gillespie::Kernel;
use crate::model::{ModelSpec, Params, StateVector, Trajectory, TrajectoryKind};
use crate::observation::{ObservationModel, ObservedSeries};
use crate::rng::{substream, SimRng};

/// `ln(sum(exp(xs)))`, `-inf` for an empty slice or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Full output of one filter run.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSystem {
    /// Row 0 is the time-zero point mass; row `k` holds the propagated
    /// particles at `times[k]`.
    pub particles: Vec<Vec<StateVector>>,
    pub times: Vec<f64>,
    /// Normalized log weights, one row per observation (row `k` weights
    /// `particles[k + 1]`).
    pub log_weights: Vec<Vec<f64>>,
    /// `ancestry[k][i]` is the index into `particles[k]` of the parent of
    /// slot `i` in the next generation. Row 0 is the identity; the last row
    /// is the resampling after the final observation.
    pub ancestry: Vec<Vec<usize>>,
    pub log_z: f64,
    /// Per-step `log Z` increments, `logsumexp(raw) - ln N`.
    pub log_z_increments: Vec<f64>,
    pub failed: bool,
}

impl ParticleSystem {
    pub fn n_particles(&self) -> usize {
        self.particles.first().map_or(0, Vec::len)
    }
}

struct History {
    particles: Vec<Vec<StateVector>>,
    log_weights: Vec<Vec<f64>>,
    ancestry: Vec<Vec<usize>>,
}

struct FilterOutput {
    log_z: f64,
    increments: Vec<f64>,
    failed: bool,
    history: Option<History>,
}

/// Minimum number of particles handed to one rayon task.
const PAR_CHUNK: usize = 8;

#[allow(clippy::too_many_arguments)]
fn run(
    spec: &ModelSpec,
    params: &Params,
    obs_model: &ObservationModel,
    observed: &ObservedSeries,
    init: &StateVector,
    n_particles: usize,
    seed: u64,
    record: bool,
) -> Result<FilterOutput> {
    if n_particles == 0 {
        return Err(Error::InvalidArgument("particle count must be at least 1".into()));
    }
    spec.check_state(init)?;
    if let Some(&t) = observed.times.first() {
        if !(t > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "observation times must be after the initial time 0, got {t}"
            )));
        }
    }
    if let Some(v) = observed.values.iter().find(|v| v.len() != obs_model.observed_compartments().len()) {
        return Err(Error::InvalidArgument(format!(
            "observation has {} entries, model observes {} compartments",
            v.len(),
            obs_model.observed_compartments().len()
        )));
    }
    let kernel = Kernel::new(spec, params)?;
    let ln_n = (n_particles as f64).ln();

    let mut current: Vec<StateVector> = vec![*init; n_particles];
    let mut parents: Vec<usize> = (0..n_particles).collect();
    let mut raw = vec![0.0; n_particles];
    let mut log_z = 0.0;
    let mut increments = Vec::with_capacity(observed.len());
    let mut history = record.then(|| History {
        particles: vec![current.clone()],
        log_weights: Vec::with_capacity(observed.len()),
        ancestry: vec![parents.clone()],
    });

    let mut t_prev = 0.0;
    for (k, (&t, y)) in observed.times.iter().zip(&observed.values).enumerate() {
        let step = k as u64;
        let prev = &current;
        let next: Vec<StateVector> = parents
            .par_iter()
            .with_min_len(PAR_CHUNK)
            .enumerate()
            .map(|(i, &a)| {
                let mut s = prev[a];
                let mut rng = substream(seed, "propagate", &[step, i as u64]);
                kernel.advance(&mut s, t_prev, t, &mut rng);
                s
            })
            .collect();
        current = next;
        t_prev = t;

        for (w, s) in raw.iter_mut().zip(&current) {
            *w = obs_model.log_density(s, y);
        }
        let lse = log_sum_exp(&raw);
        if let Some(h) = history.as_mut() {
            h.particles.push(current.clone());
        }
        if !lse.is_finite() {
            log::debug!("particle filter failed at observation {k} (t = {t})");
            return Ok(FilterOutput {
                log_z: f64::NEG_INFINITY,
                increments,
                failed: true,
                history,
            });
        }
        let inc = lse - ln_n;
        increments.push(inc);
        log_z += inc;

        let weights: Vec<f64> = raw.iter().map(|w| (w - lse).exp()).collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::InvalidArgument(format!("resampling weights: {e}")))?;
        let mut rng: SimRng = substream(seed, "resample", &[step]);
        parents = (0..n_particles).map(|_| dist.sample(&mut rng)).collect();

        if let Some(h) = history.as_mut() {
            h.log_weights.push(raw.iter().map(|w| w - lse).collect());
            h.ancestry.push(parents.clone());
        }
    }

    Ok(FilterOutput {
        log_z,
        increments,
        failed: false,
        history,
    })
}

/// Runs the filter and keeps every generation, weight and ancestor.
pub fn particle_filter(
    spec: &ModelSpec,
    params: &Params,
    obs_model: &ObservationModel,
    observed: &ObservedSeries,
    init: &StateVector,
    n_particles: usize,
    seed: u64,
) -> Result<ParticleSystem> {
    let out = run(spec, params, obs_model, observed, init, n_particles, seed, true)?;
    let h = out.history.expect("history recorded");
    let mut times = vec![0.0];
    times.extend_from_slice(&observed.times[..h.particles.len() - 1]);
    Ok(ParticleSystem {
        particles: h.particles,
        times,
        log_weights: h.log_weights,
        ancestry: h.ancestry,
        log_z: out.log_z,
        log_z_increments: out.increments,
        failed: out.failed,
    })
}

/// `log Z` only, without storing the particle history. Consumes the same
/// streams as [`particle_filter`] and returns the same value.
pub fn log_likelihood(
    spec: &ModelSpec,
    params: &Params,
    obs_model: &ObservationModel,
    observed: &ObservedSeries,
    init: &StateVector,
    n_particles: usize,
    seed: u64,
) -> Result<f64> {
    Ok(run(spec, params, obs_model, observed, init, n_particles, seed, false)?.log_z)
}

/// Traces one ancestral line back from a uniformly chosen final slot.
pub fn sample_path<R: Rng + ?Sized>(system: &ParticleSystem, rng: &mut R) -> Result<Trajectory> {
    if system.failed || system.particles.is_empty() {
        return Err(Error::NoPath);
    }
    let n_gen = system.particles.len();
    let n = system.n_particles();
    let mut slot = rng.random_range(0..n);
    let mut states = vec![system.particles[0][0]; n_gen];
    for k in (0..n_gen).rev() {
        let idx = system.ancestry[k][slot];
        states[k] = system.particles[k][idx];
        slot = idx;
    }
    Ok(Trajectory {
        times: system.times.clone(),
        states,
        kind: TrajectoryKind::GridSampled,
    })
}
