//! ABC rejection sampling.
//!
//! Each attempt draws θ from the prior, simulates one exact path on the
//! observation grid and accepts θ when the mean absolute difference between
//! the simulated and observed infected/removed counts is at most ε.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prior::Prior;
use super::target::ParamLayout;
use crate::error::{Error, Result};
use crate::gillespie::simulate_on_grid;
use crate::model::{ModelSpec, Params, StateVector};
use crate::observation::ObservedSeries;
use crate::rng::substream;

pub const DEFAULT_MAX_ATTEMPTS: u64 = 10_000_000;

/// Attempts simulated concurrently before accepted draws are collected.
const BATCH: u64 = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbcConfig {
    pub epsilon: f64,
    pub n_accept: usize,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u64,
}

fn default_max_attempts() -> u64 {
    DEFAULT_MAX_ATTEMPTS
}

impl AbcConfig {
    pub fn new(epsilon: f64, n_accept: usize) -> Self {
        Self {
            epsilon,
            n_accept,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if self.n_accept == 0 || self.max_attempts == 0 {
            return Err(Error::InvalidArgument("n_accept and max_attempts must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbcResult {
    pub names: Vec<String>,
    pub samples: Vec<Vec<f64>>,
    pub distances: Vec<f64>,
    /// Attempt index of each accepted sample.
    pub accepted_attempts: Vec<u64>,
    /// Attempts used, up to and including the last acceptance.
    pub attempts: u64,
}

impl AbcResult {
    pub fn acceptance_rate(&self) -> f64 {
        self.samples.len() as f64 / self.attempts as f64
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[j]).collect()
    }
}

/// Indices of the infected and removed compartments.
pub fn summary_compartments(spec: &ModelSpec) -> [usize; 2] {
    let n = spec.n_compartments();
    [n - 2, n - 1]
}

/// `(I, R)` at each time of a hidden path.
pub fn path_summary(spec: &ModelSpec, states: &[StateVector]) -> Vec<[f64; 2]> {
    let [i, r] = summary_compartments(spec);
    states.iter().map(|s| [s.get(i) as f64, s.get(r) as f64]).collect()
}

/// `(I, R)` at each time of an observed series whose columns are the
/// compartments listed in `observed`.
pub fn observed_summary(spec: &ModelSpec, observed: &[usize], series: &ObservedSeries) -> Result<Vec<[f64; 2]>> {
    let [i, r] = summary_compartments(spec);
    let col = |c: usize| {
        observed
            .iter()
            .position(|&o| o == c)
            .ok_or_else(|| Error::InvalidArgument(format!("compartment {} is not observed", spec.compartments()[c])))
    };
    let (ci, cr) = (col(i)?, col(r)?);
    Ok(series.values.iter().map(|v| [v[ci], v[cr]]).collect())
}

/// Mean absolute difference over all times and both summary columns.
pub fn mean_abs_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let total: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x[0] - y[0]).abs() + (x[1] - y[1]).abs())
        .sum();
    total / (2 * a.len()) as f64
}

/// Runs attempt `index`: returns θ and its distance.
fn attempt(
    spec: &ModelSpec,
    base: &Params,
    layout: &ParamLayout,
    prior: &Prior,
    target: &[[f64; 2]],
    times: &[f64],
    init: &StateVector,
    seed: u64,
    index: u64,
) -> Result<(Vec<f64>, f64)> {
    let mut rng = substream(seed, "abc", &[index]);
    let theta = prior.sample(&mut rng)?;
    let params = layout.apply(&theta, base)?;
    let path = simulate_on_grid(spec, &params, init, 0.0, times, &mut rng)?;
    let d = mean_abs_distance(&path_summary(spec, &path.states), target);
    Ok((theta, d))
}

/// ABC rejection with attempt `i` driven by `substream(seed, "abc", [i])`.
///
/// Results do not depend on the number of threads. Fails with
/// `EpsilonTooSmall` if `n_accept` draws are not collected within
/// `max_attempts`.
#[allow(clippy::too_many_arguments)]
pub fn abc_rejection(
    spec: &ModelSpec,
    base: &Params,
    layout: &ParamLayout,
    prior: &Prior,
    observed: &[[f64; 2]],
    times: &[f64],
    init: &StateVector,
    config: &AbcConfig,
    seed: u64,
) -> Result<AbcResult> {
    config.validate()?;
    if prior.dim() != layout.dim() {
        return Err(Error::InvalidArgument("prior and layout dimensions differ".into()));
    }
    if observed.len() != times.len() {
        return Err(Error::InvalidArgument("one summary row per observation time is required".into()));
    }
    let mut out = AbcResult {
        names: layout.labels(),
        samples: Vec::with_capacity(config.n_accept),
        distances: Vec::with_capacity(config.n_accept),
        accepted_attempts: Vec::with_capacity(config.n_accept),
        attempts: 0,
    };
    let mut next = 0u64;
    while next < config.max_attempts {
        let end = (next + BATCH).min(config.max_attempts);
        let batch: Vec<(Vec<f64>, f64)> = (next..end)
            .into_par_iter()
            .map(|i| attempt(spec, base, layout, prior, observed, times, init, seed, i))
            .collect::<Result<_>>()?;
        for (i, (theta, d)) in (next..end).zip(batch) {
            if d <= config.epsilon {
                out.samples.push(theta);
                out.distances.push(d);
                out.accepted_attempts.push(i);
                if out.samples.len() == config.n_accept {
                    out.attempts = i + 1;
                    return Ok(out);
                }
            }
        }
        next = end;
    }
    Err(Error::EpsilonTooSmall {
        accepted: out.samples.len(),
        attempts: config.max_attempts,
    })
}
