//! Particle-marginal Metropolis-Hastings.
//!
//! The log target of a state is `ln v(θ) + ln Ẑ(θ)`. The estimate for the
//! current state is carried forward until a proposal is accepted, never
//! recomputed. Proposals outside the prior support are rejected without
//! running the filter.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prior::Prior;
use super::proposal::{propose, Proposal, ProposalMode, RunningCovariance};
use super::target::PmmhTarget;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, substream};

/// `min(1, exp(new - old + correction))` over the extended reals.
///
/// A `-inf` proposal is never accepted. A finite proposal from a `-inf`
/// state is always accepted. Two `-inf` targets give 0 and are logged.
pub fn mh_acceptance(log_target_new: f64, log_target_old: f64, log_hastings_correction: f64) -> f64 {
    if log_target_new == f64::NEG_INFINITY || log_target_new.is_nan() {
        if log_target_old == f64::NEG_INFINITY {
            log::warn!("MH step with -inf target on both sides; staying put");
        }
        return 0.0;
    }
    if log_target_old == f64::NEG_INFINITY {
        return 1.0;
    }
    let r = log_target_new - log_target_old + log_hastings_correction;
    if r.is_nan() {
        0.0
    } else if r >= 0.0 {
        1.0
    } else {
        r.exp()
    }
}

/// Proposal covariance snapshot for one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaCheckpoint {
    pub step: usize,
    pub sigma: Vec<Vec<f64>>,
}

/// How proposals were generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningRecord {
    pub h: f64,
    pub sigma: Vec<Vec<f64>>,
    pub mode: ProposalMode,
    /// Adaptive mode only: `Σ_t` (without `h`) at selected steps.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<SigmaCheckpoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub n_particles: usize,
    pub seed: u64,
    pub tuning: TuningRecord,
    /// Proposals rejected for leaving the prior support.
    pub out_of_support: usize,
}

/// Posterior draws. `samples[0]` is the starting point; `samples[t]` is the
/// state after step `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub names: Vec<String>,
    pub samples: Vec<Vec<f64>>,
    pub log_target: Vec<f64>,
    /// `accepted[0]` is `true` by convention (the starting point).
    pub accepted: Vec<bool>,
    pub meta: ChainMeta,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[j]).collect()
    }

    /// Fraction of accepted transitions (excludes the starting point).
    pub fn acceptance_rate(&self) -> f64 {
        if self.accepted.len() < 2 {
            return 0.0;
        }
        let n = self.accepted.len() - 1;
        self.accepted[1..].iter().filter(|&&a| a).count() as f64 / n as f64
    }

    /// Fraction of consecutive retained samples that differ; the
    /// after-thinning acceptance rate.
    pub fn move_rate(&self) -> f64 {
        if self.samples.len() < 2 {
            return 0.0;
        }
        let moved = self.samples.windows(2).filter(|w| w[0] != w[1]).count();
        moved as f64 / (self.samples.len() - 1) as f64
    }

    pub fn last(&self) -> &[f64] {
        self.samples.last().expect("non-empty chain")
    }
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// How often adaptive runs snapshot `Σ_t`.
pub const CHECKPOINT_EVERY: usize = 100;

/// State carried between segments of the same chain.
#[derive(Clone, Debug)]
pub(crate) struct Anchor {
    pub theta: Vec<f64>,
    pub log_prior: f64,
    pub log_likelihood: f64,
}

pub(crate) fn anchor(target: &PmmhTarget, prior: &Prior, theta0: &[f64], seed: u64) -> Result<Anchor> {
    if theta0.len() != target.layout.dim() || prior.dim() != target.layout.dim() {
        return Err(Error::InvalidArgument(format!(
            "θ0 has {} components, layout {}, prior {}",
            theta0.len(),
            target.layout.dim(),
            prior.dim()
        )));
    }
    let log_prior = prior.log_density(theta0);
    if log_prior == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument(format!("θ0 = {theta0:?} is outside the prior support")));
    }
    let log_likelihood = target.log_likelihood(theta0, derive_seed(seed, "filter", &[0]))?;
    if log_likelihood == f64::NEG_INFINITY {
        return Err(Error::InitialLikelihoodFailed(theta0.to_vec()));
    }
    Ok(Anchor {
        theta: theta0.to_vec(),
        log_prior,
        log_likelihood,
    })
}

pub(crate) fn run_from(
    target: &PmmhTarget,
    prior: &Prior,
    proposal: &Proposal,
    start: Anchor,
    n_steps: usize,
    seed: u64,
) -> Result<Chain> {
    proposal.validate()?;
    let d = target.layout.dim();
    if proposal.dim() != d {
        return Err(Error::InvalidArgument(format!(
            "proposal is {}-dimensional, θ has {d} components",
            proposal.dim()
        )));
    }
    let mut samples = Vec::with_capacity(n_steps + 1);
    let mut log_target = Vec::with_capacity(n_steps + 1);
    let mut accepted = Vec::with_capacity(n_steps + 1);
    let mut checkpoints = Vec::new();
    let mut out_of_support = 0;

    let mut current = start.theta;
    let mut current_lt = start.log_prior + start.log_likelihood;
    samples.push(current.clone());
    log_target.push(current_lt);
    accepted.push(true);

    let mut history = RunningCovariance::new(d);
    history.push(&current);
    let identity = DMatrix::identity(d, d);

    for t in 1..=n_steps {
        let sigma_t = match proposal.mode {
            ProposalMode::Fixed => None,
            ProposalMode::Adaptive { t0, epsilon } => {
                let s = if t <= t0 {
                    identity.clone()
                } else {
                    history.covariance() + &identity * epsilon
                };
                if t % CHECKPOINT_EVERY == 0 || t == t0 + 1 || t == n_steps {
                    checkpoints.push(SigmaCheckpoint {
                        step: t,
                        sigma: matrix_rows(&s),
                    });
                }
                Some(s)
            }
        };
        let sigma = sigma_t.as_ref().unwrap_or(&proposal.sigma);
        let mut rng = substream(seed, "mh", &[t as u64]);
        let candidate = propose(&current, proposal.h, sigma, &mut rng)?;

        let lp = prior.log_density(&candidate);
        let mut accept = false;
        if lp == f64::NEG_INFINITY {
            out_of_support += 1;
        } else {
            let ll = target.log_likelihood(&candidate, derive_seed(seed, "filter", &[t as u64]))?;
            let lt = lp + ll;
            let p = mh_acceptance(lt, current_lt, 0.0);
            if rng.random::<f64>() < p {
                accept = true;
                current = candidate;
                current_lt = lt;
            }
        }
        samples.push(current.clone());
        log_target.push(current_lt);
        accepted.push(accept);
        history.push(&current);
    }

    Ok(Chain {
        names: target.layout.labels(),
        samples,
        log_target,
        accepted,
        meta: ChainMeta {
            n_particles: target.n_particles,
            seed,
            tuning: TuningRecord {
                h: proposal.h,
                sigma: matrix_rows(&proposal.sigma),
                mode: proposal.mode,
                checkpoints,
            },
            out_of_support,
        },
    })
}

/// One PMMH chain of `n_steps` transitions from `theta0`.
pub fn pmmh_run(
    target: &PmmhTarget,
    prior: &Prior,
    proposal: &Proposal,
    theta0: &[f64],
    n_steps: usize,
    seed: u64,
) -> Result<Chain> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    let start = anchor(target, prior, theta0, seed)?;
    run_from(target, prior, proposal, start, n_steps, seed)
}

/// Independent chains from the same start, seeded from `master_seed`,
/// run concurrently. Output order is chain index order.
pub fn pmmh_chains(
    target: &PmmhTarget,
    prior: &Prior,
    proposal: &Proposal,
    theta0: &[f64],
    n_steps: usize,
    n_chains: usize,
    master_seed: u64,
) -> Result<Vec<Chain>> {
    (0..n_chains)
        .into_par_iter()
        .map(|k| {
            let seed = derive_seed(master_seed, "chain", &[k as u64]);
            pmmh_run(target, prior, proposal, theta0, n_steps, seed)
        })
        .collect()
}
