//! Two-stage pilot tuning of the random-walk proposal.
//!
//! Stage 1 runs with `Σ = I`, halving or doubling `h` after every batch
//! whose acceptance falls outside the target band. Stage 2 replaces `Σ` by
//! the sample covariance of the second half of stage 1, resets `h` to
//! `2.38²/d`, and keeps adjusting block by block until one whole block
//! lands inside the band. Pilot draws are never part of the posterior.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::pmmh::{anchor, run_from, Anchor, Chain};
use super::prior::Prior;
use super::proposal::{default_h, sample_covariance, Proposal};
use super::target::PmmhTarget;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PilotConfig {
    /// Length of stage 1.
    pub stage_steps: usize,
    /// Stage-1 adjustment interval.
    pub batch_len: usize,
    /// Stage-2 confirmation block.
    pub confirm_steps: usize,
    pub target_rate: (f64, f64),
    pub max_adjustments: usize,
}

impl Default for PilotConfig {
    fn default() -> Self {
        Self {
            stage_steps: 1000,
            batch_len: 100,
            confirm_steps: 500,
            target_rate: (0.10, 0.25),
            max_adjustments: 20,
        }
    }
}

/// One tuning segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PilotBatch {
    pub stage: u8,
    pub h: f64,
    pub steps: usize,
    pub acceptance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PilotResult {
    pub h: f64,
    pub sigma: DMatrix<f64>,
    pub theta_start: Vec<f64>,
    pub trace: Vec<PilotBatch>,
}

impl PilotResult {
    pub fn proposal(&self) -> Result<Proposal> {
        Proposal::fixed(self.h, self.sigma.clone())
    }
}

struct Tuner<'a> {
    target: &'a PmmhTarget,
    prior: &'a Prior,
    cfg: &'a PilotConfig,
    seed: u64,
    segment: u64,
    adjustments: usize,
    trace: Vec<PilotBatch>,
}

impl Tuner<'_> {
    fn segment(&mut self, stage: u8, h: f64, sigma: &DMatrix<f64>, start: Anchor, steps: usize) -> Result<(Chain, Anchor)> {
        let proposal = Proposal::fixed(h, sigma.clone())?;
        let seed = derive_seed(self.seed, "pilot", &[self.segment]);
        self.segment += 1;
        let chain = run_from(self.target, self.prior, &proposal, start, steps, seed)?;
        let rate = chain.acceptance_rate();
        self.trace.push(PilotBatch {
            stage,
            h,
            steps,
            acceptance: rate,
        });
        log::debug!("pilot stage {stage}: h = {h:.4e}, acceptance {rate:.3} over {steps} steps");
        let last = chain.last().to_vec();
        let lt = *chain.log_target.last().unwrap();
        let lp = self.prior.log_density(&last);
        Ok((
            chain,
            Anchor {
                theta: last,
                log_prior: lp,
                log_likelihood: lt - lp,
            },
        ))
    }

    /// Returns the adjusted `h`, or `None` when the rate is on target.
    fn adjust(&mut self, h: f64, rate: f64) -> Result<Option<f64>> {
        let (lo, hi) = self.cfg.target_rate;
        let next = if rate < lo {
            h / 2.0
        } else if rate > hi {
            h * 2.0
        } else {
            return Ok(None);
        };
        self.adjustments += 1;
        if self.adjustments > self.cfg.max_adjustments {
            return Err(Error::TuningFailed {
                adjustments: self.adjustments - 1,
                last_rate: rate,
                trace: std::mem::take(&mut self.trace),
            });
        }
        Ok(Some(next))
    }
}

/// Tunes `(h, Σ)` from `theta0` and returns them with the final pilot state.
pub fn pilot_tune(target: &PmmhTarget, prior: &Prior, theta0: &[f64], cfg: &PilotConfig, seed: u64) -> Result<PilotResult> {
    let (lo, hi) = cfg.target_rate;
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(Error::InvalidArgument(format!("bad target rate interval ({lo}, {hi})")));
    }
    if cfg.batch_len == 0 || cfg.stage_steps < cfg.batch_len || cfg.confirm_steps == 0 {
        return Err(Error::InvalidArgument("pilot lengths must be positive and stage_steps >= batch_len".into()));
    }
    let d = target.layout.dim();
    let h0 = default_h(d);
    let mut tuner = Tuner {
        target,
        prior,
        cfg,
        seed,
        segment: 0,
        adjustments: 0,
        trace: Vec::new(),
    };
    let mut state = anchor(target, prior, theta0, derive_seed(seed, "pilot-anchor", &[]))?;

    // Stage 1: identity covariance.
    let identity = DMatrix::identity(d, d);
    let mut h = h0;
    let mut stage1: Vec<Vec<f64>> = Vec::with_capacity(cfg.stage_steps);
    for _ in 0..cfg.stage_steps / cfg.batch_len {
        let (chain, next) = tuner.segment(1, h, &identity, state, cfg.batch_len)?;
        stage1.extend(chain.samples[1..].iter().cloned());
        state = next;
        if let Some(new_h) = tuner.adjust(h, chain.acceptance_rate())? {
            h = new_h;
        }
    }

    let warm = &stage1[stage1.len() / 2..];
    let mut sigma = sample_covariance(warm);
    if sigma.trace() <= 0.0 {
        // the chain never moved in the second half; keep the stage-1 scale
        log::warn!("stage-1 pilot samples are constant; falling back to a scaled identity");
        sigma = &identity * (h / h0);
    }
    sigma = (&sigma + sigma.transpose()) * 0.5;

    // Stage 2: estimated covariance, confirm block by block.
    let mut h = h0;
    loop {
        let (chain, next) = tuner.segment(2, h, &sigma, state, cfg.confirm_steps)?;
        state = next;
        match tuner.adjust(h, chain.acceptance_rate())? {
            None => break,
            Some(new_h) => h = new_h,
        }
    }

    Ok(PilotResult {
        h,
        sigma,
        theta_start: state.theta,
        trace: tuner.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::target::ParamLayout;
    use crate::model::{sir_spec, Params};
    use crate::observation::{ObservationKind, ObservationModel, ObservedSeries};

    #[test]
    fn flat_target_escalates_until_failure() {
        // No observed compartments: the likelihood is identically 1.
        let spec = sir_spec(10).unwrap();
        let target = PmmhTarget {
            init: spec.state(&[9, 1, 0]).unwrap(),
            base: Params::sir(1.0, 1.0).unwrap(),
            obs_model: ObservationModel::new(
                ObservationKind::GaussianNoise { n_ratio: 0.1, variance_floor: 0.25 },
                vec![],
            )
            .unwrap(),
            observed: ObservedSeries::new(vec![1.0, 2.0], vec![vec![], vec![]]).unwrap(),
            layout: ParamLayout::for_model(&spec, false),
            n_particles: 1,
            spec,
        };
        let cfg = PilotConfig::default();
        match pilot_tune(&target, &Prior::flat_positive(2), &[1.0, 1.0], &cfg, 1) {
            Err(Error::TuningFailed { adjustments, trace, last_rate }) => {
                assert_eq!(adjustments, 20);
                assert!(last_rate > 0.25);
                assert!(trace.windows(2).all(|w| w[1].h >= w[0].h || w[1].stage > w[0].stage));
            }
            other => panic!("expected tuning failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_config() {
        let spec = sir_spec(10).unwrap();
        let target = PmmhTarget {
            init: spec.state(&[9, 1, 0]).unwrap(),
            base: Params::sir(1.0, 1.0).unwrap(),
            obs_model: ObservationModel::binomial(0.5, 3).unwrap(),
            observed: ObservedSeries::new(vec![1.0], vec![vec![4.0, 0.0, 0.0]]).unwrap(),
            layout: ParamLayout::for_model(&spec, false),
            n_particles: 1,
            spec,
        };
        let cfg = PilotConfig { target_rate: (0.3, 0.2), ..PilotConfig::default() };
        assert!(pilot_tune(&target, &Prior::flat_positive(2), &[1.0, 1.0], &cfg, 1).is_err());
    }
}
