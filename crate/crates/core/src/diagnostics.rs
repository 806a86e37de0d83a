//! Chain post-processing: burn-in and thinning, Gelman-Rubin, effective
//! sample size, HPD intervals, posterior summaries and predictive bands.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gillespie::simulate_on_grid;
use crate::inference::{Chain, ParamLayout};
use crate::model::{ModelSpec, Params, StateVector};
use crate::rng::substream;

/// Samples kept from `samples` after dropping `burn` and keeping every
/// `thin`-th: indices `burn, burn + thin, ...`.
pub fn burn_thin<T: Clone>(samples: &[T], burn: usize, thin: usize) -> Result<Vec<T>> {
    if thin == 0 {
        return Err(Error::InvalidArgument("thin must be >= 1".into()));
    }
    if burn >= samples.len() {
        return Err(Error::EmptyChain);
    }
    Ok(samples[burn..].iter().step_by(thin).cloned().collect())
}

/// A chain with its samples, targets and flags burned and thinned together.
pub fn burn_thin_chain(chain: &Chain, burn: usize, thin: usize) -> Result<Chain> {
    Ok(Chain {
        names: chain.names.clone(),
        samples: burn_thin(&chain.samples, burn, thin)?,
        log_target: burn_thin(&chain.log_target, burn, thin)?,
        accepted: burn_thin(&chain.accepted, burn, thin)?,
        meta: chain.meta.clone(),
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Classic potential scale reduction factor over equal-length chains.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::InvalidArgument("R-hat needs at least two chains".into()));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidArgument("R-hat needs equal-length chains".into()));
    }
    if n < 10 {
        return Err(Error::TooFewSamples { need: 10, got: n });
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains.iter().map(|c| variance(c)).sum::<f64>() / m as f64;
    if !(w > 0.0) {
        return Err(Error::UndefinedRhat);
    }
    let b = n as f64 * variance(&means);
    let nf = n as f64;
    Ok((((nf - 1.0) / nf * w + b / nf) / w).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ess {
    pub value: f64,
    /// The input had zero variance; `value` is set to `n`.
    pub degenerate: bool,
}

/// Effective sample size with Geyer's initial positive sequence, clipped to `(0, n]`.
pub fn effective_sample_size(xs: &[f64]) -> Result<Ess> {
    let n = xs.len();
    if n < 10 {
        return Err(Error::TooFewSamples { need: 10, got: n });
    }
    let m = mean(xs);
    let centered: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let c0 = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if !(c0 > 0.0) {
        return Ok(Ess {
            value: n as f64,
            degenerate: true,
        });
    }
    let rho = |k: usize| -> f64 { centered[..n - k].iter().zip(&centered[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64 / c0 };
    // Γ_k = ρ_{2k} + ρ_{2k+1}, summed while positive
    let mut sum_gamma = 0.0;
    let mut k = 0;
    while 2 * k + 1 < n {
        let g = rho(2 * k) + rho(2 * k + 1);
        if g <= 0.0 {
            break;
        }
        sum_gamma += g;
        k += 1;
    }
    // τ = -1 + 2 Σ Γ_k = 1 + 2 Σ_{t>=1} ρ_t
    let tau = (2.0 * sum_gamma - 1.0).max(1e-12);
    let value = (n as f64 / tau).min(n as f64);
    Ok(Ess {
        value,
        degenerate: false,
    })
}

/// Narrowest window of sorted samples holding `ceil(mass * n)` of them.
pub fn hpd_interval(xs: &[f64], mass: f64) -> Result<(f64, f64)> {
    if xs.len() < 20 {
        return Err(Error::TooFewSamples { need: 20, got: xs.len() });
    }
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(Error::InvalidArgument(format!("HPD mass must be in (0, 1], got {mass}")));
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let k = ((mass * n as f64).ceil() as usize).clamp(1, n);
    let (mut best, mut lo) = (f64::INFINITY, 0);
    for i in 0..=n - k {
        let w = s[i + k - 1] - s[i];
        if w < best {
            best = w;
            lo = i;
        }
    }
    Ok((s[lo], s[lo + k - 1]))
}

/// Posterior mean squared error `Σ (truth - x_j)^2 / n`.
pub fn pmse(xs: &[f64], truth: f64) -> f64 {
    xs.iter().map(|x| (truth - x).powi(2)).sum::<f64>() / xs.len() as f64
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (i, frac) = (h.floor() as usize, h - h.floor());
    if i + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, 0.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub hpd_low: f64,
    pub hpd_high: f64,
    pub ess: f64,
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub ess_degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rhat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub truth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pmse: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub schema: u32,
    pub n_chains: usize,
    pub samples_per_chain: usize,
    pub burn: usize,
    pub thin: usize,
    /// Acceptance over all transitions, before burn-in and thinning.
    pub acceptance_raw: f64,
    /// Fraction of consecutive retained samples that differ.
    pub acceptance_thinned: f64,
    pub params: Vec<ParamSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notices: Vec<String>,
}

impl PosteriorSummary {
    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// Per-parameter summary over the retained samples of every chain.
/// R-hat is computed on the retained chains when there are at least two.
pub fn summarize(chains: &[Chain], burn: usize, thin: usize, truth: Option<&[f64]>) -> Result<PosteriorSummary> {
    let first = chains.first().ok_or(Error::EmptyChain)?;
    let d = first.dim();
    if chains.iter().any(|c| c.dim() != d) {
        return Err(Error::InvalidArgument("chains differ in dimension".into()));
    }
    if let Some(t) = truth {
        if t.len() != d {
            return Err(Error::InvalidArgument(format!("truth has {} values, chains have {d}", t.len())));
        }
    }
    let kept: Vec<Chain> = chains.iter().map(|c| burn_thin_chain(c, burn, thin)).collect::<Result<_>>()?;
    let transitions: usize = chains.iter().map(|c| c.len() - 1).sum();
    let accepted: usize = chains.iter().map(|c| c.accepted[1..].iter().filter(|&&a| a).count()).sum();
    let moves: usize = kept.iter().map(|c| c.samples.windows(2).filter(|w| w[0] != w[1]).count()).sum();
    let pairs: usize = kept.iter().map(|c| c.len() - 1).sum();
    let mut notices = Vec::new();
    let min_len = kept.iter().map(Chain::len).min().unwrap();
    if kept.len() < 2 {
        notices.push("single chain: R-hat omitted".to_owned());
    }

    let mut params = Vec::with_capacity(d);
    for j in 0..d {
        let cols: Vec<Vec<f64>> = kept.iter().map(|c| c.column(j)).collect();
        let pooled: Vec<f64> = cols.concat();
        let (hpd_low, hpd_high) = hpd_interval(&pooled, 0.95)?;
        // ESS summed over chains
        let mut ess = 0.0;
        let mut degenerate = false;
        for c in &cols {
            let e = effective_sample_size(c)?;
            ess += e.value;
            degenerate |= e.degenerate;
        }
        let rhat = if kept.len() >= 2 {
            let trimmed: Vec<Vec<f64>> = cols.iter().map(|c| c[..min_len].to_vec()).collect();
            match gelman_rubin(&trimmed) {
                Ok(r) => Some(r),
                Err(Error::UndefinedRhat) => {
                    notices.push(format!("{}: R-hat undefined (zero within-chain variance)", first.names[j]));
                    None
                }
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let t = truth.map(|t| t[j]);
        params.push(ParamSummary {
            name: first.names[j].clone(),
            mean: mean(&pooled),
            median: median(&pooled),
            hpd_low,
            hpd_high,
            ess,
            ess_degenerate: degenerate,
            rhat,
            truth: t,
            pmse: t.map(|t| pmse(&pooled, t)),
        });
    }
    Ok(PosteriorSummary {
        schema: 1,
        n_chains: chains.len(),
        samples_per_chain: min_len,
        burn,
        thin,
        acceptance_raw: accepted as f64 / transitions.max(1) as f64,
        acceptance_thinned: moves as f64 / pairs.max(1) as f64,
        params,
        notices,
    })
}

/// Pointwise 2.5% / 50% / 97.5% quantiles per compartment on `grid`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bands {
    pub times: Vec<f64>,
    pub compartments: Vec<String>,
    /// `[time][compartment] -> (q2.5, q50, q97.5)`
    pub quantiles: Vec<Vec<[f64; 3]>>,
}

/// Posterior-predictive bands: each draw picks θ uniformly from `samples`
/// and simulates one exact path from `init` at time 0. Draw `k` uses
/// `substream(seed, "bands", [k])`.
#[allow(clippy::too_many_arguments)]
pub fn trajectory_bands(
    spec: &ModelSpec,
    base: &Params,
    layout: &ParamLayout,
    samples: &[Vec<f64>],
    init: &StateVector,
    grid: &[f64],
    n_draws: usize,
    seed: u64,
) -> Result<Bands> {
    if n_draws < 100 {
        return Err(Error::TooFewSamples { need: 100, got: n_draws });
    }
    if samples.is_empty() {
        return Err(Error::EmptyChain);
    }
    let paths: Vec<Vec<StateVector>> = (0..n_draws)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, "bands", &[k as u64]);
            let theta = &samples[rng.random_range(0..samples.len())];
            let p = layout.apply(theta, base)?;
            Ok(simulate_on_grid(spec, &p, init, 0.0, grid, &mut rng)?.states)
        })
        .collect::<Result<_>>()?;
    let nc = spec.n_compartments();
    let quantiles = (0..grid.len())
        .map(|t| {
            (0..nc)
                .map(|c| {
                    let mut v: Vec<f64> = paths.iter().map(|p| p[t].get(c) as f64).collect();
                    v.sort_by(f64::total_cmp);
                    [quantile_sorted(&v, 0.025), quantile_sorted(&v, 0.5), quantile_sorted(&v, 0.975)]
                })
                .collect()
        })
        .collect();
    Ok(Bands {
        times: grid.to_vec(),
        compartments: spec.compartments().iter().map(|s| (*s).to_owned()).collect(),
        quantiles,
    })
}
