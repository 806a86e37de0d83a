//! Emission layer of the hidden-Markov model.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{round_half_even, StateVector};

/// Default lower bound on the Gaussian emission variance (quarter-count).
pub const VARIANCE_FLOOR: f64 = 0.25;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObservationKind {
    /// `y = x + e`, `e ~ Normal(0, max(n_ratio * x, variance_floor))`.
    GaussianNoise {
        n_ratio: f64,
        #[serde(default = "default_floor")]
        variance_floor: f64,
    },
    /// `y ~ Binomial(x, p_obs)`.
    BinomialThinning { p_obs: f64 },
}

fn default_floor() -> f64 {
    VARIANCE_FLOOR
}

/// Per-time-point emission distribution over a subset of compartments.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationModel {
    kind: ObservationKind,
    observed: Vec<usize>,
    // ln(p), ln(1-p) for the binomial case.
    ln_p: f64,
    ln_q: f64,
}

impl ObservationModel {
    pub fn gaussian(n_ratio: f64, n_compartments: usize) -> Result<Self> {
        Self::new(
            ObservationKind::GaussianNoise {
                n_ratio,
                variance_floor: VARIANCE_FLOOR,
            },
            (0..n_compartments).collect(),
        )
    }

    pub fn binomial(p_obs: f64, n_compartments: usize) -> Result<Self> {
        Self::new(ObservationKind::BinomialThinning { p_obs }, (0..n_compartments).collect())
    }

    pub fn new(kind: ObservationKind, observed: Vec<usize>) -> Result<Self> {
        let (ln_p, ln_q) = match kind {
            ObservationKind::GaussianNoise {
                n_ratio,
                variance_floor,
            } => {
                if !(n_ratio >= 0.0 && n_ratio.is_finite()) {
                    return Err(Error::InvalidParams(format!("n_ratio must be >= 0, got {n_ratio}")));
                }
                if !(variance_floor > 0.0 && variance_floor.is_finite()) {
                    return Err(Error::InvalidParams(format!(
                        "variance_floor must be > 0, got {variance_floor}"
                    )));
                }
                (0.0, 0.0)
            }
            ObservationKind::BinomialThinning { p_obs } => {
                if !(p_obs > 0.0 && p_obs <= 1.0) {
                    return Err(Error::InvalidParams(format!("p_obs must lie in (0, 1], got {p_obs}")));
                }
                (p_obs.ln(), (1.0 - p_obs).ln())
            }
        };
        Ok(Self {
            kind,
            observed,
            ln_p,
            ln_q,
        })
    }

    pub fn kind(&self) -> ObservationKind {
        self.kind
    }

    pub fn observed_compartments(&self) -> &[usize] {
        &self.observed
    }

    pub fn is_integer_valued(&self) -> bool {
        matches!(self.kind, ObservationKind::BinomialThinning { .. })
    }

    /// Same compartments, new `p_obs`. Errors for the Gaussian model.
    pub fn with_p_obs(&self, p_obs: f64) -> Result<Self> {
        match self.kind {
            ObservationKind::BinomialThinning { .. } => {
                Self::new(ObservationKind::BinomialThinning { p_obs }, self.observed.clone())
            }
            ObservationKind::GaussianNoise { .. } => Err(Error::InvalidArgument(
                "p_obs only applies to the binomial observation model".into(),
            )),
        }
    }

    fn variance(n_ratio: f64, floor: f64, x: f64) -> f64 {
        let v = n_ratio * x;
        if v < floor {
            log::trace!("gaussian emission variance {v} floored to {floor}");
            floor
        } else {
            v
        }
    }

    /// One emission from a (possibly real-valued) hidden state. The binomial
    /// model rounds real counts half-to-even first.
    pub fn simulate<R: Rng + ?Sized>(&self, hidden: &[f64], rng: &mut R) -> Vec<f64> {
        self.observed
            .iter()
            .map(|&c| {
                let x = hidden[c];
                match self.kind {
                    ObservationKind::GaussianNoise {
                        n_ratio,
                        variance_floor,
                    } => {
                        let sd = Self::variance(n_ratio, variance_floor, x).sqrt();
                        x + Normal::new(0.0, sd).expect("finite sd").sample(rng)
                    }
                    ObservationKind::BinomialThinning { p_obs } => {
                        let n = round_half_even(x).max(0.0) as u64;
                        Binomial::new(n, p_obs).expect("valid p").sample(rng) as f64
                    }
                }
            })
            .collect()
    }

    /// Log emission density of `observed` given an integer hidden state.
    /// Observations outside the binomial support give `-inf`.
    #[inline]
    pub fn log_density(&self, hidden: &StateVector, observed: &[f64]) -> f64 {
        debug_assert_eq!(observed.len(), self.observed.len());
        let mut total = 0.0;
        for (&c, &y) in self.observed.iter().zip(observed) {
            let x = f64::from(hidden.get(c));
            total += match self.kind {
                ObservationKind::GaussianNoise {
                    n_ratio,
                    variance_floor,
                } => {
                    let var = Self::variance(n_ratio, variance_floor, x);
                    let r = y - x;
                    -0.5 * (LN_2PI + var.ln()) - r * r / (2.0 * var)
                }
                ObservationKind::BinomialThinning { .. } => self.binomial_ln_pmf(x, y),
            };
            if total == f64::NEG_INFINITY {
                break;
            }
        }
        total
    }

    #[inline]
    fn binomial_ln_pmf(&self, n: f64, k: f64) -> f64 {
        if k < 0.0 || k > n || k.fract() != 0.0 {
            return f64::NEG_INFINITY;
        }
        let mut lp = ln_choose(n, k);
        if k > 0.0 {
            lp += k * self.ln_p;
        }
        if n - k > 0.0 {
            lp += (n - k) * self.ln_q;
        }
        lp
    }
}

/// `ln C(n, k)` for integral `0 <= k <= n`.
#[inline]
pub fn ln_choose(n: f64, k: f64) -> f64 {
    if k == 0.0 || k == n {
        0.0
    } else {
        ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
    }
}

/// Observations at increasing times; one value per observed compartment.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedSeries {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ObservedSeries {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        crate::model::check_grid(&times)?;
        if times.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} observation times but {} observation vectors",
                times.len(),
                values.len()
            )));
        }
        Ok(Self { times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The first `n` observations.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            times: self.times[..n].to_vec(),
            values: self.values[..n].to_vec(),
        }
    }

    /// Emits one observation per hidden state along a path.
    pub fn simulate<R: Rng + ?Sized>(
        model: &ObservationModel,
        times: &[f64],
        hidden: &[Vec<f64>],
        rng: &mut R,
    ) -> Result<Self> {
        let values = hidden.iter().map(|x| model.simulate(x, rng)).collect();
        Self::new(times.to_vec(), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn state(c: &[u32]) -> StateVector {
        StateVector::new(c).unwrap()
    }

    #[test]
    fn binomial_pmf_closed_form() {
        let m = ObservationModel::new(ObservationKind::BinomialThinning { p_obs: 0.1 }, vec![1]).unwrap();
        let got = m.log_density(&state(&[0, 20, 0]), &[2.0]);
        // C(20, 2) = 190
        let want = 190f64.ln() + 2.0 * 0.1f64.ln() + 18.0 * 0.9f64.ln();
        assert!((got - want).abs() < 1e-12);
        assert_eq!(m.log_density(&state(&[0, 20, 0]), &[21.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn binomial_pmf_sums_to_one() {
        for &p in &[0.01, 0.1, 0.5, 0.93, 1.0] {
            let m = ObservationModel::new(ObservationKind::BinomialThinning { p_obs: p }, vec![0]).unwrap();
            for n in 0..=30u32 {
                let s: f64 = (0..=n)
                    .map(|k| m.log_density(&state(&[n]), &[f64::from(k)]).exp())
                    .sum();
                assert!((s - 1.0).abs() < 1e-10, "p={p} n={n} sum={s}");
            }
        }
    }

    #[test]
    fn binomial_identity_thinning() {
        let m = ObservationModel::binomial(1.0, 3).unwrap();
        let mut rng = substream(0, "obs", &[]);
        assert_eq!(m.simulate(&[4800.0, 20.0, 0.0], &mut rng), vec![4800.0, 20.0, 0.0]);
        let h = state(&[4800, 20, 0]);
        assert_eq!(m.log_density(&h, &[4800.0, 20.0, 0.0]), 0.0);
        assert_eq!(m.log_density(&h, &[4799.0, 20.0, 0.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn gaussian_peak_density_and_floor() {
        let m = ObservationModel::gaussian(0.01, 3).unwrap();
        let h = state(&[4800, 20, 0]);
        let got = m.log_density(&h, &[4800.0, 20.0, 0.0]);
        let want = -0.5 * (2.0 * std::f64::consts::PI * 48.0).ln()
            - 0.5 * (2.0 * std::f64::consts::PI * 0.25).ln()
            - 0.5 * (2.0 * std::f64::consts::PI * 0.25).ln();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn gaussian_density_integrates_to_one() {
        let m = ObservationModel::new(
            ObservationKind::GaussianNoise { n_ratio: 0.05, variance_floor: 0.25 },
            vec![0],
        )
        .unwrap();
        for &x in &[0u32, 3, 200] {
            let h = state(&[x]);
            let sd = (0.05 * f64::from(x)).max(0.25).sqrt();
            let (lo, hi) = (f64::from(x) - 12.0 * sd, f64::from(x) + 12.0 * sd);
            let n = 20_000;
            let dx = (hi - lo) / n as f64;
            // Simpson's rule
            let mut s = 0.0;
            for i in 0..=n {
                let y = lo + i as f64 * dx;
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * m.log_density(&h, &[y]).exp();
            }
            s *= dx / 3.0;
            assert!((s - 1.0).abs() < 1e-8, "x={x} integral={s}");
        }
    }

    #[test]
    fn binomial_sample_mean() {
        let m = ObservationModel::new(ObservationKind::BinomialThinning { p_obs: 0.1 }, vec![0]).unwrap();
        let mut rng = substream(1, "obs", &[]);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| m.simulate(&[4800.0], &mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let se = (4800.0 * 0.1 * 0.9 / n as f64).sqrt();
        assert!((mean - 480.0).abs() < 3.0 * se, "mean={mean}");
        assert!(draws.iter().all(|&y| (0.0..=4800.0).contains(&y) && y.fract() == 0.0));
    }

    #[test]
    fn gaussian_sample_variance() {
        let m = ObservationModel::new(
            ObservationKind::GaussianNoise { n_ratio: 0.01, variance_floor: 0.25 },
            vec![0],
        )
        .unwrap();
        let mut rng = substream(2, "obs", &[]);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| m.simulate(&[4800.0], &mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 48.0).abs() < 0.05 * 48.0, "var={var}");
    }

    #[test]
    fn thinning_monotone_in_p_obs() {
        let mut means = Vec::new();
        for &p in &[0.01, 0.1, 1.0] {
            let m = ObservationModel::binomial(p, 1).unwrap();
            let mut rng = substream(3, "mono", &[]);
            let mean = (0..20_000).map(|_| m.simulate(&[1000.0], &mut rng)[0]).sum::<f64>() / 20_000.0;
            means.push(mean);
        }
        assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
    }

    #[test]
    fn simulated_log_likelihood_matches_entropy() {
        // Binomial(10, 0.3): the mean of log-pmf over draws estimates -entropy.
        let m = ObservationModel::binomial(0.3, 1).unwrap();
        let h = state(&[10]);
        let entropy: f64 = (0..=10)
            .map(|k| {
                let lp = m.log_density(&h, &[f64::from(k)]);
                -lp.exp() * lp
            })
            .sum();
        let mut rng = substream(4, "ent", &[]);
        let n = 50_000;
        let lls: Vec<f64> = (0..n).map(|_| m.log_density(&h, &m.simulate(&[10.0], &mut rng))).collect();
        let mean = lls.iter().sum::<f64>() / n as f64;
        let sd = (lls.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((mean + entropy).abs() < 4.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(ObservationModel::binomial(0.0, 3).is_err());
        assert!(ObservationModel::binomial(1.5, 3).is_err());
        assert!(ObservationModel::gaussian(-0.1, 3).is_err());
        assert!(ObservationModel::new(
            ObservationKind::GaussianNoise { n_ratio: 0.1, variance_floor: 0.0 },
            vec![0]
        )
        .is_err());
    }
}
