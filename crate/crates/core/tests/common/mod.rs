//! Exact oracles for small populations: enumerate the reachable states,
//! build the generator, and propagate with matrix exponentials.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{Binomial, Discrete};

/// Reachable SIR states `(S, I, R)` from `init`, in a fixed order.
pub fn sir_states(init: [u32; 3]) -> Vec<[u32; 3]> {
    let n = init.iter().sum::<u32>();
    let mut out = Vec::new();
    for s in (0..=init[0]).rev() {
        for r in 0..=(n - s) {
            let i = n - s - r;
            // S never grows; S + I never grows
            if s + i <= init[0] + init[1] && r >= init[2] {
                out.push([s, i, r]);
            }
        }
    }
    out
}

/// Generator of the frequency-dependent SIR chain on `states`.
pub fn sir_generator(states: &[[u32; 3]], beta: f64, gamma: f64) -> DMatrix<f64> {
    let n = states[0].iter().sum::<u32>() as f64;
    let idx = |x: [u32; 3]| states.iter().position(|&y| y == x);
    let k = states.len();
    let mut q = DMatrix::zeros(k, k);
    for (a, &[s, i, r]) in states.iter().enumerate() {
        let (s, i, r) = (s as f64, i as f64, r as f64);
        let inf = beta * s * i / n;
        let rem = gamma * i;
        if inf > 0.0 {
            let b = idx([s as u32 - 1, i as u32 + 1, r as u32]).expect("reachable");
            q[(a, b)] += inf;
        }
        if rem > 0.0 {
            let b = idx([s as u32, i as u32 - 1, r as u32 + 1]).expect("reachable");
            q[(a, b)] += rem;
        }
        q[(a, a)] = -(inf + rem);
    }
    q
}

/// Row distribution after time `t` from a point mass at `start`.
pub fn transient(q: &DMatrix<f64>, start: usize, t: f64) -> DVector<f64> {
    let p = (q * t).exp();
    p.row(start).transpose()
}

/// `P(y | x)` for independent binomial thinning of every compartment.
pub fn binomial_emission(x: &[u32], y: &[u64], p: f64) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&n, &k)| {
            if k > u64::from(n) {
                0.0
            } else {
                Binomial::new(p, u64::from(n)).unwrap().pmf(k)
            }
        })
        .product()
}

/// Exact `p(y_1..y_n)` by the forward algorithm with observations at
/// integer times `1..=n`, plus the filtering distributions.
pub fn forward_likelihood(
    q: &DMatrix<f64>,
    states: &[[u32; 3]],
    start: usize,
    obs: &[Vec<u64>],
    p_obs: f64,
) -> (f64, Vec<DVector<f64>>) {
    let step = (q * 1.0).exp();
    let k = states.len();
    let mut alpha = DVector::zeros(k);
    alpha[start] = 1.0;
    let mut z = 1.0;
    let mut filters = Vec::new();
    for y in obs {
        let pred = step.transpose() * &alpha;
        let mut upd = DVector::zeros(k);
        for j in 0..k {
            upd[j] = pred[j] * binomial_emission(&states[j], y, p_obs);
        }
        let c = upd.sum();
        z *= c;
        alpha = upd / c;
        filters.push(alpha.clone());
    }
    (z, filters)
}

/// Exact smoothing marginals `p(x_t | y_1..y_n)` for `t = 1..=n`.
pub fn smoothing_marginals(
    q: &DMatrix<f64>,
    states: &[[u32; 3]],
    start: usize,
    obs: &[Vec<u64>],
    p_obs: f64,
) -> Vec<DVector<f64>> {
    let step = (q * 1.0).exp();
    let (_, filters) = forward_likelihood(q, states, start, obs, p_obs);
    let k = states.len();
    let n = obs.len();
    let mut beta = DVector::from_element(k, 1.0);
    let mut out = vec![DVector::zeros(k); n];
    for t in (0..n).rev() {
        let mut m = filters[t].component_mul(&beta);
        m /= m.sum();
        out[t] = m;
        if t > 0 {
            // β_{t-1}(i) = Σ_j P(i → j) g(y_t | j) β_t(j)
            let mut e = DVector::zeros(k);
            for j in 0..k {
                e[j] = binomial_emission(&states[j], &obs[t], p_obs) * beta[j];
            }
            beta = &step * e;
            beta /= beta.max();
        }
    }
    out
}

/// Two-sided one-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).max((k + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the two-sided KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}
