mod common;

use statrs::distribution::{ContinuousCDF, Exp};

use stochepi::gillespie::{gillespie_events, gillespie_propagate, simulate_on_grid};
use stochepi::model::{integrate_deterministic, sir_spec, Params};
use stochepi::rng::substream;

fn endpoint_counts(t: f64, n: u64, seed: u64) -> (Vec<[u32; 3]>, Vec<f64>) {
    let spec = sir_spec(3).unwrap();
    let start = spec.state(&[2, 1, 0]).unwrap();
    let p = Params::sir(2.0, 1.0).unwrap();
    let states = common::sir_states([2, 1, 0]);
    let mut counts = vec![0.0; states.len()];
    for k in 0..n {
        let mut rng = substream(seed, "endpoint", &[k]);
        let end = simulate_on_grid(&spec, &p, &start, 0.0, &[t], &mut rng).unwrap().states[0];
        counts[states.iter().position(|s| s[..] == *end.as_slice()).unwrap()] += 1.0;
    }
    (states, counts)
}

#[test]
fn small_population_endpoint_law_matches_matrix_exponential() {
    for (t, seed) in [(0.4, 1), (2.0, 2)] {
        let n = 20_000;
        let (states, counts) = endpoint_counts(t, n, seed);
        let exact = common::transient(&common::sir_generator(&states, 2.0, 1.0), 0, t);
        assert!((exact.sum() - 1.0).abs() < 1e-12);
        for (j, &c) in counts.iter().enumerate() {
            let p = exact[j];
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            if p == 0.0 {
                assert_eq!(c, 0.0, "unreachable state {:?} visited", states[j]);
            } else {
                assert!(
                    (c - n as f64 * p).abs() < 4.0 * sd,
                    "t={t} state {:?}: {c} vs {}",
                    states[j],
                    n as f64 * p
                );
            }
        }
    }
}

#[test]
fn chained_propagation_has_the_same_law_as_one_interval() {
    // Memorylessness: 0 -> 0.7 -> 2.0 in two calls equals 0 -> 2.0.
    let spec = sir_spec(3).unwrap();
    let start = spec.state(&[2, 1, 0]).unwrap();
    let p = Params::sir(2.0, 1.0).unwrap();
    let states = common::sir_states([2, 1, 0]);
    let exact = common::transient(&common::sir_generator(&states, 2.0, 1.0), 0, 2.0);
    let n = 20_000;
    let mut counts = vec![0.0; states.len()];
    for k in 0..n {
        let mut rng = substream(3, "chained", &[k]);
        let mid = gillespie_propagate(&spec, &p, &start, 0.7, &mut rng).unwrap();
        let end = gillespie_propagate(&spec, &p, &mid, 1.3, &mut rng).unwrap();
        counts[states.iter().position(|s| s[..] == *end.as_slice()).unwrap()] += 1.0;
    }
    for (j, &c) in counts.iter().enumerate() {
        let sd = (n as f64 * exact[j] * (1.0 - exact[j])).sqrt().max(1.0);
        assert!((c - n as f64 * exact[j]).abs() < 4.0 * sd);
    }
}

#[test]
fn pure_removal_waiting_time_is_exponential() {
    let spec = sir_spec(50).unwrap();
    let init = spec.state(&[40, 10, 0]).unwrap();
    let removal = Params {
        beta: 0.0,
        gamma: 0.8,
        alpha: None,
        p_obs: None,
    };
    let firsts: Vec<f64> = (0..5000)
        .map(|k| {
            let mut rng = substream(4, "removal", &[k]);
            let ev = gillespie_events(&spec, &removal, &init, 0.0, 1e6, &mut rng).unwrap();
            assert_eq!(ev.len(), 10);
            assert!(ev.iter().all(|e| e.event_index == 1));
            ev[0].time
        })
        .collect();
    let law = Exp::new(0.8 * 10.0).unwrap();
    let d = common::ks_statistic(firsts, |x| law.cdf(x));
    assert!(d < common::ks_critical_1pct(5000), "KS {d}");
}

#[test]
fn large_population_mean_tracks_the_ode() {
    let n_pop = 20_000;
    let spec = sir_spec(n_pop).unwrap();
    let init = spec.state(&[18_000, 2_000, 0]).unwrap();
    let p = Params::sir(2.0, 1.0).unwrap();
    let grid = [1.0, 2.0, 4.0];
    let ode = integrate_deterministic(&spec, &p, &init.to_f64_vec(), &[0.0, 1.0, 2.0, 4.0]).unwrap();
    let runs = 40;
    let mut mean_i = [0.0; 3];
    for k in 0..runs {
        let mut rng = substream(5, "ode", &[k]);
        let path = simulate_on_grid(&spec, &p, &init, 0.0, &grid, &mut rng).unwrap();
        for (m, s) in mean_i.iter_mut().zip(&path.states) {
            *m += f64::from(s.get(1)) / runs as f64;
        }
    }
    for (m, x) in mean_i.iter().zip(&ode.states[1..]) {
        assert!((m - x[1]).abs() / x[1] < 0.02, "{m} vs {}", x[1]);
    }
}
