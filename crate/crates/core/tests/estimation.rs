//! Statistical and likelihood properties of simulation and reconstruction.

use micromaser_core::harness::{derive_seed, mean_stddev};
use micromaser_core::photon::DistributionMetrics;
use micromaser_core::{
    em_step, excited_probability, fidelity, log_likelihood, reconstruct, simulate, steady_state, EmConfig, Init,
    KernelMatrix, MaserParams, PhotonDistribution, TauGrid,
};
use proptest::prelude::*;

fn regime(theta_pi: f64) -> MaserParams {
    MaserParams::with_theta_pi(25.0, 1e-5, theta_pi).unwrap()
}

/// Neumaier-compensated sum.
fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Log-likelihood evaluated straight from its definition, independent of the kernel type.
fn loglik_oracle(times: &[f64], freqs: &[f64], p: &[f64]) -> f64 {
    let model: Vec<f64> = times
        .iter()
        .map(|tau| {
            compensated_sum(
                p.iter()
                    .enumerate()
                    .map(|(n, pn)| pn * (1.0 + (tau * ((n + 1) as f64).sqrt()).cos()) / 2.0),
            )
        })
        .collect();
    let total = compensated_sum(model.iter().copied());
    compensated_sum(
        freqs
            .iter()
            .zip(&model)
            .filter(|(f, _)| **f > 0.0)
            .map(|(f, m)| f * (m / total).ln()),
    )
}

#[test]
fn empirical_frequencies_converge_to_model() {
    let params = regime(2.18);
    let grid = TauGrid::new(0.5, 7.5, 10).unwrap();
    let shots = 50u32;
    let seeds = 1000u64;
    let truth = steady_state(&params, 30).unwrap();
    let probs = excited_probability(&KernelMatrix::new(&grid, 30).unwrap(), &truth).unwrap();
    let mut totals = vec![0u64; grid.len()];
    for seed in 0..seeds {
        let set = simulate(&params, &grid, 30, shots, seed).unwrap();
        for (t, c) in totals.iter_mut().zip(&set.counts) {
            *t += *c as u64;
        }
    }
    for (k, (&total, &p)) in totals.iter().zip(&probs).enumerate() {
        let observed = total as f64 / (seeds * shots as u64) as f64;
        let sigma = (p * (1.0 - p) / (seeds * shots as u64) as f64).sqrt();
        assert!(
            (observed - p).abs() <= 3.0 * sigma,
            "k={k}: {observed} vs {p} (sigma {sigma})"
        );
    }
}

#[test]
fn true_distribution_beats_thermal_of_equal_mean() {
    let params = regime(2.5);
    let grid = TauGrid::new(0.5, 7.5, 200).unwrap();
    let truth = steady_state(&params, 30).unwrap();
    let DistributionMetrics { mean, .. } = truth.metrics();
    let thermal = PhotonDistribution::thermal(mean, 30).unwrap();
    let kernel = KernelMatrix::new(&grid, 30).unwrap();
    let times = grid.points();
    for seed in 0..5 {
        let set = simulate(&params, &grid, 30, 200, seed).unwrap();
        let l_true = log_likelihood(&kernel, &set.frequencies, &truth).unwrap();
        let l_thermal = log_likelihood(&kernel, &set.frequencies, &thermal).unwrap();
        assert!(l_true > l_thermal);
        assert!((l_true - loglik_oracle(&times, &set.frequencies, truth.probs())).abs() < 1e-10);
        assert!((l_thermal - loglik_oracle(&times, &set.frequencies, thermal.probs())).abs() < 1e-10);
    }
}

#[test]
fn one_step_from_uniform_increases_likelihood() {
    let params = regime(2.18);
    let grid = TauGrid::new(0.5, 7.5, 200).unwrap();
    let kernel = KernelMatrix::new(&grid, 30).unwrap();
    let times = grid.points();
    for seed in 0..5 {
        let set = simulate(&params, &grid, 30, 200, seed).unwrap();
        let p0 = PhotonDistribution::uniform(30);
        let p1 = em_step(&kernel, &set.frequencies, &p0).unwrap();
        let before = loglik_oracle(&times, &set.frequencies, p0.probs());
        let after = loglik_oracle(&times, &set.frequencies, p1.probs());
        assert!(after > before, "{before} -> {after}");
    }
}

#[test]
fn truth_is_stationary_under_exact_data() {
    let truth = steady_state(&regime(2.18), 30).unwrap();
    let kernel = KernelMatrix::new(&TauGrid::default(), 30).unwrap();
    let freqs = excited_probability(&kernel, &truth).unwrap();
    let config = EmConfig {
        max_iterations: 0,
        init: Init::Custom(truth.clone()),
        ..EmConfig::default()
    };
    let r = reconstruct(&kernel, &freqs, &config).unwrap();
    assert!(r.residual < 1e-12, "{}", r.residual);
}

/// Strictly positive pseudo-random weights in `[1 - spread, 1 + spread]`, normalized.
fn random_init(trunc: usize, spread: f64, seed: u64) -> EmConfig {
    let weights: Vec<f64> = (0..=trunc)
        .map(|i| {
            let u = (derive_seed(seed, i as u64) >> 11) as f64 / (1u64 << 53) as f64;
            1.0 - spread + 2.0 * spread * u
        })
        .collect();
    EmConfig {
        init: Init::Custom(PhotonDistribution::new(weights).unwrap()),
        ..EmConfig::default()
    }
}

fn init_gap(theta_pi: f64, trunc: usize, spread: f64, seed: u64) -> f64 {
    let params = regime(theta_pi);
    let grid = TauGrid::default();
    let truth = steady_state(&params, trunc).unwrap();
    let kernel = KernelMatrix::new(&grid, trunc).unwrap();
    let set = simulate(&params, &grid, trunc, 200, seed).unwrap();
    let uniform = reconstruct(&kernel, &set.frequencies, &EmConfig::default()).unwrap();
    let random = reconstruct(&kernel, &set.frequencies, &random_init(trunc, spread, seed)).unwrap();
    fidelity(&truth, &uniform.estimate) - fidelity(&truth, &random.estimate)
}

#[test]
fn perturbed_start_reaches_same_fidelity() {
    for (theta_pi, trunc) in [(2.5, 30), (0.5, 50), (2.18, 30)] {
        for seed in 0..3 {
            let gap = init_gap(theta_pi, trunc, 0.1, seed);
            assert!(gap.abs() < 0.005, "theta {theta_pi}pi seed {seed}: gap {gap}");
        }
    }
}

#[test]
fn trapping_state_is_insensitive_to_broad_random_start() {
    // weights spread over a factor of ~20
    for seed in 0..3 {
        let gap = init_gap(2.5, 30, 0.95, seed);
        assert!(gap.abs() < 0.005, "seed {seed}: gap {gap}");
    }
}

#[test]
fn reconstruction_scatter_is_small() {
    let params = regime(2.5);
    let grid = TauGrid::default();
    let truth = steady_state(&params, 30).unwrap();
    let kernel = KernelMatrix::new(&grid, 30).unwrap();
    let gs: Vec<f64> = (0..10)
        .map(|i| {
            let set = simulate(&params, &grid, 30, 200, derive_seed(1, i)).unwrap();
            let r = reconstruct(&kernel, &set.frequencies, &EmConfig::default()).unwrap();
            fidelity(&truth, &r.estimate)
        })
        .collect();
    let (mean, sd) = mean_stddev(&gs);
    assert!(mean > 0.98 && sd < 0.01, "{mean} +- {sd}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn likelihood_trace_is_monotone(
        theta_pi in 0.2f64..3.0,
        shots in 10u32..300,
        n_tau in 10usize..120,
        seed in any::<u64>(),
    ) {
        let params = regime(theta_pi);
        let grid = TauGrid::new(0.5, 7.5, n_tau).unwrap();
        let set = simulate(&params, &grid, 60, shots, seed).unwrap();
        let kernel = KernelMatrix::new(&grid, 60).unwrap();
        let r = reconstruct(&kernel, &set.frequencies, &EmConfig::with_iterations(200)).unwrap();
        for w in r.loglik_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-10, "{} -> {}", w[0], w[1]);
        }
        let total: f64 = r.estimate.probs().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
