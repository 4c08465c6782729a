use std::f64::consts::PI;

use micromaser_core::kernel::excitation_coefficient;
use micromaser_core::photon::tail_ratio;
use micromaser_core::{
    excited_probability, fidelity, steady_state, steady_state_with, trapping_theta, KernelMatrix, MaserParams,
    PhotonDistribution, TauGrid, TruncationCheck,
};
use proptest::prelude::*;

fn lenient() -> TruncationCheck {
    TruncationCheck {
        strict: false,
        ..Default::default()
    }
}

fn params() -> impl Strategy<Value = MaserParams> {
    (1.0f64..60.0, 0.0f64..2.0, 0.0f64..4.0).prop_map(|(n_ex, n_th, t)| MaserParams {
        n_ex,
        n_th,
        theta: t * PI,
    })
}

fn distribution(len: usize) -> impl Strategy<Value = PhotonDistribution> {
    prop::collection::vec(0.0f64..1.0, len)
        .prop_filter("nonzero mass", |v| v.iter().sum::<f64>() > 1e-3)
        .prop_map(|v| PhotonDistribution::new(v).unwrap())
}

proptest! {
    #[test]
    fn steady_state_is_normalized_and_nonnegative(p in params(), trunc in 0usize..80) {
        let dist = steady_state_with(&p, trunc, lenient()).unwrap();
        prop_assert_eq!(dist.len(), trunc + 1);
        prop_assert!(dist.probs().iter().all(|&v| v >= 0.0 && v.is_finite()));
        prop_assert!((dist.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_pump_is_thermal(n_ex in 1.0f64..50.0, n_th in 0.01f64..1.5) {
        let trunc = 120;
        let p = MaserParams { n_ex, n_th, theta: 0.0 };
        let dist = steady_state_with(&p, trunc, lenient()).unwrap();
        // geometric law renormalized on 0..=trunc
        let r = n_th / (1.0 + n_th);
        let norm = (1.0 - r.powi(trunc as i32 + 1)) / (1.0 - r);
        for (n, &v) in dist.probs().iter().enumerate() {
            let expected = r.powi(n as i32) / norm;
            prop_assert!((v - expected).abs() <= 1e-12 * expected, "n={} {} vs {}", n, v, expected);
        }
    }

    #[test]
    fn trapping_states_vanish_above_n_q(n_ex in 4.0f64..60.0, n_q in 0u32..6) {
        let theta = trapping_theta(n_ex, 1, n_q).unwrap();
        let p = MaserParams { n_ex, n_th: 0.0, theta };
        let dist = steady_state(&p, 40).unwrap();
        let max = dist.probs().iter().copied().fold(0.0, f64::max);
        for &v in &dist.probs()[n_q as usize + 1..] {
            prop_assert!(v < 1e-12 * max);
        }
    }

    #[test]
    fn fidelity_properties(p in distribution(12), q in distribution(12), pad in 0usize..10) {
        let g = fidelity(&p, &q);
        prop_assert!((0.0..=1.0).contains(&g));
        prop_assert_eq!(g, fidelity(&q, &p));
        prop_assert!((fidelity(&p, &p) - 1.0).abs() < 1e-12);
        let mut padded = p.probs().to_vec();
        padded.extend(std::iter::repeat_n(0.0, pad));
        let padded = PhotonDistribution::new(padded).unwrap();
        prop_assert!((fidelity(&padded, &q) - g).abs() < 1e-15);
    }

    #[test]
    fn excitation_is_linear(p in distribution(16), q in distribution(16), alpha in 0.0f64..1.0) {
        let kernel = KernelMatrix::new(&TauGrid::new(0.5, 7.5, 50).unwrap(), 15).unwrap();
        let mix: Vec<f64> = p.probs().iter().zip(q.probs()).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
        let mix = PhotonDistribution::new(mix).unwrap();
        let pm = excited_probability(&kernel, &mix).unwrap();
        let pp = excited_probability(&kernel, &p).unwrap();
        let pq = excited_probability(&kernel, &q).unwrap();
        for k in 0..pm.len() {
            prop_assert!((pm[k] - (alpha * pp[k] + (1.0 - alpha) * pq[k])).abs() < 1e-12);
            prop_assert!(pm[k] >= -1e-12 && pm[k] <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn kernel_is_periodic_in_time(tau in 0.0f64..20.0, n in 0usize..60) {
        let period = 2.0 * PI / ((n + 1) as f64).sqrt();
        let a = excitation_coefficient(tau, n);
        let b = excitation_coefficient(tau + period, n);
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }
}

#[test]
fn kernel_entries_match_closed_form() {
    let grid = TauGrid::new(0.5, 7.5, 200).unwrap();
    let kernel = KernelMatrix::new(&grid, 50).unwrap();
    for (k, tau) in grid.points().into_iter().enumerate() {
        for n in 0..=50 {
            let direct = (1.0 + (tau * ((n + 1) as f64).sqrt()).cos()) / 2.0;
            assert!((kernel.get(k, n) - direct).abs() <= 1e-15);
        }
    }
}

#[test]
fn trapping_state_excitation_matches_extended_precision_sum() {
    // 50-digit evaluation of the steady state and the kernel sum at tau = 0.5
    const ORACLE: f64 = 0.796_452_939_196_261_1;
    let params = MaserParams::with_theta_pi(25.0, 1e-5, 2.5).unwrap();
    let p = steady_state(&params, 30).unwrap();
    let kernel = KernelMatrix::from_times(vec![0.5], 30).unwrap();
    let pe = excited_probability(&kernel, &p).unwrap();
    assert!((pe[0] - ORACLE).abs() < 1e-14, "{}", pe[0]);
}

#[test]
fn truncation_check_thresholds() {
    let ma = MaserParams::with_theta_pi(25.0, 1e-5, 0.5).unwrap();
    assert!(tail_ratio(&ma, 30) > 1e-6);
    assert!(steady_state(&ma, 30).is_err());
    let loose = TruncationCheck {
        threshold: 1.0,
        strict: true,
    };
    assert!(steady_state_with(&ma, 30, loose).is_ok());
}
