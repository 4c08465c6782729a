//! Steady-state photon statistics of the micromaser field.
//!
//! The closed-form steady state is a product of per-photon gain factors
//!
//! ```text
//! p_n = p_0 * prod_{m=1..n} [ (N_ex/m) sin^2(theta sqrt(m/N_ex)) + n_th ] / (1 + n_th)
//! ```
//!
//! accumulated as a running product with power-of-two rescaling, so the
//! tails of strongly pumped distributions neither underflow nor lose the
//! relative accuracy a sum of logarithms would. A factor that vanishes (trapping state
//! with no thermal photons) cuts the distribution off exactly.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default truncation for `N_ex = 25` workloads.
pub const DEFAULT_TRUNCATION: usize = 50;

/// Default threshold on `p_{trunc+1} / max_n p_n` for the truncation check.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-6;

/// Pump and cavity configuration defining one steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaserParams {
    /// Effective pump rate `N_ex = R / gamma`.
    pub n_ex: f64,
    /// Mean thermal photon number.
    pub n_th: f64,
    /// Pump parameter `Theta_int = g t_int sqrt(N_ex)`, in radians.
    pub theta: f64,
}

impl MaserParams {
    pub fn new(n_ex: f64, n_th: f64, theta: f64) -> Result<Self> {
        let params = Self { n_ex, n_th, theta };
        params.validate()?;
        Ok(params)
    }

    /// Same as [`MaserParams::new`] with the pump parameter given in units of pi.
    pub fn with_theta_pi(n_ex: f64, n_th: f64, theta_over_pi: f64) -> Result<Self> {
        Self::new(n_ex, n_th, theta_over_pi * PI)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_ex.is_finite() && self.n_ex > 0.0) {
            return Err(Error::param(format!("n_ex must be positive, got {}", self.n_ex)));
        }
        if !(self.n_th.is_finite() && self.n_th >= 0.0) {
            return Err(Error::param(format!("n_th must be nonnegative, got {}", self.n_th)));
        }
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return Err(Error::param(format!("theta must be nonnegative, got {}", self.theta)));
        }
        Ok(())
    }

    /// Gain factor linking `p_m` to `p_{m-1}`, for `m >= 1`.
    ///
    /// With `n_th = 0` a Rabi phase that is a multiple of pi (to within
    /// rounding of `sin`) yields exactly zero.
    pub fn gain_factor(&self, m: usize) -> f64 {
        let m = m as f64;
        let phase = self.theta * (m / self.n_ex).sqrt();
        let s = phase.sin();
        if self.n_th == 0.0 && s.abs() <= 4.0 * f64::EPSILON * phase.abs().max(1.0) {
            return 0.0;
        }
        ((self.n_ex / m) * s * s + self.n_th) / (1.0 + self.n_th)
    }
}

/// Truncated photon-number distribution `p_0 ..= p_trunc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonDistribution {
    probs: Vec<f64>,
}

impl PhotonDistribution {
    /// Wraps a nonnegative vector, normalizing it to unit sum.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::param("distribution must have at least one entry"));
        }
        if let Some((i, v)) = probs.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::param(format!(
                "entry {i} is {v}, must be finite and nonnegative"
            )));
        }
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(Error::param("distribution has zero total mass"));
        }
        probs.iter_mut().for_each(|v| *v /= total);
        Ok(Self { probs })
    }

    /// Uniform distribution `1 / (trunc + 1)` on `0..=trunc`.
    pub fn uniform(truncation: usize) -> Self {
        let w = 1.0 / (truncation + 1) as f64;
        Self {
            probs: vec![w; truncation + 1],
        }
    }

    /// Fock state `|n>` on `0..=trunc`.
    pub fn fock(n: usize, truncation: usize) -> Result<Self> {
        if n > truncation {
            return Err(Error::param(format!("Fock index {n} exceeds truncation {truncation}")));
        }
        let mut probs = vec![0.0; truncation + 1];
        probs[n] = 1.0;
        Ok(Self { probs })
    }

    /// Thermal (geometric) distribution with mean `mean`, renormalized on `0..=trunc`.
    pub fn thermal(mean: f64, truncation: usize) -> Result<Self> {
        if !(mean.is_finite() && mean >= 0.0) {
            return Err(Error::param(format!("thermal mean must be nonnegative, got {mean}")));
        }
        let ratio = mean / (1.0 + mean);
        let probs = (0..=truncation).map(|n| ratio.powi(n as i32) / (1.0 + mean)).collect();
        Self::new(probs)
    }

    /// Trusted constructor for iterates that are already normalized.
    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        debug_assert!(!probs.is_empty());
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn truncation(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn metrics(&self) -> DistributionMetrics {
        metrics(self)
    }
}

/// How strictly [`steady_state_with`] treats an inadequate truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationCheck {
    pub threshold: f64,
    /// Fail with [`Error::TruncationTooSmall`]; otherwise log a warning.
    pub strict: bool,
}

impl Default for TruncationCheck {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_TAIL_THRESHOLD,
            strict: true,
        }
    }
}

/// Positive number `mantissa * 2^exponent` with the mantissa kept near 1.
#[derive(Debug, Clone, Copy)]
struct Scaled {
    mantissa: f64,
    exponent: i32,
}

impl Scaled {
    const ONE: Scaled = Scaled {
        mantissa: 1.0,
        exponent: 0,
    };

    fn times(self, f: f64) -> Scaled {
        let m = self.mantissa * f;
        // power-of-two rescaling is exact
        let shift = m.log2().floor() as i32;
        Scaled {
            mantissa: m * 2f64.powi(-shift),
            exponent: self.exponent + shift,
        }
    }

    fn log2(self) -> f64 {
        self.mantissa.log2() + self.exponent as f64
    }

    /// `self / other` as a plain float (underflows to 0 when tiny).
    fn ratio(self, other: Scaled) -> f64 {
        (self.mantissa / other.mantissa) * 2f64.powi(self.exponent - other.exponent)
    }
}

/// Unnormalized weights `p_n / p_0` for `n = 0..len`, as running products of
/// gain factors. `None` marks entries cut off by a vanishing factor.
fn weights(params: &MaserParams, len: usize) -> Vec<Option<Scaled>> {
    let mut out = Vec::with_capacity(len);
    let mut acc = Some(Scaled::ONE);
    for n in 0..len {
        if n > 0 {
            acc = acc.and_then(|a| {
                let f = params.gain_factor(n);
                (f > 0.0).then(|| a.times(f))
            });
        }
        out.push(acc);
    }
    out
}

fn peak(weights: &[Option<Scaled>]) -> Scaled {
    weights
        .iter()
        .flatten()
        .copied()
        .max_by(|a, b| a.log2().total_cmp(&b.log2()))
        .unwrap_or(Scaled::ONE)
}

/// Ratio of the first omitted term `p_{trunc+1}` to the largest retained term.
pub fn tail_ratio(params: &MaserParams, truncation: usize) -> f64 {
    let w = weights(params, truncation + 2);
    let peak = peak(&w[..=truncation]);
    w[truncation + 1].map_or(0.0, |t| t.ratio(peak))
}

/// Steady-state distribution on `0..=truncation`, failing if the truncation
/// drops more than [`DEFAULT_TAIL_THRESHOLD`] relative weight.
pub fn steady_state(params: &MaserParams, truncation: usize) -> Result<PhotonDistribution> {
    steady_state_with(params, truncation, TruncationCheck::default())
}

pub fn steady_state_with(
    params: &MaserParams,
    truncation: usize,
    check: TruncationCheck,
) -> Result<PhotonDistribution> {
    params.validate()?;
    let w = weights(params, truncation + 2);
    let peak = peak(&w[..=truncation]);

    let tail = w[truncation + 1].map_or(0.0, |t| t.ratio(peak));
    if tail >= check.threshold {
        if check.strict {
            return Err(Error::TruncationTooSmall {
                truncation,
                tail_ratio: tail,
                threshold: check.threshold,
            });
        }
        log::warn!(
            "truncation {truncation} leaves relative tail weight {tail:e} (threshold {:e})",
            check.threshold
        );
    }

    let weights: Vec<f64> = w[..=truncation]
        .iter()
        .map(|x| x.map_or(0.0, |x| x.ratio(peak)))
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(PhotonDistribution::from_normalized(
        weights.into_iter().map(|w| w / total).collect(),
    ))
}

/// Pump parameter at which the steady state is trapped below `n_q + 1` photons:
/// `q pi sqrt(N_ex / (1 + n_q))`.
pub fn trapping_theta(n_ex: f64, q: u32, n_q: u32) -> Result<f64> {
    if !(n_ex.is_finite() && n_ex > 0.0) {
        return Err(Error::param(format!("n_ex must be positive, got {n_ex}")));
    }
    if q == 0 {
        return Err(Error::param("trapping order q must be at least 1"));
    }
    Ok(q as f64 * PI * (n_ex / (1.0 + n_q as f64)).sqrt())
}

/// Photon-number mean and Fano factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionMetrics {
    pub mean: f64,
    pub variance: f64,
    /// `None` when the mean is zero (vacuum).
    pub fano: Option<f64>,
}

pub fn metrics(p: &PhotonDistribution) -> DistributionMetrics {
    let mean: f64 = p.probs.iter().enumerate().map(|(n, &w)| n as f64 * w).sum();
    let variance: f64 = p
        .probs
        .iter()
        .enumerate()
        .map(|(n, &w)| {
            let d = n as f64 - mean;
            d * d * w
        })
        .sum();
    let variance = variance.max(0.0);
    let fano = (mean > 0.0).then(|| variance / mean);
    DistributionMetrics { mean, variance, fano }
}

/// Bhattacharyya overlap `sum_n sqrt(p_n q_n)`; the shorter vector is
/// implicitly zero-padded.
pub fn fidelity(p: &PhotonDistribution, q: &PhotonDistribution) -> f64 {
    let g: f64 = p.probs.iter().zip(&q.probs).map(|(a, b)| (a * b).sqrt()).sum();
    g.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_params(theta_pi: f64) -> MaserParams {
        MaserParams::with_theta_pi(25.0, 1e-5, theta_pi).unwrap()
    }

    #[test]
    fn zero_pump_gives_thermal() {
        let params = MaserParams::new(25.0, 0.1, 0.0).unwrap();
        let p = steady_state(&params, 60).unwrap();
        for (n, &v) in p.probs().iter().enumerate() {
            let expected = (1.0 / 1.1) * (0.1f64 / 1.1).powi(n as i32);
            assert!((v - expected).abs() <= 1e-12 * expected, "n={n}: {v} vs {expected}");
        }
    }

    #[test]
    fn trapping_state_cuts_off_exactly() {
        let params = MaserParams::with_theta_pi(25.0, 0.0, 2.5).unwrap();
        let p = steady_state(&params, 30).unwrap();
        assert!(p.probs()[..4].iter().all(|&v| v > 0.0));
        assert!(p.probs()[4..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn table_moments() {
        for (theta_pi, mean, fano) in [(2.5, 2.52, 0.22), (0.5, 24.38, 1.02), (2.18, 7.85, 4.05)] {
            let m = steady_state(&table_params(theta_pi), 60).unwrap().metrics();
            assert!((m.mean - mean).abs() <= 0.01, "{theta_pi}: mean {}", m.mean);
            assert!((m.fano.unwrap() - fano).abs() <= 0.01, "{theta_pi}: fano {:?}", m.fano);
        }
    }

    #[test]
    fn trapping_state_moments_at_trunc_30() {
        let m = steady_state(&table_params(2.5), 30).unwrap().metrics();
        assert!((m.mean - 2.52).abs() <= 0.01);
        assert!((m.fano.unwrap() - 0.22).abs() <= 0.01);
    }

    #[test]
    fn small_truncation_is_rejected() {
        let err = steady_state(&table_params(0.5), 2).unwrap_err();
        assert!(matches!(err, Error::TruncationTooSmall { truncation: 2, .. }));
        let lenient = TruncationCheck {
            strict: false,
            ..Default::default()
        };
        let p = steady_state_with(&table_params(0.5), 2, lenient).unwrap();
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn default_truncation_covers_max_amplification() {
        assert!(tail_ratio(&table_params(0.5), DEFAULT_TRUNCATION) < DEFAULT_TAIL_THRESHOLD);
    }

    #[test]
    fn vacuum_has_undefined_fano() {
        let params = MaserParams::new(25.0, 0.0, 0.0).unwrap();
        let p = steady_state(&params, 0).unwrap();
        assert_eq!(p.probs(), &[1.0]);
        let m = metrics(&p);
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.fano, None);
    }

    #[test]
    fn trapping_theta_values() {
        assert!((trapping_theta(25.0, 1, 3).unwrap() - 2.5 * PI).abs() < 1e-12);
        assert!((trapping_theta(25.0, 2, 3).unwrap() - 5.0 * PI).abs() < 1e-12);
        assert!((trapping_theta(16.0, 1, 0).unwrap() - 4.0 * PI).abs() < 1e-12);
        assert!(trapping_theta(0.0, 1, 0).is_err());
        assert!(trapping_theta(25.0, 0, 0).is_err());
    }

    #[test]
    fn fock_and_thermal_metrics() {
        let m = metrics(&PhotonDistribution::fock(3, 10).unwrap());
        assert_eq!(m.mean, 3.0);
        assert_eq!(m.fano, Some(0.0));

        let m = metrics(&PhotonDistribution::thermal(0.1, 80).unwrap());
        assert!((m.mean - 0.1).abs() < 1e-12);
        assert!((m.fano.unwrap() - 1.1).abs() < 1e-9);
    }

    #[test]
    fn fidelity_examples() {
        let p = steady_state(&table_params(2.18), 40).unwrap();
        assert!((fidelity(&p, &p) - 1.0).abs() < 1e-12);
        let a = PhotonDistribution::fock(0, 5).unwrap();
        let b = PhotonDistribution::fock(5, 5).unwrap();
        assert_eq!(fidelity(&a, &b), 0.0);
        let u = PhotonDistribution::uniform(1);
        let d = PhotonDistribution::fock(0, 1).unwrap();
        assert!((fidelity(&u, &d) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(MaserParams::new(0.0, 0.0, 1.0).is_err());
        assert!(MaserParams::new(1.0, -0.1, 1.0).is_err());
        assert!(MaserParams::new(1.0, 0.0, -1.0).is_err());
        assert!(MaserParams::new(f64::NAN, 0.0, 1.0).is_err());
        assert!(PhotonDistribution::new(vec![0.5, -0.1]).is_err());
        assert!(PhotonDistribution::new(vec![0.0, 0.0]).is_err());
    }
}
