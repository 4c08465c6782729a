//! Maximum-likelihood photon-number reconstruction by expectation-maximization.
//!
//! The data are the excited fractions `f_k` at each interaction time. The
//! log-likelihood of a candidate distribution `p` uses the normalized model
//! probabilities,
//!
//! ```text
//! L(p) = sum_k f_k ln( P_k / sum_m P_m ),   P_k = sum_n c[k][n] p_n,
//! ```
//!
//! and the multiplicative update
//!
//! ```text
//! p'_n = p_n / (sum_m p_m) * sum_k c[k][n] / (sum_l c[l][n]) * f_k / P_k
//! ```
//!
//! increases `L` monotonically. Iterates are renormalized after every step;
//! the update only depends on the direction of `p`, so this leaves the fixed
//! points and the likelihood trace unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::photon::PhotonDistribution;

pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_FLOOR_EPSILON: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// `p_n = 1 / (trunc + 1)`.
    #[default]
    Uniform,
    /// Strictly positive, normalized starting point.
    Custom(PhotonDistribution),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iterations: usize,
    pub init: Init,
    /// Stop once an iteration gains less log-likelihood than this; `0` disables.
    pub stop_tolerance: f64,
    /// Floor applied to model probabilities and column sums before dividing.
    pub floor_epsilon: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_ITERATIONS,
            init: Init::Uniform,
            stop_tolerance: 0.0,
            floor_epsilon: DEFAULT_FLOOR_EPSILON,
        }
    }
}

impl EmConfig {
    pub fn with_iterations(max_iterations: usize) -> Self {
        Self {
            max_iterations,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stop_tolerance.is_finite() && self.stop_tolerance >= 0.0) {
            return Err(Error::param(format!(
                "stop tolerance must be nonnegative, got {}",
                self.stop_tolerance
            )));
        }
        if !(self.floor_epsilon.is_finite() && self.floor_epsilon > 0.0) {
            return Err(Error::param(format!(
                "floor epsilon must be positive, got {}",
                self.floor_epsilon
            )));
        }
        if let Init::Custom(p) = &self.init {
            if let Some(n) = p.probs().iter().position(|&v| v <= 0.0) {
                return Err(Error::InvalidInit(format!("entry {n} is not strictly positive")));
            }
            let total: f64 = p.probs().iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInit(format!("entries sum to {total}, not 1")));
            }
        }
        Ok(())
    }

    fn initial(&self, truncation: usize) -> Result<PhotonDistribution> {
        match &self.init {
            Init::Uniform => Ok(PhotonDistribution::uniform(truncation)),
            Init::Custom(p) if p.truncation() == truncation => Ok(p.clone()),
            Init::Custom(p) => Err(Error::IncompatibleTruncation {
                expected: truncation + 1,
                found: p.len(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub estimate: PhotonDistribution,
    pub iterations_run: usize,
    /// Log-likelihood after each iteration.
    pub loglik_trace: Vec<f64>,
    pub converged_early: bool,
    /// `max_n |T p_n - p_n|` at the returned estimate.
    pub residual: f64,
    /// Photon numbers whose kernel column vanished and had to be floored.
    pub degenerate_columns: Vec<usize>,
}

impl ReconstructionResult {
    pub fn final_loglik(&self) -> Option<f64> {
        self.loglik_trace.last().copied()
    }
}

fn check_freqs(kernel: &KernelMatrix, freqs: &[f64]) -> Result<()> {
    if freqs.len() != kernel.rows() {
        return Err(Error::LengthMismatch {
            expected: kernel.rows(),
            found: freqs.len(),
        });
    }
    if let Some((k, f)) = freqs.iter().enumerate().find(|(_, f)| !(f.is_finite() && **f >= 0.0)) {
        return Err(Error::param(format!(
            "frequency {k} is {f}, must be finite and nonnegative"
        )));
    }
    Ok(())
}

/// Log-likelihood from precomputed model probabilities.
fn loglik_from_model(model: &[f64], freqs: &[f64]) -> f64 {
    let total: f64 = model.iter().sum();
    let mut acc = 0.0;
    for (&pk, &fk) in model.iter().zip(freqs) {
        if fk == 0.0 {
            continue;
        }
        if pk <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += fk * (pk / total).ln();
    }
    acc
}

/// `L(p)`; returns negative infinity when data fall where the model has no weight.
pub fn log_likelihood(kernel: &KernelMatrix, freqs: &[f64], p: &PhotonDistribution) -> Result<f64> {
    kernel.check_distribution(p)?;
    check_freqs(kernel, freqs)?;
    Ok(loglik_from_model(&kernel.forward(p.probs()), freqs))
}

/// One multiplicative update given the model probabilities of `p`.
fn update(kernel: &KernelMatrix, freqs: &[f64], p: &[f64], model: &[f64], eps: f64) -> Vec<f64> {
    let ratios: Vec<f64> = freqs
        .iter()
        .zip(model)
        .map(|(&f, &pk)| if f == 0.0 { 0.0 } else { f / pk.max(eps) })
        .collect();
    let back = kernel.backward(&ratios);
    let mass: f64 = p.iter().sum();
    let mut next: Vec<f64> = p
        .iter()
        .zip(back)
        .zip(kernel.column_sums())
        .map(|((&pn, b), &s)| pn / mass * b / s.max(eps))
        .collect();
    let total: f64 = next.iter().sum();
    if total > 0.0 && total.is_finite() {
        next.iter_mut().for_each(|v| *v /= total);
        next
    } else {
        // no data weight anywhere: the likelihood is flat, keep the iterate
        p.iter().map(|v| v / mass).collect()
    }
}

/// Single EM update `p -> T p`, renormalized.
pub fn em_step(kernel: &KernelMatrix, freqs: &[f64], p: &PhotonDistribution) -> Result<PhotonDistribution> {
    kernel.check_distribution(p)?;
    check_freqs(kernel, freqs)?;
    let model = kernel.forward(p.probs());
    Ok(PhotonDistribution::from_normalized(update(
        kernel,
        freqs,
        p.probs(),
        &model,
        DEFAULT_FLOOR_EPSILON,
    )))
}

/// Left-hand side of the likelihood stationarity condition for each photon number,
///
/// ```text
/// (sum_l P_l / sum_l f_l) * sum_k c[k][n] / (sum_m c[m][n]) * f_k / P_k,
/// ```
///
/// which equals one at an interior maximum.
pub fn stationarity(kernel: &KernelMatrix, freqs: &[f64], p: &PhotonDistribution) -> Result<Vec<f64>> {
    kernel.check_distribution(p)?;
    check_freqs(kernel, freqs)?;
    let model = kernel.forward(p.probs());
    let scale = model.iter().sum::<f64>() / freqs.iter().sum::<f64>();
    let ratios: Vec<f64> = freqs
        .iter()
        .zip(&model)
        .map(|(&f, &pk)| {
            if f == 0.0 {
                0.0
            } else {
                f / pk.max(DEFAULT_FLOOR_EPSILON)
            }
        })
        .collect();
    Ok(kernel
        .backward(&ratios)
        .into_iter()
        .zip(kernel.column_sums())
        .map(|(b, &s)| scale * b / s.max(DEFAULT_FLOOR_EPSILON))
        .collect())
}

/// Iterates [`em_step`] from the configured initial distribution.
pub fn reconstruct(kernel: &KernelMatrix, freqs: &[f64], config: &EmConfig) -> Result<ReconstructionResult> {
    config.validate()?;
    check_freqs(kernel, freqs)?;
    let eps = config.floor_epsilon;
    let degenerate_columns = kernel.degenerate_columns();
    if !degenerate_columns.is_empty() {
        log::warn!("kernel columns {degenerate_columns:?} vanish on every grid point");
    }

    let mut p = config.initial(kernel.truncation())?.into_probs();
    let mut model = kernel.forward(&p);
    let mut previous = loglik_from_model(&model, freqs);
    let mut trace = Vec::with_capacity(config.max_iterations);
    let mut converged_early = false;

    for _ in 0..config.max_iterations {
        p = update(kernel, freqs, &p, &model, eps);
        model = kernel.forward(&p);
        let current = loglik_from_model(&model, freqs);
        debug_assert!(
            current >= previous - 1e-10 || current.is_nan(),
            "log-likelihood decreased: {previous} -> {current}"
        );
        trace.push(current);
        if config.stop_tolerance > 0.0 && current - previous < config.stop_tolerance {
            converged_early = true;
            break;
        }
        previous = current;
    }

    let next = update(kernel, freqs, &p, &model, eps);
    let residual = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    Ok(ReconstructionResult {
        estimate: PhotonDistribution::from_normalized(p),
        iterations_run: trace.len(),
        loglik_trace: trace,
        converged_early,
        residual,
        degenerate_columns,
    })
}
