//! Probe-atom forward model.
//!
//! An excited probe atom interacting with an `n`-photon field for a scaled
//! time `tau` stays excited with probability `(1 + cos(tau sqrt(n + 1))) / 2`.
//! Averaging over the photon distribution gives the excited-state
//! probability at each interaction time on the grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photon::PhotonDistribution;

/// Default shortest interaction time.
pub const DEFAULT_TAU_MIN: f64 = 0.5;
/// Default longest interaction time, calibrated against reconstruction fidelity.
pub const DEFAULT_TAU_MAX: f64 = 7.5;
pub const DEFAULT_N_TAU: usize = 200;

/// Uniform grid of `n_tau + 1` interaction times from `tau_min` to `tau_max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauGrid {
    pub tau_min: f64,
    pub tau_max: f64,
    pub n_tau: usize,
}

impl TauGrid {
    pub fn new(tau_min: f64, tau_max: f64, n_tau: usize) -> Result<Self> {
        let grid = Self {
            tau_min,
            tau_max,
            n_tau,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_min.is_finite() && self.tau_min > 0.0) {
            return Err(Error::param(format!("tau_min must be positive, got {}", self.tau_min)));
        }
        if !(self.tau_max.is_finite() && self.tau_max > self.tau_min) {
            return Err(Error::param(format!(
                "tau_max ({}) must exceed tau_min ({})",
                self.tau_max, self.tau_min
            )));
        }
        if self.n_tau == 0 {
            return Err(Error::param("n_tau must be at least 1"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_tau + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, k: usize) -> f64 {
        if k == self.n_tau {
            return self.tau_max;
        }
        self.tau_min + k as f64 * (self.tau_max - self.tau_min) / self.n_tau as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }
}

impl Default for TauGrid {
    fn default() -> Self {
        Self {
            tau_min: DEFAULT_TAU_MIN,
            tau_max: DEFAULT_TAU_MAX,
            n_tau: DEFAULT_N_TAU,
        }
    }
}

/// Excited-state probability of a probe atom after time `tau` with `n` photons present.
#[inline]
pub fn excitation_coefficient(tau: f64, n: usize) -> f64 {
    0.5 * (1.0 + (tau * ((n + 1) as f64).sqrt()).cos())
}

/// Dense matrix `c[k][n]`, rows indexed by interaction time, columns by photon number.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    times: Vec<f64>,
    grid: Option<TauGrid>,
    cols: usize,
    entries: Vec<f64>,
    col_sums: Vec<f64>,
}

impl KernelMatrix {
    pub fn new(grid: &TauGrid, truncation: usize) -> Result<Self> {
        grid.validate()?;
        let mut kernel = Self::from_times(grid.points(), truncation)?;
        kernel.grid = Some(*grid);
        Ok(kernel)
    }

    /// Kernel on an arbitrary list of nonnegative interaction times.
    pub fn from_times(times: Vec<f64>, truncation: usize) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::param("at least one interaction time is required"));
        }
        if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::param(format!(
                "interaction time {t} must be finite and nonnegative"
            )));
        }
        let cols = truncation + 1;
        let entries: Vec<f64> = times
            .iter()
            .flat_map(|&tau| (0..cols).map(move |n| excitation_coefficient(tau, n)))
            .collect();
        let mut col_sums = vec![0.0; cols];
        for row in entries.chunks_exact(cols) {
            for (s, c) in col_sums.iter_mut().zip(row) {
                *s += c;
            }
        }
        Ok(Self {
            times,
            grid: None,
            cols,
            entries,
            col_sums,
        })
    }

    pub fn rows(&self) -> usize {
        self.times.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn truncation(&self) -> usize {
        self.cols - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn grid(&self) -> Option<&TauGrid> {
        self.grid.as_ref()
    }

    pub fn get(&self, k: usize, n: usize) -> f64 {
        self.entries[k * self.cols + n]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.entries[k * self.cols..(k + 1) * self.cols]
    }

    /// `sum_k c[k][n]` for each photon number.
    pub fn column_sums(&self) -> &[f64] {
        &self.col_sums
    }

    /// Photon numbers whose column vanishes on every grid point.
    pub fn degenerate_columns(&self) -> Vec<usize> {
        self.col_sums
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= 0.0)
            .map(|(n, _)| n)
            .collect()
    }

    /// `C x` for an arbitrary weight vector of length `cols`.
    pub(crate) fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.entries
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(c, p)| c * p).sum())
            .collect()
    }

    /// `C^T y` for a vector of length `rows`.
    pub(crate) fn backward(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows());
        let mut out = vec![0.0; self.cols];
        for (row, &w) in self.entries.chunks_exact(self.cols).zip(y) {
            if w == 0.0 {
                continue;
            }
            for (o, c) in out.iter_mut().zip(row) {
                *o += c * w;
            }
        }
        out
    }

    pub(crate) fn check_distribution(&self, p: &PhotonDistribution) -> Result<()> {
        if p.len() != self.cols {
            return Err(Error::IncompatibleTruncation {
                expected: self.cols,
                found: p.len(),
            });
        }
        Ok(())
    }
}

pub fn build_kernel(grid: &TauGrid, truncation: usize) -> Result<KernelMatrix> {
    KernelMatrix::new(grid, truncation)
}

/// Probability `P_k = sum_n c[k][n] p_n` of finding the probe atom excited at each grid time.
pub fn excited_probability(kernel: &KernelMatrix, p: &PhotonDistribution) -> Result<Vec<f64>> {
    kernel.check_distribution(p)?;
    Ok(kernel.forward(p.probs()))
}
