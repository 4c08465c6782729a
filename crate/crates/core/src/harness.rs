//! End-to-end simulated experiments: simulate, reconstruct, compare.
//!
//! Repeated experiments draw their seeds from [`derive_seed`], so every job
//! is a pure function of the base spec and its repeat index. Jobs run on the
//! ambient rayon pool and results are collected in index order, which makes
//! reports bit-identical for any thread count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::em::{reconstruct, EmConfig, ReconstructionResult};
use crate::error::{Error, Result};
use crate::experiment::{simulate, splitmix64, MeasurementSet};
use crate::kernel::{KernelMatrix, TauGrid};
use crate::photon::{fidelity, steady_state, DistributionMetrics, MaserParams, PhotonDistribution};

pub const DEFAULT_REPEATS: usize = 100;

/// Named parameter sets for the standard regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Trapping state, `theta = 2.5 pi`.
    Ts,
    /// Maximum amplification, `theta = 0.5 pi`.
    Ma,
    /// Double-peaked, `theta = 2.18 pi`.
    Dp,
    /// Double-peaked with 41 times, 30 shots, 50 iterations.
    ReducedText,
    /// Double-peaked with 51 times, 70 shots, 300 iterations, truncation 25.
    ReducedCaption,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Ts,
        Preset::Ma,
        Preset::Dp,
        Preset::ReducedText,
        Preset::ReducedCaption,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Ts => "ts",
            Preset::Ma => "ma",
            Preset::Dp => "dp",
            Preset::ReducedText => "reduced-text",
            Preset::ReducedCaption => "reduced-caption",
        }
    }

    pub fn theta_over_pi(self) -> f64 {
        match self {
            Preset::Ts => 2.5,
            Preset::Ma => 0.5,
            Preset::Dp | Preset::ReducedText | Preset::ReducedCaption => 2.18,
        }
    }

    pub fn spec(self) -> ExperimentSpec {
        let params = MaserParams {
            n_ex: 25.0,
            n_th: 1e-5,
            theta: self.theta_over_pi() * std::f64::consts::PI,
        };
        let full = |truncation| ExperimentSpec {
            params,
            grid: TauGrid::default(),
            truncation,
            shots_per_tau: 200,
            em: EmConfig::with_iterations(1000),
            seed: 0,
            repeats: DEFAULT_REPEATS,
        };
        let reduced = |n_tau, shots, iterations, truncation| ExperimentSpec {
            grid: TauGrid {
                n_tau,
                ..TauGrid::default()
            },
            shots_per_tau: shots,
            em: EmConfig::with_iterations(iterations),
            ..full(truncation)
        };
        match self {
            Preset::Ts | Preset::Dp => full(30),
            Preset::Ma => full(50),
            Preset::ReducedText => reduced(40, 30, 50, 30),
            Preset::ReducedCaption => reduced(50, 70, 300, 25),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::param(format!("unknown preset '{s}'")))
    }
}

/// Everything needed to reproduce one simulated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub params: MaserParams,
    pub grid: TauGrid,
    pub truncation: usize,
    pub shots_per_tau: u32,
    pub em: EmConfig,
    pub seed: u64,
    pub repeats: usize,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.grid.validate()?;
        self.em.validate()?;
        if self.shots_per_tau == 0 {
            return Err(Error::param("shots per interaction time must be at least 1"));
        }
        if self.repeats == 0 {
            return Err(Error::param("repeats must be at least 1"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Seed of repeat `index` derived from a base seed (splitmix64 of the base,
/// offset by the index times the golden-ratio increment).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut state = base ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    splitmix64(&mut state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub fidelity: f64,
    pub truth: DistributionMetrics,
    pub estimate: DistributionMetrics,
    pub iterations_run: usize,
    pub final_loglik: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub truth: PhotonDistribution,
    pub measurements: MeasurementSet,
    pub reconstruction: ReconstructionResult,
    pub report: PipelineReport,
}

/// Simulates data from `spec`, reconstructs it and compares with the truth
/// on the same truncation.
pub fn run_pipeline(spec: &ExperimentSpec) -> Result<PipelineOutcome> {
    spec.validate()?;
    let truth = steady_state(&spec.params, spec.truncation)?;
    let measurements = simulate(&spec.params, &spec.grid, spec.truncation, spec.shots_per_tau, spec.seed)?;
    let kernel = KernelMatrix::new(&spec.grid, spec.truncation)?;
    let reconstruction = reconstruct(&kernel, &measurements.frequencies, &spec.em)?;
    let report = PipelineReport {
        fidelity: fidelity(&truth, &reconstruction.estimate),
        truth: truth.metrics(),
        estimate: reconstruction.estimate.metrics(),
        iterations_run: reconstruction.iterations_run,
        final_loglik: reconstruction.final_loglik(),
    };
    Ok(PipelineOutcome {
        truth,
        measurements,
        reconstruction,
        report,
    })
}

/// Fidelities of `spec.repeats` independent runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub seeds: Vec<u64>,
    pub fidelities: Vec<f64>,
    pub mean: f64,
    pub stddev: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

pub fn run_repeats(spec: &ExperimentSpec) -> Result<RepeatSummary> {
    spec.validate()?;
    let seeds: Vec<u64> = (0..spec.repeats as u64).map(|i| derive_seed(spec.seed, i)).collect();
    let fidelities = seeds
        .par_iter()
        .map(|&seed| run_pipeline(&spec.with_seed(seed)).map(|o| o.report.fidelity))
        .collect::<Result<Vec<_>>>()?;
    let (mean, stddev) = mean_stddev(&fidelities);
    Ok(RepeatSummary {
        mean,
        stddev,
        median: median(&fidelities),
        min: fidelities.iter().copied().fold(f64::INFINITY, f64::min),
        max: fidelities.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        seeds,
        fidelities,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NTau,
    ShotsPerTau,
    Iterations,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::NTau => "n-tau",
            SweepAxis::ShotsPerTau => "shots",
            SweepAxis::Iterations => "iterations",
        }
    }

    /// Copy of `base` with this axis set to `value`.
    pub fn apply(self, base: &ExperimentSpec, value: u64) -> Result<ExperimentSpec> {
        let mut spec = base.clone();
        match self {
            SweepAxis::NTau => spec.grid.n_tau = value as usize,
            SweepAxis::ShotsPerTau => {
                spec.shots_per_tau =
                    u32::try_from(value).map_err(|_| Error::param(format!("shots value {value} out of range")))?
            }
            SweepAxis::Iterations => spec.em.max_iterations = value as usize,
        }
        Ok(spec)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n-tau" | "n_tau" => Ok(SweepAxis::NTau),
            "shots" | "shots-per-tau" | "shots_per_tau" => Ok(SweepAxis::ShotsPerTau),
            "iterations" => Ok(SweepAxis::Iterations),
            _ => Err(Error::param(format!("unknown sweep axis '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub axis_values: Vec<u64>,
    pub fidelity_mean: Vec<f64>,
    pub fidelity_stddev: Vec<f64>,
    pub repeats: Vec<usize>,
}

/// Runs `repeats` pipelines at each axis value. Repeat `i` uses
/// `derive_seed(base.seed, i)` at every axis value, so points along the
/// iterations axis share their data.
pub fn run_sweep(base: &ExperimentSpec, axis: SweepAxis, values: &[u64], repeats: usize) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::InvalidSweep("no axis values given".into()));
    }
    if let Some(w) = values.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSweep(format!(
            "axis values must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    if repeats == 0 {
        return Err(Error::InvalidSweep("repeats must be at least 1".into()));
    }
    let specs = values
        .iter()
        .map(|&v| {
            let spec = axis.apply(base, v)?;
            spec.validate()?;
            Ok(spec)
        })
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, u64)> = (0..specs.len())
        .flat_map(|point| (0..repeats as u64).map(move |i| (point, i)))
        .collect();
    let fidelities = jobs
        .par_iter()
        .map(|&(point, i)| {
            let spec = specs[point].with_seed(derive_seed(base.seed, i));
            run_pipeline(&spec).map(|o| o.report.fidelity)
        })
        .collect::<Result<Vec<_>>>()?;

    let (fidelity_mean, fidelity_stddev) = fidelities.chunks_exact(repeats).map(mean_stddev).unzip();
    Ok(SweepReport {
        axis,
        axis_values: values.to_vec(),
        fidelity_mean,
        fidelity_stddev,
        repeats: vec![repeats; values.len()],
    })
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_stddev(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Ranks starting at 1, ties share their average rank.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; `NaN` if either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, _) = mean_stddev(&rx);
    let (my, _) = mean_stddev(&ry);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
