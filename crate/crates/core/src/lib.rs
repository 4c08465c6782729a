//! Micromaser photon statistics and their reconstruction from probe atoms.
//!
//! * [`photon`]: closed-form steady state, trapping condition, moments, fidelity.
//! * [`kernel`]: interaction-time grid and the probe-atom excitation kernel.
//! * [`experiment`]: seeded Monte Carlo detection counts.
//! * [`em`]: log-likelihood and the expectation-maximization inversion.
//! * [`harness`]: simulate/reconstruct pipelines, repeats and sweeps.
//! * [`format`] and [`cli`]: file formats and the `micromaser` command.

pub mod cli;
pub mod em;
pub mod error;
pub mod experiment;
pub mod format;
pub mod harness;
pub mod kernel;
pub mod photon;

pub use em::{em_step, log_likelihood, reconstruct, stationarity, EmConfig, Init, ReconstructionResult};
pub use error::{Error, Result};
pub use experiment::{from_counts, simulate, MeasurementSet};
pub use harness::{run_pipeline, run_repeats, run_sweep, ExperimentSpec, Preset, SweepAxis, SweepReport};
pub use kernel::{build_kernel, excited_probability, KernelMatrix, TauGrid};
pub use photon::{
    fidelity, metrics, steady_state, steady_state_with, trapping_theta, DistributionMetrics, MaserParams,
    PhotonDistribution, TruncationCheck,
};
