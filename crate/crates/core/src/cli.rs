//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 numeric or validation failure.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::em::{reconstruct, EmConfig};
use crate::error::{Error, Result};
use crate::experiment::simulate;
use crate::format::{
    read_experiment, read_manifest, write_distribution, write_experiment, write_measurements, write_preamble,
    write_reconstruction_tables, write_summary, write_sweep, Invocation, MeasurementHeader, ReconstructionSummary,
    RunManifest, SteadyStateSummary,
};
use crate::harness::{run_pipeline, run_sweep, ExperimentSpec, Preset};
use crate::kernel::{excited_probability, KernelMatrix, TauGrid};
use crate::photon::{
    fidelity, metrics, steady_state, steady_state_with, tail_ratio, MaserParams, TruncationCheck,
    DEFAULT_TAIL_THRESHOLD, DEFAULT_TRUNCATION,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "micromaser",
    version,
    about = "Micromaser photon statistics: simulate probe-atom data and reconstruct it by EM"
)]
pub struct Cli {
    /// Worker threads for repeated experiments (0 = all cores). Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    /// Record the wall-clock time in the manifest (makes the file non-reproducible byte-for-byte).
    #[arg(long, global = true)]
    pub stamp: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form steady-state photon distribution.
    SteadyState {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
        trunc: usize,
        /// Largest accepted ratio of the first omitted term to the peak.
        #[arg(long, default_value_t = DEFAULT_TAIL_THRESHOLD)]
        tail_threshold: f64,
        /// Warn instead of failing when the truncation is too small.
        #[arg(long)]
        lenient: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Simulate probe-atom detection counts.
    Simulate {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Reconstruct the photon distribution from an experiment file.
    Reconstruct {
        input: PathBuf,
        #[arg(long, default_value_t = crate::em::DEFAULT_ITERATIONS)]
        iterations: usize,
        /// Stop early when an iteration gains less log-likelihood than this (0 disables).
        #[arg(long, default_value_t = 0.0)]
        tolerance: f64,
        /// Photon-number truncation (default: the one recorded in the file, else 50).
        #[arg(long)]
        trunc: Option<usize>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Simulate and reconstruct in one run.
    Pipeline {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Fidelity statistics over repeated experiments along one parameter axis.
    Sweep {
        #[command(flatten)]
        spec: SpecArgs,
        /// One of n-tau, shots, iterations.
        #[arg(long)]
        axis: String,
        /// Comma-separated, strictly increasing axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<u64>,
        #[arg(long, default_value_t = crate::harness::DEFAULT_REPEATS)]
        repeats: usize,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Regenerate an output file from its embedded manifest.
    Rerun {
        manifest_file: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    #[arg(long, default_value_t = 25.0)]
    pub n_ex: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub n_th: f64,
    /// Pump parameter in units of pi.
    #[arg(long, allow_negative_numbers = true)]
    pub theta_pi: f64,
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    /// Start from a named parameter set (ts, ma, dp, reduced-text, reduced-caption).
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub n_ex: Option<f64>,
    #[arg(long)]
    pub n_th: Option<f64>,
    /// Pump parameter in units of pi.
    #[arg(long, allow_negative_numbers = true)]
    pub theta_pi: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tau_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tau_max: Option<f64>,
    /// Number of grid intervals (the grid has n_tau + 1 points).
    #[arg(long)]
    pub n_tau: Option<usize>,
    #[arg(long)]
    pub trunc: Option<usize>,
    /// Probe atoms per interaction time.
    #[arg(long)]
    pub shots: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

impl SpecArgs {
    /// Preset (if any) overridden by explicit flags.
    pub fn resolve(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.preset {
            Some(name) => name.parse::<Preset>()?.spec(),
            None => {
                let theta_pi = self
                    .theta_pi
                    .ok_or_else(|| Error::param("either --preset or --theta-pi is required"))?;
                ExperimentSpec {
                    params: MaserParams {
                        n_ex: 25.0,
                        n_th: 1e-5,
                        theta: theta_pi * std::f64::consts::PI,
                    },
                    grid: TauGrid::default(),
                    truncation: DEFAULT_TRUNCATION,
                    shots_per_tau: 200,
                    em: EmConfig::default(),
                    seed: 0,
                    repeats: crate::harness::DEFAULT_REPEATS,
                }
            }
        };
        if let Some(v) = self.n_ex {
            spec.params.n_ex = v;
        }
        if let Some(v) = self.n_th {
            spec.params.n_th = v;
        }
        if let Some(v) = self.theta_pi {
            spec.params.theta = v * std::f64::consts::PI;
        }
        if let Some(v) = self.tau_min {
            spec.grid.tau_min = v;
        }
        if let Some(v) = self.tau_max {
            spec.grid.tau_max = v;
        }
        if let Some(v) = self.n_tau {
            spec.grid.n_tau = v;
        }
        if let Some(v) = self.trunc {
            spec.truncation = v;
        }
        if let Some(v) = self.shots {
            spec.shots_per_tau = v;
        }
        if let Some(v) = self.seed {
            spec.seed = v;
        }
        if let Some(v) = self.iterations {
            spec.em.max_iterations = v;
        }
        if let Some(v) = self.tolerance {
            spec.em.stop_tolerance = v;
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_FAILURE
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let invocation = resolve(cli.command_ref())?;
    let output = cli.output().map(Path::to_path_buf);
    let mut manifest = RunManifest::new(invocation);
    if cli.stamp {
        manifest = manifest.stamped();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Error::param(format!("cannot start worker pool: {e}")))?;
    let bytes = pool.install(|| execute(&manifest))?;
    match output {
        Some(path) => fs::write(path, bytes)?,
        None => io::stdout().lock().write_all(&bytes)?,
    }
    Ok(())
}

impl Cli {
    fn command_ref(&self) -> &Command {
        &self.command
    }

    fn output(&self) -> Option<&Path> {
        match &self.command {
            Command::SteadyState { output, .. }
            | Command::Simulate { output, .. }
            | Command::Reconstruct { output, .. }
            | Command::Pipeline { output, .. }
            | Command::Sweep { output, .. }
            | Command::Rerun { output, .. } => output.as_deref(),
        }
    }
}

/// Turns parsed arguments into a fully resolved invocation.
fn resolve(command: &Command) -> Result<Invocation> {
    Ok(match command {
        Command::SteadyState {
            params,
            trunc,
            tail_threshold,
            lenient,
            ..
        } => Invocation::SteadyState {
            params: MaserParams::with_theta_pi(params.n_ex, params.n_th, params.theta_pi)?,
            truncation: *trunc,
            tail_threshold: *tail_threshold,
            strict: !lenient,
        },
        Command::Simulate { spec, .. } => {
            let spec = spec.resolve()?;
            Invocation::Simulate {
                params: spec.params,
                grid: spec.grid,
                truncation: spec.truncation,
                shots_per_tau: spec.shots_per_tau,
                seed: spec.seed,
            }
        }
        Command::Reconstruct {
            input,
            iterations,
            tolerance,
            trunc,
            ..
        } => {
            let text = fs::read_to_string(input)?;
            let (header, _) = read_experiment(&text)?;
            let em = EmConfig {
                max_iterations: *iterations,
                stop_tolerance: *tolerance,
                ..EmConfig::default()
            };
            em.validate()?;
            Invocation::Reconstruct {
                input: input.display().to_string(),
                truncation: trunc.or(header.truncation).unwrap_or(DEFAULT_TRUNCATION),
                em,
            }
        }
        Command::Pipeline { spec, .. } => Invocation::Pipeline { spec: spec.resolve()? },
        Command::Sweep {
            spec,
            axis,
            values,
            repeats,
            ..
        } => {
            let base = spec.resolve()?;
            Invocation::Sweep {
                base,
                axis: axis.parse()?,
                values: values.clone(),
                repeats: *repeats,
            }
        }
        Command::Rerun { manifest_file, .. } => {
            let text = fs::read_to_string(manifest_file)?;
            read_manifest(&text)?.invocation
        }
    })
}

/// Produces the complete output file for a manifest.
pub fn execute(manifest: &RunManifest) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    match &manifest.invocation {
        Invocation::SteadyState {
            params,
            truncation,
            tail_threshold,
            strict,
        } => {
            let check = TruncationCheck {
                threshold: *tail_threshold,
                strict: *strict,
            };
            let p = steady_state_with(params, *truncation, check)?;
            let m = metrics(&p);
            write_preamble(&mut out, manifest)?;
            write_distribution(&mut out, &p, None)?;
            write_summary(
                &mut out,
                &SteadyStateSummary {
                    mean: m.mean,
                    variance: m.variance,
                    fano: m.fano,
                    tail_ratio: tail_ratio(params, *truncation),
                },
            )?;
        }
        Invocation::Simulate {
            params,
            grid,
            truncation,
            shots_per_tau,
            seed,
        } => {
            let set = simulate(params, grid, *truncation, *shots_per_tau, *seed)?;
            write_experiment(&mut out, manifest, &set, Some(*truncation))?;
        }
        Invocation::Reconstruct { input, truncation, em } => {
            let text = fs::read_to_string(input)?;
            let (header, set) = read_experiment(&text)?;
            let kernel = KernelMatrix::new(&set.grid, *truncation)?;
            let result = reconstruct(&kernel, &set.frequencies, em)?;
            let truth = set.truth.map(|params| steady_state(&params, *truncation)).transpose()?;
            let fitted = excited_probability(&kernel, &result.estimate)?;
            write_preamble(&mut out, manifest)?;
            writeln!(out, "# measurement: {}", serde_json::to_string(&header)?)?;
            write_reconstruction_tables(&mut out, &result, truth.as_ref(), &set, &fitted)?;
            write_summary(
                &mut out,
                &ReconstructionSummary {
                    iterations_run: result.iterations_run,
                    converged_early: result.converged_early,
                    final_loglik: result.final_loglik(),
                    residual: result.residual,
                    estimate: result.estimate.metrics(),
                    truth: truth.as_ref().map(metrics),
                    fidelity: truth.as_ref().map(|t| fidelity(t, &result.estimate)),
                },
            )?;
        }
        Invocation::Pipeline { spec } => {
            let outcome = run_pipeline(spec)?;
            let kernel = KernelMatrix::new(&spec.grid, spec.truncation)?;
            let fitted = excited_probability(&kernel, &outcome.reconstruction.estimate)?;
            write_preamble(&mut out, manifest)?;
            writeln!(
                out,
                "# measurement: {}",
                serde_json::to_string(&MeasurementHeader::of(&outcome.measurements, Some(spec.truncation)))?
            )?;
            writeln!(out, "## measurements")?;
            write_measurements(&mut out, &outcome.measurements)?;
            write_reconstruction_tables(
                &mut out,
                &outcome.reconstruction,
                Some(&outcome.truth),
                &outcome.measurements,
                &fitted,
            )?;
            let r = &outcome.reconstruction;
            write_summary(
                &mut out,
                &ReconstructionSummary {
                    iterations_run: r.iterations_run,
                    converged_early: r.converged_early,
                    final_loglik: r.final_loglik(),
                    residual: r.residual,
                    estimate: outcome.report.estimate,
                    truth: Some(outcome.report.truth),
                    fidelity: Some(outcome.report.fidelity),
                },
            )?;
        }
        Invocation::Sweep {
            base,
            axis,
            values,
            repeats,
        } => {
            let report = run_sweep(base, *axis, values, *repeats)?;
            write_sweep(&mut out, manifest, &report)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("micromaser").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn preset_with_overrides() {
        let cli = parse(&["pipeline", "--preset", "dp", "--shots", "70", "--seed", "9"]);
        let Command::Pipeline { spec, .. } = cli.command else {
            unreachable!()
        };
        let spec = spec.resolve().unwrap();
        assert_eq!(spec.shots_per_tau, 70);
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.truncation, 30);
        assert!((spec.params.theta - 2.18 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn missing_theta_is_usage_error() {
        let cli = parse(&["simulate"]);
        let Command::Simulate { spec, .. } = cli.command else {
            unreachable!()
        };
        assert!(spec.resolve().unwrap_err().is_usage());
    }

    #[test]
    fn steady_state_output_has_summary() {
        let manifest = RunManifest::new(Invocation::SteadyState {
            params: MaserParams::with_theta_pi(25.0, 1e-5, 2.5).unwrap(),
            truncation: 30,
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
            strict: true,
        });
        let text = String::from_utf8(execute(&manifest).unwrap()).unwrap();
        let summary = crate::format::read_summary(&text).unwrap();
        assert!((summary["mean"].as_f64().unwrap() - 2.52).abs() < 0.01);
        assert!((summary["fano"].as_f64().unwrap() - 0.22).abs() < 0.01);
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 32);
    }
}
