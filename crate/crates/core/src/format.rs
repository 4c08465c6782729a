//! Text file formats shared by the command-line tool.
//!
//! Every file starts with a `# micromaser <kind> v1` line followed by a
//! `# manifest: {json}` line describing how it was produced. Metadata lines
//! start with `#`; tables are comma-separated with a header row; multi-table
//! files introduce each table with a `## <name>` line. A closing
//! `# summary: {json}` line carries the machine-readable results. Floats are
//! written in their shortest round-trip form.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::em::{EmConfig, ReconstructionResult};
use crate::error::{Error, Result};
use crate::experiment::{from_counts, MeasurementSet, RNG_ALGORITHM};
use crate::harness::{ExperimentSpec, SweepAxis, SweepReport};
use crate::kernel::TauGrid;
use crate::photon::{DistributionMetrics, MaserParams, PhotonDistribution};

pub const FORMAT_VERSION: &str = "v1";
const MANIFEST_PREFIX: &str = "# manifest: ";
const MEASUREMENT_PREFIX: &str = "# measurement: ";
const SUMMARY_PREFIX: &str = "# summary: ";

/// Fully resolved command, sufficient to regenerate an output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Invocation {
    SteadyState {
        params: MaserParams,
        truncation: usize,
        tail_threshold: f64,
        strict: bool,
    },
    Simulate {
        params: MaserParams,
        grid: TauGrid,
        truncation: usize,
        shots_per_tau: u32,
        seed: u64,
    },
    Reconstruct {
        input: String,
        truncation: usize,
        em: EmConfig,
    },
    Pipeline {
        spec: ExperimentSpec,
    },
    Sweep {
        base: ExperimentSpec,
        axis: SweepAxis,
        values: Vec<u64>,
        repeats: usize,
    },
}

impl Invocation {
    pub fn kind(&self) -> &'static str {
        match self {
            Invocation::SteadyState { .. } => "steady-state",
            Invocation::Simulate { .. } => "experiment",
            Invocation::Reconstruct { .. } => "reconstruction",
            Invocation::Pipeline { .. } => "pipeline",
            Invocation::Sweep { .. } => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub rng: String,
    pub invocation: Invocation,
    /// Unix time of the run; only recorded on request so that outputs stay byte-stable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
}

impl RunManifest {
    pub fn new(invocation: Invocation) -> Self {
        Self {
            tool: "micromaser".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            rng: RNG_ALGORITHM.into(),
            invocation,
            created_unix: None,
        }
    }

    pub fn stamped(mut self) -> Self {
        self.created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
        self
    }
}

/// Metadata line of an experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementHeader {
    pub grid: TauGrid,
    pub shots_per_tau: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub truth: Option<MaserParams>,
    /// Truncation used to generate synthetic data.
    #[serde(default)]
    pub truncation: Option<usize>,
}

impl MeasurementHeader {
    pub fn of(set: &MeasurementSet, truncation: Option<usize>) -> Self {
        Self {
            grid: set.grid,
            shots_per_tau: set.shots_per_tau,
            seed: set.seed,
            truth: set.truth,
            truncation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateSummary {
    pub mean: f64,
    pub variance: f64,
    pub fano: Option<f64>,
    pub tail_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSummary {
    pub iterations_run: usize,
    pub converged_early: bool,
    pub final_loglik: Option<f64>,
    pub residual: f64,
    pub estimate: DistributionMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<DistributionMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<f64>,
}

/// Shortest decimal that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn write_json_line<T: Serialize>(out: &mut impl Write, prefix: &str, value: &T) -> io::Result<()> {
    let json = serde_json::to_string(value).map_err(io::Error::other)?;
    writeln!(out, "{prefix}{json}")
}

pub fn write_preamble(out: &mut impl Write, manifest: &RunManifest) -> io::Result<()> {
    writeln!(out, "# micromaser {} {FORMAT_VERSION}", manifest.invocation.kind())?;
    write_json_line(out, MANIFEST_PREFIX, manifest)
}

pub fn write_summary<T: Serialize>(out: &mut impl Write, summary: &T) -> io::Result<()> {
    write_json_line(out, SUMMARY_PREFIX, summary)
}

pub fn write_distribution(
    out: &mut impl Write,
    p: &PhotonDistribution,
    truth: Option<&PhotonDistribution>,
) -> io::Result<()> {
    match truth {
        Some(t) => {
            writeln!(out, "n,p_n,p_true")?;
            for (n, (a, b)) in p.probs().iter().zip(t.probs()).enumerate() {
                writeln!(out, "{n},{},{}", num(*a), num(*b))?;
            }
        }
        None => {
            writeln!(out, "n,p_n")?;
            for (n, a) in p.probs().iter().enumerate() {
                writeln!(out, "{n},{}", num(*a))?;
            }
        }
    }
    Ok(())
}

pub fn write_measurements(out: &mut impl Write, set: &MeasurementSet) -> io::Result<()> {
    writeln!(out, "k,tau,count,freq")?;
    for (k, (count, freq)) in set.counts.iter().zip(&set.frequencies).enumerate() {
        writeln!(out, "{k},{},{count},{}", num(set.grid.point(k)), num(*freq))?;
    }
    Ok(())
}

pub fn write_experiment(
    out: &mut impl Write,
    manifest: &RunManifest,
    set: &MeasurementSet,
    truncation: Option<usize>,
) -> io::Result<()> {
    write_preamble(out, manifest)?;
    write_json_line(out, MEASUREMENT_PREFIX, &MeasurementHeader::of(set, truncation))?;
    write_measurements(out, set)
}

/// Tables of a reconstruction: estimate, likelihood trace, fitted excitation curve.
pub fn write_reconstruction_tables(
    out: &mut impl Write,
    result: &ReconstructionResult,
    truth: Option<&PhotonDistribution>,
    set: &MeasurementSet,
    fitted: &[f64],
) -> io::Result<()> {
    writeln!(out, "## distribution")?;
    write_distribution(out, &result.estimate, truth)?;
    writeln!(out, "## loglik")?;
    writeln!(out, "iteration,loglik")?;
    for (i, l) in result.loglik_trace.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, num(*l))?;
    }
    writeln!(out, "## excited")?;
    writeln!(out, "k,tau,p_e,freq")?;
    for (k, (pe, f)) in fitted.iter().zip(&set.frequencies).enumerate() {
        writeln!(out, "{k},{},{},{}", num(set.grid.point(k)), num(*pe), num(*f))?;
    }
    Ok(())
}

pub fn write_sweep(out: &mut impl Write, manifest: &RunManifest, report: &SweepReport) -> io::Result<()> {
    write_preamble(out, manifest)?;
    writeln!(out, "value,g_mean,g_stddev,repeats")?;
    for i in 0..report.axis_values.len() {
        writeln!(
            out,
            "{},{},{},{}",
            report.axis_values[i],
            num(report.fidelity_mean[i]),
            num(report.fidelity_stddev[i]),
            report.repeats[i]
        )?;
    }
    write_summary(out, report)
}

/// Extracts the manifest from any file written by this module.
pub fn read_manifest(text: &str) -> Result<RunManifest> {
    for (i, line) in text.lines().enumerate() {
        if let Some(json) = line.strip_prefix(MANIFEST_PREFIX) {
            return serde_json::from_str(json).map_err(|e| Error::parse(i + 1, format!("bad manifest: {e}")));
        }
    }
    Err(Error::parse(1, "no manifest line found"))
}

/// Extracts the closing summary line, if any.
pub fn read_summary(text: &str) -> Option<serde_json::Value> {
    text.lines()
        .rev()
        .find_map(|l| l.strip_prefix(SUMMARY_PREFIX))
        .and_then(|json| serde_json::from_str(json).ok())
}

/// Parses an experiment file: a `# measurement:` header followed by rows `k,tau,count,freq`.
/// Also accepts the `## measurements` section of a pipeline file.
pub fn read_experiment(text: &str) -> Result<(MeasurementHeader, MeasurementSet)> {
    let mut header: Option<MeasurementHeader> = None;
    let mut seen_columns = false;
    let mut counts = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(json) = line.strip_prefix(MEASUREMENT_PREFIX) {
            let h: MeasurementHeader =
                serde_json::from_str(json).map_err(|e| Error::parse(lineno, format!("bad measurement header: {e}")))?;
            h.grid.validate().map_err(|e| Error::parse(lineno, e.to_string()))?;
            header = Some(h);
            continue;
        }
        if let Some(section) = line.strip_prefix("## ") {
            // a pipeline file keeps the measurements in the first section
            if seen_columns || section != "measurements" {
                break;
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let Some(h) = header.as_ref() else {
            return Err(Error::parse(lineno, "data before the '# measurement:' header"));
        };
        if !seen_columns {
            if line != "k,tau,count,freq" {
                return Err(Error::parse(
                    lineno,
                    format!("expected column header 'k,tau,count,freq', got '{line}'"),
                ));
            }
            seen_columns = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::parse(lineno, format!("expected 4 fields, got {}", fields.len())));
        }
        let k: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad index '{}'", fields[0])))?;
        if k != counts.len() {
            return Err(Error::parse(
                lineno,
                format!("expected index {}, got {k}", counts.len()),
            ));
        }
        if k >= h.grid.len() {
            return Err(Error::parse(
                lineno,
                format!("more rows than the {} grid points", h.grid.len()),
            ));
        }
        let tau: f64 = fields[1]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad tau '{}'", fields[1])))?;
        let expected_tau = h.grid.point(k);
        if (tau - expected_tau).abs() > 1e-9 * expected_tau.abs().max(1.0) {
            return Err(Error::parse(
                lineno,
                format!("tau {tau} does not match grid point {expected_tau}"),
            ));
        }
        let count: u64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad count '{}'", fields[2])))?;
        if count > h.shots_per_tau as u64 {
            return Err(Error::parse(
                lineno,
                Error::InvalidCount {
                    index: k,
                    count,
                    shots: h.shots_per_tau,
                }
                .to_string(),
            ));
        }
        let freq: f64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad frequency '{}'", fields[3])))?;
        if (freq - count as f64 / h.shots_per_tau as f64).abs() > 1e-12 {
            return Err(Error::parse(
                lineno,
                format!("frequency {freq} differs from count / shots"),
            ));
        }
        counts.push(count as u32);
    }

    let header = header.ok_or_else(|| Error::parse(text.lines().count().max(1), "missing '# measurement:' header"))?;
    if counts.len() != header.grid.len() {
        return Err(Error::parse(
            text.lines().count().max(1),
            format!("expected {} data rows, found {}", header.grid.len(), counts.len()),
        ));
    }
    let mut set = from_counts(header.grid, header.shots_per_tau, counts)?;
    set.seed = header.seed;
    set.truth = header.truth;
    Ok((header, set))
}
