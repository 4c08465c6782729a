//! Simulated probe-atom detection records.
//!
//! Each grid time `tau_k` gets its own ChaCha20 stream (stream id `k`) keyed
//! from the experiment seed, so the counts at one grid point never depend on
//! how many draws were made at another, or on the order in which grid points
//! are visited.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{excited_probability, KernelMatrix, TauGrid};
use crate::photon::{steady_state_with, MaserParams, TruncationCheck};

/// Identifier of the random stream layout, recorded in run manifests.
pub const RNG_ALGORITHM: &str = "chacha20 (rand_chacha 0.3) key=splitmix64x4(seed) stream=k; bernoulli u53 < P_k";

/// Detection counts of excited probe atoms over an interaction-time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub grid: TauGrid,
    pub shots_per_tau: u32,
    pub counts: Vec<u32>,
    pub frequencies: Vec<f64>,
    /// Seed used to generate synthetic data.
    pub seed: Option<u64>,
    /// Ground-truth parameters, present for synthetic data.
    pub truth: Option<MaserParams>,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Wraps externally supplied counts.
pub fn from_counts(grid: TauGrid, shots_per_tau: u32, counts: Vec<u32>) -> Result<MeasurementSet> {
    grid.validate()?;
    if shots_per_tau == 0 {
        return Err(Error::param("shots per interaction time must be at least 1"));
    }
    if counts.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            found: counts.len(),
        });
    }
    if let Some((index, &count)) = counts.iter().enumerate().find(|(_, &c)| c > shots_per_tau) {
        return Err(Error::InvalidCount {
            index,
            count: count as u64,
            shots: shots_per_tau,
        });
    }
    let frequencies = counts.iter().map(|&c| c as f64 / shots_per_tau as f64).collect();
    Ok(MeasurementSet {
        grid,
        shots_per_tau,
        counts,
        frequencies,
        seed: None,
        truth: None,
    })
}

/// Draws binomial detection counts from the steady state of `params`.
pub fn simulate(
    params: &MaserParams,
    grid: &TauGrid,
    truncation: usize,
    shots_per_tau: u32,
    seed: u64,
) -> Result<MeasurementSet> {
    simulate_with(
        params,
        grid,
        truncation,
        shots_per_tau,
        seed,
        TruncationCheck::default(),
    )
}

pub fn simulate_with(
    params: &MaserParams,
    grid: &TauGrid,
    truncation: usize,
    shots_per_tau: u32,
    seed: u64,
    check: TruncationCheck,
) -> Result<MeasurementSet> {
    let truth = steady_state_with(params, truncation, check)?;
    let kernel = KernelMatrix::new(grid, truncation)?;
    let probs = excited_probability(&kernel, &truth)?;
    let counts = sample_counts(&probs, shots_per_tau, seed);
    let mut set = from_counts(*grid, shots_per_tau, counts)?;
    set.seed = Some(seed);
    set.truth = Some(*params);
    Ok(set)
}

/// Independent binomial draws, one stream per index.
pub fn sample_counts(probs: &[f64], shots: u32, seed: u64) -> Vec<u32> {
    let key = stream_key(seed);
    probs
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let mut rng = ChaCha20Rng::from_seed(key);
            rng.set_stream(k as u64);
            binomial(&mut rng, shots, p)
        })
        .collect()
}

/// Exact binomial sample as a sum of Bernoulli trials.
fn binomial(rng: &mut impl RngCore, trials: u32, p: f64) -> u32 {
    let p = p.clamp(0.0, 1.0);
    (0..trials).filter(|_| unit_uniform(rng) < p).count() as u32
}

/// Uniform on `[0, 1)` with 53 random bits.
fn unit_uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_key(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}
