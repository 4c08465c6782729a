//! C ABI over `micromaser-core`.
//!
//! Every fallible function returns an [`MmStatus`]; on failure a message is
//! kept per thread and can be read with [`mm_last_error`]. Kernels and
//! reconstruction results are opaque heap handles released with their
//! matching `*_free` function. Output arrays are caller-allocated; passing a
//! buffer shorter than required returns `MM_STATUS_BUFFER_TOO_SMALL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use micromaser_core::{
    em::{log_likelihood, reconstruct, EmConfig, ReconstructionResult},
    experiment::simulate,
    kernel::{excited_probability, KernelMatrix, TauGrid},
    photon::{fidelity, metrics, steady_state, trapping_theta, MaserParams, PhotonDistribution},
    Error,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    TruncationTooSmall = 3,
    IncompatibleLength = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Opaque probe-atom kernel.
pub struct MmKernel(KernelMatrix);

/// Opaque reconstruction result.
pub struct MmReconstruction(ReconstructionResult);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> MmStatus {
    match err {
        Error::TruncationTooSmall { .. } => MmStatus::TruncationTooSmall,
        Error::IncompatibleTruncation { .. } | Error::LengthMismatch { .. } => MmStatus::IncompatibleLength,
        _ => MmStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (MmStatus, String)>) -> MmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MmStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (MmStatus, String)>;
}

impl<T> IntoFfi<T> for Result<T, Error> {
    fn ffi(self) -> Result<T, (MmStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (MmStatus, String) {
    (MmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn input<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], (MmStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a, T>(ptr: *mut T, len: usize, needed: usize, what: &str) -> Result<&'a mut [T], (MmStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    if len < needed {
        return Err((
            MmStatus::BufferTooSmall,
            format!("{what} holds {len} values, {needed} required"),
        ));
    }
    Ok(slice::from_raw_parts_mut(ptr, needed))
}

unsafe fn write<T>(ptr: *mut T, value: T, what: &str) -> Result<(), (MmStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    ptr.write(value);
    Ok(())
}

/// NUL-terminated library version.
#[no_mangle]
pub extern "C" fn mm_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mm_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Steady-state distribution `p_0..=p_truncation` into `out` (`truncation + 1` values).
///
/// # Safety
/// `out` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mm_steady_state(
    n_ex: f64,
    n_th: f64,
    theta: f64,
    truncation: usize,
    out: *mut f64,
    out_len: usize,
) -> MmStatus {
    guard(|| {
        let out = output(out, out_len, truncation + 1, "out")?;
        let params = MaserParams::new(n_ex, n_th, theta).ffi()?;
        let p = steady_state(&params, truncation).ffi()?;
        out.copy_from_slice(p.probs());
        Ok(())
    })
}

/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn mm_trapping_theta(n_ex: f64, q: u32, n_q: u32, out: *mut f64) -> MmStatus {
    guard(|| write(out, trapping_theta(n_ex, q, n_q).ffi()?, "out"))
}

/// Mean, variance and Fano factor of a distribution (normalized on input).
/// `fano_defined` is set to false for the vacuum, in which case `fano` is 0.
///
/// # Safety
/// `probs` must point to `len` doubles; the remaining pointers to writable values.
#[no_mangle]
pub unsafe extern "C" fn mm_metrics(
    probs: *const f64,
    len: usize,
    mean: *mut f64,
    variance: *mut f64,
    fano: *mut f64,
    fano_defined: *mut bool,
) -> MmStatus {
    guard(|| {
        let p = PhotonDistribution::new(input(probs, len, "probs")?.to_vec()).ffi()?;
        let m = metrics(&p);
        write(mean, m.mean, "mean")?;
        write(variance, m.variance, "variance")?;
        write(fano, m.fano.unwrap_or(0.0), "fano")?;
        write(fano_defined, m.fano.is_some(), "fano_defined")
    })
}

/// Fidelity `sum_n sqrt(p_n q_n)` of two distributions, each normalized on input.
///
/// # Safety
/// `p` and `q` must point to `p_len` and `q_len` doubles; `out` to a writable double.
#[no_mangle]
pub unsafe extern "C" fn mm_fidelity(
    p: *const f64,
    p_len: usize,
    q: *const f64,
    q_len: usize,
    out: *mut f64,
) -> MmStatus {
    guard(|| {
        let p = PhotonDistribution::new(input(p, p_len, "p")?.to_vec()).ffi()?;
        let q = PhotonDistribution::new(input(q, q_len, "q")?.to_vec()).ffi()?;
        write(out, fidelity(&p, &q), "out")
    })
}

/// Builds the kernel for a uniform grid of `n_tau + 1` interaction times.
///
/// # Safety
/// `out` must point to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn mm_kernel_new(
    tau_min: f64,
    tau_max: f64,
    n_tau: usize,
    truncation: usize,
    out: *mut *mut MmKernel,
) -> MmStatus {
    guard(|| {
        let grid = TauGrid::new(tau_min, tau_max, n_tau).ffi()?;
        let kernel = KernelMatrix::new(&grid, truncation).ffi()?;
        write(out, Box::into_raw(Box::new(MmKernel(kernel))), "out")
    })
}

/// # Safety
/// `kernel` must be null or a handle from [`mm_kernel_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mm_kernel_free(kernel: *mut MmKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Number of interaction times; 0 for a null handle.
///
/// # Safety
/// `kernel` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mm_kernel_rows(kernel: *const MmKernel) -> usize {
    kernel.as_ref().map_or(0, |k| k.0.rows())
}

/// Number of photon numbers (`truncation + 1`); 0 for a null handle.
///
/// # Safety
/// `kernel` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mm_kernel_cols(kernel: *const MmKernel) -> usize {
    kernel.as_ref().map_or(0, |k| k.0.cols())
}

/// Excited-state probability at every grid time for distribution `probs`.
///
/// # Safety
/// `kernel` must be a live handle, `probs` must point to `len` doubles and
/// `out` to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mm_excited_probability(
    kernel: *const MmKernel,
    probs: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> MmStatus {
    guard(|| {
        let kernel = &kernel.as_ref().ok_or_else(|| null("kernel"))?.0;
        let p = PhotonDistribution::new(input(probs, len, "probs")?.to_vec()).ffi()?;
        let pe = excited_probability(kernel, &p).ffi()?;
        output(out, out_len, pe.len(), "out")?.copy_from_slice(&pe);
        Ok(())
    })
}

/// Simulated excited-atom counts, one per grid time (`n_tau + 1` values).
///
/// # Safety
/// `out_counts` must point to `out_len` writable `uint32_t`.
#[no_mangle]
pub unsafe extern "C" fn mm_simulate(
    n_ex: f64,
    n_th: f64,
    theta: f64,
    tau_min: f64,
    tau_max: f64,
    n_tau: usize,
    truncation: usize,
    shots_per_tau: u32,
    seed: u64,
    out_counts: *mut u32,
    out_len: usize,
) -> MmStatus {
    guard(|| {
        let params = MaserParams::new(n_ex, n_th, theta).ffi()?;
        let grid = TauGrid::new(tau_min, tau_max, n_tau).ffi()?;
        let out = output(out_counts, out_len, grid.len(), "out_counts")?;
        let set = simulate(&params, &grid, truncation, shots_per_tau, seed).ffi()?;
        out.copy_from_slice(&set.counts);
        Ok(())
    })
}

/// Log-likelihood of distribution `probs` given excited fractions `freqs`.
/// Writes negative infinity when the data are impossible under `probs`.
///
/// # Safety
/// Pointers must reference `freqs_len` and `probs_len` doubles and a writable double.
#[no_mangle]
pub unsafe extern "C" fn mm_log_likelihood(
    kernel: *const MmKernel,
    freqs: *const f64,
    freqs_len: usize,
    probs: *const f64,
    probs_len: usize,
    out: *mut f64,
) -> MmStatus {
    guard(|| {
        let kernel = &kernel.as_ref().ok_or_else(|| null("kernel"))?.0;
        let freqs = input(freqs, freqs_len, "freqs")?;
        let p = PhotonDistribution::new(input(probs, probs_len, "probs")?.to_vec()).ffi()?;
        write(out, log_likelihood(kernel, freqs, &p).ffi()?, "out")
    })
}

/// EM reconstruction from the uniform distribution.
///
/// # Safety
/// `kernel` must be a live handle, `freqs` must point to `freqs_len` doubles
/// and `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn mm_reconstruct(
    kernel: *const MmKernel,
    freqs: *const f64,
    freqs_len: usize,
    max_iterations: usize,
    stop_tolerance: f64,
    out: *mut *mut MmReconstruction,
) -> MmStatus {
    guard(|| {
        let kernel = &kernel.as_ref().ok_or_else(|| null("kernel"))?.0;
        let freqs = input(freqs, freqs_len, "freqs")?;
        let config = EmConfig {
            max_iterations,
            stop_tolerance,
            ..EmConfig::default()
        };
        let result = reconstruct(kernel, freqs, &config).ffi()?;
        write(out, Box::into_raw(Box::new(MmReconstruction(result))), "out")
    })
}

/// # Safety
/// `result` must be null or a handle from [`mm_reconstruct`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mm_reconstruction_free(result: *mut MmReconstruction) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Length of the estimate (`truncation + 1`); 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mm_reconstruction_len(result: *const MmReconstruction) -> usize {
    result.as_ref().map_or(0, |r| r.0.estimate.len())
}

/// Iterations actually run (equals the length of the likelihood trace).
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mm_reconstruction_iterations(result: *const MmReconstruction) -> usize {
    result.as_ref().map_or(0, |r| r.0.iterations_run)
}

/// `max_n |T p_n - p_n|` at the estimate; NaN for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mm_reconstruction_residual(result: *const MmReconstruction) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.0.residual)
}

/// # Safety
/// `result` must be a live handle and `out` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mm_reconstruction_estimate(
    result: *const MmReconstruction,
    out: *mut f64,
    out_len: usize,
) -> MmStatus {
    guard(|| {
        let r = &result.as_ref().ok_or_else(|| null("result"))?.0;
        let probs = r.estimate.probs();
        output(out, out_len, probs.len(), "out")?.copy_from_slice(probs);
        Ok(())
    })
}

/// # Safety
/// `result` must be a live handle and `out` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mm_reconstruction_loglik_trace(
    result: *const MmReconstruction,
    out: *mut f64,
    out_len: usize,
) -> MmStatus {
    guard(|| {
        let r = &result.as_ref().ok_or_else(|| null("result"))?.0;
        let trace = &r.loglik_trace;
        output(out, out_len, trace.len(), "out")?.copy_from_slice(trace);
        Ok(())
    })
}
