//! C ABI over the simulation core.
//!
//! Objects cross the boundary as opaque handles created by `se_*_new`-style
//! constructors and released with the matching `se_*_free`. Every fallible
//! function returns an [`SeStatus`]; on failure a message describing the error
//! is available from [`se_last_error`] on the same thread. Level indices are
//! 0-based.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use scalar_ensemble::conditions::{check_prop2, check_theorem1, CheckOptions, ConditionReport};
use scalar_ensemble::control::ChirpedPulse;
use scalar_ensemble::linalg::{c, CVector, RMatrix, I};
use scalar_ensemble::model::{sample_system, DeltaChoice, Drift, EnsembleSystem, Interval, ParamBox, SampledSystem};
use scalar_ensemble::propagator::{distance_to_target, propagate, StateVector, StepConfig};
use scalar_ensemble::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Model = 4,
    Hypothesis = 5,
    Numeric = 6,
    Singularity = 7,
    Unsupported = 8,
    Io = 9,
    Panic = 10,
}

/// One realization of the ensemble.
pub struct SeSystem {
    inner: SampledSystem,
}

/// Parameter-dependent family with its parameter box.
pub struct SeEnsemble {
    inner: EnsembleSystem,
}

/// Chirped control pulse.
pub struct SePulse {
    inner: ChirpedPulse,
}

/// Outcome of a condition check.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SeCheckResult {
    /// 1 if every hypothesis holds, 0 otherwise.
    pub holds: c_int,
    pub violations: usize,
    pub warnings: usize,
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn status(&self) -> SeStatus {
        match self {
            Failure::Null(_) => SeStatus::NullPointer,
            Failure::Core(e) => match e {
                Error::Domain(_) => SeStatus::Domain,
                Error::Argument(_) | Error::Config { .. } | Error::Parse { .. } => SeStatus::InvalidArgument,
                Error::Model { .. } => SeStatus::Model,
                Error::Hypothesis { .. } => SeStatus::Hypothesis,
                Error::Numeric(_) => SeStatus::Numeric,
                Error::Singularity(_) => SeStatus::Singularity,
                Error::Unsupported(_) => SeStatus::Unsupported,
                Error::Io(_) | Error::Csv(_) | Error::Json(_) => SeStatus::Io,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Null(what) => format!("null pointer: {what}"),
            Failure::Core(e) => e.to_string(),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior nul bytes were removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SeStatus::Ok,
        Ok(Err(e)) => {
            set_last_error(e.message());
            e.status()
        }
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {what}"));
            SeStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_handle<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("output handle"));
    }
    out.write(Box::into_raw(Box::new(value)));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or null if none failed.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn se_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Forget the stored error message of this thread.
#[no_mangle]
pub extern "C" fn se_clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// Build a system from `n` strictly increasing eigenvalues and a symmetric
/// row-major `n x n` coupling matrix.
///
/// # Safety
/// `lambda` must point to `n` doubles and `coupling` to `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn se_system_new(
    n: usize,
    lambda: *const f64,
    coupling: *const f64,
    out: *mut *mut SeSystem,
) -> SeStatus {
    guard(|| {
        let lam = slice(lambda, n, "lambda")?.to_vec();
        let b = slice(coupling, n * n, "coupling")?;
        let inner = SampledSystem::new(lam, RMatrix::from_row_slice(n, n, b))?;
        put_handle(out, SeSystem { inner })
    })
}

/// # Safety
/// `sys` must be null or a handle from this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn se_system_free(sys: *mut SeSystem) {
    free(sys)
}

/// Number of levels, or 0 for a null handle.
///
/// # Safety
/// `sys` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn se_system_levels(sys: *const SeSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.inner.n())
}

/// Copy the eigenvalues into `out`, which holds `len` doubles.
///
/// # Safety
/// `sys` must be a live handle and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn se_system_lambda(sys: *const SeSystem, out: *mut f64, len: usize) -> SeStatus {
    guard(|| {
        let s = get(sys, "system")?;
        let dst = slice_mut(out, len, "out")?;
        if len != s.inner.n() {
            return Err(Error::Argument(format!("buffer holds {len} values, system has {}", s.inner.n())).into());
        }
        dst.copy_from_slice(s.inner.lambda());
        Ok(())
    })
}

/// The four-level benchmark family on `alpha in [lo, hi]`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn se_ensemble_four_level(lo: f64, hi: f64, out: *mut *mut SeEnsemble) -> SeStatus {
    guard(|| {
        let inner = EnsembleSystem::four_level_benchmark(Interval::new(lo, hi)?)?;
        put_handle(out, SeEnsemble { inner })
    })
}

/// Affine family `lambda_j(alpha) = offset_j + <slope_j, alpha>` with a fixed
/// coupling over the box `prod [lo_i, hi_i]`.
///
/// # Safety
/// `offset` points to `n` doubles, `slope` to `n * dim` doubles (row `j` is
/// the gradient of level `j`), `coupling` to `n * n` doubles in row-major
/// order, `lo` and `hi` to `dim` doubles each.
#[no_mangle]
pub unsafe extern "C" fn se_ensemble_affine(
    n: usize,
    dim: usize,
    offset: *const f64,
    slope: *const f64,
    coupling: *const f64,
    lo: *const f64,
    hi: *const f64,
    out: *mut *mut SeEnsemble,
) -> SeStatus {
    guard(|| {
        let offset = slice(offset, n, "offset")?;
        let slope = slice(slope, n * dim, "slope")?;
        let b = slice(coupling, n * n, "coupling")?;
        let lo = slice(lo, dim, "lo")?;
        let hi = slice(hi, dim, "hi")?;
        let drift =
            offset.iter().enumerate().map(|(j, &o)| Drift::affine(o, slope[j * dim..(j + 1) * dim].to_vec())).collect();
        let intervals = lo.iter().zip(hi).map(|(&a, &b)| Interval::new(a, b)).collect::<Result<_, _>>()?;
        let inner =
            EnsembleSystem::with_point_coupling(drift, &RMatrix::from_row_slice(n, n, b), ParamBox::new(intervals)?)?;
        put_handle(out, SeEnsemble { inner })
    })
}

/// # Safety
/// `ens` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn se_ensemble_free(ens: *mut SeEnsemble) {
    free(ens)
}

/// Realization at `alpha` (length `dim`) with every coupling sampled at the
/// same relative position `t in [0, 1]` of its interval.
///
/// # Safety
/// `ens` must be a live handle and `alpha` must point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn se_ensemble_sample(
    ens: *const SeEnsemble,
    alpha: *const f64,
    dim: usize,
    t: f64,
    out: *mut *mut SeSystem,
) -> SeStatus {
    guard(|| {
        let e = get(ens, "ensemble")?;
        let alpha = slice(alpha, dim, "alpha")?;
        let choice = DeltaChoice::uniform(e.inner.n(), t)?;
        let inner = sample_system(&e.inner, alpha, &choice)?;
        put_handle(out, SeSystem { inner })
    })
}

/// Check the transfer hypotheses for `p -> q` with sweep window `(v0, v1)`.
/// With `doubled != 0` the gaps must also avoid `[2 v0, 2 v1]`.
///
/// # Safety
/// `ens` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn se_check_conditions(
    ens: *const SeEnsemble,
    p: usize,
    q: usize,
    v0: f64,
    v1: f64,
    margin: f64,
    doubled: c_int,
    out: *mut SeCheckResult,
) -> SeStatus {
    guard(|| {
        let e = get(ens, "ensemble")?;
        let opts = CheckOptions { margin, ..Default::default() };
        let report: ConditionReport = if doubled != 0 {
            check_prop2(&e.inner, p, q, v0, v1, &opts)?
        } else {
            check_theorem1(&e.inner, p, q, v0, v1, &opts)?
        };
        let result = SeCheckResult {
            holds: report.holds.into(),
            violations: report.violations.len(),
            warnings: report.warnings.len(),
        };
        put(out, result, "out")
    })
}

/// Linear chirp from `v0` to `v1` under the sine envelope.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn se_pulse_standard(v0: f64, v1: f64, eps1: f64, eps2: f64, out: *mut *mut SePulse) -> SeStatus {
    guard(|| {
        let inner = ChirpedPulse::standard(v0, v1, eps1, eps2)?;
        put_handle(out, SePulse { inner })
    })
}

/// # Safety
/// `pulse` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn se_pulse_free(pulse: *mut SePulse) {
    free(pulse)
}

/// Physical duration of the pulse, or NaN for a null handle.
///
/// # Safety
/// `pulse` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn se_pulse_horizon(pulse: *const SePulse) -> f64 {
    pulse.as_ref().map_or(f64::NAN, |p| p.inner.horizon())
}

/// Control amplitude at physical time `t`.
///
/// # Safety
/// `pulse` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn se_pulse_omega(pulse: *const SePulse, t: f64, out: *mut f64) -> SeStatus {
    guard(|| {
        let value = get(pulse, "pulse")?.inner.omega(t)?;
        put(out, value, "out")
    })
}

/// Propagate `e_initial` over the whole pulse and write the final amplitudes
/// into `re` and `im` (`len` entries each). `max_norm_drift` may be null.
///
/// Returns `SeStatus::Numeric` if the norm drift exceeds the accuracy limit;
/// the amplitudes are still written in that case.
///
/// # Safety
/// Handles must be live; `re` and `im` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn se_propagate(
    sys: *const SeSystem,
    pulse: *const SePulse,
    initial: usize,
    steps_per_period: usize,
    re: *mut f64,
    im: *mut f64,
    len: usize,
    max_norm_drift: *mut f64,
) -> SeStatus {
    guard(|| {
        let sys = &get(sys, "system")?.inner;
        let pulse = &get(pulse, "pulse")?.inner;
        let n = sys.n();
        if len != n {
            return Err(Error::Argument(format!("buffers hold {len} values, system has {n}")).into());
        }
        let re = slice_mut(re, len, "re")?;
        let im = slice_mut(im, len, "im")?;
        let start = StateVector::basis(n, initial)?;
        let cfg = StepConfig { steps_per_period, n_samples: 2 };
        let traj = propagate(sys, pulse, &start, cfg)?;
        for ((r, i), a) in re.iter_mut().zip(im.iter_mut()).zip(traj.final_state().amplitudes().iter()) {
            *r = a.re;
            *i = a.im;
        }
        if !max_norm_drift.is_null() {
            max_norm_drift.write(traj.max_norm_drift);
        }
        if traj.degraded {
            return Err(
                Error::Numeric(format!("norm drift {:e} exceeds the accuracy limit", traj.max_norm_drift)).into()
            );
        }
        Ok(())
    })
}

/// Distance of the unit state `re + i im` from the ray through `e_q`.
///
/// # Safety
/// `re` and `im` must point to `n` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn se_distance_to_target(
    re: *const f64,
    im: *const f64,
    n: usize,
    q: usize,
    out: *mut f64,
) -> SeStatus {
    guard(|| {
        let re = slice(re, n, "re")?;
        let im = slice(im, n, "im")?;
        if q >= n {
            return Err(Error::Argument(format!("target level {q} outside 0..{n}")).into());
        }
        let psi = StateVector::new(CVector::from_iterator(n, re.iter().zip(im).map(|(&a, &b)| c(a) + I * b)))?;
        put(out, distance_to_target(&psi, q), "out")
    })
}
