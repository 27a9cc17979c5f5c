//! C ABI over the proactive-cache simulator.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free`. Every fallible call returns a [`PcStatus`]; the message of
//! the last failure on the calling thread is available from [`pc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use proactive_cache::bounds::{lbuc_thresholds_irm, ChannelStats};
use proactive_cache::experiment::{Context, ExperimentConfig, Scheme};
use proactive_cache::CacheError;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidString = 2,
    Config = 3,
    Parse = 4,
    Model = 5,
    Numerical = 6,
    Io = 7,
    OutOfRange = 8,
    Panic = 9,
}

/// Experiment configuration handle.
pub struct PcConfig(ExperimentConfig);

/// Experiment point: environment, channel statistics and both bounds.
pub struct PcContext(Context);

/// Average cost of one scheme over the evaluation trajectories.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PcEvalResult {
    pub mean: f64,
    pub stderr: f64,
    pub n_traj: usize,
    pub n_slots: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: PcStatus, msg: impl Into<String>) -> PcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn from_error(e: CacheError) -> PcStatus {
    let status = match &e {
        CacheError::Config(_) => PcStatus::Config,
        CacheError::Parse { .. } => PcStatus::Parse,
        CacheError::Io(_) => PcStatus::Io,
        CacheError::SingularRegression | CacheError::NoConvergence(_) | CacheError::Diverged(_) => {
            PcStatus::Numerical
        }
        _ => PcStatus::Model,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> PcStatus) -> PcStatus {
    catch_unwind(AssertUnwindSafe(f))
        .unwrap_or_else(|_| fail(PcStatus::Panic, "panic inside the library"))
}

unsafe fn string<'a>(s: *const c_char) -> Result<&'a str, PcStatus> {
    if s.is_null() {
        return Err(fail(PcStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(PcStatus::InvalidString, "string is not UTF-8"))
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(PcStatus::NullPointer, concat!("null argument: ", stringify!($p)));
        })+
    };
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// New configuration holding the library defaults.
#[no_mangle]
pub extern "C" fn pc_config_new() -> *mut PcConfig {
    Box::into_raw(Box::new(PcConfig(ExperimentConfig::default())))
}

/// Reads a `key=value` configuration file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_config_load(path: *const c_char, out: *mut *mut PcConfig) -> PcStatus {
    non_null!(out);
    guard(|| {
        let path = try_ffi!(string(path));
        match ExperimentConfig::from_file(Path::new(path)) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(PcConfig(cfg)));
                PcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Sets one dotted key, e.g. `cache.capacity` to `30`.
///
/// # Safety
/// `cfg` must come from this library; `key` and `value` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn pc_config_set(
    cfg: *mut PcConfig,
    key: *const c_char,
    value: *const c_char,
) -> PcStatus {
    non_null!(cfg);
    guard(|| {
        let key = try_ffi!(string(key));
        let value = try_ffi!(string(value));
        match (*cfg).0.set(key, value, 0) {
            Ok(()) => PcStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pc_config_free(cfg: *mut PcConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Builds an experiment point. Estimates the channel statistics, so it may
/// take a moment with the default sample count.
///
/// # Safety
/// `cfg` must be a live configuration handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_context_new(
    cfg: *const PcConfig,
    out: *mut *mut PcContext,
) -> PcStatus {
    non_null!(cfg, out);
    guard(|| match Context::new(&(*cfg).0) {
        Ok(ctx) => {
            *out = Box::into_raw(Box::new(PcContext(ctx)));
            PcStatus::Ok
        }
        Err(e) => from_error(e),
    })
}

/// # Safety
/// `ctx` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pc_context_free(ctx: *mut PcContext) {
    if !ctx.is_null() {
        drop(Box::from_raw(ctx));
    }
}

/// Estimated mean transmission cost per content, in mW.
///
/// # Safety
/// `ctx` must be a live context handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_context_mean_cost(ctx: *const PcContext, out: *mut f64) -> PcStatus {
    non_null!(ctx, out);
    *out = (*ctx).0.stats.mean();
    PcStatus::Ok
}

/// Unlimited-cache bound threshold for a content with `lifetime` slots left.
///
/// # Safety
/// `ctx` must be a live context handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_context_lbuc_threshold(
    ctx: *const PcContext,
    lifetime: usize,
    out: *mut f64,
) -> PcStatus {
    non_null!(ctx, out);
    let t = &(*ctx).0.uc.by_lifetime;
    if lifetime == 0 || lifetime > t.len() {
        return fail(
            PcStatus::OutOfRange,
            format!("lifetime {lifetime} outside 1..={}", t.len()),
        );
    }
    *out = t[lifetime - 1];
    PcStatus::Ok
}

/// Non-causal bound threshold when the next access is `gap` slots away.
/// Gap zero yields infinity.
///
/// # Safety
/// `ctx` must be a live context handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_context_lbnck_threshold(
    ctx: *const PcContext,
    gap: usize,
    out: *mut f64,
) -> PcStatus {
    non_null!(ctx, out);
    *out = (*ctx).0.nck.get(gap);
    PcStatus::Ok
}

/// Evaluates a scheme by name (`reactive`, `random`, `lb_uc`, `lb_nck`,
/// `liso_fdm`, `liso_lrm`, `lfa_fdm`, `lfa_lrm`). Trained schemes are trained
/// first with the context's budget.
///
/// # Safety
/// `ctx` must be a live context handle, `scheme` NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pc_context_eval(
    ctx: *const PcContext,
    scheme: *const c_char,
    out: *mut PcEvalResult,
) -> PcStatus {
    non_null!(ctx, out);
    guard(|| {
        let name = try_ffi!(string(scheme));
        let scheme = match Scheme::parse(name) {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        match (*ctx).0.eval_scheme(scheme) {
            Ok((r, _)) => {
                *out = PcEvalResult {
                    mean: r.mean,
                    stderr: r.stderr,
                    n_traj: r.n_traj,
                    n_slots: r.n_slots,
                };
                PcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Unlimited-cache thresholds for a cost uniform on `[lo, hi]` and access
/// probability `p_a`, written to `out[0..len]` for lifetimes `1..=len`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pc_lbuc_thresholds_uniform(
    lo: f64,
    hi: f64,
    p_a: f64,
    out: *mut f64,
    len: usize,
) -> PcStatus {
    non_null!(out);
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) || !(0.0..=1.0).contains(&p_a) {
        return fail(PcStatus::Config, "need finite lo <= hi and p_a in [0, 1]");
    }
    guard(|| {
        let uc = lbuc_thresholds_irm(&ChannelStats::Uniform { lo, hi }, len, p_a);
        ptr::copy_nonoverlapping(uc.by_lifetime.as_ptr(), out, len);
        PcStatus::Ok
    })
}
