//! C ABI over the simulator.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every fallible call returns an [`EeStatus`];
//! on failure, [`ee_last_error`] gives a message for the calling thread.
//!
//! Holes are 1-based here, as in the CLI output.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ergodic_explore::config::{emit_config, RawConfig};
use ergodic_explore::output::{write_artifacts, CommandError};
use ergodic_explore::sim::{run, SimConfig, SimTrace};
use ergodic_explore::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EeStatus {
    Ok = 0,
    InvalidConfig = 1,
    Runtime = 2,
    Io = 3,
    NullArgument = 4,
    OutOfRange = 5,
    Panic = 6,
}

/// A validated run configuration.
pub struct EeConfig {
    inner: SimConfig,
}

/// The result of a finished run.
pub struct EeTrace {
    config: SimConfig,
    trace: SimTrace,
    seconds: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn guard(f: impl FnOnce() -> Result<(), (EeStatus, String)>) -> EeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            EeStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EeStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (EeStatus, String)> {
    if p.is_null() {
        return Err((EeStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (EeStatus::InvalidConfig, format!("{what} is not valid UTF-8")))
}

fn null(what: &str) -> (EeStatus, String) {
    (EeStatus::NullArgument, format!("{what} is null"))
}

fn invalid(e: impl ToString) -> (EeStatus, String) {
    (EeStatus::InvalidConfig, e.to_string())
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ee_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ee_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The bundled three-hole configuration.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ee_config_default(out: *mut *mut EeConfig) -> EeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        put(
            out,
            EeConfig {
                inner: SimConfig::three_holes(),
            },
        );
        Ok(())
    })
}

/// Parses config text in the config-file format.
///
/// # Safety
/// `text` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ee_config_parse(text: *const c_char, out: *mut *mut EeConfig) -> EeStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = RawConfig::parse(text).and_then(|r| r.resolve()).map_err(invalid)?;
        put(out, EeConfig { inner: cfg });
        Ok(())
    })
}

/// Reads a config file.
///
/// # Safety
/// `path` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ee_config_load(path: *const c_char, out: *mut *mut EeConfig) -> EeStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = RawConfig::from_file(Path::new(path))
            .and_then(|r| r.resolve())
            .map_err(invalid)?;
        put(out, EeConfig { inner: cfg });
        Ok(())
    })
}

/// Sets one key (full dotted name or unique suffix) to a value in config
/// syntax, e.g. `("v_max", "5")`. The config is left unchanged on failure.
///
/// # Safety
/// `cfg` must come from this library; `key` and `value` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ee_config_set(cfg: *mut EeConfig, key: *const c_char, value: *const c_char) -> EeStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        let key = str_arg(key, "key")?;
        let value = str_arg(value, "value")?;
        let mut raw = RawConfig::parse(&emit_config(&cfg.inner)).map_err(invalid)?;
        raw.set(key, value).map_err(invalid)?;
        cfg.inner = raw.resolve().map_err(invalid)?;
        Ok(())
    })
}

/// Config in file format; free the string with [`ee_string_free`].
///
/// # Safety
/// `cfg` must come from this library; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ee_config_to_string(cfg: *const EeConfig, out: *mut *mut c_char) -> EeStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = CString::new(emit_config(&cfg.inner)).unwrap_or_default().into_raw();
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ee_config_free(cfg: *mut EeConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ee_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs the simulation to completion.
///
/// # Safety
/// `cfg` must come from this library; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ee_run(cfg: *const EeConfig, out: *mut *mut EeTrace) -> EeStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let started = std::time::Instant::now();
        let trace = run(cfg.inner.clone()).map_err(|e| match e {
            Error::Validation(v) => invalid(v),
            other => (EeStatus::Runtime, other.to_string()),
        })?;
        put(
            out,
            EeTrace {
                config: cfg.inner.clone(),
                trace,
                seconds: started.elapsed().as_secs_f64(),
            },
        );
        Ok(())
    })
}

/// # Safety
/// `trace` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ee_trace_free(trace: *mut EeTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of recorded `V` samples; 0 for a null handle.
///
/// # Safety
/// `trace` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ee_trace_metric_count(trace: *const EeTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.trace.metrics.len())
}

/// Sample `index` of `V`: its step, value and 1-based target hole.
///
/// # Safety
/// `trace` must come from this library; outputs valid or null.
#[no_mangle]
pub unsafe extern "C" fn ee_trace_metric(
    trace: *const EeTrace,
    index: usize,
    k: *mut u64,
    v: *mut f64,
    target_hole: *mut u32,
) -> EeStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        let m = t.trace.metrics.get(index).ok_or_else(|| {
            (
                EeStatus::OutOfRange,
                format!("metric {index} of {}", t.trace.metrics.len()),
            )
        })?;
        if !k.is_null() {
            *k = m.k;
        }
        if !v.is_null() {
            *v = m.v;
        }
        if !target_hole.is_null() {
            *target_hole = m.target as u32 + 1;
        }
        Ok(())
    })
}

/// Number of robot positions (one per step, starting at step 0).
///
/// # Safety
/// `trace` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ee_trace_position_count(trace: *const EeTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.trace.trajectory.len())
}

/// # Safety
/// `trace` must come from this library; `x` and `y` valid.
#[no_mangle]
pub unsafe extern "C" fn ee_trace_position(trace: *const EeTrace, index: usize, x: *mut f64, y: *mut f64) -> EeStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        if x.is_null() || y.is_null() {
            return Err(null("x/y"));
        }
        let p = t.trace.trajectory.get(index).ok_or_else(|| {
            (
                EeStatus::OutOfRange,
                format!("position {index} of {}", t.trace.trajectory.len()),
            )
        })?;
        *x = p.x;
        *y = p.y;
        Ok(())
    })
}

/// Copies up to `capacity` positions as interleaved `x, y` pairs into
/// `xy` (length `2 * capacity`) and returns how many were copied.
///
/// # Safety
/// `trace` must come from this library; `xy` must hold `2 * capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn ee_trace_positions(trace: *const EeTrace, xy: *mut f64, capacity: usize) -> usize {
    let Some(t) = trace.as_ref() else { return 0 };
    if xy.is_null() {
        return 0;
    }
    let n = capacity.min(t.trace.trajectory.len());
    let out = std::slice::from_raw_parts_mut(xy, 2 * n);
    for (pair, p) in out.chunks_exact_mut(2).zip(&t.trace.trajectory) {
        pair[0] = p.x;
        pair[1] = p.y;
    }
    n
}

/// `V` at the last step.
///
/// # Safety
/// `trace` must come from this library; `v` valid.
#[no_mangle]
pub unsafe extern "C" fn ee_trace_final_v(trace: *const EeTrace, v: *mut f64) -> EeStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        if v.is_null() {
            return Err(null("v"));
        }
        *v = t
            .trace
            .final_v()
            .ok_or((EeStatus::Runtime, "trace is empty".to_string()))?;
        Ok(())
    })
}

/// Completed tour cycles.
///
/// # Safety
/// `trace` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ee_trace_cycles(trace: *const EeTrace) -> u64 {
    trace.as_ref().map_or(0, |t| t.trace.cycles())
}

/// Writes the same artifacts as the CLI `run` command into `dir`.
///
/// # Safety
/// `trace` must come from this library; `dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ee_trace_write(trace: *const EeTrace, dir: *const c_char) -> EeStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        let dir = str_arg(dir, "dir")?;
        write_artifacts(Path::new(dir), &t.config, &t.trace, None, t.seconds).map_err(|e| {
            let status = match e {
                CommandError::Io { .. } => EeStatus::Io,
                CommandError::Config(_) => EeStatus::InvalidConfig,
                CommandError::Runtime(_) => EeStatus::Runtime,
            };
            (status, e.to_string())
        })?;
        Ok(())
    })
}
