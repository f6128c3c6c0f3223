//! C ABI over the simulator.
//!
//! Every fallible call returns a [`DtStatus`]; on failure the message is
//! available from [`dt_last_error`] on the same thread until the next call.
//! Handles are opaque and must be released with their `*_free` function.
//! Strings returned through out-pointers are owned by the caller and freed
//! with [`dt_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dyntrack::environment::WindState;
use dyntrack::harness::{self, EpisodeTrace};
use dyntrack::mapping::{
    mean_entropy, update_prediction, GridGeometry, OccupancyGrid, PredictionParams,
};
use dyntrack::ScenarioConfig;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    InvalidArgument = 4,
    OutOfRange = 5,
    Io = 6,
    Simulation = 7,
    Panic = 8,
}

/// Metrics of one episode step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DtMetrics {
    /// End-of-step time, seconds.
    pub t: f64,
    /// Mean cell entropy, bits.
    pub entropy: f64,
    pub mse: f64,
    pub n_detections_step: usize,
    pub mean_detections: f64,
}

/// Scenario configuration.
pub struct DtConfig {
    inner: ScenarioConfig,
}

/// Dynamic occupancy grid.
pub struct DtGrid {
    inner: OccupancyGrid,
}

/// Recorded episode.
pub struct DtTrace {
    inner: EpisodeTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(DtStatus, String);

impl Failure {
    fn new(status: DtStatus, msg: impl std::fmt::Display) -> Self {
        Self(status, msg.to_string())
    }
}

fn classify(e: &dyntrack::Error) -> DtStatus {
    use dyntrack::Error as E;
    match e {
        E::InvalidConfig(_) | E::ConfigParse(_) | E::Override { .. } => DtStatus::InvalidConfig,
        E::Io { .. } => DtStatus::Io,
        E::Trace(_) | E::Csv { .. } => DtStatus::InvalidArgument,
        E::Geometry(_) => DtStatus::InvalidArgument,
        _ => DtStatus::Simulation,
    }
}

impl From<dyntrack::Error> for Failure {
    fn from(e: dyntrack::Error) -> Self {
        Failure(classify(&e), e.to_string())
    }
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DtStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DtStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DtStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(DtStatus::NullPointer, format!("{what} is null")))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure::new(DtStatus::NullPointer, format!("{what} is null")))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(
            DtStatus::NullPointer,
            format!("{what} is null"),
        ));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(DtStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(
            DtStatus::NullPointer,
            format!("{what} is null"),
        ));
    }
    out.write(value);
    Ok(())
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn dt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn dt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default configuration.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dt_config_default(out: *mut *mut DtConfig) -> DtStatus {
    guard(|| {
        let h = Box::new(DtConfig {
            inner: ScenarioConfig::default(),
        });
        put(out, Box::into_raw(h), "out")
    })
}

/// Parses and validates a TOML configuration. Missing keys take defaults.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dt_config_from_toml(
    toml: *const c_char,
    out: *mut *mut DtConfig,
) -> DtStatus {
    guard(|| {
        let text = as_str(toml, "toml")?;
        let cfg = ScenarioConfig::from_toml_str(text)?.validated()?;
        put(out, Box::into_raw(Box::new(DtConfig { inner: cfg })), "out")
    })
}

/// Sets one dotted key, e.g. `("wind.mean_speed", "9")`. The value is a TOML
/// literal; bare words are strings. The config is unchanged on failure.
///
/// # Safety
/// `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn dt_config_set(
    cfg: *mut DtConfig,
    key: *const c_char,
    value: *const c_char,
) -> DtStatus {
    guard(|| {
        let cfg = as_mut(cfg, "cfg")?;
        let key = as_str(key, "key")?;
        let value = as_str(value, "value")?;
        let next = ScenarioConfig::from_toml_with_overrides(
            &cfg.inner.to_toml_string(),
            &[(key.to_string(), value.to_string())],
        )?
        .validated()?;
        cfg.inner = next;
        Ok(())
    })
}

/// Canonical TOML form; free with [`dt_string_free`].
///
/// # Safety
/// `cfg` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dt_config_to_toml(
    cfg: *const DtConfig,
    out: *mut *mut c_char,
) -> DtStatus {
    guard(|| {
        let cfg = as_ref(cfg, "cfg")?;
        put(out, owned_string(cfg.inner.to_toml_string()), "out")
    })
}

/// # Safety
/// `cfg` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dt_config_free(cfg: *mut DtConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs one seeded episode.
///
/// # Safety
/// `cfg` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dt_run_episode(
    cfg: *const DtConfig,
    seed: u64,
    out: *mut *mut DtTrace,
) -> DtStatus {
    guard(|| {
        let cfg = as_ref(cfg, "cfg")?;
        let tr = harness::run_episode(&cfg.inner, seed)?;
        put(out, Box::into_raw(Box::new(DtTrace { inner: tr })), "out")
    })
}

/// Loads and validates a trace file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dt_trace_load(path: *const c_char, out: *mut *mut DtTrace) -> DtStatus {
    guard(|| {
        let path = as_str(path, "path")?;
        let tr = harness::replay(Path::new(path))?;
        put(out, Box::into_raw(Box::new(DtTrace { inner: tr })), "out")
    })
}

/// Writes the trace file format.
///
/// # Safety
/// `trace` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dt_trace_save(trace: *const DtTrace, path: *const c_char) -> DtStatus {
    guard(|| {
        let tr = as_ref(trace, "trace")?;
        let path = as_str(path, "path")?;
        harness::trace::write(Path::new(path), &tr.inner)?;
        Ok(())
    })
}

/// Number of recorded steps.
///
/// # Safety
/// `trace` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dt_trace_len(trace: *const DtTrace, out: *mut usize) -> DtStatus {
    guard(|| put(out, as_ref(trace, "trace")?.inner.steps.len(), "out"))
}

/// Metrics after step `step` (0-based).
///
/// # Safety
/// `trace` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dt_trace_metrics(
    trace: *const DtTrace,
    step: usize,
    out: *mut DtMetrics,
) -> DtStatus {
    guard(|| {
        let tr = as_ref(trace, "trace")?;
        let s = tr.inner.steps.get(step).ok_or_else(|| {
            Failure::new(
                DtStatus::OutOfRange,
                format!("step {step} of {}", tr.inner.steps.len()),
            )
        })?;
        let m = &s.metrics;
        let v = DtMetrics {
            t: m.t,
            entropy: m.entropy,
            mse: m.mse,
            n_detections_step: m.n_detections_step,
            mean_detections: m.mean_detections,
        };
        put(out, v, "out")
    })
}

/// Hex sha256 of the trace; free with [`dt_string_free`].
///
/// # Safety
/// `trace` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dt_trace_checksum(
    trace: *const DtTrace,
    out: *mut *mut c_char,
) -> DtStatus {
    guard(|| {
        let tr = as_ref(trace, "trace")?;
        put(out, owned_string(tr.inner.checksum()), "out")
    })
}

/// # Safety
/// `trace` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dt_trace_free(trace: *mut DtTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Grid from `nx·ny` row-major probabilities (clamped to `[p_low, p_high]`).
///
/// # Safety
/// `probs` must point to `nx·ny` doubles; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dt_grid_from_probabilities(
    nx: usize,
    ny: usize,
    cell_dx: f64,
    cell_dy: f64,
    probs: *const f64,
    p_low: f64,
    p_high: f64,
    out: *mut *mut DtGrid,
) -> DtStatus {
    guard(|| {
        if nx == 0 || ny == 0 || !(cell_dx > 0.0) || !(cell_dy > 0.0) {
            return Err(Failure::new(
                DtStatus::InvalidArgument,
                "empty grid or non-positive cell size",
            ));
        }
        if !(p_low > 0.0 && p_low < 0.5 && p_high > 0.5 && p_high < 1.0) {
            return Err(Failure::new(
                DtStatus::InvalidArgument,
                "need 0 < p_low < 0.5 < p_high < 1",
            ));
        }
        if probs.is_null() {
            return Err(Failure::new(DtStatus::NullPointer, "probs is null"));
        }
        let n = nx
            .checked_mul(ny)
            .ok_or_else(|| Failure::new(DtStatus::InvalidArgument, "grid too large"))?;
        let values = std::slice::from_raw_parts(probs, n);
        let grid = OccupancyGrid::from_probabilities(
            GridGeometry::new(nx, ny, cell_dx, cell_dy),
            values,
            p_low,
            p_high,
        )?;
        put(out, Box::into_raw(Box::new(DtGrid { inner: grid })), "out")
    })
}

/// Applies one drift-prediction step.
///
/// # Safety
/// `grid` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dt_grid_predict(
    grid: *mut DtGrid,
    wind_speed: f64,
    wind_dir: f64,
    dt: f64,
    gamma: f64,
    alpha: f64,
    beta: f64,
) -> DtStatus {
    guard(|| {
        let g = as_mut(grid, "grid")?;
        let finite = [wind_speed, wind_dir, dt, gamma, alpha, beta]
            .iter()
            .all(|v| v.is_finite());
        if !finite || wind_speed < 0.0 || dt < 0.0 || !(alpha > 0.0 && alpha <= 1.0) || beta < 0.0 {
            return Err(Failure::new(
                DtStatus::InvalidArgument,
                "bad prediction parameters",
            ));
        }
        let params = PredictionParams { gamma, alpha, beta };
        update_prediction(
            &mut g.inner,
            &WindState::new(wind_speed, wind_dir),
            dt,
            &params,
        );
        Ok(())
    })
}

/// Copies the cell probabilities (row-major) into `out[0..len]`; `len` must
/// equal `nx·ny`.
///
/// # Safety
/// `grid` must be a live handle; `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dt_grid_probabilities(
    grid: *const DtGrid,
    out: *mut f64,
    len: usize,
) -> DtStatus {
    guard(|| {
        let g = as_ref(grid, "grid")?;
        let probs = g.inner.probabilities();
        if len != probs.len() {
            return Err(Failure::new(
                DtStatus::OutOfRange,
                format!("buffer holds {len} cells, grid has {}", probs.len()),
            ));
        }
        if out.is_null() {
            return Err(Failure::new(DtStatus::NullPointer, "out is null"));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&probs);
        Ok(())
    })
}

/// Mean cell entropy in bits.
///
/// # Safety
/// `grid` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dt_grid_mean_entropy(grid: *const DtGrid, out: *mut f64) -> DtStatus {
    guard(|| put(out, mean_entropy(&as_ref(grid, "grid")?.inner), "out"))
}

/// # Safety
/// `grid` must be null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dt_grid_free(grid: *mut DtGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}
