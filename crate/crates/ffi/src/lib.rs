//! C ABI over `latchsim`.
//!
//! Every fallible function returns a [`LatchsimStatus`] and writes its
//! result through an out-pointer. On failure the message is available from
//! [`latchsim_last_error`] on the same thread until the next call that fails.
//! Handles are opaque and must be released with their `_free` function.
//! Absent measurements are reported as NaN.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use latchsim::cli::CliError;
use latchsim::design::{self, DeviceSafetySpec, FreeParam, OffTimeParams};
use latchsim::devices::MosfetModel;
use latchsim::netlist::{elaborate, parse, Circuit};
use latchsim::seltb::{run_scenario, Preset};
use latchsim::solver::{operating_point_waveforms, transient, SolverConfig, Waveforms};

/// Result codes. The non-zero values match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatchsimStatus {
    Ok = 0,
    /// Null pointer, bad string, unknown name or invalid option.
    InvalidArgument = 1,
    Parse = 2,
    Convergence = 3,
    Domain = 4,
    Io = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

impl From<&CliError> for LatchsimStatus {
    fn from(e: &CliError) -> Self {
        match e {
            CliError::Usage(_) => LatchsimStatus::InvalidArgument,
            CliError::Parse(_) => LatchsimStatus::Parse,
            CliError::Convergence(_) => LatchsimStatus::Convergence,
            CliError::Domain(_) => LatchsimStatus::Domain,
            CliError::Io(_) => LatchsimStatus::Io,
        }
    }
}

/// Parsed and elaborated netlist.
pub struct LatchsimCircuit {
    inner: Circuit,
}

/// Simulation result: a time column plus one column per signal.
pub struct LatchsimWaveforms {
    inner: Waveforms,
    names: Vec<CString>,
}

impl LatchsimWaveforms {
    fn new(inner: Waveforms) -> Self {
        let names = inner
            .signal_names()
            .iter()
            .map(|n| CString::new(n.as_str()).unwrap_or_default())
            .collect();
        Self { inner, names }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatchsimOffTimeParams {
    pub r1: f64,
    pub c1: f64,
    /// Peak voltage delivered to C1.
    pub v_o: f64,
    pub vt_q3: f64,
    pub r2: f64,
    pub c2: f64,
    pub vdd: f64,
    pub vref2: f64,
}

impl From<LatchsimOffTimeParams> for OffTimeParams {
    fn from(p: LatchsimOffTimeParams) -> Self {
        OffTimeParams {
            r1: p.r1,
            c1: p.c1,
            v_o: p.v_o,
            vt_q3: p.vt_q3,
            r2: p.r2,
            c2: p.c2,
            vdd: p.vdd,
            vref2: p.vref2,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LatchsimOffTime {
    pub t1: f64,
    pub t2: f64,
    pub total: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatchsimMosfet {
    pub k_gain: f64,
    pub vt0: f64,
    pub vt_tempco: f64,
    pub lambda: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatchsimSafetySpec {
    pub i_op: f64,
    pub i_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LatchsimVgsWindow {
    pub lo: f64,
    pub hi: f64,
    pub feasible: bool,
    pub vt_max: f64,
    pub vt_min: f64,
    /// NaN when infeasible.
    pub guarded_lo: f64,
    pub guarded_hi: f64,
    pub shortfall: f64,
    pub i_max_needed: f64,
    pub vt_spread_allowed: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatchsimFreeParam {
    R1 = 0,
    C1 = 1,
    R2 = 2,
    C2 = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LatchsimSquareLawFit {
    pub k_gain: f64,
    pub vt0: f64,
    pub rms_residual: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LatchsimSelMeasurements {
    pub fire_time: f64,
    pub i_op: f64,
    pub i_peak: f64,
    pub i_limited: f64,
    pub t_detect: f64,
    pub t_power_off: f64,
    pub t_off: f64,
    pub t_restart: f64,
    pub v_o: f64,
    pub v_c2_min: f64,
    pub i_final: f64,
    pub predicted_limit: f64,
    pub choreography_in_order: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), CliError>) -> LatchsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LatchsimStatus::Ok,
        Ok(Err(e)) => {
            set_error(&e.to_string());
            (&e).into()
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            LatchsimStatus::Panic
        }
    }
}

fn bad(msg: &str) -> CliError {
    CliError::Usage(msg.to_string())
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, CliError> {
    if p.is_null() {
        return Err(bad(&format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| bad(&format!("{what} is not valid UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], CliError> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(bad(&format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, CliError> {
    p.as_mut().ok_or_else(|| bad(&format!("{what} is null")))
}

unsafe fn overrides(keys: *const *const c_char, values: *const f64, n: usize) -> Result<Vec<(String, f64)>, CliError> {
    let keys = slice(keys, n, "keys")?;
    let values = slice(values, n, "values")?;
    keys.iter()
        .zip(values)
        .map(|(k, v)| Ok((text(*k, "key")?.to_string(), *v)))
        .collect()
}

fn nan(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn latchsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn latchsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and elaborates netlist text. `keys`/`values` hold `n_params`
/// `.param` overrides and may be null when `n_params` is 0.
///
/// # Safety
/// `netlist` must be a NUL-terminated string; `keys` and `values` must
/// point to `n_params` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn latchsim_circuit_parse(
    netlist: *const c_char,
    keys: *const *const c_char,
    values: *const f64,
    n_params: usize,
    out_circuit: *mut *mut LatchsimCircuit,
) -> LatchsimStatus {
    guard(|| {
        let slot = out(out_circuit, "out_circuit")?;
        *slot = ptr::null_mut();
        let desc = parse(text(netlist, "netlist")?)?;
        let params: BTreeMap<String, f64> = overrides(keys, values, n_params)?.into_iter().collect();
        let inner = elaborate(&desc, &params)?;
        *slot = Box::into_raw(Box::new(LatchsimCircuit { inner }));
        Ok(())
    })
}

/// # Safety
/// `circuit` must come from [`latchsim_circuit_parse`] or be null.
#[no_mangle]
pub unsafe extern "C" fn latchsim_circuit_free(circuit: *mut LatchsimCircuit) {
    if !circuit.is_null() {
        drop(Box::from_raw(circuit));
    }
}

/// Non-ground node count, 0 for null.
///
/// # Safety
/// `circuit` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn latchsim_circuit_node_count(circuit: *const LatchsimCircuit) -> usize {
    circuit.as_ref().map_or(0, |c| c.inner.node_count())
}

/// Runs a transient to `t_stop` seconds. `t_stop` 0 computes the DC
/// operating point only; a negative `t_stop` uses the netlist `.tran`.
/// `h_max` ≤ 0 keeps the netlist or default step ceiling.
///
/// # Safety
/// `circuit` must be a live handle; `out_waveforms` must be writable.
#[no_mangle]
pub unsafe extern "C" fn latchsim_simulate(
    circuit: *const LatchsimCircuit,
    t_stop: f64,
    h_max: f64,
    out_waveforms: *mut *mut LatchsimWaveforms,
) -> LatchsimStatus {
    guard(|| {
        let slot = out(out_waveforms, "out_waveforms")?;
        *slot = ptr::null_mut();
        let c = &circuit.as_ref().ok_or_else(|| bad("circuit is null"))?.inner;
        let config = SolverConfig {
            h_max: if h_max > 0.0 {
                Some(h_max)
            } else {
                c.tran.and_then(|t| t.tmax)
            },
            ..SolverConfig::default()
        };
        let t_stop = if t_stop < 0.0 {
            c.tran
                .map(|t| t.tstop)
                .ok_or_else(|| bad("negative t_stop but the netlist has no .tran"))?
        } else {
            t_stop
        };
        if !t_stop.is_finite() {
            return Err(bad("t_stop must be finite"));
        }
        let waves = if t_stop == 0.0 {
            operating_point_waveforms(c, &config)?
        } else {
            transient(c, t_stop, &config, &[])?
        };
        *slot = Box::into_raw(Box::new(LatchsimWaveforms::new(waves)));
        Ok(())
    })
}

/// # Safety
/// `waveforms` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn latchsim_waveforms_free(waveforms: *mut LatchsimWaveforms) {
    if !waveforms.is_null() {
        drop(Box::from_raw(waveforms));
    }
}

/// Number of time points, 0 for null.
///
/// # Safety
/// `waveforms` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn latchsim_waveforms_len(waveforms: *const LatchsimWaveforms) -> usize {
    waveforms.as_ref().map_or(0, |w| w.inner.len())
}

/// # Safety
/// `waveforms` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn latchsim_waveforms_signal_count(waveforms: *const LatchsimWaveforms) -> usize {
    waveforms.as_ref().map_or(0, |w| w.names.len())
}

/// Name of signal `index`, owned by the handle; null if out of range.
///
/// # Safety
/// `waveforms` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn latchsim_waveforms_signal_name(
    waveforms: *const LatchsimWaveforms,
    index: usize,
) -> *const c_char {
    waveforms
        .as_ref()
        .and_then(|w| w.names.get(index))
        .map_or(ptr::null(), |n| n.as_ptr())
}

/// Time column of `latchsim_waveforms_len` values, owned by the handle.
///
/// # Safety
/// `waveforms` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn latchsim_waveforms_time(waveforms: *const LatchsimWaveforms) -> *const f64 {
    waveforms.as_ref().map_or(ptr::null(), |w| w.inner.time.as_ptr())
}

/// Column of signal `name` (e.g. `v(out)`, `i(v1)`), owned by the handle.
///
/// # Safety
/// `waveforms` must be a live handle; `name` NUL-terminated; `out_data`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn latchsim_waveforms_signal(
    waveforms: *const LatchsimWaveforms,
    name: *const c_char,
    out_data: *mut *const f64,
) -> LatchsimStatus {
    guard(|| {
        let slot = out(out_data, "out_data")?;
        *slot = ptr::null();
        let w = waveforms.as_ref().ok_or_else(|| bad("waveforms is null"))?;
        let name = text(name, "name")?;
        let col = w.inner.get(name).ok_or_else(|| bad(&format!("no signal `{name}`")))?;
        *slot = col.as_ptr();
        Ok(())
    })
}

/// Writes the waveforms as CSV with `digits` significant digits (1..=17).
///
/// # Safety
/// `waveforms` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn latchsim_waveforms_write_csv(
    waveforms: *const LatchsimWaveforms,
    path: *const c_char,
    digits: u32,
) -> LatchsimStatus {
    guard(|| {
        let w = waveforms.as_ref().ok_or_else(|| bad("waveforms is null"))?;
        let path = text(path, "path")?;
        if !(1..=17).contains(&digits) {
            return Err(bad(&format!("digits must be in 1..=17, got {digits}")));
        }
        let io = |e: std::io::Error| CliError::Io(format!("{path}: {e}"));
        let file = File::create(path).map_err(io)?;
        w.inner
            .write_csv_digits(BufWriter::new(file), digits as usize)
            .map_err(io)
    })
}

/// Off-time of the power-cycling timer.
///
/// # Safety
/// `params` readable, `out_off_time` writable.
#[no_mangle]
pub unsafe extern "C" fn latchsim_off_time(
    params: *const LatchsimOffTimeParams,
    out_off_time: *mut LatchsimOffTime,
) -> LatchsimStatus {
    guard(|| {
        let p = *params.as_ref().ok_or_else(|| bad("params is null"))?;
        let slot = out(out_off_time, "out_off_time")?;
        let b = design::off_time(&p.into())?;
        *slot = LatchsimOffTime {
            t1: b.t1,
            t2: b.t2,
            total: b.total,
        };
        Ok(())
    })
}

/// Value of the `free` timer component that yields `target` seconds; the
/// matching field of `params` is ignored.
///
/// # Safety
/// `params` readable, `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn latchsim_solve_off_time(
    target: f64,
    params: *const LatchsimOffTimeParams,
    free: LatchsimFreeParam,
    out_value: *mut f64,
) -> LatchsimStatus {
    guard(|| {
        let p = *params.as_ref().ok_or_else(|| bad("params is null"))?;
        let slot = out(out_value, "out_value")?;
        let free = match free {
            LatchsimFreeParam::R1 => FreeParam::R1,
            LatchsimFreeParam::C1 => FreeParam::C1,
            LatchsimFreeParam::R2 => FreeParam::R2,
            LatchsimFreeParam::C2 => FreeParam::C2,
        };
        *slot = design::solve_rc_for_off_time(target, &p.into(), free)?;
        Ok(())
    })
}

/// Gate-drive window, shrunk by `guard_fraction` of its width for the
/// guarded bounds.
///
/// # Safety
/// `model` and `spec` readable, `out_window` writable.
#[no_mangle]
pub unsafe extern "C" fn latchsim_vgs_window(
    model: *const LatchsimMosfet,
    spec: *const LatchsimSafetySpec,
    guard_fraction: f64,
    out_window: *mut LatchsimVgsWindow,
) -> LatchsimStatus {
    guard(|| {
        let m = *model.as_ref().ok_or_else(|| bad("model is null"))?;
        let s = *spec.as_ref().ok_or_else(|| bad("spec is null"))?;
        let slot = out(out_window, "out_window")?;
        let model = MosfetModel {
            k_gain: m.k_gain,
            vt0: m.vt0,
            vt_tempco: m.vt_tempco,
            lambda: m.lambda,
        };
        let spec = DeviceSafetySpec {
            i_op: s.i_op,
            i_max: s.i_max,
            t_min: s.t_min,
            t_max: s.t_max,
        };
        let w = design::vgs_window_guarded(&model, &spec, guard_fraction)?;
        *slot = LatchsimVgsWindow {
            lo: w.lo,
            hi: w.hi,
            feasible: w.feasible,
            vt_max: w.vt_max,
            vt_min: w.vt_min,
            guarded_lo: nan(w.guarded.map(|g| g.0)),
            guarded_hi: nan(w.guarded.map(|g| g.1)),
            shortfall: w.shortfall,
            i_max_needed: w.i_max_needed,
            vt_spread_allowed: nan(w.vt_spread_allowed),
        };
        Ok(())
    })
}

/// Least-squares square-law fit to `n` (vgs, current) pairs.
///
/// # Safety
/// `vgs` and `current` must hold `n` values; `out_fit` writable.
#[no_mangle]
pub unsafe extern "C" fn latchsim_fit_square_law(
    vgs: *const f64,
    current: *const f64,
    n: usize,
    out_fit: *mut LatchsimSquareLawFit,
) -> LatchsimStatus {
    guard(|| {
        let slot = out(out_fit, "out_fit")?;
        let points: Vec<(f64, f64)> = slice(vgs, n, "vgs")?
            .iter()
            .copied()
            .zip(slice(current, n, "current")?.iter().copied())
            .collect();
        let f = design::fit_square_law(&points)?;
        *slot = LatchsimSquareLawFit {
            k_gain: f.k_gain,
            vt0: f.vt0,
            rms_residual: f.rms_residual,
        };
        Ok(())
    })
}

/// Runs one bench scenario. `preset` is `vgs5`, `vgs4`, `vgs3`, `vgs2p5`
/// or `unprotected`; `keys`/`values` override bench parameters by name;
/// `fire_times` lists SEL events. `out_waveforms` may be null when the
/// waveforms are not wanted.
///
/// # Safety
/// Strings NUL-terminated; arrays sized as given; `out_measurements`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn latchsim_sel_run(
    preset: *const c_char,
    keys: *const *const c_char,
    values: *const f64,
    n_params: usize,
    fire_times: *const f64,
    n_fires: usize,
    t_stop: f64,
    out_measurements: *mut LatchsimSelMeasurements,
    out_waveforms: *mut *mut LatchsimWaveforms,
) -> LatchsimStatus {
    guard(|| {
        let slot = out(out_measurements, "out_measurements")?;
        if let Some(w) = out_waveforms.as_mut() {
            *w = ptr::null_mut();
        }
        let preset = Preset::parse(text(preset, "preset")?)?;
        let mut params = preset.params();
        for (k, v) in overrides(keys, values, n_params)? {
            params.set(&k, v)?;
        }
        for &t in slice(fire_times, n_fires, "fire_times")? {
            params.inject_sel(t);
        }
        if !(t_stop > 0.0 && t_stop.is_finite()) {
            return Err(bad(&format!("t_stop must be positive, got {t_stop}")));
        }
        let r = run_scenario(&params, preset.protected(), t_stop, &SolverConfig::default())?;
        let m = &r.measurements;
        *slot = LatchsimSelMeasurements {
            fire_time: nan(m.fire_time),
            i_op: m.i_op,
            i_peak: m.i_peak,
            i_limited: nan(m.i_limited),
            t_detect: nan(m.t_detect),
            t_power_off: nan(m.t_power_off),
            t_off: nan(m.t_off),
            t_restart: nan(m.t_restart),
            v_o: nan(m.v_o),
            v_c2_min: nan(m.v_c2_min),
            i_final: m.i_final,
            predicted_limit: params.current_limit(),
            choreography_in_order: m.choreography_in_order(),
        };
        if let Some(w) = out_waveforms.as_mut() {
            *w = Box::into_raw(Box::new(LatchsimWaveforms::new(r.waves)));
        }
        Ok(())
    })
}
