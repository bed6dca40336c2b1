//! C ABI for the dispersive-rbffd solver.
//!
//! Conventions:
//! - every fallible call returns a [`DrbffdStatus`]; `drbffd_last_error()`
//!   gives a thread-local message for the most recent failure, valid until
//!   the next failing call on the same thread
//! - `drbffd_sim_new` allocates an opaque handle; `drbffd_sim_free` releases
//!   it (a null handle is a no-op)
//! - no panic ever crosses the boundary; a caught panic returns
//!   `DRBFFD_STATUS_INTERNAL`

// pointer contracts live in each function's doc text, which cbindgen copies
// into the C header where a rustdoc Safety section has no audience
#![allow(clippy::missing_safety_doc)]

use dispersive_rbffd::config::RunConfig;
use dispersive_rbffd::integrate::{rk4_step, MethodOfLines, BLOWUP_LIMIT};
use dispersive_rbffd::models::{ForcingSpec, SolitonSpec};
use dispersive_rbffd::runner::{discretize, execute};
use dispersive_rbffd::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Result of every fallible call in this interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrbffdStatus {
    Ok = 0,
    /// Numerical failure (singular system, blow-up, non-finite state, ...).
    Numerical = 1,
    /// Invalid configuration or argument values.
    Config = 2,
    NullPointer = 3,
    InvalidUtf8 = 4,
    Io = 5,
    /// A panic was caught at the boundary; state may be inconsistent.
    Internal = 6,
}

/// Opaque simulation handle: a discretized problem plus its current state.
pub struct DrbffdSim {
    sys: MethodOfLines,
    nodes: Vec<f64>,
    state: Vec<f64>,
    dt: f64,
    step: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = sanitized);
}

fn fail(e: &Error) -> DrbffdStatus {
    set_error(&e.to_string());
    match e {
        Error::Io(_) => DrbffdStatus::Io,
        _ if e.exit_code() == 2 => DrbffdStatus::Config,
        _ => DrbffdStatus::Numerical,
    }
}

fn guarded<F: FnOnce() -> DrbffdStatus>(f: F) -> DrbffdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic caught at the C boundary");
            DrbffdStatus::Internal
        }
    }
}

unsafe fn cstr<'a>(p: *const c_char, what: &str) -> Result<&'a str, DrbffdStatus> {
    if p.is_null() {
        set_error(&format!("{what} is a null pointer"));
        return Err(DrbffdStatus::NullPointer);
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(s),
        Err(_) => {
            set_error(&format!("{what} is not valid UTF-8"));
            Err(DrbffdStatus::InvalidUtf8)
        }
    }
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> DrbffdStatus {
    if buf.is_null() {
        set_error("buf is a null pointer");
        return DrbffdStatus::NullPointer;
    }
    if len != src.len() {
        set_error(&format!("buffer length {len} does not match node count {}", src.len()));
        return DrbffdStatus::Config;
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), buf, len);
    DrbffdStatus::Ok
}

/// Message for the most recent failure on this thread (empty string if none).
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn drbffd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Build a simulation from a JSON run configuration (same schema the CLI
/// accepts) and store the handle in `*out`. The initial state is the exact
/// solitary wave when the config carries one, otherwise rest, with the
/// boundary values applied at t = 0.
#[no_mangle]
pub unsafe extern "C" fn drbffd_sim_new(
    config_json: *const c_char,
    out: *mut *mut DrbffdSim,
) -> DrbffdStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out is a null pointer");
            return DrbffdStatus::NullPointer;
        }
        let json = match cstr(config_json, "config_json") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let cfg: RunConfig = match serde_json::from_str(json) {
            Ok(c) => c,
            Err(e) => return fail(&Error::from(e)),
        };
        let disc = match discretize(&cfg) {
            Ok(d) => d,
            Err(e) => return fail(&e),
        };
        let mut state = match disc.soliton {
            Some(s) => s.sample(&disc.nodes, 0.0),
            None => vec![0.0; disc.nodes.len()],
        };
        if let Err(e) = disc.boundary.apply(&mut state, 0.0) {
            return fail(&e);
        }
        let nodes = disc.nodes.coords().to_vec();
        let sys = match MethodOfLines::new(disc.rhs, disc.boundary) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        *out = Box::into_raw(Box::new(DrbffdSim { sys, nodes, state, dt: cfg.dt, step: 0 }));
        DrbffdStatus::Ok
    })
}

/// Advance the simulation by `n_steps` RK4 steps of the configured dt.
#[no_mangle]
pub unsafe extern "C" fn drbffd_sim_step(sim: *mut DrbffdSim, n_steps: u64) -> DrbffdStatus {
    guarded(|| {
        let Some(sim) = sim.as_mut() else {
            set_error("sim is a null pointer");
            return DrbffdStatus::NullPointer;
        };
        for _ in 0..n_steps {
            let t = sim.step as f64 * sim.dt;
            match rk4_step(&sim.sys, &sim.state, t, sim.dt) {
                Ok(next) => {
                    sim.state = next;
                    sim.step += 1;
                    let max_abs = sim.state.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    if max_abs > BLOWUP_LIMIT {
                        return fail(&Error::BlowUp { t: t + sim.dt, max_abs });
                    }
                }
                Err(e) => return fail(&e),
            }
        }
        DrbffdStatus::Ok
    })
}

/// Current simulation time (steps taken times dt); NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn drbffd_sim_time(sim: *const DrbffdSim) -> f64 {
    match sim.as_ref() {
        Some(s) => s.step as f64 * s.dt,
        None => f64::NAN,
    }
}

/// Number of spatial nodes; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn drbffd_sim_node_count(sim: *const DrbffdSim) -> usize {
    match sim.as_ref() {
        Some(s) => s.nodes.len(),
        None => 0,
    }
}

/// Copy the node coordinates into `buf` (must hold exactly `len` doubles,
/// with `len` equal to the node count).
#[no_mangle]
pub unsafe extern "C" fn drbffd_sim_nodes(
    sim: *const DrbffdSim,
    buf: *mut f64,
    len: usize,
) -> DrbffdStatus {
    guarded(|| {
        let Some(s) = sim.as_ref() else {
            set_error("sim is a null pointer");
            return DrbffdStatus::NullPointer;
        };
        copy_out(&s.nodes, buf, len)
    })
}

/// Copy the current solution values into `buf` (same length contract as
/// `drbffd_sim_nodes`).
#[no_mangle]
pub unsafe extern "C" fn drbffd_sim_state(
    sim: *const DrbffdSim,
    buf: *mut f64,
    len: usize,
) -> DrbffdStatus {
    guarded(|| {
        let Some(s) = sim.as_ref() else {
            set_error("sim is a null pointer");
            return DrbffdStatus::NullPointer;
        };
        copy_out(&s.state, buf, len)
    })
}

/// Release a handle created by `drbffd_sim_new`. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn drbffd_sim_free(sim: *mut DrbffdSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Run a full experiment from a JSON configuration and write its output
/// files (CSV/JSON, plus operator dumps when requested) under `out_dir`.
/// `name` labels the run in meta.json; null means "run".
#[no_mangle]
pub unsafe extern "C" fn drbffd_run_to_dir(
    name: *const c_char,
    config_json: *const c_char,
    out_dir: *const c_char,
    dump_operators: bool,
) -> DrbffdStatus {
    guarded(|| {
        let name = if name.is_null() {
            "run"
        } else {
            match cstr(name, "name") {
                Ok(s) => s,
                Err(status) => return status,
            }
        };
        let json = match cstr(config_json, "config_json") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let dir = match cstr(out_dir, "out_dir") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let cfg: RunConfig = match serde_json::from_str(json) {
            Ok(c) => c,
            Err(e) => return fail(&Error::from(e)),
        };
        match execute(name, &cfg, Path::new(dir), dump_operators) {
            Ok(_) => DrbffdStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Evaluate the closed-form solitary wave for the classic third-order model
/// at (x, t) and store it in `*out`.
#[no_mangle]
pub unsafe extern "C" fn drbffd_soliton_exact(
    speed_c: f64,
    beta: f64,
    gamma_disp: f64,
    x: f64,
    t: f64,
    out: *mut f64,
) -> DrbffdStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out is a null pointer");
            return DrbffdStatus::NullPointer;
        }
        match SolitonSpec::new(speed_c, beta, gamma_disp) {
            Ok(s) => {
                *out = s.eval(x, t);
                DrbffdStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// The built-in left-boundary forcing g(t) = sin(20 pi t) tanh(5 t).
#[no_mangle]
pub extern "C" fn drbffd_forcing_sin_tanh(t: f64) -> f64 {
    ForcingSpec::SinTanh.eval(t).unwrap_or(f64::NAN)
}
