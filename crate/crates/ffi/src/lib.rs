//! C interface to the cqdae solvers.
//!
//! All objects are opaque handles created and released by this library.
//! Every fallible call returns a [`CqStatus`]; the message of the last
//! failure on the calling thread is available from
//! [`cq_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cqdae::circuit::{Circuit, MnaOptions};
use cqdae::run::{circuit_weights, simulate, Method, RunSpec, Solver};
use cqdae::steppers::{ConvMode, NonlinearSubsystem, Trajectory};
use cqdae::weights::{CQWeightTable, ContourMode};
use cqdae::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Input, configuration or weight-binding error.
    Config = 3,
    /// Numerical failure (singular pencil, Newton divergence, overflow).
    Numerical = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Time integrators.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CqMethod {
    Euler = 0,
    Bdf2 = 1,
    Radau1 = 2,
    Radau2 = 3,
    Radau3 = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CqSolver {
    Coupled = 0,
    Reduced = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CqContour {
    Experiment = 0,
    Conservative = 1,
}

/// Grid and discretization of a run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CqRunOptions {
    pub method: CqMethod,
    pub solver: CqSolver,
    pub steps: usize,
    pub horizon: f64,
    pub contour: CqContour,
    /// Tolerance of the conservative contour.
    pub eps: f64,
    /// Nonzero for naive convolution sums.
    pub naive_convolution: c_int,
}

/// Parsed circuit with its device.
pub struct CqCircuit(Circuit);

/// Precomputed convolution weights.
pub struct CqWeights(CQWeightTable);

/// Simulation result.
pub struct CqTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> CqStatus {
    if e.exit_code() == 2 {
        CqStatus::Config
    } else {
        CqStatus::Numerical
    }
}

fn guard(f: impl FnOnce() -> Result<(), (CqStatus, String)>) -> CqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CqStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CqStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (CqStatus, String) {
    (status_of(&e), e.to_string())
}

fn null_err(what: &str) -> (CqStatus, String) {
    (CqStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (CqStatus, String)> {
    if p.is_null() {
        return Err(null_err(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (CqStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn run_spec(opts: &CqRunOptions) -> Result<RunSpec, (CqStatus, String)> {
    let method = match opts.method {
        CqMethod::Euler => Method::Euler,
        CqMethod::Bdf2 => Method::Bdf2,
        CqMethod::Radau1 => Method::Radau1,
        CqMethod::Radau2 => Method::Radau2,
        CqMethod::Radau3 => Method::Radau3,
    };
    let solver = match opts.solver {
        CqSolver::Coupled => Solver::Coupled,
        CqSolver::Reduced => Solver::Reduced,
    };
    let contour = match opts.contour {
        CqContour::Experiment => ContourMode::Experiment,
        CqContour::Conservative => ContourMode::Conservative,
    };
    let conv = if opts.naive_convolution != 0 { ConvMode::Naive } else { ConvMode::Fft };
    let spec = RunSpec::new(method, solver, opts.horizon, opts.steps).map_err(lib_err)?;
    Ok(RunSpec { eps: opts.eps, ..spec.with_contour(contour).with_conv(conv) })
}

/// Default options: implicit Euler, reduced solver, 100 steps on `[0, 1]`,
/// experiment contour.
#[no_mangle]
pub extern "C" fn cq_run_options_default() -> CqRunOptions {
    CqRunOptions {
        method: CqMethod::Euler,
        solver: CqSolver::Reduced,
        steps: 100,
        horizon: 1.0,
        contour: CqContour::Experiment,
        eps: 1e-16,
        naive_convolution: 0,
    }
}

/// Parses a netlist. Relative device paths resolve against `base_dir`
/// (may be null for the working directory). `diode_offset` must be +1 or -1.
///
/// # Safety
/// `netlist` and `base_dir` must be null or NUL-terminated strings; `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cq_circuit_from_netlist(
    netlist: *const c_char,
    base_dir: *const c_char,
    diode_offset: f64,
    out: *mut *mut CqCircuit,
) -> CqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_err("out"));
        }
        *out = ptr::null_mut();
        let text = c_str(netlist, "netlist")?;
        let base = if base_dir.is_null() { "." } else { c_str(base_dir, "base_dir")? };
        if diode_offset != 1.0 && diode_offset != -1.0 {
            return Err((CqStatus::InvalidArgument, format!("diode offset must be +1 or -1, got {diode_offset}")));
        }
        let c = Circuit::from_text(text, "<netlist>", Path::new(base), &MnaOptions { diode_offset }).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CqCircuit(c)));
        Ok(())
    })
}

/// Number of unknowns of the circuit (node potentials and branch currents).
///
/// # Safety
/// `circuit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cq_circuit_dim(circuit: *const CqCircuit) -> usize {
    circuit.as_ref().map_or(0, |c| c.0.model.dim())
}

/// # Safety
/// `circuit` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cq_circuit_free(circuit: *mut CqCircuit) {
    if !circuit.is_null() {
        drop(Box::from_raw(circuit));
    }
}

/// Offline stage: weights of the circuit's device for `opts`.
///
/// # Safety
/// `circuit` and `opts` must be live; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cq_weights_compute(
    circuit: *const CqCircuit,
    opts: *const CqRunOptions,
    out: *mut *mut CqWeights,
) -> CqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_err("out"));
        }
        *out = ptr::null_mut();
        let c = circuit.as_ref().ok_or_else(|| null_err("circuit"))?;
        let o = opts.as_ref().ok_or_else(|| null_err("opts"))?;
        let table = circuit_weights(&c.0, &run_spec(o)?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CqWeights(table)));
        Ok(())
    })
}

/// Number of weights in the table.
///
/// # Safety
/// `weights` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cq_weights_len(weights: *const CqWeights) -> usize {
    weights.as_ref().map_or(0, |w| w.0.len())
}

/// # Safety
/// `weights` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cq_weights_free(weights: *mut CqWeights) {
    if !weights.is_null() {
        drop(Box::from_raw(weights));
    }
}

/// Runs a simulation. `weights` may be null; it is only accepted by the
/// reduced solver and must match `opts`.
///
/// # Safety
/// `circuit` and `opts` must be live, `weights` null or live, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cq_simulate(
    circuit: *const CqCircuit,
    weights: *const CqWeights,
    opts: *const CqRunOptions,
    out: *mut *mut CqTrajectory,
) -> CqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_err("out"));
        }
        *out = ptr::null_mut();
        let c = circuit.as_ref().ok_or_else(|| null_err("circuit"))?;
        let o = opts.as_ref().ok_or_else(|| null_err("opts"))?;
        let spec = run_spec(o)?;
        let w = weights.as_ref().map(|w| &w.0);
        if let Some(table) = w {
            let cpl = c.0.model.coupling();
            table
                .check_binding(spec.method.weight_kind(), spec.tau, spec.steps, cpl.n_inputs(), cpl.n_outputs())
                .map_err(lib_err)?;
        }
        let r = simulate(&c.0, &spec, w).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CqTrajectory(r.trajectory)));
        Ok(())
    })
}

/// Number of steps `N`; the trajectory holds `N + 1` time points.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cq_trajectory_steps(traj: *const CqTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.steps())
}

/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cq_trajectory_dim(traj: *const CqTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.dim())
}

/// Copies the solution row-major (`(N + 1) × dim`) into `buf`.
///
/// # Safety
/// `traj` must be live and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cq_trajectory_copy(traj: *const CqTrajectory, buf: *mut f64, len: usize) -> CqStatus {
    guard(|| {
        let t = traj.as_ref().ok_or_else(|| null_err("trajectory"))?;
        if buf.is_null() {
            return Err(null_err("buf"));
        }
        let need = t.0.y.len() * t.0.dim();
        if len < need {
            return Err((CqStatus::BufferTooSmall, format!("buffer holds {len} values, need {need}")));
        }
        let out = std::slice::from_raw_parts_mut(buf, need);
        for (row, y) in out.chunks_mut(t.0.dim().max(1)).zip(&t.0.y) {
            row.copy_from_slice(y.as_slice());
        }
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cq_trajectory_free(traj: *mut CqTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Copies the last error message of this thread (NUL-terminated,
/// truncated to `len`). Returns the full message length.
///
/// # Safety
/// `buf` must be null or hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn cq_last_error_message(buf: *mut c_char, len: usize) -> usize {
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
