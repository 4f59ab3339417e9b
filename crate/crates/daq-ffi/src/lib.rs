//! C ABI over the tabular ensemble Q-learning laboratory.
//!
//! Every fallible call returns a [`DaqStatus`] and writes its outputs only on
//! success. Environment handles are opaque; release them with
//! [`daq_env_free`]. [`daq_last_error`] describes the most recent failure on
//! the calling thread. The C header is generated into `include/daq.h` at
//! build time.
//!
//! All pointer-taking entry points are `unsafe`: they null-check every
//! pointer, but cannot defend against dangling or undersized ones, so the
//! caller owns those contracts (spelled out per function).

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use daq::agents::{AgentConfig, AlgorithmKind};
use daq::analysis::{finite_time_bound, value_iteration, BoundParams};
use daq::config::parse_experiment;
use daq::envs::{Env, GridVariant};
use daq::game::verify_equivalence;
use daq::harness::run_experiment;
use daq::schedule::{ExplorationSchedule, StepSizeSchedule};
use daq::DaqError;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DaqStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A value failed validation; `daq_last_error` has the detail.
    InvalidArgument = 2,
    /// An iterative solver hit its iteration cap.
    NoConvergence = 3,
    /// Reading or writing a file failed.
    IoError = 4,
    /// An internal invariant broke; `daq_last_error` has the detail.
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let raw = msg.into();
    let text = CString::new(raw)
        .unwrap_or_else(|_| CString::new("error message contained a NUL byte").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
}

fn ok() -> DaqStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::default());
    DaqStatus::Ok
}

fn null_arg(name: &str) -> DaqStatus {
    set_error(format!("{name} must not be null"));
    DaqStatus::NullPointer
}

fn fail(err: &DaqError) -> DaqStatus {
    set_error(err.to_string());
    match err {
        DaqError::InvalidConfig(_) | DaqError::InvalidParam(_) => DaqStatus::InvalidArgument,
        DaqError::NoConvergence { .. } => DaqStatus::NoConvergence,
        DaqError::Io { .. } => DaqStatus::IoError,
    }
}

/// Panics must not unwind across the ABI; they become `Panic` statuses.
fn guarded(body: impl FnOnce() -> DaqStatus) -> DaqStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let detail = payload
                .downcast_ref::<&str>()
                .map(|s| (*s).to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {detail}"));
            DaqStatus::Panic
        }
    }
}

/// Description of the most recent failure on this thread; empty after a
/// success. The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn daq_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn daq_status_message(status: DaqStatus) -> *const c_char {
    let msg: &'static str = match status {
        DaqStatus::Ok => "success\0",
        DaqStatus::NullPointer => "a required pointer argument was null\0",
        DaqStatus::InvalidArgument => "an argument failed validation\0",
        DaqStatus::NoConvergence => "an iterative solver hit its iteration cap\0",
        DaqStatus::IoError => "a file could not be read or written\0",
        DaqStatus::Panic => "an internal invariant broke\0",
    };
    msg.as_ptr() as *const c_char
}

/// Opaque environment handle.
pub struct DaqEnv {
    inner: Env,
}

fn env_out(out: *mut *mut DaqEnv, env: Env) -> DaqStatus {
    unsafe { *out = Box::into_raw(Box::new(DaqEnv { inner: env })) };
    ok()
}

/// Creates the 3x3 grid task. `noisy_goal` 0 gives noisy step rewards and a
/// fixed goal reward; nonzero gives fixed step rewards and a noisy goal.
///
/// # Safety
/// `out` must be null or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn daq_env_grid(noisy_goal: c_int, out: *mut *mut DaqEnv) -> DaqStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let variant = if noisy_goal == 0 {
            GridVariant::NoisyStep
        } else {
            GridVariant::NoisyGoal
        };
        env_out(out, Env::grid(variant))
    })
}

/// Creates the two-state chain with `k` noisy terminal actions of mean `mu`.
///
/// # Safety
/// `out` must be null or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn daq_env_sutton(k: usize, mu: f64, out: *mut *mut DaqEnv) -> DaqStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        match Env::sutton(k, mu) {
            Ok(env) => env_out(out, env),
            Err(e) => fail(&e),
        }
    })
}

/// Creates the hub chain with `m` looping inner states.
///
/// # Safety
/// `out` must be null or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn daq_env_weng(m: usize, out: *mut *mut DaqEnv) -> DaqStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        match Env::weng(m) {
            Ok(env) => env_out(out, env),
            Err(e) => fail(&e),
        }
    })
}

/// Releases an environment handle; a null handle is ignored.
///
/// # Safety
/// `env` must be null or a handle from a `daq_env_*` constructor that has not
/// been freed yet; it is invalid after this call.
#[no_mangle]
pub unsafe extern "C" fn daq_env_free(env: *mut DaqEnv) {
    if !env.is_null() {
        drop(unsafe { Box::from_raw(env) });
    }
}

/// Number of states, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle from a `daq_env_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn daq_env_n_states(env: *const DaqEnv) -> usize {
    if env.is_null() {
        return 0;
    }
    unsafe { &*env }.inner.n_states()
}

/// Largest per-state action count, or 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle from a `daq_env_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn daq_env_max_actions(env: *const DaqEnv) -> usize {
    if env.is_null() {
        return 0;
    }
    unsafe { &*env }.inner.max_actions()
}

/// Valid actions at `state`, or 0 for a null handle or an out-of-range state.
///
/// # Safety
/// `env` must be null or a live handle from a `daq_env_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn daq_env_n_actions(env: *const DaqEnv, state: usize) -> usize {
    if env.is_null() {
        return 0;
    }
    let env = &unsafe { &*env }.inner;
    if state >= env.n_states() {
        return 0;
    }
    env.n_actions(state)
}

/// Conventional discount of the task, or NaN for a null handle.
///
/// # Safety
/// `env` must be null or a live handle from a `daq_env_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn daq_env_default_gamma(env: *const DaqEnv) -> f64 {
    if env.is_null() {
        return f64::NAN;
    }
    unsafe { &*env }.inner.default_gamma()
}

/// Solves the environment's expected model by value iteration with a uniform
/// reward shift. Writes `n_states * max_actions` action values (row-major,
/// padding entries of invalid actions are 0) into `out_q`, which must hold at
/// least that many elements. `out_iterations` and `out_residual` are optional.
///
/// # Safety
/// `env` must be null or a live handle; `out_q` must be null or valid for
/// writing `out_q_len` doubles; the optional outputs must each be null or
/// valid for one write.
#[no_mangle]
pub unsafe extern "C" fn daq_oracle_q(
    env: *const DaqEnv,
    shift: f64,
    tol: f64,
    max_iter: u64,
    out_q: *mut f64,
    out_q_len: usize,
    out_iterations: *mut u64,
    out_residual: *mut f64,
) -> DaqStatus {
    guarded(|| {
        if env.is_null() {
            return null_arg("env");
        }
        if out_q.is_null() {
            return null_arg("out_q");
        }
        let env = &unsafe { &*env }.inner;
        let needed = env.n_states() * env.max_actions();
        if out_q_len < needed {
            set_error(format!(
                "out_q holds {out_q_len} values but the solution needs {needed}"
            ));
            return DaqStatus::InvalidArgument;
        }
        let solution = match value_iteration(&env.expected_mdp(), shift, tol, max_iter) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        let values = solution.q.values();
        unsafe {
            std::ptr::copy_nonoverlapping(values.as_ptr(), out_q, values.len());
            if !out_iterations.is_null() {
                *out_iterations = solution.iterations;
            }
            if !out_residual.is_null() {
                *out_residual = solution.residual;
            }
        }
        ok()
    })
}

/// Inputs to the finite-time bound. `d_min`/`d_max` are the extremes of the
/// behavior distribution over state-action pairs; with `synchronized` = 0 the
/// calculator divides them by `n_estimators` for the per-estimator draw.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct DaqBoundInputs {
    pub alpha: f64,
    pub gamma: f64,
    pub n_estimators: usize,
    pub size_sa: usize,
    pub d_min: f64,
    pub d_max: f64,
    pub t: u64,
}

/// Evaluates the finite-time error bound. Each output pointer is optional.
///
/// # Safety
/// `inputs` must be null or point to a readable `DaqBoundInputs`; the output
/// pointers must each be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn daq_finite_time_bound(
    inputs: *const DaqBoundInputs,
    synchronized: c_int,
    out_term1: *mut f64,
    out_term2: *mut f64,
    out_term3: *mut f64,
    out_total: *mut f64,
) -> DaqStatus {
    guarded(|| {
        if inputs.is_null() {
            return null_arg("inputs");
        }
        let i = unsafe { *inputs };
        let params = if synchronized != 0 {
            BoundParams::sync(i.alpha, i.gamma, i.n_estimators, i.size_sa, i.d_min, i.d_max, i.t)
        } else {
            BoundParams::async_uniform(
                i.alpha,
                i.gamma,
                i.n_estimators,
                i.size_sa,
                i.d_min,
                i.d_max,
                i.t,
            )
        };
        let params = match params {
            Ok(p) => p,
            Err(e) => return fail(&e),
        };
        let terms = match finite_time_bound(&params) {
            Ok(t) => t,
            Err(e) => return fail(&e),
        };
        unsafe {
            if !out_term1.is_null() {
                *out_term1 = terms.term1;
            }
            if !out_term2.is_null() {
                *out_term2 = terms.term2;
            }
            if !out_term3.is_null() {
                *out_term3 = terms.term3;
            }
            if !out_total.is_null() {
                *out_total = terms.total();
            }
        }
        ok()
    })
}

/// Replays an asynchronous shifted ensemble against its two-player twin from
/// one seed and reports the largest table deviation (0 means bit-identical).
/// `min_of_max` 0 uses the max-of-min bootstrap, nonzero the min-of-max.
/// `shifts` supplies one reward shift per estimator.
///
/// # Safety
/// `env` must be null or a live handle; `shifts` must be null or valid for
/// reading `n_shifts` doubles; `out_max_deviation` must be null or valid for
/// one write.
#[no_mangle]
pub unsafe extern "C" fn daq_equiv_check(
    env: *const DaqEnv,
    min_of_max: c_int,
    shifts: *const f64,
    n_shifts: usize,
    steps: usize,
    seed: u64,
    alpha: f64,
    epsilon: f64,
    gamma: f64,
    out_max_deviation: *mut f64,
) -> DaqStatus {
    guarded(|| {
        if env.is_null() {
            return null_arg("env");
        }
        if shifts.is_null() {
            return null_arg("shifts");
        }
        if out_max_deviation.is_null() {
            return null_arg("out_max_deviation");
        }
        if n_shifts == 0 {
            set_error("need at least one shift");
            return DaqStatus::InvalidArgument;
        }
        let env = &unsafe { &*env }.inner;
        let shifts = unsafe { std::slice::from_raw_parts(shifts, n_shifts) }.to_vec();
        let kind = if min_of_max != 0 {
            AlgorithmKind::DaqMinmax
        } else {
            AlgorithmKind::DaqMaxmin
        };
        let cfg = AgentConfig::new(kind, gamma)
            .with_shifts(shifts)
            .with_step_size(StepSizeSchedule::Constant(alpha))
            .with_exploration(ExplorationSchedule::Constant(epsilon));
        match verify_equivalence(env, &cfg, steps, seed) {
            Ok(report) => {
                unsafe { *out_max_deviation = report.max_deviation };
                ok()
            }
            Err(e) => fail(&e),
        }
    })
}

/// Runs the experiment described by a flat key = value config file. A
/// non-null `out_prefix` overrides the config's output prefix, and the curve
/// CSV files are written under it. `out_episodes`/`out_runs` are optional.
///
/// # Safety
/// `config_path` and `out_prefix` must be null or NUL-terminated strings;
/// the optional outputs must each be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn daq_run_experiment_file(
    config_path: *const c_char,
    out_prefix: *const c_char,
    out_episodes: *mut u64,
    out_runs: *mut u64,
) -> DaqStatus {
    guarded(|| {
        if config_path.is_null() {
            return null_arg("config_path");
        }
        let path = match unsafe { CStr::from_ptr(config_path) }.to_str() {
            Ok(p) => p,
            Err(_) => {
                set_error("config_path is not valid UTF-8");
                return DaqStatus::InvalidArgument;
            }
        };
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                set_error(format!("reading {path}: {e}"));
                return DaqStatus::IoError;
            }
        };
        let mut cfg = match parse_experiment(&text) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        };
        if !out_prefix.is_null() {
            match unsafe { CStr::from_ptr(out_prefix) }.to_str() {
                Ok(p) => cfg.out_prefix = Some(PathBuf::from(p)),
                Err(_) => {
                    set_error("out_prefix is not valid UTF-8");
                    return DaqStatus::InvalidArgument;
                }
            }
        }
        let set = match run_experiment(&cfg) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        unsafe {
            if !out_episodes.is_null() {
                *out_episodes = set.episodes as u64;
            }
            if !out_runs.is_null() {
                *out_runs = set.runs as u64;
            }
        }
        ok()
    })
}
