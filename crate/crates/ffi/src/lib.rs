//! C ABI over `castsim`.
//!
//! Every fallible function returns a [`CastsimStatus`]; on anything other
//! than `CASTSIM_STATUS_OK` the message is available from
//! [`castsim_last_error`] on the same thread. Objects are opaque handles
//! created by `*_new`/`*_from_json`/`castsim_run_trial` and released with the
//! matching `*_free`. Returned strings are borrowed from the library.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use castsim::arm::{realize_trajectory, ArmConfig, MotionPlan};
use castsim::orchestrator::output::write_trial;
use castsim::orchestrator::{run_trial, Scenario, TrialOutcome};
use castsim::string_model::{
    init_hanging_state, net_accelerations, simulate_rollout, HandPose, StringGeometry, StringParams, StringState,
    DEFAULT_DT, GRAVITY,
};
use castsim::{Error, Vec2};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CastsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Parse = 4,
    Simulation = 5,
    Io = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// A validated scenario.
pub struct CastsimScenario {
    inner: Scenario,
}

/// A finished trial with its log and artifact data.
pub struct CastsimTrial {
    outcome: TrialOutcome,
    json: CString,
}

/// States of one learner rollout.
pub struct CastsimRollout {
    states: Vec<StringState>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(message).unwrap_or_default());
}

fn status_of(err: &Error) -> CastsimStatus {
    match err {
        Error::Config(_) => CastsimStatus::Config,
        Error::Parse { .. } | Error::Json(_) => CastsimStatus::Parse,
        Error::Io(_) => CastsimStatus::Io,
        Error::Domain { .. } => CastsimStatus::OutOfRange,
        _ => CastsimStatus::Simulation,
    }
}

fn fail(status: CastsimStatus, message: impl Into<String>) -> CastsimStatus {
    set_error(message);
    status
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (CastsimStatus, String)>) -> CastsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CastsimStatus::Ok
        }
        Ok(Err((status, message))) => fail(status, message),
        Err(_) => fail(CastsimStatus::Panic, "internal panic"),
    }
}

fn lib_err(err: Error) -> (CastsimStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (CastsimStatus, String) {
    (CastsimStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (CastsimStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (CastsimStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn read_params(params: *const f64) -> Result<StringParams, (CastsimStatus, String)> {
    if params.is_null() {
        return Err(null("params"));
    }
    let mut a = [0.0; StringParams::COUNT];
    a.copy_from_slice(std::slice::from_raw_parts(params, StringParams::COUNT));
    let p = StringParams::from_array(a);
    p.validate().map_err(lib_err)?;
    Ok(p)
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn castsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn castsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and validates a scenario document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn castsim_scenario_from_json(
    json: *const c_char,
    out: *mut *mut CastsimScenario,
) -> CastsimStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = read_str(json, "json")?;
        let inner = Scenario::from_json(text).map_err(lib_err)?;
        inner.validate().map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CastsimScenario { inner }));
        Ok(())
    })
}

/// Overrides the scenario seed.
///
/// # Safety
/// `scenario` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn castsim_scenario_set_seed(scenario: *mut CastsimScenario, seed: u64) -> CastsimStatus {
    guard(|| {
        let s = scenario.as_mut().ok_or_else(|| null("scenario"))?;
        s.inner.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `scenario` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn castsim_scenario_free(scenario: *mut CastsimScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs the closed loop. A trial that ends without success still returns
/// `CASTSIM_STATUS_OK`; query [`castsim_trial_success`].
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn castsim_run_trial(
    scenario: *const CastsimScenario,
    out: *mut *mut CastsimTrial,
) -> CastsimStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let outcome = run_trial(&s.inner).map_err(lib_err)?;
        let json = serde_json::to_string_pretty(&outcome.log).map_err(|e| lib_err(e.into()))?;
        let json = CString::new(json).map_err(|e| (CastsimStatus::Simulation, e.to_string()))?;
        *out = Box::into_raw(Box::new(CastsimTrial { outcome, json }));
        Ok(())
    })
}

/// 1 if the trial succeeded, 0 otherwise (also for null).
///
/// # Safety
/// `trial` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn castsim_trial_success(trial: *const CastsimTrial) -> i32 {
    trial.as_ref().map_or(0, |t| i32::from(t.outcome.log.success))
}

/// Number of iterations used (0 for null).
///
/// # Safety
/// `trial` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn castsim_trial_iterations(trial: *const CastsimTrial) -> usize {
    trial.as_ref().map_or(0, |t| t.outcome.log.iterations_used)
}

/// The trial log as JSON, borrowed from the handle.
///
/// # Safety
/// `trial` must be a live handle or null. The pointer dies with the handle.
#[no_mangle]
pub unsafe extern "C" fn castsim_trial_log_json(trial: *const CastsimTrial) -> *const c_char {
    trial.as_ref().map_or(ptr::null(), |t| t.json.as_ptr())
}

/// Writes the trial's artifacts (log, frames, CSV, SVG) under `dir`.
///
/// # Safety
/// Handles must be live; `dir` must be a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn castsim_trial_write(
    trial: *const CastsimTrial,
    scenario: *const CastsimScenario,
    dir: *const c_char,
) -> CastsimStatus {
    guard(|| {
        let t = trial.as_ref().ok_or_else(|| null("trial"))?;
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let dir = read_str(dir, "dir")?;
        write_trial(&t.outcome, &s.inner, Path::new(dir)).map_err(lib_err)
    })
}

/// # Safety
/// `trial` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn castsim_trial_free(trial: *mut CastsimTrial) {
    if !trial.is_null() {
        drop(Box::from_raw(trial));
    }
}

/// Accelerations of an `n`-point string.
///
/// `params` holds k_s, c_s, k_h, c_h, c_c1, c_c2, k_ph, c_ph. `positions`,
/// `velocities` and `out` hold `2 n` doubles (x, y interleaved). `hand`
/// holds x, y, orientation, vx, vy, angular velocity.
///
/// # Safety
/// All pointers must reference arrays of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn castsim_net_accelerations(
    params: *const f64,
    n: usize,
    total_length: f64,
    positions: *const f64,
    velocities: *const f64,
    hand: *const f64,
    out: *mut f64,
) -> CastsimStatus {
    guard(|| {
        let params = read_params(params)?;
        if positions.is_null() || velocities.is_null() || hand.is_null() || out.is_null() {
            return Err(null("array argument"));
        }
        let geometry = StringGeometry::new(n, total_length);
        geometry.validate().map_err(lib_err)?;
        let xy = |p: *const f64| {
            std::slice::from_raw_parts(p, 2 * n)
                .chunks_exact(2)
                .map(|c| Vec2::new(c[0], c[1]))
                .collect::<Vec<_>>()
        };
        let state = StringState {
            positions: xy(positions),
            velocities: xy(velocities),
            time: 0.0,
        };
        let h = std::slice::from_raw_parts(hand, 6);
        let hand = HandPose {
            position: Vec2::new(h[0], h[1]),
            orientation: h[2],
            velocity: Vec2::new(h[3], h[4]),
            angular_velocity: h[5],
        };
        let acc = net_accelerations(&state, &params, &geometry, &hand, GRAVITY).map_err(lib_err)?;
        let out = std::slice::from_raw_parts_mut(out, 2 * n);
        for (o, a) in out.chunks_exact_mut(2).zip(acc) {
            o[0] = a.x;
            o[1] = a.y;
        }
        Ok(())
    })
}

/// Rolls an `n`-point string out along a motion plan (JSON, as in scenario
/// logs) with the default arm, from the hanging state.
///
/// # Safety
/// `params` must hold 8 doubles; `plan_json` must be NUL-terminated; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn castsim_rollout_new(
    params: *const f64,
    n: usize,
    total_length: f64,
    plan_json: *const c_char,
    out: *mut *mut CastsimRollout,
) -> CastsimStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let params = read_params(params)?;
        let text = read_str(plan_json, "plan_json")?;
        let plan: MotionPlan = serde_json::from_str(text).map_err(|e| lib_err(e.into()))?;
        let arm = ArmConfig::default();
        plan.validate(&arm).map_err(lib_err)?;
        let geometry = StringGeometry::new(n, total_length);
        geometry.validate().map_err(lib_err)?;
        let traj = realize_trajectory(&plan, &arm, arm.tail).map_err(lib_err)?;
        let hand = traj.hand_samples();
        let initial = init_hanging_state(&hand[0].1, &geometry, &params);
        let states = simulate_rollout(&params, &geometry, &hand, &initial, DEFAULT_DT).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(CastsimRollout { states }));
        Ok(())
    })
}

/// Number of recorded states (0 for null).
///
/// # Safety
/// `rollout` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn castsim_rollout_len(rollout: *const CastsimRollout) -> usize {
    rollout.as_ref().map_or(0, |r| r.states.len())
}

/// Time and tip position of state `index`.
///
/// # Safety
/// `rollout` must be a live handle; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn castsim_rollout_tip(
    rollout: *const CastsimRollout,
    index: usize,
    t: *mut f64,
    x: *mut f64,
    y: *mut f64,
) -> CastsimStatus {
    guard(|| {
        let r = rollout.as_ref().ok_or_else(|| null("rollout"))?;
        if t.is_null() || x.is_null() || y.is_null() {
            return Err(null("output pointer"));
        }
        let s = r.states.get(index).ok_or_else(|| {
            (
                CastsimStatus::OutOfRange,
                format!("index {index} of {}", r.states.len()),
            )
        })?;
        let tip = s.tip();
        *t = s.time;
        *x = tip.x;
        *y = tip.y;
        Ok(())
    })
}

/// # Safety
/// `rollout` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn castsim_rollout_free(rollout: *mut CastsimRollout) {
    if !rollout.is_null() {
        drop(Box::from_raw(rollout));
    }
}
