use std::ffi::{CStr, CString};
use std::ptr;

use castsim_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(castsim_last_error()) }
        .to_string_lossy()
        .into_owned()
}

const PARAMS: [f64; 8] = [9.0e4, 1.0, 0.05, 1e-3, 0.01, 0.01, 0.1, 1e-3];

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(castsim_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn malformed_scenario_reports_parse_error() {
    let json = CString::new("{\"plant\": {}}").unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { castsim_scenario_from_json(json.as_ptr(), &mut out) };
    assert_eq!(status, CastsimStatus::Parse);
    assert!(out.is_null());
    assert!(last_error().contains("line 1"), "{}", last_error());
}

#[test]
fn null_arguments_are_rejected() {
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { castsim_scenario_from_json(ptr::null(), &mut out) },
        CastsimStatus::NullPointer
    );
    assert_eq!(
        unsafe { castsim_run_trial(ptr::null(), ptr::null_mut()) },
        CastsimStatus::NullPointer
    );
    assert_eq!(unsafe { castsim_trial_success(ptr::null()) }, 0);
    assert!(unsafe { castsim_trial_log_json(ptr::null()) }.is_null());
    unsafe {
        castsim_scenario_free(ptr::null_mut());
        castsim_trial_free(ptr::null_mut());
        castsim_rollout_free(ptr::null_mut());
    }
}

#[test]
fn hanging_string_accelerations() {
    let n = 4;
    let spacing = 0.1;
    let mut pos = Vec::new();
    for i in 0..n {
        // Static stretch for k_s = 9e4: g (n - 1 - j) / k_s per segment.
        let sag: f64 = (0..i).map(|j| 9.81 * (n - 1 - j) as f64 / PARAMS[0]).sum();
        pos.extend([0.0, -(i as f64) * spacing - sag]);
    }
    let vel = vec![0.0; 2 * n];
    let hand = [0.0, 0.0, -std::f64::consts::FRAC_PI_2, 0.0, 0.0, 0.0];
    let mut out = vec![f64::NAN; 2 * n];
    let status = unsafe {
        castsim_net_accelerations(
            PARAMS.as_ptr(),
            n,
            0.3,
            pos.as_ptr(),
            vel.as_ptr(),
            hand.as_ptr(),
            out.as_mut_ptr(),
        )
    };
    assert_eq!(status, CastsimStatus::Ok, "{}", last_error());
    for a in &out[2..] {
        assert!(a.abs() < 1e-9, "{out:?}");
    }
}

#[test]
fn bad_params_are_a_config_error() {
    let mut p = PARAMS;
    p[0] = -1.0;
    let mut out = ptr::null_mut();
    let plan = CString::new("{}").unwrap();
    let status = unsafe { castsim_rollout_new(p.as_ptr(), 10, 0.3, plan.as_ptr(), &mut out) };
    assert_eq!(status, CastsimStatus::Config);
    assert!(!last_error().is_empty());
}

#[test]
fn stationary_rollout_keeps_the_tip_still() {
    // Joint angles sum to -pi/2: the hand axis points straight down.
    let plan = CString::new(
        r#"{"initial_angles_rad": [-1.0, 0.5, -1.0707963267948966], "duration_s": 0.2,
            "control_velocities_rad_s": [[0,0,0,0,0,0],[0,0,0,0,0,0],[0,0,0,0,0,0]]}"#,
    )
    .unwrap();
    let mut r = ptr::null_mut();
    let status = unsafe { castsim_rollout_new(PARAMS.as_ptr(), 10, 0.3, plan.as_ptr(), &mut r) };
    assert_eq!(status, CastsimStatus::Ok, "{}", last_error());
    let len = unsafe { castsim_rollout_len(r) };
    assert!(len > 100);
    let (mut t0, mut x0, mut y0) = (0.0, 0.0, 0.0);
    let (mut t, mut x, mut y) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(castsim_rollout_tip(r, 0, &mut t0, &mut x0, &mut y0), CastsimStatus::Ok);
        assert_eq!(
            castsim_rollout_tip(r, len - 1, &mut t, &mut x, &mut y),
            CastsimStatus::Ok
        );
        assert_eq!(
            castsim_rollout_tip(r, len, &mut t, &mut x, &mut y),
            CastsimStatus::OutOfRange
        );
        castsim_rollout_free(r);
    }
    assert_eq!(t0, 0.0);
    assert!(t > 0.5);
    assert!((x - x0).abs() < 1e-6 && (y - y0).abs() < 1e-6);
}

#[test]
fn trial_through_the_abi() {
    let json = CString::new(
        r#"{"name": "ffi", "seed": 3, "max_iterations": 2,
            "target": {"x_ref_m": 0.5, "y_ref_m": 0.9, "w_m": 0.3, "h_m": 0.3},
            "plant": {"hidden_params": {"k_s": 9e4, "c_s": 1, "k_h": 0.05, "c_h": 1e-3,
                      "c_c1": 0.01, "c_c2": 0.01, "k_ph": 0.1, "c_ph": 1e-3}},
            "estimation": {"samples": 20}}"#,
    )
    .unwrap();
    let mut scenario = ptr::null_mut();
    assert_eq!(
        unsafe { castsim_scenario_from_json(json.as_ptr(), &mut scenario) },
        CastsimStatus::Ok,
        "{}",
        last_error()
    );
    assert_eq!(unsafe { castsim_scenario_set_seed(scenario, 4) }, CastsimStatus::Ok);
    let mut trial = ptr::null_mut();
    assert_eq!(
        unsafe { castsim_run_trial(scenario, &mut trial) },
        CastsimStatus::Ok,
        "{}",
        last_error()
    );
    let iterations = unsafe { castsim_trial_iterations(trial) };
    assert!((1..=2).contains(&iterations));
    let log = unsafe { CStr::from_ptr(castsim_trial_log_json(trial)) }
        .to_str()
        .unwrap()
        .to_owned();
    let value: serde_json::Value = serde_json::from_str(&log).unwrap();
    assert_eq!(value["seed"], 4);
    assert_eq!(
        value["success"].as_bool().unwrap(),
        unsafe { castsim_trial_success(trial) } == 1
    );

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { castsim_trial_write(trial, scenario, path.as_ptr()) },
        CastsimStatus::Ok,
        "{}",
        last_error()
    );
    assert!(dir.path().join("trial.json").is_file());
    assert!(dir.path().join("frames/frames.idx").is_file());
    unsafe {
        castsim_trial_free(trial);
        castsim_scenario_free(scenario);
    }
}
