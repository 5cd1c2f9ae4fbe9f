//! Acceptance suite: one line per criterion.
//!
//! `cargo test --test acceptance` runs everything; numeric arguments
//! (`-- 1 4 10`) select criteria. Failing criteria are reported; the exit
//! status is non-zero for them only when `CASTSIM_ACCEPTANCE_STRICT=1`.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use castsim::arm::{generate_motion, sample_trajectory, ArmConfig, HandTrajectory, JOINTS};
use castsim::estimation::{estimate, sample_exponent, search_half_width, EstimationSetup, ParamRange, SearchState};
use castsim::geom::Vec2;
use castsim::matching::{score_states, PreparedObservation};
use castsim::observation::{build_score_field, BinaryFrame, Pixel};
use castsim::orchestrator::scenario::{fine_plant, in_class_plant, obstacle_wall, strings};
use castsim::orchestrator::{generate_until_simulated_success, install_thread_pool, run_trial, Scenario, TrialOutcome};
use castsim::plant::{Plant, TargetSpec};
use castsim::string_model::{
    init_hanging_state, net_accelerations, simulate_rollout, HandPose, StringGeometry, StringParams, StringState,
    DEFAULT_DT, GRAVITY, STANDARD_GRAVITY,
};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

/// Hand trajectories the closed loop accepted in criteria 7 to 9.
#[derive(Default)]
struct Accepted(Vec<(String, HandTrajectory)>);

fn mid_params() -> StringParams {
    ParamRange::default().to_values(&[0.5; StringParams::COUNT])
}

fn c1_hanging() -> Verdict {
    let params = mid_params();
    let geometry = StringGeometry::default();
    let grasp = HandPose::at_rest(Vec2::new(0.1, 0.6), -std::f64::consts::FRAC_PI_2);
    let steps = (5.0 / 0.005_f64).round() as usize;
    let hand: Vec<_> = (0..=steps).map(|k| (k as f64 * 0.005, grasp)).collect();
    let started = Instant::now();
    let initial = init_hanging_state(&grasp, &geometry, &params);
    let states = match simulate_rollout(&params, &geometry, &hand, &initial, DEFAULT_DT) {
        Ok(s) => s,
        Err(e) => return Verdict::new(false, format!("rollout failed: {e}")),
    };
    let elapsed = started.elapsed().as_secs_f64();
    // Segment j carries the weight of the n-1-j unit masses below it.
    let n = geometry.n;
    let l0 = geometry.total_length / (n - 1) as f64;
    let drop: f64 = (0..n - 1)
        .map(|j| l0 + STANDARD_GRAVITY * (n - 1 - j) as f64 / params.k_s)
        .sum();
    let tip = states.last().unwrap().tip();
    let dy = grasp.position.y - tip.y;
    let dx = (tip.x - grasp.position.x).abs();
    let rel = ((dy - drop).abs()).max(dx) / drop;
    Verdict::new(
        rel <= 0.01 && elapsed < 10.0,
        format!(
            "drop {dy:.6} m vs oracle {drop:.6} m, deviation {:.3e} of oracle, {elapsed:.2} s",
            rel
        ),
    )
}

fn c2_force_law() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ranges = ParamRange::default();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(4..=10);
        let chi: [f64; 8] = std::array::from_fn(|_| rng.gen_range(0.0..=1.0));
        let params = ranges.to_values(&chi);
        let geometry = StringGeometry::new(n, 0.3);
        let orientation = rng.gen_range(-3.0..3.0);
        let mut pos = vec![Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))];
        let mut heading: f64 = orientation;
        for _ in 1..n {
            heading += rng.gen_range(-1.2..1.2);
            let len = geometry.rest_length() * rng.gen_range(0.8..1.2);
            let last = *pos.last().unwrap();
            pos.push(last + Vec2::new(heading.cos(), heading.sin()) * len);
        }
        let vel: Vec<Vec2> = (0..n)
            .map(|_| Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
            .collect();
        let hand = HandPose {
            position: pos[0],
            orientation,
            velocity: vel[0],
            angular_velocity: rng.gen_range(-5.0..5.0),
        };
        let state = StringState {
            positions: pos.clone(),
            velocities: vel.clone(),
            time: 0.0,
        };
        let got = net_accelerations(&state, &params, &geometry, &hand, GRAVITY).unwrap();
        let r: Vec<_> = pos.iter().map(|p| (p.x, p.y)).collect();
        let v: Vec<_> = vel.iter().map(|p| (p.x, p.y)).collect();
        let want = common::eq1_accelerations(
            &params,
            geometry.rest_length(),
            (GRAVITY.x, GRAVITY.y),
            0.0,
            &r,
            &v,
            &hand,
        );
        let scale = want.iter().map(|a| a.0.hypot(a.1)).fold(f64::MIN_POSITIVE, f64::max);
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g.x - w.0).hypot(g.y - w.1) / scale);
        }
    }
    Verdict::new(
        worst <= 1e-10,
        format!("worst relative error {worst:.2e} over 100 states"),
    )
}

fn c3_bezier() -> Verdict {
    let arm = ArmConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_v, mut worst_q) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let plan = generate_motion(&mut rng, &arm, [0.2, 1.5]);
        let traj = match sample_trajectory(&plan, &arm, 0.0) {
            Ok(t) => t,
            Err(e) => return Verdict::new(false, format!("sampling failed: {e}")),
        };
        let end = traj
            .samples
            .iter()
            .position(|s| s.time >= plan.duration - 1e-12)
            .unwrap();
        for j in 0..JOINTS {
            worst_v = worst_v
                .max(traj.samples[0].joint_velocities[j].abs())
                .max(traj.samples[end].joint_velocities[j].abs());
        }
        for s in &traj.samples[..=end] {
            let tau = s.time.min(plan.duration);
            for j in 0..JOINTS {
                let controls = &plan.control_velocities[j];
                let v = |t: f64| common::bernstein(controls, t / plan.duration);
                let panels = 10 * (s.time / arm.command_period).round().max(1.0) as usize;
                let want = plan.initial_angles[j] + common::simpson(v, 0.0, tau, panels);
                worst_q = worst_q.max((s.angles[j] - want).abs());
            }
        }
    }
    Verdict::new(
        worst_v < 1e-9 && worst_q < 1e-6,
        format!("max |v| at 0 and T {worst_v:.2e} rad/s, max angle error {worst_q:.2e} rad"),
    )
}

fn c4_score_field() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    for _ in 0..50 {
        let mut frame = BinaryFrame::new(64, 64, 0.0, Pixel::new(0, 0));
        let density = rng.gen_range(0.0..0.05);
        for y in 0..64 {
            for x in 0..64 {
                if rng.gen_bool(density) {
                    frame.set(Pixel::new(x, y));
                }
            }
        }
        let p_max = rng.gen_range(1..=12);
        let field = build_score_field(&frame, p_max);
        let want = common::brute_force_scores(&frame, p_max);
        for y in 0..64 {
            for x in 0..64 {
                if field.get(Pixel::new(x, y)) != want[(y * 64 + x) as usize] {
                    mismatches += 1;
                }
            }
        }
    }
    Verdict::new(
        mismatches == 0,
        format!("{mismatches} mismatching pixels over 50 frames"),
    )
}

fn c5_self_match() -> Verdict {
    let ranges = ParamRange::default();
    let mut min_self = f64::INFINITY;
    let mut out_of_range = 0;
    let mut fixtures = 0;
    let mut seed = 0u64;
    while fixtures < 10 {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let chi: [f64; 8] = std::array::from_fn(|_| rng.gen_range(0.0..=1.0));
        let hidden = ranges.to_values(&chi);
        let scenario = Scenario::new(TargetSpec::new(0.5, 0.9), in_class_plant(hidden));
        let plant = Plant::new(scenario.plant.clone()).unwrap();
        let plan = generate_motion(&mut rng, &scenario.arm, scenario.t_range);
        let Ok(exec) = plant.execute(&plan, &scenario.arm, &scenario.camera, &scenario.obstacle, scenario.dt) else {
            continue;
        };
        fixtures += 1;
        let hand = exec.hand_trajectory.hand_samples();
        let geometry = scenario.learner_geometry;
        let prepared = PreparedObservation::new(&exec.frames, &scenario.match_config).unwrap();
        let states = simulate_rollout(
            &hidden,
            &geometry,
            &hand,
            &init_hanging_state(&hand[0].1, &geometry, &hidden),
            scenario.dt,
        )
        .unwrap();
        let own = score_states(&prepared, &states, &scenario.camera).unwrap();
        min_self = min_self.min(own.e);
        for _ in 0..5 {
            let other = ranges.to_values(&std::array::from_fn(|_| rng.gen_range(0.0..=1.0)));
            let init = init_hanging_state(&hand[0].1, &geometry, &other);
            if let Ok(states) = simulate_rollout(&other, &geometry, &hand, &init, scenario.dt) {
                let e = score_states(&prepared, &states, &scenario.camera).unwrap().e;
                out_of_range += usize::from(!(0.0..=1.0).contains(&e));
            }
        }
        out_of_range += usize::from(!(0.0..=1.0).contains(&own.e));
    }
    Verdict::new(
        min_self >= 0.95 && out_of_range == 0,
        format!("lowest self-match E {min_self:.4} over 10 fixtures, {out_of_range} E outside [0, 1]"),
    )
}

fn c6_sampling() -> Verdict {
    let ranges = ParamRange::default();
    let bounds = ranges.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (chi_0, beta) = (0.6, 0.995);
    let mut breaches = 0;
    for _ in 0..10_000 {
        let k = rng.gen_range(0..StringParams::COUNT);
        let best = rng.gen_range(0.0..=1.0);
        let big_m = rng.gen_range(1..=10u32);
        let m = rng.gen_range(0..3000u64);
        let chi = sample_exponent(best, chi_0, big_m, beta, m, &mut rng);
        let width = chi_0 / big_m as f64 * beta.powi(m as i32);
        let (lo, hi) = ((best - width - 1e-15).max(0.0), (best + width + 1e-15).min(1.0));
        if chi < lo || chi > hi || search_half_width(chi_0, big_m, beta, m) > width * (1.0 + 1e-12) {
            breaches += 1;
        }
        let [pmin, pmax] = bounds[k];
        let value = pmin * (pmax / pmin).powf(chi);
        let mapped = ranges.to_values(&[chi; StringParams::COUNT]).to_array()[k];
        if !(pmin..=pmax).contains(&mapped) || (mapped - value).abs() > 1e-9 * value {
            breaches += 1;
        }
    }
    Verdict::new(breaches == 0, format!("{breaches} breaches in 10^4 draws"))
}

/// Closed-loop training on an in-class plant, returning the final E.
fn recovery_seed(seed: u64, accepted: &mut Vec<(String, HandTrajectory)>) -> Result<(f64, f64), String> {
    let started = Instant::now();
    let ranges = ParamRange::default();
    let mut hidden_rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let chi: [f64; 8] = std::array::from_fn(|_| hidden_rng.gen_range(0.0..1.0));
    let mut scenario = Scenario::new(TargetSpec::new(0.5, 0.9), in_class_plant(ranges.to_values(&chi)));
    scenario.seed = seed;
    let plant = Plant::new(scenario.plant.clone()).map_err(|e| e.to_string())?;
    let setup = EstimationSetup {
        geometry: scenario.learner_geometry,
        ranges: &scenario.ranges,
        budget: &scenario.estimation,
        camera: &scenario.camera,
        match_config: &scenario.match_config,
        dt: scenario.dt,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut search = SearchState::new(&scenario.estimation);
    let mut prev_plan = None;
    let mut last_exec = None;
    let mut e = 0.0;
    for round in 1..=3 {
        let params = search.params(&scenario.ranges);
        // A failed generation re-estimates on the last executed motion.
        if let Ok(m) = generate_until_simulated_success(&params, &scenario, &mut rng, prev_plan.as_ref(), round) {
            let exec = plant
                .execute(
                    &m.plan,
                    &scenario.arm,
                    &scenario.camera,
                    &scenario.obstacle,
                    scenario.dt,
                )
                .map_err(|e| e.to_string())?;
            accepted.push((format!("c7 seed {seed} round {round}"), m.trajectory));
            prev_plan = Some(m.plan);
            last_exec = Some(exec);
        }
        let exec = last_exec.as_ref().ok_or("no motion generated")?;
        let out =
            estimate(&exec.frames, &exec.hand_trajectory, &search, &setup, &mut rng).map_err(|e| e.to_string())?;
        e = out.report.e;
        search = out.state;
    }
    Ok((e, started.elapsed().as_secs_f64()))
}

fn c7_recovery(accepted: &mut Accepted) -> Verdict {
    let runs: Vec<_> = (1..=10u64)
        .into_par_iter()
        .map(|seed| {
            let mut acc = Vec::new();
            (recovery_seed(seed, &mut acc), acc)
        })
        .collect();
    let mut hits = 0;
    let mut slowest: f64 = 0.0;
    let mut es = Vec::new();
    for (r, acc) in runs {
        accepted.0.extend(acc);
        match r {
            Ok((e, secs)) => {
                hits += usize::from(e >= 0.85);
                slowest = slowest.max(secs);
                es.push(format!("{e:.3}"));
            }
            Err(msg) => es.push(format!("err({msg})")),
        }
    }
    Verdict::new(
        hits >= 8 && slowest < 300.0,
        format!(
            "{hits}/10 seeds reach E >= 0.85 [{}], slowest seed {slowest:.0} s",
            es.join(" ")
        ),
    )
}

fn collect_trial(label: &str, outcome: &TrialOutcome, accepted: &mut Accepted) {
    for (log, data) in outcome.log.iterations.iter().zip(&outcome.data) {
        if let Some(hand) = &data.hand {
            accepted
                .0
                .push((format!("{label} iteration {}", log.index), hand.clone()));
        }
    }
}

fn c8_closed_loop(accepted: &mut Accepted) -> Verdict {
    let cases = [
        ((0.3, 0.9), strings::c()),
        ((0.4, 0.7), strings::b()),
        ((0.5, 0.9), strings::a()),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for ((x, y), hidden) in cases {
        let outcomes: Vec<_> = (1..=10u64)
            .into_par_iter()
            .map(|seed| {
                let mut s = Scenario::new(TargetSpec::new(x, y), fine_plant(hidden));
                s.seed = seed;
                s.max_iterations = 10;
                run_trial(&s)
            })
            .collect();
        let mut wins = 0;
        let mut iters = Vec::new();
        for (seed, o) in (1..=10u64).zip(outcomes) {
            match o {
                Ok(o) => {
                    collect_trial(&format!("c8 ({x}, {y}) seed {seed}"), &o, accepted);
                    wins += usize::from(o.log.success);
                    iters.push(if o.log.success {
                        o.log.iterations_used.to_string()
                    } else {
                        "x".into()
                    });
                }
                Err(e) => iters.push(format!("err({e})")),
            }
        }
        pass &= wins >= 8;
        parts.push(format!("({x}, {y}) {wins}/10 [{}]", iters.join(" ")));
    }
    Verdict::new(pass, parts.join("; "))
}

fn obstacle_scenario(seed: u64) -> Scenario {
    let mut s = Scenario::new(TargetSpec::new(0.5, 0.5), in_class_plant(strings::a()));
    s.obstacle = obstacle_wall();
    s.max_iterations = 15;
    s.seed = seed;
    s
}

fn c9_obstacle(accepted: &mut Accepted) -> Verdict {
    let outcomes: Vec<_> = (1..=10u64)
        .into_par_iter()
        .map(|seed| run_trial(&obstacle_scenario(seed)))
        .collect();
    let mut wins = 0;
    let mut dirty = 0;
    let mut iters = Vec::new();
    for (seed, o) in (1..=10u64).zip(outcomes) {
        let o = match o {
            Ok(o) => o,
            Err(e) => {
                iters.push(format!("err({e})"));
                continue;
            }
        };
        collect_trial(&format!("c9 seed {seed}"), &o, accepted);
        if o.log.success {
            wins += 1;
            let last = o.log.iterations.last().unwrap();
            let (s, c) = (last.real_success_time.unwrap(), last.collision_time);
            dirty += usize::from(c.is_some_and(|c| c <= s));
            iters.push(o.log.iterations_used.to_string());
        } else {
            iters.push("x".into());
        }
    }

    // Seeded fixture: the shipped scenario's seed.
    let fixture = run_trial(&obstacle_scenario(7));
    let e_of = |o: &TrialOutcome, i: usize| {
        o.log
            .iterations
            .get(i)
            .and_then(|l| l.executed_match.as_ref())
            .map(|r| r.e)
    };
    let (first, last) = match &fixture {
        Ok(o) => (e_of(o, 0), e_of(o, o.log.iterations.len() - 1)),
        Err(_) => (None, None),
    };
    let improved = matches!((first, last), (Some(a), Some(b)) if b > a);
    let fmt = |e: Option<f64>| e.map_or("-".into(), |e| format!("{e:.3}"));
    Verdict::new(
        wins >= 6 && dirty == 0 && improved,
        format!(
            "{wins}/10 succeed [{}], {dirty} with collision before success; seed 7 E iteration 1 {} -> final {}",
            iters.join(" "),
            fmt(first),
            fmt(last)
        ),
    )
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) {
    let Ok(entries) = fs::read_dir(dir) else { return };
    for entry in entries.flatten() {
        let p = entry.path();
        if p.is_dir() {
            collect_files(&p, out);
        } else {
            out.push(p);
        }
    }
}

fn c10_determinism() -> Verdict {
    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/stringA_500_900.json");
    let tmp = tempfile::tempdir().unwrap();
    let mut pgms = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("run{k}"));
        let status = Command::new(env!("CARGO_BIN_EXE_castsim"))
            .arg("run")
            .arg(&scenario)
            .args(["--seed", "7", "--out"])
            .arg(&out)
            .output();
        match status {
            Ok(s) if s.status.code().is_some_and(|c| c <= 1) => {}
            Ok(s) => return Verdict::new(false, format!("run exited {:?}", s.status.code())),
            Err(e) => return Verdict::new(false, format!("could not start castsim: {e}")),
        }
        let mut files = Vec::new();
        collect_files(&out, &mut files);
        let mut picked: Vec<(PathBuf, Vec<u8>)> = files
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e == "pgm") || p.file_name().is_some_and(|n| n == "trial.json"))
            .map(|p| (p.strip_prefix(&out).unwrap().to_path_buf(), fs::read(&p).unwrap()))
            .collect();
        picked.sort();
        pgms.push(picked);
    }
    let frames = pgms[0].len().saturating_sub(1);
    Verdict::new(
        pgms[0] == pgms[1] && frames > 0,
        format!("trial.json and {frames} PGM frames compared byte for byte"),
    )
}

fn c11_limits(accepted: &Accepted) -> Verdict {
    let arm = ArmConfig::default();
    let mut violations = Vec::new();
    let mut samples = 0;
    for (label, traj) in &accepted.0 {
        samples += traj.samples.len();
        violations.extend(
            common::scan_limits(traj, &arm)
                .into_iter()
                .map(|v| format!("{label}: {v}")),
        );
    }
    Verdict::new(
        violations.is_empty() && !accepted.0.is_empty(),
        format!(
            "{} violations in {} trajectories ({samples} samples){}",
            violations.len(),
            accepted.0.len(),
            violations.first().map(|v| format!(", first: {v}")).unwrap_or_default()
        ),
    )
}

fn main() {
    install_thread_pool();
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |k: u32| selected.is_empty() || selected.contains(&k);
    let mut accepted = Accepted::default();
    let mut failed = 0;

    let names = [
        "hanging equilibrium",
        "force law vs reference",
        "Bezier boundary and quadrature",
        "score field vs brute force",
        "matching bounds and self-match",
        "sampling envelope",
        "in-class parameter recovery",
        "closed-loop casting",
        "obstacle scenario",
        "run determinism",
        "limit enforcement",
    ];
    for k in 1..=11u32 {
        // The limit scan needs the trajectories of 7 to 9.
        if !wanted(k) && !((7..=9).contains(&k) && wanted(11)) {
            continue;
        }
        let started = Instant::now();
        let v = match k {
            1 => c1_hanging(),
            2 => c2_force_law(),
            3 => c3_bezier(),
            4 => c4_score_field(),
            5 => c5_self_match(),
            6 => c6_sampling(),
            7 => c7_recovery(&mut accepted),
            8 => c8_closed_loop(&mut accepted),
            9 => c9_obstacle(&mut accepted),
            10 => c10_determinism(),
            _ => c11_limits(&accepted),
        };
        failed += usize::from(!v.pass);
        println!(
            "criterion {k:2} {}  {}: {} ({:.1} s)",
            if v.pass { "PASS" } else { "FAIL" },
            names[k as usize - 1],
            v.detail,
            started.elapsed().as_secs_f64()
        );
    }
    println!("{failed} criterion(s) failed");
    let strict = std::env::var("CASTSIM_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
