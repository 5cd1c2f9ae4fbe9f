//! The closed loop: generate a motion that casts in simulation, run it on
//! the plant, judge it, and re-estimate the string from what was filmed.

pub mod output;
pub mod scenario;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arm::{generate_motion, perturb_motion, realize_trajectory, HandTrajectory, MotionPlan};
use crate::error::{Error, Result};
use crate::estimation::{estimate, EstimationSetup, SearchState};
use crate::geom::Vec2;
use crate::matching::{score_states, MatchReport, PreparedObservation};
use crate::observation::FrameSeries;
use crate::plant::{check_success, collides_at, Plant};
use crate::string_model::{init_hanging_state, simulate_rollout, Rollout, StringModel, StringParams, StringState};

pub use scenario::Scenario;

/// Plans drawn per batch during generation. Fixed so the random stream does
/// not depend on the worker count.
const GENERATION_BATCH: usize = 16;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "CASTSIM_THREADS";

/// Installs the global worker pool, honouring `CASTSIM_THREADS`.
pub fn install_thread_pool() {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    // Already initialized is fine.
    let _ = builder.build_global();
}

/// A plan whose simulated tip reached the target.
#[derive(Debug, Clone)]
pub struct GeneratedMotion {
    pub plan: MotionPlan,
    pub trajectory: HandTrajectory,
    pub success_time: f64,
    pub attempts: usize,
}

enum Attempt {
    Success(HandTrajectory, f64),
    Rejected,
}

/// Simulates the learner string on `plan` until its tip enters the target,
/// rejecting limit violations, divergence and obstacle contact.
fn try_plan(plan: &MotionPlan, params: &StringParams, scenario: &Scenario) -> Attempt {
    let Ok(trajectory) = realize_trajectory(plan, &scenario.arm, scenario.arm.tail) else {
        return Attempt::Rejected;
    };
    let hand = trajectory.hand_samples();
    let initial = init_hanging_state(&hand[0].1, &scenario.learner_geometry, params);
    let model = StringModel::new(*params, scenario.learner_geometry);
    let Ok(mut rollout) = Rollout::new(model, &hand, initial, scenario.dt) else {
        return Attempt::Rejected;
    };
    loop {
        let state = rollout.state();
        let sample = &trajectory.samples[rollout.sample_index()];
        if collides_at(&state.positions, &sample.angles, &scenario.arm, &scenario.obstacle) {
            return Attempt::Rejected;
        }
        if scenario.target.contains(state.tip()) {
            let t = state.time;
            return Attempt::Success(trajectory, t);
        }
        match rollout.advance() {
            Ok(true) => {}
            Ok(false) | Err(_) => return Attempt::Rejected,
        }
    }
}

/// Draws plans until one casts in simulation.
///
/// Without a previous plan every draw is a fresh random motion. With one,
/// draws are perturbations of it, falling back to a fresh motion after
/// `restart_every` consecutive failures.
pub fn generate_until_simulated_success(
    params: &StringParams,
    scenario: &Scenario,
    rng: &mut ChaCha8Rng,
    prev_plan: Option<&MotionPlan>,
    iteration: usize,
) -> Result<GeneratedMotion> {
    let limit = scenario.max_generation_attempts;
    let mut attempts = 0;
    let mut base = prev_plan.cloned();
    let mut since_restart = 0;
    while attempts < limit {
        let batch = GENERATION_BATCH.min(limit - attempts);
        let mut plans = Vec::with_capacity(batch);
        for _ in 0..batch {
            if base.is_some() && since_restart >= scenario.restart_every {
                base = None;
            }
            let plan = match &base {
                Some(prev) => perturb_motion(prev, rng, iteration.max(2), &scenario.arm, scenario.t_range),
                None => generate_motion(rng, &scenario.arm, scenario.t_range),
            };
            since_restart += 1;
            plans.push(plan);
        }
        let results: Vec<Attempt> = plans.par_iter().map(|p| try_plan(p, params, scenario)).collect();
        for (k, (plan, result)) in plans.into_iter().zip(results).enumerate() {
            if let Attempt::Success(trajectory, success_time) = result {
                return Ok(GeneratedMotion {
                    plan,
                    trajectory,
                    success_time,
                    attempts: attempts + k + 1,
                });
            }
        }
        attempts += batch;
    }
    Err(Error::GenerationFailed(attempts))
}

/// One row of the trial log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub index: usize,
    pub params_used: StringParams,
    pub generation_attempts: usize,
    pub plan: Option<MotionPlan>,
    pub simulated_success: bool,
    #[serde(rename = "simulated_success_time_s")]
    pub simulated_success_time: Option<f64>,
    /// `[t_s, x_m, y_m]` of the learner's predicted tip.
    pub predicted_tip: Vec<[f64; 3]>,
    pub frames_dir: Option<String>,
    pub frame_count: usize,
    #[serde(rename = "real_success_time_s")]
    pub real_success_time: Option<f64>,
    #[serde(rename = "collision_time_s")]
    pub collision_time: Option<f64>,
    /// Executed motion scored under `params_used`.
    pub executed_match: Option<MatchReport>,
    pub estimated_params: Option<StringParams>,
    pub post_estimation_e: Option<f64>,
    pub search_state: Option<SearchState>,
    pub success: bool,
    pub error: Option<String>,
}

impl IterationLog {
    fn new(index: usize, params_used: StringParams) -> Self {
        IterationLog {
            index,
            params_used,
            generation_attempts: 0,
            plan: None,
            simulated_success: false,
            simulated_success_time: None,
            predicted_tip: Vec::new(),
            frames_dir: None,
            frame_count: 0,
            real_success_time: None,
            collision_time: None,
            executed_match: None,
            estimated_params: None,
            post_estimation_e: None,
            search_state: None,
            success: false,
            error: None,
        }
    }
}

/// Deterministic record of a whole trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub scenario: String,
    pub seed: u64,
    pub success: bool,
    pub iterations_used: usize,
    pub iterations: Vec<IterationLog>,
}

/// Bulk data of one iteration kept for artifact output.
#[derive(Debug, Clone, Default)]
pub struct IterationData {
    pub frames: Option<FrameSeries>,
    pub hand: Option<HandTrajectory>,
    pub tip: Vec<(f64, Vec2)>,
    pub predicted: Vec<StringState>,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub log: TrialLog,
    pub data: Vec<IterationData>,
    pub wall_clock_s: f64,
}

pub const FINAL_FRAMES_DIR: &str = "frames";

/// Output directory of one iteration, relative to the trial output root.
pub fn iteration_dir_name(index: usize) -> String {
    format!("iter_{index:02}")
}

pub fn frames_dir_name(index: usize) -> String {
    format!("{}/frames", iteration_dir_name(index))
}

/// Runs the full loop for `scenario` with its own seed.
pub fn run_trial(scenario: &Scenario) -> Result<TrialOutcome> {
    scenario.validate()?;
    let started = Instant::now();
    let plant = Plant::new(scenario.plant.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut search = SearchState::new(&scenario.estimation);
    let setup = EstimationSetup {
        geometry: scenario.learner_geometry,
        ranges: &scenario.ranges,
        budget: &scenario.estimation,
        camera: &scenario.camera,
        match_config: &scenario.match_config,
        dt: scenario.dt,
    };
    let mut prev_plan: Option<MotionPlan> = None;
    let mut iterations = Vec::new();
    let mut data = Vec::new();
    let mut success = false;

    for index in 1..=scenario.max_iterations {
        let params = search.params(&scenario.ranges);
        let mut log = IterationLog::new(index, params);
        let mut bulk = IterationData::default();

        let generated = generate_until_simulated_success(&params, scenario, &mut rng, prev_plan.as_ref(), index);
        let motion = match generated {
            Ok(m) => m,
            Err(e) => {
                if let Error::GenerationFailed(n) = e {
                    log.generation_attempts = n;
                }
                log.error = Some(e.to_string());
                iterations.push(log);
                data.push(bulk);
                continue;
            }
        };
        log.generation_attempts = motion.attempts;
        log.plan = Some(motion.plan.clone());
        log.simulated_success = true;
        log.simulated_success_time = Some(motion.success_time);
        prev_plan = Some(motion.plan.clone());

        let hand = motion.trajectory.hand_samples();
        let initial = init_hanging_state(&hand[0].1, &scenario.learner_geometry, &params);
        if let Ok(predicted) = simulate_rollout(&params, &scenario.learner_geometry, &hand, &initial, scenario.dt) {
            log.predicted_tip = predicted.iter().map(|s| [s.time, s.tip().x, s.tip().y]).collect();
            bulk.predicted = predicted;
        }

        let execution = match plant.execute(
            &motion.plan,
            &scenario.arm,
            &scenario.camera,
            &scenario.obstacle,
            scenario.dt,
        ) {
            Ok(x) => x,
            Err(e) => {
                log.error = Some(e.to_string());
                iterations.push(log);
                data.push(bulk);
                continue;
            }
        };
        log.frames_dir = Some(frames_dir_name(index));
        log.frame_count = execution.frames.len();
        log.real_success_time = check_success(&execution.tip_trajectory, &scenario.target);
        log.collision_time = execution.collision_time;
        log.success = match (log.real_success_time, log.collision_time) {
            (Some(s), Some(c)) => s < c,
            (Some(_), None) => true,
            _ => false,
        };
        if !bulk.predicted.is_empty() {
            let prepared = PreparedObservation::new(&execution.frames, &scenario.match_config)?;
            log.executed_match = score_states(&prepared, &bulk.predicted, &scenario.camera).ok();
        }

        if !log.success {
            match estimate(&execution.frames, &execution.hand_trajectory, &search, &setup, &mut rng) {
                Ok(outcome) => {
                    log.estimated_params = Some(outcome.params);
                    log.post_estimation_e = Some(outcome.report.e);
                    log.search_state = Some(outcome.state.clone());
                    search = outcome.state;
                }
                Err(e) => log.error = Some(e.to_string()),
            }
        }

        bulk.frames = Some(execution.frames);
        bulk.hand = Some(execution.hand_trajectory);
        bulk.tip = execution.tip_trajectory;
        let done = log.success;
        iterations.push(log);
        data.push(bulk);
        if done {
            success = true;
            break;
        }
    }

    // The last filmed iteration goes to the top-level frames directory.
    if let Some(last) = iterations.iter_mut().rev().find(|l| l.frames_dir.is_some()) {
        last.frames_dir = Some(FINAL_FRAMES_DIR.to_string());
    }

    Ok(TrialOutcome {
        log: TrialLog {
            scenario: scenario.name.clone(),
            seed: scenario.seed,
            success,
            iterations_used: iterations.len(),
            iterations,
        },
        data,
        wall_clock_s: started.elapsed().as_secs_f64(),
    })
}
