use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use castsim::arm::{realize_trajectory, ArmConfig, MotionPlan};
use castsim::estimation::{estimate, EstimationBudget, EstimationSetup, ParamRange, SearchState};
use castsim::matching::MatchConfig;
use castsim::observation::{read_series, CameraModel};
use castsim::orchestrator::output::{hand_csv, parse_hand_csv, tip_csv, write_trial};
use castsim::orchestrator::{install_thread_pool, run_trial, Scenario};
use castsim::string_model::{init_hanging_state, simulate_rollout, StringGeometry, StringParams, DEFAULT_DT};
use castsim::Error;

/// Casting-manipulation workbench.
#[derive(Parser)]
#[command(name = "castsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop casting trial.
    Run {
        scenario: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// One estimation round from recorded frames and a hand trajectory CSV.
    Estimate {
        frames_dir: PathBuf,
        trajectory_file: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Candidates per round.
        #[arg(long)]
        samples: Option<usize>,
        /// Number of points of the learner string.
        #[arg(long, default_value_t = 10)]
        points: usize,
    },
    /// Roll out one plan on one parameter set.
    Simulate {
        params_file: PathBuf,
        plan_file: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        points: usize,
    },
    /// Check a scenario file.
    Validate { scenario: PathBuf },
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Parse { .. } | Error::Json(_) | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> castsim::Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        what: path.display().to_string(),
        message: format!("line {}, column {}: {e}", e.line(), e.column()),
    })
}

fn load_scenario(path: &Path) -> castsim::Result<Scenario> {
    let scenario = Scenario::load(path)?;
    scenario
        .validate()
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    Ok(scenario)
}

fn run(scenario: &Path, seed: Option<u64>, out: &Path) -> castsim::Result<u8> {
    let mut scenario = load_scenario(scenario)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let outcome = run_trial(&scenario)?;
    write_trial(&outcome, &scenario, out)?;
    for it in &outcome.log.iterations {
        let e = it
            .executed_match
            .as_ref()
            .map(|r| format!("{:.4}", r.e))
            .unwrap_or_else(|| "-".into());
        eprintln!(
            "iteration {:2}: attempts {:6}  E {e}  success {}{}",
            it.index,
            it.generation_attempts,
            it.success,
            it.error.as_deref().map(|m| format!("  ({m})")).unwrap_or_default()
        );
    }
    if outcome.log.success {
        println!("success after {} iteration(s)", outcome.log.iterations_used);
        Ok(0)
    } else {
        println!("failure after {} iteration(s)", outcome.log.iterations_used);
        Ok(EXIT_FAILURE)
    }
}

fn estimate_cmd(frames: &Path, traj: &Path, seed: u64, samples: Option<usize>, points: usize) -> castsim::Result<u8> {
    let observed = read_series(frames)?;
    let hand = parse_hand_csv(&fs::read_to_string(traj)?)?;
    let mut budget = EstimationBudget::default();
    if let Some(s) = samples {
        budget.samples = s;
    }
    budget.validate()?;
    let ranges = ParamRange::default();
    let camera = CameraModel {
        sampling_period: observed.sampling_period,
        ..CameraModel::default()
    };
    let setup = EstimationSetup {
        geometry: StringGeometry::new(points, StringGeometry::default().total_length),
        ranges: &ranges,
        budget: &budget,
        camera: &camera,
        match_config: &MatchConfig::default(),
        dt: DEFAULT_DT,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outcome = estimate(&observed, &hand, &SearchState::new(&budget), &setup, &mut rng)?;
    let json = serde_json::json!({
        "params": outcome.params,
        "matching_rate": outcome.report.e,
        "evaluated": outcome.evaluated,
        "pruned": outcome.pruned,
        "diverged": outcome.diverged,
    });
    println!("{}", serde_json::to_string_pretty(&json)?);
    Ok(0)
}

fn simulate(params_file: &Path, plan_file: &Path, out: &Path, points: usize) -> castsim::Result<u8> {
    let params: StringParams = read_json(params_file)?;
    params.validate()?;
    let plan: MotionPlan = read_json(plan_file)?;
    let arm = ArmConfig::default();
    plan.validate(&arm)?;
    let geometry = StringGeometry::new(points, StringGeometry::default().total_length);
    geometry.validate()?;
    let traj = realize_trajectory(&plan, &arm, arm.tail)?;
    let hand = traj.hand_samples();
    let initial = init_hanging_state(&hand[0].1, &geometry, &params);
    let states = simulate_rollout(&params, &geometry, &hand, &initial, DEFAULT_DT)?;
    let tip: Vec<_> = states.iter().map(|s| (s.time, s.tip())).collect();
    fs::create_dir_all(out)?;
    fs::write(out.join("tip.csv"), tip_csv(&tip))?;
    fs::write(out.join("hand.csv"), hand_csv(&traj))?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    install_thread_pool();
    let result = match &cli.command {
        Command::Run { scenario, seed, out } => run(scenario, *seed, out),
        Command::Estimate {
            frames_dir,
            trajectory_file,
            seed,
            samples,
            points,
        } => estimate_cmd(frames_dir, trajectory_file, *seed, *samples, *points),
        Command::Simulate {
            params_file,
            plan_file,
            out,
            points,
        } => simulate(params_file, plan_file, out, *points),
        Command::Validate { scenario } => load_scenario(scenario).map(|_| {
            println!("{}: ok", scenario.display());
            0
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
