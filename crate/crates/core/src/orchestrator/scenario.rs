//! Scenario files: every knob of a trial in one JSON document.
//!
//! Field names carry their units (`*_m`, `*_s`, `*_rad`). Everything except
//! `target` and `plant` has a default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arm::{ArmConfig, DEFAULT_T_RANGE};
use crate::error::{Error, Result};
use crate::estimation::{EstimationBudget, ParamRange};
use crate::matching::MatchConfig;
use crate::observation::CameraModel;
use crate::plant::{Mismatch, ObstacleSpec, PlantConfig, TargetSpec};
use crate::string_model::{StringGeometry, StringParams, DEFAULT_DT};

fn default_max_iterations() -> usize {
    10
}

fn default_max_attempts() -> usize {
    50_000
}

fn default_restart_every() -> usize {
    5_000
}

fn default_t_range() -> [f64; 2] {
    DEFAULT_T_RANGE
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Motion-generation attempts per iteration before giving up.
    #[serde(default = "default_max_attempts")]
    pub max_generation_attempts: usize,
    /// Consecutive failed perturbations after which a fresh initial pose is drawn.
    #[serde(default = "default_restart_every")]
    pub restart_every: usize,
    #[serde(default = "default_t_range", rename = "t_range_s")]
    pub t_range: [f64; 2],
    #[serde(default = "default_dt", rename = "dt_s")]
    pub dt: f64,
    #[serde(default)]
    pub arm: ArmConfig,
    #[serde(default)]
    pub learner_geometry: StringGeometry,
    pub plant: PlantConfig,
    pub target: TargetSpec,
    #[serde(default)]
    pub obstacle: ObstacleSpec,
    #[serde(default)]
    pub camera: CameraModel,
    #[serde(default, rename = "match")]
    pub match_config: MatchConfig,
    #[serde(default)]
    pub ranges: ParamRange,
    #[serde(default)]
    pub estimation: EstimationBudget,
}

impl Scenario {
    /// Default scenario for a target and a plant string.
    pub fn new(target: TargetSpec, plant: PlantConfig) -> Self {
        Scenario {
            name: String::new(),
            seed: 0,
            max_iterations: default_max_iterations(),
            max_generation_attempts: default_max_attempts(),
            restart_every: default_restart_every(),
            t_range: DEFAULT_T_RANGE,
            dt: DEFAULT_DT,
            arm: ArmConfig::default(),
            learner_geometry: StringGeometry::default(),
            plant,
            target,
            obstacle: ObstacleSpec::default(),
            camera: CameraModel::default(),
            match_config: MatchConfig::default(),
            ranges: ParamRange::default(),
            estimation: EstimationBudget::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        if self.max_generation_attempts == 0 || self.restart_every == 0 {
            return Err(Error::config("generation attempt limits must be at least 1"));
        }
        let [lo, hi] = self.t_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::config(format!(
                "t_range_s [{lo}, {hi}] is not a positive interval"
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt_s must be positive"));
        }
        let sub = self.arm.command_period / self.dt;
        if (sub - sub.round()).abs() > 1e-6 || sub.round() < 1.0 {
            return Err(Error::config(format!(
                "dt_s = {} must divide the command period {}",
                self.dt, self.arm.command_period
            )));
        }
        let ratio = self.camera.sampling_period / self.arm.command_period;
        if (ratio - ratio.round()).abs() > 1e-6 || ratio.round() < 1.0 {
            return Err(Error::config(
                "frame sampling period must be a multiple of the command period",
            ));
        }
        self.arm.validate()?;
        self.learner_geometry.validate()?;
        self.plant.validate()?;
        self.target.validate()?;
        self.obstacle.validate()?;
        self.camera.validate()?;
        self.match_config.validate()?;
        self.ranges.validate()?;
        self.estimation.validate()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "scenario".into(),
            message: format!(
                "line {}, column {}: {}",
                e.line(),
                e.column(),
                strip_position(&e.to_string())
            ),
        })?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                what: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

fn strip_position(message: &str) -> &str {
    match message.rfind(" at line ") {
        Some(i) => &message[..i],
        None => message,
    }
}

/// Hidden parameters of the four reference strings, from stiffest to
/// softest: B, A, C, D.
pub mod strings {
    use super::StringParams;

    pub fn a() -> StringParams {
        StringParams {
            k_s: 1.2e5,
            c_s: 6.0,
            k_h: 0.05,
            c_h: 2.0e-3,
            c_c1: 0.05,
            c_c2: 0.2,
            k_ph: 0.6,
            c_ph: 5.0e-3,
        }
    }

    pub fn b() -> StringParams {
        StringParams {
            k_s: 3.0e5,
            c_s: 20.0,
            k_h: 0.4,
            c_h: 1.0e-2,
            c_c1: 0.03,
            c_c2: 0.1,
            k_ph: 2.0,
            c_ph: 2.0e-2,
        }
    }

    pub fn c() -> StringParams {
        StringParams {
            k_s: 5.0e4,
            c_s: 2.0,
            k_h: 0.02,
            c_h: 5.0e-4,
            c_c1: 0.1,
            c_c2: 0.3,
            k_ph: 0.15,
            c_ph: 1.0e-3,
        }
    }

    /// Very flexible string, modelled with 25 points on the plant side.
    pub fn d() -> StringParams {
        StringParams {
            k_s: 3.0e4,
            c_s: 1.0,
            k_h: 0.01,
            c_h: 1.0e-5,
            c_c1: 0.2,
            c_c2: 0.5,
            k_ph: 0.02,
            c_ph: 1.0e-4,
        }
    }
}

/// Plant with the learner's own model class.
pub fn in_class_plant(hidden_params: StringParams) -> PlantConfig {
    PlantConfig {
        hidden_params,
        geometry: StringGeometry::default(),
        mismatch: Mismatch::None,
    }
}

/// Plant discretized with 25 points while the learner keeps 10.
pub fn fine_plant(hidden_params: StringParams) -> PlantConfig {
    PlantConfig {
        hidden_params,
        geometry: StringGeometry::new(25, 0.3),
        mismatch: Mismatch::Geometry,
    }
}

/// Plant with nonlinear bending stiffness.
pub fn stiffening_plant(hidden_params: StringParams, kappa: f64) -> PlantConfig {
    PlantConfig {
        hidden_params,
        geometry: StringGeometry::default(),
        mismatch: Mismatch::Stiffening { kappa },
    }
}

/// Wall between the arm and a target at (0.5, 0.5).
pub fn obstacle_wall() -> ObstacleSpec {
    ObstacleSpec::wall([0.33, 0.0], 0.03, 0.55)
}
