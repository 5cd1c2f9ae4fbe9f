//! The hidden-parameter string standing in for the physical one.
//!
//! A [`Plant`] owns its true parameters and never hands them out: callers
//! only get the rendered frames, the executed hand trajectory and the true
//! tip path for success judging.

use serde::{Deserialize, Serialize};

use crate::arm::{joint_positions, realize_trajectory, ArmConfig, HandTrajectory, MotionPlan};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::observation::{capture_series, CameraModel, FrameSeries};
use crate::string_model::{init_hanging_state, simulate_model, StringGeometry, StringModel, StringParams, StringState};

/// How the plant departs from the learner's model class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mismatch {
    #[default]
    None,
    /// Different discretization from the learner (e.g. 25 points vs 10).
    Geometry,
    /// Hinge torque scaled by `1 + kappa * bend^2`.
    Stiffening { kappa: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub hidden_params: StringParams,
    #[serde(default)]
    pub geometry: StringGeometry,
    #[serde(default)]
    pub mismatch: Mismatch,
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        self.hidden_params.validate()?;
        self.geometry.validate()?;
        if let Mismatch::Stiffening { kappa } = self.mismatch {
            if !(kappa >= 0.0 && kappa.is_finite()) {
                return Err(Error::config("stiffening kappa must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Target box centre and half extents (closed region).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    #[serde(rename = "x_ref_m")]
    pub x_ref: f64,
    #[serde(rename = "y_ref_m")]
    pub y_ref: f64,
    #[serde(rename = "w_m", default = "default_w")]
    pub w: f64,
    #[serde(rename = "h_m", default = "default_h")]
    pub h: f64,
}

fn default_w() -> f64 {
    0.02
}

fn default_h() -> f64 {
    0.04
}

impl TargetSpec {
    pub fn new(x_ref: f64, y_ref: f64) -> Self {
        TargetSpec {
            x_ref,
            y_ref,
            w: default_w(),
            h: default_h(),
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (p.x - self.x_ref).abs() <= self.w && (p.y - self.y_ref).abs() <= self.h
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_ref.is_finite() && self.y_ref.is_finite()) {
            return Err(Error::config("target position must be finite"));
        }
        if !(self.w > 0.0 && self.h > 0.0) {
            return Err(Error::config("target tolerances must be positive"));
        }
        Ok(())
    }
}

/// Axis-aligned wall.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObstacleSpec {
    pub present: bool,
    /// Lower-left corner.
    #[serde(rename = "corner_m")]
    pub corner: [f64; 2],
    #[serde(rename = "width_m")]
    pub width: f64,
    #[serde(rename = "height_m")]
    pub height: f64,
}

impl ObstacleSpec {
    pub fn wall(corner: [f64; 2], width: f64, height: f64) -> Self {
        ObstacleSpec {
            present: true,
            corner,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.present && !(self.width >= 0.0 && self.height >= 0.0) {
            return Err(Error::config("obstacle extents must be non-negative"));
        }
        Ok(())
    }

    fn bounds(&self) -> (Vec2, Vec2) {
        let lo = Vec2::new(self.corner[0], self.corner[1]);
        (lo, lo + Vec2::new(self.width, self.height))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let (lo, hi) = self.bounds();
        p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y
    }

    /// Closed segment against the closed rectangle.
    pub fn intersects_segment(&self, a: Vec2, b: Vec2) -> bool {
        let (lo, hi) = self.bounds();
        let d = b - a;
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        for (p, q) in [
            (-d.x, a.x - lo.x),
            (d.x, hi.x - a.x),
            (-d.y, a.y - lo.y),
            (d.y, hi.y - a.y),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }

    pub fn intersects_polyline(&self, points: &[Vec2]) -> bool {
        match points {
            [] => false,
            [p] => self.contains(*p),
            _ => points.windows(2).any(|s| self.intersects_segment(s[0], s[1])),
        }
    }
}

/// Whether the arm links or the string touch the obstacle at one instant.
pub fn collides_at(string: &[Vec2], angles: &[f64; 3], arm: &ArmConfig, obstacle: &ObstacleSpec) -> bool {
    obstacle.present
        && (obstacle.intersects_polyline(&joint_positions(angles, arm)) || obstacle.intersects_polyline(string))
}

/// Earliest time the tip is inside the closed target box.
pub fn check_success(tip_trajectory: &[(f64, Vec2)], target: &TargetSpec) -> Option<f64> {
    tip_trajectory
        .iter()
        .find(|(_, p)| target.contains(*p))
        .map(|(t, _)| *t)
}

/// Earliest sample at which a string segment or an arm link intersects the
/// obstacle. States and trajectory samples are paired by index.
pub fn check_collision(
    string_states: &[StringState],
    hand_trajectory: &HandTrajectory,
    obstacle: &ObstacleSpec,
    arm: &ArmConfig,
) -> Option<f64> {
    if !obstacle.present {
        return None;
    }
    string_states
        .iter()
        .zip(&hand_trajectory.samples)
        .find(|(s, h)| collides_at(&s.positions, &h.angles, arm, obstacle))
        .map(|(s, _)| s.time)
}

/// What the learner may see of one manipulation.
#[derive(Debug, Clone)]
pub struct Execution {
    pub frames: FrameSeries,
    pub tip_trajectory: Vec<(f64, Vec2)>,
    pub hand_trajectory: HandTrajectory,
    pub collision_time: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Plant {
    config: PlantConfig,
}

impl Plant {
    pub fn new(config: PlantConfig) -> Result<Self> {
        config.validate()?;
        Ok(Plant { config })
    }

    pub fn geometry(&self) -> StringGeometry {
        self.config.geometry
    }

    pub fn mismatch(&self) -> Mismatch {
        self.config.mismatch
    }

    fn model(&self) -> StringModel {
        let model = StringModel::new(self.config.hidden_params, self.config.geometry);
        match self.config.mismatch {
            Mismatch::Stiffening { kappa } => model.with_bend_stiffening(kappa),
            Mismatch::None | Mismatch::Geometry => model,
        }
    }

    /// Runs `plan` on the hidden string and films it.
    pub fn execute(
        &self,
        plan: &MotionPlan,
        arm: &ArmConfig,
        camera: &CameraModel,
        obstacle: &ObstacleSpec,
        dt: f64,
    ) -> Result<Execution> {
        let hand_trajectory = realize_trajectory(plan, arm, arm.tail)?;
        let hand = hand_trajectory.hand_samples();
        let initial = init_hanging_state(&hand[0].1, &self.config.geometry, &self.config.hidden_params);
        let states = simulate_model(self.model(), &hand, &initial, dt)?;
        let frames = capture_series(&states, camera, camera.sampling_period)?;
        let tip_trajectory = states.iter().map(|s| (s.time, s.tip())).collect();
        let collision_time = check_collision(&states, &hand_trajectory, obstacle, arm);
        Ok(Execution {
            frames,
            tip_trajectory,
            hand_trajectory,
            collision_time,
        })
    }
}
