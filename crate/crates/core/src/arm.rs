//! Planar 3-DOF arm and randomized Bezier joint-velocity motions.
//!
//! Each joint follows a degree-5 Bezier velocity profile over `[0, T]` with
//! control values `V_0..V_5`, `V_0 = V_5 = 0`. Control times are uniform
//! (`t_k = kT/5`), so the curve's time coordinate is linear in the curve
//! parameter and the velocity at time `t` is the Bernstein value at `t/T`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, LimitKind, Result};
use crate::geom::{wrap_angle, Vec2};
use crate::string_model::HandPose;

pub const JOINTS: usize = 3;
pub const CONTROL_POINTS: usize = 6;

/// Default movement-time range (s).
pub const DEFAULT_T_RANGE: [f64; 2] = [0.2, 1.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmConfig {
    #[serde(rename = "link_lengths_m")]
    pub link_lengths: [f64; JOINTS],
    #[serde(rename = "joint_limits_rad")]
    pub joint_limits: [[f64; 2]; JOINTS],
    #[serde(rename = "joint_velocity_limits_rad_s")]
    pub joint_velocity_limits: [f64; JOINTS],
    #[serde(rename = "joint_acceleration_limits_rad_s2")]
    pub joint_acceleration_limits: [f64; JOINTS],
    #[serde(rename = "composite_speed_limit_m_s")]
    pub composite_speed_limit: f64,
    #[serde(rename = "command_period_s")]
    pub command_period: f64,
    #[serde(rename = "base_position_m")]
    pub base_position: [f64; 2],
    /// Stationary observation time after the motion ends.
    #[serde(rename = "tail_s")]
    pub tail: f64,
    /// Half-width of the control-velocity perturbation, as a fraction of the
    /// original sampling half-range `a_max T / 5`.
    pub perturb_velocity_fraction: f64,
    /// Half-width of the duration perturbation, as a fraction of the
    /// duration range width.
    pub perturb_time_fraction: f64,
}

impl Default for ArmConfig {
    fn default() -> Self {
        ArmConfig {
            link_lengths: [0.20, 0.20, 0.185],
            joint_limits: [[-2.6, 2.6]; JOINTS],
            joint_velocity_limits: [25.0; JOINTS],
            joint_acceleration_limits: [600.0; JOINTS],
            composite_speed_limit: 21.8,
            command_period: 0.005,
            base_position: [0.0, 0.4],
            tail: 0.4,
            perturb_velocity_fraction: 0.25,
            perturb_time_fraction: 0.25,
        }
    }
}

impl ArmConfig {
    pub fn base(&self) -> Vec2 {
        Vec2::new(self.base_position[0], self.base_position[1])
    }

    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("arm {name} must be positive, got {v}")))
            }
        };
        for j in 0..JOINTS {
            positive("link length", self.link_lengths[j])?;
            positive("joint velocity limit", self.joint_velocity_limits[j])?;
            let [lo, hi] = self.joint_limits[j];
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::config(format!(
                    "joint {} limits [{lo}, {hi}] are not an interval",
                    j + 1
                )));
            }
            if !(self.joint_acceleration_limits[j] >= 0.0) {
                return Err(Error::config("joint acceleration limits must be non-negative"));
            }
        }
        positive("composite speed limit", self.composite_speed_limit)?;
        positive("command period", self.command_period)?;
        if !(self.tail >= 0.0) {
            return Err(Error::config("post-motion tail must be non-negative"));
        }
        if !(self.perturb_velocity_fraction >= 0.0 && self.perturb_time_fraction >= 0.0) {
            return Err(Error::config("perturbation fractions must be non-negative"));
        }
        Ok(())
    }
}

/// Initial pose plus per-joint Bezier velocity controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionPlan {
    #[serde(rename = "initial_angles_rad")]
    pub initial_angles: [f64; JOINTS],
    #[serde(rename = "duration_s")]
    pub duration: f64,
    #[serde(rename = "control_velocities_rad_s")]
    pub control_velocities: [[f64; CONTROL_POINTS]; JOINTS],
}

impl MotionPlan {
    /// A plan that keeps the arm still for `duration`.
    pub fn stationary(initial_angles: [f64; JOINTS], duration: f64) -> Self {
        MotionPlan {
            initial_angles,
            duration,
            control_velocities: [[0.0; CONTROL_POINTS]; JOINTS],
        }
    }

    pub fn validate(&self, config: &ArmConfig) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::config(format!(
                "motion duration must be positive, got {}",
                self.duration
            )));
        }
        for j in 0..JOINTS {
            let c = &self.control_velocities[j];
            if c[0] != 0.0 || c[CONTROL_POINTS - 1] != 0.0 {
                return Err(Error::config(format!(
                    "joint {} velocity curve must start and end at zero",
                    j + 1
                )));
            }
            if c.iter().any(|v| !v.is_finite()) || !self.initial_angles[j].is_finite() {
                return Err(Error::config("non-finite motion plan"));
            }
            let [lo, hi] = config.joint_limits[j];
            if self.initial_angles[j] < lo || self.initial_angles[j] > hi {
                return Err(Error::config(format!(
                    "joint {} initial angle outside its limits",
                    j + 1
                )));
            }
        }
        Ok(())
    }
}

/// One command-grid sample of a realized motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub time: f64,
    pub hand: HandPose,
    pub angles: [f64; JOINTS],
    pub joint_velocities: [f64; JOINTS],
}

/// Hand motion on the command grid, including the stationary tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandTrajectory {
    pub samples: Vec<TrajectorySample>,
    /// End of the commanded motion (s); later samples belong to the tail.
    pub motion_end: f64,
}

impl HandTrajectory {
    pub fn hand_samples(&self) -> Vec<(f64, HandPose)> {
        self.samples.iter().map(|s| (s.time, s.hand)).collect()
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.time)
    }

    pub fn period(&self) -> f64 {
        match self.samples.as_slice() {
            [a, b, ..] => b.time - a.time,
            _ => 0.0,
        }
    }
}

/// Base, elbow, wrist and hand positions.
pub fn joint_positions(angles: &[f64; JOINTS], config: &ArmConfig) -> [Vec2; JOINTS + 1] {
    let mut out = [config.base(); JOINTS + 1];
    let mut heading = 0.0;
    for j in 0..JOINTS {
        heading += angles[j];
        out[j + 1] = out[j] + Vec2::from_angle(heading) * config.link_lengths[j];
    }
    out
}

/// Hand pose for the given joint angles; rates are zero.
pub fn forward_kinematics(angles: &[f64; JOINTS], config: &ArmConfig) -> HandPose {
    let points = joint_positions(angles, config);
    HandPose {
        position: points[JOINTS],
        orientation: wrap_angle(angles.iter().sum()),
        velocity: Vec2::ZERO,
        angular_velocity: 0.0,
    }
}

/// Hand linear velocity from joint rates (planar Jacobian).
pub fn hand_velocity(angles: &[f64; JOINTS], rates: &[f64; JOINTS], config: &ArmConfig) -> Vec2 {
    let mut v = Vec2::ZERO;
    let mut heading = 0.0;
    let mut heading_rate = 0.0;
    for j in 0..JOINTS {
        heading += angles[j];
        heading_rate += rates[j];
        v += Vec2::from_angle(heading).perp() * (config.link_lengths[j] * heading_rate);
    }
    v
}

/// de Casteljau evaluation of a 1D Bezier curve at `u` in [0, 1].
pub fn de_casteljau(controls: &[f64], u: f64) -> f64 {
    let mut work = [0.0f64; 8];
    let n = controls.len();
    assert!(n > 0 && n <= work.len(), "unsupported Bezier degree");
    work[..n].copy_from_slice(controls);
    for level in 1..n {
        for k in 0..n - level {
            work[k] = work[k] + (work[k + 1] - work[k]) * u;
        }
    }
    work[0]
}

/// Joint velocity of the Bezier profile at time `t` in [0, T].
pub fn bezier_velocity(controls: &[f64; CONTROL_POINTS], duration: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t <= duration) {
        return Err(Error::Domain {
            value: t,
            min: 0.0,
            max: duration,
        });
    }
    Ok(de_casteljau(controls, t / duration))
}

/// Exact integral of the velocity profile from 0 to `t` (clamped to [0, T]).
///
/// The antiderivative of a degree-5 Bernstein polynomial is the degree-6
/// Bezier curve whose controls are the running sums of `V_k T / 6`.
pub fn bezier_displacement(controls: &[f64; CONTROL_POINTS], duration: f64, t: f64) -> f64 {
    let mut anti = [0.0f64; CONTROL_POINTS + 1];
    for k in 0..CONTROL_POINTS {
        anti[k + 1] = anti[k] + controls[k] * duration / CONTROL_POINTS as f64;
    }
    de_casteljau(&anti, (t / duration).clamp(0.0, 1.0))
}

fn rand_signed<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.gen_range(-1.0..=1.0)
}

fn uniform_in<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        // Keep the stream aligned even for a collapsed range.
        let _: f64 = rng.gen();
        lo
    }
}

/// Draws a fresh random plan: uniform initial pose and duration, then four
/// random accelerations per joint turned into control velocities
/// `V_k = a_k T / 5`.
pub fn generate_motion<R: Rng + ?Sized>(rng: &mut R, config: &ArmConfig, t_range: [f64; 2]) -> MotionPlan {
    let mut initial_angles = [0.0; JOINTS];
    for (a, [lo, hi]) in initial_angles.iter_mut().zip(config.joint_limits) {
        *a = uniform_in(rng, lo, hi);
    }
    let duration = uniform_in(rng, t_range[0], t_range[1]);
    let interval = duration / (CONTROL_POINTS - 1) as f64;
    let mut control_velocities = [[0.0; CONTROL_POINTS]; JOINTS];
    for (j, controls) in control_velocities.iter_mut().enumerate() {
        let a_max = config.joint_acceleration_limits[j];
        for v in &mut controls[1..CONTROL_POINTS - 1] {
            *v = rand_signed(rng) * a_max * interval;
        }
    }
    MotionPlan {
        initial_angles,
        duration,
        control_velocities,
    }
}

/// Small random change of a previous plan for iterations after the first.
///
/// The initial pose is kept. `T` moves by at most `perturb_time_fraction`
/// of the range width and is clamped to the range; each inner control
/// velocity moves by at most `perturb_velocity_fraction * a_max * T_prev / 5`.
pub fn perturb_motion<R: Rng + ?Sized>(
    prev: &MotionPlan,
    rng: &mut R,
    iteration: usize,
    config: &ArmConfig,
    t_range: [f64; 2],
) -> MotionPlan {
    debug_assert!(iteration >= 2, "the first iteration draws a fresh plan");
    let width = t_range[1] - t_range[0];
    let step = width * config.perturb_time_fraction;
    let duration = (prev.duration + rand_signed(rng) * step).clamp(t_range[0], t_range[1]);
    let interval = prev.duration / (CONTROL_POINTS - 1) as f64;
    let mut control_velocities = prev.control_velocities;
    for (j, controls) in control_velocities.iter_mut().enumerate() {
        let half = config.perturb_velocity_fraction * config.joint_acceleration_limits[j] * interval;
        for v in &mut controls[1..CONTROL_POINTS - 1] {
            *v += rand_signed(rng) * half;
        }
    }
    MotionPlan {
        initial_angles: prev.initial_angles,
        duration,
        control_velocities,
    }
}

/// Samples the plan on the command grid, appends the stationary tail and
/// checks every configured limit.
pub fn realize_trajectory(plan: &MotionPlan, config: &ArmConfig, tail: f64) -> Result<HandTrajectory> {
    let traj = sample_trajectory(plan, config, tail)?;
    check_limits(&traj, config)?;
    Ok(traj)
}

/// Sampling only; no limit checks.
pub fn sample_trajectory(plan: &MotionPlan, config: &ArmConfig, tail: f64) -> Result<HandTrajectory> {
    plan.validate(config)?;
    let period = config.command_period;
    let t_end = plan.duration;
    let motion_steps = (t_end / period - 1e-9).ceil().max(0.0) as usize;
    let tail_steps = (tail / period).round() as usize;
    let mut samples = Vec::with_capacity(motion_steps + tail_steps + 1);

    for k in 0..=motion_steps {
        let tau = (k as f64 * period).min(t_end);
        let mut angles = plan.initial_angles;
        let mut rates = [0.0; JOINTS];
        for j in 0..JOINTS {
            let controls = &plan.control_velocities[j];
            angles[j] += bezier_displacement(controls, t_end, tau);
            rates[j] = de_casteljau(controls, tau / t_end);
        }
        samples.push(make_sample(k as f64 * period, angles, rates, config));
    }
    let last = *samples.last().expect("at least one sample");
    for k in 1..=tail_steps {
        let time = (motion_steps + k) as f64 * period;
        samples.push(make_sample(time, last.angles, [0.0; JOINTS], config));
    }
    Ok(HandTrajectory {
        samples,
        motion_end: t_end,
    })
}

fn make_sample(time: f64, angles: [f64; JOINTS], rates: [f64; JOINTS], config: &ArmConfig) -> TrajectorySample {
    let mut hand = forward_kinematics(&angles, config);
    hand.velocity = hand_velocity(&angles, &rates, config);
    hand.angular_velocity = rates.iter().sum();
    TrajectorySample {
        time,
        hand,
        angles,
        joint_velocities: rates,
    }
}

/// Scans every sample; reports the first violated limit.
pub fn check_limits(traj: &HandTrajectory, config: &ArmConfig) -> Result<()> {
    for s in &traj.samples {
        for j in 0..JOINTS {
            let [lo, hi] = config.joint_limits[j];
            let a = s.angles[j];
            if a < lo || a > hi {
                return Err(Error::LimitViolation {
                    limit: LimitKind::JointAngle,
                    joint: Some(j),
                    time: s.time,
                    value: a,
                    bound: if a < lo { lo } else { hi },
                });
            }
            let v = s.joint_velocities[j];
            if v.abs() > config.joint_velocity_limits[j] {
                return Err(Error::LimitViolation {
                    limit: LimitKind::JointVelocity,
                    joint: Some(j),
                    time: s.time,
                    value: v,
                    bound: config.joint_velocity_limits[j],
                });
            }
        }
        let speed = s.hand.velocity.norm();
        if speed > config.composite_speed_limit {
            return Err(Error::LimitViolation {
                limit: LimitKind::CompositeSpeed,
                joint: None,
                time: s.time,
                value: speed,
                bound: config.composite_speed_limit,
            });
        }
    }
    Ok(())
}
