//! Planar mass-spring-damper string.
//!
//! The string is a chain of `n` mass points. Point 0 is held by the hand and
//! is driven kinematically; points 1..n are integrated. All coefficients are
//! per unit mass, so forces and accelerations are interchangeable here.
//!
//! Forces acting on the chain:
//!
//! * axial springs `k_s` and dampers `c_s` on every segment;
//! * hinge springs `k_h` and dampers `c_h` at every interior point, turning
//!   the bending torque into a perpendicular force couple on the two
//!   neighbouring points with the reaction on the hinge point;
//! * a grasp hinge `k_ph`, `c_ph` between the hand axis and the first segment;
//! * air drag `-c_c1 v - c_c2 |v| v` and uniform gravity on every point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{wrap_angle, Vec2};

/// Standard gravity (m/s^2).
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Gravity vector used throughout (y axis points up).
pub const GRAVITY: Vec2 = Vec2::new(0.0, -STANDARD_GRAVITY);

/// Internal integration step (s).
pub const DEFAULT_DT: f64 = 5e-5;

/// Any coordinate beyond this many meters is treated as a blow-up.
const DIVERGENCE_BOUND: f64 = 1e3;

/// Segments shorter than this have no defined direction.
const DEGENERATE_LENGTH: f64 = 1e-12;

/// Unit-mass string coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StringParams {
    /// Axial spring (N/m/kg).
    pub k_s: f64,
    /// Axial damping (N s/m/kg).
    pub c_s: f64,
    /// Hinge spring (N m/rad/kg).
    pub k_h: f64,
    /// Hinge damping (N m s/rad/kg).
    pub c_h: f64,
    /// Linear air drag.
    pub c_c1: f64,
    /// Quadratic air drag.
    pub c_c2: f64,
    /// Grasp hinge spring (N m/rad/kg).
    pub k_ph: f64,
    /// Grasp hinge damping (N m s/rad/kg).
    pub c_ph: f64,
}

impl StringParams {
    pub const COUNT: usize = 8;
    pub const NAMES: [&'static str; 8] = ["k_s", "c_s", "k_h", "c_h", "c_c1", "c_c2", "k_ph", "c_ph"];

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.k_s, self.c_s, self.k_h, self.c_h, self.c_c1, self.c_c2, self.k_ph, self.c_ph,
        ]
    }

    pub fn from_array(a: [f64; 8]) -> Self {
        StringParams {
            k_s: a[0],
            c_s: a[1],
            k_h: a[2],
            c_h: a[3],
            c_c1: a[4],
            c_c2: a[5],
            k_ph: a[6],
            c_ph: a[7],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in Self::NAMES.iter().zip(self.to_array()) {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!(
                    "string parameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Discretization of the string.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StringGeometry {
    /// Number of mass points.
    pub n: usize,
    #[serde(rename = "total_length_m")]
    pub total_length: f64,
}

impl StringGeometry {
    pub fn new(n: usize, total_length: f64) -> Self {
        StringGeometry { n, total_length }
    }

    pub fn rest_length(&self) -> f64 {
        self.total_length / (self.n - 1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config(format!(
                "string needs at least 2 mass points, got {}",
                self.n
            )));
        }
        if !(self.total_length.is_finite() && self.total_length > 0.0) {
            return Err(Error::config(format!(
                "string length must be positive, got {}",
                self.total_length
            )));
        }
        Ok(())
    }
}

impl Default for StringGeometry {
    fn default() -> Self {
        StringGeometry::new(10, 0.3)
    }
}

/// Positions and velocities of all mass points at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringState {
    pub positions: Vec<Vec2>,
    pub velocities: Vec<Vec2>,
    pub time: f64,
}

impl StringState {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn tip(&self) -> Vec2 {
        *self.positions.last().expect("non-empty string state")
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite()
            && self.positions.iter().all(|p| p.is_finite())
            && self.velocities.iter().all(|v| v.is_finite())
    }
}

/// Pose and rates of the hand holding point 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HandPose {
    pub position: Vec2,
    /// Hand axis direction in (-pi, pi].
    pub orientation: f64,
    pub velocity: Vec2,
    pub angular_velocity: f64,
}

impl HandPose {
    pub fn at_rest(position: Vec2, orientation: f64) -> Self {
        HandPose {
            position,
            orientation: wrap_angle(orientation),
            velocity: Vec2::ZERO,
            angular_velocity: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.orientation.is_finite()
            && self.velocity.is_finite()
            && self.angular_velocity.is_finite()
    }

    /// Linear interpolation; orientation follows the shorter arc.
    pub fn lerp(&self, other: &HandPose, s: f64) -> HandPose {
        HandPose {
            position: self.position.lerp(other.position, s),
            orientation: wrap_angle(self.orientation + wrap_angle(other.orientation - self.orientation) * s),
            velocity: self.velocity.lerp(other.velocity, s),
            angular_velocity: self.angular_velocity + (other.angular_velocity - self.angular_velocity) * s,
        }
    }
}

/// The force law, bound to one parameter set and geometry.
#[derive(Debug, Clone)]
pub struct StringModel {
    pub params: StringParams,
    pub geometry: StringGeometry,
    pub gravity: Vec2,
    /// Nonlinear hinge stiffening: interior hinge torque is scaled by
    /// `1 + bend_stiffening * bend^2`. Zero for the linear model.
    pub bend_stiffening: f64,
}

impl StringModel {
    pub fn new(params: StringParams, geometry: StringGeometry) -> Self {
        StringModel {
            params,
            geometry,
            gravity: GRAVITY,
            bend_stiffening: 0.0,
        }
    }

    pub fn with_gravity(mut self, gravity: Vec2) -> Self {
        self.gravity = gravity;
        self
    }

    pub fn with_bend_stiffening(mut self, kappa: f64) -> Self {
        self.bend_stiffening = kappa;
        self
    }

    /// Writes the acceleration of every point into `out`.
    ///
    /// `out[0]` is filled too (hand reaction included) even though the
    /// grasped point never integrates it.
    pub fn accelerations_into(&self, positions: &[Vec2], velocities: &[Vec2], hand: &HandPose, out: &mut [Vec2]) {
        let n = positions.len();
        debug_assert_eq!(velocities.len(), n);
        debug_assert_eq!(out.len(), n);
        let p = &self.params;
        let rest = self.geometry.rest_length();

        for (a, v) in out.iter_mut().zip(velocities) {
            let speed = v.norm();
            *a = self.gravity - *v * (p.c_c1 + p.c_c2 * speed);
        }
        if n < 2 {
            return;
        }

        // Per-segment direction, angular rate and validity; tension applied in place.
        let mut prev_dir = Vec2::ZERO;
        let mut prev_rate = 0.0;
        let mut prev_ok = false;
        for j in 0..n - 1 {
            let d = positions[j + 1] - positions[j];
            let w = velocities[j + 1] - velocities[j];
            let len = d.norm();
            let ok = len > DEGENERATE_LENGTH;
            let (dir, rate) = if ok {
                let u = d / len;
                let tension = p.k_s * (len - rest) + p.c_s * w.dot(u);
                out[j] += u * tension;
                out[j + 1] -= u * tension;
                (u, d.cross(w) / (len * len))
            } else {
                (Vec2::ZERO, 0.0)
            };

            if j == 0 {
                if ok {
                    let axis = Vec2::from_angle(hand.orientation);
                    let phi = axis.cross(dir).atan2(axis.dot(dir));
                    let phi_rate = rate - hand.angular_velocity;
                    let torque = -(p.k_ph * phi + p.c_ph * phi_rate);
                    let f = dir.perp() * (torque / rest);
                    out[1] += f;
                    out[0] -= f;
                }
            } else if ok && prev_ok {
                // Hinge at point j between segments j-1 and j.
                let bend = prev_dir.cross(dir).atan2(prev_dir.dot(dir));
                let bend_rate = rate - prev_rate;
                let mut torque = -(p.k_h * bend + p.c_h * bend_rate);
                if self.bend_stiffening != 0.0 {
                    torque *= 1.0 + self.bend_stiffening * bend * bend;
                }
                let f_next = dir.perp() * (torque / rest);
                let f_prev = prev_dir.perp() * (torque / rest);
                out[j + 1] += f_next;
                out[j - 1] += f_prev;
                out[j] -= f_next + f_prev;
            }

            prev_dir = dir;
            prev_rate = rate;
            prev_ok = ok;
        }
    }

    /// Total mechanical energy per unit mass, excluding the driven point's
    /// kinetic energy.
    pub fn mechanical_energy(&self, state: &StringState, hand_orientation: f64) -> f64 {
        let p = &self.params;
        let rest = self.geometry.rest_length();
        let pos = &state.positions;
        let mut e = 0.0;
        for (i, (x, v)) in pos.iter().zip(&state.velocities).enumerate() {
            if i > 0 {
                e += 0.5 * v.norm_sq();
            }
            e -= self.gravity.dot(*x);
        }
        for j in 0..pos.len().saturating_sub(1) {
            let d = pos[j + 1] - pos[j];
            let ext = d.norm() - rest;
            e += 0.5 * p.k_s * ext * ext;
            if j == 0 {
                let phi = wrap_angle(d.angle() - hand_orientation);
                e += 0.5 * p.k_ph * phi * phi;
            } else {
                let prev = pos[j] - pos[j - 1];
                let bend = prev.cross(d).atan2(prev.dot(d));
                e += 0.5 * p.k_h * bend * bend;
            }
        }
        e
    }
}

fn check_consistent(state: &StringState, geometry: &StringGeometry) -> Result<()> {
    if state.positions.len() != geometry.n || state.velocities.len() != geometry.n {
        return Err(Error::InvalidState(format!(
            "state has {} positions / {} velocities, geometry expects {}",
            state.positions.len(),
            state.velocities.len(),
            geometry.n
        )));
    }
    if !state.is_finite() {
        return Err(Error::InvalidState("non-finite coordinate".into()));
    }
    Ok(())
}

/// Per-point accelerations of the string under `params`.
pub fn net_accelerations(
    state: &StringState,
    params: &StringParams,
    geometry: &StringGeometry,
    hand: &HandPose,
    gravity: Vec2,
) -> Result<Vec<Vec2>> {
    check_consistent(state, geometry)?;
    if !hand.is_finite() || !gravity.is_finite() {
        return Err(Error::InvalidState("non-finite hand pose or gravity".into()));
    }
    let model = StringModel::new(*params, *geometry).with_gravity(gravity);
    let mut out = vec![Vec2::ZERO; geometry.n];
    model.accelerations_into(&state.positions, &state.velocities, hand, &mut out);
    Ok(out)
}

/// Explicit Euler integrator with reusable scratch space.
#[derive(Debug, Clone)]
pub struct Integrator {
    model: StringModel,
    dt: f64,
    accel: Vec<Vec2>,
    steps: u64,
}

impl Integrator {
    pub fn new(model: StringModel, dt: f64) -> Self {
        let n = model.geometry.n;
        Integrator {
            model,
            dt,
            accel: vec![Vec2::ZERO; n],
            steps: 0,
        }
    }

    pub fn model(&self) -> &StringModel {
        &self.model
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One step: `v += a dt`, then `r += v dt` for the free points; the
    /// grasped point is overwritten from `hand_next`.
    pub fn step(&mut self, state: &mut StringState, hand_now: &HandPose, hand_next: &HandPose) -> Result<()> {
        self.model
            .accelerations_into(&state.positions, &state.velocities, hand_now, &mut self.accel);
        let dt = self.dt;
        let mut worst = 0.0f64;
        for i in 1..state.positions.len() {
            let v = &mut state.velocities[i];
            *v += self.accel[i] * dt;
            let x = &mut state.positions[i];
            *x += *v * dt;
            worst = worst.max(x.x.abs()).max(x.y.abs());
        }
        state.positions[0] = hand_next.position;
        state.velocities[0] = hand_next.velocity;
        state.time += dt;
        self.steps += 1;
        // NaN fails the comparison as well.
        if !(worst <= DIVERGENCE_BOUND) {
            return Err(Error::Divergence {
                step: self.steps,
                time: state.time,
            });
        }
        Ok(())
    }
}

/// A single explicit Euler step of the string.
pub fn euler_step(
    state: &StringState,
    params: &StringParams,
    geometry: &StringGeometry,
    hand_now: &HandPose,
    hand_next: &HandPose,
    dt: f64,
) -> Result<StringState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config(format!("time step must be positive, got {dt}")));
    }
    check_consistent(state, geometry)?;
    if !hand_now.is_finite() || !hand_next.is_finite() {
        return Err(Error::InvalidState("non-finite hand pose".into()));
    }
    let mut next = state.clone();
    Integrator::new(StringModel::new(*params, *geometry), dt).step(&mut next, hand_now, hand_next)?;
    Ok(next)
}

/// Incremental rollout over a sampled hand trajectory.
///
/// The state is reported at every hand sample; between samples the hand is
/// linearly interpolated and the string is integrated at the model step.
#[derive(Debug)]
pub struct Rollout<'a> {
    integrator: Integrator,
    hand: &'a [(f64, HandPose)],
    state: StringState,
    sample: usize,
}

impl<'a> Rollout<'a> {
    pub fn new(model: StringModel, hand: &'a [(f64, HandPose)], initial: StringState, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config(format!("time step must be positive, got {dt}")));
        }
        let first = hand.first().ok_or(Error::Empty("hand trajectory"))?;
        check_consistent(&initial, &model.geometry)?;
        if (first.0 - initial.time).abs() > 1e-9 {
            return Err(Error::InvalidState(format!(
                "hand trajectory starts at {} s but the initial state is at {} s",
                first.0, initial.time
            )));
        }
        Ok(Rollout {
            integrator: Integrator::new(model, dt),
            hand,
            state: initial,
            sample: 0,
        })
    }

    pub fn state(&self) -> &StringState {
        &self.state
    }

    /// Index of the hand sample the current state corresponds to.
    pub fn sample_index(&self) -> usize {
        self.sample
    }

    pub fn is_finished(&self) -> bool {
        self.sample + 1 >= self.hand.len()
    }

    /// Integrates up to the next hand sample. Returns `false` once the
    /// trajectory is exhausted.
    pub fn advance(&mut self) -> Result<bool> {
        if self.is_finished() {
            return Ok(false);
        }
        let (t0, h0) = &self.hand[self.sample];
        let (t1, h1) = &self.hand[self.sample + 1];
        let span = t1 - t0;
        let dt = self.integrator.dt();
        let substeps = (span / dt).round();
        if substeps < 1.0 || (substeps * dt - span).abs() > 1e-9 * span.max(1.0) {
            return Err(Error::config(format!(
                "step {dt} s does not divide the hand sampling interval {span} s"
            )));
        }
        let substeps = substeps as usize;
        let mut now = *h0;
        for s in 1..=substeps {
            let next = if s == substeps {
                *h1
            } else {
                h0.lerp(h1, s as f64 / substeps as f64)
            };
            self.integrator.step(&mut self.state, &now, &next)?;
            now = next;
        }
        self.state.time = *t1;
        self.sample += 1;
        Ok(true)
    }
}

/// Rolls the string out along `hand_trajectory`, returning the state at
/// every hand sample (the first being `initial`).
pub fn simulate_rollout(
    params: &StringParams,
    geometry: &StringGeometry,
    hand_trajectory: &[(f64, HandPose)],
    initial: &StringState,
    dt: f64,
) -> Result<Vec<StringState>> {
    simulate_model(StringModel::new(*params, *geometry), hand_trajectory, initial, dt)
}

/// [`simulate_rollout`] for an arbitrary force model.
pub fn simulate_model(
    model: StringModel,
    hand_trajectory: &[(f64, HandPose)],
    initial: &StringState,
    dt: f64,
) -> Result<Vec<StringState>> {
    let mut rollout = Rollout::new(model, hand_trajectory, initial.clone(), dt)?;
    let mut out = Vec::with_capacity(hand_trajectory.len());
    out.push(rollout.state().clone());
    while rollout.advance()? {
        out.push(rollout.state().clone());
    }
    Ok(out)
}

/// Static extension of segment `j` (0-based, between points `j` and `j+1`)
/// of a chain hanging under gravity.
pub fn hanging_extension(j: usize, geometry: &StringGeometry, params: &StringParams) -> f64 {
    STANDARD_GRAVITY * (geometry.n - 1 - j) as f64 / params.k_s
}

/// The string hanging straight down from the grasp with its static stretch
/// and zero velocity.
pub fn init_hanging_state(grasp: &HandPose, geometry: &StringGeometry, params: &StringParams) -> StringState {
    let rest = geometry.rest_length();
    let mut positions = Vec::with_capacity(geometry.n);
    let mut y = grasp.position.y;
    positions.push(grasp.position);
    for j in 0..geometry.n - 1 {
        y -= rest + hanging_extension(j, geometry, params);
        positions.push(Vec2::new(grasp.position.x, y));
    }
    StringState {
        positions,
        velocities: vec![Vec2::ZERO; geometry.n],
        time: 0.0,
    }
}
