//! Reference implementations written independently of the library code.
#![allow(dead_code)]

use castsim::arm::{ArmConfig, HandTrajectory};
use castsim::observation::{BinaryFrame, Pixel};
use castsim::string_model::{HandPose, StringParams};

pub type P = (f64, f64);

fn sub(a: P, b: P) -> P {
    (a.0 - b.0, a.1 - b.1)
}

fn wrap(a: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let r = a.rem_euclid(tau);
    if r > std::f64::consts::PI {
        r - tau
    } else {
        r
    }
}

/// Direction angle and its time derivative of the segment from `a` to `b`.
fn segment_angle(a: P, b: P, va: P, vb: P) -> (f64, f64) {
    let (dx, dy) = sub(b, a);
    let (dvx, dvy) = sub(vb, va);
    (dy.atan2(dx), (dx * dvy - dy * dvx) / (dx * dx + dy * dy))
}

/// Unit-mass equation of motion, term by term: spring and damper forces of
/// the two adjacent segments, hinge couples of the hinges at i-1, i, i+1,
/// the grasp hinge, gravity and drag. Hinge torque `tau` at a joint acts on
/// the outer end of each adjacent segment as `tau / l0` perpendicular to it.
pub fn eq1_accelerations(
    params: &StringParams,
    l0: f64,
    gravity: P,
    kappa: f64,
    r: &[P],
    v: &[P],
    hand: &HandPose,
) -> Vec<P> {
    let n = r.len();
    let mut acc = vec![(0.0, 0.0); n];
    let perp = |ang: f64| (-ang.sin(), ang.cos());

    // Segment j joins j and j+1.
    let seg: Vec<(f64, f64, f64, f64)> = (0..n - 1)
        .map(|j| {
            let (dx, dy) = sub(r[j + 1], r[j]);
            let len = (dx * dx + dy * dy).sqrt();
            let (ang, rate) = segment_angle(r[j], r[j + 1], v[j], v[j + 1]);
            let (dvx, dvy) = sub(v[j + 1], v[j]);
            let ext_rate = (dx * dvx + dy * dvy) / len;
            let tension = params.k_s * (len - l0) + params.c_s * ext_rate;
            (ang, rate, len, tension)
        })
        .collect();

    for i in 0..n {
        let mut f = (gravity.0, gravity.1);
        let speed = (v[i].0 * v[i].0 + v[i].1 * v[i].1).sqrt();
        f.0 -= (params.c_c1 + params.c_c2 * speed) * v[i].0;
        f.1 -= (params.c_c1 + params.c_c2 * speed) * v[i].1;
        // Spring/damper of segment i (pulls toward i+1) and i-1 (toward i-1).
        if i + 1 < n {
            let (ang, _, _, t) = seg[i];
            f.0 += t * ang.cos();
            f.1 += t * ang.sin();
        }
        if i >= 1 {
            let (ang, _, _, t) = seg[i - 1];
            f.0 -= t * ang.cos();
            f.1 -= t * ang.sin();
        }
        // Interior hinge at k, between segments k-1 and k.
        let hinge = |k: usize| -> f64 {
            let bend = wrap(seg[k].0 - seg[k - 1].0);
            let rate = seg[k].1 - seg[k - 1].1;
            -(params.k_h * bend + params.c_h * rate) * (1.0 + kappa * bend * bend)
        };
        for k in 1..n.saturating_sub(1) {
            let tau = hinge(k);
            let on_next = perp(seg[k].0);
            let on_prev = perp(seg[k - 1].0);
            let s = tau / l0;
            if i == k + 1 {
                f.0 += s * on_next.0;
                f.1 += s * on_next.1;
            } else if i + 1 == k {
                f.0 += s * on_prev.0;
                f.1 += s * on_prev.1;
            } else if i == k {
                f.0 -= s * (on_next.0 + on_prev.0);
                f.1 -= s * (on_next.1 + on_prev.1);
            }
        }
        // Grasp hinge between the hand axis and segment 0.
        let phi = wrap(seg[0].0 - hand.orientation);
        let tau = -(params.k_ph * phi + params.c_ph * (seg[0].1 - hand.angular_velocity));
        let on_first = perp(seg[0].0);
        if i == 1 {
            f.0 += tau / l0 * on_first.0;
            f.1 += tau / l0 * on_first.1;
        } else if i == 0 {
            f.0 -= tau / l0 * on_first.0;
            f.1 -= tau / l0 * on_first.1;
        }
        acc[i] = f;
    }
    acc
}

/// Capped chessboard distance transform by exhaustive search.
pub fn brute_force_scores(frame: &BinaryFrame, p_max: u32) -> Vec<u32> {
    let set: Vec<(i64, i64)> = (0..frame.height as i64)
        .flat_map(|y| (0..frame.width as i64).map(move |x| (x, y)))
        .filter(|&(x, y)| frame.get(Pixel::new(x, y)))
        .collect();
    let mut out = Vec::with_capacity(frame.width * frame.height);
    for y in 0..frame.height as i64 {
        for x in 0..frame.width as i64 {
            let d = set
                .iter()
                .map(|&(sx, sy)| (sx - x).abs().max((sy - y).abs()))
                .min()
                .unwrap_or(i64::MAX);
            out.push((p_max as i64 - d.min(p_max as i64)).max(0) as u32);
        }
    }
    out
}

/// Limit breaches of a realized trajectory, recomputed from the stored
/// joint data with a separate kinematics implementation.
pub fn scan_limits(traj: &HandTrajectory, arm: &ArmConfig) -> Vec<String> {
    let mut bad = Vec::new();
    let (bx, by) = (arm.base_position[0], arm.base_position[1]);
    for s in &traj.samples {
        let mut heading = 0.0;
        let mut rate = 0.0;
        let (mut x, mut y, mut vx, mut vy) = (bx, by, 0.0, 0.0);
        for j in 0..3 {
            let [lo, hi] = arm.joint_limits[j];
            if s.angles[j] < lo || s.angles[j] > hi {
                bad.push(format!("t={} joint {} angle {}", s.time, j, s.angles[j]));
            }
            if s.joint_velocities[j].abs() > arm.joint_velocity_limits[j] {
                bad.push(format!("t={} joint {} rate {}", s.time, j, s.joint_velocities[j]));
            }
            heading += s.angles[j];
            rate += s.joint_velocities[j];
            let l = arm.link_lengths[j];
            x += l * heading.cos();
            y += l * heading.sin();
            vx -= l * heading.sin() * rate;
            vy += l * heading.cos() * rate;
        }
        let speed = (vx * vx + vy * vy).sqrt();
        if speed > arm.composite_speed_limit {
            bad.push(format!("t={} hand speed {}", s.time, speed));
        }
        let (hx, hy) = (s.hand.position.x, s.hand.position.y);
        if (hx - x).abs() > 1e-9 || (hy - y).abs() > 1e-9 {
            bad.push(format!("t={} hand position disagrees with kinematics", s.time));
        }
    }
    bad
}

/// Bernstein-form evaluation of a Bezier curve at `u` in [0, 1].
pub fn bernstein(controls: &[f64], u: f64) -> f64 {
    let d = controls.len() - 1;
    let mut binom = 1.0;
    let mut sum = 0.0;
    for (k, c) in controls.iter().enumerate() {
        sum += binom * u.powi(k as i32) * (1.0 - u).powi((d - k) as i32) * c;
        binom = binom * (d - k) as f64 / (k + 1) as f64;
    }
    sum
}

/// Composite Simpson integral of `f` over `[a, b]` with `panels` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut sum = f(a) + f(b);
    for k in 1..panels {
        sum += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}
