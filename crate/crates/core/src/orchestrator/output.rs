//! Trial artifacts on disk: JSON log, PGM frames, CSV trajectories and SVG
//! overlays.
//!
//! Layout under the output root:
//!
//! ```text
//! trial.json  timing.json  tip.csv  hand.csv  montage.svg
//! frames/     (last filmed iteration: frame_NNNN.pgm + frames.idx)
//! overlay/    (one SVG per frame of the last filmed iteration)
//! iter_NN/    (tip.csv, hand.csv, predicted_tip.csv, frames/ for earlier iterations)
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::arm::{HandTrajectory, TrajectorySample, JOINTS};
use crate::error::{Error, Result};
use crate::geom::{wrap_angle, Vec2};
use crate::observation::{nearest_state, write_series, BinaryFrame, CameraModel};
use crate::plant::{ObstacleSpec, TargetSpec};
use crate::string_model::{HandPose, StringState};

use super::{iteration_dir_name, IterationData, Scenario, TrialOutcome, FINAL_FRAMES_DIR};

pub const TIP_HEADER: &str = "t_s,x_m,y_m";
pub const HAND_HEADER: &str = "t_s,x_m,y_m,theta_rad";

/// Snapshots shown in the montage.
const MONTAGE_PANELS: usize = 12;
const MONTAGE_COLUMNS: usize = 4;

pub fn tip_csv(tip: &[(f64, Vec2)]) -> String {
    let mut out = format!("{TIP_HEADER}\n");
    for (t, p) in tip {
        let _ = writeln!(out, "{t},{},{}", p.x, p.y);
    }
    out
}

pub fn hand_csv(hand: &HandTrajectory) -> String {
    let mut out = format!("{HAND_HEADER}\n");
    for s in &hand.samples {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            s.time, s.hand.position.x, s.hand.position.y, s.hand.orientation
        );
    }
    out
}

fn parse_rows(text: &str, what: &str, header: &str) -> Result<Vec<Vec<f64>>> {
    let bad = |line: usize, m: String| Error::Parse {
        what: what.to_string(),
        message: format!("line {line}: {m}"),
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        Some((i, h)) => return Err(bad(i + 1, format!("expected header `{header}`, found `{}`", h.trim()))),
        None => return Err(bad(1, format!("missing header `{header}`"))),
    }
    let width = header.split(',').count();
    lines
        .map(|(i, l)| {
            let row = l
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|e| bad(i + 1, format!("`{}`: {e}", c.trim())))
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != width {
                return Err(bad(i + 1, format!("expected {width} columns, found {}", row.len())));
            }
            Ok(row)
        })
        .collect()
}

pub fn parse_tip_csv(text: &str) -> Result<Vec<(f64, Vec2)>> {
    Ok(parse_rows(text, "tip CSV", TIP_HEADER)?
        .into_iter()
        .map(|r| (r[0], Vec2::new(r[1], r[2])))
        .collect())
}

/// Reads a hand CSV back into a trajectory. Rates come from central
/// differences (one-sided at the ends); joint data is not recorded and is
/// left at zero.
pub fn parse_hand_csv(text: &str) -> Result<HandTrajectory> {
    let rows = parse_rows(text, "hand CSV", HAND_HEADER)?;
    if rows.is_empty() {
        return Err(Error::Empty("hand CSV"));
    }
    let n = rows.len();
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
        let span = rows[b][0] - rows[a][0];
        let (velocity, angular_velocity) = if span > 0.0 {
            (
                Vec2::new(rows[b][1] - rows[a][1], rows[b][2] - rows[a][2]) / span,
                wrap_angle(rows[b][3] - rows[a][3]) / span,
            )
        } else {
            (Vec2::ZERO, 0.0)
        };
        samples.push(TrajectorySample {
            time: rows[i][0],
            hand: HandPose {
                position: Vec2::new(rows[i][1], rows[i][2]),
                orientation: rows[i][3],
                velocity,
                angular_velocity,
            },
            angles: [0.0; JOINTS],
            joint_velocities: [0.0; JOINTS],
        });
    }
    let motion_end = samples.last().map_or(0.0, |s| s.time);
    Ok(HandTrajectory { samples, motion_end })
}

fn states_tip(states: &[StringState]) -> Vec<(f64, Vec2)> {
    states.iter().map(|s| (s.time, s.tip())).collect()
}

fn rect_px(camera: &CameraModel, lo: Vec2, hi: Vec2) -> (f64, f64, f64, f64) {
    let (x0, y0) = camera.to_image(Vec2::new(lo.x, hi.y));
    let (x1, y1) = camera.to_image(Vec2::new(hi.x, lo.y));
    (x0, y0, x1 - x0, y1 - y0)
}

/// Frame body without the outer `<svg>` element.
fn overlay_body(
    frame: &BinaryFrame,
    simulated: Option<&[Vec2]>,
    camera: &CameraModel,
    target: &TargetSpec,
    obstacle: &ObstacleSpec,
) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<rect width="{}" height="{}" fill="white"/>"#,
        frame.width, frame.height
    );
    let _ = writeln!(s, r##"<g fill="#999">"##);
    for y in 0..frame.height {
        let row = &frame.bits[y * frame.width..(y + 1) * frame.width];
        let mut x = 0;
        while x < frame.width {
            if row[x] == 0 {
                x += 1;
                continue;
            }
            let start = x;
            while x < frame.width && row[x] != 0 {
                x += 1;
            }
            let _ = writeln!(s, r#"<rect x="{start}" y="{y}" width="{}" height="1"/>"#, x - start);
        }
    }
    let _ = writeln!(s, "</g>");
    let (tx, ty, tw, th) = rect_px(
        camera,
        Vec2::new(target.x_ref - target.w, target.y_ref - target.h),
        Vec2::new(target.x_ref + target.w, target.y_ref + target.h),
    );
    let _ = writeln!(
        s,
        r#"<rect x="{tx}" y="{ty}" width="{tw}" height="{th}" fill="none" stroke="green" stroke-width="2"/>"#
    );
    if obstacle.present {
        let lo = Vec2::new(obstacle.corner[0], obstacle.corner[1]);
        let (ox, oy, ow, oh) = rect_px(camera, lo, lo + Vec2::new(obstacle.width, obstacle.height));
        let _ = writeln!(
            s,
            r##"<rect x="{ox}" y="{oy}" width="{ow}" height="{oh}" fill="#c84" fill-opacity="0.6"/>"##
        );
    }
    if let Some(points) = simulated {
        let _ = writeln!(s, r#"<g fill="none" stroke="red" stroke-width="1.5">"#);
        for p in points {
            let (x, y) = camera.to_image(*p);
            let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="4"/>"#);
        }
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(
        s,
        r#"<text x="8" y="20" font-family="monospace" font-size="14">t = {:.3} s</text>"#,
        frame.timestamp
    );
    s
}

/// Observed pixels in grey, simulated points as red circles, target box in
/// green and the obstacle filled.
pub fn overlay_svg(
    frame: &BinaryFrame,
    simulated: Option<&[Vec2]>,
    camera: &CameraModel,
    target: &TargetSpec,
    obstacle: &ObstacleSpec,
) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n{}</svg>\n",
        overlay_body(frame, simulated, camera, target, obstacle),
        w = frame.width,
        h = frame.height
    )
}

fn simulated_at(predicted: &[StringState], t: f64) -> Option<&[Vec2]> {
    let tol = match predicted {
        [a, b, ..] => (b.time - a.time) / 2.0,
        _ => 0.0,
    } + 1e-9;
    nearest_state(predicted, t, tol).map(|i| predicted[i].positions.as_slice())
}

/// Evenly spaced snapshots of one iteration on a grid.
pub fn montage_svg(data: &IterationData, camera: &CameraModel, target: &TargetSpec, obstacle: &ObstacleSpec) -> String {
    let frames = data.frames.as_ref().map_or(&[][..], |f| f.frames.as_slice());
    let panels = frames.len().min(MONTAGE_PANELS);
    let (w, h) = (camera.width, camera.height);
    let cols = MONTAGE_COLUMNS.min(panels.max(1));
    let rows = panels.div_ceil(cols).max(1);
    let scale = 0.5;
    let (pw, ph) = (w as f64 * scale, h as f64 * scale);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\">\n",
        pw * cols as f64,
        ph * rows as f64
    );
    for k in 0..panels {
        let i = if panels > 1 {
            k * (frames.len() - 1) / (panels - 1)
        } else {
            0
        };
        let frame = &frames[i];
        let (c, r) = (k % cols, k / cols);
        let _ = writeln!(
            s,
            r#"<svg x="{}" y="{}" width="{pw}" height="{ph}" viewBox="0 0 {w} {h}">"#,
            c as f64 * pw,
            r as f64 * ph
        );
        s.push_str(&overlay_body(
            frame,
            simulated_at(&data.predicted, frame.timestamp),
            camera,
            target,
            obstacle,
        ));
        s.push_str("</svg>\n");
    }
    s.push_str("</svg>\n");
    s
}

fn write_iteration_files(dir: &Path, data: &IterationData) -> Result<()> {
    fs::create_dir_all(dir)?;
    if let Some(hand) = &data.hand {
        fs::write(dir.join("hand.csv"), hand_csv(hand))?;
    }
    if !data.tip.is_empty() {
        fs::write(dir.join("tip.csv"), tip_csv(&data.tip))?;
    }
    if !data.predicted.is_empty() {
        fs::write(dir.join("predicted_tip.csv"), tip_csv(&states_tip(&data.predicted)))?;
    }
    Ok(())
}

/// Writes every artifact of a finished trial under `out`.
pub fn write_trial(outcome: &TrialOutcome, scenario: &Scenario, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let log = serde_json::to_string_pretty(&outcome.log)?;
    fs::write(out.join("trial.json"), log + "\n")?;
    let timing = serde_json::json!({ "wall_clock_s": outcome.wall_clock_s });
    fs::write(out.join("timing.json"), serde_json::to_string_pretty(&timing)? + "\n")?;

    let last = outcome.data.iter().rposition(|d| d.frames.is_some());
    for (k, (log, data)) in outcome.log.iterations.iter().zip(&outcome.data).enumerate() {
        let dir = out.join(iteration_dir_name(log.index));
        write_iteration_files(&dir, data)?;
        if Some(k) != last {
            if let Some(frames) = &data.frames {
                write_series(frames, &dir.join("frames"))?;
            }
        }
    }

    let Some(last) = last else {
        return Ok(());
    };
    let data = &outcome.data[last];
    let frames = data.frames.as_ref().expect("filmed iteration");
    write_series(frames, &out.join(FINAL_FRAMES_DIR))?;
    write_iteration_files(out, data)?;
    let overlay = out.join("overlay");
    fs::create_dir_all(&overlay)?;
    for (i, frame) in frames.frames.iter().enumerate() {
        let svg = overlay_svg(
            frame,
            simulated_at(&data.predicted, frame.timestamp),
            &scenario.camera,
            &scenario.target,
            &scenario.obstacle,
        );
        fs::write(overlay.join(format!("frame_{i:04}.svg")), svg)?;
    }
    fs::write(
        out.join("montage.svg"),
        montage_svg(data, &scenario.camera, &scenario.target, &scenario.obstacle),
    )?;
    Ok(())
}
