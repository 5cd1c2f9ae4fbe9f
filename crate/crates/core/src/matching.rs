//! Matching rate between a simulated string motion and observed frames.
//!
//! For every observed frame the simulated mass points are projected into the
//! image and read off the frame's dilation score field; the last point is
//! scored by its distance to the observed tip instead. Scores are weighted
//! so that points further from the grasp count more:
//!
//! ```text
//! E_f = sum_i p_i w_i / (p_max sum_i w_i),  w_i = 1 + (i - 1) dw,  E = mean_f E_f
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::observation::{build_score_field, locate_tip, nearest_state, CameraModel, FrameSeries, Pixel, ScoreField};
use crate::string_model::{Rollout, StringState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub p_max: u32,
    pub delta_w: f64,
    pub tip_bin_pixels: u32,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            p_max: 8,
            delta_w: 0.25,
            tip_bin_pixels: 3,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=255).contains(&self.p_max) {
            return Err(Error::config("p_max must be in 1..=255"));
        }
        if !(self.delta_w >= 0.0 && self.delta_w.is_finite()) {
            return Err(Error::config("weighting increment must be non-negative"));
        }
        if self.tip_bin_pixels == 0 {
            return Err(Error::config("tip bin must be at least one pixel"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    #[serde(rename = "matching_rate")]
    pub e: f64,
    pub per_frame: Vec<f64>,
    pub frames_used: usize,
}

impl MatchReport {
    fn from_frames(per_frame: Vec<f64>) -> Self {
        let e = per_frame.iter().sum::<f64>() / per_frame.len() as f64;
        MatchReport {
            e,
            frames_used: per_frame.len(),
            per_frame,
        }
    }
}

/// `w_i = 1 + (i - 1) dw` for `i = 1..n`.
pub fn point_weights(n: usize, delta_w: f64) -> Vec<f64> {
    (0..n).map(|i| 1.0 + i as f64 * delta_w).collect()
}

/// `p_max` minus one level per `tip_bin_pixels` of chessboard distance.
pub fn tip_proximity_score(sim_tip: Pixel, actual_tip: Pixel, config: &MatchConfig) -> u32 {
    let bins = sim_tip.chessboard(actual_tip) / config.tip_bin_pixels as i64;
    (config.p_max as i64 - bins).max(0) as u32
}

/// Weighted, normalized score of one frame. The last simulated point is
/// the tip.
pub fn frame_score(
    sim_points: &[Pixel],
    field: &ScoreField,
    actual_tip: Pixel,
    weights: &[f64],
    config: &MatchConfig,
) -> f64 {
    debug_assert_eq!(sim_points.len(), weights.len());
    let Some((tip, body)) = sim_points.split_last() else {
        return 0.0;
    };
    let mut num = 0.0;
    for (px, w) in body.iter().zip(weights) {
        num += field.get(*px) as f64 * w;
    }
    num += tip_proximity_score(*tip, actual_tip, config) as f64 * weights[sim_points.len() - 1];
    let den = config.p_max as f64 * weights.iter().sum::<f64>();
    num / den
}

/// Score fields and tips of an observed series, computed once and reused
/// for every candidate.
#[derive(Debug, Clone)]
pub struct PreparedObservation {
    pub frames: Vec<PreparedFrame>,
    pub config: MatchConfig,
}

#[derive(Debug, Clone)]
pub struct PreparedFrame {
    pub timestamp: f64,
    pub field: ScoreField,
    pub tip: Pixel,
}

impl PreparedObservation {
    pub fn new(observed: &FrameSeries, config: &MatchConfig) -> Result<Self> {
        if observed.is_empty() {
            return Err(Error::Empty("observed frame series"));
        }
        config.validate()?;
        let frames = observed
            .frames
            .iter()
            .map(|f| {
                Ok(PreparedFrame {
                    timestamp: f.timestamp,
                    field: build_score_field(f, config.p_max),
                    tip: locate_tip(f)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedObservation {
            frames,
            config: config.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn score(&self, frame: usize, positions: &[Vec2], camera: &CameraModel, weights: &[f64]) -> f64 {
        let f = &self.frames[frame];
        let pixels: Vec<Pixel> = positions.iter().map(|p| camera.project(*p)).collect();
        frame_score(&pixels, &f.field, f.tip, weights, &self.config)
    }
}

/// Matching rate of `sim_states` against `observed`, pairing each frame
/// with the nearest simulated sample.
pub fn matching_rate(
    sim_states: &[StringState],
    observed: &FrameSeries,
    camera: &CameraModel,
    config: &MatchConfig,
) -> Result<MatchReport> {
    let prepared = PreparedObservation::new(observed, config)?;
    score_states(&prepared, sim_states, camera)
}

/// [`matching_rate`] against an already prepared observation.
pub fn score_states(
    prepared: &PreparedObservation,
    sim_states: &[StringState],
    camera: &CameraModel,
) -> Result<MatchReport> {
    let first = sim_states.first().ok_or(Error::Empty("simulated states"))?;
    let tolerance = match sim_states {
        [a, b, ..] => (b.time - a.time) / 2.0,
        _ => 0.0,
    } + 1e-9;
    let weights = point_weights(first.len(), prepared.config.delta_w);
    let mut per_frame = Vec::with_capacity(prepared.len());
    for (k, f) in prepared.frames.iter().enumerate() {
        let i = nearest_state(sim_states, f.timestamp, tolerance).ok_or(Error::Alignment {
            time: f.timestamp,
            tolerance,
        })?;
        per_frame.push(prepared.score(k, &sim_states[i].positions, camera, &weights));
    }
    Ok(MatchReport::from_frames(per_frame))
}

/// Scores a rollout while it is integrated, stopping early once even
/// perfect scores on the remaining frames could not reach `prune_below`.
///
/// Returns `Ok(None)` when pruned. Pairing matches [`score_states`] on a
/// uniform sample grid.
pub fn score_rollout(
    prepared: &PreparedObservation,
    rollout: &mut Rollout<'_>,
    sample_period: f64,
    camera: &CameraModel,
    prune_below: f64,
) -> Result<Option<MatchReport>> {
    let total = prepared.len();
    let weights = point_weights(rollout.state().len(), prepared.config.delta_w);
    let tolerance = sample_period / 2.0 + 1e-9;
    let mut per_frame = Vec::with_capacity(total);
    let mut sum = 0.0;
    for (k, f) in prepared.frames.iter().enumerate() {
        while rollout.state().time < f.timestamp - tolerance && rollout.advance()? {}
        let t = rollout.state().time;
        if (t - f.timestamp).abs() > tolerance {
            return Err(Error::Alignment {
                time: f.timestamp,
                tolerance,
            });
        }
        let score = prepared.score(k, &rollout.state().positions, camera, &weights);
        sum += score;
        per_frame.push(score);
        let remaining = (total - k - 1) as f64;
        if (sum + remaining) / (total as f64) < prune_below {
            return Ok(None);
        }
    }
    Ok(Some(MatchReport::from_frames(per_frame)))
}
