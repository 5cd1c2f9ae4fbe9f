//! Derivative-free string-parameter search.
//!
//! Every parameter is searched through an exponent `chi` in [0, 1] mapped as
//! `P = P_min (P_max / P_min)^chi`, which makes the search uniform in log
//! scale. Candidates are drawn around the incumbent exponents with a half
//! width of `(chi_0 / M) beta^m`, where `M` is the manipulation index and
//! `m` counts how often the incumbent improved in the current round.

use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arm::HandTrajectory;
use crate::error::{Error, Result};
use crate::matching::{score_rollout, MatchConfig, MatchReport, PreparedObservation};
use crate::observation::{CameraModel, FrameSeries};
use crate::string_model::{init_hanging_state, Rollout, StringGeometry, StringModel, StringParams};

/// Search bounds for every parameter, `[min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamRange {
    pub k_s: [f64; 2],
    pub c_s: [f64; 2],
    pub k_h: [f64; 2],
    pub c_h: [f64; 2],
    pub c_c1: [f64; 2],
    pub c_c2: [f64; 2],
    pub k_ph: [f64; 2],
    pub c_ph: [f64; 2],
}

impl Default for ParamRange {
    fn default() -> Self {
        ParamRange {
            k_s: [9.0e3, 9.0e5],
            c_s: [0.13, 1.3e3],
            k_h: [8.0e-3, 4.0e2],
            c_h: [3.0e-7, 0.67],
            c_c1: [1.0e-4, 10.0],
            c_c2: [1.0e-4, 10.0],
            k_ph: [1.0e-3, 5.0],
            c_ph: [1.1e-6, 0.37],
        }
    }
}

impl ParamRange {
    pub fn bounds(&self) -> [[f64; 2]; StringParams::COUNT] {
        [
            self.k_s, self.c_s, self.k_h, self.c_h, self.c_c1, self.c_c2, self.k_ph, self.c_ph,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in StringParams::NAMES.iter().zip(self.bounds()) {
            if !(lo > 0.0 && hi.is_finite() && lo < hi) {
                return Err(Error::config(format!(
                    "range for {name} must satisfy 0 < min < max, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, params: &StringParams) -> bool {
        params
            .to_array()
            .iter()
            .zip(self.bounds())
            .all(|(v, [lo, hi])| (lo..=hi).contains(v))
    }

    pub fn to_values(&self, chi: &[f64; StringParams::COUNT]) -> StringParams {
        let b = self.bounds();
        let mut out = [0.0; StringParams::COUNT];
        for j in 0..StringParams::COUNT {
            out[j] = exponent_to_value(chi[j], b[j]);
        }
        StringParams::from_array(out)
    }

    pub fn to_exponents(&self, params: &StringParams) -> [f64; StringParams::COUNT] {
        let b = self.bounds();
        let v = params.to_array();
        let mut out = [0.0; StringParams::COUNT];
        for j in 0..StringParams::COUNT {
            out[j] = value_to_exponent(v[j], b[j]);
        }
        out
    }

    /// Every parameter at its minimum.
    pub fn minima(&self) -> StringParams {
        self.to_values(&[0.0; StringParams::COUNT])
    }
}

/// `P_min (P_max / P_min)^chi`. The endpoints are returned exactly.
pub fn exponent_to_value(chi: f64, [lo, hi]: [f64; 2]) -> f64 {
    if chi <= 0.0 {
        lo
    } else if chi >= 1.0 {
        hi
    } else {
        lo * (hi / lo).powf(chi)
    }
}

pub fn value_to_exponent(value: f64, [lo, hi]: [f64; 2]) -> f64 {
    (value / lo).ln() / (hi / lo).ln()
}

/// Half width of the exponent search window.
pub fn search_half_width(chi_0: f64, manipulation: u32, beta: f64, m: u64) -> f64 {
    chi_0 / manipulation as f64 * beta.powf(m as f64)
}

/// One exponent draw for a uniform `rand` in [-1, 1], clamped to [0, 1].
pub fn exponent_from_draw(chi_best: f64, chi_0: f64, manipulation: u32, beta: f64, m: u64, rand: f64) -> f64 {
    (chi_best + search_half_width(chi_0, manipulation, beta, m) * rand).clamp(0.0, 1.0)
}

pub fn sample_exponent<R: Rng + ?Sized>(
    chi_best: f64,
    chi_0: f64,
    manipulation: u32,
    beta: f64,
    m: u64,
    rng: &mut R,
) -> f64 {
    exponent_from_draw(chi_best, chi_0, manipulation, beta, m, rng.gen_range(-1.0..=1.0))
}

/// Search settings shared by every round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationBudget {
    /// Candidates per round, the incumbent included.
    pub samples: usize,
    pub chi_0: f64,
    pub beta: f64,
}

impl Default for EstimationBudget {
    fn default() -> Self {
        EstimationBudget {
            samples: 2000,
            chi_0: 0.6,
            beta: 0.995,
        }
    }
}

impl EstimationBudget {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::config("estimation needs at least one candidate per round"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::config("beta must lie in (0, 1)"));
        }
        if !(self.chi_0 >= 0.0 && self.chi_0.is_finite()) {
            return Err(Error::config("chi_0 must be non-negative"));
        }
        Ok(())
    }
}

/// Search progress carried between manipulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    pub chi_best: [f64; StringParams::COUNT],
    /// Incumbent improvements so far in the current round.
    pub m: u64,
    /// Manipulations estimated so far; the next round runs with `M = manipulations + 1`.
    pub manipulations: u32,
    pub chi_0: f64,
    pub beta: f64,
    pub best_e: f64,
}

impl SearchState {
    /// Start of a trial: all parameters at their range minima.
    pub fn new(budget: &EstimationBudget) -> Self {
        SearchState {
            chi_best: [0.0; StringParams::COUNT],
            m: 0,
            manipulations: 0,
            chi_0: budget.chi_0,
            beta: budget.beta,
            best_e: 0.0,
        }
    }

    pub fn manipulation_index(&self) -> u32 {
        self.manipulations + 1
    }

    pub fn half_width(&self) -> f64 {
        search_half_width(self.chi_0, self.manipulation_index(), self.beta, self.m)
    }

    pub fn params(&self, ranges: &ParamRange) -> StringParams {
        ranges.to_values(&self.chi_best)
    }
}

/// Exponents for one vector of uniform draws in [-1, 1] around `chi_best`.
pub fn exponents_from_draws(state: &SearchState, draws: &[f64; StringParams::COUNT]) -> [f64; StringParams::COUNT] {
    let m = state.manipulation_index();
    std::array::from_fn(|j| exponent_from_draw(state.chi_best[j], state.chi_0, m, state.beta, state.m, draws[j]))
}

fn unit_draws<R: Rng + ?Sized>(rng: &mut R) -> [f64; StringParams::COUNT] {
    std::array::from_fn(|_| rng.gen_range(-1.0..=1.0))
}

/// Draws one candidate's exponents around `chi_best`.
pub fn sample_exponents<R: Rng + ?Sized>(state: &SearchState, rng: &mut R) -> [f64; StringParams::COUNT] {
    exponents_from_draws(state, &unit_draws(rng))
}

pub fn sample_candidate<R: Rng + ?Sized>(state: &SearchState, ranges: &ParamRange, rng: &mut R) -> StringParams {
    let chi = sample_exponents(state, rng);
    ranges.to_values(&chi)
}

/// Everything [`estimate`] needs besides the observation itself.
#[derive(Debug, Clone)]
pub struct EstimationSetup<'a> {
    pub geometry: StringGeometry,
    pub ranges: &'a ParamRange,
    pub budget: &'a EstimationBudget,
    pub camera: &'a CameraModel,
    pub match_config: &'a MatchConfig,
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct EstimateOutcome {
    pub params: StringParams,
    pub report: MatchReport,
    pub state: SearchState,
    /// Score of the incumbent parameters (candidate 0), if it simulated.
    pub incumbent: Option<MatchReport>,
    pub evaluated: usize,
    pub pruned: usize,
    pub diverged: usize,
}

enum Evaluation {
    Scored(MatchReport),
    Pruned,
    Diverged,
}

fn evaluate(
    chi: &[f64; StringParams::COUNT],
    prepared: &PreparedObservation,
    hand: &[(f64, crate::string_model::HandPose)],
    period: f64,
    setup: &EstimationSetup<'_>,
    prune_below: f64,
) -> Result<Evaluation> {
    let params = setup.ranges.to_values(chi);
    let initial = init_hanging_state(&hand[0].1, &setup.geometry, &params);
    let model = StringModel::new(params, setup.geometry);
    let mut rollout = Rollout::new(model, hand, initial, setup.dt)?;
    match score_rollout(prepared, &mut rollout, period, setup.camera, prune_below) {
        Ok(Some(r)) => Ok(Evaluation::Scored(r)),
        Ok(None) => Ok(Evaluation::Pruned),
        Err(Error::Divergence { .. }) => Ok(Evaluation::Diverged),
        Err(e) => Err(e),
    }
}

/// Candidates scored together ahead of the sequential acceptance pass.
pub const ESTIMATION_BATCH: usize = 8;

/// One estimation round against the latest manipulation.
///
/// The incumbent is scored first, so for a fixed observation the best
/// matching rate never drops. Candidates are then drawn one at a time around
/// the current best; every strict improvement moves the centre there and
/// narrows the width by one `beta` step. Scoring runs ahead in parallel
/// batches and is redone for any draws that follow an improvement, so the
/// result equals the sequential search for every worker count.
pub fn estimate<R: Rng + ?Sized>(
    observed: &FrameSeries,
    hand_trajectory: &HandTrajectory,
    state: &SearchState,
    setup: &EstimationSetup<'_>,
    rng: &mut R,
) -> Result<EstimateOutcome> {
    setup.geometry.validate()?;
    setup.ranges.validate()?;
    setup.budget.validate()?;
    let prepared = PreparedObservation::new(observed, setup.match_config)?;
    let hand = hand_trajectory.hand_samples();
    if hand.is_empty() {
        return Err(Error::Empty("hand trajectory"));
    }
    let period = hand_trajectory.period();

    let mut next = state.clone();
    next.m = 0;
    let incumbent = match evaluate(&next.chi_best, &prepared, &hand, period, setup, f64::NEG_INFINITY)? {
        Evaluation::Scored(r) => Some(r),
        _ => None,
    };
    let mut best = incumbent.clone();
    let (mut pruned, mut diverged) = (0, usize::from(incumbent.is_none()));
    let samples = setup.budget.samples;
    let mut remaining = samples - 1;
    let mut pending = VecDeque::with_capacity(ESTIMATION_BATCH);
    while remaining > 0 {
        while pending.len() < ESTIMATION_BATCH.min(remaining) {
            pending.push_back(unit_draws(rng));
        }
        let batch: Vec<_> = pending.iter().map(|d| exponents_from_draws(&next, d)).collect();
        let floor = best.as_ref().map_or(0.0, |r| r.e);
        let results: Vec<Evaluation> = batch
            .par_iter()
            .map(|chi| evaluate(chi, &prepared, &hand, period, setup, floor))
            .collect::<Result<_>>()?;
        for (chi, ev) in batch.into_iter().zip(results) {
            pending.pop_front();
            remaining -= 1;
            match ev {
                Evaluation::Scored(r) if best.as_ref().is_none_or(|b| r.e > b.e) => {
                    next.chi_best = chi;
                    next.m += 1;
                    best = Some(r);
                    // Later draws were mapped around the old centre.
                    break;
                }
                Evaluation::Scored(_) => {}
                Evaluation::Pruned => pruned += 1,
                Evaluation::Diverged => diverged += 1,
            }
        }
    }
    let report = best.ok_or(Error::EstimationFailed(samples))?;

    next.best_e = report.e;
    next.manipulations += 1;
    Ok(EstimateOutcome {
        params: setup.ranges.to_values(&next.chi_best),
        report,
        state: next,
        incumbent,
        evaluated: samples,
        pruned,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exponent_endpoints_and_midpoint() {
        let r = [9.0e3, 9.0e5];
        assert_eq!(exponent_to_value(0.0, r), 9.0e3);
        assert_eq!(exponent_to_value(1.0, r), 9.0e5);
        assert!((exponent_to_value(0.5, r) - 9.0e4).abs() < 1e-9);
    }

    #[test]
    fn draw_examples() {
        assert_eq!(exponent_from_draw(0.37, 0.6, 1, 0.995, 10, 0.0), 0.37);
        assert_eq!(exponent_from_draw(0.0, 0.6, 1, 0.995, 0, -1.0), 0.0);
        assert_eq!(exponent_from_draw(0.9, 0.6, 1, 0.995, 0, 1.0), 1.0);
    }

    #[test]
    fn half_width_decays() {
        let s = SearchState::new(&EstimationBudget::default());
        assert_eq!(s.half_width(), 0.6);
        assert!(search_half_width(0.6, 2, 0.995, 100) < search_half_width(0.6, 2, 0.995, 99));
        assert!(search_half_width(0.6, 3, 0.995, 100) < search_half_width(0.6, 2, 0.995, 100));
    }

    #[test]
    fn candidates_in_range_and_reproducible() {
        let ranges = ParamRange::default();
        let mut state = SearchState::new(&EstimationBudget::default());
        state.chi_best = [0.5; 8];
        let a = state.clone();
        let b = state.clone();
        let mut ra = ChaCha8Rng::seed_from_u64(4);
        let mut rb = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let pa = sample_candidate(&a, &ranges, &mut ra);
            let pb = sample_candidate(&b, &ranges, &mut rb);
            assert_eq!(pa, pb);
            assert!(ranges.contains(&pa));
        }
    }

    #[test]
    fn minima_are_table_minimums() {
        let r = ParamRange::default();
        let p = r.minima();
        assert_eq!(p.k_s, 9.0e3);
        assert_eq!(p.c_ph, 1.1e-6);
    }

    #[test]
    fn inverted_range_rejected() {
        let r = ParamRange {
            k_s: [5.0, 1.0],
            ..ParamRange::default()
        };
        assert!(r.validate().is_err());
    }
}
