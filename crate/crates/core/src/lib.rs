//! Closed-loop casting manipulation workbench.
//!
//! A planar 3-DOF arm throws a grasped string so that its free tip reaches a
//! target box. Motions are generated against a mass-spring-damper string
//! model, executed on a hidden-parameter plant that renders binary camera
//! frames, and the model parameters are re-estimated from those frames by a
//! derivative-free, stepwise-narrowing random search. The loop repeats until
//! the plant's tip reaches the target or the iteration budget runs out.
//!
//! Module map:
//!
//! * [`string_model`]: chain-of-mass-points dynamics and explicit Euler rollouts.
//! * [`arm`]: forward kinematics, Bezier joint-velocity plans, limit validation.
//! * [`observation`]: rasterization, dilation score fields, tip localization.
//! * [`matching`]: the end-weighted matching rate between simulation and frames.
//! * [`estimation`]: exponential-form parameter sampling and the search round.
//! * [`plant`]: the hidden-parameter stand-in for the physical string.
//! * [`orchestrator`]: scenarios, the trial loop and artifact output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arm;
pub mod error;
pub mod estimation;
pub mod geom;
pub mod matching;
pub mod observation;
pub mod orchestrator;
pub mod plant;
pub mod string_model;

pub use error::{Error, Result};
pub use geom::Vec2;
