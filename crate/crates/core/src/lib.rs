//! Stochastic hybrid minimum-time route planning for a sailing boat.
//!
//! The crate solves the discrete quasi-variational HJB system of a boat that
//! can steer continuously (angle to the wind) and switch discretely between
//! tacks, under a wind direction that drifts and diffuses. The pieces are:
//!
//! - [`domain`]: dynamics, wind and polar models, costs, grid geometry.
//! - [`solver`]: semi-Lagrangian value iteration and feedback policy extraction.
//! - [`sim`]: closed-loop Euler–Maruyama simulation and Monte Carlo statistics.
//! - [`analysis`]: switching maps, tacking-triangle widths, lay lines and the
//!   analytic value of the deterministic two-leg problem.
//! - [`io`]: scenario files, obstacle rasters, result export and presets.
//!
//! Data-parallel loops (Jacobi sweeps, policy extraction, Monte Carlo runs) use
//! rayon when the `parallel` feature is enabled and fall back to plain
//! iterators otherwise; results are bit-identical either way.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod domain;
pub mod error;
pub mod io;
pub mod parallel;
pub mod sim;
pub mod solver;

pub use domain::{
    diffusion, drift, masked_speed, polar_speed, validate_scenario, Axis, CostSpec, GridSpec,
    HeadingConvention, Mode, ModeSet, ObstacleMask, PolarKind, PolarModel, Scenario,
    SwitchCostTable, TargetSpec, Violation, WindModel,
};
pub use error::{DomainError, Error, Result};
pub use parallel::Execution;
pub use sim::{mc_stats, simulate, McSummary, NoiseSource, SimState, Termination, Trajectory};
pub use solver::{solve, Action, PolicyField, Scheme, Solution, SolverConfig, SweepMode, ValueField};
