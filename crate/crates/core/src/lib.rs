//! Simulation engine for a two-loop adaptive control architecture.
//!
//! The inner loop is a model-reference adaptive controller acting on an
//! uncertain linear plant with reduced control effectiveness. The outer loop
//! is an adaptive model of a human pilot with a known internal reaction delay,
//! who drives the inner loop so that the plant follows a crossover-reference
//! model. The built-in scenario is the longitudinal short-period/phugoid
//! dynamics of a 747 in cruise with a mid-run elevator effectiveness failure.
//!
//! Module map:
//!
//! - [`numerics`]: Lyapunov/Riccati solvers, eigenvalues, matrix exponential,
//!   delay-aware fixed-step integration and history buffers.
//! - [`adaptive`]: the element-wise projection operator and offline gain design.
//! - [`inner_loop`]: plant, reference model and inner adaptive laws.
//! - [`pilot_model`]: crossover model, delayed pilot command and outer adaptive laws.
//! - [`diagnostics`]: transition-matrix and predictor oracles, ideal parameter
//!   values and run metrics.
//! - [`scenario`]: configuration, the built-in case study, the simulator and sweeps.
//! - [`verify`]: the runtime acceptance checks shared by tests and the CLI.

pub mod adaptive;
pub mod diagnostics;
mod error;
pub mod inner_loop;
pub mod numerics;
pub mod pilot_model;
pub mod scenario;
pub mod verify;

pub use error::{Error, Result};
pub use numerics::{Matrix, Vector};
