//! Solver library for leading-order optimal trading under fixed and
//! proportional transaction costs.
//!
//! The library computes, at a fixed wealth level, the no-trade region,
//! trade targets and ergodic cost of the associated impulse-control
//! corrector problem by policy iteration on a penalized Markov-chain
//! discretization, and validates the results against analytic oracles.
//!
//! Modules mirror the pipeline:
//!
//! - [`market`]: market/preference parameters and the closed-form
//!   frictionless (Merton) solution,
//! - [`geometry`]: solvency region, trade map and intervention
//!   feasibility of the full model,
//! - [`corrector`]: assembly of one corrector-equation instance at
//!   fixed wealth,
//! - [`solver`]: grid, generator discretization and the policy-iteration
//!   loop,
//! - [`analytic`]: smooth-fit and quadratic-boundary oracles,
//! - [`longterm`]: stationary and simulated occupation measures,
//! - [`regions`]: trade-region classification and boundary extraction.

pub mod analytic;
pub mod corrector;
pub mod error;
pub mod geometry;
pub mod longterm;
pub mod market;
pub mod regions;
pub mod solver;

pub use error::{Error, Result};
