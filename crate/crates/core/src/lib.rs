//! Numerical core for the Epstein-Zin consumption-investment problem under
//! closed (not necessarily convex) portfolio and consumption constraints.
//!
//! The optimal strategy is read off a quadratic BSDE whose driver contains a
//! squared distance to the constraint set. This crate holds everything that
//! is pure computation: preferences, market coefficient models, constraint
//! sets, path simulation, the regression Monte-Carlo BSDE solver with its ODE
//! oracle, strategy extraction and utility evaluation, and the analytic bound
//! and parameter-condition checks. IO, configuration and the CLI live in the
//! companion `ezbsde` crate.
//!
//! The crate is `no_std` and only needs `alloc`. The `parallel` feature pulls
//! in `rayon` (and therefore `std`) to spread per-path work across threads;
//! results are bitwise identical either way.

#![no_std]

extern crate alloc;

#[cfg(feature = "parallel")]
extern crate std;

mod error;
mod exec;

pub mod analytics;
pub mod constraint;
pub mod generator;
pub mod linalg;
pub mod market;
pub mod ode;
pub mod paths;
pub mod prefs;
pub mod regression;
pub mod solver;
pub mod strategy;

pub use error::{Error, Result};

pub use constraint::ConstraintSet;
pub use generator::GeneratorContext;
pub use market::{MarketBounds, MarketModel, ModelKind};
pub use paths::{PathSet, TimeGrid};
pub use prefs::Preferences;
pub use solver::{BsdeSolution, SolverConfig};
pub use strategy::StrategyResult;
