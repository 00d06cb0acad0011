//! Evolutionarily stable timing of life-history events.
//!
//! A population chooses arrival dates on `[0, ∞)`. Early arrivals enjoy a
//! competitive advantage (strength `a`), but a single disturbance strikes at a
//! random date with density `f` and kills each individual already present with
//! probability `1 - p`. This crate computes the unique evolutionarily stable
//! arrival strategy, evaluates the expected fitness of arbitrary strategies,
//! certifies equilibria, and quantifies what happens when the disturbance
//! changes under a population that has not adapted.
//!
//! The crate is `no_std` (it needs `alloc`). IO, file formats and the
//! command-line interface live in the companion `soft-ess` crate.
//!
//! ```
//! use soft_ess_core::{CompetitionParams, Disturbance, Tolerances, solver};
//!
//! let params = CompetitionParams::new(5.0, 0.2).unwrap();
//! let d = Disturbance::uniform(0.5, 0.9).unwrap();
//! let ess = solver::solve_ess(&params, &d, 2001, &Tolerances::default()).unwrap();
//! assert!((ess.gamma - 0.10142).abs() < 1e-3);
//! assert!((ess.lambda - 0.120448).abs() < 1e-3);
//! ```

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod climate;
pub mod disturbance;
mod error;
pub mod fitness;
pub mod numerics;
pub mod oracle;
pub mod solver;
pub mod strategy;

pub use disturbance::{Disturbance, DisturbanceKind, SupportGap};
pub use error::{Error, Result};
pub use fitness::FitnessProfile;
pub use numerics::Tolerances;
pub use solver::{CompetitionParams, EssSolution, PhaseThreshold, Regime};
pub use strategy::{MixedStrategy, SupportSummary};
