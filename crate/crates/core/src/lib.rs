//! Group fairness of a classifier that memorizes part of its input space.
//!
//! The model: a population is split by a binary sensitive attribute `A` and a
//! label `Y ∈ [K]`. A memorized subpopulation (`D = 1`, total mass `p_D`) is
//! always predicted correctly; everywhere else a base classifier with
//! group-conditional confusion matrices predicts. This crate
//!
//! * computes the statistical parity, equal opportunity and equalized odds
//!   gaps of the combined predictor in closed form ([`gaps`]),
//! * checks every closed form against an exact enumeration of the joint
//!   distribution of `(A, Y, D, Ŷ)` ([`model::joint_table`],
//!   [`gaps::gaps_by_enumeration`]),
//! * solves for memorized compositions that zero each gap, together with the
//!   closed-form bounds on `p_D` ([`zero_bias`]) on top of a small phase-1
//!   simplex engine that returns witnesses or Farkas certificates
//!   ([`linfeas`]),
//! * draws reproducible Monte Carlo samples from the model ([`simulate`]).
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. Labels are 0-based throughout.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod gaps;
pub mod linfeas;
mod matrix;
pub mod model;
pub mod simulate;
pub mod tol;
pub mod zero_bias;

pub use error::{Error, Result};
pub use gaps::{GapMethod, GapReport};
pub use linfeas::{Feasibility, LinearSystem};
pub use matrix::SquareMatrix;
pub use model::{
    BaseClassifier, Group, GroupPair, JointDistribution, LabelGroupJoint, MemorizedComposition,
    PredictionRates, Scenario, Tier, ValidationReport,
};
