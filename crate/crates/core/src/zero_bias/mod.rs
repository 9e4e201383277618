//! Memorized compositions that remove a fairness gap, and bounds on how much
//! mass has to be memorized for that.
//!
//! * [`parity`]: zero statistical parity gap for fixed prediction rates, as a
//!   linear feasibility problem in `(q, q^+)`, plus the equivalent cone check.
//! * [`opportunity`]: zero equal opportunity gap via the `λ` parametrization.
//! * [`odds`]: the closed-form (and unique) zero equalized odds composition.
//! * [`bounds`]: threshold bounds on `p_D` and their verdicts.

pub mod bounds;
pub mod odds;
pub mod opportunity;
pub mod parity;

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::MemorizedComposition;

pub use bounds::{opportunity_bounds, parity_bounds, BoundsReport, Metric, Orientation, Verdict};
pub use odds::{solve_odds_zero, OddsSolution, DEFAULT_RATIO_TOL};
pub use opportunity::{
    build_opportunity_system, map_multipliers_to_composition, solve_opportunity_zero, OpportunityParams,
};
pub use parity::{
    build_parity_system, farkas_parity_check, fixed_rates, solve_parity_zero, solve_parity_zero_with_rates,
    ParityConstants, ParityParams,
};

/// Which constraints the solvers impose.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SolveMode {
    /// Only the characterization itself.
    #[default]
    Paper,
    /// Additionally `p_D q_y^± ≤ p_y^±`: the memorized set fits inside the
    /// population.
    Consistent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub composition: MemorizedComposition,
    /// Raw solver variables (`(q, q^+)` for parity, `λ` for opportunity).
    pub variables: Vec<f64>,
    /// Max absolute gap of the witness under the solver's assumptions.
    pub residual: f64,
    /// Max absolute parity gap when the prediction rates are recomputed from
    /// the confusion matrices at the witness composition.
    pub rederived_residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ZeroBias {
    Feasible(Witness),
    /// Farkas multipliers for the assembled linear system.
    Infeasible { certificate: Vec<f64> },
}

impl ZeroBias {
    pub fn is_feasible(&self) -> bool {
        matches!(self, ZeroBias::Feasible(_))
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            ZeroBias::Feasible(w) => Some(w),
            ZeroBias::Infeasible { .. } => None,
        }
    }
}

pub(crate) fn check_mass(p_d: f64) -> Result<()> {
    if !(p_d > 0.0 && p_d < 1.0) {
        return Err(Error::Invalid {
            invariant: "memorization.mass_range",
            detail: format!("p_D = {p_d} is not inside (0, 1)"),
        });
    }
    Ok(())
}

// Solver output satisfies constraints to ~1e-9; validation wants 1e-12.
const SNAP: f64 = 1e-12;

/// Clamps rounding noise so that `q ≥ 0`, `0 ≤ q^+ ≤ q` and `Σq = 1` hold to
/// validation precision.
pub(crate) fn polish(mass: f64, mut q: Vec<f64>, mut q_plus: Vec<f64>) -> Result<MemorizedComposition> {
    for v in q.iter_mut().chain(q_plus.iter_mut()) {
        if v.abs() <= SNAP || *v < 0.0 {
            *v = 0.0;
        }
    }
    for (qp, q) in q_plus.iter_mut().zip(&q) {
        if (*qp - q).abs() <= SNAP || *qp > *q {
            *qp = *q;
        }
    }
    let total: f64 = q.iter().sum();
    if total <= 0.0 {
        return Err(Error::NumericalBreakdown("memorized composition has no mass"));
    }
    q.iter_mut().chain(q_plus.iter_mut()).for_each(|v| *v /= total);
    MemorizedComposition::new(mass, q, q_plus)
}
