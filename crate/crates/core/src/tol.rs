//! Fixed numerical tolerances shared by every module.

/// Absolute tolerance of simplex, stochasticity and mass-consistency checks.
pub const SIMPLEX: f64 = 1e-12;

/// Conditioning events with less mass than this are treated as empty.
pub const DEGENERATE_MASS: f64 = 1e-15;

/// Constraint violation allowed for a feasibility witness or certificate.
pub const FEASIBILITY: f64 = 1e-9;

/// Smallest pivot the simplex engine accepts.
pub const PIVOT: f64 = 1e-13;

/// Default tolerance on the equalized-odds ratio condition.
pub const RATIO: f64 = 1e-9;

/// Guard band applied to the strict inequalities of the bound verdicts.
pub const GUARD_BAND: f64 = 1e-12;
