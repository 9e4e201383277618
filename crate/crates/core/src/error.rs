use alloc::string::String;

use crate::model::Group;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what}: expected length {expected}, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{0} contains a non-finite value")]
    NonFinite(&'static str),
    #[error("at least two classes are required, found {0}")]
    TooFewClasses(usize),
    #[error("invariant {invariant} violated: {detail}")]
    Invalid {
        invariant: &'static str,
        detail: String,
    },
    #[error("conditioning event {0} has zero mass")]
    DegenerateSlice(String),
    #[error("memorized mass exceeds the population mass of label {label} in group {group} by {excess:e}")]
    InconsistentMasses {
        group: Group,
        label: usize,
        excess: f64,
    },
    #[error("group share p+ = {0} must lie strictly inside (0, 1)")]
    DegenerateGroup(f64),
    #[error("label {label} has no mass in group {group}")]
    DegenerateClassGroup { label: usize, group: Group },
    #[error("prediction rates are neither supplied nor derivable")]
    MissingRates,
    #[error("simplex engine broke down: {0}")]
    NumericalBreakdown(&'static str),
    #[error("prediction rate of label {label} in group {group} is zero")]
    ZeroRateDivision { label: usize, group: Group },
    #[error("label {label} is classified perfectly in group {group}")]
    PerfectClassDegenerate { label: usize, group: Group },
    #[error("misprediction ratio of label {label} depends on the predicted label (deviation {deviation:e})")]
    RatioConditionFailed { label: usize, deviation: f64 },
    #[error("closed-form denominator vanishes for label {label}")]
    DenominatorVanishes { label: usize },
    #[error("closed-form solution is not a probability: {quantity} = {value}")]
    SolutionNotProbability { quantity: String, value: f64 },
    #[error("multipliers rejected: {0}")]
    InvalidMultipliers(String),
}

impl Error {
    /// True for errors caused by a degenerate (rather than malformed) input.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::DegenerateSlice(_)
                | Error::DegenerateGroup(_)
                | Error::DegenerateClassGroup { .. }
                | Error::ZeroRateDivision { .. }
                | Error::PerfectClassDegenerate { .. }
                | Error::DenominatorVanishes { .. }
                | Error::NumericalBreakdown(_)
                | Error::InconsistentMasses { .. }
        )
    }
}
