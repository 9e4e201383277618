//! Zero equal opportunity gap.
//!
//! Compositions with `Δeq.opp. = 0` are parametrized by `λ ∈ R^K`:
//!
//! ```text
//!     q_y   = p_y/p_D − α_y λ_y,
//!     q_y^+ = p_y^+/p_D − (p_y^+/(1−C^+_yy)) λ_y,
//!     Σ_y α_y λ_y = (1−p_D)/p_D,
//!     λ_y ≤ (1−C^±_yy)/p_D,
//! ```
//!
//! with `α_y = p_y^+/(1−C^+_yy) + p_y^-/(1−C^-_yy)`. The upper bounds are
//! `q_y^± ≥ 0`; `λ_y ≥ 0` is the same as `p_D q_y^± ≤ p_y^±`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{check_mass, polish, SolveMode, Witness, ZeroBias};
use crate::error::{Error, Result};
use crate::gaps::opportunity_gap_from_parts;
use crate::linfeas::{solve_feasibility, Feasibility, LinearSystem, FEASIBILITY_TOL};
use crate::model::{BaseClassifier, Group, LabelGroupJoint, MemorizedComposition};

#[derive(Clone, Debug, PartialEq)]
pub struct OpportunityParams {
    pub alpha: Vec<f64>,
    /// `min(1−C^+_yy, 1−C^-_yy)/p_D`.
    pub lambda_upper: Vec<f64>,
    /// `(1−p_D)/p_D`.
    pub budget: f64,
    pub p_d: f64,
    /// `1 − C^+_yy`.
    pub miss_plus: Vec<f64>,
    /// `1 − C^-_yy`.
    pub miss_minus: Vec<f64>,
}

/// `1 − C_yy` for both groups, rejecting perfectly classified labels.
pub(crate) fn miss_rates(base: &BaseClassifier) -> Result<(Vec<f64>, Vec<f64>)> {
    let one = |group: Group| -> Result<Vec<f64>> {
        let c = base.confusion(group);
        (0..c.dim())
            .map(|y| {
                let miss = 1.0 - c[(y, y)];
                if miss <= 0.0 {
                    Err(Error::PerfectClassDegenerate { label: y, group })
                } else {
                    Ok(miss)
                }
            })
            .collect()
    };
    Ok((one(Group::Plus)?, one(Group::Minus)?))
}

impl OpportunityParams {
    pub fn new(joint: &LabelGroupJoint, base: &BaseClassifier, p_d: f64) -> Result<Self> {
        let k = joint.classes();
        if base.classes() != k {
            return Err(Error::Shape {
                what: "confusion matrix",
                expected: k,
                found: base.classes(),
            });
        }
        check_mass(p_d)?;
        let (miss_plus, miss_minus) = miss_rates(base)?;
        let alpha = (0..k)
            .map(|y| joint.plus()[y] / miss_plus[y] + joint.minus()[y] / miss_minus[y])
            .collect();
        let lambda_upper = (0..k).map(|y| miss_plus[y].min(miss_minus[y]) / p_d).collect();
        Ok(Self {
            alpha,
            lambda_upper,
            budget: (1.0 - p_d) / p_d,
            p_d,
            miss_plus,
            miss_minus,
        })
    }

    pub fn classes(&self) -> usize {
        self.alpha.len()
    }

    pub fn system(&self, mode: SolveMode) -> Result<LinearSystem> {
        let k = self.classes();
        let mut s = LinearSystem::new(k);
        s.add_equality(self.alpha.clone(), self.budget)?;
        for y in 0..k {
            for miss in [self.miss_plus[y], self.miss_minus[y]] {
                let mut row = vec![0.0; k];
                row[y] = 1.0;
                s.add_inequality(row, miss / self.p_d)?;
            }
        }
        if mode == SolveMode::Consistent {
            for y in 0..k {
                s.set_lower_bound(y, 0.0)?;
            }
        }
        Ok(s)
    }
}

/// The `λ` system: one equality, `2K` upper-bound rows, and in consistent
/// mode the lower bounds `λ ≥ 0`.
pub fn build_opportunity_system(
    joint: &LabelGroupJoint,
    base: &BaseClassifier,
    p_d: f64,
    mode: SolveMode,
) -> Result<LinearSystem> {
    OpportunityParams::new(joint, base, p_d)?.system(mode)
}

/// Maps a feasible `λ` to its composition. Rejects `λ` that misses the
/// budget or exceeds an upper bound by more than the feasibility tolerance.
pub fn map_multipliers_to_composition(
    joint: &LabelGroupJoint,
    base: &BaseClassifier,
    p_d: f64,
    lambda: &[f64],
) -> Result<MemorizedComposition> {
    let params = OpportunityParams::new(joint, base, p_d)?;
    let k = params.classes();
    if lambda.len() != k {
        return Err(Error::Shape {
            what: "lambda",
            expected: k,
            found: lambda.len(),
        });
    }
    let spent: f64 = params.alpha.iter().zip(lambda).map(|(a, l)| a * l).sum();
    // the budget row is compared after scaling by p_D, i.e. as Σq = 1
    if ((spent - params.budget) * p_d).abs() > FEASIBILITY_TOL {
        return Err(Error::InvalidMultipliers(format!(
            "Σ α_y λ_y = {spent}, expected {}",
            params.budget
        )));
    }
    if let Some(y) = (0..k).find(|&y| (lambda[y] - params.lambda_upper[y]) * p_d > FEASIBILITY_TOL) {
        return Err(Error::InvalidMultipliers(format!(
            "λ[{y}] = {} exceeds its upper bound {}",
            lambda[y], params.lambda_upper[y]
        )));
    }
    let q = (0..k)
        .map(|y| joint.label_mass(y) / p_d - params.alpha[y] * lambda[y])
        .collect();
    let q_plus = (0..k)
        .map(|y| joint.plus()[y] / p_d - joint.plus()[y] / params.miss_plus[y] * lambda[y])
        .collect();
    polish(p_d, q, q_plus)
}

pub fn solve_opportunity_zero(
    joint: &LabelGroupJoint,
    base: &BaseClassifier,
    p_d: f64,
    mode: SolveMode,
) -> Result<ZeroBias> {
    let system = build_opportunity_system(joint, base, p_d, mode)?;
    match solve_feasibility(&system)? {
        Feasibility::Infeasible { certificate } => Ok(ZeroBias::Infeasible { certificate }),
        Feasibility::Feasible { witness } => {
            let composition = map_multipliers_to_composition(joint, base, p_d, &witness)?;
            let gap = opportunity_gap_from_parts(joint, &composition, base)?;
            Ok(ZeroBias::Feasible(Witness {
                composition,
                variables: witness,
                residual: gap.iter().fold(0.0, |m, g| m.max(g.abs())),
                rederived_residual: None,
            }))
        }
    }
}
