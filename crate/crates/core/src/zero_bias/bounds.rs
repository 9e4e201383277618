//! Bounds on the memorized mass `p_D` needed to remove a gap.
//!
//! Each metric has a stated orientation and the one obtained by exchanging
//! the groups.
//!
//! Statistical parity (rates held fixed), stated orientation:
//!
//! ```text
//!     sufficient  (1−p^+) max_y (φ^-_y − φ^+_y)/φ^-_y
//!     necessary   (1−p^+) min_y (φ^-_y − φ^+_y)/φ^-_y
//! ```
//!
//! Both rate vectors sum to one, so the minimum is never positive and the
//! necessary bound never rules anything out.
//!
//! Equal opportunity, with `a_y = p_y^-(C^+_yy − C^-_yy)/(1−C^-_yy)` and
//! `b_y = p_y^+(C^-_yy − C^+_yy)/(1−C^+_yy)`:
//!
//! ```text
//!     summed      Σ_y a_y            (exchanged: Σ_y b_y)
//!     coarse      p^- max_y a_y/p_y^- (exchanged: p^+ max_y b_y/p_y^+)
//!     necessary   p^- min_y a_y/p_y^- (exchanged: p^+ min_y b_y/p_y^+)
//!     exact       Σ_y max(a_y, b_y)
//! ```
//!
//! The system is feasible iff `p_D ≥ exact`. The summed pair is only
//! sufficient when `C^+_yy − C^-_yy` has the same sign for every label;
//! otherwise `max(Σa, Σb) < exact` and the claimed verdict can be wrong. The
//! coarse and necessary forms are always valid.

use alloc::vec::Vec;

use super::opportunity::miss_rates;
use crate::error::{Error, Result};
use crate::model::{BaseClassifier, Group, LabelGroupJoint, PredictionRates};
use crate::tol;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Parity,
    Opportunity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    GuaranteedFeasible,
    GuaranteedInfeasible,
    Indeterminate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Orientation {
    pub sufficient: f64,
    /// Equal opportunity only: the max form implied by the summed bound.
    pub coarse_sufficient: Option<f64>,
    pub necessary: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundsReport {
    pub metric: Metric,
    pub stated: Orientation,
    pub exchanged: Orientation,
    /// The feasibility threshold itself, when known in closed form.
    pub exact: Option<f64>,
}

impl BoundsReport {
    /// Smallest `p_D` the bounds claim to be enough. For parity either
    /// orientation suffices; for equal opportunity both summed bounds must
    /// hold.
    pub fn sufficient(&self) -> f64 {
        match self.metric {
            Metric::Parity => self.stated.sufficient.min(self.exchanged.sufficient),
            Metric::Opportunity => self.stated.sufficient.max(self.exchanged.sufficient),
        }
    }

    /// Any `p_D` below this is claimed infeasible.
    pub fn necessary(&self) -> f64 {
        self.stated.necessary.max(self.exchanged.necessary)
    }

    /// Verdict of the closed-form bounds; boundary cases are resolved with a
    /// guard band in favor of `Indeterminate` for the strict inequality.
    pub fn verdict(&self, p_d: f64) -> Verdict {
        if p_d < self.necessary() - tol::GUARD_BAND {
            Verdict::GuaranteedInfeasible
        } else if p_d >= self.sufficient() - tol::GUARD_BAND {
            Verdict::GuaranteedFeasible
        } else {
            Verdict::Indeterminate
        }
    }

    /// Verdict of the exact threshold, when there is one.
    pub fn exact_verdict(&self, p_d: f64) -> Option<Verdict> {
        self.exact.map(|t| {
            if p_d >= t - tol::GUARD_BAND {
                Verdict::GuaranteedFeasible
            } else {
                Verdict::GuaranteedInfeasible
            }
        })
    }
}

fn extremes(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

pub fn parity_bounds(joint: &LabelGroupJoint, rates: &PredictionRates) -> Result<BoundsReport> {
    let p_plus = joint.plus_share();
    if p_plus <= tol::DEGENERATE_MASS || p_plus >= 1.0 - tol::DEGENERATE_MASS {
        return Err(Error::DegenerateGroup(p_plus));
    }
    let k = joint.classes();
    let relative = |group: Group| -> Result<Vec<f64>> {
        let (own, other) = match group {
            Group::Minus => (&rates.minus, &rates.plus),
            Group::Plus => (&rates.plus, &rates.minus),
        };
        (0..k)
            .map(|y| {
                if own[y] <= 0.0 {
                    return Err(Error::ZeroRateDivision { label: y, group });
                }
                Ok((own[y] - other[y]) / own[y])
            })
            .collect()
    };
    let orient = |group: Group, scale: f64| -> Result<Orientation> {
        let (lo, hi) = extremes(relative(group)?.into_iter());
        Ok(Orientation {
            sufficient: scale * hi,
            coarse_sufficient: None,
            necessary: scale * lo,
        })
    };
    Ok(BoundsReport {
        metric: Metric::Parity,
        stated: orient(Group::Minus, 1.0 - p_plus)?,
        exchanged: orient(Group::Plus, p_plus)?,
        exact: None,
    })
}

pub fn opportunity_bounds(joint: &LabelGroupJoint, base: &BaseClassifier) -> Result<BoundsReport> {
    let k = joint.classes();
    let (miss_plus, miss_minus) = miss_rates(base)?;
    let plus = base.confusion(Group::Plus);
    let minus = base.confusion(Group::Minus);
    let delta: Vec<f64> = (0..k).map(|y| plus[(y, y)] - minus[(y, y)]).collect();
    let rel_a: Vec<f64> = (0..k).map(|y| delta[y] / miss_minus[y]).collect();
    let rel_b: Vec<f64> = (0..k).map(|y| -delta[y] / miss_plus[y]).collect();
    let a: Vec<f64> = (0..k).map(|y| joint.minus()[y] * rel_a[y]).collect();
    let b: Vec<f64> = (0..k).map(|y| joint.plus()[y] * rel_b[y]).collect();
    let orient = |terms: &[f64], rel: &[f64], share: f64| {
        let (lo, hi) = extremes(rel.iter().copied());
        Orientation {
            sufficient: terms.iter().sum(),
            coarse_sufficient: Some(share * hi),
            necessary: share * lo,
        }
    };
    Ok(BoundsReport {
        metric: Metric::Opportunity,
        stated: orient(&a, &rel_a, joint.group_total(Group::Minus)),
        exchanged: orient(&b, &rel_b, joint.group_total(Group::Plus)),
        exact: Some(a.iter().zip(&b).map(|(a, b)| a.max(*b)).sum()),
    })
}
