//! Zero equalized odds gap in closed form.
//!
//! With `x_y = p_D q_y^+/p_y^+` the memorized fraction of cell `(y, A=1)`
//! and `r_y x_y` that of `(y, A=0)`, the diagonal gap of label `y` vanishes
//! for
//!
//! ```text
//!     x_y = (C^-_yy − C^+_yy) / ((1−C^+_yy) − r_y (1−C^-_yy)),
//!     p_D = Σ_y (p_y^+ + r_y p_y^-) x_y,
//! ```
//!
//! where `r_y = ((K−1) − (1−C^+_yy)) / ((K−1) − (1−C^-_yy))`. This `r_y` is
//! the common value of `(1−C^+_{y,ŷ})/(1−C^-_{y,ŷ})` over `ŷ ≠ y` whenever
//! that ratio does not depend on `ŷ`, which is checked first.
//!
//! The off-diagonal gaps vanish iff `C^+_{y,ŷ}/C^-_{y,ŷ}` does not depend on
//! `ŷ ≠ y`. For two classes both conditions hold trivially; for more classes
//! they differ, so the solution reports its own residual and the deviation
//! from proportional off-diagonal rows.

use alloc::format;
use alloc::vec::Vec;

use super::polish;
use crate::error::{Error, Result};
use crate::gaps::odds_gap_from_parts;
use crate::model::{BaseClassifier, Group, LabelGroupJoint, MemorizedComposition};
use crate::tol;

pub const DEFAULT_RATIO_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct OddsSolution {
    /// `r_y`.
    pub ratios: Vec<f64>,
    /// Max over labels of the spread of `(1−C^+_{y,ŷ})/(1−C^-_{y,ŷ})`, `ŷ ≠ y`.
    pub ratio_deviation: f64,
    /// Max over labels and `ŷ ≠ y` of `|C^+_{y,ŷ} − ρ_y C^-_{y,ŷ}|` with
    /// `ρ_y = (1−C^+_yy)/(1−C^-_yy)`; zero iff the off-diagonal gaps can vanish.
    pub proportionality_deviation: f64,
    /// The required `p_D`.
    pub mass: f64,
    pub composition: MemorizedComposition,
    /// Max absolute equalized odds gap at the solution.
    pub residual: f64,
}

fn ratio_spread(base: &BaseClassifier) -> Result<(usize, f64)> {
    let plus = base.confusion(Group::Plus);
    let minus = base.confusion(Group::Minus);
    let k = plus.dim();
    let mut worst = (0, 0.0);
    for y in 0..k {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for yh in (0..k).filter(|&yh| yh != y) {
            let den = 1.0 - minus[(y, yh)];
            if den <= tol::DEGENERATE_MASS {
                return Err(Error::DenominatorVanishes { label: y });
            }
            let r = (1.0 - plus[(y, yh)]) / den;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if hi - lo > worst.1 {
            worst = (y, hi - lo);
        }
    }
    Ok(worst)
}

fn proportionality(base: &BaseClassifier) -> f64 {
    let plus = base.confusion(Group::Plus);
    let minus = base.confusion(Group::Minus);
    let k = plus.dim();
    let mut dev = 0.0f64;
    for y in 0..k {
        let rho = (1.0 - plus[(y, y)]) / (1.0 - minus[(y, y)]);
        for yh in (0..k).filter(|&yh| yh != y) {
            dev = dev.max((plus[(y, yh)] - rho * minus[(y, yh)]).abs());
        }
    }
    dev
}

fn not_probability(quantity: &str, value: f64) -> Error {
    Error::SolutionNotProbability {
        quantity: quantity.into(),
        value,
    }
}

pub fn solve_odds_zero(joint: &LabelGroupJoint, base: &BaseClassifier, ratio_tol: f64) -> Result<OddsSolution> {
    let k = joint.classes();
    if base.classes() != k {
        return Err(Error::Shape {
            what: "confusion matrix",
            expected: k,
            found: base.classes(),
        });
    }
    let (label, deviation) = ratio_spread(base)?;
    if deviation > ratio_tol {
        return Err(Error::RatioConditionFailed { label, deviation });
    }
    let plus = base.confusion(Group::Plus);
    let minus = base.confusion(Group::Minus);
    let off = (k - 1) as f64;
    let mut ratios = Vec::with_capacity(k);
    let mut fractions = Vec::with_capacity(k);
    for y in 0..k {
        let (cp, cm) = (plus[(y, y)], minus[(y, y)]);
        let r = (off - (1.0 - cp)) / (off - (1.0 - cm));
        let den = (1.0 - cp) - r * (1.0 - cm);
        if den.abs() <= tol::DEGENERATE_MASS {
            return Err(Error::DenominatorVanishes { label: y });
        }
        let x = (cm - cp) / den;
        for (name, v) in [("p_D·q_plus/p_plus", x), ("p_D·q_minus/p_minus", r * x)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(not_probability(&format!("{name}[{y}]"), v));
            }
        }
        ratios.push(r);
        fractions.push(x);
    }
    let mass: f64 = (0..k)
        .map(|y| (joint.plus()[y] + ratios[y] * joint.minus()[y]) * fractions[y])
        .sum();
    if !(mass > tol::DEGENERATE_MASS && mass < 1.0) {
        return Err(not_probability("p_D", mass));
    }
    let q_plus = (0..k).map(|y| joint.plus()[y] * fractions[y] / mass).collect();
    let q = (0..k)
        .map(|y| (joint.plus()[y] + ratios[y] * joint.minus()[y]) * fractions[y] / mass)
        .collect();
    let composition = polish(mass, q, q_plus)?;
    let gap = odds_gap_from_parts(joint, &composition, base)?;
    Ok(OddsSolution {
        ratios,
        ratio_deviation: deviation,
        proportionality_deviation: proportionality(base),
        mass,
        residual: gap.as_slice().iter().fold(0.0, |m, g| m.max(g.abs())),
        composition,
    })
}
