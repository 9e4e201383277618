//! Fairness gaps of the memorizing predictor.
//!
//! Closed forms are evaluated term by term as derived for the memorization
//! model, without algebraic simplification, so that a transcription error
//! shows up against [`gaps_by_enumeration`], which marginalizes the exact
//! joint table instead.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::model::{
    derive_phi, joint_table, BaseClassifier, Group, JointDistribution, LabelGroupJoint,
    MemorizedComposition, PredictionRates, Scenario,
};
use crate::tol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GapMethod {
    ClosedForm,
    Enumeration,
    Empirical,
}

/// Statistical parity gaps `Δs.p.(ŷ)`, equal opportunity gaps `Δeq.opp.(y)`
/// and the equalized odds matrix `Δeq.odds(y, ŷ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    pub parity: Vec<f64>,
    pub opportunity: Vec<f64>,
    pub odds: SquareMatrix,
    pub method: GapMethod,
}

impl GapReport {
    pub fn classes(&self) -> usize {
        self.parity.len()
    }

    fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.parity
            .iter()
            .chain(&self.opportunity)
            .chain(self.odds.as_slice())
            .copied()
    }

    /// Largest absolute entry over all three gap families.
    pub fn max_abs(&self) -> f64 {
        self.entries().map(f64::abs).fold(0.0, f64::max)
    }

    /// Largest absolute entrywise difference to `other`.
    pub fn max_abs_diff(&self, other: &GapReport) -> f64 {
        self.entries()
            .zip(other.entries())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn negated(&self) -> Self {
        Self {
            parity: self.parity.iter().map(|v| -v).collect(),
            opportunity: self.opportunity.iter().map(|v| -v).collect(),
            odds: self.odds.map(|v| -v),
            method: self.method,
        }
    }
}

/// Gaps of the base classifier on the unmemorized set:
/// `Δs.p.(ŷ | D=0) = φ^+ − φ^-` and `Δeq.odds(y, ŷ | D=0) = C^+ − C^-`.
/// Uses `rates` when given, otherwise the rates carried by `base`.
pub fn base_gaps(base: &BaseClassifier, rates: Option<&PredictionRates>) -> Result<GapReport> {
    let rates = rates.or(base.rates()).ok_or(Error::MissingRates)?;
    let plus = base.confusion(Group::Plus);
    let minus = base.confusion(Group::Minus);
    let odds = SquareMatrix::from_fn(base.classes(), |y, yh| plus[(y, yh)] - minus[(y, yh)]);
    Ok(GapReport {
        parity: rates.plus.iter().zip(&rates.minus).map(|(p, m)| p - m).collect(),
        opportunity: odds.diagonal(),
        odds,
        method: GapMethod::ClosedForm,
    })
}

fn group_share(joint: &LabelGroupJoint) -> Result<f64> {
    let share = joint.plus_share();
    if share <= tol::DEGENERATE_MASS || share >= 1.0 - tol::DEGENERATE_MASS {
        return Err(Error::DegenerateGroup(share));
    }
    Ok(share)
}

/// Statistical parity gap for fixed prediction rates `φ^±`.
pub fn parity_gap_with_rates(
    joint: &LabelGroupJoint,
    memo: &MemorizedComposition,
    rates: &PredictionRates,
) -> Result<Vec<f64>> {
    let p_plus = group_share(joint)?;
    let p_d = memo.mass();
    let q_plus = memo.plus_total();
    let scale = p_d / (p_plus * (1.0 - p_plus));
    let damping = 1.0 - p_d * (1.0 - q_plus) / (1.0 - p_plus);
    Ok((0..joint.classes())
        .map(|yh| {
            let correction = rates.plus[yh] * (p_plus - q_plus) - (memo.labels()[yh] * p_plus - memo.plus()[yh]);
            let base = rates.plus[yh] - rates.minus[yh];
            scale * correction + base * damping
        })
        .collect())
}

/// Statistical parity gap with rates derived from the confusion matrices.
pub fn parity_gap(scenario: &Scenario) -> Result<Vec<f64>> {
    let rates = derive_phi(scenario.joint(), scenario.memo(), scenario.base())?.derived;
    parity_gap_with_rates(scenario.joint(), scenario.memo(), &rates)
}

/// Per-label factors shared by the equal opportunity and equalized odds forms:
/// `(p_D / (p_y^+ (p_y − p_y^+)), q_y p_y^+ − p_y q_y^+, 1 − p_D (q_y − q_y^+)/(p_y − p_y^+))`.
fn label_factors(joint: &LabelGroupJoint, memo: &MemorizedComposition, y: usize) -> Result<(f64, f64, f64)> {
    let p_plus = joint.plus()[y];
    let p = joint.label_mass(y);
    if p_plus <= tol::DEGENERATE_MASS {
        return Err(Error::DegenerateClassGroup {
            label: y,
            group: Group::Plus,
        });
    }
    if p - p_plus <= tol::DEGENERATE_MASS {
        return Err(Error::DegenerateClassGroup {
            label: y,
            group: Group::Minus,
        });
    }
    let p_d = memo.mass();
    let (q, q_plus) = (memo.labels()[y], memo.plus()[y]);
    let scale = p_d / (p_plus * (p - p_plus));
    let correction = q * p_plus - p * q_plus;
    let damping = 1.0 - p_d * (q - q_plus) / (p - p_plus);
    Ok((scale, correction, damping))
}

/// Equal opportunity gaps `Δeq.opp.(y)`.
pub fn opportunity_gap_from_parts(
    joint: &LabelGroupJoint,
    memo: &MemorizedComposition,
    base: &BaseClassifier,
) -> Result<Vec<f64>> {
    let plus = base.confusion(Group::Plus);
    let minus = base.confusion(Group::Minus);
    (0..joint.classes())
        .map(|y| {
            let (scale, correction, damping) = label_factors(joint, memo, y)?;
            Ok(scale * (plus[(y, y)] - 1.0) * correction + (plus[(y, y)] - minus[(y, y)]) * damping)
        })
        .collect()
}

pub fn opportunity_gap(scenario: &Scenario) -> Result<Vec<f64>> {
    opportunity_gap_from_parts(scenario.joint(), scenario.memo(), scenario.base())
}

/// Equalized odds gaps `Δeq.odds(y, ŷ)`.
pub fn odds_gap_from_parts(
    joint: &LabelGroupJoint,
    memo: &MemorizedComposition,
    base: &BaseClassifier,
) -> Result<SquareMatrix> {
    let k = joint.classes();
    let plus = base.confusion(Group::Plus);
    let minus = base.confusion(Group::Minus);
    let mut out = SquareMatrix::zeros(k);
    for y in 0..k {
        let (scale, correction, damping) = label_factors(joint, memo, y)?;
        for yh in 0..k {
            let hit = if y == yh { 1.0 } else { 0.0 };
            out[(y, yh)] = scale * (plus[(y, yh)] - hit) * correction + (plus[(y, yh)] - minus[(y, yh)]) * damping;
        }
    }
    Ok(out)
}

pub fn odds_gap(scenario: &Scenario) -> Result<SquareMatrix> {
    odds_gap_from_parts(scenario.joint(), scenario.memo(), scenario.base())
}

/// All three closed forms, with prediction rates derived from the
/// confusion matrices.
pub fn closed_form_gaps(scenario: &Scenario) -> Result<GapReport> {
    Ok(GapReport {
        parity: parity_gap(scenario)?,
        opportunity: opportunity_gap(scenario)?,
        odds: odds_gap(scenario)?,
        method: GapMethod::ClosedForm,
    })
}

/// Exact gaps from the joint table; the oracle for every closed form.
///
/// Every conditioning event of the gap definitions must carry mass, including
/// the unmemorized slices `D = 0` that define the base-classifier gaps.
pub fn gaps_by_enumeration(scenario: &Scenario) -> Result<GapReport> {
    let table = joint_table(scenario)?;
    unmemorized_gaps_from_table(&table)?;
    gaps_from_table(&table)
}

/// Evaluates each gap definition by marginalizing and conditioning `table`.
pub fn gaps_from_table(table: &JointDistribution) -> Result<GapReport> {
    table_gaps(table, None)
}

/// Gaps conditioned on `D = 0`: `φ^+ − φ^-` and `C^+ − C^-` read off the table.
pub fn unmemorized_gaps_from_table(table: &JointDistribution) -> Result<GapReport> {
    table_gaps(table, Some(false))
}

fn table_gaps(table: &JointDistribution, memorized: Option<bool>) -> Result<GapReport> {
    let k = table.classes();
    let conditional = |group: Group, label: Option<usize>| -> Result<Vec<f64>> {
        let given = |g: Group, y: usize, d: bool| {
            g == group && label.is_none_or(|l| l == y) && memorized.is_none_or(|m| m == d)
        };
        let norm = table.slice_sum(|g, y, d, _| given(g, y, d));
        if norm <= tol::DEGENERATE_MASS {
            let slice = memorized.map_or(alloc::string::String::new(), |m| format!(", D={}", u8::from(m)));
            return Err(Error::DegenerateSlice(match label {
                Some(y) => format!("{group}, Y={y}{slice}"),
                None => format!("{group}{slice}"),
            }));
        }
        Ok((0..k)
            .map(|target| table.slice_sum(|g, y, d, yh| given(g, y, d) && yh == target) / norm)
            .collect())
    };

    let plus = conditional(Group::Plus, None)?;
    let minus = conditional(Group::Minus, None)?;
    let parity = plus.iter().zip(&minus).map(|(a, b)| a - b).collect();

    let mut odds = SquareMatrix::zeros(k);
    for y in 0..k {
        let plus = conditional(Group::Plus, Some(y))?;
        let minus = conditional(Group::Minus, Some(y))?;
        for yh in 0..k {
            odds[(y, yh)] = plus[yh] - minus[yh];
        }
    }
    Ok(GapReport {
        parity,
        opportunity: odds.diagonal(),
        odds,
        method: GapMethod::Enumeration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::{validate, Tier};
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn identical_groups_have_zero_base_gaps() {
        let c = matrix(&[&[0.8, 0.2], &[0.3, 0.7]]);
        let base = BaseClassifier::new(c.clone(), c)
            .unwrap()
            .with_rates(vec![0.4, 0.6], vec![0.4, 0.6])
            .unwrap();
        assert_eq!(base_gaps(&base, None).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn base_parity_and_opportunity_are_differences() {
        let base = odds_base().with_rates(vec![0.4, 0.6], vec![0.6, 0.4]).unwrap();
        let g = base_gaps(&base, None).unwrap();
        assert!((g.parity[0] + 0.2).abs() < 1e-15);
        assert!((g.parity[1] - 0.2).abs() < 1e-15);
        assert!((g.opportunity[0] + 0.1).abs() < 1e-15);
        assert!((g.opportunity[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn base_gaps_need_rates() {
        assert_eq!(base_gaps(&odds_base(), None), Err(Error::MissingRates));
    }

    #[test]
    fn symmetric_scenario_has_no_gaps() {
        let s = symmetric();
        let cf = closed_form_gaps(&s).unwrap();
        assert!(cf.max_abs() < 1e-15, "{cf:?}");
        assert!(gaps_by_enumeration(&s).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn parity_worked_example() {
        let s = parity_worked();
        let sp = parity_gap(&s).unwrap();
        assert!((sp[0] - 0.04).abs() < 1e-12);
        assert!((sp[1] + 0.04).abs() < 1e-12);
        let oracle = gaps_by_enumeration(&s).unwrap();
        assert!((oracle.parity[0] - 0.04).abs() < 1e-12);
    }

    #[test]
    fn opportunity_worked_example() {
        let s = opportunity_worked();
        let eo = opportunity_gap(&s).unwrap();
        assert!((eo[0] - 1.0 / 30.0).abs() < 1e-12);
        let odds = odds_gap(&s).unwrap();
        assert!((odds[(0, 0)] - 1.0 / 30.0).abs() < 1e-12);
        assert!((odds[(0, 1)] + 1.0 / 30.0).abs() < 1e-12);
        // hand check: P(Ŷ=0|A=1,Y=0) = 0.853.., P(Ŷ=0|A=0,Y=0) = 0.82
        let t = joint_table(&s).unwrap();
        let plus = t.slice_sum(|g, y, _, yh| g == Group::Plus && y == 0 && yh == 0) / 0.3;
        let minus = t.slice_sum(|g, y, _, yh| g == Group::Minus && y == 0 && yh == 0) / 0.2;
        assert!((plus - 0.853_333_333_333_333_3).abs() < 1e-12);
        assert!((minus - 0.82).abs() < 1e-12);
        let oracle = gaps_by_enumeration(&s).unwrap();
        assert!(oracle.max_abs_diff(&closed_form_gaps(&s).unwrap()) < 1e-12);
    }

    #[test]
    fn proportional_within_class_memorization_keeps_fair_base_fair() {
        // q_y^+/q_y = p_y^+/p_y, C^+ = C^-
        let c = matrix(&[&[0.8, 0.2], &[0.3, 0.7]]);
        let s = Scenario::new(
            joint(&[0.3, 0.2], &[0.2, 0.3]),
            memo(0.3, &[0.7, 0.3], &[0.7 * 0.6, 0.3 * 0.4]),
            BaseClassifier::new(c.clone(), c).unwrap(),
        )
        .unwrap();
        assert!(opportunity_gap(&s).unwrap().iter().all(|g| g.abs() < 1e-15));
        assert!(odds_gap(&s).unwrap().as_slice().iter().all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn vanishing_memorization_recovers_base_gaps() {
        for s in [opportunity_worked(), parity_worked(), odds_worked()] {
            let s = s.with_memo(s.memo().with_mass(1e-12)).unwrap();
            let rates = derive_phi(s.joint(), s.memo(), s.base()).unwrap().derived;
            let base = base_gaps(s.base(), Some(&rates)).unwrap();
            assert!(closed_form_gaps(&s).unwrap().max_abs_diff(&base) < 1e-10);
        }
    }

    #[test]
    fn fully_memorized_class_group_is_degenerate_for_the_oracle() {
        let s = opportunity_worked()
            .with_memo(memo(0.5, &[0.6, 0.4], &[0.6, 0.1]))
            .unwrap();
        // p_D q_0^+ = 0.3 = p_0^+
        assert!(validate(&s, Tier::Consistent).passed());
        assert!(matches!(gaps_by_enumeration(&s), Err(Error::DegenerateSlice(_))));
    }

    #[test]
    fn unmemorized_table_gaps_match_base_gaps() {
        for s in [opportunity_worked(), parity_worked(), odds_worked()] {
            let rates = derive_phi(s.joint(), s.memo(), s.base()).unwrap().derived;
            let base = base_gaps(s.base(), Some(&rates)).unwrap();
            let table = unmemorized_gaps_from_table(&joint_table(&s).unwrap()).unwrap();
            assert!(base.max_abs_diff(&table) < 1e-12);
        }
    }

    #[test]
    fn degenerate_group_share() {
        let j = joint(&[0.5, 0.5], &[0.0, 0.0]);
        let m = memo(0.1, &[0.5, 0.5], &[0.5, 0.5]);
        let rates = PredictionRates::new(vec![0.5, 0.5], vec![0.5, 0.5]);
        assert!(matches!(parity_gap_with_rates(&j, &m, &rates), Err(Error::DegenerateGroup(_))));
        let c = SquareMatrix::identity(2);
        let base = BaseClassifier::new(c.clone(), c).unwrap();
        assert!(matches!(
            opportunity_gap_from_parts(&j, &m, &base),
            Err(Error::DegenerateClassGroup {
                label: 0,
                group: Group::Minus
            })
        ));
    }

    fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.05f64..1.0, k).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    prop_compose! {
        fn consistent_scenario()(k in 2usize..5)(
            cells in simplex(2 * k),
            rows in prop::collection::vec(simplex(k), 2 * k),
            take in prop::collection::vec(0.0f64..1.0, 2 * k),
            mass in 0.01f64..0.9,
        ) -> Scenario {
            let k = cells.len() / 2;
            let joint = LabelGroupJoint::new(cells[..k].to_vec(), cells[k..].to_vec()).unwrap();
            // memorize a random fraction of every cell, then read off (p_D, q, q+)
            let memorized: Vec<f64> = cells.iter().zip(&take).map(|(c, t)| c * t * 0.95).collect();
            let total: f64 = memorized.iter().sum();
            let scale = mass / total;
            let memorized: Vec<f64> = memorized.iter().map(|m| (m * scale).min(1.0)).collect();
            let mass = memorized.iter().sum::<f64>().min(0.95);
            let memo = MemorizedComposition::new(
                mass,
                (0..k).map(|y| (memorized[y] + memorized[k + y]) / mass).collect(),
                (0..k).map(|y| memorized[y] / mass).collect(),
            ).unwrap();
            let base = BaseClassifier::new(
                SquareMatrix::from_rows(&rows[..k]).unwrap(),
                SquareMatrix::from_rows(&rows[k..]).unwrap(),
            ).unwrap();
            Scenario::new(joint, memo, base).unwrap()
        }
    }

    proptest! {
        #[test]
        fn closed_form_matches_oracle(s in consistent_scenario()) {
            prop_assume!(validate(&s, Tier::Consistent).passed());
            let cf = closed_form_gaps(&s).unwrap();
            let oracle = gaps_by_enumeration(&s).unwrap();
            prop_assert!(cf.max_abs_diff(&oracle) < 1e-10);
        }

        #[test]
        fn rows_sum_to_zero_and_diagonal_matches(s in consistent_scenario()) {
            prop_assume!(validate(&s, Tier::Consistent).passed());
            let cf = closed_form_gaps(&s).unwrap();
            prop_assert!(cf.parity.iter().sum::<f64>().abs() < 1e-10);
            for (y, row) in cf.odds.rows().enumerate() {
                prop_assert!(row.iter().sum::<f64>().abs() < 1e-10);
                prop_assert_eq!(row[y], cf.opportunity[y]);
            }
            prop_assert!(cf.max_abs() <= 1.0 + 1e-12);
        }

        #[test]
        fn exchanging_groups_negates_gaps(s in consistent_scenario()) {
            prop_assume!(validate(&s, Tier::Consistent).passed());
            let cf = closed_form_gaps(&s).unwrap();
            let swapped = closed_form_gaps(&s.swap_groups()).unwrap();
            prop_assert!(cf.max_abs_diff(&swapped.negated()) < 1e-10);
        }
    }
}
