//! Zero statistical parity gap.
//!
//! With the prediction rates `φ^±` held fixed, `Δs.p. = 0` is linear in the
//! composition. Writing `Q = Σ_y q_y^+`, the solutions are exactly
//!
//! ```text
//!     p^+ q_y − q_y^+ + c_y Q = p^+ c_y + b_y   for every y,
//!     Σ_y q_y = 1,   0 ≤ q_y^+ ≤ q_y,
//! ```
//!
//! with `c = (1−p^+)φ^+ + p^+φ^-` and `b = p^+(1−p^+)((1−p_D)/p_D)(φ^+−φ^-)`.
//! Variables are laid out as `[q_0..q_{K−1}, q_0^+..q_{K−1}^+]`.

use alloc::vec;
use alloc::vec::Vec;

use super::{check_mass, polish, SolveMode, Witness, ZeroBias};
use crate::error::{Error, Result};
use crate::gaps::parity_gap_with_rates;
use crate::linfeas::{solve_feasibility, Feasibility, LinearSystem};
use crate::model::{derive_phi, rates_from_conditionals, BaseClassifier, Group, GroupPair, LabelGroupJoint, PredictionRates};
use crate::tol;

/// How `b` and `c` are built.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ParityConstants {
    /// From the group share `p^+`; these make the system equivalent to a
    /// zero gap.
    #[default]
    Proof,
    /// From the per-label masses `p_y^+` in place of `p^+`. Kept for
    /// comparison only: the resulting system does not characterize a zero
    /// gap in general.
    Statement,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParityParams {
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// Group share `p^+`.
    pub p_plus: f64,
    pub p_d: f64,
}

impl ParityParams {
    pub fn new(joint: &LabelGroupJoint, rates: &PredictionRates, p_d: f64, constants: ParityConstants) -> Result<Self> {
        let k = joint.classes();
        for (what, v) in [("phi_plus", &rates.plus), ("phi_minus", &rates.minus)] {
            if v.len() != k {
                return Err(Error::Shape {
                    what,
                    expected: k,
                    found: v.len(),
                });
            }
        }
        let p_plus = joint.plus_share();
        if p_plus <= tol::DEGENERATE_MASS || p_plus >= 1.0 - tol::DEGENERATE_MASS {
            return Err(Error::DegenerateGroup(p_plus));
        }
        check_mass(p_d)?;
        let share = |y: usize| match constants {
            ParityConstants::Proof => p_plus,
            ParityConstants::Statement => joint.plus()[y],
        };
        let odds = (1.0 - p_d) / p_d;
        let b = (0..k)
            .map(|y| share(y) * (1.0 - share(y)) * odds * (rates.plus[y] - rates.minus[y]))
            .collect();
        let c = (0..k)
            .map(|y| (1.0 - share(y)) * rates.plus[y] + share(y) * rates.minus[y])
            .collect();
        Ok(Self { b, c, p_plus, p_d })
    }

    pub fn classes(&self) -> usize {
        self.c.len()
    }

    /// The linear system; `consistency` adds `p_D q_y^± ≤ p_y^±`.
    pub fn system(&self, consistency: Option<&LabelGroupJoint>) -> Result<LinearSystem> {
        let k = self.classes();
        let mut s = LinearSystem::new(2 * k);
        for y in 0..k {
            let mut row = vec![0.0; 2 * k];
            row[y] = self.p_plus;
            for (yp, r) in row[k..].iter_mut().enumerate() {
                *r = self.c[y] - if yp == y { 1.0 } else { 0.0 };
            }
            s.add_equality(row, self.p_plus * self.c[y] + self.b[y])?;
        }
        let mut sum = vec![0.0; 2 * k];
        sum[..k].fill(1.0);
        s.add_equality(sum, 1.0)?;
        for y in 0..k {
            let mut lower = vec![0.0; 2 * k];
            lower[k + y] = -1.0;
            s.add_inequality(lower, 0.0)?;
            let mut upper = vec![0.0; 2 * k];
            upper[k + y] = 1.0;
            upper[y] = -1.0;
            s.add_inequality(upper, 0.0)?;
        }
        if let Some(joint) = consistency {
            for y in 0..k {
                let mut plus = vec![0.0; 2 * k];
                plus[k + y] = self.p_d;
                s.add_inequality(plus, joint.plus()[y])?;
                let mut minus = vec![0.0; 2 * k];
                minus[y] = self.p_d;
                minus[k + y] = -self.p_d;
                s.add_inequality(minus, joint.minus()[y])?;
            }
        }
        Ok(s)
    }
}

/// Prediction rates held fixed by the parity solver: the supplied `φ^±`, or
/// else the rates the confusion matrices give on the population label
/// distribution of each group (`P(Y | A)`).
pub fn fixed_rates(joint: &LabelGroupJoint, base: &BaseClassifier) -> Result<PredictionRates> {
    if let Some(rates) = base.rates() {
        return Ok(rates.clone());
    }
    let one = |group: Group| -> Result<Vec<f64>> {
        let cond = joint
            .label_conditionals(group)
            .ok_or_else(|| Error::DegenerateSlice(alloc::format!("{group}")))?;
        Ok(rates_from_conditionals(&cond, base.confusion(group)))
    };
    Ok(GroupPair::new(one(Group::Plus)?, one(Group::Minus)?))
}

pub fn build_parity_system(
    joint: &LabelGroupJoint,
    rates: &PredictionRates,
    p_d: f64,
    mode: SolveMode,
) -> Result<LinearSystem> {
    let params = ParityParams::new(joint, rates, p_d, ParityConstants::Proof)?;
    params.system(consistency(joint, mode))
}

fn consistency(joint: &LabelGroupJoint, mode: SolveMode) -> Option<&LabelGroupJoint> {
    match mode {
        SolveMode::Paper => None,
        SolveMode::Consistent => Some(joint),
    }
}

/// Solves for a zero-parity composition with explicit rates and constants.
pub fn solve_parity_zero_with_rates(
    joint: &LabelGroupJoint,
    rates: &PredictionRates,
    p_d: f64,
    mode: SolveMode,
    constants: ParityConstants,
) -> Result<ZeroBias> {
    let params = ParityParams::new(joint, rates, p_d, constants)?;
    let system = params.system(consistency(joint, mode))?;
    match solve_feasibility(&system)? {
        Feasibility::Infeasible { certificate } => Ok(ZeroBias::Infeasible { certificate }),
        Feasibility::Feasible { witness } => {
            let k = joint.classes();
            let composition = polish(p_d, witness[..k].to_vec(), witness[k..].to_vec())?;
            let gap = parity_gap_with_rates(joint, &composition, rates)?;
            Ok(ZeroBias::Feasible(Witness {
                composition,
                variables: witness,
                residual: max_abs(&gap),
                rederived_residual: None,
            }))
        }
    }
}

/// Solves for a zero-parity composition of mass `p_d`, holding the rates of
/// [`fixed_rates`] constant. The witness also reports the gap obtained when
/// the rates are recomputed from the confusion matrices at the witness.
pub fn solve_parity_zero(joint: &LabelGroupJoint, base: &BaseClassifier, p_d: f64, mode: SolveMode) -> Result<ZeroBias> {
    let rates = fixed_rates(joint, base)?;
    let mut out = solve_parity_zero_with_rates(joint, &rates, p_d, mode, ParityConstants::Proof)?;
    if let ZeroBias::Feasible(w) = &mut out {
        w.rederived_residual = derive_phi(joint, &w.composition, base)
            .and_then(|d| parity_gap_with_rates(joint, &w.composition, &d.derived))
            .ok()
            .map(|g| max_abs(&g));
    }
    Ok(out)
}

/// Cone-inclusion form of parity feasibility.
///
/// With `s_i = −(1−p^+)e_i + c + e_{K+1}`, `s_{K+i} = p^+e_i + e_{K+1}` and
/// `d = (p^+c + b, 1)`, the system is feasible iff every `x ∈ R^{K+1}` with
/// `s_iᵀx ≤ 0` for all `i` also has `dᵀx ≤ 0`. Decided by searching for a
/// violating `x`, normalized to `dᵀx ≥ 1`.
pub fn farkas_parity_check(joint: &LabelGroupJoint, rates: &PredictionRates, p_d: f64) -> Result<bool> {
    let params = ParityParams::new(joint, rates, p_d, ParityConstants::Proof)?;
    let k = params.classes();
    let p = params.p_plus;
    let mut s = LinearSystem::new(k + 1);
    for i in 0..k {
        let mut row = params.c.clone();
        row[i] -= 1.0 - p;
        row.push(1.0);
        s.add_inequality(row, 0.0)?;
    }
    for i in 0..k {
        let mut row = vec![0.0; k + 1];
        row[i] = p;
        row[k] = 1.0;
        s.add_inequality(row, 0.0)?;
    }
    let mut d: Vec<f64> = (0..k).map(|i| -(p * params.c[i] + params.b[i])).collect();
    d.push(-1.0);
    s.add_inequality(d, -1.0)?;
    Ok(!solve_feasibility(&s)?.is_feasible())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaps::gaps_by_enumeration;
    use crate::model::fixtures::*;
    use crate::model::{validate_parts, Scenario, Tier};
    use crate::zero_bias::bounds::parity_bounds;
    use proptest::prelude::*;

    fn uniform_joint() -> LabelGroupJoint {
        joint(&[0.25, 0.25], &[0.25, 0.25])
    }

    fn worked_rates() -> PredictionRates {
        GroupPair::new(vec![0.4, 0.6], vec![0.6, 0.4])
    }

    /// Base classifier whose rows all equal the rates, so the rates do not
    /// depend on the composition.
    fn flat_base(rates: &PredictionRates) -> BaseClassifier {
        let k = rates.plus.len();
        let m = |r: &[f64]| crate::SquareMatrix::from_fn(k, |_, c| r[c]);
        BaseClassifier::new(m(&rates.plus), m(&rates.minus)).unwrap()
    }

    #[test]
    fn constants_sum_to_one_and_zero() {
        let p = ParityParams::new(&uniform_joint(), &worked_rates(), 0.3, ParityConstants::Proof).unwrap();
        assert!((p.c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.b.iter().sum::<f64>().abs() < 1e-12);
        assert_eq!(p.system(None).unwrap().equalities().len(), 3);
        assert_eq!(p.system(None).unwrap().inequalities().len(), 4);
    }

    #[test]
    fn worked_example_is_feasible_and_zeroes_the_gap() {
        let j = uniform_joint();
        let rates = worked_rates();
        let base = flat_base(&rates);
        for mode in [SolveMode::Paper, SolveMode::Consistent] {
            let r = solve_parity_zero(&j, &base, 0.3, mode).unwrap();
            let w = r.witness().unwrap();
            assert!(w.residual < 1e-8);
            assert!(validate_parts(&j, Some(&w.composition), &base, Tier::Basic).passed());
            if mode == SolveMode::Consistent {
                let s = Scenario::new(j.clone(), w.composition.clone(), base.clone()).unwrap();
                let oracle = gaps_by_enumeration(&s).unwrap();
                assert!(oracle.parity.iter().all(|g| g.abs() < 1e-8));
                assert!(w.rederived_residual.unwrap() < 1e-8);
            }
        }
        assert!(farkas_parity_check(&j, &rates, 0.3).unwrap());
    }

    #[test]
    fn tiny_mass_agrees_with_cone_check() {
        let j = uniform_joint();
        let rates = worked_rates();
        let primal = solve_parity_zero_with_rates(&j, &rates, 0.01, SolveMode::Paper, ParityConstants::Proof).unwrap();
        assert_eq!(primal.is_feasible(), farkas_parity_check(&j, &rates, 0.01).unwrap());
        assert!(!primal.is_feasible());
    }

    #[test]
    fn sufficient_threshold_is_feasible() {
        let j = uniform_joint();
        let rates = worked_rates();
        let bounds = parity_bounds(&j, &rates).unwrap();
        let r = solve_parity_zero_with_rates(&j, &rates, bounds.sufficient(), SolveMode::Paper, ParityConstants::Proof)
            .unwrap();
        assert!(r.is_feasible());
    }

    #[test]
    fn unbiased_base_accepts_proportional_memorization() {
        let j = joint(&[0.2, 0.1, 0.15], &[0.25, 0.2, 0.1]);
        let rates = GroupPair::new(vec![0.3, 0.3, 0.4], vec![0.3, 0.3, 0.4]);
        let p = ParityParams::new(&j, &rates, 0.4, ParityConstants::Proof).unwrap();
        assert!(p.b.iter().all(|b| *b == 0.0));
        // q_y = p_y, q_y^+ = p^+ p_y + (Q − p^+) c_y with Q = p^+
        let mut x: Vec<f64> = (0..3).map(|y| j.label_mass(y)).collect();
        x.extend((0..3).map(|y| j.plus_share() * j.label_mass(y)));
        let s = p.system(None).unwrap();
        assert!(crate::linfeas::check_witness(&s, &x).unwrap() < 1e-12);
        assert!(farkas_parity_check(&j, &rates, 0.4).unwrap());
        let r = solve_parity_zero_with_rates(&j, &rates, 0.4, SolveMode::Consistent, ParityConstants::Proof).unwrap();
        assert!(r.witness().unwrap().residual < 1e-8);
    }

    #[test]
    fn three_class_silent_bounds_left_to_solver() {
        let j = joint(&[0.2, 0.1, 0.1], &[0.2, 0.2, 0.2]);
        let rates = GroupPair::new(vec![0.5, 0.3, 0.2], vec![0.2, 0.3, 0.5]);
        let bounds = parity_bounds(&j, &rates).unwrap();
        assert!(bounds.necessary() < 0.0);
        for p_d in [0.01, 0.05, 0.2, 0.5, 0.9] {
            let primal = solve_parity_zero_with_rates(&j, &rates, p_d, SolveMode::Paper, ParityConstants::Proof).unwrap();
            assert_eq!(primal.is_feasible(), farkas_parity_check(&j, &rates, p_d).unwrap(), "p_D = {p_d}");
        }
    }

    #[test]
    fn statement_constants_do_not_zero_the_gap() {
        let j = joint(&[0.3, 0.2], &[0.2, 0.3]);
        let rates = GroupPair::new(vec![0.6, 0.4], vec![0.45, 0.55]);
        let r = solve_parity_zero_with_rates(&j, &rates, 0.5, SolveMode::Paper, ParityConstants::Statement).unwrap();
        assert!(r.witness().unwrap().residual > 1e-3);
    }

    #[test]
    fn invalid_inputs() {
        let rates = worked_rates();
        assert!(matches!(
            ParityParams::new(&joint(&[0.5, 0.5], &[0.0, 0.0]), &rates, 0.3, ParityConstants::Proof),
            Err(Error::DegenerateGroup(_))
        ));
        assert!(ParityParams::new(&uniform_joint(), &rates, 1.0, ParityConstants::Proof).is_err());
        let short = GroupPair::new(vec![1.0], vec![1.0]);
        assert!(ParityParams::new(&uniform_joint(), &short, 0.3, ParityConstants::Proof).is_err());
    }

    #[test]
    fn rates_default_to_population_conditionals() {
        let s = parity_worked();
        let rates = fixed_rates(s.joint(), s.base()).unwrap();
        assert_eq!(rates.plus, vec![0.5, 0.5]);
        let base = odds_base();
        let r = fixed_rates(s.joint(), &base).unwrap();
        // P(Y | A=1) = (0.6, 0.4)
        assert!((r.plus[0] - (0.6 * 0.8 + 0.4 * 0.3)).abs() < 1e-15);
    }

    fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.05f64..1.0, k).prop_map(|v| {
            let t: f64 = v.iter().sum();
            v.into_iter().map(|x| x / t).collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn primal_and_cone_check_agree(
            (p, phi_p, phi_m) in (2usize..5).prop_flat_map(|k| (simplex(2 * k), simplex(k), simplex(k))),
            p_d in 0.01f64..0.95,
        ) {
            let k = phi_p.len();
            let j = LabelGroupJoint::new(p[..k].to_vec(), p[k..].to_vec()).unwrap();
            let rates = GroupPair::new(phi_p, phi_m);
            let primal = solve_parity_zero_with_rates(&j, &rates, p_d, SolveMode::Paper, ParityConstants::Proof).unwrap();
            prop_assert_eq!(primal.is_feasible(), farkas_parity_check(&j, &rates, p_d).unwrap());
            if let Some(w) = primal.witness() {
                prop_assert!(w.residual < 1e-8);
            }
        }
    }
}
