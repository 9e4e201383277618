//! Distributional inputs and the exact joint distribution of `(A, Y, D, Ŷ)`.
//!
//! Notation follows the usual memorization setting: `p_y^±` is the joint mass
//! of label `y` and group `A = 1` (`+`) or `A = 0` (`−`); `q_y` and `q_y^+`
//! describe the memorized set conditionally on `D = 1`; `C^±` are the base
//! classifier's confusion matrices on the unmemorized part and `φ^±` its
//! prediction rates there.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::tol;

/// Value of the sensitive attribute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    /// `A = 0`.
    Minus,
    /// `A = 1`, the sensitive attribute is present.
    Plus,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::Minus, Group::Plus];

    /// Index into the `a` axis of a [`JointDistribution`].
    pub fn index(self) -> usize {
        match self {
            Group::Minus => 0,
            Group::Plus => 1,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Group::Minus => Group::Plus,
            Group::Plus => Group::Minus,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Minus => "A=0",
            Group::Plus => "A=1",
        })
    }
}

/// One value per group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupPair<T> {
    pub plus: T,
    pub minus: T,
}

impl<T> GroupPair<T> {
    pub fn new(plus: T, minus: T) -> Self {
        Self { plus, minus }
    }

    pub fn get(&self, group: Group) -> &T {
        match group {
            Group::Plus => &self.plus,
            Group::Minus => &self.minus,
        }
    }

    pub fn map<U>(self, mut f: impl FnMut(T) -> U) -> GroupPair<U> {
        GroupPair {
            plus: f(self.plus),
            minus: f(self.minus),
        }
    }

    pub fn swapped(self) -> Self {
        Self {
            plus: self.minus,
            minus: self.plus,
        }
    }
}

/// Prediction rates `φ^±` of the base classifier on the unmemorized set.
pub type PredictionRates = GroupPair<Vec<f64>>;

fn check_vector(what: &'static str, v: &[f64], classes: usize) -> Result<()> {
    if v.len() != classes {
        return Err(Error::Shape {
            what,
            expected: classes,
            found: v.len(),
        });
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

fn check_classes(classes: usize) -> Result<()> {
    if classes < 2 {
        return Err(Error::TooFewClasses(classes));
    }
    Ok(())
}

/// Joint distribution of label and group: `p_y^+ = P(Y=y, A=1)` and
/// `p_y^- = P(Y=y, A=0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelGroupJoint {
    mass: GroupPair<Vec<f64>>,
}

impl LabelGroupJoint {
    pub fn new(plus: Vec<f64>, minus: Vec<f64>) -> Result<Self> {
        check_classes(plus.len())?;
        check_vector("p_plus", &plus, plus.len())?;
        check_vector("p_minus", &minus, plus.len())?;
        Ok(Self {
            mass: GroupPair::new(plus, minus),
        })
    }

    pub fn classes(&self) -> usize {
        self.mass.plus.len()
    }

    pub fn plus(&self) -> &[f64] {
        &self.mass.plus
    }

    pub fn minus(&self) -> &[f64] {
        &self.mass.minus
    }

    pub fn group(&self, group: Group) -> &[f64] {
        self.mass.get(group)
    }

    /// `p^±`.
    pub fn group_total(&self, group: Group) -> f64 {
        self.group(group).iter().sum()
    }

    /// `p^+ = P(A = 1)`.
    pub fn plus_share(&self) -> f64 {
        self.group_total(Group::Plus)
    }

    /// `p_y = p_y^+ + p_y^-`.
    pub fn label_mass(&self, label: usize) -> f64 {
        self.mass.plus[label] + self.mass.minus[label]
    }

    /// `P(Y = y | A = group)`; `None` when the group carries no mass.
    pub fn label_conditionals(&self, group: Group) -> Option<Vec<f64>> {
        let total = self.group_total(group);
        (total > tol::DEGENERATE_MASS).then(|| self.group(group).iter().map(|p| p / total).collect())
    }

    pub fn swap_groups(&self) -> Self {
        Self {
            mass: self.mass.clone().swapped(),
        }
    }

    /// Rescales both vectors jointly so that the total mass is one.
    pub fn normalized(&self) -> Self {
        let total = self.group_total(Group::Plus) + self.group_total(Group::Minus);
        Self {
            mass: self.mass.clone().map(|v| v.into_iter().map(|p| p / total).collect()),
        }
    }
}

/// Memorized mass `p_D` and composition `q_y = P(Y=y | D=1)`,
/// `q_y^+ = P(Y=y, A=1 | D=1)` of the memorized set.
#[derive(Clone, Debug, PartialEq)]
pub struct MemorizedComposition {
    mass: f64,
    labels: Vec<f64>,
    plus: Vec<f64>,
}

impl MemorizedComposition {
    pub fn new(mass: f64, labels: Vec<f64>, plus: Vec<f64>) -> Result<Self> {
        check_classes(labels.len())?;
        if !mass.is_finite() {
            return Err(Error::NonFinite("p_D"));
        }
        check_vector("q", &labels, labels.len())?;
        check_vector("q_plus", &plus, labels.len())?;
        Ok(Self { mass, labels, plus })
    }

    pub fn classes(&self) -> usize {
        self.labels.len()
    }

    /// `p_D`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `q_y`.
    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// `q_y^+`.
    pub fn plus(&self) -> &[f64] {
        &self.plus
    }

    /// `q_y^- = q_y - q_y^+`.
    pub fn minus(&self) -> Vec<f64> {
        self.labels.iter().zip(&self.plus).map(|(q, qp)| q - qp).collect()
    }

    /// `q_y^+` or `q_y^-`.
    pub fn group_share(&self, group: Group, label: usize) -> f64 {
        match group {
            Group::Plus => self.plus[label],
            Group::Minus => self.labels[label] - self.plus[label],
        }
    }

    /// `q^+ = Σ_y q_y^+`.
    pub fn plus_total(&self) -> f64 {
        self.plus.iter().sum()
    }

    pub fn with_mass(&self, mass: f64) -> Self {
        Self {
            mass,
            ..self.clone()
        }
    }

    pub fn swap_groups(&self) -> Self {
        Self {
            mass: self.mass,
            labels: self.labels.clone(),
            plus: self.minus(),
        }
    }

    /// Rescales `q` to sum to one, carrying `q^+` along with the same factor.
    pub fn normalized(&self) -> Self {
        let total: f64 = self.labels.iter().sum();
        Self {
            mass: self.mass,
            labels: self.labels.iter().map(|q| q / total).collect(),
            plus: self.plus.iter().map(|q| q / total).collect(),
        }
    }
}

/// Base classifier on the unmemorized set: confusion matrices
/// `C^±_{y,ŷ} = P(Ŷ=ŷ | D=0, Y=y, A=±)` and optionally supplied rates `φ^±`.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseClassifier {
    confusion: GroupPair<SquareMatrix>,
    rates: Option<PredictionRates>,
}

impl BaseClassifier {
    pub fn new(plus: SquareMatrix, minus: SquareMatrix) -> Result<Self> {
        check_classes(plus.dim())?;
        if minus.dim() != plus.dim() {
            return Err(Error::Shape {
                what: "C_minus",
                expected: plus.dim(),
                found: minus.dim(),
            });
        }
        if !plus.is_finite() {
            return Err(Error::NonFinite("C_plus"));
        }
        if !minus.is_finite() {
            return Err(Error::NonFinite("C_minus"));
        }
        Ok(Self {
            confusion: GroupPair::new(plus, minus),
            rates: None,
        })
    }

    pub fn with_rates(mut self, plus: Vec<f64>, minus: Vec<f64>) -> Result<Self> {
        let k = self.classes();
        check_vector("phi_plus", &plus, k)?;
        check_vector("phi_minus", &minus, k)?;
        self.rates = Some(GroupPair::new(plus, minus));
        Ok(self)
    }

    pub fn without_rates(mut self) -> Self {
        self.rates = None;
        self
    }

    pub fn classes(&self) -> usize {
        self.confusion.plus.dim()
    }

    pub fn confusion(&self, group: Group) -> &SquareMatrix {
        self.confusion.get(group)
    }

    pub fn rates(&self) -> Option<&PredictionRates> {
        self.rates.as_ref()
    }

    pub fn swap_groups(&self) -> Self {
        Self {
            confusion: self.confusion.clone().swapped(),
            rates: self.rates.clone().map(GroupPair::swapped),
        }
    }

    /// Rescales every confusion row and supplied rate vector to sum to one.
    pub fn normalized(&self) -> Self {
        let norm_matrix = |m: &SquareMatrix| {
            let rows: Vec<Vec<f64>> = m
                .rows()
                .map(|r| {
                    let s: f64 = r.iter().sum();
                    r.iter().map(|v| v / s).collect()
                })
                .collect();
            SquareMatrix::from_rows(&rows).expect("square input stays square")
        };
        let norm_vec = |v: Vec<f64>| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect::<Vec<_>>()
        };
        Self {
            confusion: GroupPair::new(
                norm_matrix(&self.confusion.plus),
                norm_matrix(&self.confusion.minus),
            ),
            rates: self.rates.clone().map(|r| r.map(norm_vec)),
        }
    }
}

/// A complete input: population, memorized composition and base classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    joint: LabelGroupJoint,
    memo: MemorizedComposition,
    base: BaseClassifier,
}

impl Scenario {
    pub fn new(joint: LabelGroupJoint, memo: MemorizedComposition, base: BaseClassifier) -> Result<Self> {
        let k = joint.classes();
        for (what, found) in [("memorization", memo.classes()), ("base classifier", base.classes())] {
            if found != k {
                return Err(Error::Shape {
                    what,
                    expected: k,
                    found,
                });
            }
        }
        Ok(Self { joint, memo, base })
    }

    pub fn classes(&self) -> usize {
        self.joint.classes()
    }

    pub fn joint(&self) -> &LabelGroupJoint {
        &self.joint
    }

    pub fn memo(&self) -> &MemorizedComposition {
        &self.memo
    }

    pub fn base(&self) -> &BaseClassifier {
        &self.base
    }

    pub fn with_memo(&self, memo: MemorizedComposition) -> Result<Self> {
        Self::new(self.joint.clone(), memo, self.base.clone())
    }

    /// Exchanges the roles of `A = 1` and `A = 0`.
    pub fn swap_groups(&self) -> Self {
        Self {
            joint: self.joint.swap_groups(),
            memo: self.memo.swap_groups(),
            base: self.base.swap_groups(),
        }
    }
}

/// Validation strictness. Each tier includes the checks of the lower ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tier {
    /// Simplex and stochasticity checks.
    Basic,
    /// Adds `p_y^± > 0` for every label.
    Strict,
    /// Adds `p_D q_y^± ≤ p_y^±`.
    Consistent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub tier: Tier,
    pub invariant: &'static str,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub requested: Tier,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// True when no check at or below `tier` failed.
    pub fn passes(&self, tier: Tier) -> bool {
        self.violations.iter().all(|v| v.tier > tier)
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }

    /// First violation as an [`Error::Invalid`], or `Ok` if validation passed.
    pub fn into_result(self) -> Result<()> {
        match self.violations.into_iter().next() {
            None => Ok(()),
            Some(v) => Err(Error::Invalid {
                invariant: v.invariant,
                detail: v.detail,
            }),
        }
    }
}

struct Checker {
    requested: Tier,
    violations: Vec<Violation>,
}

impl Checker {
    fn fail(&mut self, tier: Tier, invariant: &'static str, detail: String) {
        self.violations.push(Violation {
            tier,
            invariant,
            detail,
        });
    }

    fn wants(&self, tier: Tier) -> bool {
        tier <= self.requested
    }

    fn simplex(&mut self, invariant: &'static str, v: &[f64]) {
        if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| **x < -tol::SIMPLEX) {
            self.fail(Tier::Basic, invariant, format!("entry {i} is negative ({x})"));
            return;
        }
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > tol::SIMPLEX {
            self.fail(Tier::Basic, invariant, format!("entries sum to {sum}, not 1"));
        }
    }

    fn stochastic(&mut self, invariant: &'static str, m: &SquareMatrix) {
        for (r, row) in m.rows().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|x| *x < -tol::SIMPLEX) || (sum - 1.0).abs() > tol::SIMPLEX {
                self.fail(
                    Tier::Basic,
                    invariant,
                    format!("row {r} is not a probability vector (sum {sum})"),
                );
                return;
            }
        }
    }

    fn population(&mut self, joint: &LabelGroupJoint) {
        if let Some(x) = joint.plus().iter().chain(joint.minus()).find(|x| **x < -tol::SIMPLEX) {
            self.fail(Tier::Basic, "population.nonnegative", format!("negative mass {x}"));
        }
        let total = joint.group_total(Group::Plus) + joint.group_total(Group::Minus);
        if (total - 1.0).abs() > tol::SIMPLEX {
            self.fail(
                Tier::Basic,
                "population.total_mass",
                format!("p_plus and p_minus sum to {total}, not 1"),
            );
        }
        let share = joint.plus_share();
        if !(share > 0.0 && share < 1.0) {
            self.fail(
                Tier::Basic,
                "population.group_share",
                format!("p+ = {share} is not inside (0, 1)"),
            );
        }
        if self.wants(Tier::Strict) {
            for group in Group::BOTH {
                if let Some(y) = joint.group(group).iter().position(|p| *p <= 0.0) {
                    self.fail(
                        Tier::Strict,
                        "population.positive_cells",
                        format!("label {y} has no mass in group {group}"),
                    );
                }
            }
        }
    }

    fn memorization(&mut self, memo: &MemorizedComposition) {
        let mass = memo.mass();
        if !(mass > 0.0 && mass < 1.0) {
            self.fail(
                Tier::Basic,
                "memorization.mass_range",
                format!("p_D = {mass} is not inside (0, 1)"),
            );
        }
        if let Some((y, q)) = memo.labels().iter().enumerate().find(|(_, q)| **q < -tol::SIMPLEX) {
            self.fail(Tier::Basic, "memorization.q_nonnegative", format!("q[{y}] = {q}"));
        }
        let sum: f64 = memo.labels().iter().sum();
        if (sum - 1.0).abs() > tol::SIMPLEX {
            self.fail(Tier::Basic, "memorization.q_sum", format!("q sums to {sum}, not 1"));
        }
        for (y, (q, qp)) in memo.labels().iter().zip(memo.plus()).enumerate() {
            if *qp < -tol::SIMPLEX || *qp > q + tol::SIMPLEX {
                self.fail(
                    Tier::Basic,
                    "memorization.q_plus_range",
                    format!("q_plus[{y}] = {qp} is outside [0, q[{y}] = {q}]"),
                );
                break;
            }
        }
    }

    fn classifier(&mut self, base: &BaseClassifier) {
        self.stochastic("classifier.plus_rows", base.confusion(Group::Plus));
        self.stochastic("classifier.minus_rows", base.confusion(Group::Minus));
        if let Some(rates) = base.rates() {
            self.simplex("classifier.plus_rates", &rates.plus);
            self.simplex("classifier.minus_rates", &rates.minus);
        }
    }

    fn consistency(&mut self, joint: &LabelGroupJoint, memo: &MemorizedComposition) {
        for (group, invariant) in [(Group::Plus, "consistency.plus_mass"), (Group::Minus, "consistency.minus_mass")] {
            for (y, p) in joint.group(group).iter().enumerate() {
                let memorized = memo.mass() * memo.group_share(group, y);
                if memorized > p + tol::SIMPLEX {
                    self.fail(
                        Tier::Consistent,
                        invariant,
                        format!("p_D·q[{y}] in {group} is {memorized}, above the population mass {p}"),
                    );
                }
            }
        }
    }
}

/// Checks every invariant up to `tier`. Failures are reported, never thrown.
pub fn validate(scenario: &Scenario, tier: Tier) -> ValidationReport {
    validate_parts(scenario.joint(), Some(scenario.memo()), scenario.base(), tier)
}

/// Like [`validate`] for inputs that may lack a memorized composition (solver
/// commands); the consistency tier is skipped when `memo` is `None`.
pub fn validate_parts(
    joint: &LabelGroupJoint,
    memo: Option<&MemorizedComposition>,
    base: &BaseClassifier,
    tier: Tier,
) -> ValidationReport {
    let mut c = Checker {
        requested: tier,
        violations: Vec::new(),
    };
    c.population(joint);
    if let Some(memo) = memo {
        c.memorization(memo);
    }
    c.classifier(base);
    if let (true, Some(memo)) = (c.wants(Tier::Consistent), memo) {
        c.consistency(joint, memo);
    }
    ValidationReport {
        requested: tier,
        violations: c.violations,
    }
}

/// Unmemorized mass `p_y^a − p_D q_y^a` per label, clamped at zero.
fn unmemorized_mass(joint: &LabelGroupJoint, memo: &MemorizedComposition, group: Group) -> Result<Vec<f64>> {
    joint
        .group(group)
        .iter()
        .enumerate()
        .map(|(y, p)| {
            let rest = p - memo.mass() * memo.group_share(group, y);
            if rest < -tol::SIMPLEX {
                return Err(Error::InconsistentMasses {
                    group,
                    label: y,
                    excess: -rest,
                });
            }
            Ok(rest.max(0.0))
        })
        .collect()
}

/// `P(Y = y | D = 0, A = a)` for both groups.
pub fn unmemorized_conditionals(
    joint: &LabelGroupJoint,
    memo: &MemorizedComposition,
) -> Result<GroupPair<Vec<f64>>> {
    let one = |group| -> Result<Vec<f64>> {
        let rest = unmemorized_mass(joint, memo, group)?;
        let total: f64 = rest.iter().sum();
        if total <= tol::DEGENERATE_MASS {
            return Err(Error::DegenerateSlice(format!("D=0, {group}")));
        }
        Ok(rest.into_iter().map(|m| m / total).collect())
    };
    Ok(GroupPair::new(one(Group::Plus)?, one(Group::Minus)?))
}

/// `φ_ŷ = Σ_y w_y C_{y,ŷ}`.
pub(crate) fn rates_from_conditionals(weights: &[f64], confusion: &SquareMatrix) -> Vec<f64> {
    let k = confusion.dim();
    let mut out = alloc::vec![0.0; k];
    for (w, row) in weights.iter().zip(confusion.rows()) {
        for (o, c) in out.iter_mut().zip(row) {
            *o += w * c;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateDerivation {
    /// Supplied rates when present, otherwise the derived ones.
    pub rates: PredictionRates,
    /// Rates implied by the confusion matrices at this composition.
    pub derived: PredictionRates,
    /// Max absolute difference between supplied and derived rates.
    pub discrepancy: Option<f64>,
}

/// Prediction rates implied by the confusion matrices and the unmemorized
/// label distribution of each group.
pub fn derive_phi(
    joint: &LabelGroupJoint,
    memo: &MemorizedComposition,
    base: &BaseClassifier,
) -> Result<RateDerivation> {
    let cond = unmemorized_conditionals(joint, memo)?;
    let derived = GroupPair::new(
        rates_from_conditionals(&cond.plus, base.confusion(Group::Plus)),
        rates_from_conditionals(&cond.minus, base.confusion(Group::Minus)),
    );
    Ok(match base.rates() {
        Some(supplied) => {
            let discrepancy = supplied
                .plus
                .iter()
                .zip(&derived.plus)
                .chain(supplied.minus.iter().zip(&derived.minus))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            RateDerivation {
                rates: supplied.clone(),
                derived,
                discrepancy: Some(discrepancy),
            }
        }
        None => RateDerivation {
            rates: derived.clone(),
            derived,
            discrepancy: None,
        },
    })
}

/// Exact probability table over `(a, y, d, ŷ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    classes: usize,
    cells: Vec<f64>,
}

impl JointDistribution {
    pub(crate) fn cell_index(classes: usize, group: Group, label: usize, memorized: bool, predicted: usize) -> usize {
        ((group.index() * classes + label) * 2 + usize::from(memorized)) * classes + predicted
    }

    pub(crate) fn from_cells(classes: usize, cells: Vec<f64>) -> Self {
        debug_assert_eq!(cells.len(), 4 * classes * classes);
        Self { classes, cells }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, group: Group, label: usize, memorized: bool, predicted: usize) -> f64 {
        self.cells[Self::cell_index(self.classes, group, label, memorized, predicted)]
    }

    /// Cells flattened in `(a, y, d, ŷ)` row-major order.
    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().sum()
    }

    /// Mass of the `D = 1` slice.
    pub fn memorized_mass(&self) -> f64 {
        self.slice_sum(|_, _, d, _| d)
    }

    /// `P(Y = y, A = a)` recovered by summing over `d` and `ŷ`.
    pub fn label_group_mass(&self, group: Group, label: usize) -> f64 {
        self.slice_sum(|g, y, _, _| g == group && y == label)
    }

    pub(crate) fn slice_sum(&self, keep: impl Fn(Group, usize, bool, usize) -> bool) -> f64 {
        let k = self.classes;
        let mut total = 0.0;
        for g in Group::BOTH {
            for y in 0..k {
                for d in [false, true] {
                    for yh in 0..k {
                        if keep(g, y, d, yh) {
                            total += self.get(g, y, d, yh);
                        }
                    }
                }
            }
        }
        total
    }
}

/// Builds the joint table: `P(a,y,1,ŷ) = p_D q_y^a 1{ŷ=y}` and
/// `P(a,y,0,ŷ) = (p_y^a − p_D q_y^a) C^a_{y,ŷ}`.
pub fn joint_table(scenario: &Scenario) -> Result<JointDistribution> {
    let k = scenario.classes();
    let memo = scenario.memo();
    let mut cells = alloc::vec![0.0; 4 * k * k];
    for group in Group::BOTH {
        let rest = unmemorized_mass(scenario.joint(), memo, group)?;
        let confusion = scenario.base().confusion(group);
        for y in 0..k {
            let memorized = memo.mass() * memo.group_share(group, y);
            cells[JointDistribution::cell_index(k, group, y, true, y)] = memorized.max(0.0);
            for yh in 0..k {
                cells[JointDistribution::cell_index(k, group, y, false, yh)] = rest[y] * confusion[(y, yh)];
            }
        }
    }
    Ok(JointDistribution::from_cells(k, cells))
}
