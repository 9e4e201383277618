//! Linear feasibility with Farkas certificates.
//!
//! [`solve_feasibility`] runs a dense phase-1 simplex with Bland's rule on
//!
//! ```text
//!     E x = e,   G x ≤ g,   x_j ≥ l_j  (for bounded j)
//! ```
//!
//! and returns either a witness `x` or a certificate `y` with free multipliers
//! on the equality rows, nonnegative multipliers on the inequality and bound
//! rows, `Σ y_i a_i = 0` and `Σ y_i b_i < 0`, where the bound `x_j ≥ l_j`
//! enters as the row `−x_j ≤ −l_j`. Certificates are laid out as
//! `[equalities.., inequalities.., bounded variables in index order..]`.
//!
//! Both outcomes are checked against the original system before they are
//! returned; anything that fails its own check is reported as
//! [`Error::NumericalBreakdown`].

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tol;

/// Allowed constraint violation of a witness and certificate residual.
pub const FEASIBILITY_TOL: f64 = tol::FEASIBILITY;
/// Pivots smaller than this abort the solve.
pub const PIVOT_TOL: f64 = tol::PIVOT;

// Entries at or below this are not eligible in the ratio test.
const RATIO_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-11;
const TIE_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 200_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl Constraint {
    fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum()
    }
}

/// Equalities `a·x = b`, inequalities `a·x ≤ b` and optional lower bounds.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LinearSystem {
    vars: usize,
    equalities: Vec<Constraint>,
    inequalities: Vec<Constraint>,
    lower_bounds: Vec<Option<f64>>,
}

impl LinearSystem {
    pub fn new(vars: usize) -> Self {
        Self {
            vars,
            equalities: Vec::new(),
            inequalities: Vec::new(),
            lower_bounds: vec![None; vars],
        }
    }

    fn row(&self, coeffs: Vec<f64>, rhs: f64) -> Result<Constraint> {
        if coeffs.len() != self.vars {
            return Err(Error::Shape {
                what: "constraint row",
                expected: self.vars,
                found: coeffs.len(),
            });
        }
        if !rhs.is_finite() || !coeffs.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite("constraint row"));
        }
        Ok(Constraint { coeffs, rhs })
    }

    pub fn add_equality(&mut self, coeffs: Vec<f64>, rhs: f64) -> Result<()> {
        let row = self.row(coeffs, rhs)?;
        self.equalities.push(row);
        Ok(())
    }

    /// Adds `coeffs · x ≤ rhs`.
    pub fn add_inequality(&mut self, coeffs: Vec<f64>, rhs: f64) -> Result<()> {
        let row = self.row(coeffs, rhs)?;
        self.inequalities.push(row);
        Ok(())
    }

    pub fn set_lower_bound(&mut self, var: usize, bound: f64) -> Result<()> {
        if var >= self.vars {
            return Err(Error::Shape {
                what: "bounded variable index",
                expected: self.vars,
                found: var,
            });
        }
        if !bound.is_finite() {
            return Err(Error::NonFinite("lower bound"));
        }
        self.lower_bounds[var] = Some(bound);
        Ok(())
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn equalities(&self) -> &[Constraint] {
        &self.equalities
    }

    pub fn inequalities(&self) -> &[Constraint] {
        &self.inequalities
    }

    pub fn lower_bounds(&self) -> &[Option<f64>] {
        &self.lower_bounds
    }

    /// Length of a certificate for this system.
    pub fn multiplier_count(&self) -> usize {
        self.equalities.len() + self.inequalities.len() + self.lower_bounds.iter().flatten().count()
    }

    /// Multiplies an inequality row (and its right-hand side) by `factor > 0`.
    pub fn scale_inequality(&mut self, row: usize, factor: f64) {
        let r = &mut self.inequalities[row];
        r.coeffs.iter_mut().for_each(|c| *c *= factor);
        r.rhs *= factor;
    }

    /// Multiplies an equality row by a nonzero `factor`.
    pub fn scale_equality(&mut self, row: usize, factor: f64) {
        let r = &mut self.equalities[row];
        r.coeffs.iter_mut().for_each(|c| *c *= factor);
        r.rhs *= factor;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    Feasible { witness: Vec<f64> },
    Infeasible { certificate: Vec<f64> },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }

    pub fn witness(&self) -> Option<&[f64]> {
        match self {
            Feasibility::Feasible { witness } => Some(witness),
            Feasibility::Infeasible { .. } => None,
        }
    }

    pub fn certificate(&self) -> Option<&[f64]> {
        match self {
            Feasibility::Infeasible { certificate } => Some(certificate),
            Feasibility::Feasible { .. } => None,
        }
    }
}

/// Largest constraint violation of `x`.
pub fn check_witness(system: &LinearSystem, x: &[f64]) -> Result<f64> {
    if x.len() != system.vars {
        return Err(Error::Shape {
            what: "witness",
            expected: system.vars,
            found: x.len(),
        });
    }
    let eq = system.equalities.iter().map(|r| (r.activity(x) - r.rhs).abs());
    let ineq = system.inequalities.iter().map(|r| (r.activity(x) - r.rhs).max(0.0));
    let bounds = system
        .lower_bounds
        .iter()
        .zip(x)
        .filter_map(|(l, v)| l.map(|l| (l - v).max(0.0)));
    Ok(eq.chain(ineq).chain(bounds).fold(0.0, f64::max))
}

/// True iff `y` proves infeasibility: sign conditions hold and, after scaling
/// `y` to unit max-norm, `‖Σ y_i a_i‖∞ ≤ 1e-9` and `Σ y_i b_i < −1e-9`.
pub fn check_certificate(system: &LinearSystem, y: &[f64]) -> Result<bool> {
    if y.len() != system.multiplier_count() {
        return Err(Error::Shape {
            what: "certificate",
            expected: system.multiplier_count(),
            found: y.len(),
        });
    }
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return Ok(false);
    }
    let n_eq = system.equalities.len();
    let signed = &y[n_eq..];
    if signed.iter().any(|v| *v < -tol::SIMPLEX * scale) {
        return Ok(false);
    }
    let mut combo = vec![0.0; system.vars];
    let mut rhs = 0.0;
    let rows = system.equalities.iter().chain(&system.inequalities);
    for (row, m) in rows.zip(y) {
        let m = m / scale;
        for (c, a) in combo.iter_mut().zip(&row.coeffs) {
            *c += m * a;
        }
        rhs += m * row.rhs;
    }
    let bound_multipliers = &y[n_eq + system.inequalities.len()..];
    let bounded = system.lower_bounds.iter().enumerate().filter_map(|(j, l)| l.map(|l| (j, l)));
    for ((j, l), m) in bounded.zip(bound_multipliers) {
        let m = m / scale;
        combo[j] -= m;
        rhs -= m * l;
    }
    let residual = combo.iter().fold(0.0f64, |r, v| r.max(v.abs()));
    Ok(residual <= FEASIBILITY_TOL && rhs < -FEASIBILITY_TOL)
}

/// How a structural column maps back to an original variable.
#[derive(Clone, Copy)]
enum Column {
    /// `x_j = l_j + z`.
    Shifted(usize),
    /// `x_j = z⁺ − z⁻`.
    Positive(usize),
    Negative(usize),
    Slack,
}

struct Row<'a> {
    source: &'a Constraint,
    is_equality: bool,
    scale: f64,
    sign: f64,
}

/// Dense phase-1 tableau; every row starts with its own artificial basic.
struct Tableau {
    width: usize,
    data: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    first_artificial: usize,
}

impl Tableau {
    fn rows(&self) -> usize {
        self.basis.len()
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.width + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let stride = self.width + 1;
        let p = self.at(pr, pc);
        for v in &mut self.data[pr * stride..(pr + 1) * stride] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.data[pr * stride..(pr + 1) * stride].to_vec();
        for r in 0..self.rows() {
            if r == pr {
                continue;
            }
            let f = self.at(r, pc);
            if f != 0.0 {
                for (v, pv) in self.data[r * stride..(r + 1) * stride].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.data[r * stride + pc] = 0.0;
            }
            let b = &mut self.data[r * stride + self.width];
            if *b < 0.0 && *b > -1e-11 {
                *b = 0.0;
            }
        }
        let f = self.cost[pc];
        if f != 0.0 {
            for (v, pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.cost[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Bland's rule: lowest-index improving column, lowest-index leaving basic.
    fn run(&mut self) -> Result<()> {
        for _ in 0..MAX_PIVOTS {
            let Some(enter) = (0..self.first_artificial).find(|&j| self.cost[j] < -COST_EPS) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            let mut largest = 0.0f64;
            for r in 0..self.rows() {
                let a = self.at(r, enter);
                largest = largest.max(a);
                if a <= RATIO_EPS {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((best, best_ratio)) => {
                        if ratio < best_ratio - TIE_EPS
                            || (ratio <= best_ratio + TIE_EPS && self.basis[r] < self.basis[best])
                        {
                            Some((r, ratio))
                        } else {
                            Some((best, best_ratio))
                        }
                    }
                };
            }
            let Some((row, _)) = leave else {
                return Err(Error::NumericalBreakdown(if largest > PIVOT_TOL {
                    "pivot magnitude below tolerance"
                } else {
                    "unbounded phase-1 direction"
                }));
            };
            if self.at(row, enter).abs() < PIVOT_TOL {
                return Err(Error::NumericalBreakdown("pivot magnitude below tolerance"));
            }
            self.pivot(row, enter);
        }
        Err(Error::NumericalBreakdown("pivot limit reached"))
    }
}

fn trivially_violated(system: &LinearSystem, rows: &[Row<'_>]) -> Option<Vec<f64>> {
    for (i, row) in rows.iter().enumerate() {
        if row.scale > 0.0 {
            continue;
        }
        let b = row.source.rhs;
        let violated = if row.is_equality { b.abs() > FEASIBILITY_TOL } else { b < -FEASIBILITY_TOL };
        if violated {
            let mut y = vec![0.0; system.multiplier_count()];
            // rows are laid out exactly like the certificate prefix
            y[i] = if row.is_equality { -b.signum() } else { 1.0 };
            return Some(y);
        }
    }
    None
}

/// Decides feasibility, returning a checked witness or a checked certificate.
pub fn solve_feasibility(system: &LinearSystem) -> Result<Feasibility> {
    let n = system.vars;
    let shift: Vec<f64> = system.lower_bounds.iter().map(|l| l.unwrap_or(0.0)).collect();

    let mut rows: Vec<Row<'_>> = system
        .equalities
        .iter()
        .map(|c| (c, true))
        .chain(system.inequalities.iter().map(|c| (c, false)))
        .map(|(source, is_equality)| {
            let scale = source.coeffs.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            Row {
                source,
                is_equality,
                scale,
                sign: 1.0,
            }
        })
        .collect();

    if let Some(certificate) = trivially_violated(system, &rows) {
        return Ok(Feasibility::Infeasible { certificate });
    }

    let mut columns = Vec::new();
    for (j, l) in system.lower_bounds.iter().enumerate() {
        match l {
            Some(_) => columns.push(Column::Shifted(j)),
            None => {
                columns.push(Column::Positive(j));
                columns.push(Column::Negative(j));
            }
        }
    }
    let active: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].scale > 0.0).collect();
    let slack_start = columns.len();
    for &i in &active {
        if !rows[i].is_equality {
            columns.push(Column::Slack);
        }
    }
    let first_artificial = columns.len();
    let m = active.len();
    let width = first_artificial + m;

    let mut data = vec![0.0; m * (width + 1)];
    let mut slack = slack_start;
    for (r, &i) in active.iter().enumerate() {
        let row = &mut rows[i];
        let shifted_rhs = (row.source.rhs - row.source.activity(&shift)) / row.scale;
        row.sign = if shifted_rhs < 0.0 { -1.0 } else { 1.0 };
        let f = row.sign / row.scale;
        let line = &mut data[r * (width + 1)..(r + 1) * (width + 1)];
        for (c, col) in columns.iter().enumerate() {
            line[c] = match *col {
                Column::Shifted(j) | Column::Positive(j) => f * row.source.coeffs[j],
                Column::Negative(j) => -f * row.source.coeffs[j],
                Column::Slack => 0.0,
            };
        }
        if !row.is_equality {
            line[slack] = row.sign;
            slack += 1;
        }
        line[first_artificial + r] = 1.0;
        line[width] = row.sign * shifted_rhs;
    }

    let mut cost = vec![0.0; width + 1];
    for c in (0..first_artificial).chain(core::iter::once(width)) {
        cost[c] = -(0..m).map(|r| data[r * (width + 1) + c]).sum::<f64>();
    }
    let mut tableau = Tableau {
        width,
        data,
        cost,
        basis: (first_artificial..width).collect(),
        first_artificial,
    };
    tableau.run()?;

    let mut z = vec![0.0; width];
    for (r, &b) in tableau.basis.iter().enumerate() {
        z[b] = tableau.rhs(r);
    }
    let mut witness = shift.clone();
    for (c, col) in columns.iter().enumerate() {
        match *col {
            Column::Shifted(j) | Column::Positive(j) => witness[j] += z[c],
            Column::Negative(j) => witness[j] -= z[c],
            Column::Slack => {}
        }
    }
    if check_witness(system, &witness)? <= FEASIBILITY_TOL {
        return Ok(Feasibility::Feasible { witness });
    }

    // Phase-1 duals: the artificial of row r has cost 1, so π_r = 1 − d_r.
    let mut certificate = vec![0.0; system.multiplier_count()];
    for (r, &i) in active.iter().enumerate() {
        let pi = 1.0 - tableau.cost[first_artificial + r];
        let y = -rows[i].sign * pi / rows[i].scale;
        certificate[i] = if rows[i].is_equality { y } else { y.max(0.0) };
    }
    let n_rows = rows.len();
    let mut b = 0;
    for j in 0..n {
        if system.lower_bounds[j].is_some() {
            let combo: f64 = rows
                .iter()
                .zip(&certificate)
                .map(|(row, y)| y * row.source.coeffs[j])
                .sum();
            certificate[n_rows + b] = combo.max(0.0);
            b += 1;
        }
    }
    if check_certificate(system, &certificate)? {
        Ok(Feasibility::Infeasible { certificate })
    } else {
        Err(Error::NumericalBreakdown("neither witness nor certificate verified"))
    }
}
