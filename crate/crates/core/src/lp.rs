//! Dense bounded-variable two-phase simplex with exact dual extraction.
//!
//! Written for the OPF problems this crate solves: a few hundred variables
//! and rows, well-scaled data, and a hard requirement for reproducible
//! duals. The solver is fully deterministic (Dantzig pricing with index
//! tie-breaks, switching to Bland's rule after a run of degenerate pivots),
//! reports primal/dual degeneracy so callers can flag unreliable shadow
//! prices, and returns an optimality certificate recomputed from scratch.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Reference to a variable added to a [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Reference to a constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstraintId(pub(crate) usize);

impl ConstraintId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Row relation against its right-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relation {
    Eq(f64),
    Le(f64),
    Ge(f64),
    /// Two-sided `lo <= expr <= hi`.
    Range(f64, f64),
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("infeasible: no point satisfies {}", .conflicts.join(", "))]
    Infeasible {
        /// Labels of rows whose artificial variables stayed positive: the
        /// constraints that could not be met simultaneously.
        conflicts: Vec<String>,
    },
    #[error("unbounded: objective decreases without limit along `{variable}`")]
    Unbounded { variable: String },
    #[error("variable `{0}` has lower bound above upper bound")]
    BadBounds(String),
    #[error("range row `{0}` has lo > hi")]
    BadRange(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    FreeZero,
}

/// Optimality certificate recomputed from the original data after the solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    /// Max violation of `A x + s = b` and of variable bounds.
    pub primal_residual: f64,
    /// Max reduced-cost sign violation over nonbasic variables.
    pub dual_residual: f64,
    /// Max `|reduced cost| * distance-from-bound` over all variables.
    pub complementarity: f64,
}

impl Certificate {
    pub fn within(&self, tol: f64) -> bool {
        self.primal_residual <= tol && self.dual_residual <= tol && self.complementarity <= tol
    }
}

/// Optimal solution with values, duals and degeneracy diagnostics.
#[derive(Debug, Clone)]
pub struct LpSolution {
    values: Vec<f64>,
    duals: Vec<f64>,
    reduced_costs: Vec<f64>,
    pub objective: f64,
    /// A basic variable sits at one of its bounds: the optimal vertex is
    /// primal-degenerate, so dual values (shadow prices) may be non-unique.
    pub primal_degenerate: bool,
    /// A nonbasic variable has zero reduced cost: the optimum is attained
    /// on a face, so primal values may be non-unique.
    pub dual_degenerate: bool,
    pub certificate: Certificate,
    pub iterations: usize,
}

impl LpSolution {
    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }

    /// Sensitivity of the objective to the row's right-hand side (for a
    /// range row: to a parallel shift of both sides).
    pub fn dual(&self, row: ConstraintId) -> f64 {
        self.duals[row.0]
    }

    pub fn reduced_cost(&self, var: VarId) -> f64 {
        self.reduced_costs[var.0]
    }

    pub fn duals(&self) -> &[f64] {
        &self.duals
    }
}

struct Row {
    terms: Vec<(usize, f64)>,
    relation: Relation,
    label: String,
}

/// A linear program `min c.x` subject to bounds and linear rows.
#[derive(Default)]
pub struct LinearProgram {
    costs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    var_labels: Vec<String>,
    rows: Vec<Row>,
}

impl fmt::Debug for LinearProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearProgram")
            .field("vars", &self.costs.len())
            .field("rows", &self.rows.len())
            .finish()
    }
}

const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-10;
const DEGEN_STEP_TOL: f64 = 1e-11;
const DEGEN_FLAG_TOL: f64 = 1e-7;
const FEAS_TOL: f64 = 1e-7;
const BLAND_TRIGGER: usize = 40;
const REFRESH_EVERY: usize = 60;

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable with objective coefficient `cost` and bounds
    /// `lower..=upper` (infinities allowed, equal bounds fix the variable).
    pub fn add_variable(
        &mut self,
        label: impl Into<String>,
        cost: f64,
        lower: f64,
        upper: f64,
    ) -> VarId {
        self.costs.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.var_labels.push(label.into());
        VarId(self.costs.len() - 1)
    }

    /// Adds a constraint row over previously created variables. Repeated
    /// variables in `terms` are summed.
    pub fn add_constraint(
        &mut self,
        label: impl Into<String>,
        terms: &[(VarId, f64)],
        relation: Relation,
    ) -> ConstraintId {
        let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            if let Some(slot) = coeffs.iter_mut().find(|(i, _)| *i == v.0) {
                slot.1 += c;
            } else {
                coeffs.push((v.0, *c));
            }
        }
        self.rows.push(Row {
            terms: coeffs,
            relation,
            label: label.into(),
        });
        ConstraintId(self.rows.len() - 1)
    }

    pub fn num_variables(&self) -> usize {
        self.costs.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        Solver::prepare(self)?.run()
    }
}

struct Solver<'a> {
    lp: &'a LinearProgram,
    n_struct: usize,
    m: usize,
    /// Per-variable columns over rows; structural then slack then artificial.
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    costs: Vec<f64>,
    phase1_costs: Vec<f64>,
    status: Vec<Status>,
    values: Vec<f64>,
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    pivots_since_refresh: usize,
    degenerate_run: usize,
    bland: bool,
    iterations: usize,
}

impl<'a> Solver<'a> {
    fn prepare(lp: &'a LinearProgram) -> Result<Self, LpError> {
        let n = lp.costs.len();
        let m = lp.rows.len();
        for j in 0..n {
            if lp.lower[j] > lp.upper[j] {
                return Err(LpError::BadBounds(lp.var_labels[j].clone()));
            }
        }

        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + m];
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        let mut rhs = vec![0.0; m];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, c) in &row.terms {
                cols[j].push((i, c));
            }
            let slack = n + i;
            cols[slack].push((i, 1.0));
            let (b, s_lo, s_hi) = match row.relation {
                Relation::Eq(b) => (b, 0.0, 0.0),
                Relation::Le(b) => (b, 0.0, f64::INFINITY),
                Relation::Ge(b) => (b, f64::NEG_INFINITY, 0.0),
                Relation::Range(lo, hi) => {
                    if lo > hi {
                        return Err(LpError::BadRange(row.label.clone()));
                    }
                    (hi, 0.0, hi - lo)
                }
            };
            rhs[i] = b;
            lower.push(s_lo);
            upper.push(s_hi);
        }

        let mut costs = lp.costs.clone();
        costs.resize(n + m, 0.0);

        Ok(Solver {
            lp,
            n_struct: n,
            m,
            cols,
            lower,
            upper,
            rhs,
            costs,
            phase1_costs: Vec::new(),
            status: Vec::new(),
            values: Vec::new(),
            basis: Vec::new(),
            binv: DMatrix::identity(m, m),
            pivots_since_refresh: 0,
            degenerate_run: 0,
            bland: false,
            iterations: 0,
        })
    }

    fn initial_nonbasic(lo: f64, up: f64) -> (Status, f64) {
        if lo.is_finite() {
            (Status::AtLower, lo)
        } else if up.is_finite() {
            (Status::AtUpper, up)
        } else {
            (Status::FreeZero, 0.0)
        }
    }

    fn run(mut self) -> Result<LpSolution, LpError> {
        let n = self.n_struct;
        let m = self.m;

        // Start: structural variables at their nearest finite bound.
        self.status = Vec::with_capacity(n + m);
        self.values = Vec::with_capacity(n + m);
        for j in 0..n {
            let (st, v) = Self::initial_nonbasic(self.lower[j], self.upper[j]);
            self.status.push(st);
            self.values.push(v);
        }

        // Row activities of the structural part.
        let mut activity = vec![0.0; m];
        for j in 0..n {
            for &(i, c) in &self.cols[j] {
                activity[i] += c * self.values[j];
            }
        }

        // Slacks become basic where the residual fits their bounds;
        // otherwise an artificial absorbs the violation. Slack entries are
        // pushed for every row first so variable indices stay aligned with
        // the column table, then the artificials are appended.
        self.basis = vec![usize::MAX; m];
        let mut violations: Vec<(usize, f64)> = Vec::new();
        for (i, row_activity) in activity.iter().enumerate() {
            let slack = n + i;
            let resid = self.rhs[i] - row_activity;
            let (s_lo, s_hi) = (self.lower[slack], self.upper[slack]);
            if resid >= s_lo && resid <= s_hi {
                self.status.push(Status::Basic(i));
                self.values.push(resid);
                self.basis[i] = slack;
            } else {
                let s_val = resid.clamp(s_lo, s_hi);
                let s_val = if s_val.is_finite() { s_val } else { 0.0 };
                self.status.push(if s_val == s_lo {
                    Status::AtLower
                } else {
                    Status::AtUpper
                });
                self.values.push(s_val);
                violations.push((i, resid - s_val));
            }
        }
        let mut artificials = Vec::new();
        for (i, violation) in violations {
            let art = self.cols.len();
            self.cols.push(vec![(i, 1.0)]);
            if violation > 0.0 {
                self.lower.push(0.0);
                self.upper.push(f64::INFINITY);
            } else {
                self.lower.push(f64::NEG_INFINITY);
                self.upper.push(0.0);
            }
            self.costs.push(0.0);
            self.status.push(Status::Basic(i));
            self.values.push(violation);
            self.basis[i] = art;
            artificials.push((art, violation > 0.0));
        }

        // Phase 1: minimize total artificial infeasibility.
        if !artificials.is_empty() {
            self.phase1_costs = vec![0.0; self.cols.len()];
            for &(art, positive) in &artificials {
                self.phase1_costs[art] = if positive { 1.0 } else { -1.0 };
            }
            self.iterate(true)?;

            let infeasibility: f64 = artificials
                .iter()
                .map(|&(art, _)| self.values[art].abs())
                .sum();
            if infeasibility > FEAS_TOL {
                let mut conflicts = Vec::new();
                for &(art, _) in &artificials {
                    if self.values[art].abs() > FEAS_TOL {
                        let row = self.cols[art][0].0;
                        conflicts.push(self.lp.rows[row].label.clone());
                    }
                }
                return Err(LpError::Infeasible { conflicts });
            }
            // Pin artificials to zero for phase 2.
            for &(art, _) in &artificials {
                self.lower[art] = 0.0;
                self.upper[art] = 0.0;
                if !matches!(self.status[art], Status::Basic(_)) {
                    self.status[art] = Status::AtLower;
                    self.values[art] = 0.0;
                }
            }
        }

        // Phase 2 on the real objective.
        self.iterate(false)?;
        self.finish()
    }

    fn cost(&self, phase1: bool, j: usize) -> f64 {
        if phase1 {
            self.phase1_costs[j]
        } else {
            self.costs[j]
        }
    }

    fn dual_vector(&self, phase1: bool) -> DVector<f64> {
        let c_b = DVector::from_iterator(
            self.m,
            self.basis.iter().map(|&j| self.cost(phase1, j)),
        );
        self.binv.transpose() * c_b
    }

    fn reduced_cost(&self, phase1: bool, y: &DVector<f64>, j: usize) -> f64 {
        let mut d = self.cost(phase1, j);
        for &(i, c) in &self.cols[j] {
            d -= y[i] * c;
        }
        d
    }

    /// Entering direction: +1 to increase the variable, -1 to decrease.
    fn entering_direction(status: Status, d: f64) -> Option<f64> {
        match status {
            Status::AtLower if d < -DUAL_TOL => Some(1.0),
            Status::AtUpper if d > DUAL_TOL => Some(-1.0),
            Status::FreeZero if d.abs() > DUAL_TOL => Some(-d.signum()),
            _ => None,
        }
    }

    fn refresh_basis(&mut self) -> Result<(), LpError> {
        let mut mat = DMatrix::zeros(self.m, self.m);
        for (r, &j) in self.basis.iter().enumerate() {
            for &(i, c) in &self.cols[j] {
                mat[(i, r)] = c;
            }
        }
        self.binv = mat
            .lu()
            .try_inverse()
            .ok_or_else(|| LpError::Numerical("singular basis matrix".to_string()))?;

        // Recompute basic values from scratch.
        let mut b = DVector::from_column_slice(&self.rhs);
        for (j, st) in self.status.iter().enumerate() {
            if matches!(st, Status::Basic(_)) {
                continue;
            }
            let v = self.values[j];
            if v != 0.0 {
                for &(i, c) in &self.cols[j] {
                    b[i] -= c * v;
                }
            }
        }
        let xb = &self.binv * b;
        for (r, &j) in self.basis.iter().enumerate() {
            self.values[j] = xb[r];
        }
        self.pivots_since_refresh = 0;
        Ok(())
    }

    #[cfg(test)]
    fn debug_check(&self, where_: &str) {
        if std::env::var("LP_TRACE").is_err() {
            return;
        }
        for (r, &j) in self.basis.iter().enumerate() {
            let v = self.values[j];
            if v < self.lower[j] - 1e-6 || v > self.upper[j] + 1e-6 {
                panic!(
                    "{where_}: iter {} basic var {} (row {r}) value {v} outside [{}, {}]",
                    self.iterations, j, self.lower[j], self.upper[j]
                );
            }
        }
        for (j, st) in self.status.iter().enumerate() {
            match st {
                Status::AtLower => assert_eq!(self.values[j], self.lower[j], "var {j} at-lower"),
                Status::AtUpper => assert_eq!(self.values[j], self.upper[j], "var {j} at-upper"),
                _ => {}
            }
        }
    }

    #[cfg(not(test))]
    fn debug_check(&self, _where: &str) {}

    fn iterate(&mut self, phase1: bool) -> Result<(), LpError> {
        let max_iterations = 200 * (self.cols.len() + self.m) + 2000;
        loop {
            self.debug_check(if phase1 { "phase1" } else { "phase2" });
            self.iterations += 1;
            if self.iterations > max_iterations {
                return Err(LpError::Numerical(format!(
                    "iteration limit {max_iterations} reached"
                )));
            }

            let y = self.dual_vector(phase1);

            // Pricing: most attractive reduced cost, lowest index on ties;
            // plain Bland's rule while in anti-cycling mode.
            let mut entering: Option<(usize, f64, f64)> = None; // (var, dir, |d|)
            for j in 0..self.cols.len() {
                if matches!(self.status[j], Status::Basic(_)) || self.lower[j] == self.upper[j] {
                    continue;
                }
                let d = self.reduced_cost(phase1, &y, j);
                let Some(dir) = Self::entering_direction(self.status[j], d) else {
                    continue;
                };
                if self.bland {
                    entering = Some((j, dir, d.abs()));
                    break;
                }
                if entering.is_none_or(|(_, _, best)| d.abs() > best) {
                    entering = Some((j, dir, d.abs()));
                }
            }
            let Some((q, dir, _)) = entering else {
                return Ok(()); // optimal for this phase
            };

            // Direction through the basis.
            let mut a_q = DVector::zeros(self.m);
            for &(i, c) in &self.cols[q] {
                a_q[i] = c;
            }
            let w = &self.binv * a_q;

            // Ratio test: the entering variable moves by t in direction
            // `dir`; basic i changes at rate -dir*w_i.
            let span = self.upper[q] - self.lower[q];
            let mut t_best = if span.is_finite() { span } else { f64::INFINITY };
            let mut leaving: Option<(usize, bool)> = None; // (row, hits_upper)
            for r in 0..self.m {
                let rate = -dir * w[r];
                if rate.abs() <= PIVOT_TOL {
                    continue;
                }
                let jb = self.basis[r];
                let xb = self.values[jb];
                let (limit, hits_upper) = if rate > 0.0 {
                    (self.upper[jb], true)
                } else {
                    (self.lower[jb], false)
                };
                if !limit.is_finite() {
                    continue;
                }
                let t = (limit - xb) / rate;
                let t = t.max(0.0);
                let better = match leaving {
                    None => t < t_best - DEGEN_STEP_TOL || (t <= t_best && t_best.is_infinite()),
                    Some((r_cur, _)) => {
                        if t < t_best - DEGEN_STEP_TOL {
                            true
                        } else if (t - t_best).abs() <= DEGEN_STEP_TOL {
                            if self.bland {
                                self.basis[r] < self.basis[r_cur]
                            } else {
                                w[r].abs() > w[r_cur].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    t_best = t.min(t_best);
                    leaving = Some((r, hits_upper));
                }
            }

            if t_best.is_infinite() {
                return Err(LpError::Unbounded {
                    variable: self.label_of(q),
                });
            }

            let t = t_best;
            if t <= DEGEN_STEP_TOL {
                self.degenerate_run += 1;
                if self.degenerate_run >= BLAND_TRIGGER {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
                self.bland = false;
            }

            match leaving {
                // Bound flip: the entering variable crosses its own span.
                None | Some(_) if span.is_finite() && t >= span - DEGEN_STEP_TOL && leaving.is_none() => {
                    for r in 0..self.m {
                        let jb = self.basis[r];
                        self.values[jb] -= dir * span * w[r];
                    }
                    if dir > 0.0 {
                        self.values[q] = self.upper[q];
                        self.status[q] = Status::AtUpper;
                    } else {
                        self.values[q] = self.lower[q];
                        self.status[q] = Status::AtLower;
                    }
                }
                Some((r, hits_upper)) => {
                    for row in 0..self.m {
                        let jb = self.basis[row];
                        self.values[jb] -= dir * t * w[row];
                    }
                    let old = self.basis[r];
                    self.values[old] = if hits_upper {
                        self.upper[old]
                    } else {
                        self.lower[old]
                    };
                    self.status[old] = if hits_upper {
                        Status::AtUpper
                    } else {
                        Status::AtLower
                    };
                    self.values[q] += dir * t;
                    self.status[q] = Status::Basic(r);
                    self.basis[r] = q;

                    // Gauss-Jordan update of the basis inverse.
                    let pivot = w[r];
                    if pivot.abs() <= PIVOT_TOL {
                        return Err(LpError::Numerical("vanishing pivot".to_string()));
                    }
                    let pivot_row = self.binv.row(r) / pivot;
                    for i in 0..self.m {
                        if i == r {
                            continue;
                        }
                        let factor = w[i];
                        if factor != 0.0 {
                            let update = &pivot_row * factor;
                            let mut row_i = self.binv.row_mut(i);
                            row_i -= update;
                        }
                    }
                    self.binv.set_row(r, &pivot_row);

                    self.pivots_since_refresh += 1;
                    if self.pivots_since_refresh >= REFRESH_EVERY {
                        self.refresh_basis()?;
                    }
                }
                None => unreachable!("t finite without a leaving variable or bound flip"),
            }
        }
    }

    fn label_of(&self, j: usize) -> String {
        if j < self.n_struct {
            self.lp.var_labels[j].clone()
        } else if j < self.n_struct + self.m {
            format!("slack({})", self.lp.rows[j - self.n_struct].label)
        } else {
            "artificial".to_string()
        }
    }

    fn finish(mut self) -> Result<LpSolution, LpError> {
        // One clean refactorization pins the final values and duals.
        self.refresh_basis()?;

        let y = self.dual_vector(false);
        let duals: Vec<f64> = (0..self.m).map(|i| y[i]).collect();
        let values: Vec<f64> = self.values[..self.n_struct].to_vec();
        let reduced_costs: Vec<f64> = (0..self.n_struct)
            .map(|j| self.reduced_cost(false, &y, j))
            .collect();
        let objective: f64 = values
            .iter()
            .zip(&self.lp.costs)
            .map(|(x, c)| x * c)
            .sum();

        // Degeneracy diagnostics.
        let mut primal_degenerate = false;
        for &j in &self.basis {
            let v = self.values[j];
            let near_lower = self.lower[j].is_finite() && (v - self.lower[j]).abs() <= DEGEN_FLAG_TOL;
            let near_upper = self.upper[j].is_finite() && (self.upper[j] - v).abs() <= DEGEN_FLAG_TOL;
            if (near_lower || near_upper) && self.lower[j] != self.upper[j] {
                primal_degenerate = true;
                break;
            }
        }
        let mut dual_degenerate = false;
        for j in 0..self.cols.len() {
            if matches!(self.status[j], Status::Basic(_)) || self.lower[j] == self.upper[j] {
                continue;
            }
            if self.reduced_cost(false, &y, j).abs() <= DEGEN_FLAG_TOL {
                dual_degenerate = true;
                break;
            }
        }

        // Certificate recomputed from the original data.
        let mut primal_residual: f64 = 0.0;
        for row in &self.lp.rows {
            let mut lhs = 0.0;
            for &(j, c) in &row.terms {
                lhs += c * values[j];
            }
            let viol: f64 = match row.relation {
                Relation::Eq(b) => (lhs - b).abs(),
                Relation::Le(b) => (lhs - b).max(0.0),
                Relation::Ge(b) => (b - lhs).max(0.0),
                Relation::Range(lo, hi) => (lhs - hi).max(lo - lhs).max(0.0),
            };
            primal_residual = primal_residual.max(viol);
        }
        for (j, &v) in values.iter().enumerate() {
            if self.lp.lower[j].is_finite() {
                primal_residual = primal_residual.max(self.lp.lower[j] - v);
            }
            if self.lp.upper[j].is_finite() {
                primal_residual = primal_residual.max(v - self.lp.upper[j]);
            }
        }

        let mut dual_residual: f64 = 0.0;
        let mut complementarity: f64 = 0.0;
        for j in 0..self.cols.len() {
            if self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.reduced_cost(false, &y, j);
            match self.status[j] {
                Status::Basic(_) => dual_residual = dual_residual.max(d.abs()),
                Status::AtLower => dual_residual = dual_residual.max((-d).max(0.0)),
                Status::AtUpper => dual_residual = dual_residual.max(d.max(0.0)),
                Status::FreeZero => dual_residual = dual_residual.max(d.abs()),
            }
            let v = self.values[j];
            let dist_lower = if self.lower[j].is_finite() {
                v - self.lower[j]
            } else {
                f64::INFINITY
            };
            let dist_upper = if self.upper[j].is_finite() {
                self.upper[j] - v
            } else {
                f64::INFINITY
            };
            let interior = dist_lower.min(dist_upper);
            if interior.is_finite() && interior > 0.0 {
                complementarity = complementarity.max(d.abs().min(d.abs() * interior));
            }
        }

        Ok(LpSolution {
            values,
            duals,
            reduced_costs,
            objective,
            primal_degenerate,
            dual_degenerate,
            certificate: Certificate {
                primal_residual,
                dual_residual,
                complementarity,
            },
            iterations: self.iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn single_variable_sits_at_cheap_bound() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", 3.0, 1.5, 10.0);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.value(x), 1.5);
        assert_eq!(sol.objective, 4.5);
        assert!(sol.certificate.within(1e-9));

        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", -3.0, 1.5, 10.0);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.value(x), 10.0);
    }

    #[test]
    fn textbook_two_variable_problem() {
        // max x + 2y == min -x - 2y, s.t. x + y <= 4, 2x + y >= 2,
        // x >= 0, 0 <= y <= 3. Optimum (1, 3), objective -7.
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", -1.0, 0.0, INF);
        let y = lp.add_variable("y", -2.0, 0.0, 3.0);
        let r1 = lp.add_constraint("r1", &[(x, 1.0), (y, 1.0)], Relation::Le(4.0));
        let r2 = lp.add_constraint("r2", &[(x, 2.0), (y, 1.0)], Relation::Ge(2.0));
        let sol = lp.solve().unwrap();
        assert!((sol.value(x) - 1.0).abs() < 1e-9);
        assert!((sol.value(y) - 3.0).abs() < 1e-9);
        assert!((sol.objective + 7.0).abs() < 1e-9);
        // Binding x + y <= 4: one more unit of rhs gains one unit of x.
        assert!((sol.dual(r1) + 1.0).abs() < 1e-9);
        assert!(sol.dual(r2).abs() < 1e-9);
        assert!(sol.certificate.within(1e-8));
    }

    #[test]
    fn equality_rows_and_fixed_variables() {
        // min 2a + 3b with a + b = 10, 0 <= a <= 6, 0 <= b <= 10.
        let mut lp = LinearProgram::new();
        let a = lp.add_variable("a", 2.0, 0.0, 6.0);
        let b = lp.add_variable("b", 3.0, 0.0, 10.0);
        let bal = lp.add_constraint("bal", &[(a, 1.0), (b, 1.0)], Relation::Eq(10.0));
        let sol = lp.solve().unwrap();
        assert!((sol.value(a) - 6.0).abs() < 1e-9);
        assert!((sol.value(b) - 4.0).abs() < 1e-9);
        assert!((sol.objective - 24.0).abs() < 1e-9);
        // Marginal unit is b: shadow price 3.
        assert!((sol.dual(bal) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn range_rows_bind_on_either_side() {
        // min x subject to 2 <= x + y <= 5, y fixed at 1, x free.
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", 1.0, -INF, INF);
        let y = lp.add_variable("y", 0.0, 1.0, 1.0);
        let rng = lp.add_constraint("rng", &[(x, 1.0), (y, 1.0)], Relation::Range(2.0, 5.0));
        let sol = lp.solve().unwrap();
        assert!((sol.value(x) - 1.0).abs() < 1e-9);
        // Lower side binds; shifting the range up by one raises x by one.
        assert!((sol.dual(rng) - 1.0).abs() < 1e-9);

        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", -1.0, -INF, INF);
        let y = lp.add_variable("y", 0.0, 1.0, 1.0);
        let rng = lp.add_constraint("rng", &[(x, 1.0), (y, 1.0)], Relation::Range(2.0, 5.0));
        let sol = lp.solve().unwrap();
        assert!((sol.value(x) - 4.0).abs() < 1e-9);
        assert!((sol.dual(rng) + 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_names_the_conflicting_rows() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", 1.0, 0.0, 1.0);
        lp.add_constraint("needs_two", &[(x, 1.0)], Relation::Ge(2.0));
        match lp.solve() {
            Err(LpError::Infeasible { conflicts }) => {
                assert_eq!(conflicts, vec!["needs_two".to_string()]);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn unbounded_is_detected() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", -1.0, 0.0, INF);
        lp.add_constraint("slackish", &[(x, -1.0)], Relation::Le(5.0));
        match lp.solve() {
            Err(LpError::Unbounded { variable }) => assert_eq!(variable, "x"),
            other => panic!("expected unbounded, got {other:?}"),
        }
    }

    #[test]
    fn bound_flip_path_is_taken() {
        // Entering variable hits its own opposite bound before any basic
        // variable blocks.
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", -1.0, 0.0, 2.0);
        let y = lp.add_variable("y", 0.0, 0.0, 100.0);
        lp.add_constraint("cap", &[(x, 1.0), (y, 1.0)], Relation::Le(50.0));
        let sol = lp.solve().unwrap();
        assert!((sol.value(x) - 2.0).abs() < 1e-9);
        assert!((sol.objective + 2.0).abs() < 1e-9);
    }

    #[test]
    fn free_variables_enter_cleanly() {
        // min |ish| problem: free variable pushed by an equality.
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", 0.0, -INF, INF);
        let y = lp.add_variable("y", 1.0, 0.0, INF);
        lp.add_constraint("link", &[(x, 1.0), (y, -1.0)], Relation::Eq(-3.0));
        let sol = lp.solve().unwrap();
        assert!((sol.value(x) + 3.0).abs() < 1e-9);
        assert!((sol.value(y) - 0.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_vertex_is_flagged() {
        // Two rows bind at the same point: redundant constraint makes the
        // vertex primal-degenerate.
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", 1.0, 0.0, INF);
        let y = lp.add_variable("y", 1.0, 0.0, INF);
        lp.add_constraint("r1", &[(x, 1.0), (y, 1.0)], Relation::Ge(2.0));
        lp.add_constraint("r2", &[(x, 1.0), (y, 1.0)], Relation::Ge(2.0));
        let sol = lp.solve().unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-9);
        assert!(sol.primal_degenerate || sol.dual_degenerate);
    }

    #[test]
    fn cost_scaling_preserves_solution_and_scales_duals() {
        let build = |k: f64| {
            let mut lp = LinearProgram::new();
            let a = lp.add_variable("a", 12.5 * k, 0.0, 80.0);
            let b = lp.add_variable("b", 31.0 * k, 0.0, 90.0);
            let c = lp.add_variable("c", 7.25 * k, 0.0, 40.0);
            let bal = lp.add_constraint(
                "bal",
                &[(a, 1.0), (b, 1.0), (c, 1.0)],
                Relation::Eq(150.0),
            );
            let cap = lp.add_constraint("cap", &[(a, 1.0), (c, 0.5)], Relation::Le(95.0));
            (lp, a, b, c, bal, cap)
        };
        let (lp1, a1, b1, c1, bal1, cap1) = build(1.0);
        let (lp5, a5, b5, c5, bal5, cap5) = build(5.0);
        let s1 = lp1.solve().unwrap();
        let s5 = lp5.solve().unwrap();
        assert_eq!(s1.value(a1), s5.value(a5));
        assert_eq!(s1.value(b1), s5.value(b5));
        assert_eq!(s1.value(c1), s5.value(c5));
        let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1e-30);
        assert!(rel(s5.dual(bal5), 5.0 * s1.dual(bal1)) < 1e-12);
        if s1.dual(cap1) != 0.0 {
            assert!(rel(s5.dual(cap5), 5.0 * s1.dual(cap1)) < 1e-12);
        }
        assert!(rel(s5.objective, 5.0 * s1.objective) < 1e-12);
    }

    /// Brute-force oracle for tiny LPs: enumerate all vertex candidates
    /// (pairs of tight rows/bounds), filter feasible, take the best.
    fn brute_force_2d(
        costs: [f64; 2],
        bounds: [(f64, f64); 2],
        rows: &[(f64, f64, Relation)],
    ) -> Option<(f64, [f64; 2])> {
        let mut lines: Vec<(f64, f64, f64)> = Vec::new(); // a x + b y = c
        for &(a, b, rel) in rows {
            match rel {
                Relation::Eq(v) => lines.push((a, b, v)),
                Relation::Le(v) | Relation::Ge(v) => lines.push((a, b, v)),
                Relation::Range(lo, hi) => {
                    lines.push((a, b, lo));
                    lines.push((a, b, hi));
                }
            }
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            let (a, b) = if i == 0 { (1.0, 0.0) } else { (0.0, 1.0) };
            if lo.is_finite() {
                lines.push((a, b, lo));
            }
            if hi.is_finite() {
                lines.push((a, b, hi));
            }
        }
        let feasible = |x: f64, y: f64| -> bool {
            let eps = 1e-7;
            if x < bounds[0].0 - eps || x > bounds[0].1 + eps {
                return false;
            }
            if y < bounds[1].0 - eps || y > bounds[1].1 + eps {
                return false;
            }
            rows.iter().all(|&(a, b, rel)| {
                let v = a * x + b * y;
                match rel {
                    Relation::Eq(c) => (v - c).abs() <= eps,
                    Relation::Le(c) => v <= c + eps,
                    Relation::Ge(c) => v >= c - eps,
                    Relation::Range(lo, hi) => v >= lo - eps && v <= hi + eps,
                }
            })
        };
        let mut best: Option<(f64, [f64; 2])> = None;
        for i in 0..lines.len() {
            for j in (i + 1)..lines.len() {
                let (a1, b1, c1) = lines[i];
                let (a2, b2, c2) = lines[j];
                let det = a1 * b2 - a2 * b1;
                if det.abs() < 1e-12 {
                    continue;
                }
                let x = (c1 * b2 - c2 * b1) / det;
                let y = (a1 * c2 - a2 * c1) / det;
                if feasible(x, y) {
                    let obj = costs[0] * x + costs[1] * y;
                    if best.map_or(true, |(b_obj, _)| obj < b_obj - 1e-12) {
                        best = Some((obj, [x, y]));
                    }
                }
            }
        }
        best
    }

    #[test]
    fn random_two_variable_lps_match_vertex_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let mut solved = 0;
        for case in 0..200 {
            let costs = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let bounds = [
                (rng.gen_range(-3.0..0.0), rng.gen_range(0.5..4.0)),
                (rng.gen_range(-3.0..0.0), rng.gen_range(0.5..4.0)),
            ];
            let n_rows = rng.gen_range(1..4);
            let rows: Vec<(f64, f64, Relation)> = (0..n_rows)
                .map(|_| {
                    let a = rng.gen_range(-2.0..2.0);
                    let b = rng.gen_range(-2.0..2.0);
                    let v = rng.gen_range(-3.0..3.0);
                    let rel = match rng.gen_range(0..3) {
                        0 => Relation::Le(v),
                        1 => Relation::Ge(v),
                        _ => Relation::Range(v, v + rng.gen_range(0.1..2.0)),
                    };
                    (a, b, rel)
                })
                .collect();

            let mut lp = LinearProgram::new();
            let x = lp.add_variable("x", costs[0], bounds[0].0, bounds[0].1);
            let y = lp.add_variable("y", costs[1], bounds[1].0, bounds[1].1);
            for (k, &(a, b, rel)) in rows.iter().enumerate() {
                lp.add_constraint(format!("r{k}"), &[(x, a), (y, b)], rel);
            }

            let oracle = brute_force_2d(costs, bounds, &rows);
            match lp.solve() {
                Ok(sol) => {
                    let (oracle_obj, _) = oracle.unwrap_or_else(|| {
                        panic!("case {case}: solver found optimum, oracle found none")
                    });
                    assert!(
                        (sol.objective - oracle_obj).abs() <= 1e-7 * oracle_obj.abs().max(1.0),
                        "case {case}: solver {} vs oracle {}",
                        sol.objective,
                        oracle_obj
                    );
                    assert!(sol.certificate.within(1e-7), "case {case}");
                    solved += 1;
                }
                Err(LpError::Infeasible { .. }) => {
                    assert!(oracle.is_none(), "case {case}: oracle found a point");
                }
                Err(e) => panic!("case {case}: {e}"),
            }
        }
        assert!(solved > 100, "only {solved} solvable cases generated");
    }

    #[test]
    fn duals_match_finite_difference_sensitivities() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let mut checked = 0;
        for _case in 0..60 {
            // Random dispatch-like LP: n units, one balance, one capacity row.
            let n = rng.gen_range(2..6);
            let mut lp = LinearProgram::new();
            let vars: Vec<VarId> = (0..n)
                .map(|i| {
                    lp.add_variable(
                        format!("g{i}"),
                        rng.gen_range(5.0..50.0),
                        0.0,
                        rng.gen_range(20.0..120.0),
                    )
                })
                .collect();
            let demand = rng.gen_range(30.0..80.0);
            let all: Vec<(VarId, f64)> = vars.iter().map(|&v| (v, 1.0)).collect();
            let bal = lp.add_constraint("bal", &all, Relation::Eq(demand));
            let pair: Vec<(VarId, f64)> = vars.iter().take(2).map(|&v| (v, 1.0)).collect();
            let cap = rng.gen_range(25.0..90.0);
            lp.add_constraint("cap", &pair, Relation::Le(cap));

            let Ok(sol) = lp.solve() else { continue };
            if sol.primal_degenerate || sol.dual_degenerate {
                continue;
            }

            let eps = 1e-4;
            let mut lp2 = LinearProgram::new();
            let vars2: Vec<VarId> = (0..n)
                .map(|i| {
                    let v = vars[i];
                    lp2.add_variable(
                        format!("g{i}"),
                        lp_cost(&lp, v),
                        0.0,
                        lp_upper(&lp, v),
                    )
                })
                .collect();
            let all2: Vec<(VarId, f64)> = vars2.iter().map(|&v| (v, 1.0)).collect();
            lp2.add_constraint("bal", &all2, Relation::Eq(demand + eps));
            let pair2: Vec<(VarId, f64)> = vars2.iter().take(2).map(|&v| (v, 1.0)).collect();
            lp2.add_constraint("cap", &pair2, Relation::Le(cap));
            let Ok(sol2) = lp2.solve() else { continue };

            let fd = (sol2.objective - sol.objective) / eps;
            assert!(
                (fd - sol.dual(bal)).abs() <= 1e-4 * sol.dual(bal).abs().max(1.0),
                "balance dual {} vs finite difference {}",
                sol.dual(bal),
                fd
            );
            checked += 1;
        }
        assert!(checked >= 20, "only {checked} nondegenerate cases checked");
    }

    fn lp_cost(lp: &LinearProgram, v: VarId) -> f64 {
        lp.costs[v.0]
    }

    fn lp_upper(lp: &LinearProgram, v: VarId) -> f64 {
        lp.upper[v.0]
    }
}
