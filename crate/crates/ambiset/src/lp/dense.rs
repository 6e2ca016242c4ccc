//! Dense two-phase primal simplex.
//!
//! Small general-purpose solver: any mix of `<=`, `=`, `>=` rows, variable
//! bounds defaulting to `[0, +inf)`, free variables handled by splitting.
//! Pivoting runs Dantzig's rule with an automatic switch to Bland's rule
//! after a stall, which guarantees termination on degenerate programs.
//!
//! Optimal bases are re-factored from the original data before returning:
//! the primal is recomputed by solving `B x_B = b`, the duals by solving
//! `B' y = c_B`, and feasibility, dual feasibility, complementary slackness
//! and the primal/dual objective gap are all checked against the tolerance.
//! A certificate failure triggers one full retry under Bland's rule and then
//! surfaces as [`LpError::NumericalBreakdown`]; infeasible and unbounded
//! outcomes are ordinary return values, never errors.

use thiserror::Error;

/// Default solver tolerance.
pub const DEFAULT_LP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// A linear program over real variables.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    sense: Sense,
    objective: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
    bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    pub fn minimize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self { sense: Sense::Minimize, objective, rows: Vec::new(), bounds: vec![(0.0, f64::INFINITY); n] }
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        let mut lp = Self::minimize(objective);
        lp.sense = Sense::Maximize;
        lp
    }

    /// Append a constraint row; dimensions are checked at solve time.
    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.rows.push((coeffs, relation, rhs));
        self
    }

    /// Set the bounds of variable `var` (defaults are `[0, +inf)`).
    /// Use `f64::NEG_INFINITY` / `f64::INFINITY` for unbounded sides.
    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.bounds[var] = (lower, upper);
        self
    }

    /// Make variable `var` free.
    pub fn free_var(&mut self, var: usize) -> &mut Self {
        self.set_bounds(var, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }
}

/// An optimal solution with its internally verified certificates.
#[derive(Debug, Clone)]
pub struct OptimalLp {
    /// Objective value in the caller's sense.
    pub value: f64,
    /// One value per original variable.
    pub primal: Vec<f64>,
    /// One multiplier per original constraint row. Multipliers satisfy
    /// `value = sum dual_k * rhs_k` plus bound contributions, with the usual
    /// signs (for a maximization, `<=` rows carry nonnegative duals).
    pub dual: Vec<f64>,
    /// Absolute primal/dual objective gap measured on the internal standard
    /// form; the strong-duality certificate.
    pub gap: f64,
}

/// Solver outcome. Infeasibility and unboundedness are statuses, not errors.
#[derive(Debug, Clone)]
pub enum LpSolution {
    Optimal(OptimalLp),
    Infeasible,
    Unbounded,
}

impl LpSolution {
    pub fn optimal(&self) -> Option<&OptimalLp> {
        match self {
            LpSolution::Optimal(o) => Some(o),
            _ => None,
        }
    }

    /// Unwrap an outcome the caller knows must be optimal.
    pub fn expect_optimal(self, what: &str) -> OptimalLp {
        match self {
            LpSolution::Optimal(o) => o,
            other => panic!("expected optimal solution for {what}, got {other:?}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("constraint {row} has {len} coefficients, expected {expected}")]
    DimensionMismatch { row: usize, len: usize, expected: usize },
    #[error("variable {var} has invalid bounds [{lower}, {upper}]")]
    InvalidBounds { var: usize, lower: f64, upper: f64 },
    #[error("{what} contains a non-finite entry")]
    NonFinite { what: &'static str },
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
}

/// Solve `lp` to the given tolerance (`DEFAULT_LP_TOL` is the usual choice).
pub fn solve_lp(lp: &LinearProgram, tol: f64) -> Result<LpSolution, LpError> {
    validate(lp)?;
    let canon = Canonical::build(lp);
    match canon.solve(tol, false) {
        Ok(solution) => Ok(solution),
        // One retry under Bland's rule from scratch before giving up.
        Err(_) => canon.solve(tol, true),
    }
}

fn validate(lp: &LinearProgram) -> Result<(), LpError> {
    let n = lp.objective.len();
    if lp.objective.iter().any(|c| !c.is_finite()) {
        return Err(LpError::NonFinite { what: "objective" });
    }
    for (k, (coeffs, _, rhs)) in lp.rows.iter().enumerate() {
        if coeffs.len() != n {
            return Err(LpError::DimensionMismatch { row: k, len: coeffs.len(), expected: n });
        }
        if coeffs.iter().any(|c| !c.is_finite()) || !rhs.is_finite() {
            return Err(LpError::NonFinite { what: "constraint" });
        }
    }
    for (var, &(lower, upper)) in lp.bounds.iter().enumerate() {
        let ok = lower <= upper && lower < f64::INFINITY && upper > f64::NEG_INFINITY;
        if !ok || lower.is_nan() || upper.is_nan() {
            return Err(LpError::InvalidBounds { var, lower, upper });
        }
    }
    Ok(())
}

/// How an original variable maps onto nonnegative internal columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = lo + y`, `y >= 0`.
    Shift { col: usize, lo: f64 },
    /// `x = up - y`, `y >= 0` (lower bound is -inf).
    Mirror { col: usize, up: f64 },
    /// `x = y_pos - y_neg`, both `>= 0` (free variable).
    Split { pos: usize, neg: usize },
}

/// The internal standard form `min c.y, A y = b, y >= 0` with slack and
/// artificial columns appended, plus the bookkeeping to map results back.
struct Canonical {
    sense: Sense,
    orig_objective: Vec<f64>,
    var_map: Vec<VarMap>,
    num_structural: usize,
    // Equality system over all columns (structural + slack + artificial).
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    cost: Vec<f64>,
    ncols: usize,
    artificial_start: usize,
    initial_basis: Vec<usize>,
    // Original-row bookkeeping: canonical row index and sign flip.
    row_origin: Vec<Option<usize>>,
    row_flipped: Vec<bool>,
    num_orig_rows: usize,
}

impl Canonical {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.objective.len();
        let negate = lp.sense == Sense::Maximize;
        let c_orig: Vec<f64> =
            lp.objective.iter().map(|&c| if negate { -c } else { c }).collect();

        let mut var_map = Vec::with_capacity(n);
        let mut num_structural = 0usize;
        // Bound rows for finite upper bounds of shifted variables.
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for (j, &(lower, upper)) in lp.bounds.iter().enumerate() {
            if lower == f64::NEG_INFINITY && upper == f64::INFINITY {
                var_map.push(VarMap::Split { pos: num_structural, neg: num_structural + 1 });
                num_structural += 2;
            } else if lower == f64::NEG_INFINITY {
                var_map.push(VarMap::Mirror { col: num_structural, up: upper });
                num_structural += 1;
            } else {
                var_map.push(VarMap::Shift { col: num_structural, lo: lower });
                if upper.is_finite() {
                    bound_rows.push((num_structural, upper - lower));
                }
                num_structural += 1;
            }
            let _ = j;
        }

        let mut cost = vec![0.0; num_structural];
        for (j, &cj) in c_orig.iter().enumerate() {
            match var_map[j] {
                VarMap::Shift { col, .. } => cost[col] += cj,
                VarMap::Mirror { col, .. } => cost[col] -= cj,
                VarMap::Split { pos, neg } => {
                    cost[pos] += cj;
                    cost[neg] -= cj;
                }
            }
        }

        // Structural part of each canonical row.
        struct RawRow {
            coeffs: Vec<f64>,
            relation: Relation,
            rhs: f64,
            origin: Option<usize>,
        }
        let mut raw_rows: Vec<RawRow> = Vec::new();
        for (k, (coeffs, relation, rhs)) in lp.rows.iter().enumerate() {
            let mut row = vec![0.0; num_structural];
            let mut b = *rhs;
            for (j, &aij) in coeffs.iter().enumerate() {
                match var_map[j] {
                    VarMap::Shift { col, lo } => {
                        row[col] += aij;
                        b -= aij * lo;
                    }
                    VarMap::Mirror { col, up } => {
                        row[col] -= aij;
                        b -= aij * up;
                    }
                    VarMap::Split { pos, neg } => {
                        row[pos] += aij;
                        row[neg] -= aij;
                    }
                }
            }
            raw_rows.push(RawRow { coeffs: row, relation: *relation, rhs: b, origin: Some(k) });
        }
        for &(col, ub) in &bound_rows {
            let mut row = vec![0.0; num_structural];
            row[col] = 1.0;
            raw_rows.push(RawRow { coeffs: row, relation: Relation::Le, rhs: ub, origin: None });
        }

        // Normalize signs so every rhs is nonnegative, then append slack and
        // artificial columns.
        let m = raw_rows.len();
        let mut row_flipped = vec![false; m];
        for (i, row) in raw_rows.iter_mut().enumerate() {
            if row.rhs < 0.0 {
                row.rhs = -row.rhs;
                row.coeffs.iter_mut().for_each(|v| *v = -*v);
                row.relation = match row.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Eq => Relation::Eq,
                    Relation::Ge => Relation::Le,
                };
                row_flipped[i] = true;
            }
        }
        let num_slack =
            raw_rows.iter().filter(|r| r.relation != Relation::Eq).count();
        let num_artificial =
            raw_rows.iter().filter(|r| r.relation != Relation::Le).count();
        let artificial_start = num_structural + num_slack;
        let ncols = artificial_start + num_artificial;

        let mut a = vec![vec![0.0; ncols]; m];
        let mut b = vec![0.0; m];
        let mut initial_basis = vec![0usize; m];
        let mut next_slack = num_structural;
        let mut next_artificial = artificial_start;
        let mut row_origin = vec![None; m];
        for (i, row) in raw_rows.iter().enumerate() {
            a[i][..num_structural].copy_from_slice(&row.coeffs);
            b[i] = row.rhs;
            row_origin[i] = row.origin;
            match row.relation {
                Relation::Le => {
                    a[i][next_slack] = 1.0;
                    initial_basis[i] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    a[i][next_slack] = -1.0;
                    next_slack += 1;
                    a[i][next_artificial] = 1.0;
                    initial_basis[i] = next_artificial;
                    next_artificial += 1;
                }
                Relation::Eq => {
                    a[i][next_artificial] = 1.0;
                    initial_basis[i] = next_artificial;
                    next_artificial += 1;
                }
            }
        }

        let mut full_cost = vec![0.0; ncols];
        full_cost[..num_structural].copy_from_slice(&cost);

        Canonical {
            sense: lp.sense,
            orig_objective: lp.objective.clone(),
            var_map,
            num_structural,
            a,
            b,
            cost: full_cost,
            ncols,
            artificial_start,
            initial_basis,
            row_origin,
            row_flipped,
            num_orig_rows: lp.rows.len(),
        }
    }

    fn solve(&self, tol: f64, bland_only: bool) -> Result<LpSolution, LpError> {
        let m = self.a.len();
        let a_scale = self
            .a
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |acc, &v| acc.max(v.abs()));
        let b_scale = self.b.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        let eps_pivot = 1e-10 * (1.0 + a_scale);

        let mut tab: Vec<Vec<f64>> = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(row, &rhs)| {
                let mut t = row.clone();
                t.push(rhs);
                t
            })
            .collect();
        let mut basis = self.initial_basis.clone();

        // Phase 1: minimize the artificial mass.
        let phase1_cost: Vec<f64> = (0..self.ncols)
            .map(|j| if j >= self.artificial_start { 1.0 } else { 0.0 })
            .collect();
        let needs_phase1 = basis.iter().any(|&j| j >= self.artificial_start);
        if needs_phase1 {
            let outcome = simplex_loop(
                &mut tab,
                &mut basis,
                &phase1_cost,
                self.ncols,
                self.ncols, // nothing barred in phase 1
                eps_pivot,
                tol,
                bland_only,
            )?;
            if outcome == LoopOutcome::Unbounded {
                return Err(LpError::NumericalBreakdown(
                    "phase 1 reported an unbounded artificial objective".into(),
                ));
            }
            let art_mass: f64 = basis
                .iter()
                .zip(tab.iter())
                .filter(|(&j, _)| j >= self.artificial_start)
                .map(|(_, row)| row[self.ncols])
                .sum();
            if art_mass > 10.0 * tol * (1.0 + b_scale) {
                return Ok(LpSolution::Infeasible);
            }
            // Pivot remaining artificials out where a usable entry exists;
            // rows with none are redundant and keep a zero-level artificial.
            for i in 0..m {
                if basis[i] >= self.artificial_start {
                    if let Some(j) = (0..self.artificial_start)
                        .find(|&j| !basis.contains(&j) && tab[i][j].abs() > eps_pivot)
                    {
                        pivot(&mut tab, &mut basis, i, j);
                    }
                }
            }
        }

        // Phase 2: the real objective, artificial columns barred.
        let outcome = simplex_loop(
            &mut tab,
            &mut basis,
            &self.cost,
            self.ncols,
            self.artificial_start,
            eps_pivot,
            tol,
            bland_only,
        )?;
        if outcome == LoopOutcome::Unbounded {
            return Ok(LpSolution::Unbounded);
        }

        self.extract(&basis, tol)
    }

    /// Re-derive the solution from the original data for the final basis and
    /// verify every certificate.
    fn extract(&self, basis: &[usize], tol: f64) -> Result<LpSolution, LpError> {
        let m = self.a.len();
        let bmat: Vec<Vec<f64>> =
            (0..m).map(|i| basis.iter().map(|&j| self.a[i][j]).collect()).collect();
        let x_basic = gauss_solve(&bmat, &self.b).ok_or_else(|| {
            LpError::NumericalBreakdown("singular basis matrix in extraction".into())
        })?;
        let c_basic: Vec<f64> = basis.iter().map(|&j| self.cost[j]).collect();
        let bt: Vec<Vec<f64>> =
            (0..m).map(|i| (0..m).map(|k| bmat[k][i]).collect()).collect();
        let y = gauss_solve(&bt, &c_basic).ok_or_else(|| {
            LpError::NumericalBreakdown("singular transposed basis in extraction".into())
        })?;

        let mut x = vec![0.0; self.ncols];
        for (i, &j) in basis.iter().enumerate() {
            x[j] = x_basic[i];
        }

        let b_scale = self.b.iter().fold(1.0f64, |acc, &v| acc.max(v.abs()));
        let x_scale = x.iter().fold(1.0f64, |acc, &v| acc.max(v.abs()));
        let y_scale = y.iter().fold(1.0f64, |acc, &v| acc.max(v.abs()));
        let c_scale = self.cost.iter().fold(1.0f64, |acc, &v| acc.max(v.abs()));
        let eps = 10.0 * tol;

        // Primal feasibility.
        for &v in &x {
            if v < -eps * x_scale {
                return Err(LpError::NumericalBreakdown(format!(
                    "negative basic value {v} in extraction"
                )));
            }
        }
        for i in 0..m {
            let lhs: f64 = self.a[i].iter().zip(&x).map(|(aij, xj)| aij * xj).sum();
            if (lhs - self.b[i]).abs() > eps * (b_scale + x_scale) {
                return Err(LpError::NumericalBreakdown(format!(
                    "primal residual {} on row {i}",
                    lhs - self.b[i]
                )));
            }
        }
        // Artificial columns must carry no mass.
        for j in self.artificial_start..self.ncols {
            if x[j].abs() > eps * b_scale {
                return Err(LpError::NumericalBreakdown(
                    "artificial variable retained mass at optimum".into(),
                ));
            }
        }
        // Dual feasibility and complementary slackness.
        let mut gap_primal = 0.0;
        for (j, &xj) in x.iter().enumerate() {
            gap_primal += self.cost[j] * xj;
        }
        let mut gap_dual = 0.0;
        for i in 0..m {
            gap_dual += y[i] * self.b[i];
        }
        let gap = (gap_primal - gap_dual).abs();
        if gap > eps * (1.0 + gap_primal.abs() + gap_dual.abs()) {
            return Err(LpError::NumericalBreakdown(format!("duality gap {gap}")));
        }
        for j in 0..self.artificial_start {
            let reduced: f64 =
                self.cost[j] - (0..m).map(|i| self.a[i][j] * y[i]).sum::<f64>();
            if reduced < -eps * (c_scale + y_scale) {
                return Err(LpError::NumericalBreakdown(format!(
                    "dual infeasibility {reduced} at column {j}"
                )));
            }
            if (x[j] * reduced).abs() > eps * (1.0 + x_scale) * (c_scale + y_scale) {
                return Err(LpError::NumericalBreakdown(format!(
                    "complementary slackness residual at column {j}"
                )));
            }
        }

        // Map back to the caller's variables and rows.
        let n = self.orig_objective.len();
        let mut primal = vec![0.0; n];
        for (j, map) in self.var_map.iter().enumerate() {
            primal[j] = match *map {
                VarMap::Shift { col, lo } => lo + x[col].max(0.0),
                VarMap::Mirror { col, up } => up - x[col].max(0.0),
                VarMap::Split { pos, neg } => x[pos].max(0.0) - x[neg].max(0.0),
            };
        }
        let value: f64 =
            self.orig_objective.iter().zip(&primal).map(|(c, xj)| c * xj).sum();

        let negate = self.sense == Sense::Maximize;
        let mut dual = vec![0.0; self.num_orig_rows];
        for (i, origin) in self.row_origin.iter().enumerate() {
            if let Some(k) = *origin {
                let mut yi = y[i];
                if self.row_flipped[i] {
                    yi = -yi;
                }
                if negate {
                    yi = -yi;
                }
                dual[k] = yi;
            }
        }

        Ok(LpSolution::Optimal(OptimalLp { value, primal, dual, gap }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LoopOutcome {
    Optimal,
    Unbounded,
}

/// Run the simplex loop on `tab` for the given cost vector. Columns at or
/// beyond `barred_from` never enter the basis. The reduced-cost row is
/// maintained incrementally; stalls flip the pivot rule over to Bland's.
#[allow(clippy::too_many_arguments)]
fn simplex_loop(
    tab: &mut [Vec<f64>],
    basis: &mut [usize],
    cost: &[f64],
    ncols: usize,
    barred_from: usize,
    eps_pivot: f64,
    tol: f64,
    bland_only: bool,
) -> Result<LoopOutcome, LpError> {
    let m = tab.len();
    let c_scale = cost.iter().fold(1.0f64, |acc, &v| acc.max(v.abs()));
    let eps_enter = (0.1 * tol * c_scale).max(1e-12);

    // Reduced costs r_j = c_j - c_B . T_j, refreshed from the tableau.
    let mut reduced: Vec<f64> = (0..ncols)
        .map(|j| {
            cost[j]
                - (0..m)
                    .map(|i| cost[basis[i]] * tab[i][j])
                    .sum::<f64>()
        })
        .collect();

    let mut bland = bland_only;
    let mut stall = 0usize;
    let mut last_obj = f64::INFINITY;
    let max_iter = 2000 + 200 * (m + ncols);

    for _ in 0..max_iter {
        // Entering column.
        let mut entering: Option<usize> = None;
        if bland {
            for (j, &r) in reduced.iter().enumerate().take(barred_from) {
                if r < -eps_enter && !basis.contains(&j) {
                    entering = Some(j);
                    break;
                }
            }
        } else {
            let mut best = -eps_enter;
            for (j, &r) in reduced.iter().enumerate().take(barred_from) {
                if r < best && !basis.contains(&j) {
                    best = r;
                    entering = Some(j);
                }
            }
        }
        let Some(enter) = entering else {
            return Ok(LoopOutcome::Optimal);
        };

        // Ratio test; ties resolved toward the lowest basic variable index.
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            let aij = tab[i][enter];
            if aij > eps_pivot {
                let ratio = tab[i][ncols] / aij;
                let better = match leave {
                    None => true,
                    Some(cur) => {
                        ratio < best_ratio - 1e-12 * (1.0 + best_ratio.abs())
                            || (ratio <= best_ratio + 1e-12 * (1.0 + best_ratio.abs())
                                && basis[i] < basis[cur])
                    }
                };
                if better {
                    best_ratio = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(leave) = leave else {
            return Ok(LoopOutcome::Unbounded);
        };

        pivot_with_reduced(tab, basis, &mut reduced, leave, enter, ncols);

        // Stall detection: no objective progress for a while switches the
        // pivot rule to Bland's, which cannot cycle.
        let obj: f64 = (0..m).map(|i| cost[basis[i]] * tab[i][ncols]).sum();
        if obj < last_obj - 1e-13 * (1.0 + last_obj.abs()) {
            last_obj = obj;
            stall = 0;
        } else {
            stall += 1;
            if stall > 50 {
                bland = true;
            }
        }
    }
    Err(LpError::NumericalBreakdown(format!(
        "simplex iteration limit {max_iter} exceeded"
    )))
}

fn pivot(tab: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let ncols = tab[0].len() - 1;
    let mut dummy = vec![0.0; ncols];
    pivot_with_reduced(tab, basis, &mut dummy, row, col, ncols);
}

fn pivot_with_reduced(
    tab: &mut [Vec<f64>],
    basis: &mut [usize],
    reduced: &mut [f64],
    row: usize,
    col: usize,
    ncols: usize,
) {
    let m = tab.len();
    let inv = 1.0 / tab[row][col];
    for v in tab[row].iter_mut() {
        *v *= inv;
    }
    tab[row][col] = 1.0;
    for i in 0..m {
        if i == row {
            continue;
        }
        let factor = tab[i][col];
        if factor != 0.0 {
            for j in 0..=ncols {
                tab[i][j] -= factor * tab[row][j];
            }
            tab[i][col] = 0.0;
        }
    }
    let rfac = reduced[col];
    if rfac != 0.0 {
        for j in 0..ncols {
            reduced[j] -= rfac * tab[row][j];
        }
        reduced[col] = 0.0;
    }
    basis[row] = col;
}

/// Gaussian elimination with partial pivoting; `None` on singular systems.
fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    for col in 0..n {
        let pivot_row = (col..n).max_by(|&i, &j| {
            m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap()
        })?;
        if m[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot_row);
        let inv = 1.0 / m[col][col];
        for i in (col + 1)..n {
            let factor = m[i][col] * inv;
            if factor != 0.0 {
                for j in col..=n {
                    m[i][j] -= factor * m[col][j];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = m[i][n];
        for j in (i + 1)..n {
            acc -= m[i][j] * x[j];
        }
        x[i] = acc / m[i][i];
        if !x[i].is_finite() {
            return None;
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn one_variable_box() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0);
        let sol = solve_lp(&lp, DEFAULT_LP_TOL).unwrap().expect_optimal("box");
        assert_close(sol.value, 1.0, 1e-9);
        assert_close(sol.primal[0], 1.0, 1e-9);
        assert_close(sol.dual[0], 1.0, 1e-9);
        assert!(sol.gap <= 1e-10);
    }

    #[test]
    fn simplex_face() {
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Le, 1.0);
        let sol = solve_lp(&lp, DEFAULT_LP_TOL).unwrap().expect_optimal("face");
        assert_close(sol.value, 1.0, 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x0 + 2 x1 subject to x0 + x1 = 1, x0 >= 0.25
        let mut lp = LinearProgram::minimize(vec![1.0, 2.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.add_constraint(vec![1.0, 0.0], Relation::Ge, 0.25);
        let sol = solve_lp(&lp, DEFAULT_LP_TOL).unwrap().expect_optimal("eq/ge");
        assert_close(sol.value, 1.0, 1e-9);
        assert_close(sol.primal[0], 1.0, 1e-9);
        assert_close(sol.primal[1], 0.0, 1e-9);
    }

    #[test]
    fn free_variables() {
        // max t subject to t <= x - 1, x <= 3, t free, x free.
        let mut lp = LinearProgram::maximize(vec![1.0, 0.0]);
        lp.free_var(0);
        lp.free_var(1);
        lp.add_constraint(vec![1.0, -1.0], Relation::Le, -1.0);
        lp.add_constraint(vec![0.0, 1.0], Relation::Le, 3.0);
        let sol = solve_lp(&lp, DEFAULT_LP_TOL).unwrap().expect_optimal("free");
        assert_close(sol.value, 2.0, 1e-9);
        assert_close(sol.primal[0], 2.0, 1e-9);
        assert_close(sol.primal[1], 3.0, 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0);
        lp.add_constraint(vec![1.0], Relation::Ge, 2.0);
        assert!(matches!(solve_lp(&lp, DEFAULT_LP_TOL).unwrap(), LpSolution::Infeasible));
    }

    #[test]
    fn detects_unbounded() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.add_constraint(vec![-1.0], Relation::Le, 0.0);
        assert!(matches!(solve_lp(&lp, DEFAULT_LP_TOL).unwrap(), LpSolution::Unbounded));
    }

    #[test]
    fn finite_upper_bounds() {
        let mut lp = LinearProgram::maximize(vec![2.0, 3.0]);
        lp.set_bounds(0, 0.0, 4.0);
        lp.set_bounds(1, 1.0, 2.0);
        let sol = solve_lp(&lp, DEFAULT_LP_TOL).unwrap().expect_optimal("bounds");
        assert_close(sol.value, 14.0, 1e-9);
    }

    #[test]
    fn mirror_variables() {
        // min x with x <= 5 and x >= -inf: unbounded below.
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, 5.0);
        assert!(matches!(solve_lp(&lp, DEFAULT_LP_TOL).unwrap(), LpSolution::Unbounded));
        // max x with the same bounds is 5.
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, 5.0);
        let sol = solve_lp(&lp, DEFAULT_LP_TOL).unwrap().expect_optimal("mirror");
        assert_close(sol.value, 5.0, 1e-9);
    }

    #[test]
    fn degenerate_program_terminates() {
        // Many redundant rows through the same vertex.
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        for k in 1..=6 {
            let k = k as f64;
            lp.add_constraint(vec![k, k], Relation::Le, k);
        }
        lp.add_constraint(vec![1.0, 0.0], Relation::Le, 1.0);
        let sol = solve_lp(&lp, DEFAULT_LP_TOL).unwrap().expect_optimal("degenerate");
        assert_close(sol.value, 1.0, 1e-9);
    }

    #[test]
    fn redundant_equalities_get_zero_duals() {
        // The second equality duplicates the first.
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0);
        let sol = solve_lp(&lp, DEFAULT_LP_TOL).unwrap().expect_optimal("redundant");
        assert_close(sol.value, 1.0, 1e-9);
        let dual_obj: f64 = sol.dual.iter().zip([1.0, 1.0]).map(|(y, b)| y * b).sum();
        assert_close(dual_obj, 1.0, 1e-8);
    }

    #[test]
    fn duals_certify_strong_duality() {
        let mut lp = LinearProgram::maximize(vec![3.0, 5.0]);
        lp.add_constraint(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.add_constraint(vec![0.0, 2.0], Relation::Le, 12.0);
        lp.add_constraint(vec![3.0, 2.0], Relation::Le, 18.0);
        let sol = solve_lp(&lp, DEFAULT_LP_TOL).unwrap().expect_optimal("dantzig classic");
        assert_close(sol.value, 36.0, 1e-8);
        let dual_obj: f64 =
            sol.dual.iter().zip([4.0, 12.0, 18.0]).map(|(y, b)| y * b).sum();
        assert_close(dual_obj, 36.0, 1e-7);
        assert!(sol.dual.iter().all(|&y| y >= -1e-9));
        assert!(sol.gap <= 1e-8);
    }

    #[test]
    fn no_rows_at_all() {
        let lp = LinearProgram::minimize(vec![1.0, 2.0]);
        let sol = solve_lp(&lp, DEFAULT_LP_TOL).unwrap().expect_optimal("trivial");
        assert_eq!(sol.value, 0.0);
        let lp = LinearProgram::maximize(vec![1.0]);
        assert!(matches!(solve_lp(&lp, DEFAULT_LP_TOL).unwrap(), LpSolution::Unbounded));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut lp = LinearProgram::minimize(vec![1.0, 2.0]);
        lp.add_constraint(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(
            solve_lp(&lp, DEFAULT_LP_TOL),
            Err(LpError::DimensionMismatch { row: 0, len: 1, expected: 2 })
        ));
    }

    #[test]
    fn identical_inputs_identical_outputs() {
        let mut lp = LinearProgram::maximize(vec![1.3, -0.4, 2.2]);
        lp.add_constraint(vec![1.0, 2.0, 1.0], Relation::Le, 4.0);
        lp.add_constraint(vec![0.5, -1.0, 2.0], Relation::Ge, -1.0);
        lp.add_constraint(vec![1.0, 1.0, 1.0], Relation::Eq, 2.0);
        let a = solve_lp(&lp, DEFAULT_LP_TOL).unwrap().expect_optimal("det a");
        let b = solve_lp(&lp, DEFAULT_LP_TOL).unwrap().expect_optimal("det b");
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.primal, b.primal);
        assert_eq!(a.dual, b.dual);
    }
}
