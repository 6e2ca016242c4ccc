//! Classical Wasserstein distances between two discrete measures.
//!
//! `W_p(mu, nu)` is the minimal coupling cost under the ground distance
//! raised to the `p`, with the `1/p`-th root applied afterwards. The primal
//! goes through the network simplex on the union of supports; the order-1
//! dual maximizes `E_mu[phi] - E_nu[phi]` over 1-Lipschitz test functions
//! and the two sides agree, which the test suite exercises heavily.

use thiserror::Error;

use crate::lp::{
    solve_lp, solve_transport, FlowError, LinearProgram, LpError, LpSolution, Relation,
    DEFAULT_LP_TOL,
};
use crate::measure::{DiscreteMeasure, MeasureError, TestFunction};
use crate::numeric::{dpow, root_p};
use crate::space::same_space;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("measures live on different spaces")]
    SpaceMismatch,
    #[error("exponent {p} is invalid (need a finite p >= 1)")]
    InvalidExponent { p: f64 },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
}

/// An optimal coupling between two measures, with the rooted distance.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    plan: Vec<Vec<f64>>,
    cost_exponent: f64,
    value: f64,
}

impl TransportPlan {
    /// The coupling matrix over the full space.
    pub fn plan(&self) -> &[Vec<f64>] {
        &self.plan
    }

    pub fn cost_exponent(&self) -> f64 {
        self.cost_exponent
    }

    /// `W_p`, after the `1/p`-th root.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Row sums of the coupling (the source marginal).
    pub fn source_marginal(&self) -> Vec<f64> {
        self.plan.iter().map(|r| r.iter().sum()).collect()
    }

    /// Column sums of the coupling (the target marginal).
    pub fn target_marginal(&self) -> Vec<f64> {
        let m = self.plan.first().map_or(0, Vec::len);
        (0..m).map(|j| self.plan.iter().map(|r| r[j]).sum()).collect()
    }
}

/// A 1-Lipschitz test function attaining the order-1 dual.
#[derive(Debug, Clone)]
pub struct KantorovichPotential {
    phi: TestFunction,
}

impl KantorovichPotential {
    /// Wraps `phi`, insisting its Lipschitz constant is at most `1 + 1e-9`.
    pub fn new(phi: TestFunction) -> Result<Self, TransportError> {
        let lip = crate::measure::lipschitz_constant(&phi);
        if lip > 1.0 + 1e-9 {
            return Err(TransportError::NumericalBreakdown(format!(
                "dual witness has Lipschitz constant {lip}"
            )));
        }
        Ok(Self { phi })
    }

    pub fn phi(&self) -> &TestFunction {
        &self.phi
    }
}

/// `W_p(mu, nu)` together with an optimal coupling.
pub fn wasserstein(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
) -> Result<(f64, TransportPlan), TransportError> {
    wasserstein_with(mu, nu, p, DEFAULT_LP_TOL)
}

/// [`wasserstein`] at an explicit solver tolerance.
pub fn wasserstein_with(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    tol: f64,
) -> Result<(f64, TransportPlan), TransportError> {
    if !same_space(mu.space(), nu.space()) {
        return Err(TransportError::SpaceMismatch);
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(TransportError::InvalidExponent { p });
    }
    let space = mu.space();
    let n = space.len();

    // The coupling only needs the two supports; everything else is zero.
    let rows = mu.support();
    let cols = nu.support();
    let a: Vec<f64> = rows.iter().map(|&i| mu.weights()[i]).collect();
    let b: Vec<f64> = cols.iter().map(|&j| nu.weights()[j]).collect();
    let cost: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| cols.iter().map(|&j| dpow(space.distance(i, j), p)).collect())
        .collect();
    let sol = solve_transport(&cost, &a, &b, tol)?;

    let mut plan = vec![vec![0.0; n]; n];
    for (ri, &i) in rows.iter().enumerate() {
        for (cj, &j) in cols.iter().enumerate() {
            plan[i][j] = sol.plan[ri][cj];
        }
    }
    let value = root_p(sol.value, p);
    Ok((value, TransportPlan { plan, cost_exponent: p, value }))
}

/// `W_p` value only; skips materializing the full-space coupling.
pub(crate) fn wasserstein_value(
    space: &crate::space::SharedSpace,
    mu_weights: &[f64],
    nu_weights: &[f64],
    p: f64,
    tol: f64,
) -> Result<f64, TransportError> {
    let rows: Vec<usize> =
        (0..space.len()).filter(|&i| mu_weights[i] > 0.0).collect();
    let cols: Vec<usize> =
        (0..space.len()).filter(|&j| nu_weights[j] > 0.0).collect();
    let a: Vec<f64> = rows.iter().map(|&i| mu_weights[i]).collect();
    let b: Vec<f64> = cols.iter().map(|&j| nu_weights[j]).collect();
    let cost: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| cols.iter().map(|&j| dpow(space.distance(i, j), p)).collect())
        .collect();
    let sol = solve_transport(&cost, &a, &b, tol)?;
    Ok(root_p(sol.value, p))
}

/// The order-1 dual: maximize `E_mu[phi] - E_nu[phi]` over test functions
/// with Lipschitz constant at most 1. Returns the value and an attaining
/// potential, shifted so that `phi(0) = 0`.
pub fn kr_dual(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<(f64, KantorovichPotential), TransportError> {
    kr_dual_with(mu, nu, DEFAULT_LP_TOL)
}

/// [`kr_dual`] at an explicit solver tolerance.
pub fn kr_dual_with(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    tol: f64,
) -> Result<(f64, KantorovichPotential), TransportError> {
    if !same_space(mu.space(), nu.space()) {
        return Err(TransportError::SpaceMismatch);
    }
    let space = mu.space();
    let n = space.len();

    // The dual value is decided on the union of the supports: any feasible
    // function there extends 1-Lipschitz to the whole space without touching
    // the objective.
    let mut union: Vec<usize> = (0..n)
        .filter(|&i| mu.weights()[i] > 0.0 || nu.weights()[i] > 0.0)
        .collect();
    if union.is_empty() {
        union.push(0);
    }
    let k = union.len();

    let objective: Vec<f64> =
        union.iter().map(|&i| mu.weights()[i] - nu.weights()[i]).collect();
    let mut lp = LinearProgram::maximize(objective);
    for v in 0..k {
        lp.free_var(v);
    }
    for x in 0..k {
        for y in (x + 1)..k {
            let d = space.distance(union[x], union[y]);
            let mut row = vec![0.0; k];
            row[x] = 1.0;
            row[y] = -1.0;
            lp.add_constraint(row.clone(), Relation::Le, d);
            row[x] = -1.0;
            row[y] = 1.0;
            lp.add_constraint(row, Relation::Le, d);
        }
    }
    // Pin the additive gauge; the objective pairs against two probability
    // measures, so constants do not matter.
    let mut pin = vec![0.0; k];
    pin[0] = 1.0;
    lp.add_constraint(pin, Relation::Eq, 0.0);

    let sol = match solve_lp(&lp, tol)? {
        LpSolution::Optimal(o) => o,
        other => {
            return Err(TransportError::NumericalBreakdown(format!(
                "dual program reported {other:?}"
            )))
        }
    };

    // McShane extension of the witness to every point, then shift so that
    // the value at point 0 is zero.
    let mut values = vec![0.0; n];
    for i in 0..n {
        values[i] = union
            .iter()
            .zip(&sol.primal)
            .map(|(&u, &phi_u)| phi_u + space.distance(i, u))
            .fold(f64::INFINITY, f64::min);
    }
    let shift = values[0];
    for v in &mut values {
        *v -= shift;
    }
    let phi = TestFunction::new(space.clone(), values)?;
    Ok((sol.value, KantorovichPotential::new(phi)?))
}
