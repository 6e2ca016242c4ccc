//! Distances between finitely generated sets of measures.
//!
//! The distance between two sets is the larger of the two directed values
//!
//! ```text
//! sup over mu in P1 of inf over nu in P2 of W_p(mu, nu)
//! ```
//!
//! Convex hulls are never materialized: an infimum over a hull is one joint
//! linear program over a coupling and a mixture vector, and a supremum over
//! a hull reduces to the generators whenever the inner value is convex in
//! the measure (the inner LP value is, so the reduction is exact and is
//! property-tested). The one genuinely non-convex case, a hull source
//! against a raw target, is solved by a certified branch-and-bound over the
//! mixture simplex.
//!
//! For order 1 the module also computes the dual
//! `sup over 1-Lipschitz phi of |E^{P1}[phi] - E^{P2}[phi]|`, which equals
//! the distance on convexified sets and never exceeds it on raw ones.

use thiserror::Error;

use crate::lp::{
    solve_lp, FlowError, LinearProgram, LpError, LpSolution, Relation, DEFAULT_LP_TOL,
};
use crate::measure::{AmbiguitySet, DiscreteMeasure, MeasureError};
use crate::numeric::{dpow, root_p};
use crate::space::same_space;
use crate::transport::{wasserstein_value, TransportError};

/// Two inner values within this of each other count as a tie; ties are
/// broken toward the lowest generator index.
const WITNESS_TIE: f64 = 1e-9;

/// Membership gap below this counts as inside the hull.
pub const MEMBERSHIP_EPS: f64 = 1e-7;

/// Absolute certification tolerance of the hull-source search.
const SEARCH_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmbiguityError {
    #[error("sets live on different spaces")]
    SpaceMismatch,
    #[error("exponent {p} is invalid (need a finite p >= 1)")]
    InvalidExponent { p: f64 },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(
        "transport gap {transport_side} and dual supremum {dual_side} disagree beyond 1e-6"
    )]
    MinimaxGap { transport_side: f64, dual_side: f64 },
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
}

/// One directed sup-inf distance.
#[derive(Debug, Clone)]
pub struct DirectedDistanceReport {
    /// The directed distance, after the `1/p`-th root.
    pub value: f64,
    /// Index of the source generator attaining the supremum. When the
    /// source is a hull played against a raw target the supremum can land
    /// strictly inside the hull; the index then names the dominant
    /// component of the attaining mixture.
    pub witness_generator: usize,
    /// Mixture weights over the target generators attaining the infimum
    /// (one-hot when the target is raw).
    pub witness_mixture: Vec<f64>,
}

/// Both directed distances, their maximum, and optionally the order-1 dual.
#[derive(Debug, Clone)]
pub struct GeneralizedDistanceReport {
    pub forward: DirectedDistanceReport,
    pub backward: DirectedDistanceReport,
    /// `max(forward.value, backward.value)`.
    pub value: f64,
    pub p: f64,
    /// `sup over 1-Lipschitz phi of |E^{P1}[phi] - E^{P2}[phi]|`; present
    /// only when requested and `p = 1`.
    pub dual_value: Option<f64>,
}

/// Result of a hull membership query.
#[derive(Debug, Clone, Copy)]
pub struct MembershipReport {
    /// Whether the gap is below [`MEMBERSHIP_EPS`].
    pub member: bool,
    /// `inf over nu in conv(P) of W_1(mu, nu)`.
    pub gap: f64,
}

/// Directed distance `sup over source of inf over target of W_p`.
pub fn directed_distance(
    source: &AmbiguitySet,
    target: &AmbiguitySet,
    p: f64,
) -> Result<DirectedDistanceReport, AmbiguityError> {
    directed_distance_with(source, target, p, DEFAULT_LP_TOL)
}

/// [`directed_distance`] at an explicit solver tolerance.
pub fn directed_distance_with(
    source: &AmbiguitySet,
    target: &AmbiguitySet,
    p: f64,
    tol: f64,
) -> Result<DirectedDistanceReport, AmbiguityError> {
    if !same_space(source.space(), target.space()) {
        return Err(AmbiguityError::SpaceMismatch);
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(AmbiguityError::InvalidExponent { p });
    }

    if target.convexify() {
        // Inner infimum over the hull is a joint LP; the outer supremum is
        // attained at a source generator because the LP value is convex in
        // the source measure.
        let mut inner: Vec<(f64, Vec<f64>)> = Vec::with_capacity(source.generators().len());
        for g in source.generators() {
            inner.push(distance_to_hull(g.weights(), target, p, tol)?);
        }
        let value =
            inner.iter().map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);
        let witness_generator = inner
            .iter()
            .position(|(v, _)| *v >= value - WITNESS_TIE)
            .unwrap_or(0);
        let witness_mixture = inner[witness_generator].1.clone();
        return Ok(DirectedDistanceReport { value, witness_generator, witness_mixture });
    }

    let k = source.generators().len();
    if !source.convexify() || k == 1 {
        // Finite max over source generators of finite min over target
        // generators; plain pairwise transport values.
        let mut best = f64::NEG_INFINITY;
        let mut rows: Vec<(f64, usize)> = Vec::with_capacity(k);
        for g in source.generators() {
            let (v, j) = pairwise_min(g.weights(), target, p, tol)?;
            best = best.max(v);
            rows.push((v, j));
        }
        let witness_generator =
            rows.iter().position(|(v, _)| *v >= best - WITNESS_TIE).unwrap_or(0);
        let mut witness_mixture = vec![0.0; target.generators().len()];
        witness_mixture[rows[witness_generator].1] = 1.0;
        return Ok(DirectedDistanceReport {
            value: best,
            witness_generator,
            witness_mixture,
        });
    }

    // Hull source against a raw target: the inner minimum over finitely many
    // targets is not convex in the source measure, so the supremum may land
    // inside the hull. Certified Lipschitz branch-and-bound over the mixture
    // simplex.
    let (value, weights, inner_j) = maxmin_over_hull(source, target, p, tol)?;
    let witness_generator = weights
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.partial_cmp(b).unwrap().then(j.cmp(i)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut witness_mixture = vec![0.0; target.generators().len()];
    witness_mixture[inner_j] = 1.0;
    Ok(DirectedDistanceReport { value, witness_generator, witness_mixture })
}

/// The set distance `max` of the two directed values, with the order-1 dual
/// when `with_dual` is set and `p = 1`.
pub fn generalized_wasserstein(
    p1: &AmbiguitySet,
    p2: &AmbiguitySet,
    p: f64,
    with_dual: bool,
) -> Result<GeneralizedDistanceReport, AmbiguityError> {
    generalized_wasserstein_with(p1, p2, p, with_dual, DEFAULT_LP_TOL)
}

/// [`generalized_wasserstein`] at an explicit solver tolerance.
pub fn generalized_wasserstein_with(
    p1: &AmbiguitySet,
    p2: &AmbiguitySet,
    p: f64,
    with_dual: bool,
    tol: f64,
) -> Result<GeneralizedDistanceReport, AmbiguityError> {
    let forward = directed_distance_with(p1, p2, p, tol)?;
    let backward = directed_distance_with(p2, p1, p, tol)?;
    let value = forward.value.max(backward.value);
    let dual_value = if with_dual && p == 1.0 {
        Some(dual_distance_with(p1, p2, tol)?)
    } else {
        None
    };
    Ok(GeneralizedDistanceReport { forward, backward, value, p, dual_value })
}

/// `sup over 1-Lipschitz phi of |E^{P1}[phi] - E^{P2}[phi]|`, computed
/// exactly as a finite family of linear programs, one per generator.
///
/// Only the generators enter, so the value is invariant under
/// convexification of either set.
pub fn dual_distance(p1: &AmbiguitySet, p2: &AmbiguitySet) -> Result<f64, AmbiguityError> {
    dual_distance_with(p1, p2, DEFAULT_LP_TOL)
}

/// [`dual_distance`] at an explicit solver tolerance.
pub fn dual_distance_with(
    p1: &AmbiguitySet,
    p2: &AmbiguitySet,
    tol: f64,
) -> Result<f64, AmbiguityError> {
    if !same_space(p1.space(), p2.space()) {
        return Err(AmbiguityError::SpaceMismatch);
    }
    let union = support_union(&[p1, p2]);
    let mut best = 0.0f64;
    for g in p1.generators() {
        best = best.max(lipschitz_gap_sup(g.weights(), p2, &union, tol)?);
    }
    for g in p2.generators() {
        best = best.max(lipschitz_gap_sup(g.weights(), p1, &union, tol)?);
    }
    Ok(best)
}

/// Whether `mu_star` lies in the convex hull of `set`'s generators, with the
/// order-1 transport gap. The set is treated as convexified regardless of
/// its flag.
///
/// The dual side `sup over phi of (E_mu*[phi] - E^P[phi])` is computed as
/// well and must agree with the gap; a disagreement beyond `1e-6` is
/// reported as [`AmbiguityError::MinimaxGap`].
pub fn hull_membership(
    mu_star: &DiscreteMeasure,
    set: &AmbiguitySet,
) -> Result<MembershipReport, AmbiguityError> {
    hull_membership_with(mu_star, set, DEFAULT_LP_TOL)
}

/// [`hull_membership`] at an explicit solver tolerance.
pub fn hull_membership_with(
    mu_star: &DiscreteMeasure,
    set: &AmbiguitySet,
    tol: f64,
) -> Result<MembershipReport, AmbiguityError> {
    if !same_space(mu_star.space(), set.space()) {
        return Err(AmbiguityError::SpaceMismatch);
    }
    let (gap, _) = distance_to_hull(mu_star.weights(), set, 1.0, tol)?;
    let singleton = AmbiguitySet::singleton(mu_star.clone());
    let union = support_union(&[&singleton, set]);
    let dual_side = lipschitz_gap_sup(mu_star.weights(), set, &union, tol)?;
    if (gap - dual_side).abs() > 1e-6 {
        return Err(AmbiguityError::MinimaxGap { transport_side: gap, dual_side });
    }
    Ok(MembershipReport { member: gap <= MEMBERSHIP_EPS, gap })
}

/// Whether the two generator sets span the same convex hull: both directed
/// order-1 distances vanish under convexified semantics.
pub fn hull_equality(p1: &AmbiguitySet, p2: &AmbiguitySet) -> Result<bool, AmbiguityError> {
    hull_equality_with(p1, p2, DEFAULT_LP_TOL)
}

/// [`hull_equality`] at an explicit solver tolerance.
pub fn hull_equality_with(
    p1: &AmbiguitySet,
    p2: &AmbiguitySet,
    tol: f64,
) -> Result<bool, AmbiguityError> {
    let a = p1.with_convexify(true);
    let b = p2.with_convexify(true);
    let forward = directed_distance_with(&a, &b, 1.0, tol)?;
    if forward.value > MEMBERSHIP_EPS {
        return Ok(false);
    }
    let backward = directed_distance_with(&b, &a, 1.0, tol)?;
    Ok(backward.value <= MEMBERSHIP_EPS)
}

/// `inf over nu in conv(target) of W_p(mu, nu)` as one joint LP over the
/// coupling and the mixture weights, restricted to the relevant supports.
/// Returns the rooted value and the attaining mixture.
pub(crate) fn distance_to_hull(
    mu_weights: &[f64],
    target: &AmbiguitySet,
    p: f64,
    tol: f64,
) -> Result<(f64, Vec<f64>), AmbiguityError> {
    let space = target.space();
    let rows: Vec<usize> =
        (0..space.len()).filter(|&i| mu_weights[i] > 0.0).collect();
    let mut cols: Vec<usize> = Vec::new();
    for u in 0..space.len() {
        if target.generators().iter().any(|g| g.weights()[u] > 0.0) {
            cols.push(u);
        }
    }
    let k = target.generators().len();
    let ns = rows.len();
    let nu = cols.len();
    let n_vars = ns * nu + k;

    let mut objective = vec![0.0; n_vars];
    for (ri, &i) in rows.iter().enumerate() {
        for (cj, &j) in cols.iter().enumerate() {
            objective[ri * nu + cj] = dpow(space.distance(i, j), p);
        }
    }
    let mut lp = LinearProgram::minimize(objective);
    for (ri, &i) in rows.iter().enumerate() {
        let mut row = vec![0.0; n_vars];
        for cj in 0..nu {
            row[ri * nu + cj] = 1.0;
        }
        lp.add_constraint(row, Relation::Eq, mu_weights[i]);
    }
    for (cj, &j) in cols.iter().enumerate() {
        let mut row = vec![0.0; n_vars];
        for ri in 0..ns {
            row[ri * nu + cj] = 1.0;
        }
        for (t, g) in target.generators().iter().enumerate() {
            row[ns * nu + t] = -g.weights()[j];
        }
        lp.add_constraint(row, Relation::Eq, 0.0);
    }
    let mut simplex_row = vec![0.0; n_vars];
    for t in 0..k {
        simplex_row[ns * nu + t] = 1.0;
    }
    lp.add_constraint(simplex_row, Relation::Eq, 1.0);

    let sol = match solve_lp(&lp, tol)? {
        LpSolution::Optimal(o) => o,
        other => {
            return Err(AmbiguityError::NumericalBreakdown(format!(
                "hull distance program reported {other:?}"
            )))
        }
    };
    let mut mixture: Vec<f64> =
        sol.primal[ns * nu..].iter().map(|&w| w.max(0.0)).collect();
    let total: f64 = mixture.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(AmbiguityError::NumericalBreakdown(format!(
            "mixture mass {total} drifted from 1"
        )));
    }
    for w in &mut mixture {
        *w /= total;
    }
    Ok((root_p(sol.value, p), mixture))
}

/// Finite min over target generators of `W_p(mu, generator)`.
fn pairwise_min(
    mu_weights: &[f64],
    target: &AmbiguitySet,
    p: f64,
    tol: f64,
) -> Result<(f64, usize), AmbiguityError> {
    let space = target.space();
    let mut best = f64::INFINITY;
    let mut arg = 0usize;
    for (j, g) in target.generators().iter().enumerate() {
        let v = wasserstein_value(space, mu_weights, g.weights(), p, tol)?;
        if v < best {
            best = v;
            arg = j;
        }
    }
    Ok((best, arg))
}

/// `sup over 1-Lipschitz phi of (E_mu[phi] - max over target generators of
/// E_nu[phi])`, as one LP with an epigraph variable. Restricting the
/// Lipschitz ball to the union of supports is exact: any feasible function
/// there extends 1-Lipschitz to the full space without changing the
/// objective.
fn lipschitz_gap_sup(
    mu_weights: &[f64],
    target: &AmbiguitySet,
    union: &[usize],
    tol: f64,
) -> Result<f64, AmbiguityError> {
    let space = target.space();
    let k = union.len();
    // Variables: t, then phi at each union point.
    let mut objective = vec![0.0; k + 1];
    objective[0] = 1.0;
    let mut lp = LinearProgram::maximize(objective);
    for v in 0..=k {
        lp.free_var(v);
    }
    for g in target.generators() {
        let mut row = vec![0.0; k + 1];
        row[0] = 1.0;
        for (idx, &u) in union.iter().enumerate() {
            row[idx + 1] = -(mu_weights[u] - g.weights()[u]);
        }
        lp.add_constraint(row, Relation::Le, 0.0);
    }
    for x in 0..k {
        for y in (x + 1)..k {
            let d = space.distance(union[x], union[y]);
            let mut row = vec![0.0; k + 1];
            row[x + 1] = 1.0;
            row[y + 1] = -1.0;
            lp.add_constraint(row.clone(), Relation::Le, d);
            row[x + 1] = -1.0;
            row[y + 1] = 1.0;
            lp.add_constraint(row, Relation::Le, d);
        }
    }
    let mut pin = vec![0.0; k + 1];
    pin[1] = 1.0;
    lp.add_constraint(pin, Relation::Eq, 0.0);

    match solve_lp(&lp, tol)? {
        LpSolution::Optimal(o) => Ok(o.value),
        other => Err(AmbiguityError::NumericalBreakdown(format!(
            "Lipschitz gap program reported {other:?}"
        ))),
    }
}

/// Sorted union of the generator supports of several sets.
fn support_union(sets: &[&AmbiguitySet]) -> Vec<usize> {
    let n = sets[0].space().len();
    let mut mask = vec![false; n];
    for set in sets {
        for g in set.generators() {
            for (i, &w) in g.weights().iter().enumerate() {
                if w > 0.0 {
                    mask[i] = true;
                }
            }
        }
    }
    let mut union: Vec<usize> =
        mask.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i).collect();
    if union.is_empty() {
        union.push(0);
    }
    union
}

/// Certified maximization of `w -> min over target generators of
/// W_p(mixture(w), generator)` over the mixture simplex.
///
/// Deterministic branch-and-bound with simplicial cells. The bound uses
/// that moving mixture weight `delta` (l1) moves the mixture by at most
/// `D * (delta / 2)^{1/p}` in `W_p`, where `D` is the largest pairwise
/// distance between source generators. Returns the best value, the
/// attaining mixture, and the inner argmin.
fn maxmin_over_hull(
    source: &AmbiguitySet,
    target: &AmbiguitySet,
    p: f64,
    tol: f64,
) -> Result<(f64, Vec<f64>, usize), AmbiguityError> {
    let k = source.generators().len();
    let mut diameter = 0.0f64;
    for i in 0..k {
        for j in (i + 1)..k {
            let d = wasserstein_value(
                source.space(),
                source.generators()[i].weights(),
                source.generators()[j].weights(),
                p,
                tol,
            )?;
            diameter = diameter.max(d);
        }
    }

    let eval = |w: &[f64]| -> Result<(f64, usize), AmbiguityError> {
        let mix = source.mixture_weights(w);
        pairwise_min(&mix, target, p, tol)
    };

    let mut best_value = f64::NEG_INFINITY;
    let mut best_w = vec![0.0; k];
    let mut best_j = 0usize;

    let mut verts: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut vals: Vec<f64> = Vec::with_capacity(k);
    for i in 0..k {
        let mut w = vec![0.0; k];
        w[i] = 1.0;
        let (v, j) = eval(&w)?;
        if v > best_value {
            best_value = v;
            best_w = w.clone();
            best_j = j;
        }
        verts.push(w);
        vals.push(v);
    }

    // All generators coincide: the function is constant.
    if diameter <= 1e-15 {
        return Ok((best_value, best_w, best_j));
    }

    let bound = |l1_diam: f64| -> f64 { diameter * root_p(l1_diam / 2.0, p) + 1e-15 };
    let l1 = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    };
    let cell_diam = |vs: &[Vec<f64>]| -> f64 {
        let mut d = 0.0f64;
        for i in 0..vs.len() {
            for j in (i + 1)..vs.len() {
                d = d.max(l1(&vs[i], &vs[j]));
            }
        }
        d
    };

    struct Cell {
        verts: Vec<Vec<f64>>,
        vals: Vec<f64>,
        ub: f64,
        seq: usize,
    }
    let root_ub =
        vals.iter().fold(f64::INFINITY, |m, &v| m.min(v)) + bound(cell_diam(&verts));
    let mut heap: Vec<Cell> = vec![Cell { verts, vals, ub: root_ub, seq: 0 }];
    let mut seq = 1usize;
    let mut evals = k;
    const EVAL_BUDGET: usize = 200_000;

    while let Some(top_idx) = heap
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.ub.partial_cmp(&b.ub).unwrap().then(j.cmp(i)))
        .map(|(i, _)| i)
    {
        let cell = heap.swap_remove(top_idx);
        if cell.ub <= best_value + SEARCH_TOL {
            break;
        }
        if evals >= EVAL_BUDGET {
            let slack = cell.ub - best_value;
            if slack > 1e-6 {
                return Err(AmbiguityError::NumericalBreakdown(format!(
                    "hull search budget exhausted with certified slack {slack}"
                )));
            }
            break;
        }

        // Split the longest edge at its midpoint.
        let (mut ea, mut eb, mut longest) = (0usize, 1usize, -1.0f64);
        for i in 0..cell.verts.len() {
            for j in (i + 1)..cell.verts.len() {
                let d = l1(&cell.verts[i], &cell.verts[j]);
                if d > longest {
                    longest = d;
                    ea = i;
                    eb = j;
                }
            }
        }
        let mid: Vec<f64> = cell.verts[ea]
            .iter()
            .zip(&cell.verts[eb])
            .map(|(x, y)| 0.5 * (x + y))
            .collect();
        let (mid_val, mid_j) = eval(&mid)?;
        evals += 1;
        if mid_val > best_value {
            best_value = mid_val;
            best_w = mid.clone();
            best_j = mid_j;
        }

        for replace in [ea, eb] {
            let mut verts = cell.verts.clone();
            let mut vals = cell.vals.clone();
            verts[replace] = mid.clone();
            vals[replace] = mid_val;
            let ub = vals.iter().fold(f64::INFINITY, |m, &v| m.min(v))
                + bound(cell_diam(&verts));
            if ub > best_value + SEARCH_TOL {
                heap.push(Cell { verts, vals, ub, seq });
                seq += 1;
            }
        }
    }

    Ok((best_value, best_w, best_j))
}
