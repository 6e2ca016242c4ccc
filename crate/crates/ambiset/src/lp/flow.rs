//! Network simplex on the bipartite transportation problem.
//!
//! Minimizes `sum c[i][j] x[i][j]` over couplings with prescribed row and
//! column marginals. The basis is a spanning tree of the bipartite supply /
//! demand graph; pivots exchange one off-tree cell against a tree edge along
//! the unique induced cycle.
//!
//! Zero-mass atoms are dropped up front. The remaining marginals are
//! perturbed by a tiny epsilon to steer the method away from degenerate
//! ties; once an optimal tree is found the flows are recomputed on that tree
//! at the exact (unperturbed) marginals, entries below `1e-12` are zeroed,
//! and the plan, value and potentials are verified against the usual
//! optimality certificates before being returned.

use thiserror::Error;

/// Perturbation added per kept atom while pivoting. Only the choice of
/// optimal tree depends on it; the returned flows are recomputed exactly.
const PERTURBATION: f64 = 1e-13;

/// Plan entries below this are zeroed during cleanup.
const CLEANUP_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("cost matrix row {row} has length {len}, expected {expected}")]
    ShapeMismatch { row: usize, len: usize, expected: usize },
    #[error("cost[{i}][{j}] is not finite")]
    NonFiniteCost { i: usize, j: usize },
    #[error("{which} marginal entry {index} is negative ({value})")]
    NegativeMarginal { which: &'static str, index: usize, value: f64 },
    #[error("{which} marginal sums to {sum}, further than 1e-12 from 1")]
    MarginalMismatch { which: &'static str, sum: f64 },
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
}

/// An optimal transport plan with its dual potentials.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    /// Minimal total cost `sum c[i][j] plan[i][j]`.
    pub value: f64,
    /// Coupling with the prescribed marginals.
    pub plan: Vec<Vec<f64>>,
    /// Row potentials `f` with `f[i] + g[j] <= c[i][j]`, equality on the
    /// support of the plan.
    pub row_potentials: Vec<f64>,
    /// Column potentials `g`.
    pub col_potentials: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    row: usize,
    col: usize,
    flow: f64,
}

/// Solve the transportation problem for probability marginals.
pub fn solve_transport(
    cost: &[Vec<f64>],
    row_marginal: &[f64],
    col_marginal: &[f64],
    tol: f64,
) -> Result<TransportSolution, FlowError> {
    let n = row_marginal.len();
    let m = col_marginal.len();
    if cost.len() != n {
        return Err(FlowError::ShapeMismatch { row: 0, len: cost.len(), expected: n });
    }
    for (i, r) in cost.iter().enumerate() {
        if r.len() != m {
            return Err(FlowError::ShapeMismatch { row: i, len: r.len(), expected: m });
        }
        for (j, &c) in r.iter().enumerate() {
            if !c.is_finite() {
                return Err(FlowError::NonFiniteCost { i, j });
            }
        }
    }
    check_marginal("row", row_marginal)?;
    check_marginal("column", col_marginal)?;

    // Restrict to the supports; zero atoms are reinstated at the end.
    let rows: Vec<usize> = (0..n).filter(|&i| row_marginal[i] > 0.0).collect();
    let cols: Vec<usize> = (0..m).filter(|&j| col_marginal[j] > 0.0).collect();
    let a: Vec<f64> = rows.iter().map(|&i| row_marginal[i]).collect();
    let b: Vec<f64> = cols.iter().map(|&j| col_marginal[j]).collect();
    let c: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| cols.iter().map(|&j| cost[i][j]).collect())
        .collect();

    let restricted = solve_restricted(&c, &a, &b, tol)?;

    // Embed the restricted solution back into the full index set.
    let mut plan = vec![vec![0.0; m]; n];
    for (ri, &i) in rows.iter().enumerate() {
        for (rj, &j) in cols.iter().enumerate() {
            plan[i][j] = restricted.plan[ri][rj];
        }
    }
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    for (ri, &i) in rows.iter().enumerate() {
        f[i] = restricted.row_potentials[ri];
    }
    for (rj, &j) in cols.iter().enumerate() {
        g[j] = restricted.col_potentials[rj];
    }
    // Dropped atoms get the tightest potentials compatible with dual
    // feasibility; they carry no mass, so the dual objective is unchanged.
    for j in 0..m {
        if col_marginal[j] == 0.0 {
            g[j] = rows
                .iter()
                .map(|&i| cost[i][j] - f[i])
                .fold(f64::INFINITY, f64::min);
        }
    }
    for i in 0..n {
        if row_marginal[i] == 0.0 {
            f[i] = (0..m).map(|j| cost[i][j] - g[j]).fold(f64::INFINITY, f64::min);
        }
    }

    let cost_scale =
        cost.iter().flat_map(|r| r.iter()).fold(1.0f64, |acc, &v| acc.max(v.abs()));
    let eps_dual = 10.0 * tol * cost_scale;
    for i in 0..n {
        for j in 0..m {
            if f[i] + g[j] > cost[i][j] + eps_dual {
                return Err(FlowError::NumericalBreakdown(format!(
                    "dual infeasibility at cell ({i}, {j})"
                )));
            }
        }
    }

    Ok(TransportSolution {
        value: restricted.value,
        plan,
        row_potentials: f,
        col_potentials: g,
    })
}

fn check_marginal(which: &'static str, marginal: &[f64]) -> Result<(), FlowError> {
    for (index, &value) in marginal.iter().enumerate() {
        if !(value >= 0.0) {
            return Err(FlowError::NegativeMarginal { which, index, value });
        }
    }
    let sum: f64 = marginal.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(FlowError::MarginalMismatch { which, sum });
    }
    Ok(())
}

fn solve_restricted(
    cost: &[Vec<f64>],
    a: &[f64],
    b: &[f64],
    tol: f64,
) -> Result<TransportSolution, FlowError> {
    let n = a.len();
    let m = b.len();
    let cost_scale =
        cost.iter().flat_map(|r| r.iter()).fold(1.0f64, |acc, &v| acc.max(v.abs()));
    let eps_enter = 1e-11 * (1.0 + cost_scale);

    // Perturbed marginals used only while pivoting.
    let ap: Vec<f64> = a.iter().map(|&v| v + PERTURBATION).collect();
    let bp: Vec<f64> =
        b.iter().map(|&v| v + PERTURBATION * n as f64 / m as f64).collect();

    // Northwest-corner start: exactly n + m - 1 basic cells.
    let mut edges: Vec<Edge> = Vec::with_capacity(n + m - 1);
    let mut alive: Vec<bool> = Vec::with_capacity(n + m - 1);
    let mut basic = vec![vec![None::<usize>; m]; n];
    {
        let mut ra = ap.clone();
        let mut rb = bp.clone();
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let flow = ra[i].min(rb[j]);
            basic[i][j] = Some(edges.len());
            edges.push(Edge { row: i, col: j, flow });
            alive.push(true);
            ra[i] -= flow;
            rb[j] -= flow;
            if i + 1 == n && j + 1 == m {
                break;
            }
            if (ra[i] <= rb[j] && i + 1 < n) || j + 1 == m {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    // Node indexing: rows 0..n, columns n..n+m.
    let node_count = n + m;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); node_count];
    for (e, edge) in edges.iter().enumerate() {
        adj[edge.row].push(e);
        adj[n + edge.col].push(e);
    }

    let mut potentials = vec![0.0; node_count];
    let max_iter = 1000 + 200 * node_count * node_count;
    let mut bland = false;
    let mut degenerate_streak = 0usize;

    for iter in 0..max_iter {
        compute_potentials(&edges, &alive, &adj, cost, n, &mut potentials)?;

        // Entering cell: most negative reduced cost (Dantzig), falling back
        // to first-negative in lexicographic order (Bland) after a stall.
        let mut enter: Option<(usize, usize)> = None;
        let mut best = -eps_enter;
        'scan: for i in 0..n {
            for j in 0..m {
                if basic[i][j].is_some() {
                    continue;
                }
                let r = cost[i][j] - potentials[i] - potentials[n + j];
                if bland {
                    if r < -eps_enter {
                        enter = Some((i, j));
                        break 'scan;
                    }
                } else if r < best {
                    best = r;
                    enter = Some((i, j));
                }
            }
        }
        let Some((ei, ej)) = enter else {
            break;
        };
        if iter + 1 == max_iter {
            return Err(FlowError::NumericalBreakdown(
                "network simplex iteration limit exceeded".into(),
            ));
        }

        // Unique cycle: tree path from the entering column back to the
        // entering row; signs alternate starting with minus at the column.
        let path = tree_path(&adj, &alive, &edges, n, n + ej, ei).ok_or_else(|| {
            FlowError::NumericalBreakdown("basis lost tree connectivity".into())
        })?;
        let mut theta = f64::INFINITY;
        let mut leaving: Option<usize> = None;
        for (t, &e) in path.iter().enumerate() {
            if t % 2 == 0 && edges[e].flow < theta {
                theta = edges[e].flow;
                leaving = Some(e);
            }
        }
        let leaving = leaving.ok_or_else(|| {
            FlowError::NumericalBreakdown("pivot cycle carried no leaving edge".into())
        })?;

        for (t, &e) in path.iter().enumerate() {
            if t % 2 == 0 {
                edges[e].flow -= theta;
            } else {
                edges[e].flow += theta;
            }
        }

        // Swap basis: drop the leaving edge, insert the entering cell.
        let Edge { row: lr, col: lc, .. } = edges[leaving];
        alive[leaving] = false;
        basic[lr][lc] = None;
        adj[lr].retain(|&e| e != leaving);
        adj[n + lc].retain(|&e| e != leaving);
        let new_edge = edges.len();
        edges.push(Edge { row: ei, col: ej, flow: theta });
        alive.push(true);
        basic[ei][ej] = Some(new_edge);
        adj[ei].push(new_edge);
        adj[n + ej].push(new_edge);

        if theta <= 1e-15 {
            degenerate_streak += 1;
            if degenerate_streak > 100 {
                bland = true;
            }
        } else {
            degenerate_streak = 0;
        }
    }

    // Recompute flows on the optimal tree at the exact marginals.
    exact_tree_flows(&mut edges, &alive, &adj, a, b, n)?;

    let mut plan = vec![vec![0.0; m]; n];
    for (e, edge) in edges.iter().enumerate() {
        if !alive[e] {
            continue;
        }
        let mut flow = edge.flow;
        if flow < 0.0 {
            if flow < -1e-8 {
                return Err(FlowError::NumericalBreakdown(format!(
                    "tree flow {flow} negative beyond cleanup range"
                )));
            }
            flow = 0.0;
        }
        if flow < CLEANUP_EPS {
            flow = 0.0;
        }
        plan[edge.row][edge.col] = flow;
    }

    compute_potentials(&edges, &alive, &adj, cost, n, &mut potentials)?;
    let value: f64 = plan
        .iter()
        .enumerate()
        .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &x)| (i, j, x)))
        .map(|(i, j, x)| cost[i][j] * x)
        .sum();

    verify_restricted(cost, a, b, &plan, &potentials, n, m, value, tol)?;

    Ok(TransportSolution {
        value,
        plan,
        row_potentials: potentials[..n].to_vec(),
        col_potentials: potentials[n..].to_vec(),
    })
}

/// Propagate `u[0] = 0` through the basis tree: `u[i] + v[j] = c[i][j]` on
/// every tree cell.
fn compute_potentials(
    edges: &[Edge],
    alive: &[bool],
    adj: &[Vec<usize>],
    cost: &[Vec<f64>],
    n: usize,
    potentials: &mut [f64],
) -> Result<(), FlowError> {
    let node_count = potentials.len();
    let mut seen = vec![false; node_count];
    let mut stack = vec![0usize];
    potentials[0] = 0.0;
    seen[0] = true;
    let mut visited = 1usize;
    while let Some(u) = stack.pop() {
        for &e in &adj[u] {
            if !alive[e] {
                continue;
            }
            let Edge { row, col, .. } = edges[e];
            let other = if u == row { n + col } else { row };
            if !seen[other] {
                potentials[other] = cost[row][col] - potentials[u];
                seen[other] = true;
                visited += 1;
                stack.push(other);
            }
        }
    }
    if visited != node_count {
        return Err(FlowError::NumericalBreakdown(
            "basis tree does not span all atoms".into(),
        ));
    }
    Ok(())
}

/// Edges of the unique tree path from `start` to `goal`, in order.
fn tree_path(
    adj: &[Vec<usize>],
    alive: &[bool],
    edges: &[Edge],
    n: usize,
    start: usize,
    goal: usize,
) -> Option<Vec<usize>> {
    let node_count = adj.len();
    let mut parent_edge = vec![usize::MAX; node_count];
    let mut parent_node = vec![usize::MAX; node_count];
    let mut seen = vec![false; node_count];
    seen[start] = true;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        if u == goal {
            break;
        }
        for &e in &adj[u] {
            if !alive[e] {
                continue;
            }
            let Edge { row, col, .. } = edges[e];
            let other = if u == row { n + col } else { row };
            if !seen[other] {
                seen[other] = true;
                parent_edge[other] = e;
                parent_node[other] = u;
                queue.push_back(other);
            }
        }
    }
    if !seen[goal] {
        return None;
    }
    let mut path = Vec::new();
    let mut u = goal;
    while u != start {
        path.push(parent_edge[u]);
        u = parent_node[u];
    }
    path.reverse();
    Some(path)
}

/// Unique flows on the basis tree for the exact marginals, by repeatedly
/// peeling leaves.
fn exact_tree_flows(
    edges: &mut [Edge],
    alive: &[bool],
    adj: &[Vec<usize>],
    a: &[f64],
    b: &[f64],
    n: usize,
) -> Result<(), FlowError> {
    let node_count = adj.len();
    let mut degree = vec![0usize; node_count];
    let mut removed = vec![false; edges.len()];
    for (e, ok) in alive.iter().enumerate() {
        if *ok {
            degree[edges[e].row] += 1;
            degree[n + edges[e].col] += 1;
        }
    }
    let mut residual: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    let mut leaves: Vec<usize> =
        (0..node_count).filter(|&u| degree[u] == 1).collect();
    while let Some(u) = leaves.pop() {
        let Some(&e) = adj[u]
            .iter()
            .find(|&&e| alive[e] && !removed[e])
        else {
            continue;
        };
        let Edge { row, col, .. } = edges[e];
        let other = if u == row { n + col } else { row };
        edges[e].flow = residual[u];
        residual[other] -= residual[u];
        residual[u] = 0.0;
        removed[e] = true;
        degree[u] -= 1;
        degree[other] -= 1;
        if degree[other] == 1 {
            leaves.push(other);
        }
    }
    let worst = residual.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if worst > 1e-9 {
        return Err(FlowError::NumericalBreakdown(format!(
            "leftover marginal residual {worst} after tree flow recomputation"
        )));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn verify_restricted(
    cost: &[Vec<f64>],
    a: &[f64],
    b: &[f64],
    plan: &[Vec<f64>],
    potentials: &[f64],
    n: usize,
    m: usize,
    value: f64,
    tol: f64,
) -> Result<(), FlowError> {
    let cost_scale =
        cost.iter().flat_map(|r| r.iter()).fold(1.0f64, |acc, &v| acc.max(v.abs()));
    let eps_marginal = (10.0 * tol).max(1e-9);
    for (i, ai) in a.iter().enumerate() {
        let s: f64 = plan[i].iter().sum();
        if (s - ai).abs() > eps_marginal {
            return Err(FlowError::NumericalBreakdown(format!(
                "row marginal residual {} at row {i}",
                s - ai
            )));
        }
    }
    for (j, bj) in b.iter().enumerate() {
        let s: f64 = plan.iter().map(|r| r[j]).sum();
        if (s - bj).abs() > eps_marginal {
            return Err(FlowError::NumericalBreakdown(format!(
                "column marginal residual {} at column {j}",
                s - bj
            )));
        }
    }
    let eps_dual = 10.0 * tol * cost_scale;
    for i in 0..n {
        for j in 0..m {
            let r = cost[i][j] - potentials[i] - potentials[n + j];
            if r < -eps_dual {
                return Err(FlowError::NumericalBreakdown(format!(
                    "reduced cost {r} at cell ({i}, {j})"
                )));
            }
            if plan[i][j] > CLEANUP_EPS && r.abs() > eps_dual {
                return Err(FlowError::NumericalBreakdown(format!(
                    "complementary slackness violated at cell ({i}, {j})"
                )));
            }
        }
    }
    let dual_value: f64 = potentials[..n]
        .iter()
        .zip(a)
        .map(|(u, ai)| u * ai)
        .chain(potentials[n..].iter().zip(b).map(|(v, bj)| v * bj))
        .sum();
    if (value - dual_value).abs() > eps_dual * (1.0 + value.abs()) + 1e-12 {
        return Err(FlowError::NumericalBreakdown(format!(
            "transport duality gap {}",
            value - dual_value
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> Vec<f64> {
        vec![1.0 / n as f64; n]
    }

    #[test]
    fn identical_marginals_with_metric_cost_are_free() {
        let cost = vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ];
        let a = vec![0.2, 0.5, 0.3];
        let sol = solve_transport(&cost, &a, &a, 1e-9).unwrap();
        assert!(sol.value.abs() <= 1e-12);
        for (i, row) in sol.plan.iter().enumerate() {
            let s: f64 = row.iter().sum();
            assert!((s - a[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn point_mass_to_point_mass_costs_the_distance() {
        let cost = vec![vec![0.0, 7.5], vec![7.5, 0.0]];
        let sol = solve_transport(&cost, &[1.0, 0.0], &[0.0, 1.0], 1e-9).unwrap();
        assert!((sol.value - 7.5).abs() <= 1e-12);
        assert!((sol.plan[0][1] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn rectangular_instance() {
        let cost = vec![vec![1.0, 3.0, 5.0], vec![4.0, 2.0, 1.0]];
        let sol = solve_transport(&cost, &[0.6, 0.4], &[0.3, 0.3, 0.4], 1e-9).unwrap();
        // Optimal: row 0 covers columns 0 and 1, row 1 covers column 2.
        assert!((sol.value - (0.3 + 0.9 + 0.4)).abs() <= 1e-9);
    }

    #[test]
    fn potentials_certify_optimality() {
        let cost = vec![
            vec![2.0, 1.0, 3.0, 4.0],
            vec![1.0, 0.5, 2.0, 2.5],
            vec![3.0, 2.0, 0.5, 1.5],
            vec![4.0, 3.0, 1.0, 0.25],
        ];
        let a = vec![0.1, 0.4, 0.3, 0.2];
        let b = vec![0.25, 0.25, 0.25, 0.25];
        let sol = solve_transport(&cost, &a, &b, 1e-9).unwrap();
        let dual: f64 = sol
            .row_potentials
            .iter()
            .zip(&a)
            .map(|(f, x)| f * x)
            .chain(sol.col_potentials.iter().zip(&b).map(|(g, x)| g * x))
            .sum();
        assert!((sol.value - dual).abs() <= 1e-9);
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    sol.row_potentials[i] + sol.col_potentials[j] <= cost[i][j] + 1e-8
                );
                if sol.plan[i][j] > 1e-12 {
                    assert!(
                        (cost[i][j] - sol.row_potentials[i] - sol.col_potentials[j]).abs()
                            <= 1e-8
                    );
                }
            }
        }
    }

    #[test]
    fn zero_mass_atoms_are_handled() {
        let cost = vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ];
        let a = vec![0.5, 0.0, 0.5];
        let b = vec![0.0, 1.0, 0.0];
        let sol = solve_transport(&cost, &a, &b, 1e-9).unwrap();
        assert!((sol.value - 1.0).abs() <= 1e-9);
        assert_eq!(sol.plan[1], vec![0.0, 0.0, 0.0]);
        // Dual feasibility extends to the dropped atoms.
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    sol.row_potentials[i] + sol.col_potentials[j] <= cost[i][j] + 1e-8
                );
            }
        }
    }

    #[test]
    fn tiny_atoms_survive_cleanup() {
        let cost = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let eps = 5e-13;
        let a = vec![1.0 - eps, eps];
        let sol = solve_transport(&cost, &a, &a, 1e-9).unwrap();
        assert!(sol.value.abs() <= 1e-9);
        let s: f64 = sol.plan.iter().flat_map(|r| r.iter()).sum();
        assert!((s - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn constant_cost_shift_moves_value_by_the_constant() {
        let cost = vec![vec![0.3, 1.4], vec![0.9, 0.2]];
        let shifted: Vec<Vec<f64>> =
            cost.iter().map(|r| r.iter().map(|c| c + 2.5).collect()).collect();
        let a = vec![0.7, 0.3];
        let b = vec![0.4, 0.6];
        let base = solve_transport(&cost, &a, &b, 1e-9).unwrap();
        let moved = solve_transport(&shifted, &a, &b, 1e-9).unwrap();
        assert!((moved.value - base.value - 2.5).abs() <= 1e-9);
    }

    #[test]
    fn negative_costs_are_fine() {
        let cost = vec![vec![-1.0, 0.0], vec![0.0, -1.0]];
        let sol = solve_transport(&cost, &uniform(2), &uniform(2), 1e-9).unwrap();
        assert!((sol.value + 1.0).abs() <= 1e-9);
    }

    #[test]
    fn marginal_checks() {
        let cost = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(matches!(
            solve_transport(&cost, &[0.5, 0.6], &uniform(2), 1e-9),
            Err(FlowError::MarginalMismatch { which: "row", .. })
        ));
        assert!(matches!(
            solve_transport(&cost, &[1.5, -0.5], &uniform(2), 1e-9),
            Err(FlowError::NegativeMarginal { which: "row", index: 1, .. })
        ));
    }

    #[test]
    fn single_cell_problem() {
        let sol = solve_transport(&[vec![3.0]], &[1.0], &[1.0], 1e-9).unwrap();
        assert_eq!(sol.value, 3.0);
        assert_eq!(sol.plan, vec![vec![1.0]]);
    }

    #[test]
    fn deterministic_bit_for_bit() {
        let cost = vec![
            vec![0.11, 0.93, 0.27],
            vec![0.52, 0.18, 0.77],
            vec![0.33, 0.61, 0.05],
        ];
        let a = vec![0.25, 0.5, 0.25];
        let b = vec![0.4, 0.2, 0.4];
        let s1 = solve_transport(&cost, &a, &b, 1e-9).unwrap();
        let s2 = solve_transport(&cost, &a, &b, 1e-9).unwrap();
        assert_eq!(s1.value.to_bits(), s2.value.to_bits());
        assert_eq!(s1.plan, s2.plan);
        assert_eq!(s1.row_potentials, s2.row_potentials);
    }
}
