//! Linear programming engines.
//!
//! Two independent solvers live here: a dense two-phase primal simplex for
//! general small programs ([`solve_lp`]) and a network simplex specialized
//! to transportation problems ([`solve_transport`]). Optimal results carry
//! primal and dual certificates that are re-checked internally before being
//! returned, and the two solvers cross-validate each other in the test
//! suite.

mod dense;
mod flow;

pub use dense::{
    solve_lp, LinearProgram, LpError, LpSolution, OptimalLp, Relation, Sense, DEFAULT_LP_TOL,
};
pub use flow::{solve_transport, FlowError, TransportSolution};
