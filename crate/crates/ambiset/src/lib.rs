//! Wasserstein-type distances between finitely generated sets of discrete
//! probability measures, computed by exact linear programming.
//!
//! The crate works over an explicit finite metric space. On top of it:
//!
//! * [`measure`] holds discrete probability measures, test functions,
//!   finitely generated ambiguity sets, upper expectations and upper/lower
//!   probabilities.
//! * [`lp`] holds the optimization engines: a dense two-phase simplex and a
//!   network simplex for transportation problems. The two cross-validate
//!   each other.
//! * [`transport`] computes classical `W_p` distances between two measures,
//!   optimal couplings, and the order-1 dual over 1-Lipschitz test
//!   functions.
//! * [`ambiguity`] computes the set-level distance: the larger of the two
//!   directed sup-inf distances between generator sets, its order-1 dual,
//!   hull membership and hull equality.
//! * [`convergence`] runs sequence experiments: weak-convergence gaps,
//!   metrization reports, exponent equivalence, semicontinuity of upper
//!   probabilities, and the raw-versus-hull counterexample.
//! * [`io`] parses problem files and renders reports for the `ambiset`
//!   command-line tool.
//!
//! Every value is immutable after construction and all operations are pure
//! functions, so computations can run from concurrent tasks freely.

pub mod ambiguity;
pub mod convergence;
pub mod io;
pub mod lp;
pub mod measure;
mod numeric;
pub mod space;
pub mod transport;

pub use ambiguity::{
    directed_distance, dual_distance, generalized_wasserstein, hull_equality, hull_membership,
    AmbiguityError, DirectedDistanceReport, GeneralizedDistanceReport, MembershipReport,
};
pub use convergence::{
    build_family, build_family_on_grid, metrization_report, p_equivalence_check,
    remark_counterexample, semicontinuity_check, weak_convergence_gap, ConvergenceError,
    ConvergenceRule, CounterexampleReport, Family, MetrizationOptions, MetrizationReport,
    PEquivalenceReport, SetSequence,
};
pub use lp::{
    solve_lp, solve_transport, FlowError, LinearProgram, LpError, LpSolution, OptimalLp,
    Relation, Sense, TransportSolution, DEFAULT_LP_TOL,
};
pub use measure::{
    expectation, lipschitz_constant, lower_probability, sublinear_expectation,
    sublinear_expectation_with_witness, tail_functional, upper_probability, AmbiguitySet,
    DiscreteMeasure, MeasureError, TestFunction,
};
pub use space::{BasePoint, FiniteMetricSpace, SharedSpace, SpaceError, ValidationMode};
pub use transport::{kr_dual, wasserstein, KantorovichPotential, TransportError, TransportPlan};
