//! Line-search fixed point algorithms for nonexpansive mappings on ℝᵈ.
//!
//! The iteration `x_{n+1} = xₙ + αₙdₙ` searches for a fixed point of `T` with
//! step sizes chosen by Wolfe-type conditions on `‖x − T(x)‖²` and directions
//! built from the residual `x − T(x)` the way nonlinear conjugate gradient
//! methods build them from a gradient. Krasnosel'skiĭ–Mann iterations are
//! included as baselines, along with generators and a benchmark harness for
//! ball-constrained quadratic programs and generalized convex feasibility
//! problems.
//!
//! ```
//! use lsfp_core::harness::{gen_qp, initial_point};
//! use lsfp_core::{run_algorithm1, BetaKind, SolverConfig, Termination};
//!
//! let problem = gen_qp(50, 1).unwrap();
//! let map = problem.map().unwrap();
//! let x0 = initial_point(50, 1, 0).unwrap();
//! let config = SolverConfig { beta_kind: BetaKind::PrpPlus, ..SolverConfig::default() };
//! let run = run_algorithm1(&map, &x0, &config).unwrap();
//! assert_eq!(run.terminated_by, Termination::ResidualZero);
//! assert!(run.final_residual() <= 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod directions;
pub mod error;
pub mod harness;
pub mod linesearch;
pub mod mappings;
pub mod rng;
pub mod solver;
pub mod vector;

pub use directions::{beta, descent_check, next_direction, BetaKind, DirectionState};
pub use error::{Error, Result};
pub use harness::{
    gen_gcfp, gen_qp, run_experiment, satisfiability_rate, Algo, AlgoSpec, ExperimentConfig,
    ExperimentReport, ProblemInstance, ProblemKind,
};
pub use linesearch::{
    armijo_backtrack, armijo_potential, bisection_wolfe_search, conditions_hold, search_with_fallback,
    strong_wolfe_predicate, wolfe_armijo_predicate, wolfe_curvature_predicate, LineSearchConfig,
    LineSearchOutcome, SearchMode,
};
pub use mappings::{
    gcfp_objective, make_gcfp_map, make_projected_gradient_map, project_ball, qp_gradient, residual, Ball,
    DiagonalQuadratic, FixedPointMap,
};
pub use rng::Rng;
pub use solver::{
    rate_bound, run_algorithm1, run_km_armijo, run_km_constant, IterationRecord, KmConfig, RunResult,
    SolverConfig, Termination,
};
pub use vector::{axpy, dot, norm, Vector};
