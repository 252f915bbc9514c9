//! Actuator and sensor selection for uncertain linear systems.
//!
//! The selection problem is a mixed-integer bilinear matrix inequality
//! program. This crate builds its conic relaxations and restrictions
//! ([`sdpr`], [`sca`]), the exact Big-M branch-and-bound ([`bigm`]), and
//! the slicing recovery that turns a fractional selection into a binary
//! one with a stabilizing gain ([`slicing`]).

pub mod bigm;
pub mod error;
pub mod lmi;
pub mod logistics;
pub mod method;
pub mod sca;
pub mod sdpr;
pub mod slicing;
pub mod system;

pub use error::CoreError;
pub use lmi::{
    assemble_multiperiod, build_fixed, build_linf_fixed_pi, build_lipschitz_observer, build_stabilization_feasibility,
    evaluate_objective, performance_index, solve_fixed, BoundDirection, BoundValue, FixedSolution, LinfDecision,
    Metric, Period, Point, ProblemKind, SelectionProblem, EPS1,
};
pub use logistics::{
    exclusion_constraint, fix_constraint, min_count_constraint, precedence_constraint, LogisticConstraints,
};
pub use system::{benchmark_spec, random_network, CpsSystem, MultiPeriodSpec, SelectionWeights, SystemFile};
