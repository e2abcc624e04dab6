//! A small, exact-arithmetic-free LP/MIP engine sized for grasp problems.
//!
//! The engine is deliberately minimal: a dense two-phase simplex for linear
//! programs and a best-bound branch-and-bound for mixed-integer models whose
//! only discrete features are binary variables, indicator constraints, and
//! SOS2 sets. Indicator constraints are branched on directly — fixing the
//! binary and enforcing (or dropping) the implied rows — so the usual big-M
//! reformulation and its conditioning problems never arise. Solutions are
//! deterministic for identical models: every choice (pricing, ratio ties,
//! branching order, node order) breaks ties by lowest variable index.

mod lp;
mod mip;
mod model;

pub use lp::solve_lp;
pub use mip::solve_mip;
pub use model::{
    write_lp, Constraint, Indicator, LinExpr, Model, Relation, Sense, SolveError, SolveResult,
    SolveStatus, SolverConfig, VarId,
};
