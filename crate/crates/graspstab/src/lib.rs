//! Quasi-static stability analysis of robotic grasps with passive effects.
//!
//! A grasp holds an object through frictional point contacts driven by a hand
//! whose joints may be nonbackdrivable and underactuated. Given the geometry,
//! the commanded actuator torques, and an applied disturbance wrench, this
//! crate decides whether the grasp can passively remain in static equilibrium,
//! and answers the derived questions that follow from that test:
//!
//! - [`planar::planar_stability`]: exact planar analysis by enumerating
//!   contact states from a central plane arrangement and solving each
//!   resulting square system.
//! - [`relaxation::solve_with_refinement`]: spatial analysis as a mixed-integer
//!   feasibility problem over a piecewise-linearized friction cone that is
//!   hierarchically refined; the relaxation always contains the exact problem,
//!   so infeasibility at any refinement level is conclusive.
//! - [`iterative::iterative_ep`]: a movement-constrained iteration that tracks
//!   the net wrench instead of enforcing equilibrium outright.
//! - [`queries`]: stability checks, maximum resistible disturbance, actuator
//!   optimization, polar force maps, and a force-closure baseline.
//! - [`compliance`]: a linearized stiffness model of the closed grasp and a
//!   shield that projects commanded actions back into the safe set.
//!
//! Everything is backed by the small dense-simplex LP solver and
//! branch-and-bound MIP solver in [`solver`]; branching works directly on
//! indicator constraints and SOS2 sets, so no big-M constants appear anywhere.

pub mod compliance;
pub mod fixtures;
pub mod grasp;
pub mod io;
pub mod iterative;
pub mod planar;
pub mod queries;
pub mod relaxation;
pub mod spatial;
pub mod solver;

pub use compliance::{
    linearize, predict_state, shield_project, tilt_angles, ComplianceError, ComplianceModel,
    GraspState, LinearizedGrasp, SafeAction, ShieldConstraints, ShieldOutcome, DEFAULT_STEP_CAP,
    SHIELD_CONE_EDGES,
};
pub use grasp::{
    build_contact_frame, build_grasp_map, build_hand_jacobian, relative_contact_motion,
    ContactFrame, ContactSpec, EquilibriumSolution, GraspError, GraspModel, HandModel, Joint,
    PlanarContact, PlanarGrasp, SpatialGrasp,
};
pub use io::{canonical_json, parse_grasp_file, parse_grasp_str, GraspFile, IoError, SolveDefaults};
pub use planar::{complete_slip_states, enumerate_detach_states, enumerate_slip_states,
    planar_stability, solve_state, DetachState, PlanarOutcome, SlipState};
pub use iterative::{
    iterative_ep, movement_constrained_ep, IterativeConfig, IterativeError, IterativeOutcome,
};
pub use queries::{
    force_closure_check, force_map, max_disturbance, max_disturbance_traced, optimize_actuators,
    planar_force_map, planar_max_disturbance, stability_check, ActuatorOptimum, ActuatorOutcome,
    DisturbanceBound, MapPlane, MapRow, QueryConfig, QueryError, RowStatus, SolverChoice,
    StabilityVerdict, TorqueBound,
};
pub use relaxation::{
    solve_with_refinement, ContactCone, RefinementRecord, RelaxError, RelaxationConfig,
    RelaxationReport, RelaxedOutcome,
};
pub use spatial::{assemble_core_constraints, extract_solution, SpatialVariables, EPS_OPEN};
pub use solver::{
    solve_lp, solve_mip, Constraint, LinExpr, Model, Relation, Sense, SolveError, SolveResult,
    SolveStatus, SolverConfig, VarId,
};
