//! Grasp-level stability queries: pass/fail checks, worst-case disturbance
//! magnitudes, actuator effort optimization, polar force maps, and classic
//! wrench-space force closure.
//!
//! The quantitative queries run on either engine. The sector relaxation
//! answers them inside a single optimization — the disturbance scale or the
//! commanded torques become decision variables alongside the contact forces —
//! while the movement-constrained iterative scheme brackets magnitudes by
//! bisection over repeated stability checks. Because the relaxation always
//! contains the exact friction behavior, its magnitudes overestimate slightly
//! at coarse resolutions and tighten monotonically as sectors refine.

use std::cell::{Cell, RefCell};

use nalgebra::{DVector, Vector3, Vector6};
use rayon::prelude::*;
use thiserror::Error;

use crate::grasp::{
    build_contact_frame, EquilibriumSolution, GraspError, GraspModel, PlanarGrasp, SpatialGrasp,
};
use crate::iterative::{iterative_ep, IterativeConfig, IterativeError, IterativeOutcome};
use crate::planar::planar_stability;
use crate::relaxation::{
    assemble_relaxed, refine_loop, ContactCone, QueryHooks, RelaxError, RelaxationConfig,
    RelaxationReport, RelaxedOutcome,
};
use crate::solver::{
    solve_mip, LinExpr, Model, Relation, Sense, SolveError, SolverConfig, VarId,
};

/// Which stability engine evaluates a query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverChoice {
    /// Sector relaxation with adaptive refinement (the default engine).
    Relaxation,
    /// Movement-constrained iterative equilibrium tracking.
    Iterative,
}

/// Result of a single stability check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabilityVerdict {
    Stable,
    Unstable,
    /// The engine exhausted its iteration budget without deciding.
    NotConverged,
}

/// Shared tuning for the quantitative queries.
#[derive(Clone, Debug)]
pub struct QueryConfig {
    /// Settings for the relaxation engine, including the normal-uncertainty
    /// half-angle `eta` used by robust queries.
    pub relaxation: RelaxationConfig,
    /// Settings for the iterative engine (which has no robust mode).
    pub iterative: IterativeConfig,
    /// Largest disturbance magnitude searched, in newtons. Grasps that still
    /// resist this much are reported as unbounded above the cap.
    pub cap: f64,
    /// Bisection tolerance, in newtons, for bounds computed by the iterative
    /// engine.
    pub tolerance: f64,
}

impl Default for QueryConfig {
    fn default() -> Self {
        Self {
            relaxation: RelaxationConfig::default(),
            iterative: IterativeConfig::default(),
            cap: 1e3,
            tolerance: 1e-2,
        }
    }
}

#[derive(Debug, Error)]
pub enum QueryError {
    #[error(transparent)]
    Grasp(#[from] GraspError),
    #[error(transparent)]
    Relaxation(#[from] RelaxError),
    #[error(transparent)]
    Iterative(#[from] IterativeError),
    #[error("probe solve failed: {0}")]
    Solver(#[from] SolveError),
    #[error("query configuration: {0}")]
    Config(String),
}

/// Decides whether the grasp passively holds the applied wrench `w` under the
/// commanded torques `f_c`.
///
/// With [`SolverChoice::Relaxation`] an infeasible answer is conclusive for
/// the exact problem; a feasible one is subject to the configured resolution.
/// The iterative engine instead reports how the tracked net wrench behaved,
/// including an explicit [`StabilityVerdict::NotConverged`].
pub fn stability_check(
    grasp: &SpatialGrasp,
    f_c: &[f64],
    w: &Vector6<f64>,
    choice: SolverChoice,
    cfg: &QueryConfig,
) -> Result<StabilityVerdict, QueryError> {
    match choice {
        SolverChoice::Relaxation => {
            match crate::relaxation::solve_with_refinement(grasp, w, f_c, &cfg.relaxation) {
                Ok(report) => Ok(if report.is_feasible() {
                    StabilityVerdict::Stable
                } else {
                    StabilityVerdict::Unstable
                }),
                Err(RelaxError::IterationLimit(_)) => Ok(StabilityVerdict::NotConverged),
                Err(e) => Err(e.into()),
            }
        }
        SolverChoice::Iterative => {
            if grasp.contacts.is_empty() {
                // Nothing touches the object: only the zero wrench holds.
                return Ok(if w.norm() <= cfg.iterative.stability_residual {
                    StabilityVerdict::Stable
                } else {
                    StabilityVerdict::Unstable
                });
            }
            Ok(match iterative_ep(grasp, f_c, w, &cfg.iterative)? {
                IterativeOutcome::Stable(_) => StabilityVerdict::Stable,
                IterativeOutcome::Unstable { .. } => StabilityVerdict::Unstable,
                IterativeOutcome::NotConverged { .. } => StabilityVerdict::NotConverged,
            })
        }
    }
}

/// Largest magnitude along a fixed disturbance direction that a grasp
/// resists.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DisturbanceBound {
    /// Largest feasible magnitude found, in newtons.
    Bounded(f64),
    /// Still feasible at the search cap; the grasp resists this direction
    /// passively at any sampled magnitude.
    UnboundedAboveCap(f64),
    /// The grasp cannot hold even the zero wrench under these commands.
    Infeasible,
}

impl DisturbanceBound {
    /// The magnitude this bound certifies as resistible (zero when the rest
    /// state itself is infeasible).
    pub fn magnitude(&self) -> f64 {
        match *self {
            DisturbanceBound::Bounded(s) => s,
            DisturbanceBound::UnboundedAboveCap(cap) => cap,
            DisturbanceBound::Infeasible => 0.0,
        }
    }
}

/// Maximum resistible disturbance along the unit wrench `direction`.
///
/// The relaxation engine maximizes the scale in one solve; the iterative
/// engine bisects between the rest state and the cap to the configured
/// tolerance, counting a non-converged check as unstable.
pub fn max_disturbance(
    grasp: &SpatialGrasp,
    f_c: &[f64],
    direction: &Vector6<f64>,
    choice: SolverChoice,
    cfg: &QueryConfig,
) -> Result<DisturbanceBound, QueryError> {
    check_direction(direction.norm())?;
    if cfg.cap <= 0.0 {
        return Err(QueryError::Config("search cap must be positive".into()));
    }
    match choice {
        SolverChoice::Relaxation => Ok(max_disturbance_traced(grasp, f_c, direction, cfg)?.0),
        SolverChoice::Iterative => bisect_max_disturbance(grasp, f_c, direction, cfg),
    }
}

/// Relaxation-engine disturbance maximization that also returns the full
/// refinement trace, for tooling that inspects per-round objectives.
pub fn max_disturbance_traced(
    grasp: &SpatialGrasp,
    f_c: &[f64],
    direction: &Vector6<f64>,
    cfg: &QueryConfig,
) -> Result<(DisturbanceBound, RelaxationReport), QueryError> {
    check_direction(direction.norm())?;
    if !grasp.contacts.is_empty() {
        grasp.validate()?;
    }
    let rc = &cfg.relaxation;
    let zero = Vector6::zeros();
    // The scale variable is re-created each refinement round; the cell hands
    // its id from the build closure to the wrench-extraction closure.
    let scale: Cell<VarId> = Cell::new(0);
    let mut build = |model: &mut Model, cones: &[ContactCone]| {
        let s = model.add_var(0.0, cfg.cap);
        scale.set(s);
        let mut load = |_: &mut Model, row: usize, e: LinExpr| e.plus(s, direction[row]);
        let out = assemble_relaxed(
            model,
            grasp,
            cones,
            rc.eta,
            rc.enforce_mdp,
            &zero,
            f_c,
            QueryHooks {
                equilibrium_row: Some(&mut load),
                commanded: None,
            },
        )?;
        model.set_objective(Sense::Maximize, LinExpr::term(s, 1.0));
        Ok(out)
    };
    let report = refine_loop(grasp, rc, &mut build, &mut |res, _| {
        direction * res.x[scale.get()]
    })?;
    let bound = match report.outcome {
        RelaxedOutcome::Infeasible => DisturbanceBound::Infeasible,
        RelaxedOutcome::Feasible(_) => {
            let s = report.objective.unwrap_or(0.0);
            if s >= cfg.cap * (1.0 - 1e-9) {
                DisturbanceBound::UnboundedAboveCap(cfg.cap)
            } else {
                DisturbanceBound::Bounded(s)
            }
        }
    };
    Ok((bound, report))
}

fn bisect_max_disturbance(
    grasp: &SpatialGrasp,
    f_c: &[f64],
    direction: &Vector6<f64>,
    cfg: &QueryConfig,
) -> Result<DisturbanceBound, QueryError> {
    if grasp.contacts.is_empty() {
        return Ok(DisturbanceBound::Bounded(0.0));
    }
    let stable_at = |s: f64| -> Result<bool, QueryError> {
        let w = direction * s;
        Ok(matches!(
            iterative_ep(grasp, f_c, &w, &cfg.iterative)?,
            IterativeOutcome::Stable(_)
        ))
    };
    if !stable_at(0.0)? {
        return Ok(DisturbanceBound::Infeasible);
    }
    if stable_at(cfg.cap)? {
        return Ok(DisturbanceBound::UnboundedAboveCap(cfg.cap));
    }
    let (mut lo, mut hi) = (0.0, cfg.cap);
    while hi - lo > cfg.tolerance {
        let mid = 0.5 * (lo + hi);
        if stable_at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DisturbanceBound::Bounded(lo))
}

/// Extra linear restriction on the commanded torques: `coeffs · τ  rel  rhs`.
#[derive(Clone, Debug)]
pub struct TorqueBound {
    pub coeffs: Vec<f64>,
    pub rel: Relation,
    pub rhs: f64,
}

/// Result of [`optimize_actuators`].
#[derive(Clone, Debug)]
pub struct ActuatorOptimum {
    /// Commanded torque per actuator at the optimum.
    pub commanded: DVector<f64>,
    /// The minimized peak commanded torque.
    pub objective: f64,
    /// Equilibrium state realized by the optimal commands.
    pub solution: EquilibriumSolution,
}

#[derive(Clone, Debug)]
pub enum ActuatorOutcome {
    Optimal(ActuatorOptimum),
    /// No nonnegative command keeps the grasp in equilibrium under the load.
    Infeasible,
}

/// Finds nonnegative commanded torques minimizing the peak command while the
/// grasp holds `w`, optionally subject to extra linear torque bounds.
///
/// Runs on the relaxation engine only: the commands enter the model as
/// decision variables, replacing the fixed preloads in both actuator
/// branches, with an epigraph variable on top.
pub fn optimize_actuators(
    grasp: &SpatialGrasp,
    w: &Vector6<f64>,
    bounds: &[TorqueBound],
    cfg: &QueryConfig,
) -> Result<ActuatorOutcome, QueryError> {
    if !grasp.contacts.is_empty() {
        grasp.validate()?;
    }
    let actuators = grasp.actuator_count();
    for b in bounds {
        if b.coeffs.len() != actuators {
            return Err(QueryError::Config(format!(
                "torque bound has {} coefficients for {} actuators",
                b.coeffs.len(),
                actuators
            )));
        }
    }
    let rc = &cfg.relaxation;
    let rest = vec![0.0; actuators];
    let command_ids: RefCell<Vec<VarId>> = RefCell::new(Vec::new());
    let command_vals: RefCell<DVector<f64>> = RefCell::new(DVector::zeros(actuators));
    let mut build = |model: &mut Model, cones: &[ContactCone]| {
        command_ids.borrow_mut().clear();
        let mut free_command = |model: &mut Model, _al: usize, lhs: LinExpr, _rhs: f64| {
            let tau = model.add_var(0.0, f64::INFINITY);
            command_ids.borrow_mut().push(tau);
            (lhs.plus(tau, -1.0), 0.0)
        };
        let out = assemble_relaxed(
            model,
            grasp,
            cones,
            rc.eta,
            rc.enforce_mdp,
            w,
            &rest,
            QueryHooks {
                equilibrium_row: None,
                commanded: Some(&mut free_command),
            },
        )?;
        let peak = model.add_var(0.0, f64::INFINITY);
        for &tau in command_ids.borrow().iter() {
            model.add_constraint(
                LinExpr::term(tau, 1.0).plus(peak, -1.0),
                Relation::Le,
                0.0,
            );
        }
        for b in bounds {
            let mut expr = LinExpr::new();
            for (&tau, &coeff) in command_ids.borrow().iter().zip(&b.coeffs) {
                expr.add(tau, coeff);
            }
            model.add_constraint(expr, b.rel, b.rhs);
        }
        model.set_objective(Sense::Minimize, LinExpr::term(peak, 1.0));
        Ok(out)
    };
    let report = refine_loop(grasp, rc, &mut build, &mut |res, _| {
        let ids = command_ids.borrow();
        let mut vals = DVector::zeros(actuators);
        for (j, &id) in ids.iter().enumerate() {
            vals[j] = res.x[id];
        }
        *command_vals.borrow_mut() = vals;
        *w
    })?;
    Ok(match report.outcome {
        RelaxedOutcome::Infeasible => ActuatorOutcome::Infeasible,
        RelaxedOutcome::Feasible(solution) => ActuatorOutcome::Optimal(ActuatorOptimum {
            commanded: command_vals.into_inner(),
            objective: report.objective.unwrap_or(0.0),
            solution: *solution,
        }),
    })
}

/// Row of a polar force map.
#[derive(Clone, Copy, Debug)]
pub struct MapRow {
    pub angle_deg: f64,
    /// Largest resistible magnitude (the cap for capped rows, zero when the
    /// rest state is infeasible or the row errored).
    pub magnitude: f64,
    pub status: RowStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    /// Feasible at the search cap.
    Capped,
    /// The row's solve failed; its magnitude is meaningless.
    Error,
}

/// Polar sampling plane for [`force_map`]: the probed direction rotates from
/// `u` (at 0°) toward `v` (at 90°) in `step_deg` increments over the full
/// circle.
#[derive(Clone, Debug)]
pub struct MapPlane {
    pub u: Vector6<f64>,
    pub v: Vector6<f64>,
    pub step_deg: f64,
}

impl MapPlane {
    /// Force plane spanned by x̂ and ŷ at 1° spacing.
    pub fn xy() -> Self {
        let mut u = Vector6::zeros();
        let mut v = Vector6::zeros();
        u[0] = 1.0;
        v[1] = 1.0;
        Self {
            u,
            v,
            step_deg: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        if (self.u.norm() - 1.0).abs() > 1e-6 || (self.v.norm() - 1.0).abs() > 1e-6 {
            return Err(QueryError::Config("map plane basis must be unit".into()));
        }
        if self.u.dot(&self.v).abs() > 1e-6 {
            return Err(QueryError::Config("map plane basis must be orthogonal".into()));
        }
        if !(self.step_deg > 0.0) {
            return Err(QueryError::Config("angular step must be positive".into()));
        }
        let rows = 360.0 / self.step_deg;
        if (rows - rows.round()).abs() > 1e-9 {
            return Err(QueryError::Config(
                "angular step must divide 360 degrees".into(),
            ));
        }
        Ok(())
    }

    /// Number of rows the plane samples.
    pub fn rows(&self) -> usize {
        (360.0 / self.step_deg).round() as usize
    }

    /// Unit direction probed at row `i`.
    pub fn direction(&self, i: usize) -> Vector6<f64> {
        let t = (i as f64 * self.step_deg).to_radians();
        self.u * t.cos() + self.v * t.sin()
    }
}

/// Sweeps [`max_disturbance`] around a plane of directions.
///
/// Rows evaluate concurrently and independently; a failure in one row marks
/// only that row [`RowStatus::Error`]. A grasp whose rest state is infeasible
/// reports zero magnitude in every direction.
pub fn force_map(
    grasp: &SpatialGrasp,
    f_c: &[f64],
    plane: &MapPlane,
    choice: SolverChoice,
    cfg: &QueryConfig,
) -> Result<Vec<MapRow>, QueryError> {
    plane.validate()?;
    if !grasp.contacts.is_empty() {
        grasp.validate()?;
    }
    Ok((0..plane.rows())
        .into_par_iter()
        .map(|i| {
            let angle_deg = i as f64 * plane.step_deg;
            let direction = plane.direction(i);
            match max_disturbance(grasp, f_c, &direction, choice, cfg) {
                Ok(DisturbanceBound::Bounded(s)) => MapRow {
                    angle_deg,
                    magnitude: s,
                    status: RowStatus::Ok,
                },
                Ok(DisturbanceBound::UnboundedAboveCap(cap)) => MapRow {
                    angle_deg,
                    magnitude: cap,
                    status: RowStatus::Capped,
                },
                Ok(DisturbanceBound::Infeasible) => MapRow {
                    angle_deg,
                    magnitude: 0.0,
                    status: RowStatus::Ok,
                },
                Err(_) => MapRow {
                    angle_deg,
                    magnitude: 0.0,
                    status: RowStatus::Error,
                },
            }
        })
        .collect())
}

/// Margin below which a closure probe counts as unresisted.
const CLOSURE_MARGIN: f64 = 1e-9;

/// Classic force closure on the discretized contact wrench cone.
///
/// Each contact contributes its friction cone edges (an 8-edge pyramid in
/// space, the two cone sides in the plane, the bare normal when
/// frictionless), L1-normalized in wrench space. The grasp is in closure if
/// for every signed coordinate probe some convex combination of edges has
/// positive inner product with the probe — i.e. the edges positively span the
/// wrench space. Preloads and the hand play no role here; this is the
/// geometry-only baseline the stability analysis refines.
pub fn force_closure_check(grasp: &GraspModel) -> Result<bool, QueryError> {
    let (edges, dim) = wrench_edges(grasp)?;
    if edges.is_empty() {
        return Ok(false);
    }
    for axis in 0..dim {
        for sign in [1.0, -1.0] {
            let mut probe = vec![0.0; dim];
            probe[axis] = sign;
            if probe_margin(&edges, &probe)? <= CLOSURE_MARGIN {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Number of friction-pyramid edges used per spatial contact.
const CLOSURE_EDGES: usize = 8;

fn wrench_edges(grasp: &GraspModel) -> Result<(Vec<Vec<f64>>, usize), QueryError> {
    let mut edges = Vec::new();
    match grasp {
        GraspModel::Planar(g) => {
            if !g.contacts.is_empty() {
                g.validate()?;
            }
            for c in &g.contacts {
                let n = c.normal;
                let t = nalgebra::Vector2::new(-n.y, n.x);
                let dirs: Vec<nalgebra::Vector2<f64>> = if c.mu > 0.0 {
                    vec![n + t * c.mu, n - t * c.mu]
                } else {
                    vec![n]
                };
                for u in dirs {
                    let torque = c.position.x * u.y - c.position.y * u.x;
                    edges.push(normalized_l1(vec![u.x, u.y, torque]));
                }
            }
            Ok((edges, 3))
        }
        GraspModel::Spatial(g) => {
            if !g.contacts.is_empty() {
                g.validate()?;
            }
            for c in &g.contacts {
                let frame = build_contact_frame(&c.normal)?;
                let dirs: Vec<Vector3<f64>> = if c.mu > 0.0 {
                    (0..CLOSURE_EDGES)
                        .map(|k| {
                            let t = 2.0 * std::f64::consts::PI * k as f64 / CLOSURE_EDGES as f64;
                            frame.n + (frame.t1 * t.cos() + frame.t2 * t.sin()) * c.mu
                        })
                        .collect()
                } else {
                    vec![frame.n]
                };
                for u in dirs {
                    let m = c.position.cross(&u);
                    edges.push(normalized_l1(vec![u.x, u.y, u.z, m.x, m.y, m.z]));
                }
            }
            Ok((edges, 6))
        }
    }
}

fn normalized_l1(mut w: Vec<f64>) -> Vec<f64> {
    let norm: f64 = w.iter().map(|x| x.abs()).sum();
    for x in &mut w {
        *x /= norm;
    }
    w
}

/// Best achievable inner product with `probe` over convex combinations of the
/// edge wrenches.
fn probe_margin(edges: &[Vec<f64>], probe: &[f64]) -> Result<f64, QueryError> {
    let mut model = Model::new();
    let mut objective = LinExpr::new();
    let mut total = LinExpr::new();
    for e in edges {
        let weight = model.add_var(0.0, f64::INFINITY);
        let score: f64 = e.iter().zip(probe).map(|(a, b)| a * b).sum();
        objective.add(weight, score);
        total.add(weight, 1.0);
    }
    model.add_constraint(total, Relation::Eq, 1.0);
    model.set_objective(Sense::Maximize, objective);
    let res = solve_mip(&model, &SolverConfig::default())?;
    Ok(res.objective)
}

/// Maximum resistible planar disturbance along the unit load `direction`
/// (forces in x, y and a torque), bracketed by bisection over the exact
/// contact-state enumeration.
pub fn planar_max_disturbance(
    grasp: &PlanarGrasp,
    direction: &Vector3<f64>,
    cfg: &QueryConfig,
) -> Result<DisturbanceBound, QueryError> {
    check_direction(direction.norm())?;
    if grasp.contacts.is_empty() {
        return Ok(DisturbanceBound::Bounded(0.0));
    }
    grasp.validate()?;
    let stable_at =
        |s: f64| -> Result<bool, QueryError> { Ok(planar_stability(grasp, &(direction * s))?.is_stable()) };
    if !stable_at(0.0)? {
        return Ok(DisturbanceBound::Infeasible);
    }
    if stable_at(cfg.cap)? {
        return Ok(DisturbanceBound::UnboundedAboveCap(cfg.cap));
    }
    let (mut lo, mut hi) = (0.0, cfg.cap);
    while hi - lo > cfg.tolerance {
        let mid = 0.5 * (lo + hi);
        if stable_at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DisturbanceBound::Bounded(lo))
}

/// Planar polar force map over pure in-plane forces.
pub fn planar_force_map(
    grasp: &PlanarGrasp,
    step_deg: f64,
    cfg: &QueryConfig,
) -> Result<Vec<MapRow>, QueryError> {
    if !(step_deg > 0.0) {
        return Err(QueryError::Config("angular step must be positive".into()));
    }
    let rows = 360.0 / step_deg;
    if (rows - rows.round()).abs() > 1e-9 {
        return Err(QueryError::Config(
            "angular step must divide 360 degrees".into(),
        ));
    }
    if !grasp.contacts.is_empty() {
        grasp.validate()?;
    }
    Ok((0..rows.round() as usize)
        .into_par_iter()
        .map(|i| {
            let angle_deg = i as f64 * step_deg;
            let t = angle_deg.to_radians();
            let direction = Vector3::new(t.cos(), t.sin(), 0.0);
            match planar_max_disturbance(grasp, &direction, cfg) {
                Ok(DisturbanceBound::Bounded(s)) => MapRow {
                    angle_deg,
                    magnitude: s,
                    status: RowStatus::Ok,
                },
                Ok(DisturbanceBound::UnboundedAboveCap(cap)) => MapRow {
                    angle_deg,
                    magnitude: cap,
                    status: RowStatus::Capped,
                },
                Ok(DisturbanceBound::Infeasible) => MapRow {
                    angle_deg,
                    magnitude: 0.0,
                    status: RowStatus::Ok,
                },
                Err(_) => MapRow {
                    angle_deg,
                    magnitude: 0.0,
                    status: RowStatus::Error,
                },
            }
        })
        .collect())
}

fn check_direction(norm: f64) -> Result<(), QueryError> {
    if (norm - 1.0).abs() > 1e-6 {
        return Err(QueryError::Config(
            "disturbance direction must be a unit wrench".into(),
        ));
    }
    Ok(())
}
