//! Iterative equilibrium search with motion constrained to the net wrench.
//!
//! A model that lets the object displace freely while contact springs are
//! unilateral can balance loads it has no business balancing: a virtual twist
//! of the object compresses opposing springs simultaneously, conjuring squeeze
//! (and friction) out of nothing. The scheme here removes that artifact by
//! only ever letting the object move *along the wrench currently acting on
//! it*. Each step solves a MIP that minimizes the remaining net wrench subject
//! to the core quasi-static constraints, a polygonal friction cone, and the
//! movement restriction `r = r_prev + s * w_prev` with a single nonnegative
//! step scale `s`. Iterating drains the net wrench when something real resists
//! the load and stalls at `‖w‖` when nothing does.
//!
//! Forces and torques are mixed in one residual norm; torque components are
//! weighted by `1 / torque_length` so a torque counts like a force applied at
//! that lever arm.

use nalgebra::Vector6;
use thiserror::Error;

use crate::grasp::{EquilibriumSolution, GraspError, SpatialGrasp};
use crate::solver::{
    solve_mip, LinExpr, Model, Relation, Sense, SolveError, SolverConfig, VarId,
};
use crate::spatial;

/// Tuning knobs for [`movement_constrained_ep`] and [`iterative_ep`].
#[derive(Clone, Debug)]
pub struct IterativeConfig {
    /// Maximum step scale per iteration (bound on `s`).
    pub gamma: f64,
    /// Convergence threshold on the change of the net wrench between steps.
    pub epsilon: f64,
    /// Iteration cap.
    pub max_iterations: usize,
    /// A converged net wrench at or below this norm counts as equilibrium.
    pub stability_residual: f64,
    /// Number of edges of the inscribed polygonal friction cone.
    pub cone_resolution: usize,
    /// Lever arm (meters) used to weigh torque against force in residuals.
    pub torque_length: f64,
    /// Tolerances and limits passed through to the MIP solver.
    pub solver: SolverConfig,
}

impl Default for IterativeConfig {
    fn default() -> Self {
        Self {
            gamma: 1e-3,
            epsilon: 1e-3,
            max_iterations: 500,
            stability_residual: 1e-3,
            cone_resolution: 16,
            torque_length: 0.1,
            solver: SolverConfig::default(),
        }
    }
}

impl IterativeConfig {
    fn validate(&self) -> Result<(), IterativeError> {
        let bad = |what: &str| Err(IterativeError::Config(what.into()));
        if !(self.gamma > 0.0) {
            return bad("gamma must be positive");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        if !(self.stability_residual > 0.0) {
            return bad("stability_residual must be positive");
        }
        if self.cone_resolution < 3 {
            return bad("cone_resolution must be at least 3");
        }
        if !(self.torque_length > 0.0) {
            return bad("torque_length must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum IterativeError {
    #[error(transparent)]
    Grasp(#[from] GraspError),
    #[error("solver failure: {0}")]
    Solver(#[from] SolveError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Verdict of [`iterative_ep`].
#[derive(Clone, Debug)]
pub enum IterativeOutcome {
    /// The net wrench converged below the stability threshold.
    Stable(EquilibriumSolution),
    /// The net wrench converged to (or a step was infeasible at) a residual
    /// the grasp cannot shed.
    Unstable { residual: f64 },
    /// The iteration cap was hit before the net wrench settled.
    NotConverged { residual: f64 },
}

impl IterativeOutcome {
    pub fn is_stable(&self) -> bool {
        matches!(self, IterativeOutcome::Stable(_))
    }
}

/// Weighted L1 norm of a 6-vector wrench: forces count as-is, torques are
/// divided by the lever arm `length`.
fn weighted_norm(w: &Vector6<f64>, length: f64) -> f64 {
    w.iter()
        .enumerate()
        .map(|(k, v)| if k < 3 { v.abs() } else { v.abs() / length })
        .sum()
}

/// Ties each contact force to an inscribed `k`-edge polygonal friction cone:
/// `c_i = sum_j beta_j (n + mu (cos θ_j t1 + sin θ_j t2))`, `beta >= 0`,
/// written directly in contact-frame components.
pub(crate) fn add_friction_cones(
    model: &mut Model,
    grasp: &SpatialGrasp,
    c: &[VarId],
    k: usize,
) {
    for (i, contact) in grasp.contacts.iter().enumerate() {
        let mut row_n = LinExpr::term(c[3 * i], -1.0);
        let mut row_t1 = LinExpr::term(c[3 * i + 1], -1.0);
        let mut row_t2 = LinExpr::term(c[3 * i + 2], -1.0);
        for j in 0..k {
            let beta = model.add_var(0.0, f64::INFINITY);
            let theta = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
            row_n = row_n.plus(beta, 1.0);
            row_t1 = row_t1.plus(beta, contact.mu * theta.cos());
            row_t2 = row_t2.plus(beta, contact.mu * theta.sin());
        }
        model.add_constraint(row_n, Relation::Eq, 0.0);
        model.add_constraint(row_t1, Relation::Eq, 0.0);
        model.add_constraint(row_t2, Relation::Eq, 0.0);
    }
}

/// One step of the motion-constrained equilibrium search.
///
/// Builds the core quasi-static constraints *without* object equilibrium,
/// adds an inscribed `cone_resolution`-edge friction cone per contact, pins
/// the object displacement to `r = r_prev + s * w_prev` with `0 <= s <= gamma`,
/// and minimizes the weighted L1 norm of the net wrench `w + G c`.
///
/// Returns `Ok(None)` when the step MIP is infeasible (no admissible state at
/// all along the allowed motion), which the outer loop treats as unstable. In
/// a feasible solution, `object_motion` holds the stepped `r` and `residual`
/// the net wrench the step could not cancel.
pub fn movement_constrained_ep(
    grasp: &SpatialGrasp,
    f_c: &[f64],
    w: &Vector6<f64>,
    r_prev: &Vector6<f64>,
    w_prev: &Vector6<f64>,
    config: &IterativeConfig,
) -> Result<Option<EquilibriumSolution>, IterativeError> {
    config.validate()?;
    let (mut model, vars) = spatial::assemble(grasp, w, f_c, false)?;
    let g = grasp.grasp_map();

    add_friction_cones(&mut model, grasp, &vars.c, config.cone_resolution);

    // Movement restriction: the object may only displace further along the
    // wrench that was acting on it, r = r_prev + s * w_prev.
    let s = model.add_var(0.0, config.gamma);
    for row in 0..6 {
        let e = LinExpr::term(vars.r[row], 1.0).plus(s, -w_prev[row]);
        model.add_constraint(e, Relation::Eq, r_prev[row]);
    }

    // Objective: weighted L1 norm of the net wrench w + G c, via one
    // nonnegative bound variable per wrench component.
    let mut objective = LinExpr::new();
    for row in 0..6 {
        let t = model.add_var(0.0, f64::INFINITY);
        let weight = if row < 3 { 1.0 } else { 1.0 / config.torque_length };
        objective = objective.plus(t, weight);
        let mut above = LinExpr::term(t, 1.0);
        let mut below = LinExpr::term(t, 1.0);
        for (i, &cv) in vars.c.iter().enumerate() {
            let coeff = g[(row, i)];
            if coeff != 0.0 {
                above = above.plus(cv, -coeff);
                below = below.plus(cv, coeff);
            }
        }
        model.add_constraint(above, Relation::Ge, w[row]);
        model.add_constraint(below, Relation::Ge, -w[row]);
    }
    model.set_objective(Sense::Minimize, objective);

    let result = match solve_mip(&model, &config.solver) {
        Ok(r) => r,
        Err(SolveError::NodeLimit { incumbent: Some(best), .. }) => *best,
        Err(e) => return Err(e.into()),
    };
    if !result.is_feasible() {
        return Ok(None);
    }
    Ok(Some(spatial::extract_solution(grasp, w, &vars, &result)))
}

/// Full iterative equilibrium search.
///
/// Starting from `r = 0` and a net wrench equal to the applied `w`, repeats
/// [`movement_constrained_ep`] until the net wrench stops changing (within
/// `epsilon` in the weighted norm) or the iteration cap is hit. A converged
/// residual at or below `stability_residual` is reported as stable; a
/// converged (or step-infeasible) residual above it as unstable; hitting the
/// cap as not converged, with the last residual attached.
pub fn iterative_ep(
    grasp: &SpatialGrasp,
    f_c: &[f64],
    w: &Vector6<f64>,
    config: &IterativeConfig,
) -> Result<IterativeOutcome, IterativeError> {
    config.validate()?;
    grasp.validate()?;
    let mut r_prev = Vector6::zeros();
    let mut w_prev = *w;
    let mut last_residual = weighted_norm(&w_prev, config.torque_length);

    for _ in 0..config.max_iterations {
        let Some(sol) = movement_constrained_ep(grasp, f_c, w, &r_prev, &w_prev, config)? else {
            return Ok(IterativeOutcome::Unstable { residual: last_residual });
        };
        let w_net = Vector6::from_iterator(sol.residual.iter().copied());
        let change = weighted_norm(&(w_prev - w_net), config.torque_length);
        let residual = weighted_norm(&w_net, config.torque_length);
        if change < config.epsilon {
            return Ok(if residual <= config.stability_residual {
                IterativeOutcome::Stable(sol)
            } else {
                IterativeOutcome::Unstable { residual }
            });
        }
        r_prev = Vector6::from_iterator(sol.object_motion.iter().copied());
        w_prev = w_net;
        last_residual = residual;
    }
    Ok(IterativeOutcome::NotConverged { residual: last_residual })
}
