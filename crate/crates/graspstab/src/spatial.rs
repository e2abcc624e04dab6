//! Core constraint fragment for spatial grasps with passive hands.
//!
//! Assembles the mixed-integer description shared by the iterative and
//! relaxation solvers: object and hand equilibrium, the relative contact
//! motion d = Gᵀr − Jq (inlined into the rows that use it), contact
//! unilaterality as an indicator pair per contact, and the nonbackdrivable
//! actuator model as an indicator pair per actuator. Friction is *not* part
//! of the fragment — each solver adds its own cone discretization.
//!
//! Sign conventions: contact normals point into the object, J maps closing
//! joint rates to contact velocities, and a persisting contact acts as a unit
//! virtual spring, c_n = −d_n with d_n ≤ 0. The actuator-supplied torque
//! satisfies Jᵀc = τ = Rf; a locked actuator may deliver more than its
//! command (f ≥ f^c) but cannot move ((Rᵀq) = 0), while a moving actuator
//! delivers exactly the command.

use nalgebra::{DVector, Vector6};

use crate::grasp::{EquilibriumSolution, GraspError, GraspModel, SpatialGrasp};
use crate::solver::{Constraint, LinExpr, Model, Relation, SolveResult, VarId};

/// Margin standing in for the strict inequalities of the complementary
/// branches (a separated contact has d_n > 0, a moving actuator (Rᵀq) > 0).
/// The opposite branch covers the boundary, so the value only needs to be
/// small against the solver feasibility tolerance.
pub const EPS_OPEN: f64 = 1e-9;

/// Variable ids of one assembled constraint fragment, in model order.
#[derive(Debug, Clone)]
pub struct SpatialVariables {
    /// Contact forces, 3 per contact (normal, then both tangentials).
    pub c: Vec<VarId>,
    /// Object displacement, 6 entries.
    pub r: Vec<VarId>,
    /// Joint motions, one per joint, nonnegative.
    pub q: Vec<VarId>,
    /// Joint torques, one per joint.
    pub tau: Vec<VarId>,
    /// Actuator forces, one per actuator.
    pub f: Vec<VarId>,
    /// Contact persist flags (binary), one per contact.
    pub y: Vec<VarId>,
    /// Actuator lock flags (binary), one per actuator.
    pub z: Vec<VarId>,
}

/// Assembles the core constraint fragment for a spatial grasp.
///
/// `w` is the applied wrench, `f_c` the commanded actuator forces, and
/// `include_object_equilibrium` controls whether the rows Gc + w = 0 are
/// emitted (the iterative scheme removes them and minimizes the residual
/// instead). The fragment carries no objective.
pub fn assemble_core_constraints(
    grasp: &GraspModel,
    w: &Vector6<f64>,
    f_c: &[f64],
    include_object_equilibrium: bool,
) -> Result<(Model, SpatialVariables), GraspError> {
    match grasp {
        GraspModel::Spatial(s) => assemble(s, w, f_c, include_object_equilibrium),
        GraspModel::Planar(_) => Err(GraspError::Dimension(
            "spatial constraint assembly requires a spatial grasp".into(),
        )),
    }
}

/// Hook rewriting one assembled row: receives the model (so it may add
/// variables of its own), the row index, and the built expression.
pub(crate) type RowHook<'a> = &'a mut dyn FnMut(&mut Model, usize, LinExpr) -> LinExpr;

/// Hook rewriting a commanded-force comparison (lhs, rhs) of an actuator.
pub(crate) type BoundHook<'a> = &'a mut dyn FnMut(&mut Model, usize, LinExpr, f64) -> (LinExpr, f64);

pub(crate) fn assemble(
    grasp: &SpatialGrasp,
    w: &Vector6<f64>,
    f_c: &[f64],
    include_object_equilibrium: bool,
) -> Result<(Model, SpatialVariables), GraspError> {
    let mut model = Model::new();
    let vars = assemble_into(
        &mut model,
        grasp,
        w,
        f_c,
        include_object_equilibrium,
        None,
        None,
        None,
    )?;
    Ok((model, vars))
}

/// Assembles the fragment into an existing model, with optional query
/// extension points: `equilibrium_row` rewrites the left side Σ G c of each
/// object equilibrium row, `normal_motion` rewrites a contact's normal
/// relative motion d_n before it is copied into the unilaterality rows, and
/// `commanded` rewrites the commanded-force comparison used by both actuator
/// branches.
#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble_into(
    model: &mut Model,
    grasp: &SpatialGrasp,
    w: &Vector6<f64>,
    f_c: &[f64],
    include_object_equilibrium: bool,
    mut equilibrium_row: Option<RowHook<'_>>,
    mut normal_motion: Option<RowHook<'_>>,
    mut commanded: Option<BoundHook<'_>>,
) -> Result<SpatialVariables, GraspError> {
    let m = grasp.contact_count();
    let l = grasp.joint_count();
    let a = grasp.actuator_count();
    if f_c.len() != a {
        return Err(GraspError::Dimension(format!(
            "{} commanded forces for {a} actuators",
            f_c.len()
        )));
    }
    let g = grasp.grasp_map();
    let jac = grasp.jacobian()?;
    let rmat = &grasp.hand.transmission;

    let inf = f64::INFINITY;
    let mut c = Vec::with_capacity(3 * m);
    for _ in 0..m {
        c.push(model.add_var(0.0, inf));
        c.push(model.add_var(-inf, inf));
        c.push(model.add_var(-inf, inf));
    }
    let r: Vec<VarId> = (0..6).map(|_| model.add_var(-inf, inf)).collect();
    let q: Vec<VarId> = (0..l).map(|_| model.add_var(0.0, inf)).collect();
    let tau: Vec<VarId> = (0..l).map(|_| model.add_var(-inf, inf)).collect();
    let f: Vec<VarId> = (0..a).map(|_| model.add_var(-inf, inf)).collect();
    let y: Vec<VarId> = (0..m).map(|_| model.add_binary()).collect();
    let z: Vec<VarId> = (0..a).map(|_| model.add_binary()).collect();

    if include_object_equilibrium {
        for row in 0..6 {
            let mut e = LinExpr::new();
            for (k, &cv) in c.iter().enumerate() {
                e = e.plus(cv, g[(row, k)]);
            }
            if let Some(h) = equilibrium_row.as_mut() {
                e = h(model, row, e);
            }
            model.add_constraint(e, Relation::Eq, -w[row]);
        }
    }
    // Hand equilibrium: the torque the contacts exert on the links is what
    // the actuators must supply, Jᵀc = τ.
    for jl in 0..l {
        let mut e = LinExpr::new();
        for (k, &cv) in c.iter().enumerate() {
            e = e.plus(cv, jac[(k, jl)]);
        }
        model.add_constraint(e.plus(tau[jl], -1.0), Relation::Eq, 0.0);
    }
    // Transmission torque ratio: τ = R f.
    for jl in 0..l {
        let mut e = LinExpr::term(tau[jl], 1.0);
        for al in 0..a {
            e = e.plus(f[al], -rmat[(jl, al)]);
        }
        model.add_constraint(e, Relation::Eq, 0.0);
    }
    // Nonbackdrivable transmissions only move forward: Rᵀq ≥ 0.
    let actuator_motion = |al: usize| {
        let mut e = LinExpr::new();
        for jl in 0..l {
            e = e.plus(q[jl], rmat[(jl, al)]);
        }
        e
    };
    for al in 0..a {
        model.add_constraint(actuator_motion(al), Relation::Ge, 0.0);
    }

    // Contact unilaterality on the normal relative motion d_n = (Gᵀr − Jq)_n.
    for i in 0..m {
        let mut d_n = LinExpr::new();
        for row in 0..6 {
            d_n = d_n.plus(r[row], g[(row, 3 * i)]);
        }
        for jl in 0..l {
            d_n = d_n.plus(q[jl], -jac[(3 * i, jl)]);
        }
        if let Some(h) = normal_motion.as_mut() {
            d_n = h(model, i, d_n);
        }
        model.add_indicator(
            y[i],
            true,
            vec![
                Constraint::new(d_n.clone().plus(c[3 * i], 1.0), Relation::Eq, 0.0),
                Constraint::new(d_n.clone(), Relation::Le, 0.0),
            ],
        );
        model.add_indicator(
            y[i],
            false,
            vec![
                Constraint::new(LinExpr::term(c[3 * i], 1.0), Relation::Eq, 0.0),
                Constraint::new(d_n, Relation::Ge, EPS_OPEN),
            ],
        );
    }
    // Actuator lock/move complementarity on the actuator-side motion (Rᵀq).
    for al in 0..a {
        let (lhs, rhs) = match commanded.as_mut() {
            Some(h) => h(model, al, LinExpr::term(f[al], 1.0), f_c[al]),
            None => (LinExpr::term(f[al], 1.0), f_c[al]),
        };
        model.add_indicator(
            z[al],
            true,
            vec![
                Constraint::new(lhs.clone(), Relation::Ge, rhs),
                Constraint::new(actuator_motion(al), Relation::Eq, 0.0),
            ],
        );
        model.add_indicator(
            z[al],
            false,
            vec![
                Constraint::new(lhs, Relation::Eq, rhs),
                Constraint::new(actuator_motion(al), Relation::Ge, EPS_OPEN),
            ],
        );
    }

    Ok(SpatialVariables {
        c,
        r,
        q,
        tau,
        f,
        y,
        z,
    })
}

/// Reads an assembled-model solution back into physical quantities, with the
/// net residual wrench Gc + w recomputed from the extracted forces.
pub fn extract_solution(
    grasp: &SpatialGrasp,
    w: &Vector6<f64>,
    vars: &SpatialVariables,
    result: &SolveResult,
) -> EquilibriumSolution {
    let g = grasp.grasp_map();
    let c = DVector::from_fn(vars.c.len(), |k, _| result.x[vars.c[k]]);
    let gc = &g * &c;
    EquilibriumSolution {
        contact_forces: c,
        object_motion: DVector::from_fn(6, |k, _| result.x[vars.r[k]]),
        joint_motion: DVector::from_fn(vars.q.len(), |k, _| result.x[vars.q[k]]),
        joint_torques: DVector::from_fn(vars.tau.len(), |k, _| result.x[vars.tau[k]]),
        actuator_forces: DVector::from_fn(vars.f.len(), |k, _| result.x[vars.f[k]]),
        contact_persist: vars.y.iter().map(|&v| result.x[v] > 0.5).collect(),
        actuator_locked: vars.z.iter().map(|&v| result.x[v] > 0.5).collect(),
        residual: DVector::from_fn(6, |row, _| gc[row] + w[row]),
    }
}
