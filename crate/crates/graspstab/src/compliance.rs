//! Compliance-resolved grasp linearization and the action shield built on it.
//!
//! A rigid grasp is statically indeterminate: the grasp map has a nullspace,
//! so applied wrenches do not determine contact forces. Adding the dominant
//! compliances — springs at the contacts and in the joint servos — resolves
//! the indeterminacy and yields three linear maps around an equilibrium:
//! the grasp stiffness `K`, the controllable object motions `F` (setpoint
//! change to object pose), and the controllable internal forces `E`
//! (setpoint change to contact forces). On top of the linearization sits a
//! projection that clips a proposed setpoint change to the closest one (L1)
//! keeping a force-closure subset of contacts pressed inside their friction
//! cones and the object inside a pose box.

use nalgebra::{DMatrix, DVector, Rotation3, Vector2, Vector3, Vector6};
use rayon::prelude::*;
use thiserror::Error;

use crate::grasp::{chain_to_base, GraspError, GraspModel, SpatialGrasp};
use crate::queries::{force_closure_check, QueryError};
use crate::solver::{solve_lp, LinExpr, Model, Relation, Sense, SolveError, SolverConfig};

/// Largest setpoint change, in radians, for which the linearization is
/// trusted.
pub const DEFAULT_STEP_CAP: f64 = 0.05;

/// Edge count of the linearized (inscribed) friction cone used by the shield.
pub const SHIELD_CONE_EDGES: usize = 8;

/// Diagonal compliances of the two dominant spring sources.
#[derive(Clone, Debug)]
pub struct ComplianceModel {
    /// Per contact-frame component, m/N; length 3m, entries ≥ 0.
    pub contact: DVector<f64>,
    /// Per joint, rad/(N·m); length l, entries ≥ 0.
    pub joint: DVector<f64>,
}

impl ComplianceModel {
    /// Unit contact springs and rigid joints — the conventional default.
    pub fn unit_contacts(contacts: usize, joints: usize) -> Self {
        Self {
            contact: DVector::from_element(3 * contacts, 1.0),
            joint: DVector::zeros(joints),
        }
    }
}

/// The three linear maps around an equilibrium grasp state.
#[derive(Clone, Debug)]
pub struct LinearizedGrasp {
    /// Grasp stiffness `K = (C_contacts + J C_joints Jᵀ)⁻¹`, 3m×3m: contact
    /// motion to contact-force change.
    pub stiffness: DMatrix<f64>,
    /// Controllable object motions `F = (G K Gᵀ)⁻¹ G K J`, 6×l: setpoint
    /// change to object-pose change.
    pub object_motion: DMatrix<f64>,
    /// Controllable internal forces `E = K (J − Gᵀ F)`, 3m×l: setpoint change
    /// to contact-force change at fixed net wrench.
    pub internal_force: DMatrix<f64>,
}

impl LinearizedGrasp {
    pub fn contact_count(&self) -> usize {
        self.stiffness.nrows() / 3
    }

    pub fn joint_count(&self) -> usize {
        self.object_motion.ncols()
    }
}

/// Grasp state the linearization predicts: contact forces in contact frames
/// and the object pose as translation plus a rotation vector.
#[derive(Clone, Debug)]
pub struct GraspState {
    /// Contact-frame force components, length 3m, [n, t1, t2] per contact.
    pub contact_forces: DVector<f64>,
    /// Object pose increment from the linearization origin: translation in
    /// the first three entries, a small rotation vector in the last three.
    pub pose: Vector6<f64>,
}

#[derive(Debug, Error)]
pub enum ComplianceError {
    #[error(transparent)]
    Grasp(#[from] GraspError),
    #[error("invalid compliance input: {0}")]
    Config(String),
    #[error("{matrix} is rank deficient; the linearization does not exist")]
    Singular { matrix: &'static str },
    #[error(
        "setpoint step ‖Δq‖∞ = {norm:.3e} rad exceeds the {cap:.3e} rad linearization cap"
    )]
    StepCap { norm: f64, cap: f64 },
    #[error(transparent)]
    Closure(#[from] QueryError),
    #[error("shield subproblem solve failed: {0}")]
    Solver(#[from] SolveError),
}

/// Builds the stiffness and controllability maps for a grasp with the given
/// compliances.
///
/// Requires the total compliance `C_contacts + J C_joints Jᵀ` and the
/// reflected stiffness `G K Gᵀ` to be positive definite; rank deficiency in
/// either is reported by name.
pub fn linearize(
    grasp: &SpatialGrasp,
    compliance: &ComplianceModel,
) -> Result<LinearizedGrasp, ComplianceError> {
    grasp.validate()?;
    let m = grasp.contacts.len();
    let l = grasp.hand.joints.len();
    if compliance.contact.len() != 3 * m {
        return Err(ComplianceError::Config(format!(
            "contact compliance has {} entries for {} contacts",
            compliance.contact.len(),
            m
        )));
    }
    if compliance.joint.len() != l {
        return Err(ComplianceError::Config(format!(
            "joint compliance has {} entries for {} joints",
            compliance.joint.len(),
            l
        )));
    }
    if compliance.contact.iter().chain(compliance.joint.iter()).any(|&v| v < 0.0) {
        return Err(ComplianceError::Config("compliances must be nonnegative".into()));
    }
    let g = grasp.grasp_map();
    let j = grasp.jacobian()?;
    let mut total = DMatrix::from_diagonal(&compliance.contact);
    total += &j * DMatrix::from_diagonal(&compliance.joint) * j.transpose();
    let stiffness = total
        .cholesky()
        .ok_or(ComplianceError::Singular {
            matrix: "C_contacts + J C_joints Jᵀ",
        })?
        .inverse();
    let reflected = &g * &stiffness * g.transpose();
    let reflected_inv = reflected
        .cholesky()
        .ok_or(ComplianceError::Singular { matrix: "G K Gᵀ" })?
        .inverse();
    let object_motion = &reflected_inv * &g * &stiffness * &j;
    let internal_force = &stiffness * (&j - g.transpose() * &object_motion);
    Ok(LinearizedGrasp {
        stiffness,
        object_motion,
        internal_force,
    })
}

/// One-step state prediction `[c; u]⁺ = [c; u] + [E; F] Δq`.
///
/// Rotational increments compose by small-angle addition, which is what makes
/// the step cap necessary; steps beyond `cap` are refused rather than
/// extrapolated.
pub fn predict_state(
    lin: &LinearizedGrasp,
    state: &GraspState,
    dq: &DVector<f64>,
    cap: f64,
) -> Result<GraspState, ComplianceError> {
    if dq.len() != lin.joint_count() {
        return Err(ComplianceError::Config(format!(
            "setpoint change has {} entries for {} joints",
            dq.len(),
            lin.joint_count()
        )));
    }
    if state.contact_forces.len() != lin.internal_force.nrows() {
        return Err(ComplianceError::Config(format!(
            "state has {} force components, linearization expects {}",
            state.contact_forces.len(),
            lin.internal_force.nrows()
        )));
    }
    let norm = dq.amax();
    if norm > cap {
        return Err(ComplianceError::StepCap { norm, cap });
    }
    let pose_delta = &lin.object_motion * dq;
    let mut pose = state.pose;
    for r in 0..6 {
        pose[r] += pose_delta[r];
    }
    Ok(GraspState {
        contact_forces: &state.contact_forces + &lin.internal_force * dq,
        pose,
    })
}

/// Safety envelope the shield enforces on the predicted state.
#[derive(Clone, Debug)]
pub struct ShieldConstraints {
    /// Object translation box, meters (±∞ entries disable an axis).
    pub position_min: Vector3<f64>,
    pub position_max: Vector3<f64>,
    /// Bounds on the signed tilt of the body z-axis measured in the global
    /// yz and xz planes (r_x, r_y), radians.
    pub tilt_min: Vector2<f64>,
    pub tilt_max: Vector2<f64>,
    /// Per-joint setpoint-change cap inherited by the projected action.
    pub step_cap: f64,
}

impl Default for ShieldConstraints {
    fn default() -> Self {
        Self {
            position_min: Vector3::from_element(f64::NEG_INFINITY),
            position_max: Vector3::from_element(f64::INFINITY),
            tilt_min: Vector2::from_element(f64::NEG_INFINITY),
            tilt_max: Vector2::from_element(f64::INFINITY),
            step_cap: DEFAULT_STEP_CAP,
        }
    }
}

impl ShieldConstraints {
    pub fn validate(&self) -> Result<(), ComplianceError> {
        for t in 0..3 {
            if self.position_min[t] > self.position_max[t] {
                return Err(ComplianceError::Config("pose box bounds out of order".into()));
            }
        }
        for t in 0..2 {
            if self.tilt_min[t] > self.tilt_max[t] {
                return Err(ComplianceError::Config("tilt bounds out of order".into()));
            }
        }
        if !(self.step_cap > 0.0) {
            return Err(ComplianceError::Config("step cap must be positive".into()));
        }
        Ok(())
    }

    fn has_tilt_bounds(&self) -> bool {
        (0..2).any(|t| self.tilt_min[t].is_finite() || self.tilt_max[t].is_finite())
    }
}

/// Result of projecting an action through the shield.
#[derive(Clone, Debug)]
pub enum ShieldOutcome {
    Safe(SafeAction),
    /// No force-closure subset of at least two contacts admits any action in
    /// the envelope; the caller decides what to do.
    Infeasible,
}

/// A projected action together with its provenance.
#[derive(Clone, Debug)]
pub struct SafeAction {
    pub action: DVector<f64>,
    /// L1 distance to the proposed action.
    pub deviation: f64,
    /// Contacts whose stability constraints were enforced.
    pub shielded: Vec<usize>,
}

/// Signed tilts (r_x, r_y) of the body z-axis for a rotation vector: the
/// angle between the projection of the rotated ẑ into the global yz (resp.
/// xz) plane and the global ẑ, signed by the right-hand rule via
/// sgn((ẑ_proj × Ẑ)·X̂) and sgn((ẑ_proj × Ẑ)·Ŷ).
pub fn tilt_angles(rotation: &Vector3<f64>) -> Vector2<f64> {
    let z = Rotation3::new(*rotation) * Vector3::z();
    // Projection into yz: sign reduces to sgn(z_y); into xz: to −sgn(z_x).
    Vector2::new(z.y.atan2(z.z), -z.x.atan2(z.z))
}

fn tilt_gradient(rotation: &Vector3<f64>) -> [Vector3<f64>; 2] {
    let h = 1e-6;
    let mut grad = [Vector3::zeros(), Vector3::zeros()];
    for k in 0..3 {
        let mut hi = *rotation;
        let mut lo = *rotation;
        hi[k] += h;
        lo[k] -= h;
        let d = (tilt_angles(&hi) - tilt_angles(&lo)) / (2.0 * h);
        grad[0][k] = d[0];
        grad[1][k] = d[1];
    }
    grad
}

/// Midpoint directions and inradius factor of the inscribed friction polygon:
/// `c_t · dir ≤ µ cos(π/k) c_n` over these directions is exactly membership
/// in the cone positively spanned by k edges on the true cone surface.
fn cone_planes() -> (Vec<(f64, f64)>, f64) {
    let k = SHIELD_CONE_EDGES;
    let shrink = (std::f64::consts::PI / k as f64).cos();
    let dirs = (0..k)
        .map(|d| {
            let phi = 2.0 * std::f64::consts::PI * (d as f64 + 0.5) / k as f64;
            (phi.cos(), phi.sin())
        })
        .collect();
    (dirs, shrink)
}

const SHIELD_FEAS_TOL: f64 = 1e-9;

/// Exact feasibility of an action for a given shielded set (bit per contact).
fn action_feasible(
    grasp: &SpatialGrasp,
    lin: &LinearizedGrasp,
    state: &GraspState,
    constraints: &ShieldConstraints,
    mask: usize,
    action: &DVector<f64>,
) -> bool {
    if action.amax() > constraints.step_cap + SHIELD_FEAS_TOL {
        return false;
    }
    let forces = &state.contact_forces + &lin.internal_force * action;
    let pose_delta = &lin.object_motion * action;
    let (dirs, shrink) = cone_planes();
    for (i, contact) in grasp.contacts.iter().enumerate() {
        if mask & (1 << i) == 0 {
            continue;
        }
        let (n, t1, t2) = (forces[3 * i], forces[3 * i + 1], forces[3 * i + 2]);
        if n < -SHIELD_FEAS_TOL {
            return false;
        }
        for &(cx, sx) in &dirs {
            if cx * t1 + sx * t2 > contact.mu * shrink * n + SHIELD_FEAS_TOL {
                return false;
            }
        }
    }
    for t in 0..3 {
        let u = state.pose[t] + pose_delta[t];
        if u < constraints.position_min[t] - SHIELD_FEAS_TOL
            || u > constraints.position_max[t] + SHIELD_FEAS_TOL
        {
            return false;
        }
    }
    if constraints.has_tilt_bounds() {
        let mut rot = Vector3::new(state.pose[3], state.pose[4], state.pose[5]);
        for k in 0..3 {
            rot[k] += pose_delta[3 + k];
        }
        let tilt = tilt_angles(&rot);
        for t in 0..2 {
            if tilt[t] < constraints.tilt_min[t] - SHIELD_FEAS_TOL
                || tilt[t] > constraints.tilt_max[t] + SHIELD_FEAS_TOL
            {
                return false;
            }
        }
    }
    true
}

/// Minimum-L1 projection of `action` for one shielded subset; `None` when the
/// subset admits nothing.
fn project_subset(
    grasp: &SpatialGrasp,
    lin: &LinearizedGrasp,
    state: &GraspState,
    constraints: &ShieldConstraints,
    mask: usize,
    action: &DVector<f64>,
) -> Result<Option<DVector<f64>>, ComplianceError> {
    let l = lin.joint_count();
    let e_mat = &lin.internal_force;
    let f_mat = &lin.object_motion;
    let mut pinned = vec![false; l];
    for (i, contact) in grasp.contacts.iter().enumerate() {
        if mask & (1 << i) == 0 {
            for j in chain_to_base(&grasp.hand, contact.link)
                .map_err(|link| GraspError::UnreachableLink { index: i, link })?
            {
                pinned[j] = true;
            }
        }
    }

    let rot = Vector3::new(state.pose[3], state.pose[4], state.pose[5]);
    let tilt_now = tilt_angles(&rot);
    let grad = tilt_gradient(&rot);
    // Tilt row coefficients over the action: ∇r · F_rot.
    let tilt_coeff = |t: usize| -> Vec<f64> {
        (0..l)
            .map(|j| (0..3).map(|k| grad[t][k] * f_mat[(3 + k, j)]).sum())
            .collect()
    };
    let tilt_rows: Vec<(usize, Vec<f64>)> = if constraints.has_tilt_bounds() {
        (0..2).map(|t| (t, tilt_coeff(t))).collect()
    } else {
        Vec::new()
    };

    // `offset[t]` is the constant the linearized tilt model adds to the row
    // value; the Newton pass replaces it with the exact angle at the first
    // optimum, re-centering the same linear model once.
    let solve_with_tilt_offsets = |offsets: &[f64; 2],
                                   anchor: Option<&DVector<f64>>|
     -> Result<Option<DVector<f64>>, ComplianceError> {
        let mut model = Model::new();
        let ids: Vec<_> = (0..l)
            .map(|j| {
                if pinned[j] {
                    model.add_var(action[j], action[j])
                } else {
                    model.add_var(-constraints.step_cap, constraints.step_cap)
                }
            })
            .collect();
        let mut objective = LinExpr::new();
        for j in 0..l {
            let dev = model.add_var(0.0, f64::INFINITY);
            objective.add(dev, 1.0);
            // dev ≥ |a_j − ã_j| via two one-sided rows.
            model.add_constraint(
                LinExpr::term(ids[j], 1.0).plus(dev, 1.0),
                Relation::Ge,
                action[j],
            );
            model.add_constraint(
                LinExpr::term(ids[j], -1.0).plus(dev, 1.0),
                Relation::Ge,
                -action[j],
            );
        }
        let (dirs, shrink) = cone_planes();
        for (i, contact) in grasp.contacts.iter().enumerate() {
            if mask & (1 << i) == 0 {
                continue;
            }
            let (cn, ct1, ct2) = (
                state.contact_forces[3 * i],
                state.contact_forces[3 * i + 1],
                state.contact_forces[3 * i + 2],
            );
            let mut normal = LinExpr::new();
            for j in 0..l {
                normal.add(ids[j], e_mat[(3 * i, j)]);
            }
            model.add_constraint(normal, Relation::Ge, -cn);
            for &(cx, sx) in &dirs {
                let cap = contact.mu * shrink;
                let mut row = LinExpr::new();
                for j in 0..l {
                    row.add(
                        ids[j],
                        cx * e_mat[(3 * i + 1, j)] + sx * e_mat[(3 * i + 2, j)]
                            - cap * e_mat[(3 * i, j)],
                    );
                }
                model.add_constraint(row, Relation::Le, cap * cn - cx * ct1 - sx * ct2);
            }
        }
        for t in 0..3 {
            if !constraints.position_min[t].is_finite()
                && !constraints.position_max[t].is_finite()
            {
                continue;
            }
            let mut row = LinExpr::new();
            for j in 0..l {
                row.add(ids[j], f_mat[(t, j)]);
            }
            if constraints.position_max[t].is_finite() {
                model.add_constraint(
                    row.clone(),
                    Relation::Le,
                    constraints.position_max[t] - state.pose[t],
                );
            }
            if constraints.position_min[t].is_finite() {
                model.add_constraint(
                    row,
                    Relation::Ge,
                    constraints.position_min[t] - state.pose[t],
                );
            }
        }
        for (t, coeffs) in &tilt_rows {
            // Row value models r_t(ã) ≈ offsets[t] + Σ coeffs·(ã − anchor).
            let anchored: f64 = anchor
                .map(|a| (0..l).map(|j| coeffs[j] * a[j]).sum())
                .unwrap_or(0.0);
            let mut row = LinExpr::new();
            for j in 0..l {
                row.add(ids[j], coeffs[j]);
            }
            if constraints.tilt_max[*t].is_finite() {
                model.add_constraint(
                    row.clone(),
                    Relation::Le,
                    constraints.tilt_max[*t] - offsets[*t] + anchored,
                );
            }
            if constraints.tilt_min[*t].is_finite() {
                model.add_constraint(
                    row,
                    Relation::Ge,
                    constraints.tilt_min[*t] - offsets[*t] + anchored,
                );
            }
        }
        model.set_objective(Sense::Minimize, objective);
        let res = solve_lp(&model, &SolverConfig::default())?;
        if !res.is_feasible() {
            return Ok(None);
        }
        Ok(Some(DVector::from_iterator(l, ids.iter().map(|&v| res.x[v]))))
    };

    let first = match solve_with_tilt_offsets(&[tilt_now[0], tilt_now[1]], None)? {
        Some(sol) => sol,
        None => return Ok(None),
    };
    if tilt_rows.is_empty() {
        return Ok(Some(first));
    }
    // One Newton correction: evaluate the exact tilt at the optimum and
    // re-center the linear rows there.
    let delta = f_mat * &first;
    let rot_at = Vector3::new(rot[0] + delta[3], rot[1] + delta[4], rot[2] + delta[5]);
    let exact = tilt_angles(&rot_at);
    let within = (0..2).all(|t| {
        exact[t] >= constraints.tilt_min[t] - SHIELD_FEAS_TOL
            && exact[t] <= constraints.tilt_max[t] + SHIELD_FEAS_TOL
    });
    if within {
        return Ok(Some(first));
    }
    solve_with_tilt_offsets(&[exact[0], exact[1]], Some(&first))
}

/// Clips a proposed setpoint change to the closest safe one.
///
/// Enumerates every subset of contacts as the shielded set, discards subsets
/// with fewer than two contacts or without force closure on their own, and
/// solves the min-deviation projection for the rest with the joints of every
/// unshielded contact's kinematic chain pinned to the proposal. The subsets
/// solve concurrently; the feasible result with the smallest L1 deviation
/// wins (ties prefer more shielded contacts). A proposal already safe for the
/// all-contacts subset returns unchanged.
pub fn shield_project(
    grasp: &SpatialGrasp,
    lin: &LinearizedGrasp,
    state: &GraspState,
    action: &DVector<f64>,
    constraints: &ShieldConstraints,
) -> Result<ShieldOutcome, ComplianceError> {
    grasp.validate()?;
    constraints.validate()?;
    let m = grasp.contacts.len();
    let l = grasp.hand.joints.len();
    if lin.contact_count() != m || lin.joint_count() != l {
        return Err(ComplianceError::Config(
            "linearization does not match the grasp".into(),
        ));
    }
    if action.len() != l {
        return Err(ComplianceError::Config(format!(
            "action has {} entries for {} joints",
            action.len(),
            l
        )));
    }
    if state.contact_forces.len() != 3 * m {
        return Err(ComplianceError::Config(format!(
            "state has {} force components for {} contacts",
            state.contact_forces.len(),
            m
        )));
    }

    let mut admissible = Vec::new();
    for mask in 0usize..(1 << m) {
        if (mask.count_ones() as usize) < 2 {
            continue;
        }
        let subset = SpatialGrasp {
            contacts: grasp
                .contacts
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, c)| c.clone())
                .collect(),
            hand: grasp.hand.clone(),
        };
        if force_closure_check(&GraspModel::Spatial(subset))? {
            admissible.push(mask);
        }
    }
    if admissible.is_empty() {
        return Ok(ShieldOutcome::Infeasible);
    }

    let full = (1usize << m) - 1;
    if admissible.contains(&full)
        && action_feasible(grasp, lin, state, constraints, full, action)
    {
        return Ok(ShieldOutcome::Safe(SafeAction {
            action: action.clone(),
            deviation: 0.0,
            shielded: (0..m).collect(),
        }));
    }

    let candidates: Vec<(f64, usize, DVector<f64>)> = admissible
        .par_iter()
        .map(|&mask| {
            project_subset(grasp, lin, state, constraints, mask, action)
                .map(|sol| sol.map(|a| ((action - &a).abs().sum(), mask, a)))
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    let best = candidates.into_iter().min_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(b.1.count_ones().cmp(&a.1.count_ones()))
            .then(a.1.cmp(&b.1))
    });
    Ok(match best {
        Some((deviation, mask, action)) => ShieldOutcome::Safe(SafeAction {
            action,
            deviation,
            shielded: (0..m).filter(|i| mask & (1 << i) != 0).collect(),
        }),
        None => ShieldOutcome::Infeasible,
    })
}

#[cfg(test)]
mod tests {
    use nalgebra::Vector3;

    use super::*;
    use crate::fixtures;

    /// Box fixture with both under-edge contacts raised to z = 0.01 m, so a
    /// symmetric squeeze pitches the object about x̂ and tilts its z-axis.
    fn tilted_bottom_box() -> SpatialGrasp {
        let mut g = fixtures::two_finger_box();
        g.contacts[1].position.z = 0.01;
        g.contacts[3].position.z = 0.01;
        g
    }

    /// Settled forces for the box fixture: side pads at `side` N, under-edge
    /// supports at `bottom` N, no tangential load, pose at the origin.
    fn box_state(side: f64, bottom: f64) -> GraspState {
        let mut forces = DVector::zeros(12);
        forces[0] = side;
        forces[3] = bottom;
        forces[6] = side;
        forces[9] = bottom;
        GraspState {
            contact_forces: forces,
            pose: Vector6::zeros(),
        }
    }

    fn lin_box() -> (SpatialGrasp, LinearizedGrasp) {
        let g = fixtures::two_finger_box();
        let lin = linearize(&g, &ComplianceModel::unit_contacts(4, 2)).unwrap();
        (g, lin)
    }

    /// Plain Gauss–Jordan inversion with partial pivoting, as an oracle
    /// independent of the factorization `linearize` uses.
    fn gauss_invert(a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let mut work = a.clone();
        let mut inv = DMatrix::<f64>::identity(n, n);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| work[(r, col)].abs().total_cmp(&work[(s, col)].abs()))
                .unwrap();
            work.swap_rows(col, pivot);
            inv.swap_rows(col, pivot);
            let p = work[(col, col)];
            assert!(p.abs() > 1e-14, "oracle hit a singular pivot");
            for j in 0..n {
                work[(col, j)] /= p;
                inv[(col, j)] /= p;
            }
            for r in 0..n {
                if r != col {
                    let f = work[(r, col)];
                    if f != 0.0 {
                        for j in 0..n {
                            work[(r, j)] -= f * work[(col, j)];
                            inv[(r, j)] -= f * inv[(col, j)];
                        }
                    }
                }
            }
        }
        inv
    }

    #[test]
    fn unit_contact_springs_and_rigid_joints_give_identity_stiffness() {
        let g = fixtures::two_finger_box();
        let lin = linearize(&g, &ComplianceModel::unit_contacts(4, 2)).unwrap();
        let eye = DMatrix::<f64>::identity(12, 12);
        assert!((lin.stiffness - eye).amax() < 1e-12);
    }

    #[test]
    fn stiffness_matches_a_gauss_elimination_oracle() {
        let g = fixtures::offset_jaws(0.01);
        let compliance = ComplianceModel {
            contact: DVector::from_element(6, 1.0),
            joint: DVector::from_element(2, 1.0),
        };
        let j = g.jacobian().unwrap();
        let total = DMatrix::<f64>::identity(6, 6) + &j * j.transpose();
        let oracle = gauss_invert(&total);
        // The two-jaw grasp has no G K Gᵀ inverse (two point contacts leave
        // the twist about their connecting line free), so compute K the same
        // way linearize does, against the independent oracle.
        let stiffness = total.cholesky().unwrap().inverse();
        assert!(
            (&stiffness - &oracle).amax() < 1e-10,
            "stiffness deviates from the oracle by {}",
            (&stiffness - &oracle).amax()
        );
        // The box fixture exercises the full path including G K Gᵀ.
        let (gx, lin) = lin_box();
        let jx = gx.jacobian().unwrap();
        let totalx = DMatrix::<f64>::identity(12, 12)
            + &jx * DMatrix::zeros(2, 2) * jx.transpose();
        assert!((lin.stiffness - gauss_invert(&totalx)).amax() < 1e-10);
    }

    #[test]
    fn stiffness_is_symmetric_positive_definite() {
        let g = fixtures::cube_grasp();
        let compliance = ComplianceModel {
            contact: DVector::from_iterator(9, (0..9).map(|i| 0.5 + 0.1 * i as f64)),
            joint: DVector::from_iterator(3, (0..3).map(|i| 0.2 + 0.3 * i as f64)),
        };
        let lin = linearize(&g, &compliance).unwrap();
        let asym = (&lin.stiffness - lin.stiffness.transpose()).amax();
        assert!(asym < 1e-9, "asymmetry {asym}");
        assert!(lin.stiffness.clone().cholesky().is_some());
    }

    #[test]
    fn internal_forces_produce_no_net_wrench() {
        for (g, lin) in [
            {
                let g = fixtures::cube_grasp();
                let lin = linearize(&g, &ComplianceModel::unit_contacts(3, 3)).unwrap();
                (g, lin)
            },
            lin_box(),
        ] {
            let ge = g.grasp_map() * &lin.internal_force;
            assert!(ge.amax() < 1e-8, "‖G·E‖∞ = {}", ge.amax());
            let l = lin.joint_count();
            for seed in [1.0, -0.37, 0.82] {
                let dq = DVector::from_iterator(l, (0..l).map(|j| seed * (j as f64 - 0.4)));
                let wrench = g.grasp_map() * (&lin.internal_force * &dq);
                assert!(wrench.amax() < 1e-8);
            }
        }
    }

    #[test]
    fn singular_inputs_name_the_offending_matrix() {
        let g = fixtures::offset_jaws(0.0);
        let rigid = ComplianceModel {
            contact: DVector::zeros(6),
            joint: DVector::zeros(2),
        };
        match linearize(&g, &rigid) {
            Err(ComplianceError::Singular { matrix }) => {
                assert!(matrix.contains("C_contacts"), "named {matrix}");
            }
            other => panic!("expected a singular-compliance error, got {other:?}"),
        }
        // Two point contacts leave the twist about their connecting line
        // unresisted, so the reflected stiffness is rank deficient.
        match linearize(&g, &ComplianceModel::unit_contacts(2, 2)) {
            Err(ComplianceError::Singular { matrix }) => {
                assert!(matrix.contains("G K G"), "named {matrix}");
            }
            other => panic!("expected a singular grasp-map error, got {other:?}"),
        }
    }

    #[test]
    fn prediction_is_linear_and_respects_the_cap() {
        let (_, lin) = lin_box();
        let state = box_state(1.0, 0.5);
        let zero = predict_state(&lin, &state, &DVector::zeros(2), DEFAULT_STEP_CAP).unwrap();
        assert!((zero.contact_forces - &state.contact_forces).amax() < 1e-12);
        assert!((zero.pose - state.pose).amax() < 1e-12);

        let a = DVector::from_vec(vec![0.01, -0.02]);
        let b = DVector::from_vec(vec![-0.015, 0.02]);
        let after_a = predict_state(&lin, &state, &a, DEFAULT_STEP_CAP).unwrap();
        let two_steps = predict_state(&lin, &after_a, &b, DEFAULT_STEP_CAP).unwrap();
        let one_step = predict_state(&lin, &state, &(&a + &b), DEFAULT_STEP_CAP).unwrap();
        assert!((two_steps.contact_forces - one_step.contact_forces).amax() < 1e-12);
        assert!((two_steps.pose - one_step.pose).amax() < 1e-12);

        match predict_state(&lin, &state, &DVector::from_vec(vec![0.06, 0.0]), 0.05) {
            Err(ComplianceError::StepCap { .. }) => {}
            other => panic!("expected a step-cap refusal, got {other:?}"),
        }
    }

    #[test]
    fn squeezing_raises_every_normal_force() {
        let (_, lin) = lin_box();
        let state = box_state(0.5, 0.5);
        let squeeze = DVector::from_vec(vec![0.02, 0.02]);
        let next = predict_state(&lin, &state, &squeeze, DEFAULT_STEP_CAP).unwrap();
        for i in 0..4 {
            assert!(
                next.contact_forces[3 * i] > state.contact_forces[3 * i] + 1e-7,
                "contact {i} normal did not rise"
            );
        }
    }

    #[test]
    fn safe_actions_pass_through_unchanged() {
        let (g, lin) = lin_box();
        let state = box_state(1.0, 0.5);
        let squeeze = DVector::from_vec(vec![0.01, 0.01]);
        match shield_project(&g, &lin, &state, &squeeze, &ShieldConstraints::default()).unwrap() {
            ShieldOutcome::Safe(safe) => {
                assert_eq!(safe.deviation, 0.0);
                assert_eq!(safe.shielded, vec![0, 1, 2, 3]);
                assert!((safe.action - squeeze).amax() < 1e-12);
            }
            ShieldOutcome::Infeasible => panic!("a gentle squeeze is safe"),
        }
    }

    #[test]
    fn collinear_pairs_cannot_carry_the_shield() {
        // Opening both fingers unloads the zero-preload supports. The
        // side-pad pair alone would accept the action unchanged (their own
        // joints pinned by the unshielded supports), but any two point
        // contacts fail force closure — the twist about their connecting
        // line is free — so the shield must keep at least three contacts and
        // correct the action instead.
        let (g, lin) = lin_box();
        let state = box_state(0.2, 0.0);
        let release = DVector::from_vec(vec![-0.04, -0.035]);
        let next = predict_state(&lin, &state, &release, DEFAULT_STEP_CAP).unwrap();
        assert!(
            next.contact_forces[3] < -1e-4 || next.contact_forces[9] < -1e-4,
            "test setup: the release must unload a support"
        );
        match shield_project(&g, &lin, &state, &release, &ShieldConstraints::default()).unwrap() {
            ShieldOutcome::Safe(safe) => {
                assert!(safe.shielded.len() >= 3, "shielded {:?}", safe.shielded);
                assert!(safe.deviation > 1e-4, "projection had to move the action");
                let fixed = predict_state(&lin, &state, &safe.action, DEFAULT_STEP_CAP).unwrap();
                for &i in &safe.shielded {
                    assert!(
                        fixed.contact_forces[3 * i] >= -1e-7,
                        "shielded contact {i} still breaks"
                    );
                }
            }
            ShieldOutcome::Infeasible => panic!("a correction exists (e.g. the zero action)"),
        }
    }

    #[test]
    fn projection_matches_a_grid_search_oracle() {
        let (g, lin) = lin_box();
        let state = box_state(0.2, 0.0);
        let constraints = ShieldConstraints::default();
        let release = DVector::from_vec(vec![-0.04, -0.035]);
        let safe = match shield_project(&g, &lin, &state, &release, &constraints).unwrap() {
            ShieldOutcome::Safe(safe) => safe,
            ShieldOutcome::Infeasible => panic!("projection must exist"),
        };

        // Independent oracle: the same admissible subsets, but each solved by
        // exhaustive grid search with feasibility evaluated directly from the
        // linear maps.
        let (dirs, shrink) = cone_planes();
        let cap = constraints.step_cap;
        let step = 1e-3;
        let cells = (2.0 * cap / step).round() as i64;
        let feasible = |mask: usize, a: &DVector<f64>| -> bool {
            let forces = &state.contact_forces + &lin.internal_force * a;
            (0..4).all(|ci| {
                if mask & (1 << ci) == 0 {
                    return true;
                }
                let (n, t1, t2) = (forces[3 * ci], forces[3 * ci + 1], forces[3 * ci + 2]);
                n >= 0.0
                    && dirs
                        .iter()
                        .all(|&(cx, sx)| cx * t1 + sx * t2 <= g.contacts[ci].mu * shrink * n)
            })
        };
        let mut best = f64::INFINITY;
        for mask in 0usize..16 {
            if mask.count_ones() < 2 {
                continue;
            }
            let subset = SpatialGrasp {
                contacts: g
                    .contacts
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, c)| c.clone())
                    .collect(),
                hand: g.hand.clone(),
            };
            if !force_closure_check(&GraspModel::Spatial(subset)).unwrap() {
                continue;
            }
            let mut pinned = [false; 2];
            for (i, c) in g.contacts.iter().enumerate() {
                if mask & (1 << i) == 0 {
                    pinned[c.link as usize] = true;
                }
            }
            let axis: Vec<Vec<f64>> = (0..2)
                .map(|j| {
                    if pinned[j] {
                        vec![release[j]]
                    } else {
                        (0..=cells).map(|i| -cap + i as f64 * step).collect()
                    }
                })
                .collect();
            for &a0 in &axis[0] {
                for &a1 in &axis[1] {
                    let a = DVector::from_vec(vec![a0, a1]);
                    if feasible(mask, &a) {
                        best = best.min((&release - &a).abs().sum());
                    }
                }
            }
        }
        assert!(best.is_finite(), "oracle found no feasible action");
        assert!(
            (best - safe.deviation).abs() <= 2e-3,
            "grid oracle {best} vs projection {}",
            safe.deviation
        );
    }

    #[test]
    fn projection_is_idempotent() {
        let (g, lin) = lin_box();
        let state = box_state(0.2, 0.0);
        let release = DVector::from_vec(vec![-0.04, -0.035]);
        let first = match shield_project(&g, &lin, &state, &release, &ShieldConstraints::default())
            .unwrap()
        {
            ShieldOutcome::Safe(safe) => safe,
            ShieldOutcome::Infeasible => panic!("projection must exist"),
        };
        let second = match shield_project(
            &g,
            &lin,
            &state,
            &first.action,
            &ShieldConstraints::default(),
        )
        .unwrap()
        {
            ShieldOutcome::Safe(safe) => safe,
            ShieldOutcome::Infeasible => panic!("projected action must stay feasible"),
        };
        assert!(second.deviation < 1e-9, "re-projection moved by {}", second.deviation);
        assert!((second.action - first.action).amax() < 1e-9);
    }

    #[test]
    fn tilt_bounds_clip_twisting_actions() {
        let g = tilted_bottom_box();
        let lin = linearize(&g, &ComplianceModel::unit_contacts(4, 2)).unwrap();
        let state = box_state(1.0, 0.5);
        let squeeze = DVector::from_vec(vec![0.04, 0.04]);
        // Precondition: unconstrained, this squeeze tilts past the bound.
        let free = predict_state(&lin, &state, &squeeze, DEFAULT_STEP_CAP).unwrap();
        let free_tilt = tilt_angles(&Vector3::new(free.pose[3], free.pose[4], free.pose[5]));
        let worst = free_tilt[0].abs().max(free_tilt[1].abs());
        let axis = if free_tilt[0].abs() >= free_tilt[1].abs() { 0 } else { 1 };
        let bound = 0.5 * worst;
        assert!(bound > 1e-7, "fixture must actually tilt, got {free_tilt:?}");
        let mut constraints = ShieldConstraints::default();
        constraints.tilt_min[axis] = -bound;
        constraints.tilt_max[axis] = bound;
        let safe = match shield_project(&g, &lin, &state, &squeeze, &constraints).unwrap() {
            ShieldOutcome::Safe(safe) => safe,
            ShieldOutcome::Infeasible => panic!("scaling back the squeeze satisfies the bound"),
        };
        assert!(safe.deviation > 1e-7);
        let clipped = predict_state(&lin, &state, &safe.action, DEFAULT_STEP_CAP).unwrap();
        let tilt = tilt_angles(&Vector3::new(
            clipped.pose[3],
            clipped.pose[4],
            clipped.pose[5],
        ));
        assert!(
            tilt[axis].abs() <= bound + 1e-6,
            "tilt {} exceeds bound {bound}",
            tilt[axis]
        );
    }

    #[test]
    fn pose_box_blocks_translation() {
        let (g, lin) = lin_box();
        let state = box_state(1.0, 0.5);
        // Close the left jaw harder than the right: the box shifts along +x.
        let push = DVector::from_vec(vec![0.04, -0.01]);
        let free = predict_state(&lin, &state, &push, DEFAULT_STEP_CAP).unwrap();
        assert!(free.pose[0] > 1e-5, "fixture must translate under the push");
        let mut constraints = ShieldConstraints::default();
        constraints.position_max[0] = 0.25 * free.pose[0];
        let safe = match shield_project(&g, &lin, &state, &push, &constraints).unwrap() {
            ShieldOutcome::Safe(safe) => safe,
            ShieldOutcome::Infeasible => panic!("a smaller push satisfies the box"),
        };
        let clipped = predict_state(&lin, &state, &safe.action, DEFAULT_STEP_CAP).unwrap();
        assert!(clipped.pose[0] <= constraints.position_max[0] + 1e-9);
    }

    #[test]
    fn degenerate_constraint_boxes_are_rejected() {
        let (g, lin) = lin_box();
        let state = box_state(1.0, 0.5);
        let mut constraints = ShieldConstraints::default();
        constraints.position_min[1] = 1.0;
        constraints.position_max[1] = -1.0;
        match shield_project(&g, &lin, &state, &DVector::zeros(2), &constraints) {
            Err(ComplianceError::Config(_)) => {}
            other => panic!("expected a config error, got {other:?}"),
        }
    }
}
