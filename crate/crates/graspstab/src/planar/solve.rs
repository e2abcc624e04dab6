//! Per-state equilibrium solve and the overall planar stability decision.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::grasp::{build_grasp_map, EquilibriumSolution, GraspError, GraspModel, PlanarGrasp};
use crate::solver::{solve_lp, LinExpr, Model, Relation, Sense, SolverConfig};

use super::{complete_slip_states, enumerate_detach_states};

/// Slack allowed on the state-consistency inequalities after a direct solve.
const STATE_TOL: f64 = 1e-8;
/// Condition-number threshold above which the square state system is handed
/// to a feasibility LP instead of the LU solver.
const COND_LIMIT: f64 = 1e12;
/// Weight that keeps contact-force magnitudes from drifting in the LP
/// without competing with the minimum-motion objective.
const FORCE_WEIGHT: f64 = 1e-9;

/// Result of the planar stability decision.
#[derive(Debug, Clone)]
pub enum PlanarOutcome {
    /// Some contact state admits a consistent equilibrium; the witness
    /// solution is attached.
    Stable(EquilibriumSolution),
    /// No contact state balances the wrench.
    Unstable,
}

impl PlanarOutcome {
    pub fn is_stable(&self) -> bool {
        matches!(self, PlanarOutcome::Stable(_))
    }

    pub fn solution(&self) -> Option<&EquilibriumSolution> {
        match self {
            PlanarOutcome::Stable(sol) => Some(sol),
            PlanarOutcome::Unstable => None,
        }
    }
}

/// Attempts to balance `wrench` in one prescribed contact state.
///
/// `u[i]` is true where contact i persists, `s[i]` gives its slip sign
/// (ignored for detached contacts). The unknowns are the interleaved contact
/// forces (c_n, c_t per contact) and the object motion r. Persisting contacts
/// contribute the spring row c_n + k·(g_n·r) = p plus a roll (zero tangential
/// motion) or slip (force on the friction-cone edge) row; detached contacts
/// force c = 0. The square system is solved directly when well conditioned,
/// otherwise a minimum-motion feasibility LP decides the state. Returns the
/// equilibrium when the state's side conditions hold, `None` otherwise.
pub fn solve_state(
    grasp: &PlanarGrasp,
    g: &DMatrix<f64>,
    wrench: &Vector3<f64>,
    u: &[bool],
    s: &[i8],
) -> Option<EquilibriumSolution> {
    let m = grasp.contacts.len();
    debug_assert_eq!(g.ncols(), 2 * m);
    debug_assert_eq!(u.len(), m);
    debug_assert_eq!(s.len(), m);
    let n = 2 * m + 3;

    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for row in 0..3 {
        for j in 0..2 * m {
            a[(row, j)] = g[(row, j)];
        }
        b[row] = -wrench[row];
    }
    for (i, contact) in grasp.contacts.iter().enumerate() {
        let (rn, rt) = (3 + 2 * i, 3 + 2 * i + 1);
        if u[i] {
            a[(rn, 2 * i)] = 1.0;
            for rr in 0..3 {
                a[(rn, 2 * m + rr)] = contact.stiffness * g[(rr, 2 * i)];
            }
            b[rn] = contact.preload;
            match s[i] {
                0 => {
                    for rr in 0..3 {
                        a[(rt, 2 * m + rr)] = g[(rr, 2 * i + 1)];
                    }
                }
                1 => {
                    a[(rt, 2 * i + 1)] = 1.0;
                    a[(rt, 2 * i)] = contact.mu;
                }
                _ => {
                    a[(rt, 2 * i + 1)] = 1.0;
                    a[(rt, 2 * i)] = -contact.mu;
                }
            }
        } else {
            a[(rn, 2 * i)] = 1.0;
            a[(rt, 2 * i + 1)] = 1.0;
        }
    }

    if let Some(x) = try_direct(&a, &b) {
        // A nonsingular system has a unique candidate: either it satisfies
        // the state's inequalities or the state has no solution at all.
        return if state_consistent(grasp, g, &x, u, s, STATE_TOL) {
            Some(assemble(g, wrench, &x, u))
        } else {
            None
        };
    }
    solve_state_lp(grasp, g, wrench, u, s)
}

fn try_direct(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 0.0) || smax / smin >= COND_LIMIT {
        return None;
    }
    let x = a.clone().lu().solve(b)?;
    let resid = (a * &x - b).amax();
    let scale = 1.0 + b.amax() + x.amax();
    (resid <= 1e-8 * scale).then_some(x)
}

fn state_consistent(
    grasp: &PlanarGrasp,
    g: &DMatrix<f64>,
    x: &DVector<f64>,
    u: &[bool],
    s: &[i8],
    tol: f64,
) -> bool {
    let m = grasp.contacts.len();
    let r = Vector3::new(x[2 * m], x[2 * m + 1], x[2 * m + 2]);
    for (i, contact) in grasp.contacts.iter().enumerate() {
        let c_n = x[2 * i];
        let c_t = x[2 * i + 1];
        let d_n = (0..3).map(|rr| g[(rr, 2 * i)] * r[rr]).sum::<f64>();
        let d_t = (0..3).map(|rr| g[(rr, 2 * i + 1)] * r[rr]).sum::<f64>();
        if u[i] {
            if c_n < -tol {
                return false;
            }
            let ok = match s[i] {
                0 => c_t.abs() <= contact.mu * c_n + tol,
                1 => d_t >= -tol,
                _ => d_t <= tol,
            };
            if !ok {
                return false;
            }
        } else if contact.stiffness * d_n - contact.preload < -tol {
            return false;
        }
    }
    true
}

fn assemble(
    g: &DMatrix<f64>,
    wrench: &Vector3<f64>,
    x: &DVector<f64>,
    u: &[bool],
) -> EquilibriumSolution {
    let width = g.ncols();
    let c = x.rows(0, width).into_owned();
    let r = x.rows(width, 3).into_owned();
    let gc = g * &c;
    let residual = DVector::from_fn(3, |row, _| gc[row] + wrench[row]);
    EquilibriumSolution {
        contact_forces: c,
        object_motion: r,
        joint_motion: DVector::zeros(0),
        joint_torques: DVector::zeros(0),
        actuator_forces: DVector::zeros(0),
        contact_persist: u.to_vec(),
        actuator_locked: Vec::new(),
        residual,
    }
}

/// Feasibility LP used when the square state system is singular: the state
/// constraints become rows, and the objective picks the smallest motion
/// (L1 on r, with a vanishing tiebreak on force magnitudes).
fn solve_state_lp(
    grasp: &PlanarGrasp,
    g: &DMatrix<f64>,
    wrench: &Vector3<f64>,
    u: &[bool],
    s: &[i8],
) -> Option<EquilibriumSolution> {
    let m = grasp.contacts.len();
    let inf = f64::INFINITY;
    let mut mm = Model::new();
    let mut cn = Vec::with_capacity(m);
    let mut ct = Vec::with_capacity(m);
    for &persists in u {
        if persists {
            cn.push(mm.add_var(0.0, inf));
            ct.push(mm.add_var(-inf, inf));
        } else {
            cn.push(mm.add_var(0.0, 0.0));
            ct.push(mm.add_var(0.0, 0.0));
        }
    }
    let rv: Vec<_> = (0..3).map(|_| mm.add_var(-inf, inf)).collect();

    for row in 0..3 {
        let mut e = LinExpr::new();
        for i in 0..m {
            e = e
                .plus(cn[i], g[(row, 2 * i)])
                .plus(ct[i], g[(row, 2 * i + 1)]);
        }
        mm.add_constraint(e, Relation::Eq, -wrench[row]);
    }
    for (i, contact) in grasp.contacts.iter().enumerate() {
        let motion = |col: usize| {
            let mut e = LinExpr::new();
            for rr in 0..3 {
                e = e.plus(rv[rr], g[(rr, col)]);
            }
            e
        };
        if u[i] {
            let mut spring = LinExpr::term(cn[i], 1.0);
            for rr in 0..3 {
                spring = spring.plus(rv[rr], contact.stiffness * g[(rr, 2 * i)]);
            }
            mm.add_constraint(spring, Relation::Eq, contact.preload);
            match s[i] {
                0 => {
                    mm.add_constraint(motion(2 * i + 1), Relation::Eq, 0.0);
                    mm.add_constraint(
                        LinExpr::term(ct[i], 1.0).plus(cn[i], -contact.mu),
                        Relation::Le,
                        0.0,
                    );
                    mm.add_constraint(
                        LinExpr::term(ct[i], -1.0).plus(cn[i], -contact.mu),
                        Relation::Le,
                        0.0,
                    );
                }
                1 => {
                    mm.add_constraint(
                        LinExpr::term(ct[i], 1.0).plus(cn[i], contact.mu),
                        Relation::Eq,
                        0.0,
                    );
                    mm.add_constraint(motion(2 * i + 1), Relation::Ge, 0.0);
                }
                _ => {
                    mm.add_constraint(
                        LinExpr::term(ct[i], 1.0).plus(cn[i], -contact.mu),
                        Relation::Eq,
                        0.0,
                    );
                    mm.add_constraint(motion(2 * i + 1), Relation::Le, 0.0);
                }
            }
        } else {
            let mut release = LinExpr::new();
            for rr in 0..3 {
                release = release.plus(rv[rr], contact.stiffness * g[(rr, 2 * i)]);
            }
            mm.add_constraint(release, Relation::Ge, contact.preload);
        }
    }

    let mut obj = LinExpr::new();
    for rr in 0..3 {
        let t = mm.add_var(0.0, inf);
        mm.add_constraint(LinExpr::term(t, 1.0).plus(rv[rr], -1.0), Relation::Ge, 0.0);
        mm.add_constraint(LinExpr::term(t, 1.0).plus(rv[rr], 1.0), Relation::Ge, 0.0);
        obj = obj.plus(t, 1.0);
    }
    for i in 0..m {
        if u[i] {
            for v in [cn[i], ct[i]] {
                let t = mm.add_var(0.0, inf);
                mm.add_constraint(LinExpr::term(t, 1.0).plus(v, -1.0), Relation::Ge, 0.0);
                mm.add_constraint(LinExpr::term(t, 1.0).plus(v, 1.0), Relation::Ge, 0.0);
                obj = obj.plus(t, FORCE_WEIGHT);
            }
        }
    }
    mm.set_objective(Sense::Minimize, obj);

    let res = solve_lp(&mm, &SolverConfig::default()).ok()?;
    if !res.is_feasible() {
        return None;
    }
    let mut x = DVector::zeros(2 * m + 3);
    for i in 0..m {
        x[2 * i] = res.x[cn[i]];
        x[2 * i + 1] = res.x[ct[i]];
    }
    for rr in 0..3 {
        x[2 * m + rr] = res.x[rv[rr]];
    }
    debug_assert!(state_consistent(grasp, g, &x, u, s, 1e-6));
    Some(assemble(g, wrench, &x, u))
}

/// Decides quasi-static stability of a planar grasp under `wrench`.
///
/// Iterates every detach state against the complete slip-state set, zeroing
/// slip signs on detached contacts so equivalent systems are solved once, and
/// returns the first state that balances the wrench.
pub fn planar_stability(
    grasp: &PlanarGrasp,
    wrench: &Vector3<f64>,
) -> Result<PlanarOutcome, GraspError> {
    grasp.validate()?;
    let g = build_grasp_map(&GraspModel::Planar(grasp.clone()));
    let offsets: Vec<f64> = grasp
        .contacts
        .iter()
        .map(|c| c.preload / c.stiffness)
        .collect();
    let detaches = enumerate_detach_states(&g, &offsets);
    let slips = complete_slip_states(&g);
    let mut tried: HashSet<(Vec<bool>, Vec<i8>)> = HashSet::new();
    for d in &detaches {
        for sl in &slips {
            let masked: Vec<i8> = sl
                .s
                .iter()
                .zip(&d.u)
                .map(|(&si, &ui)| if ui { si } else { 0 })
                .collect();
            if !tried.insert((d.u.clone(), masked.clone())) {
                continue;
            }
            if let Some(sol) = solve_state(grasp, &g, wrench, &d.u, &masked) {
                return Ok(PlanarOutcome::Stable(sol));
            }
        }
    }
    Ok(PlanarOutcome::Unstable)
}
