//! Grasp geometry: contact frames, the grasp map `G`, and the hand Jacobian `J`.
//!
//! Everything downstream consumes the matrices built here. Conventions are the
//! standard point-contact-with-friction ones: a contact frame is (normal,
//! tangent(s)) with the normal pointing from the contacted link into the
//! object; a grasp-map column for force direction `u` at position `p` is
//! `(u, p × u)` (planar: `(u_x, u_y, p_x u_y − p_y u_x)`); a Jacobian row
//! block gives the contact-point velocity per unit joint rate, expressed in
//! the contact frame. Units are SI throughout: meters, newtons,
//! newton-meters, radians.

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraspError {
    #[error("contact {index}: {msg}")]
    InvalidContact { index: usize, msg: String },
    #[error("hand model: {0}")]
    InvalidHand(String),
    #[error("contact {index} sits on link {link}, which has no chain to the base")]
    UnreachableLink { index: usize, link: i32 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Right-handed orthonormal contact frame; `n` points into the object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactFrame {
    pub n: Vector3<f64>,
    pub t1: Vector3<f64>,
    pub t2: Vector3<f64>,
}

/// A spatial point contact with friction.
#[derive(Debug, Clone)]
pub struct ContactSpec {
    /// Contact point in the object frame, meters.
    pub position: Vector3<f64>,
    /// Unit vector along which the link pushes into the object.
    pub normal: Vector3<f64>,
    /// Static friction coefficient.
    pub mu: f64,
    /// Index of the hand link carrying the contact; −1 means fixed world.
    pub link: i32,
    /// Virtual contact stiffness, relative units (only ratios matter).
    pub stiffness: f64,
}

/// A planar point contact with friction and a normal preload.
#[derive(Debug, Clone)]
pub struct PlanarContact {
    pub position: Vector2<f64>,
    pub normal: Vector2<f64>,
    pub mu: f64,
    /// Preload force p_i ≥ 0 along the normal when the object is unloaded, newtons.
    pub preload: f64,
    /// Virtual contact stiffness, relative units.
    pub stiffness: f64,
}

/// A revolute joint; link `i` is the child of joint `i`.
#[derive(Debug, Clone)]
pub struct Joint {
    /// Link the joint is mounted on (−1 = base).
    pub parent: i32,
    /// Unit rotation axis in the object frame.
    pub axis: Vector3<f64>,
    /// A point on the axis, meters.
    pub origin: Vector3<f64>,
}

/// Joints plus the actuation route: `transmission` (l×a) maps actuator forces
/// to joint torques, `commanded` holds the a commanded actuator forces.
#[derive(Debug, Clone)]
pub struct HandModel {
    pub joints: Vec<Joint>,
    pub transmission: DMatrix<f64>,
    pub commanded: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct PlanarGrasp {
    pub contacts: Vec<PlanarContact>,
}

#[derive(Debug, Clone)]
pub struct SpatialGrasp {
    pub contacts: Vec<ContactSpec>,
    pub hand: HandModel,
}

#[derive(Debug, Clone)]
pub enum GraspModel {
    Planar(PlanarGrasp),
    Spatial(SpatialGrasp),
}

/// Answer record for an equilibrium query. Planar problems leave the joint
/// fields empty; `residual` is the net wrench left unbalanced (zero for exact
/// equilibrium solutions, the tracked quantity for the iterative solver).
#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    /// Contact force components in contact frames, 2m (planar) or 3m entries.
    pub contact_forces: DVector<f64>,
    /// Object displacement, 3 (planar) or 6 entries.
    pub object_motion: DVector<f64>,
    /// Joint motions, l entries.
    pub joint_motion: DVector<f64>,
    /// Joint torques, l entries.
    pub joint_torques: DVector<f64>,
    /// Actuator forces, a entries (empty for planar grasps).
    pub actuator_forces: DVector<f64>,
    /// Which contacts persist (still touch the object) in the reported state.
    pub contact_persist: Vec<bool>,
    /// Which actuators are held by their nonbackdrivable transmission.
    pub actuator_locked: Vec<bool>,
    /// Net wrench residual, 3 (planar) or 6 entries.
    pub residual: DVector<f64>,
}

/// Stated unit vectors (normals, joint axes) may deviate from length one by
/// at most this much; they are used exactly as given, never renormalized.
const UNIT_TOL: f64 = 1e-6;

/// Builds the deterministic right-handed frame for a contact normal: `t1` is
/// the global axis least aligned with `n` (lowest index on ties) with the
/// normal component projected out, and `t2 = n × t1`.
pub fn build_contact_frame(normal: &Vector3<f64>) -> Result<ContactFrame, GraspError> {
    let len = normal.norm();
    if (len - 1.0).abs() > UNIT_TOL {
        return Err(GraspError::InvalidContact {
            index: 0,
            msg: format!("normal must be unit length (got {len})"),
        });
    }
    let n = normal / len;
    let mut least = 0usize;
    let mut least_dot = f64::INFINITY;
    for k in 0..3 {
        let d = n[k].abs();
        if d < least_dot {
            least_dot = d;
            least = k;
        }
    }
    let mut e = Vector3::zeros();
    e[least] = 1.0;
    let t1 = (e - n * n[least]).normalize();
    let t2 = n.cross(&t1);
    Ok(ContactFrame { n, t1, t2 })
}

/// Planar frame: tangent is the normal rotated 90° counterclockwise.
pub fn planar_tangent(normal: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-normal.y, normal.x)
}

/// Builds the grasp map. Planar: 3×2m with per-contact columns (normal,
/// tangent); spatial: 6×3m with columns (n, t1, t2). A column for direction
/// `u` at position `p` is `(u, p × u)`.
pub fn build_grasp_map(grasp: &GraspModel) -> DMatrix<f64> {
    match grasp {
        GraspModel::Planar(g) => {
            let m = g.contacts.len();
            let mut gm = DMatrix::zeros(3, 2 * m);
            for (i, c) in g.contacts.iter().enumerate() {
                let t = planar_tangent(&c.normal);
                for (k, u) in [c.normal, t].into_iter().enumerate() {
                    let col = 2 * i + k;
                    gm[(0, col)] = u.x;
                    gm[(1, col)] = u.y;
                    gm[(2, col)] = c.position.x * u.y - c.position.y * u.x;
                }
            }
            gm
        }
        GraspModel::Spatial(g) => {
            let m = g.contacts.len();
            let mut gm = DMatrix::zeros(6, 3 * m);
            for (i, c) in g.contacts.iter().enumerate() {
                let f = build_contact_frame(&c.normal).expect("validated normal");
                for (k, u) in [f.n, f.t1, f.t2].into_iter().enumerate() {
                    let col = 3 * i + k;
                    let moment = c.position.cross(&u);
                    for r in 0..3 {
                        gm[(r, col)] = u[r];
                        gm[(r + 3, col)] = moment[r];
                    }
                }
            }
            gm
        }
    }
}

/// Builds the 3m×l hand Jacobian: the row block of contact `i` holds, per
/// joint column, the contact-point velocity from a unit joint rate expressed
/// in the contact frame — `axis × (p − origin)` for every joint on the chain
/// from the contact's link to the base, zero elsewhere.
pub fn build_hand_jacobian(
    hand: &HandModel,
    contacts: &[ContactSpec],
) -> Result<DMatrix<f64>, GraspError> {
    let l = hand.joints.len();
    let m = contacts.len();
    let mut j = DMatrix::zeros(3 * m, l);
    for (i, c) in contacts.iter().enumerate() {
        let frame = build_contact_frame(&c.normal)?;
        for joint_idx in chain_to_base(hand, c.link).map_err(|link| {
            GraspError::UnreachableLink { index: i, link }
        })? {
            let joint = &hand.joints[joint_idx];
            let v = joint.axis.cross(&(c.position - joint.origin));
            j[(3 * i, joint_idx)] = frame.n.dot(&v);
            j[(3 * i + 1, joint_idx)] = frame.t1.dot(&v);
            j[(3 * i + 2, joint_idx)] = frame.t2.dot(&v);
        }
    }
    Ok(j)
}

/// Joint indices on the chain from `link` down to the base (empty for −1).
pub(crate) fn chain_to_base(hand: &HandModel, link: i32) -> Result<Vec<usize>, i32> {
    let mut chain = Vec::new();
    let mut cur = link;
    let mut steps = 0;
    while cur != -1 {
        if cur < 0 || cur as usize >= hand.joints.len() || steps > hand.joints.len() {
            return Err(link);
        }
        chain.push(cur as usize);
        cur = hand.joints[cur as usize].parent;
        steps += 1;
    }
    Ok(chain)
}

/// Relative motion at the contacts for object displacement `r` and joint
/// motions `q`: `d = G^T r − J q`, in contact-frame coordinates.
pub fn relative_contact_motion(
    g: &DMatrix<f64>,
    j: &DMatrix<f64>,
    r: &DVector<f64>,
    q: &DVector<f64>,
) -> DVector<f64> {
    g.transpose() * r - j * q
}

impl PlanarGrasp {
    pub fn validate(&self) -> Result<(), GraspError> {
        if self.contacts.is_empty() {
            return Err(GraspError::Dimension("grasp has no contacts".into()));
        }
        for (i, c) in self.contacts.iter().enumerate() {
            let bad = |msg: String| GraspError::InvalidContact { index: i, msg };
            if (c.normal.norm() - 1.0).abs() > UNIT_TOL {
                return Err(bad(format!("normal must be unit length (got {})", c.normal.norm())));
            }
            if !(c.mu >= 0.0) {
                return Err(bad(format!("mu must be >= 0 (got {})", c.mu)));
            }
            if !(c.preload >= 0.0) {
                return Err(bad(format!("preload must be >= 0 (got {})", c.preload)));
            }
            if !(c.stiffness > 0.0) {
                return Err(bad(format!("stiffness must be > 0 (got {})", c.stiffness)));
            }
        }
        Ok(())
    }
}

impl SpatialGrasp {
    pub fn validate(&self) -> Result<(), GraspError> {
        if self.contacts.is_empty() {
            return Err(GraspError::Dimension("grasp has no contacts".into()));
        }
        let l = self.hand.joints.len();
        let (rr, ra) = self.hand.transmission.shape();
        if rr != l {
            return Err(GraspError::InvalidHand(format!(
                "transmission has {rr} rows but the hand has {l} joints"
            )));
        }
        if self.hand.commanded.len() != ra {
            return Err(GraspError::InvalidHand(format!(
                "{} commanded forces for {ra} actuators",
                self.hand.commanded.len()
            )));
        }
        for (k, joint) in self.hand.joints.iter().enumerate() {
            if (joint.axis.norm() - 1.0).abs() > UNIT_TOL {
                return Err(GraspError::InvalidHand(format!(
                    "joint {k} axis must be unit length"
                )));
            }
            if joint.parent < -1 || joint.parent >= l as i32 {
                return Err(GraspError::InvalidHand(format!(
                    "joint {k} parent {} out of range",
                    joint.parent
                )));
            }
        }
        for (i, c) in self.contacts.iter().enumerate() {
            let bad = |msg: String| GraspError::InvalidContact { index: i, msg };
            if (c.normal.norm() - 1.0).abs() > UNIT_TOL {
                return Err(bad(format!("normal must be unit length (got {})", c.normal.norm())));
            }
            if !(c.mu >= 0.0) {
                return Err(bad(format!("mu must be >= 0 (got {})", c.mu)));
            }
            if !(c.stiffness > 0.0) {
                return Err(bad(format!("stiffness must be > 0 (got {})", c.stiffness)));
            }
            chain_to_base(&self.hand, c.link)
                .map_err(|link| GraspError::UnreachableLink { index: i, link })?;
        }
        Ok(())
    }

    pub fn contact_count(&self) -> usize {
        self.contacts.len()
    }

    pub fn joint_count(&self) -> usize {
        self.hand.joints.len()
    }

    pub fn actuator_count(&self) -> usize {
        self.hand.transmission.ncols()
    }

    pub fn grasp_map(&self) -> DMatrix<f64> {
        build_grasp_map(&GraspModel::Spatial(self.clone()))
    }

    pub fn jacobian(&self) -> Result<DMatrix<f64>, GraspError> {
        build_hand_jacobian(&self.hand, &self.contacts)
    }
}

impl GraspModel {
    pub fn validate(&self) -> Result<(), GraspError> {
        match self {
            GraspModel::Planar(g) => g.validate(),
            GraspModel::Spatial(g) => g.validate(),
        }
    }

    pub fn contact_count(&self) -> usize {
        match self {
            GraspModel::Planar(g) => g.contacts.len(),
            GraspModel::Spatial(g) => g.contacts.len(),
        }
    }
}
