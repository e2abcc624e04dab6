//! Reference grasps used by the examples, the CLI demos, and the test suite.
//!
//! Each constructor builds a small, fully specified model whose behavior is
//! known analytically, so solver changes can be checked against closed-form
//! numbers rather than recorded outputs.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::grasp::{ContactSpec, HandModel, Joint, SpatialGrasp};

/// Two hanging fingers holding a box between them, one revolute joint per
/// finger, direct drive. Each finger touches the box on its side face and
/// under its bottom edge, so pressing the box down or sideways loads contacts
/// whose joint torques the nonbackdrivable drives can hold passively, while
/// pulling it straight up engages nothing.
///
/// Geometry: box half-width 0.03 m, joints at (±0.06, 0.05) with axes chosen
/// so positive joint motion closes the finger onto the box.
pub fn two_finger_box() -> SpatialGrasp {
    let contact = |px: f64, py: f64, nx: f64, ny: f64, link: i32| ContactSpec {
        position: Vector3::new(px, py, 0.0),
        normal: Vector3::new(nx, ny, 0.0),
        mu: 0.4,
        link,
        stiffness: 1.0,
    };
    SpatialGrasp {
        contacts: vec![
            contact(-0.03, 0.0, 1.0, 0.0, 0),  // left side face
            contact(-0.02, -0.03, 0.0, 1.0, 0), // under the left edge
            contact(0.03, 0.0, -1.0, 0.0, 1),  // right side face
            contact(0.02, -0.03, 0.0, 1.0, 1), // under the right edge
        ],
        hand: HandModel {
            joints: vec![
                Joint {
                    parent: -1,
                    axis: Vector3::new(0.0, 0.0, 1.0),
                    origin: Vector3::new(-0.06, 0.05, 0.0),
                },
                Joint {
                    parent: -1,
                    axis: Vector3::new(0.0, 0.0, -1.0),
                    origin: Vector3::new(0.06, 0.05, 0.0),
                },
            ],
            transmission: DMatrix::identity(2, 2),
            commanded: DVector::zeros(2),
        },
    }
}

/// Two-finger package pinch reconstructed from its published behavior: each
/// finger hangs from a revolute joint 0.09 m above its side-pad contact
/// (µ = 1), and a frictionless support sits under the bottom edge, directly
/// below the joint so neither closing motion nor support force couples into
/// the drive.
///
/// With a 0.1 Nm command on each joint the pads settle at 0.1/0.09 ≈ 1.111 N,
/// so the pull-out ceiling along +y is 2·µ·1.111 ≈ 2.22 N: a 2.2 N pull
/// holds, 2.5 N does not, and without any preload even 1 N cannot be held.
/// Pressing down or sideways loads the supports and pads passively, so those
/// directions resist arbitrary force.
pub fn package_grasp() -> SpatialGrasp {
    let side = |x: f64, link: i32| ContactSpec {
        position: Vector3::new(x, 0.0, 0.0),
        normal: Vector3::new(-x.signum(), 0.0, 0.0),
        mu: 1.0,
        link,
        stiffness: 1.0,
    };
    let tip = |x: f64, link: i32| ContactSpec {
        position: Vector3::new(x, -0.055, 0.0),
        normal: Vector3::new(0.0, 1.0, 0.0),
        mu: 0.0,
        link,
        stiffness: 1.0,
    };
    SpatialGrasp {
        contacts: vec![side(-0.03, 0), side(0.03, 1), tip(-0.03, 0), tip(0.03, 1)],
        hand: HandModel {
            joints: vec![
                Joint {
                    parent: -1,
                    axis: Vector3::new(0.0, 0.0, 1.0),
                    origin: Vector3::new(-0.03, 0.09, 0.0),
                },
                Joint {
                    parent: -1,
                    axis: Vector3::new(0.0, 0.0, -1.0),
                    origin: Vector3::new(0.03, 0.09, 0.0),
                },
            ],
            transmission: DMatrix::identity(2, 2),
            commanded: DVector::zeros(2),
        },
    }
}

/// Nominally parallel two-finger jaws whose pad contacts are vertically
/// offset against each other by `2 * half_offset` — the left pad sits higher.
/// Joints, arms, and friction match [`package_grasp`]'s side pads.
///
/// The offset admits a wedging state: a virtual rotation presses both pads at
/// a rate proportional to the offset while they slide, letting the object jam
/// itself against the locked drives for up-left (and, by the fixture's 180°
/// rotation symmetry, down-right) loads at any magnitude. Because the press
/// rate is offset/arm ≈ 0.3% of the slip rate, a contact-normal uncertainty
/// above that ratio (≈ 0.2°) wipes the state out, restoring the symmetric
/// map.
pub fn offset_jaws(half_offset: f64) -> SpatialGrasp {
    let contact = |x: f64, y: f64, link: i32| ContactSpec {
        position: Vector3::new(x, y, 0.0),
        normal: Vector3::new(-x.signum(), 0.0, 0.0),
        mu: 1.0,
        link,
        stiffness: 1.0,
    };
    SpatialGrasp {
        contacts: vec![
            contact(-0.03, half_offset, 0),
            contact(0.03, -half_offset, 1),
        ],
        hand: HandModel {
            joints: vec![
                Joint {
                    parent: -1,
                    axis: Vector3::new(0.0, 0.0, 1.0),
                    origin: Vector3::new(-0.03, 0.09, 0.0),
                },
                Joint {
                    parent: -1,
                    axis: Vector3::new(0.0, 0.0, -1.0),
                    origin: Vector3::new(0.03, 0.09, 0.0),
                },
            ],
            transmission: DMatrix::identity(2, 2),
            commanded: DVector::zeros(2),
        },
    }
}

/// Three-finger cube grasp with equal 0.1 m joint-to-contact arms and
/// µ = 0.45 everywhere. Fingers 1 and 2 oppose each other on the x-axis;
/// finger 3 presses the bottom face along +z. Each joint sits so its torque
/// maps to the contact normal with no tangential coupling, hence a command τ
/// settles its contact at exactly 10·τ newtons.
///
/// With fingers 1–2 at 0.1 Nm the total +z friction budget is 2·0.45 = 0.9 N,
/// while finger 3's command injects 10·τ₃ of +z push, so the largest
/// resistible +z force is 0.9 − 10·τ₃: gone exactly at τ₃ = 0.09 Nm.
pub fn cube_grasp() -> SpatialGrasp {
    let contact = |p: Vector3<f64>, n: Vector3<f64>| ContactSpec {
        position: p,
        normal: n,
        mu: 0.45,
        link: -1,
        stiffness: 1.0,
    };
    let mut grasp = SpatialGrasp {
        contacts: vec![
            contact(Vector3::new(0.03, 0.0, 0.0), Vector3::new(-1.0, 0.0, 0.0)),
            contact(Vector3::new(-0.03, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0)),
            contact(Vector3::new(0.0, 0.0, -0.03), Vector3::new(0.0, 0.0, 1.0)),
        ],
        hand: HandModel {
            joints: vec![
                Joint {
                    parent: -1,
                    axis: Vector3::new(0.0, 0.0, 1.0),
                    origin: Vector3::new(0.03, -0.1, 0.0),
                },
                Joint {
                    parent: -1,
                    axis: Vector3::new(0.0, 0.0, -1.0),
                    origin: Vector3::new(-0.03, -0.1, 0.0),
                },
                Joint {
                    parent: -1,
                    axis: Vector3::new(1.0, 0.0, 0.0),
                    origin: Vector3::new(0.0, -0.1, -0.03),
                },
            ],
            transmission: DMatrix::identity(3, 3),
            commanded: DVector::from_vec(vec![0.1, 0.1, 0.0]),
        },
    };
    // Contacts ride the fingers, one per link.
    for (i, c) in grasp.contacts.iter_mut().enumerate() {
        c.link = i as i32;
    }
    grasp
}

/// Two rigid (jointless) fingers touching opposite faces at diagonally offset
/// points. A virtual twist of the object compresses both contact springs at
/// once, so a model with unconstrained motion can conjure squeeze — and
/// friction — out of nothing to balance a load parallel to the faces. The
/// motion-constrained iterative scheme rejects exactly this.
pub fn twist_pair() -> SpatialGrasp {
    let contact = |px: f64, py: f64, nx: f64| ContactSpec {
        position: Vector3::new(px, py, 0.0),
        normal: Vector3::new(nx, 0.0, 0.0),
        mu: 0.5,
        link: -1,
        stiffness: 1.0,
    };
    SpatialGrasp {
        contacts: vec![contact(-0.03, -0.01, 1.0), contact(0.03, 0.01, -1.0)],
        hand: HandModel {
            joints: vec![],
            transmission: DMatrix::zeros(0, 0),
            commanded: DVector::zeros(0),
        },
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    #[test]
    fn package_side_pads_have_009_arms_and_decoupled_tips() {
        let g = package_grasp();
        let j = g.jacobian().unwrap();
        // Rows are (normal, t1, t2) per contact; columns are joints.
        for (contact, joint) in [(0, 0), (1, 1)] {
            assert_relative_eq!(j[(3 * contact, joint)], 0.09, epsilon = 1e-12);
            assert_relative_eq!(j[(3 * contact + 1, joint)], 0.0, epsilon = 1e-12);
            assert_relative_eq!(j[(3 * contact + 2, joint)], 0.0, epsilon = 1e-12);
        }
        // Supports sit on the joint vertical: closing cannot press them, and
        // their normal force exerts no drive torque.
        for (contact, joint) in [(2, 0), (3, 1)] {
            assert_relative_eq!(j[(3 * contact, joint)], 0.0, epsilon = 1e-12);
        }
        // Cross-finger terms vanish: each contact rides one link.
        assert_relative_eq!(j[(0, 1)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(j[(3, 0)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn offset_jaws_keep_package_arms() {
        let g = offset_jaws(5e-5);
        let j = g.jacobian().unwrap();
        assert_relative_eq!(j[(0, 0)], 0.09 - 5e-5, epsilon = 1e-12);
        assert_relative_eq!(j[(3, 1)], 0.09 + 5e-5, epsilon = 1e-12);
        assert_relative_eq!(j[(1, 0)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(j[(4, 1)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(
            g.contacts[0].position.y - g.contacts[1].position.y,
            1e-4,
            epsilon = 1e-15
        );
    }

    #[test]
    fn cube_torque_maps_to_ten_times_contact_force() {
        let g = cube_grasp();
        let j = g.jacobian().unwrap();
        for finger in 0..3 {
            assert_relative_eq!(j[(3 * finger, finger)], 0.1, epsilon = 1e-12);
            assert_relative_eq!(j[(3 * finger + 1, finger)], 0.0, epsilon = 1e-12);
            assert_relative_eq!(j[(3 * finger + 2, finger)], 0.0, epsilon = 1e-12);
        }
        g.validate().unwrap();
    }
}
