//! Full-dimensional region enumeration for small plane arrangements in R³.
//!
//! Regions are found by incremental plane insertion: starting from the whole
//! space, each plane splits every surviving sign vector into at most two, and
//! an LP decides whether the open region behind each candidate sign vector is
//! nonempty. Strictness is decided by maximizing the worst margin over the
//! strict planes (capped at 1): a region counts as nonempty exactly when some
//! point clears every plane by at least [`REGION_MARGIN`]. The point is left
//! unboxed so regions that only exist far from the origin — nearly parallel
//! normals with distinct offsets — are still found.

use nalgebra::Vector3;

use crate::solver::{solve_lp, LinExpr, Model, Relation, Sense, SolverConfig};

/// Worst unit-normal margin a point must clear for an open region to count
/// as nonempty. Sits well above the LP feasibility tolerance, so empty
/// regions (best margin ~0) and real ones are separated decisively.
pub(crate) const REGION_MARGIN: f64 = 1e-6;

/// Finds a point on the prescribed side of every plane: exactly on planes
/// signed 0, strictly off planes signed ±1. Maximizes the worst strict
/// margin, capped at 1, and accepts only when it clears [`REGION_MARGIN`].
/// Normals are assumed unit so margins read as distances.
pub(crate) fn signed_witness(
    normals: &[Vector3<f64>],
    offsets: &[f64],
    signs: &[i8],
) -> Option<Vector3<f64>> {
    let inf = f64::INFINITY;
    let mut mm = Model::new();
    let xs = [
        mm.add_var(-inf, inf),
        mm.add_var(-inf, inf),
        mm.add_var(-inf, inf),
    ];
    let t = mm.add_var(0.0, 1.0);
    let mut strict = false;
    for ((n, &o), &s) in normals.iter().zip(offsets).zip(signs) {
        let e = LinExpr::term(xs[0], n.x).plus(xs[1], n.y).plus(xs[2], n.z);
        match s {
            0 => mm.add_constraint(e, Relation::Eq, o),
            1 => {
                strict = true;
                mm.add_constraint(e.plus(t, -1.0), Relation::Ge, o);
            }
            _ => {
                strict = true;
                mm.add_constraint(e.plus(t, 1.0), Relation::Le, o);
            }
        }
    }
    mm.set_objective(Sense::Maximize, LinExpr::term(t, 1.0));
    let r = solve_lp(&mm, &SolverConfig::default()).ok()?;
    if !r.is_feasible() || (strict && r.x[t] < REGION_MARGIN) {
        return None;
    }
    Some(Vector3::new(r.x[xs[0]], r.x[xs[1]], r.x[xs[2]]))
}

/// Planes `normal · x = offset` in R³. Central when all offsets are zero.
#[derive(Debug, Clone)]
pub struct PlaneArrangement {
    pub normals: Vec<Vector3<f64>>,
    pub offsets: Vec<f64>,
}

/// A full-dimensional region: its sign per plane and an interior point.
#[derive(Debug, Clone)]
pub struct Region {
    /// One entry per plane, each −1 or +1.
    pub signs: Vec<i8>,
    pub witness: Vector3<f64>,
}

impl PlaneArrangement {
    pub fn new(normals: Vec<Vector3<f64>>, offsets: Vec<f64>) -> Self {
        assert_eq!(normals.len(), offsets.len());
        Self { normals, offsets }
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    /// Scales every plane to a unit normal (offsets rescaled to match).
    pub(crate) fn normalized(&self) -> PlaneArrangement {
        let mut normals = Vec::with_capacity(self.len());
        let mut offsets = Vec::with_capacity(self.len());
        for (n, &o) in self.normals.iter().zip(&self.offsets) {
            let len = n.norm();
            assert!(len > 0.0, "arrangement plane with zero normal");
            normals.push(n / len);
            offsets.push(o / len);
        }
        PlaneArrangement { normals, offsets }
    }

    /// Groups coincident planes. Returns the reduced arrangement and, per
    /// original plane, its representative index and whether its orientation
    /// is flipped relative to the representative.
    pub(crate) fn merge_duplicates(&self) -> (PlaneArrangement, Vec<(usize, bool)>) {
        let norm = self.normalized();
        let mut reps: Vec<usize> = Vec::new(); // indices into `norm`
        let mut map: Vec<(usize, bool)> = Vec::with_capacity(self.len());
        const TOL: f64 = 1e-9;
        for i in 0..norm.len() {
            let mut assigned = None;
            for (k, &r) in reps.iter().enumerate() {
                let d = norm.normals[i].dot(&norm.normals[r]);
                if d > 1.0 - TOL && (norm.offsets[i] - norm.offsets[r]).abs() < TOL {
                    assigned = Some((k, false));
                    break;
                }
                if d < -(1.0 - TOL) && (norm.offsets[i] + norm.offsets[r]).abs() < TOL {
                    assigned = Some((k, true));
                    break;
                }
            }
            match assigned {
                Some(pair) => map.push(pair),
                None => {
                    map.push((reps.len(), false));
                    reps.push(i);
                }
            }
        }
        let merged = PlaneArrangement {
            normals: reps.iter().map(|&r| norm.normals[r]).collect(),
            offsets: reps.iter().map(|&r| norm.offsets[r]).collect(),
        };
        (merged, map)
    }

    /// Region enumeration over an arrangement whose planes are pairwise
    /// distinct and unit-normalized (callers go through [`enumerate_regions`],
    /// which handles merging).
    pub(crate) fn enumerate_signed(&self) -> Vec<Region> {
        let k = self.len();
        if k == 0 {
            return vec![Region {
                signs: vec![],
                witness: Vector3::zeros(),
            }];
        }
        let side = |j: usize, x: &Vector3<f64>| -> f64 { self.normals[j].dot(x) - self.offsets[j] };

        let mut regions: Vec<Region> = vec![Region {
            signs: vec![],
            witness: Vector3::zeros(),
        }];
        for j in 0..k {
            let mut next = Vec::with_capacity(regions.len() * 2);
            for region in &regions {
                for s in [1i8, -1] {
                    let mut signs = region.signs.clone();
                    signs.push(s);
                    // The parent witness often already clears the margin on
                    // one side; reuse it and skip that LP.
                    let sd = side(j, &region.witness);
                    let reuse = (s == 1 && sd >= REGION_MARGIN)
                        || (s == -1 && sd <= -REGION_MARGIN);
                    let witness = if reuse {
                        Some(region.witness)
                    } else {
                        signed_witness(&self.normals[..=j], &self.offsets[..=j], &signs)
                    };
                    if let Some(w) = witness {
                        next.push(Region { signs, witness: w });
                    }
                }
            }
            regions = next;
        }
        regions
    }
}

/// Enumerates the full-dimensional regions of the arrangement: exactly the
/// sign vectors in {−1,+1}^n whose open region is nonempty, each with an
/// interior witness point. Coincident planes are merged before enumeration
/// and the sign vectors expanded back afterward.
pub fn enumerate_regions(arrangement: &PlaneArrangement) -> Vec<Region> {
    let (merged, map) = arrangement.merge_duplicates();
    merged
        .enumerate_signed()
        .into_iter()
        .map(|r| Region {
            signs: expand_signs(&r.signs, &map),
            witness: r.witness,
        })
        .collect()
}

/// Expands a merged-space sign/state vector back to one entry per original
/// plane (zeros stay zeros; flipped planes negate).
pub(crate) fn expand_signs(merged: &[i8], map: &[(usize, bool)]) -> Vec<i8> {
    map.iter()
        .map(|&(rep, flip)| if flip { -merged[rep] } else { merged[rep] })
        .collect()
}
