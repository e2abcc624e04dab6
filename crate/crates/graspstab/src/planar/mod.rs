//! Exact stability decision for planar grasps on a rigid hand.
//!
//! The object can translate and rotate in the plane (motion r ∈ R³), each
//! contact carries a virtual normal spring with preload, and friction is
//! Coulomb. Deciding stability reduces to enumerating every contact state
//! that is consistent with *some* rigid motion — which contacts detach, and
//! which persist while rolling or slipping either way — and solving a square
//! linear system (or a feasibility LP when singular) per state. The
//! enumeration is polynomial: slip states come from the central arrangement
//! of tangent-motion planes in r-space (regions, facets between
//! Hamming-adjacent regions, and faces recovered from the minimum cycle
//! basis of the region-adjacency graph), detach states from the affine
//! arrangement of normal-motion planes offset by the preloads.

pub mod arrangement;
pub mod mcb;
mod solve;

use std::collections::{BTreeSet, HashSet};

use nalgebra::{DMatrix, Vector3};

use arrangement::{expand_signs, signed_witness, PlaneArrangement};

pub use arrangement::{enumerate_regions, Region};
pub use mcb::{minimum_cycle_basis, symmetric_sum, CycleBasisError};
pub use solve::{planar_stability, solve_state, PlanarOutcome};

/// Per-contact slip signs: 0 rolls, +1 slips positive, −1 slips negative.
/// `witness` is an object motion whose tangential contact motions reproduce
/// the sign pattern.
#[derive(Debug, Clone)]
pub struct SlipState {
    pub s: Vec<i8>,
    pub witness: Vector3<f64>,
}

/// Per-contact persistence: `true` persists, `false` detaches. `witness` is
/// an object motion realizing the pattern against the preloads.
#[derive(Debug, Clone)]
pub struct DetachState {
    pub u: Vec<bool>,
    pub witness: Vector3<f64>,
}

fn column3(g: &DMatrix<f64>, col: usize) -> Vector3<f64> {
    Vector3::new(g[(0, col)], g[(1, col)], g[(2, col)])
}

/// Enumerates the slip states of a planar grasp map following the
/// paper-table bookkeeping: region states, facet states for Hamming-adjacent
/// region pairs, and face states from the minimum cycle basis plus its
/// symmetric sum. The result is a list, not a set — in the m = 2 case the two
/// face entries coincide, which is exactly how the count 4m² − 4m + 2 arises.
/// [`complete_slip_states`] adds the all-roll state and deduplicates.
pub fn enumerate_slip_states(g: &DMatrix<f64>) -> Vec<SlipState> {
    let m = g.ncols() / 2;
    let arr = PlaneArrangement::new(
        (0..m).map(|i| column3(g, 2 * i + 1)).collect(),
        vec![0.0; m],
    );
    let (merged, map) = arr.merge_duplicates();
    let regions = merged.enumerate_signed();
    let k = merged.len();
    let mut out = Vec::new();

    // Step 1: full-dimensional regions.
    for r in &regions {
        out.push(SlipState {
            s: expand_signs(&r.signs, &map),
            witness: r.witness,
        });
    }

    // Step 2: facets between regions at Hamming distance one. The segment
    // between the two region witnesses crosses exactly the differing plane,
    // so the crossing point is a facet witness without another LP.
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut edge_plane: Vec<usize> = Vec::new();
    for a in 0..regions.len() {
        for b in a + 1..regions.len() {
            let mut differing = None;
            let mut count = 0;
            for j in 0..k {
                if regions[a].signs[j] != regions[b].signs[j] {
                    differing = Some(j);
                    count += 1;
                    if count > 1 {
                        break;
                    }
                }
            }
            if count != 1 {
                continue;
            }
            let j = differing.unwrap();
            edges.push((a, b));
            edge_plane.push(j);
            let mut s = regions[a].signs.clone();
            s[j] = 0;
            let (wa, wb) = (regions[a].witness, regions[b].witness);
            let da = merged.normals[j].dot(&wa) - merged.offsets[j];
            let db = merged.normals[j].dot(&wb) - merged.offsets[j];
            let t = da / (da - db);
            out.push(SlipState {
                s: expand_signs(&s, &map),
                witness: wa + (wb - wa) * t,
            });
        }
    }

    // Step 3: faces. Each minimum-cycle-basis cycle of the region-adjacency
    // graph (plus the symmetric sum of the whole basis) encircles a face;
    // zero every plane its edges traverse, keep the signs shared by the
    // on-cycle regions.
    if !edges.is_empty() {
        let cycles = minimum_cycle_basis(regions.len(), &edges)
            .expect("region-adjacency graph of a central arrangement is connected");
        let mut face_sets = cycles;
        let sym = symmetric_sum(&face_sets);
        if !sym.is_empty() {
            face_sets.push(sym);
        }
        for cyc in face_sets {
            let planes: BTreeSet<usize> = cyc.iter().map(|&e| edge_plane[e]).collect();
            let v0 = edges[cyc[0]].0;
            let mut s = regions[v0].signs.clone();
            for &j in &planes {
                s[j] = 0;
            }
            #[cfg(debug_assertions)]
            for &e in &cyc {
                for v in [edges[e].0, edges[e].1] {
                    for j in 0..k {
                        if !planes.contains(&j) {
                            debug_assert_eq!(
                                regions[v].signs[j], s[j],
                                "cycle regions disagree off the traversed planes"
                            );
                        }
                    }
                }
            }
            let witness = signed_witness(&merged.normals, &merged.offsets, &s)
                .unwrap_or_else(Vector3::zeros);
            out.push(SlipState {
                s: expand_signs(&s, &map),
                witness,
            });
        }
    }
    out
}

/// The deduplicated slip-state set actually iterated by the stability
/// procedure: [`enumerate_slip_states`] plus the all-roll state {0}^m.
pub fn complete_slip_states(g: &DMatrix<f64>) -> Vec<SlipState> {
    let m = g.ncols() / 2;
    let mut seen: HashSet<Vec<i8>> = HashSet::new();
    let mut out = Vec::new();
    for st in enumerate_slip_states(g) {
        if seen.insert(st.s.clone()) {
            out.push(st);
        }
    }
    let zero = vec![0i8; m];
    if seen.insert(zero.clone()) {
        out.push(SlipState {
            s: zero,
            witness: Vector3::zeros(),
        });
    }
    out
}

/// Enumerates detach states: regions of the (generally affine) arrangement of
/// release planes d_n = offset, where `offsets[i]` is the normal motion at
/// which contact i lets go (preload/stiffness for a linear virtual spring).
/// The persist side is d_n < offset, where the spring stays compressed.
pub fn enumerate_detach_states(g: &DMatrix<f64>, offsets: &[f64]) -> Vec<DetachState> {
    let m = offsets.len();
    let arr = PlaneArrangement::new(
        (0..m).map(|i| column3(g, 2 * i)).collect(),
        offsets.to_vec(),
    );
    enumerate_regions(&arr)
        .into_iter()
        .map(|r| DetachState {
            u: r.signs.iter().map(|&s| s == -1).collect(),
            witness: r.witness,
        })
        .collect()
}
