//! Adaptive friction-cone relaxation for spatial grasps.
//!
//! Friction at each contact is discretized into a ring of cone edges grouped
//! into dyadic sectors: four 90° sectors initially, each refinable by
//! bisection down to a target angle of 90°/2^q. Tangential force and the
//! negated tangential sliding motion are decomposed over the *same* edge set
//! and tied to one shared SOS2 selection, so both concentrate in a single
//! sector — a relaxed form of maximum-dissipation sliding that keeps the
//! force within one sector of the slip direction.
//!
//! Edges at refinement level p carry length l_p = Π_{r=p}^{q+1} sec(γ/2^r)
//! (γ = 90°), chosen so that the vertex created by bisecting a sector lands
//! exactly on the parent edge. Every coarse cone therefore contains all finer
//! ones and the true cone, which makes the scheme one-sided: an infeasible
//! answer at *any* resolution is exact, while feasible answers tighten as the
//! active sectors are bisected. Refinement stops when every sector supporting
//! the solution has reached the target resolution.
//!
//! Directional uncertainty of the contact normals (half-angle `eta`) is
//! folded into the same machinery: the unilaterality rows see the worst-case
//! normal motion d̂_n = d_n·cos η + sin η·Σ_s l_{p_s+1} α_{i,s}, the tilt of
//! the normal toward the relative tangential motion that unloads the contact
//! the most. The per-level coefficient l_{p+1} underestimates the slide
//! magnitude at coarse resolution and becomes exact in the refinement limit,
//! so the containment property survives.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Vector2, Vector6};
use thiserror::Error;

use crate::grasp::{EquilibriumSolution, GraspError, SpatialGrasp};
use crate::solver::{
    solve_mip, Constraint, LinExpr, Model, Relation, SolveError, SolveResult, SolveStatus,
    SolverConfig, VarId,
};
use crate::spatial::{self, SpatialVariables};

/// Angle of the four level-1 sectors: the cone ring starts as a square.
pub const INITIAL_SECTOR_ANGLE: f64 = FRAC_PI_2;

/// Angular width of a sector at a refinement level (level 1 = 90°, halving
/// with each level).
pub fn sector_angle(level: u32) -> f64 {
    debug_assert!(level >= 1);
    INITIAL_SECTOR_ANGLE / f64::powi(2.0, level as i32 - 1)
}

/// Edge length l_p at refinement level `level` for target exponent `q`:
/// l_p = Π_{r=p}^{q+1} sec(γ/2^r), with the empty product (level > q+1)
/// equal to one. The telescoping l_p = sec(γ/2^p)·l_{p+1} puts each
/// bisection vertex exactly on the parent edge, and the finest edges are
/// tangent to the unit circle (apothem one).
pub fn edge_length(level: u32, q: u32) -> f64 {
    debug_assert!(level >= 1);
    let mut l = 1.0;
    for r in level..=q + 1 {
        l /= (INITIAL_SECTOR_ANGLE / f64::powi(2.0, r as i32)).cos();
    }
    l
}

/// One dyadic sector of a discretized cone ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sector {
    /// Start angle in the contact tangent plane, radians in [0, 2π).
    pub start: f64,
    /// Refinement level; the sector spans `sector_angle(level)`.
    pub level: u32,
}

/// The refinement state of one contact's cone ring.
#[derive(Debug, Clone)]
pub struct ContactCone {
    sectors: Vec<Sector>,
    q: u32,
}

impl ContactCone {
    /// The coarse starting ring: four 90° sectors.
    pub fn initial(q: u32) -> Self {
        let sectors = (0..4)
            .map(|s| Sector {
                start: s as f64 * INITIAL_SECTOR_ANGLE,
                level: 1,
            })
            .collect();
        Self { sectors, q }
    }

    /// A fully refined ring: 4·2^q equal sectors at the target resolution,
    /// as a uniform discretization would use.
    pub fn uniform(q: u32) -> Self {
        let n = 4usize << q;
        let ang = sector_angle(q + 1);
        let sectors = (0..n)
            .map(|s| Sector {
                start: s as f64 * ang,
                level: q + 1,
            })
            .collect();
        Self { sectors, q }
    }

    pub fn target_exponent(&self) -> u32 {
        self.q
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn max_level(&self) -> u32 {
        self.sectors.iter().map(|s| s.level).max().unwrap_or(1)
    }

    /// Bisects a sector in place; returns false once the sector is already
    /// at the target resolution (level q+1).
    pub fn refine(&mut self, index: usize) -> bool {
        let s = self.sectors[index];
        if s.level > self.q {
            return false;
        }
        let child = Sector {
            start: s.start,
            level: s.level + 1,
        };
        let mid = Sector {
            start: s.start + sector_angle(s.level + 1),
            level: s.level + 1,
        };
        self.sectors[index] = child;
        self.sectors.insert(index + 1, mid);
        true
    }

    /// Flattens the ring into edge columns. A direction shared by two
    /// sectors of equal level becomes one column; at a level boundary both
    /// copies are kept (their lengths differ, and collapsing to the shorter
    /// one would pull the coarse sector's edge inside the unit circle,
    /// breaking containment). `pair_sector[j]` names the sector between
    /// column j and column j+1 (cyclically), `None` for the zero-width seam
    /// between dual copies.
    pub(crate) fn columns(&self) -> ConeColumns {
        const TAU: f64 = 2.0 * std::f64::consts::PI;
        let close = |a: f64, b: f64| {
            let d = (a - b).rem_euclid(TAU);
            d < 1e-9 || d > TAU - 1e-9
        };
        let mut angles: Vec<f64> = Vec::new();
        let mut lens: Vec<f64> = Vec::new();
        let mut levels: Vec<u32> = Vec::new();
        let mut pair: Vec<Option<usize>> = Vec::new();
        for (si, s) in self.sectors.iter().enumerate() {
            let l = edge_length(s.level, self.q);
            let a0 = s.start.rem_euclid(TAU);
            let a1 = (s.start + sector_angle(s.level)).rem_euclid(TAU);
            let merged = match (angles.last(), lens.last()) {
                (Some(&pa), Some(&pl)) => close(pa, a0) && (pl - l).abs() < 1e-12,
                _ => false,
            };
            if !merged {
                if !angles.is_empty() {
                    pair.push(None);
                }
                angles.push(a0);
                lens.push(l);
                levels.push(s.level);
            }
            pair.push(Some(si));
            angles.push(a1);
            lens.push(l);
            levels.push(s.level);
        }
        // Close the ring: the trailing column duplicates the first when the
        // levels on both sides of the 0° boundary agree.
        let n = angles.len();
        if n > 1 && close(angles[0], angles[n - 1]) && (lens[0] - lens[n - 1]).abs() < 1e-12 {
            angles.pop();
            lens.pop();
            levels.pop();
        } else {
            pair.push(None);
        }
        debug_assert_eq!(pair.len(), angles.len());
        ConeColumns {
            dirs: angles.iter().map(|&a| Vector2::new(a.cos(), a.sin())).collect(),
            lens,
            levels,
            pair_sector: pair,
        }
    }
}

/// Edge columns of one cone ring, in angular order.
#[derive(Debug, Clone)]
pub(crate) struct ConeColumns {
    /// Unit edge directions in the contact tangent plane.
    pub dirs: Vec<Vector2<f64>>,
    /// Edge lengths (l of the owning sector's level).
    pub lens: Vec<f64>,
    /// Owning sector level per column, for the uncertainty coefficient.
    pub levels: Vec<u32>,
    /// Sector between column j and column (j+1) % k, `None` at dual-copy
    /// seams.
    pub pair_sector: Vec<Option<usize>>,
}

/// Friction variables of one contact with µ > 0.
pub(crate) struct ContactFriction {
    /// Tangential force weights, one per column: c_t = Σ l_s u_s β_s.
    pub beta: Vec<VarId>,
    /// Sliding-measure weights: −d_t = Σ l_s u_s α_s (empty when the
    /// maximum-dissipation coupling is disabled).
    pub alpha: Vec<VarId>,
    /// Slide/stick selector (`None` without the coupling).
    pub slide: Option<VarId>,
    pub cols: ConeColumns,
}

/// Caller extension points forwarded into the core fragment.
#[derive(Default)]
pub(crate) struct QueryHooks<'a> {
    pub equilibrium_row: Option<spatial::RowHook<'a>>,
    pub commanded: Option<spatial::BoundHook<'a>>,
}

/// Assembles the full relaxed stability model into `model`: the core
/// fragment plus the discretized cones at the resolutions in `cones`.
///
/// `eta` is the normal direction uncertainty half-angle (radians);
/// `enforce_mdp = false` drops the sliding-measure columns and the slide
/// selector, leaving the traditional convex cone discretization.
#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble_relaxed(
    model: &mut Model,
    grasp: &SpatialGrasp,
    cones: &[ContactCone],
    eta: f64,
    enforce_mdp: bool,
    w: &Vector6<f64>,
    f_c: &[f64],
    query: QueryHooks<'_>,
) -> Result<(SpatialVariables, Vec<Option<ContactFriction>>), GraspError> {
    let m = grasp.contact_count();
    if cones.len() != m {
        return Err(GraspError::Dimension(format!(
            "{} cone rings for {m} contacts",
            cones.len()
        )));
    }
    if !(0.0..FRAC_PI_2).contains(&eta) {
        return Err(GraspError::Dimension(
            "normal uncertainty half-angle must lie in [0, π/2)".into(),
        ));
    }
    if eta > 0.0 && !enforce_mdp {
        return Err(GraspError::Dimension(
            "normal uncertainty requires the sliding-measure columns".into(),
        ));
    }

    let inf = f64::INFINITY;
    // Friction columns first so the unilaterality hook can reference them.
    let mut fric: Vec<Option<ContactFriction>> = Vec::with_capacity(m);
    for (i, con) in grasp.contacts.iter().enumerate() {
        if con.mu <= 0.0 {
            fric.push(None);
            continue;
        }
        let cols = cones[i].columns();
        let k = cols.dirs.len();
        let beta: Vec<VarId> = (0..k).map(|_| model.add_var(0.0, inf)).collect();
        let (alpha, slide) = if enforce_mdp {
            let alpha: Vec<VarId> = (0..k).map(|_| model.add_var(0.0, inf)).collect();
            (alpha, Some(model.add_binary()))
        } else {
            (Vec::new(), None)
        };
        fric.push(Some(ContactFriction {
            beta,
            alpha,
            slide,
            cols,
        }));
    }

    // Worst-case normal motion under a normal tilted by eta toward the
    // relative tangential motion: d̂_n = d_n·cos η + sin η·Σ_s l_{p_s+1} α_s.
    let (sin_eta, cos_eta) = eta.sin_cos();
    let mut normal_motion = |_: &mut Model, i: usize, d: LinExpr| -> LinExpr {
        if eta == 0.0 {
            return d;
        }
        let mut out = LinExpr::new();
        out.add_expr(&d, cos_eta);
        if let Some(fr) = &fric[i] {
            let q = cones[i].target_exponent();
            for (s, &a) in fr.alpha.iter().enumerate() {
                out.add(a, sin_eta * edge_length(fr.cols.levels[s] + 1, q));
            }
        }
        out
    };
    let vars = spatial::assemble_into(
        model,
        grasp,
        w,
        f_c,
        true,
        query.equilibrium_row,
        Some(&mut normal_motion),
        query.commanded,
    )?;

    let g = grasp.grasp_map();
    let jac = grasp.jacobian()?;
    for (i, con) in grasp.contacts.iter().enumerate() {
        let Some(fr) = &fric[i] else {
            // Frictionless contact: no tangential force, free tangential slip.
            for t in 1..3 {
                model.add_constraint(LinExpr::term(vars.c[3 * i + t], 1.0), Relation::Eq, 0.0);
            }
            continue;
        };
        let k = fr.beta.len();
        // Tangential force decomposition c_t = Σ l_s u_s β_s.
        for t in 0..2 {
            let mut e = LinExpr::term(vars.c[3 * i + 1 + t], -1.0);
            for s in 0..k {
                e.add(fr.beta[s], fr.cols.lens[s] * fr.cols.dirs[s][t]);
            }
            model.add_constraint(e, Relation::Eq, 0.0);
        }
        // Stay inside the (enlarged) cone: eᵀβ ≤ µ c_n.
        let mut mass = LinExpr::term(vars.c[3 * i], -con.mu);
        for &b in &fr.beta {
            mass.add(b, 1.0);
        }
        model.add_constraint(mass, Relation::Le, 0.0);

        let Some(slide) = fr.slide else { continue };
        // Sliding measure: −d_t = Σ l_s u_s α_s, d_t = (Gᵀr − Jq)_t.
        for t in 0..2 {
            let row = 3 * i + 1 + t;
            let mut e = LinExpr::new();
            for rr in 0..6 {
                e.add(vars.r[rr], g[(rr, row)]);
            }
            for (jl, &qv) in vars.q.iter().enumerate() {
                e.add(qv, -jac[(row, jl)]);
            }
            for s in 0..k {
                e.add(fr.alpha[s], fr.cols.lens[s] * fr.cols.dirs[s][t]);
            }
            model.add_constraint(e, Relation::Eq, 0.0);
        }
        // One shared sector selection: β and α live in a common SOS2 window,
        // with the last member aliasing column 0 to close the ring.
        let z: Vec<VarId> = (0..=k).map(|_| model.add_var(0.0, inf)).collect();
        for weights in [&fr.beta, &fr.alpha] {
            for s in 0..k {
                let mut e = LinExpr::term(weights[s], 1.0).plus(z[s], -1.0);
                if s == 0 {
                    e = e.plus(z[k], -1.0);
                }
                model.add_constraint(e, Relation::Le, 0.0);
            }
        }
        model.add_sos2(z);
        // Sliding mobilizes the full cone (fᵀβ ≥ µ c_n with f the edge
        // lengths); sticking pins the tangential motion to zero.
        let mut full = LinExpr::term(vars.c[3 * i], -con.mu);
        for s in 0..k {
            full.add(fr.beta[s], fr.cols.lens[s]);
        }
        let mut stall = LinExpr::new();
        for &a in &fr.alpha {
            stall.add(a, 1.0);
        }
        model.add_indicator(slide, true, vec![Constraint::new(full, Relation::Ge, 0.0)]);
        model.add_indicator(slide, false, vec![Constraint::new(stall, Relation::Eq, 0.0)]);
    }
    Ok((vars, fric))
}

/// Configuration of the refinement-driven stability solve.
#[derive(Debug, Clone)]
pub struct RelaxationConfig {
    /// Target resolution exponent q: the finest sector spans 90°/2^q.
    /// The default matches a 4096-edge uniform discretization.
    pub resolution_exponent: u32,
    /// Contact normal direction uncertainty half-angle, radians.
    pub eta: f64,
    /// Couple tangential force to the sliding direction (maximum
    /// dissipation). Disabling leaves the traditional convex relaxation.
    pub enforce_mdp: bool,
    /// Upper bound on solve/refine rounds.
    pub max_iterations: usize,
    /// Start from the full uniform ring at the target resolution instead of
    /// the adaptive four-sector seed. Costly; meant for cross-checking the
    /// adaptive path against a fixed discretization.
    pub uniform_start: bool,
    pub solver: SolverConfig,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        Self {
            resolution_exponent: 10,
            eta: 0.0,
            enforce_mdp: true,
            max_iterations: 64,
            uniform_start: false,
            solver: SolverConfig::default(),
        }
    }
}

impl RelaxationConfig {
    pub fn validate(&self) -> Result<(), RelaxError> {
        if self.resolution_exponent > 16 {
            return Err(RelaxError::Config(
                "resolution exponent beyond 16 is unusable".into(),
            ));
        }
        if !(0.0..FRAC_PI_2).contains(&self.eta) {
            return Err(RelaxError::Config(
                "uncertainty half-angle must lie in [0, π/2)".into(),
            ));
        }
        if self.eta > 0.0 && !self.enforce_mdp {
            return Err(RelaxError::Config(
                "normal uncertainty requires maximum-dissipation coupling".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(RelaxError::Config("at least one iteration required".into()));
        }
        Ok(())
    }
}

/// One solve/refine round of the adaptive loop.
#[derive(Debug, Clone)]
pub struct RefinementRecord {
    pub iteration: usize,
    pub status: SolveStatus,
    /// Objective value when the model carried one.
    pub objective: Option<f64>,
    /// Deepest sector level per contact at solve time.
    pub contact_levels: Vec<u32>,
    /// Total edge columns across all contacts at solve time.
    pub columns: usize,
    /// Sectors bisected after this solve (0 on the final round).
    pub refined_sectors: usize,
}

/// Verdict of the relaxed stability model.
#[derive(Debug)]
pub enum RelaxedOutcome {
    /// Equilibrium found at the final refinement state.
    Feasible(Box<EquilibriumSolution>),
    /// No equilibrium; exact by the containment property.
    Infeasible,
}

/// Result of a refinement-driven solve.
#[derive(Debug)]
pub struct RelaxationReport {
    pub outcome: RelaxedOutcome,
    /// Final objective value for optimizing queries.
    pub objective: Option<f64>,
    pub records: Vec<RefinementRecord>,
    /// Final per-contact refinement state.
    pub cones: Vec<ContactCone>,
}

impl RelaxationReport {
    pub fn is_feasible(&self) -> bool {
        matches!(self.outcome, RelaxedOutcome::Feasible(_))
    }
}

#[derive(Debug, Error)]
pub enum RelaxError {
    #[error(transparent)]
    Grasp(#[from] GraspError),
    #[error("invalid relaxation configuration: {0}")]
    Config(String),
    #[error("solver failed during refinement round {iteration}: {source}")]
    Solver {
        iteration: usize,
        source: SolveError,
    },
    #[error("cone refinement did not settle within {0} rounds")]
    IterationLimit(usize),
}

/// Model builder callback: assembles the query-specific model for the given
/// refinement state and returns the fragment variables and friction columns.
pub(crate) type BuildFn<'a> = dyn FnMut(
        &mut Model,
        &[ContactCone],
    ) -> Result<(SpatialVariables, Vec<Option<ContactFriction>>), GraspError>
    + 'a;

/// Solve/refine driver shared by the stability queries. `realized_wrench`
/// recovers the applied wrench from a solution (queries with a variable
/// wrench scale resolve it here) for the residual bookkeeping of the
/// extracted equilibrium.
pub(crate) fn refine_loop(
    grasp: &SpatialGrasp,
    cfg: &RelaxationConfig,
    build: &mut BuildFn<'_>,
    realized_wrench: &mut dyn FnMut(&SolveResult, &SpatialVariables) -> Vector6<f64>,
) -> Result<RelaxationReport, RelaxError> {
    cfg.validate()?;
    // Adaptive refinement relies on the sector coupling to localize the
    // support; the plain convex relaxation solves the uniform ring once.
    let start = if cfg.enforce_mdp && !cfg.uniform_start {
        ContactCone::initial(cfg.resolution_exponent)
    } else {
        ContactCone::uniform(cfg.resolution_exponent)
    };
    let mut cones: Vec<ContactCone> = grasp.contacts.iter().map(|_| start.clone()).collect();
    let mut records: Vec<RefinementRecord> = Vec::new();
    for iteration in 0..cfg.max_iterations {
        let mut model = Model::new();
        let (vars, fric) = build(&mut model, &cones)?;
        let res = solve_mip(&model, &cfg.solver)
            .map_err(|source| RelaxError::Solver { iteration, source })?;
        // The branch-and-bound reports Optimal only for objective-carrying
        // models, Feasible for pure feasibility ones.
        let objective = (res.status == SolveStatus::Optimal).then_some(res.objective);
        let mut record = RefinementRecord {
            iteration,
            status: res.status,
            objective,
            contact_levels: cones.iter().map(ContactCone::max_level).collect(),
            columns: fric
                .iter()
                .flatten()
                .map(|fr| fr.cols.dirs.len())
                .sum(),
            refined_sectors: 0,
        };
        if !res.is_feasible() {
            records.push(record);
            return Ok(RelaxationReport {
                outcome: RelaxedOutcome::Infeasible,
                objective: None,
                records,
                cones,
            });
        }
        let mut to_refine: Vec<(usize, usize)> = Vec::new();
        for (i, fr) in fric.iter().enumerate() {
            let Some(fr) = fr else { continue };
            for sec in active_sectors(fr, &res.x, &cfg.solver) {
                to_refine.push((i, sec));
            }
        }
        // Descending sector order per contact keeps pending indices valid
        // across the insertions refine() makes.
        to_refine.sort_unstable_by_key(|&(i, s)| (i, std::cmp::Reverse(s)));
        to_refine.dedup();
        let mut refined = 0usize;
        for (i, sec) in to_refine {
            if cones[i].refine(sec) {
                refined += 1;
            }
        }
        record.refined_sectors = refined;
        records.push(record);
        if refined == 0 {
            let w = realized_wrench(&res, &vars);
            let sol = spatial::extract_solution(grasp, &w, &vars, &res);
            return Ok(RelaxationReport {
                outcome: RelaxedOutcome::Feasible(Box::new(sol)),
                objective,
                records,
                cones,
            });
        }
    }
    Err(RelaxError::IterationLimit(cfg.max_iterations))
}

/// Sectors of one contact that support the solution. Support concentrated
/// inside a sector names that sector; support on a single shared column
/// names both neighbouring sectors, whose bisection shortens the column.
fn active_sectors(fr: &ContactFriction, x: &[f64], cfg: &SolverConfig) -> Vec<usize> {
    if fr.slide.is_none() {
        // No sector coupling: support may legitimately spread, and there is
        // no single active sector to chase.
        return Vec::new();
    }
    let k = fr.beta.len();
    let val = |s: usize| {
        let a = fr.alpha.get(s).map_or(0.0, |&a| x[a]);
        x[fr.beta[s]].max(a)
    };
    let peak = (0..k).map(val).fold(0.0, f64::max);
    let tol = 10.0 * cfg.int_tol * (1.0 + peak);
    let hot: Vec<usize> = (0..k).filter(|&s| val(s) > tol).collect();
    match hot[..] {
        [] => Vec::new(),
        [s] => {
            let prev = (s + k - 1) % k;
            [fr.cols.pair_sector[prev], fr.cols.pair_sector[s]]
                .into_iter()
                .flatten()
                .collect()
        }
        [a, b] if b == a + 1 => fr.cols.pair_sector[a].into_iter().collect(),
        [a, b] if a == 0 && b == k - 1 => fr.cols.pair_sector[b].into_iter().collect(),
        ref other => {
            debug_assert!(
                false,
                "friction support spans columns {other:?}, expected one sector"
            );
            Vec::new()
        }
    }
}

/// Decides quasi-static stability of `grasp` under the wrench `w` with
/// commanded actuator forces `f_c`, adaptively refining the friction cones.
pub fn solve_with_refinement(
    grasp: &SpatialGrasp,
    w: &Vector6<f64>,
    f_c: &[f64],
    cfg: &RelaxationConfig,
) -> Result<RelaxationReport, RelaxError> {
    if !grasp.contacts.is_empty() {
        grasp.validate()?;
    }
    let mut build = |model: &mut Model, cones: &[ContactCone]| {
        assemble_relaxed(
            model,
            grasp,
            cones,
            cfg.eta,
            cfg.enforce_mdp,
            w,
            f_c,
            QueryHooks::default(),
        )
    };
    refine_loop(grasp, cfg, &mut build, &mut |_, _| *w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::grasp::{ContactSpec, HandModel};
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn palm_grasp(mu: f64) -> SpatialGrasp {
        SpatialGrasp {
            contacts: vec![ContactSpec {
                position: Vector3::zeros(),
                normal: Vector3::z(),
                mu,
                link: -1,
                stiffness: 1.0,
            }],
            hand: HandModel {
                joints: vec![],
                transmission: nalgebra::DMatrix::zeros(0, 0),
                commanded: nalgebra::DVector::zeros(0),
            },
        }
    }

    fn quick_cfg(q: u32) -> RelaxationConfig {
        RelaxationConfig {
            resolution_exponent: q,
            ..RelaxationConfig::default()
        }
    }

    #[test]
    fn edge_lengths_telescope_down_to_the_unit_circle() {
        // q = 0: a square with vertices at √2 (45° half-sector, apothem 1).
        assert!((edge_length(1, 0) - 2f64.sqrt()).abs() < 1e-12);
        // q = 1: l_1 = sec(45°)·sec(22.5°).
        let l1 = 1.0 / (FRAC_PI_2 / 2.0).cos() / (FRAC_PI_2 / 4.0).cos();
        assert!((edge_length(1, 1) - l1).abs() < 1e-12);
        // Large q: the level-1 vertex length approaches π/2.
        assert!((edge_length(1, 10) - FRAC_PI_2).abs() < 1e-5);
        assert!((edge_length(2, 10) - 1.1107).abs() < 2e-4);
        assert!((edge_length(3, 10) - 1.0262).abs() < 2e-4);
        assert!((edge_length(4, 10) - 1.0064).abs() < 2e-4);
        // Telescoping and the empty product.
        for q in [0u32, 3, 10] {
            for p in 1..=q + 1 {
                let expected = edge_length(p + 1, q) / (sector_angle(p + 1)).cos();
                assert!((edge_length(p, q) - expected).abs() < 1e-12);
            }
            assert_eq!(edge_length(q + 2, q), 1.0);
        }
        // Finest edges are tangent to the unit circle: apothem exactly one.
        for q in [0u32, 4, 10] {
            let apothem = edge_length(q + 1, q) * (sector_angle(q + 1) / 2.0).cos();
            assert!((apothem - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn initial_ring_is_a_square() {
        let cone = ContactCone::initial(3);
        let cols = cone.columns();
        assert_eq!(cols.dirs.len(), 4);
        let expect = [
            Vector2::new(1.0, 0.0),
            Vector2::new(0.0, 1.0),
            Vector2::new(-1.0, 0.0),
            Vector2::new(0.0, -1.0),
        ];
        for (d, e) in cols.dirs.iter().zip(&expect) {
            assert!((d - e).norm() < 1e-9);
        }
        let l1 = edge_length(1, 3);
        assert!(cols.lens.iter().all(|&l| (l - l1).abs() < 1e-12));
        assert_eq!(cols.levels, vec![1, 1, 1, 1]);
        assert_eq!(
            cols.pair_sector,
            vec![Some(0), Some(1), Some(2), Some(3)]
        );
    }

    #[test]
    fn bisection_keeps_both_copies_at_level_seams() {
        let mut cone = ContactCone::initial(2);
        assert!(cone.refine(0));
        assert_eq!(cone.sectors().len(), 5);
        let cols = cone.columns();
        // 0° and 90° sit on a level-1/level-2 boundary: dual copies, plus
        // the new 45° direction — seven columns in all.
        assert_eq!(cols.dirs.len(), 7);
        let l1 = edge_length(1, 2);
        let l2 = edge_length(2, 2);
        let expected: [(f64, f64); 7] = [
            (0.0, l2),
            (FRAC_PI_2 / 2.0, l2),
            (FRAC_PI_2, l2),
            (FRAC_PI_2, l1),
            (2.0 * FRAC_PI_2, l1),
            (3.0 * FRAC_PI_2, l1),
            (0.0, l1),
        ];
        for (j, (ang, len)) in expected.iter().enumerate() {
            let d = Vector2::new(ang.cos(), ang.sin());
            assert!((cols.dirs[j] - d).norm() < 1e-9, "direction {j}");
            assert!((cols.lens[j] - len).abs() < 1e-12, "length {j}");
        }
        assert_eq!(
            cols.pair_sector,
            vec![Some(0), Some(1), None, Some(2), Some(3), Some(4), None]
        );
        // The bisection vertex lies exactly on the parent edge (containment
        // is tight there): its 45° reach equals the level-1 chord height.
        let mid = l2 * Vector2::new((FRAC_PI_2 / 2.0).cos(), (FRAC_PI_2 / 2.0).sin());
        assert!((mid.x + mid.y - l1).abs() < 1e-12);
    }

    #[test]
    fn refinement_stops_at_the_target_resolution() {
        let mut cone = ContactCone::initial(2);
        assert!(cone.refine(0)); // level 1 → 2
        assert!(cone.refine(0)); // level 2 → 3 = target
        assert_eq!(cone.sectors()[0].level, 3);
        assert!(!cone.refine(0));
        assert_eq!(cone.max_level(), 3);
    }

    #[test]
    fn uniform_ring_matches_full_refinement() {
        let cone = ContactCone::uniform(2);
        assert_eq!(cone.sectors().len(), 16);
        let cols = cone.columns();
        assert_eq!(cols.dirs.len(), 16);
        let l = edge_length(3, 2);
        assert!(cols.lens.iter().all(|&x| (x - l).abs() < 1e-12));
        assert!(cols.pair_sector.iter().all(Option::is_some));
    }

    #[test]
    fn coarse_square_bounds_tangential_load_by_the_vertex_length() {
        // µ c_n = 1 with q = 0: the ring stays a square (vertices at √2),
        // so a pure tangential load is held up to √2 and no further.
        let grasp = palm_grasp(0.5);
        let cfg = quick_cfg(0);
        for (t, feasible) in [(1.2, true), (1.5, false)] {
            let w = Vector6::new(t, 0.0, -2.0, 0.0, 0.0, 0.0);
            let report = solve_with_refinement(&grasp, &w, &[], &cfg).unwrap();
            assert_eq!(report.is_feasible(), feasible, "t = {t}");
            assert_eq!(report.records.len(), 1, "q = 0 never refines");
        }
    }

    #[test]
    fn refinement_tightens_an_overloaded_contact_to_the_true_cone() {
        // 0.52 exceeds µ c_n = 0.5 but fits the initial enlarged ring; the
        // support column is chased down until the load is rejected.
        let grasp = palm_grasp(0.5);
        let w = Vector6::new(-0.52, 0.0, -1.0, 0.0, 0.0, 0.0);
        let report = solve_with_refinement(&grasp, &w, &[], &quick_cfg(6)).unwrap();
        assert!(!report.is_feasible());
        assert!(report.records.len() > 1, "needed refinement to decide");
    }

    #[test]
    fn load_inside_the_true_cone_survives_full_refinement() {
        let grasp = palm_grasp(0.5);
        let w = Vector6::new(-0.48, 0.0, -1.0, 0.0, 0.0, 0.0);
        let report = solve_with_refinement(&grasp, &w, &[], &quick_cfg(6)).unwrap();
        let RelaxedOutcome::Feasible(sol) = &report.outcome else {
            panic!("expected equilibrium");
        };
        assert!((sol.contact_forces[0] - 1.0).abs() < 1e-6);
        assert!((sol.contact_forces[1] - 0.48).abs() < 1e-6);
        assert!(sol.contact_forces[2].abs() < 1e-6);
        assert!(sol.residual.amax() < 1e-6);
        // The surviving support sector reached the target resolution.
        assert_eq!(report.cones[0].max_level(), 7);
    }

    #[test]
    fn frictionless_contact_carries_no_tangential_force() {
        let slippery = palm_grasp(0.0);
        let w = Vector6::new(0.1, 0.0, -1.0, 0.0, 0.0, 0.0);
        let report = solve_with_refinement(&slippery, &w, &[], &quick_cfg(4)).unwrap();
        assert!(!report.is_feasible());
        let grippy = palm_grasp(0.5);
        let report = solve_with_refinement(&grippy, &w, &[], &quick_cfg(4)).unwrap();
        assert!(report.is_feasible());
    }

    #[test]
    fn empty_grasp_resists_nothing() {
        let grasp = SpatialGrasp {
            contacts: vec![],
            hand: HandModel {
                joints: vec![],
                transmission: nalgebra::DMatrix::zeros(0, 0),
                commanded: nalgebra::DVector::zeros(0),
            },
        };
        let cfg = quick_cfg(2);
        let zero = solve_with_refinement(&grasp, &Vector6::zeros(), &[], &cfg).unwrap();
        assert!(zero.is_feasible());
        let mut w = Vector6::zeros();
        w[1] = 1.0;
        let push = solve_with_refinement(&grasp, &w, &[], &cfg).unwrap();
        assert!(!push.is_feasible());
    }

    #[test]
    fn offset_squeeze_needs_misaligned_friction_and_is_rejected() {
        // Two opposing contacts offset along y: resisting a lateral pull
        // demands opposite tangential forces, but the squeeze makes both
        // contacts slide the same screw, so dissipation-consistent friction
        // cannot oppose it. The convex relaxation (no coupling) accepts the
        // same wrench.
        let grasp = fixtures::twist_pair();
        let mut w = Vector6::zeros();
        w[1] = 1.0;
        let strict = quick_cfg(4);
        let report = solve_with_refinement(&grasp, &w, &[], &strict).unwrap();
        assert!(!report.is_feasible());
        let lax = RelaxationConfig {
            enforce_mdp: false,
            ..quick_cfg(4)
        };
        let report = solve_with_refinement(&grasp, &w, &[], &lax).unwrap();
        assert!(report.is_feasible());
    }

    #[test]
    fn uncertainty_scales_and_weakens_the_normal_rows() {
        let grasp = palm_grasp(0.5);
        let eta = 0.2;
        let cones = vec![ContactCone::initial(3)];
        let mut model = Model::new();
        let (_, fric) = assemble_relaxed(
            &mut model,
            &grasp,
            &cones,
            eta,
            true,
            &Vector6::zeros(),
            &[],
            QueryHooks::default(),
        )
        .unwrap();
        let fr = fric[0].as_ref().unwrap();
        // The persist branch's equality row is d̂_n + c_n = 0: the motion
        // terms are scaled by cos η and every sliding column enters with
        // +sin η · l_{p+1}, tilting the worst-case normal toward the slide.
        let row = &model.indicators()[0].constraints[0];
        let coeff = |v: VarId| {
            row.expr
                .terms()
                .iter()
                .find(|(id, _)| *id == v)
                .map(|&(_, c)| c)
        };
        let l2 = edge_length(2, 3);
        for &a in &fr.alpha {
            let c = coeff(a).expect("sliding column missing from the robust row");
            assert!((c - eta.sin() * l2).abs() < 1e-12);
            assert!(c > 0.0);
        }
        // Palm contact with normal z: d_n = r_z, scaled by cos η.
        let nominal = {
            let mut m2 = Model::new();
            let (v2, _) = assemble_relaxed(
                &mut m2,
                &grasp,
                &cones,
                0.0,
                true,
                &Vector6::zeros(),
                &[],
                QueryHooks::default(),
            )
            .unwrap();
            let row2 = &m2.indicators()[0].constraints[0];
            let alpha_ids: Vec<VarId> = fric[0].as_ref().unwrap().alpha.clone();
            // η = 0 keeps the row free of sliding columns entirely.
            for (id, _) in row2.expr.terms() {
                assert!(!alpha_ids.contains(id));
            }
            row2.expr
                .terms()
                .iter()
                .find(|(id, _)| v2.r.contains(id))
                .map(|&(_, c)| c)
                .unwrap()
        };
        let scaled = row
            .expr
            .terms()
            .iter()
            .map(|&(_, c)| c)
            .find(|&c| (c - eta.cos()).abs() < 1e-12);
        assert_eq!(nominal, 1.0);
        assert!(scaled.is_some(), "motion terms scaled by cos η");
    }

    #[test]
    fn coarse_rings_contain_every_refined_solution() {
        // Containment, the property that makes infeasibility exact: any
        // equilibrium found at full refinement still satisfies the coarse
        // model once the physical variables and branch choices are pinned.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        for _ in 0..24 {
            let m = 2;
            let contacts: Vec<ContactSpec> = (0..m)
                .map(|_| {
                    let p = Vector3::new(
                        rng.gen_range(-0.05..0.05f64),
                        rng.gen_range(-0.05..0.05f64),
                        rng.gen_range(-0.05..0.05f64),
                    );
                    let mut n = -p;
                    if n.norm() < 1e-3 {
                        n = Vector3::z();
                    }
                    ContactSpec {
                        position: p,
                        normal: n.normalize(),
                        mu: rng.gen_range(0.3..0.8),
                        link: -1,
                        stiffness: 1.0,
                    }
                })
                .collect();
            let grasp = SpatialGrasp {
                contacts,
                hand: HandModel {
                    joints: vec![],
                    transmission: nalgebra::DMatrix::zeros(0, 0),
                    commanded: nalgebra::DVector::zeros(0),
                },
            };
            // A wrench the contacts can certainly resist: the negated sum
            // of forces drawn from inside each friction cone.
            let mut w = Vector6::zeros();
            for con in &grasp.contacts {
                let lam = rng.gen_range(0.3..1.0f64);
                let mut t = Vector3::new(
                    rng.gen_range(-1.0..1.0f64),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                t -= con.normal * t.dot(&con.normal);
                let f = if t.norm() > 1e-6 {
                    con.normal * lam + t.normalize() * (rng.gen_range(0.0..0.5) * con.mu * lam)
                } else {
                    con.normal * lam
                };
                let torque = con.position.cross(&f);
                for r in 0..3 {
                    w[r] -= f[r];
                    w[3 + r] -= torque[r];
                }
            }
            let q = 2;
            let fine_cones = vec![ContactCone::uniform(q); m];
            let mut fine = Model::new();
            let (fv, ff) = assemble_relaxed(
                &mut fine,
                &grasp,
                &fine_cones,
                0.0,
                true,
                &w,
                &[],
                QueryHooks::default(),
            )
            .unwrap();
            let sol = solve_mip(&fine, &SolverConfig::default()).unwrap();
            if !sol.is_feasible() {
                continue;
            }
            checked += 1;
            let coarse_cones = vec![ContactCone::initial(q); m];
            let mut coarse = Model::new();
            let (cv, cf) = assemble_relaxed(
                &mut coarse,
                &grasp,
                &coarse_cones,
                0.0,
                true,
                &w,
                &[],
                QueryHooks::default(),
            )
            .unwrap();
            let pin = |mm: &mut Model, v: VarId, x: f64| {
                mm.set_bounds(v, x - 1e-6, x + 1e-6);
            };
            for (cvar, fvar) in cv.c.iter().zip(&fv.c) {
                pin(&mut coarse, *cvar, sol.x[*fvar]);
            }
            for (cvar, fvar) in cv.r.iter().zip(&fv.r) {
                pin(&mut coarse, *cvar, sol.x[*fvar]);
            }
            for (cvar, fvar) in cv.y.iter().zip(&fv.y) {
                let b = sol.x[*fvar].round();
                coarse.set_bounds(*cvar, b, b);
            }
            for (cfr, ffr) in cf.iter().zip(&ff) {
                let (Some(cfr), Some(ffr)) = (cfr, ffr) else { continue };
                let b = sol.x[ffr.slide.unwrap()].round();
                coarse.set_bounds(cfr.slide.unwrap(), b, b);
            }
            let back = solve_mip(&coarse, &SolverConfig::default()).unwrap();
            assert!(
                back.is_feasible(),
                "fine equilibrium escaped the coarse ring"
            );
        }
        assert!(checked >= 15, "only {checked} feasible draws");
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let mut cfg = RelaxationConfig::default();
        cfg.eta = -0.1;
        assert!(cfg.validate().is_err());
        cfg.eta = FRAC_PI_2;
        assert!(cfg.validate().is_err());
        cfg.eta = 0.1;
        cfg.enforce_mdp = false;
        assert!(cfg.validate().is_err());
        cfg = RelaxationConfig::default();
        cfg.max_iterations = 0;
        assert!(cfg.validate().is_err());
        cfg = RelaxationConfig::default();
        cfg.resolution_exponent = 22;
        assert!(cfg.validate().is_err());
        assert!(RelaxationConfig::default().validate().is_ok());
    }
}

