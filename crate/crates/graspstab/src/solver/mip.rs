//! Branch-and-bound over LP relaxations with indicator and SOS2 branching.
//!
//! Indicators never become big-M rows: a node either has a binary unfixed (its
//! implied constraints absent from the relaxation) or fixed (the constraints
//! of the matching trigger appended verbatim). SOS2 sets are handled by window
//! narrowing: each node keeps an index window per set, members outside the
//! window are clamped to zero, and a violated set is split at its weighted
//! midpoint into two overlapping halves.
//!
//! Search order is a depth-first dive until the first incumbent, then
//! best-bound. Every selection rule breaks ties by lowest index, so identical
//! models explore identical trees.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::lp::solve_lp_with;
use super::model::{
    Constraint, Model, Sense, SolveError, SolveResult, SolveStatus, SolverConfig,
};

#[derive(Clone)]
struct Node {
    /// Per-variable fixing; only binary variables are ever set.
    fixed: Vec<Option<bool>>,
    /// Per-SOS2-set inclusive index window into the member list.
    windows: Vec<(usize, usize)>,
    /// Parent relaxation objective in minimize form (lower bound on this subtree).
    bound: f64,
}

struct HeapEntry {
    bound: f64,
    seq: u64,
    node: Node,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; order so that the smallest bound (then the
        // oldest node) surfaces first.
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.seq.cmp(&self.seq))
    }
}

enum Frontier {
    Dive(Vec<Node>),
    BestBound(BinaryHeap<HeapEntry>),
}

impl Frontier {
    fn push(&mut self, node: Node, seq: &mut u64) {
        *seq += 1;
        match self {
            Frontier::Dive(stack) => stack.push(node),
            Frontier::BestBound(heap) => heap.push(HeapEntry {
                bound: node.bound,
                seq: *seq,
                node,
            }),
        }
    }

    fn pop(&mut self) -> Option<Node> {
        match self {
            Frontier::Dive(stack) => stack.pop(),
            Frontier::BestBound(heap) => heap.pop().map(|e| e.node),
        }
    }

    fn switch_to_best_bound(&mut self, seq: &mut u64) {
        if let Frontier::Dive(stack) = self {
            let mut heap = BinaryHeap::with_capacity(stack.len());
            for node in stack.drain(..) {
                *seq += 1;
                heap.push(HeapEntry {
                    bound: node.bound,
                    seq: *seq,
                    node,
                });
            }
            *self = Frontier::BestBound(heap);
        }
    }

    fn best_bound(&self) -> f64 {
        match self {
            Frontier::Dive(stack) => stack
                .iter()
                .map(|n| n.bound)
                .fold(f64::INFINITY, f64::min),
            Frontier::BestBound(heap) => heap
                .iter()
                .map(|e| e.bound)
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// Solves a mixed-integer model: LP plus binaries, indicator constraints, and
/// SOS2 sets. Pure LPs fall through to the simplex directly.
pub fn solve_mip(model: &Model, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    model.validate()?;
    if !model.has_discrete() {
        return solve_lp_with(model, &[], &model.lb, &model.ub, cfg);
    }

    let n = model.num_vars();
    let maximize = matches!(model.objective, Some((Sense::Maximize, _)));
    let has_objective = model.objective.is_some();
    // All internal bounds/incumbent comparisons are in minimize form.
    let to_min = |obj: f64| if maximize { -obj } else { obj };

    let root = Node {
        fixed: vec![None; n],
        windows: model.sos2_sets().iter().map(|s| (0, s.len() - 1)).collect(),
        bound: f64::NEG_INFINITY,
    };
    let mut frontier = Frontier::Dive(vec![root]);
    let mut seq: u64 = 0;
    let mut explored: usize = 0;
    let mut incumbent: Option<(f64, SolveResult)> = None; // (min-form obj, result)

    while let Some(node) = frontier.pop() {
        explored += 1;
        if explored > cfg.node_limit {
            return Err(SolveError::NodeLimit {
                explored: explored - 1,
                best_bound: {
                    let b = node.bound.min(frontier.best_bound());
                    if maximize {
                        -b
                    } else {
                        b
                    }
                },
                incumbent: incumbent.map(|(_, r)| Box::new(r)),
            });
        }
        // Prune by parent bound.
        if let Some((inc, _)) = &incumbent {
            if node.bound >= inc - cfg.rel_gap * (1.0 + inc.abs()) {
                continue;
            }
        }

        // Assemble and solve the node relaxation.
        let mut lb = model.lb.clone();
        let mut ub = model.ub.clone();
        for (v, f) in node.fixed.iter().enumerate() {
            if let Some(val) = f {
                let x = if *val { 1.0 } else { 0.0 };
                lb[v] = x;
                ub[v] = x;
            }
        }
        for (k, set) in model.sos2_sets().iter().enumerate() {
            let (a, b) = node.windows[k];
            for (i, &mem) in set.iter().enumerate() {
                if i < a || i > b {
                    ub[mem] = 0.0;
                }
            }
        }
        let mut extra: Vec<Constraint> = Vec::new();
        for ind in model.indicators() {
            if node.fixed[ind.binary] == Some(ind.trigger) {
                extra.extend(ind.constraints.iter().cloned());
            }
        }
        let relax = solve_lp_with(model, &extra, &lb, &ub, cfg)?;

        match relax.status {
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded => {
                let resolved = (0..n).all(|v| !model.is_binary(v) || node.fixed[v].is_some())
                    && node.windows.iter().all(|&(a, b)| b - a <= 1);
                if resolved {
                    // A fully resolved subproblem is a genuine MIP ray.
                    return Ok(SolveResult {
                        status: SolveStatus::Unbounded,
                        x: Vec::new(),
                        objective: if maximize {
                            f64::INFINITY
                        } else {
                            f64::NEG_INFINITY
                        },
                    });
                }
                // No point to guide branching: fix the lowest unfixed binary,
                // or split the first wide SOS2 window at its midpoint.
                if let Some(v) =
                    (0..n).find(|&v| model.is_binary(v) && node.fixed[v].is_none())
                {
                    for val in [true, false] {
                        let mut child = node.clone();
                        child.fixed[v] = Some(val);
                        frontier.push(child, &mut seq);
                    }
                } else if let Some(k) = node
                    .windows
                    .iter()
                    .position(|&(a, b)| b - a >= 2)
                {
                    let (a, b) = node.windows[k];
                    let r = ((a + b) / 2).clamp(a + 1, b - 1);
                    for win in [(r, b), (a, r)] {
                        let mut child = node.clone();
                        child.windows[k] = win;
                        frontier.push(child, &mut seq);
                    }
                }
                continue;
            }
            SolveStatus::Optimal | SolveStatus::Feasible => {}
        }
        let bound = if has_objective {
            to_min(relax.objective)
        } else {
            f64::NEG_INFINITY
        };
        if let Some((inc, _)) = &incumbent {
            if bound >= inc - cfg.rel_gap * (1.0 + inc.abs()) {
                continue;
            }
        }
        let x = &relax.x;

        // Branch rule 1: an integral, unfixed binary whose matching indicator
        // body is violated. Lowest variable index wins.
        let mut violated_indicator: Option<usize> = None;
        for ind in model.indicators() {
            let v = ind.binary;
            if node.fixed[v].is_some() {
                continue; // bodies already appended or dropped
            }
            let xv = x[v];
            if (xv - xv.round()).abs() > cfg.int_tol {
                continue; // handled by rule 2
            }
            if (xv.round() != 0.0) == ind.trigger
                && ind
                    .constraints
                    .iter()
                    .any(|c| c.violation(x) > cfg.feas_tol * (1.0 + c.rhs.abs()))
                && violated_indicator.map_or(true, |best| v < best)
            {
                violated_indicator = Some(v);
            }
        }
        if let Some(v) = violated_indicator {
            let side = x[v].round() != 0.0;
            // Trigger side first so the dive enforces the violated bodies.
            for val in [!side, side] {
                let mut child = node.clone();
                child.fixed[v] = Some(val);
                child.bound = bound;
                frontier.push(child, &mut seq);
            }
            continue;
        }

        // Branch rule 2: fractional binary, lowest index, nearest value first.
        if let Some(v) = (0..n).find(|&v| {
            model.is_binary(v)
                && node.fixed[v].is_none()
                && (x[v] - x[v].round()).abs() > cfg.int_tol
        }) {
            let near = x[v] >= 0.5;
            for val in [!near, near] {
                let mut child = node.clone();
                child.fixed[v] = Some(val);
                child.bound = bound;
                frontier.push(child, &mut seq);
            }
            continue;
        }

        // Branch rule 3: violated SOS2 set, lowest set index, split at the
        // weighted midpoint; the heavier half dives first.
        let mut sos_branch: Option<(usize, usize, bool)> = None; // (set, split, left_first)
        for (k, set) in model.sos2_sets().iter().enumerate() {
            let (a, b) = node.windows[k];
            let nz: Vec<usize> = (a..=b)
                .filter(|&i| x[set[i]].abs() > cfg.int_tol)
                .collect();
            let ok = match nz.len() {
                0 | 1 => true,
                2 => nz[1] - nz[0] == 1,
                _ => false,
            };
            if ok {
                continue;
            }
            let mass: f64 = nz.iter().map(|&i| x[set[i]].abs()).sum();
            let centroid: f64 = nz
                .iter()
                .map(|&i| i as f64 * x[set[i]].abs())
                .sum::<f64>()
                / mass;
            let r = (centroid.round() as usize).clamp(a + 1, b - 1);
            let left_mass: f64 = (a..=r).map(|i| x[set[i]].abs().max(0.0)).sum();
            let right_mass: f64 = (r..=b).map(|i| x[set[i]].abs().max(0.0)).sum();
            sos_branch = Some((k, r, left_mass >= right_mass));
            break;
        }
        if let Some((k, r, left_first)) = sos_branch {
            let (a, b) = node.windows[k];
            let order = if left_first {
                [(r, b), (a, r)]
            } else {
                [(a, r), (r, b)]
            };
            for win in order {
                let mut child = node.clone();
                child.windows[k] = win;
                child.bound = bound;
                frontier.push(child, &mut seq);
            }
            continue;
        }

        // Leaf: every binary integral, trigger-matching indicator bodies hold,
        // SOS2 windows resolved. Re-check against the complete constraint set
        // before accepting the incumbent.
        if !check_full(model, x, cfg) {
            // Numerically degenerate leaf; nothing left to branch on.
            continue;
        }
        let better = match &incumbent {
            None => true,
            Some((inc, _)) => bound < *inc,
        };
        if better {
            incumbent = Some((
                bound,
                SolveResult {
                    status: relax.status,
                    x: relax.x,
                    objective: relax.objective,
                },
            ));
            if !has_objective {
                break; // feasibility problem: first solution suffices
            }
            frontier.switch_to_best_bound(&mut seq);
        }
    }

    match incumbent {
        Some((_, mut r)) => {
            r.status = if has_objective {
                SolveStatus::Optimal
            } else {
                SolveStatus::Feasible
            };
            Ok(r)
        }
        None => Ok(SolveResult {
            status: SolveStatus::Infeasible,
            x: Vec::new(),
            objective: f64::NAN,
        }),
    }
}

/// Full feasibility re-check: linear rows, bounds, integrality, triggered
/// indicator bodies, and SOS2 adjacency over the complete member lists.
fn check_full(model: &Model, x: &[f64], cfg: &SolverConfig) -> bool {
    let tol = |rhs: f64| cfg.feas_tol * (1.0 + rhs.abs());
    for c in &model.constraints {
        if c.violation(x) > tol(c.rhs) {
            return false;
        }
    }
    for (j, &xj) in x.iter().enumerate() {
        let (lo, hi) = model.bounds(j);
        if xj < lo - tol(lo) || xj > hi + tol(hi) {
            return false;
        }
        if model.is_binary(j) && (xj - xj.round()).abs() > cfg.int_tol {
            return false;
        }
    }
    for ind in model.indicators() {
        if (x[ind.binary].round() != 0.0) == ind.trigger {
            for c in &ind.constraints {
                if c.violation(x) > tol(c.rhs) {
                    return false;
                }
            }
        }
    }
    for set in model.sos2_sets() {
        let nz: Vec<usize> = (0..set.len())
            .filter(|&i| x[set[i]].abs() > cfg.int_tol)
            .collect();
        let ok = match nz.len() {
            0 | 1 => true,
            2 => nz[1] - nz[0] == 1,
            _ => false,
        };
        if !ok {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::model::{LinExpr, Model, Relation, Sense};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn indicator_chooses_cheap_side() {
        // b=1 => x = 0; b=0 => x >= 5; min x with x >= 0. Best: b=1, x=0.
        let mut mm = Model::new();
        let x = mm.add_var(0.0, f64::INFINITY);
        let b = mm.add_binary();
        mm.add_indicator(
            b,
            true,
            vec![Constraint::new(LinExpr::term(x, 1.0), Relation::Eq, 0.0)],
        );
        mm.add_indicator(
            b,
            false,
            vec![Constraint::new(LinExpr::term(x, 1.0), Relation::Ge, 5.0)],
        );
        mm.set_objective(Sense::Minimize, LinExpr::term(x, 1.0));
        let r = solve_mip(&mm, &cfg()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.objective.abs() < 1e-7);
        assert!((r.x[b] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sos2_forbids_nonadjacent_pair() {
        // max z1 + z3 with SOS2 (z1, z2, z3), each z <= 1: the nonadjacent
        // pair is forbidden, so the optimum is 1, not 2.
        let mut mm = Model::new();
        let z: Vec<_> = (0..3).map(|_| mm.add_var(0.0, 1.0)).collect();
        mm.add_sos2(z.clone());
        mm.set_objective(
            Sense::Maximize,
            LinExpr::term(z[0], 1.0).plus(z[2], 1.0),
        );
        let r = solve_mip(&mm, &cfg()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(
            (r.objective - 1.0).abs() < 1e-6,
            "expected 1, got {}",
            r.objective
        );
    }

    #[test]
    fn sos2_allows_adjacent_pair() {
        let mut mm = Model::new();
        let z: Vec<_> = (0..4).map(|_| mm.add_var(0.0, 1.0)).collect();
        mm.add_sos2(z.clone());
        mm.set_objective(
            Sense::Maximize,
            LinExpr::term(z[1], 1.0).plus(z[2], 1.0),
        );
        let r = solve_mip(&mm, &cfg()).unwrap();
        assert!((r.objective - 2.0).abs() < 1e-6);
    }

    #[test]
    fn pure_lp_falls_through() {
        let mut mm = Model::new();
        let x = mm.add_var(0.0, 2.0);
        mm.set_objective(Sense::Maximize, LinExpr::term(x, 1.0));
        let r = solve_mip(&mm, &cfg()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_indicator_pair() {
        // b=1 => x >= 2; b=0 => x >= 3; but x <= 1. Both branches infeasible.
        let mut mm = Model::new();
        let x = mm.add_var(0.0, 1.0);
        let b = mm.add_binary();
        mm.add_indicator(
            b,
            true,
            vec![Constraint::new(LinExpr::term(x, 1.0), Relation::Ge, 2.0)],
        );
        mm.add_indicator(
            b,
            false,
            vec![Constraint::new(LinExpr::term(x, 1.0), Relation::Ge, 3.0)],
        );
        mm.set_objective(Sense::Minimize, LinExpr::term(x, 1.0));
        let r = solve_mip(&mm, &cfg()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_root_reported() {
        let mut mm = Model::new();
        let x = mm.add_var(0.0, f64::INFINITY);
        let _b = mm.add_binary();
        mm.set_objective(Sense::Maximize, LinExpr::term(x, 1.0));
        let r = solve_mip(&mm, &cfg()).unwrap();
        assert_eq!(r.status, SolveStatus::Unbounded);
    }

    #[test]
    fn node_limit_error_carries_bound() {
        let mut mm = Model::new();
        // A small knapsack that needs more than one node.
        let n = 8;
        let b: Vec<_> = (0..n).map(|_| mm.add_binary()).collect();
        let weights = [3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0];
        let values = [3.1, 5.2, 7.1, 11.3, 12.9, 17.2, 19.1, 22.8];
        let e: LinExpr = b.iter().zip(weights).map(|(&v, w)| (v, w)).collect();
        mm.add_constraint(e, Relation::Le, 40.0);
        mm.set_objective(
            Sense::Maximize,
            b.iter().zip(values).map(|(&v, c)| (v, c)).collect(),
        );
        let tight = SolverConfig {
            node_limit: 2,
            ..SolverConfig::default()
        };
        match solve_mip(&mm, &tight) {
            Err(SolveError::NodeLimit { explored, .. }) => assert_eq!(explored, 2),
            other => panic!("expected node-limit error, got {other:?}"),
        }
    }

    /// Exhaustive oracle: enumerate every binary assignment and every
    /// adjacent-pair SOS2 pattern, solve each completion as an LP, and keep
    /// the best. Mirrors the definition of MIP feasibility directly.
    fn enumerate_oracle(model: &Model, cfg: &SolverConfig) -> SolveResult {
        let n = model.num_vars();
        let bins: Vec<usize> = (0..n).filter(|&v| model.is_binary(v)).collect();
        let maximize = matches!(model.objective, Some((Sense::Maximize, _)));
        let sos = model.sos2_sets().to_vec();
        // Window patterns per set: every adjacent pair (covers 0/1-support too).
        let windows_per_set: Vec<Vec<(usize, usize)>> = sos
            .iter()
            .map(|s| {
                if s.len() == 1 {
                    vec![(0, 0)]
                } else {
                    (0..s.len() - 1).map(|i| (i, i + 1)).collect()
                }
            })
            .collect();
        let mut best: Option<SolveResult> = None;
        let mut unbounded = false;
        let nb = bins.len();
        let total_masks: usize = 1 << nb;
        let window_combos: Vec<Vec<(usize, usize)>> = {
            let mut out: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
            for ws in &windows_per_set {
                let mut next = Vec::new();
                for base in &out {
                    for &w in ws {
                        let mut b = base.clone();
                        b.push(w);
                        next.push(b);
                    }
                }
                out = next;
            }
            out
        };
        for mask in 0..total_masks {
            for combo in &window_combos {
                let mut lb = model.lb.clone();
                let mut ub = model.ub.clone();
                for (i, &v) in bins.iter().enumerate() {
                    let val = if mask & (1 << i) != 0 { 1.0 } else { 0.0 };
                    lb[v] = val;
                    ub[v] = val;
                }
                for (k, set) in sos.iter().enumerate() {
                    let (a, b) = combo[k];
                    for (i, &mem) in set.iter().enumerate() {
                        if i < a || i > b {
                            ub[mem] = 0.0;
                        }
                    }
                }
                let mut extra = Vec::new();
                for ind in model.indicators() {
                    let val = mask & (1 << bins.iter().position(|&v| v == ind.binary).unwrap())
                        != 0;
                    if val == ind.trigger {
                        extra.extend(ind.constraints.iter().cloned());
                    }
                }
                let r = solve_lp_with(model, &extra, &lb, &ub, cfg).unwrap();
                match r.status {
                    SolveStatus::Infeasible => {}
                    SolveStatus::Unbounded => {
                        unbounded = true;
                    }
                    _ => {
                        let better = match &best {
                            None => true,
                            Some(b) =>

                                if maximize {
                                    r.objective > b.objective
                                } else {
                                    r.objective < b.objective
                                },
                        };
                        if better {
                            best = Some(r);
                        }
                    }
                }
            }
        }
        if unbounded {
            return SolveResult {
                status: SolveStatus::Unbounded,
                x: Vec::new(),
                objective: if maximize {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
            };
        }
        match best {
            Some(mut r) => {
                r.status = if model.objective.is_some() {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::Feasible
                };
                r
            }
            None => SolveResult {
                status: SolveStatus::Infeasible,
                x: Vec::new(),
                objective: f64::NAN,
            },
        }
    }

    fn random_model(rng: &mut ChaCha8Rng, nb: usize, nsos: usize) -> Model {
        let mut mm = Model::new();
        let nx = rng.gen_range(1..=3usize);
        let xs: Vec<_> = (0..nx)
            .map(|_| mm.add_var(rng.gen_range(-3.0..0.0), rng.gen_range(0.5..4.0)))
            .collect();
        let bs: Vec<_> = (0..nb).map(|_| mm.add_binary()).collect();
        let zs: Vec<Vec<_>> = (0..nsos)
            .map(|_| {
                let len = rng.gen_range(3..=5usize);
                let set: Vec<_> = (0..len).map(|_| mm.add_var(0.0, 2.0)).collect();
                mm.add_sos2(set.clone());
                set
            })
            .collect();
        // A few plain rows over everything.
        let all: Vec<usize> = xs
            .iter()
            .chain(bs.iter())
            .chain(zs.iter().flatten())
            .copied()
            .collect();
        for _ in 0..rng.gen_range(1..=3usize) {
            let mut terms: Vec<(usize, f64)> = Vec::new();
            for &v in &all {
                if rng.gen_bool(0.6) {
                    terms.push((v, rng.gen_range(-2.0..2.0)));
                }
            }
            let e: LinExpr = terms.into_iter().collect();
            if e.is_empty() {
                continue;
            }
            let rel = if rng.gen_bool(0.5) {
                Relation::Le
            } else {
                Relation::Ge
            };
            mm.add_constraint(e, rel, rng.gen_range(-2.0..3.0));
        }
        // Indicator bodies tied to random binaries.
        for &b in &bs {
            if rng.gen_bool(0.7) {
                let trigger = rng.gen_bool(0.5);
                let body: Vec<Constraint> = (0..rng.gen_range(1..=2usize))
                    .map(|_| {
                        let e: LinExpr = xs
                            .iter()
                            .map(|&v| (v, rng.gen_range(-1.5..1.5)))
                            .collect();
                        let rel = if rng.gen_bool(0.5) {
                            Relation::Le
                        } else {
                            Relation::Ge
                        };
                        Constraint::new(e, rel, rng.gen_range(-1.0..2.0))
                    })
                    .collect();
                mm.add_indicator(b, trigger, body);
            }
        }
        // Objective over continuous vars and binaries.
        let e: LinExpr = all
            .iter()
            .map(|&v| (v, rng.gen_range(-1.0..1.0)))
            .collect();
        mm.set_objective(
            if rng.gen_bool(0.5) {
                Sense::Maximize
            } else {
                Sense::Minimize
            },
            e,
        );
        mm
    }

    #[test]
    fn six_binary_models_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xdecade);
        for round in 0..60 {
            let mm = random_model(&mut rng, 6, 0);
            let got = solve_mip(&mm, &cfg()).unwrap();
            let want = enumerate_oracle(&mm, &cfg());
            assert_eq!(
                got.status, want.status,
                "round {round}: status mismatch (oracle {:?})",
                want.status
            );
            if got.status == SolveStatus::Optimal {
                assert!(
                    (got.objective - want.objective).abs()
                        <= 1e-5 * (1.0 + want.objective.abs()),
                    "round {round}: objective {} vs oracle {}",
                    got.objective,
                    want.objective
                );
            }
        }
    }

    #[test]
    fn sos2_models_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xbead);
        for round in 0..40 {
            let nb = rng.gen_range(0..=3usize);
            let nsos = rng.gen_range(1..=2usize);
            let mm = random_model(&mut rng, nb, nsos);
            let got = solve_mip(&mm, &cfg()).unwrap();
            let want = enumerate_oracle(&mm, &cfg());
            assert_eq!(
                got.status, want.status,
                "round {round}: status mismatch (oracle {:?})",
                want.status
            );
            if got.status == SolveStatus::Optimal {
                assert!(
                    (got.objective - want.objective).abs()
                        <= 1e-5 * (1.0 + want.objective.abs()),
                    "round {round}: objective {} vs oracle {}",
                    got.objective,
                    want.objective
                );
            }
        }
    }

    #[test]
    fn incumbent_passes_full_recheck() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
        for _ in 0..30 {
            let mm = random_model(&mut rng, 4, 1);
            if let Ok(r) = solve_mip(&mm, &cfg()) {
                if r.is_feasible() {
                    assert!(check_full(&mm, &r.x, &cfg()));
                }
            }
        }
    }

    #[test]
    fn determinism_identical_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xabba);
        for _ in 0..10 {
            let mm = random_model(&mut rng, 5, 1);
            let a = solve_mip(&mm, &cfg()).unwrap();
            let b = solve_mip(&mm, &cfg()).unwrap();
            assert_eq!(a.status, b.status);
            if a.is_feasible() {
                assert_eq!(a.x, b.x);
            }
        }
    }
}
