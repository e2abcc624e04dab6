//! Dense two-phase simplex.
//!
//! The tableau is rebuilt from the model on every call; branch-and-bound
//! deliberately re-solves nodes from scratch (no warm starts), trading speed
//! for simplicity and determinism. General bounds are reduced to nonnegative
//! columns: lower-bounded variables are shifted, upper-only variables are
//! reflected, free variables are split, and finite ranges add one bound row.
//! Pricing is Dantzig's rule until a run of degenerate pivots trips the
//! configured limit, after which Bland's rule guarantees termination.

use super::model::{
    Constraint, Model, Relation, SolveError, SolveResult, SolveStatus, SolverConfig, Sense,
};

/// Solves a pure LP. Errors if the model declares binaries, indicators, or SOS2 sets.
pub fn solve_lp(model: &Model, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    if model.has_discrete() {
        return Err(SolveError::InvalidModel(
            "solve_lp called on a model with binaries, indicators, or SOS2 sets".into(),
        ));
    }
    model.validate()?;
    solve_lp_with(model, &[], &model.lb, &model.ub, cfg)
}

/// LP solve with overridden bounds and extra rows; shared with branch-and-bound.
///
/// `lb`/`ub` replace the model's bounds (same length); `extra` rows are
/// appended to the model's constraints. Discrete declarations on the model are
/// ignored here — callers are responsible for having resolved them.
pub(crate) fn solve_lp_with(
    model: &Model,
    extra: &[Constraint],
    lb: &[f64],
    ub: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveResult, SolveError> {
    let n = model.num_vars();
    debug_assert_eq!(lb.len(), n);
    debug_assert_eq!(ub.len(), n);

    // Column mapping from original variables to nonnegative simplex columns.
    #[derive(Clone, Copy)]
    enum Col {
        /// x = off + sign * u
        Shift { col: usize, off: f64, sign: f64 },
        /// x = u_pos - u_neg
        Split { pos: usize, neg: usize },
        /// x = value (fixed; no column)
        Fixed(f64),
    }
    let mut cols: Vec<Col> = Vec::with_capacity(n);
    let mut nstruct = 0usize;
    // Range rows u <= ub - lb for doubly-bounded variables.
    let mut range_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (lo, hi) = (lb[j], ub[j]);
        if lo > hi {
            return Ok(SolveResult {
                status: SolveStatus::Infeasible,
                x: Vec::new(),
                objective: f64::NAN,
            });
        }
        if lo == hi && lo.is_finite() {
            cols.push(Col::Fixed(lo));
        } else if lo.is_finite() {
            if hi.is_finite() {
                range_rows.push((nstruct, hi - lo));
            }
            cols.push(Col::Shift {
                col: nstruct,
                off: lo,
                sign: 1.0,
            });
            nstruct += 1;
        } else if hi.is_finite() {
            cols.push(Col::Shift {
                col: nstruct,
                off: hi,
                sign: -1.0,
            });
            nstruct += 1;
        } else {
            cols.push(Col::Split {
                pos: nstruct,
                neg: nstruct + 1,
            });
            nstruct += 2;
        }
    }

    // Assemble rows: (dense coeffs over struct cols, relation, rhs).
    let model_rows = model.constraints.iter().chain(extra.iter());
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for c in model_rows {
        let mut coeffs = vec![0.0; nstruct];
        let mut rhs = c.rhs;
        for &(v, a) in c.expr.terms() {
            match cols[v] {
                Col::Fixed(val) => rhs -= a * val,
                Col::Shift { col, off, sign } => {
                    rhs -= a * off;
                    coeffs[col] += a * sign;
                }
                Col::Split { pos, neg } => {
                    coeffs[pos] += a;
                    coeffs[neg] -= a;
                }
            }
        }
        rows.push((coeffs, c.rel, rhs));
    }
    for &(col, cap) in &range_rows {
        let mut coeffs = vec![0.0; nstruct];
        coeffs[col] = 1.0;
        rows.push((coeffs, Relation::Le, cap));
    }

    let m = rows.len();
    // Column layout: [struct | slacks | artificials | rhs].
    let nslack = m; // reserve one slot per row; Eq rows leave theirs zero
    let width = nstruct + nslack; // artificials appended later
    let mut tab: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut basis: Vec<usize> = Vec::with_capacity(m);
    let mut art_cols: Vec<usize> = Vec::new();
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        let mut row = vec![0.0; width + 1];
        row[..nstruct].copy_from_slice(coeffs);
        let mut slack_sign = match rel {
            Relation::Le => 1.0,
            Relation::Ge => -1.0,
            Relation::Eq => 0.0,
        };
        let mut rhs = *rhs;
        if rhs < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
            rhs = -rhs;
            slack_sign = -slack_sign;
        }
        if slack_sign != 0.0 {
            row[nstruct + i] = slack_sign;
        }
        row[width] = rhs;
        if slack_sign > 0.0 {
            basis.push(nstruct + i);
        } else {
            basis.push(usize::MAX); // placeholder, artificial assigned below
            art_cols.push(i);
        }
        tab.push(row);
    }
    // Append artificial columns.
    let nart = art_cols.len();
    let full_width = width + nart;
    for row in tab.iter_mut() {
        let rhs = row.pop().unwrap();
        row.extend(std::iter::repeat(0.0).take(nart));
        row.push(rhs);
    }
    for (k, &i) in art_cols.iter().enumerate() {
        tab[i][width + k] = 1.0;
        basis[i] = width + k;
    }

    let rhs_col = full_width;
    let active_cols_phase1 = full_width; // artificials may be priced in phase 1
    let pivot_tol = cfg.pivot_tol;

    // Reduced-cost row for a given cost vector (cost over all columns).
    let build_zrow = |tab: &Vec<Vec<f64>>, basis: &[usize], cost: &[f64]| -> (Vec<f64>, f64) {
        let mut z = cost.to_vec();
        let mut obj = 0.0;
        for (i, &bi) in basis.iter().enumerate() {
            let cb = cost[bi];
            if cb != 0.0 {
                obj += cb * tab[i][rhs_col];
                for j in 0..full_width {
                    z[j] -= cb * tab[i][j];
                }
            }
        }
        (z, obj)
    };

    // One simplex run over `active` columns; returns Ok(true) if optimal,
    // Ok(false) if unbounded. With `unbounded_is_noise` set (phase 1, whose
    // objective is bounded below by zero) a column with no blocking row is a
    // tolerance artifact, not a ray: it is set aside until the next pivot
    // changes the tableau instead of aborting the solve.
    let mut bland = false;
    let mut run = |tab: &mut Vec<Vec<f64>>,
                   basis: &mut Vec<usize>,
                   z: &mut Vec<f64>,
                   obj: &mut f64,
                   active: usize,
                   banned: &dyn Fn(usize) -> bool,
                   unbounded_is_noise: bool|
     -> Result<bool, SolveError> {
        let mut degen = 0usize;
        let mut noise: Vec<bool> = Vec::new();
        let max_iters = 20_000 + 200 * (m + nstruct);
        for _ in 0..max_iters {
            let shelved = |j: usize| noise.get(j).copied().unwrap_or(false);
            // Entering column.
            let mut enter = usize::MAX;
            if bland {
                for j in 0..active {
                    if !banned(j) && !shelved(j) && z[j] < -1e-9 {
                        enter = j;
                        break;
                    }
                }
            } else {
                let mut best = -1e-9;
                for j in 0..active {
                    if !banned(j) && !shelved(j) && z[j] < best {
                        best = z[j];
                        enter = j;
                    }
                }
            }
            if enter == usize::MAX {
                return Ok(true); // optimal
            }
            // Ratio test.
            let mut leave = usize::MAX;
            let mut best_ratio = f64::INFINITY;
            let mut best_pivot = 0.0f64;
            for i in 0..m {
                let a = tab[i][enter];
                if a > pivot_tol {
                    let ratio = tab[i][rhs_col] / a;
                    let better = if bland {
                        ratio < best_ratio - 1e-12
                            || (ratio < best_ratio + 1e-12
                                && (leave == usize::MAX || basis[i] < basis[leave]))
                    } else {
                        ratio < best_ratio - 1e-12
                            || (ratio < best_ratio + 1e-12 && a.abs() > best_pivot)
                    };
                    if better {
                        best_ratio = ratio;
                        leave = i;
                        best_pivot = a.abs();
                    }
                }
            }
            if leave == usize::MAX {
                if unbounded_is_noise {
                    if noise.is_empty() {
                        noise = vec![false; active];
                    }
                    noise[enter] = true;
                    continue;
                }
                return Ok(false); // unbounded direction
            }
            if !noise.is_empty() {
                noise.fill(false);
            }
            // Pivot.
            let piv = tab[leave][enter];
            let lrow = std::mem::take(&mut tab[leave]);
            let mut scaled = lrow;
            for v in scaled.iter_mut() {
                *v /= piv;
            }
            for (i, row) in tab.iter_mut().enumerate() {
                if i == leave {
                    continue;
                }
                let f = row[enter];
                if f != 0.0 {
                    for (rv, sv) in row.iter_mut().zip(scaled.iter()) {
                        *rv -= f * sv;
                    }
                    row[enter] = 0.0;
                }
            }
            let zf = z[enter];
            let old_obj = *obj;
            if zf != 0.0 {
                for (zv, sv) in z.iter_mut().zip(scaled.iter()) {
                    *zv -= zf * sv;
                }
                z[enter] = 0.0;
                // Entering variable rises to theta = scaled rhs; the objective
                // moves by its reduced cost times theta.
                *obj += zf * scaled[rhs_col];
            }
            tab[leave] = scaled;
            basis[leave] = enter;
            if (*obj - old_obj).abs() < 1e-12 {
                degen += 1;
                if degen > cfg.degeneracy_limit {
                    bland = true;
                }
            } else {
                degen = 0;
            }
        }
        Err(SolveError::Numeric(
            "simplex iteration limit exceeded".into(),
        ))
    };

    // Phase 1: minimize sum of artificials.
    let feas_scale = 1.0
        + tab
            .iter()
            .map(|r| r[rhs_col].abs())
            .fold(0.0f64, f64::max);
    if nart > 0 {
        let mut cost = vec![0.0; full_width];
        for k in 0..nart {
            cost[width + k] = 1.0;
        }
        let (mut z, mut obj) = build_zrow(&tab, &basis, &cost);
        let optimal = run(
            &mut tab,
            &mut basis,
            &mut z,
            &mut obj,
            active_cols_phase1,
            &|_| false,
            true,
        )?;
        if !optimal {
            return Err(SolveError::Numeric(
                "phase 1 reported an unbounded direction".into(),
            ));
        }
        // Recompute the artificial sum directly rather than trusting the
        // incrementally maintained value.
        let art_sum: f64 = basis
            .iter()
            .enumerate()
            .filter(|&(_, &bi)| bi >= width)
            .map(|(i, _)| tab[i][rhs_col])
            .sum();
        if art_sum > cfg.feas_tol * feas_scale {
            return Ok(SolveResult {
                status: SolveStatus::Infeasible,
                x: Vec::new(),
                objective: f64::NAN,
            });
        }
        // Drive basic artificials out (or accept degenerate zero rows).
        for i in 0..m {
            if basis[i] >= width {
                let mut pivoted = false;
                for j in 0..width {
                    if tab[i][j].abs() > 1e-7 {
                        // Manual pivot at (i, j): row is degenerate (rhs ~ 0).
                        let piv = tab[i][j];
                        for v in tab[i].iter_mut() {
                            *v /= piv;
                        }
                        let scaled = tab[i].clone();
                        for (r, row) in tab.iter_mut().enumerate() {
                            if r == i {
                                continue;
                            }
                            let f = row[j];
                            if f != 0.0 {
                                for (rv, sv) in row.iter_mut().zip(scaled.iter()) {
                                    *rv -= f * sv;
                                }
                                row[j] = 0.0;
                            }
                        }
                        basis[i] = j;
                        pivoted = true;
                        break;
                    }
                }
                if !pivoted {
                    // Redundant row: leave artificial basic at zero; it cannot
                    // re-enter pricing and the row no longer constrains.
                }
            }
        }
    }

    // Phase 2 (or feasibility extraction).
    let has_objective = model.objective.is_some();
    if has_objective {
        let (sense, expr) = model.objective.as_ref().unwrap();
        let sgn = match sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut cost = vec![0.0; full_width];
        for &(v, a) in expr.terms() {
            match cols[v] {
                Col::Fixed(_) => {}
                Col::Shift { col, sign, .. } => cost[col] += sgn * a * sign,
                Col::Split { pos, neg } => {
                    cost[pos] += sgn * a;
                    cost[neg] -= sgn * a;
                }
            }
        }
        let (mut z, mut obj) = build_zrow(&tab, &basis, &cost);
        let optimal = run(
            &mut tab,
            &mut basis,
            &mut z,
            &mut obj,
            width,
            &|j| j >= width,
            false,
        )?;
        if !optimal {
            return Ok(SolveResult {
                status: SolveStatus::Unbounded,
                x: Vec::new(),
                objective: match sense {
                    Sense::Minimize => f64::NEG_INFINITY,
                    Sense::Maximize => f64::INFINITY,
                },
            });
        }
    }

    // Extract the point.
    let mut colval = vec![0.0; full_width];
    for (i, &bi) in basis.iter().enumerate() {
        if bi < full_width {
            colval[bi] = tab[i][rhs_col];
        }
    }
    let mut x = vec![0.0; n];
    for j in 0..n {
        x[j] = match cols[j] {
            Col::Fixed(v) => v,
            Col::Shift { col, off, sign } => off + sign * colval[col],
            Col::Split { pos, neg } => colval[pos] - colval[neg],
        };
    }
    let (status, objective) = match &model.objective {
        Some((_, expr)) => (SolveStatus::Optimal, expr.eval(&x)),
        None => (SolveStatus::Feasible, 0.0),
    };
    Ok(SolveResult {
        status,
        x,
        objective,
    })
}
