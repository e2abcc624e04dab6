//! Model containers shared by the LP and MIP solvers.

use std::fmt::Write as _;

use thiserror::Error;

/// Index of a variable within a [`Model`].
pub type VarId = usize;

/// Direction of a linear constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// Objective sense.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// A sparse linear expression `sum(coeff * var)`.
#[derive(Clone, Debug, Default)]
pub struct LinExpr {
    terms: Vec<(VarId, f64)>,
}

impl LinExpr {
    pub fn new() -> Self {
        Self { terms: Vec::new() }
    }

    /// Single-term expression.
    pub fn term(var: VarId, coeff: f64) -> Self {
        Self {
            terms: vec![(var, coeff)],
        }
    }

    /// Adds `coeff * var`, merging with an existing term for the same variable.
    pub fn add(&mut self, var: VarId, coeff: f64) -> &mut Self {
        if coeff != 0.0 {
            if let Some(t) = self.terms.iter_mut().find(|t| t.0 == var) {
                t.1 += coeff;
            } else {
                self.terms.push((var, coeff));
            }
        }
        self
    }

    /// Builder-style [`LinExpr::add`].
    pub fn plus(mut self, var: VarId, coeff: f64) -> Self {
        self.add(var, coeff);
        self
    }

    /// Appends every term of `other` scaled by `scale`.
    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        for &(v, c) in &other.terms {
            self.add(v, scale * c);
        }
        self
    }

    pub fn terms(&self) -> &[(VarId, f64)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Evaluates the expression at a point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v]).sum()
    }

    pub fn max_var(&self) -> Option<VarId> {
        self.terms.iter().map(|t| t.0).max()
    }
}

impl FromIterator<(VarId, f64)> for LinExpr {
    fn from_iter<I: IntoIterator<Item = (VarId, f64)>>(iter: I) -> Self {
        let mut e = LinExpr::new();
        for (v, c) in iter {
            e.add(v, c);
        }
        e
    }
}

/// A linear constraint `expr rel rhs`.
#[derive(Clone, Debug)]
pub struct Constraint {
    pub expr: LinExpr,
    pub rel: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(expr: LinExpr, rel: Relation, rhs: f64) -> Self {
        Self { expr, rel, rhs }
    }

    /// Signed violation of the constraint at `x` (positive = violated).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let v = self.expr.eval(x);
        match self.rel {
            Relation::Le => v - self.rhs,
            Relation::Ge => self.rhs - v,
            Relation::Eq => (v - self.rhs).abs(),
        }
    }
}

/// Rows implied by a binary variable taking a specific value.
#[derive(Clone, Debug)]
pub struct Indicator {
    pub binary: VarId,
    pub trigger: bool,
    pub constraints: Vec<Constraint>,
}

/// A linear or mixed-integer model.
///
/// Continuous variables carry bounds (`f64::INFINITY` allowed); binaries are
/// continuous `[0, 1]` variables flagged integral. Indicator constraints and
/// SOS2 sets are the only other discrete features. [`solve_lp`](crate::solver::solve_lp)
/// rejects models that contain any of the three.
#[derive(Clone, Debug, Default)]
pub struct Model {
    pub(crate) lb: Vec<f64>,
    pub(crate) ub: Vec<f64>,
    pub(crate) binary: Vec<bool>,
    pub(crate) constraints: Vec<Constraint>,
    pub(crate) objective: Option<(Sense, LinExpr)>,
    pub(crate) indicators: Vec<Indicator>,
    pub(crate) sos2: Vec<Vec<VarId>>,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a continuous variable with the given bounds.
    pub fn add_var(&mut self, lb: f64, ub: f64) -> VarId {
        self.lb.push(lb);
        self.ub.push(ub);
        self.binary.push(false);
        self.lb.len() - 1
    }

    /// Adds a binary variable (bounds `[0, 1]`, integral).
    pub fn add_binary(&mut self) -> VarId {
        let id = self.add_var(0.0, 1.0);
        self.binary[id] = true;
        id
    }

    pub fn add_constraint(&mut self, expr: LinExpr, rel: Relation, rhs: f64) {
        self.constraints.push(Constraint::new(expr, rel, rhs));
    }

    /// Declares that `binary == trigger` implies every row in `constraints`.
    pub fn add_indicator(&mut self, binary: VarId, trigger: bool, constraints: Vec<Constraint>) {
        self.indicators.push(Indicator {
            binary,
            trigger,
            constraints,
        });
    }

    /// Declares an SOS2 set: at most two of `members` nonzero, and adjacent in order.
    pub fn add_sos2(&mut self, members: Vec<VarId>) {
        self.sos2.push(members);
    }

    pub fn set_objective(&mut self, sense: Sense, expr: LinExpr) {
        self.objective = Some((sense, expr));
    }

    pub fn clear_objective(&mut self) {
        self.objective = None;
    }

    pub fn num_vars(&self) -> usize {
        self.lb.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn bounds(&self, var: VarId) -> (f64, f64) {
        (self.lb[var], self.ub[var])
    }

    pub fn set_bounds(&mut self, var: VarId, lb: f64, ub: f64) {
        self.lb[var] = lb;
        self.ub[var] = ub;
    }

    pub fn is_binary(&self, var: VarId) -> bool {
        self.binary[var]
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.num_vars()).filter(|&v| self.binary[v])
    }

    pub fn indicators(&self) -> &[Indicator] {
        &self.indicators
    }

    pub fn sos2_sets(&self) -> &[Vec<VarId>] {
        &self.sos2
    }

    pub fn has_discrete(&self) -> bool {
        self.binary.iter().any(|&b| b) || !self.indicators.is_empty() || !self.sos2.is_empty()
    }

    /// Structural validation: index ranges, bound sanity, SOS2 member bounds.
    pub fn validate(&self) -> Result<(), SolveError> {
        let n = self.num_vars();
        let check_expr = |e: &LinExpr| -> Result<(), SolveError> {
            match e.max_var() {
                Some(v) if v >= n => Err(SolveError::InvalidModel(format!(
                    "expression references variable {v} but model has {n} variables"
                ))),
                _ => Ok(()),
            }
        };
        for (j, (&lo, &hi)) in self.lb.iter().zip(&self.ub).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
            {
                return Err(SolveError::InvalidModel(format!(
                    "variable {j} has invalid bounds [{lo}, {hi}]"
                )));
            }
        }
        for c in &self.constraints {
            check_expr(&c.expr)?;
            if c.rhs.is_nan() {
                return Err(SolveError::InvalidModel("constraint rhs is NaN".into()));
            }
        }
        if let Some((_, e)) = &self.objective {
            check_expr(e)?;
        }
        for ind in &self.indicators {
            if ind.binary >= n || !self.binary[ind.binary] {
                return Err(SolveError::InvalidModel(format!(
                    "indicator references non-binary variable {}",
                    ind.binary
                )));
            }
            for c in &ind.constraints {
                check_expr(&c.expr)?;
            }
        }
        for (k, set) in self.sos2.iter().enumerate() {
            if set.len() < 2 {
                return Err(SolveError::InvalidModel(format!(
                    "sos2 set {k} has fewer than 2 members"
                )));
            }
            for &v in set {
                if v >= n {
                    return Err(SolveError::InvalidModel(format!(
                        "sos2 set {k} references variable {v} out of range"
                    )));
                }
                if self.lb[v] < 0.0 {
                    return Err(SolveError::InvalidModel(format!(
                        "sos2 member {v} has negative lower bound; members must be nonnegative"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Solver status of a completed solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    /// Optimal for the given objective.
    Optimal,
    /// Feasible point found; no objective was given (or optimality not proven).
    Feasible,
    Infeasible,
    Unbounded,
}

/// Result of an LP or MIP solve. `x` is empty unless the status carries a point.
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

impl SolveResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::Feasible)
    }
}

/// Shared numeric tolerances and resource limits.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Constraint feasibility tolerance.
    pub feas_tol: f64,
    /// Integrality tolerance for binaries.
    pub int_tol: f64,
    /// Relative optimality gap for branch-and-bound.
    pub rel_gap: f64,
    /// Maximum branch-and-bound nodes before giving up.
    pub node_limit: usize,
    /// Simplex pivot magnitude floor.
    pub pivot_tol: f64,
    /// Degenerate (non-improving) pivots tolerated before Bland's rule engages.
    pub degeneracy_limit: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            int_tol: 1e-6,
            rel_gap: 1e-6,
            node_limit: 1_000_000,
            pivot_tol: 1e-9,
            degeneracy_limit: 64,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("node limit reached after {explored} nodes (best bound {best_bound})")]
    NodeLimit {
        explored: usize,
        best_bound: f64,
        incumbent: Option<Box<SolveResult>>,
    },
    #[error("numerical failure: {0}")]
    Numeric(String),
}

/// Serializes a model to a plain-text, LP-format-like dump for debugging.
///
/// Grammar (one statement per line, `;`-terminated):
///
/// ```text
/// dump      := objective? "subject to" row* "bounds" bound* discrete*
/// objective := ("min:" | "max:") expr ";"
/// row       := name ":" expr ("<=" | ">=" | "=") number ";"
/// expr      := [sign] coeff "x" index ( ("+"|"-") coeff "x" index )*
/// bound     := number "<=" "x" index "<=" number ";" | "x" index "free" ";"
/// discrete  := "binary" var-list ";"
///            | "sos2" name ":" var-list ";"
///            | "ind" name ":" "x" index "=" ("0"|"1") "->" row
/// ```
///
/// Infinite bounds print as `-inf`/`inf`.
pub fn write_lp(model: &Model) -> String {
    let mut out = String::new();
    let expr_str = |e: &LinExpr| -> String {
        if e.terms().is_empty() {
            return "0".to_string();
        }
        let mut s = String::new();
        for (i, &(v, c)) in e.terms().iter().enumerate() {
            if i == 0 {
                let _ = write!(s, "{c} x{v}");
            } else if c >= 0.0 {
                let _ = write!(s, " + {c} x{v}");
            } else {
                let _ = write!(s, " - {} x{v}", -c);
            }
        }
        s
    };
    let rel_str = |r: Relation| match r {
        Relation::Le => "<=",
        Relation::Ge => ">=",
        Relation::Eq => "=",
    };
    match &model.objective {
        Some((Sense::Minimize, e)) => {
            let _ = writeln!(out, "min: {};", expr_str(e));
        }
        Some((Sense::Maximize, e)) => {
            let _ = writeln!(out, "max: {};", expr_str(e));
        }
        None => {}
    }
    let _ = writeln!(out, "subject to");
    for (i, c) in model.constraints.iter().enumerate() {
        let _ = writeln!(
            out,
            "r{i}: {} {} {};",
            expr_str(&c.expr),
            rel_str(c.rel),
            c.rhs
        );
    }
    let _ = writeln!(out, "bounds");
    for j in 0..model.num_vars() {
        let (lo, hi) = (model.lb[j], model.ub[j]);
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            let _ = writeln!(out, "x{j} free;");
        } else {
            let lo_s = if lo == f64::NEG_INFINITY {
                "-inf".to_string()
            } else {
                format!("{lo}")
            };
            let hi_s = if hi == f64::INFINITY {
                "inf".to_string()
            } else {
                format!("{hi}")
            };
            let _ = writeln!(out, "{lo_s} <= x{j} <= {hi_s};");
        }
    }
    let bins: Vec<String> = model.binaries().map(|v| format!("x{v}")).collect();
    if !bins.is_empty() {
        let _ = writeln!(out, "binary {};", bins.join(" "));
    }
    for (k, set) in model.sos2.iter().enumerate() {
        let members: Vec<String> = set.iter().map(|v| format!("x{v}")).collect();
        let _ = writeln!(out, "sos2 s{k}: {};", members.join(" "));
    }
    for (k, ind) in model.indicators.iter().enumerate() {
        for (j, c) in ind.constraints.iter().enumerate() {
            let _ = writeln!(
                out,
                "ind i{k}_{j}: x{} = {} -> {} {} {};",
                ind.binary,
                if ind.trigger { 1 } else { 0 },
                expr_str(&c.expr),
                rel_str(c.rel),
                c.rhs
            );
        }
    }
    out
}
