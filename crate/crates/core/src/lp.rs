//! Dense linear-programming kernel: a two-phase primal simplex over
//! bounded variables.
//!
//! Rows are brought to equality form with one slack column per row, an
//! artificial column per row provides the phase-1 basis, and nonbasic
//! variables rest at one of their bounds. Dantzig pricing is used until a
//! run of degenerate pivots triggers Bland's rule, which guarantees
//! termination.

use crate::common::TOL;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct LpProblem {
    pub sense: Sense,
    /// Objective coefficient per structural variable.
    pub objective: Vec<f64>,
    /// Dense constraint rows, each of length `objective.len()`.
    pub rows: Vec<Vec<f64>>,
    pub row_senses: Vec<RowSense>,
    pub rhs: Vec<f64>,
    /// Variable bounds; `-inf`/`+inf` permitted, NaN not.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Structural variable values; empty unless `Optimal`.
    pub primal: Vec<f64>,
    /// Objective in the problem's own sense; 0.0 unless `Optimal`.
    pub objective: f64,
    /// One dual multiplier per row; empty unless `Optimal`.
    pub duals: Vec<f64>,
    /// Reduced cost per structural variable; empty unless `Optimal`.
    pub reduced_costs: Vec<f64>,
    /// `y'b` plus bound contributions; equals `objective` at optimality.
    pub dual_objective: f64,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("row {row} has {got} coefficients, expected {want}")]
    RowLength { row: usize, got: usize, want: usize },
    #[error("{field} length {got} does not match expected {want}")]
    VectorLength {
        field: &'static str,
        got: usize,
        want: usize,
    },
    #[error("variable {var} has lower bound {lo} above upper bound {hi}")]
    BoundOrder { var: usize, lo: f64, hi: f64 },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("simplex exceeded {0} iterations")]
    IterationLimit(usize),
    #[error("numerical failure: {0}")]
    Numerical(&'static str),
}

impl LpProblem {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        let m = self.num_rows();
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != n {
                return Err(LpError::RowLength {
                    row: i,
                    got: row.len(),
                    want: n,
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(LpError::NonFinite("constraint matrix"));
            }
        }
        if self.rhs.len() != m {
            return Err(LpError::VectorLength {
                field: "rhs",
                got: self.rhs.len(),
                want: m,
            });
        }
        if self.row_senses.len() != m {
            return Err(LpError::VectorLength {
                field: "row_senses",
                got: self.row_senses.len(),
                want: m,
            });
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::VectorLength {
                field: "bounds",
                got: self.lower.len().min(self.upper.len()),
                want: n,
            });
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        if self.rhs.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("rhs"));
        }
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() {
                return Err(LpError::NonFinite("bounds"));
            }
            if lo > hi {
                return Err(LpError::BoundOrder { var: j, lo, hi });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Free nonbasic variable resting at zero.
    FreeZero,
}

const PIVOT_TOL: f64 = 1e-7;
const DEGEN_TOL: f64 = 1e-10;

struct Simplex {
    m: usize,
    ncols: usize,
    n_struct: usize,
    /// Original column data [A | I_slack | signed artificials], row-major.
    a0: Vec<f64>,
    b0: Vec<f64>,
    /// m x ncols tableau, row-major: current B^{-1} * A over all columns.
    tab: Vec<f64>,
    /// Value of the basic variable in each row.
    xb: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    /// Reduced costs, kept in sync by pivots.
    dj: Vec<f64>,
    /// Sign chosen for each artificial column at setup.
    art_sign: Vec<f64>,
    degen_run: usize,
    use_bland: bool,
    pivots_since_refactor: usize,
    price_tol: f64,
}

enum Step {
    Optimal,
    Unbounded,
    Pivoted,
}

impl Simplex {
    fn new(p: &LpProblem, minimize_cost: &[f64]) -> Self {
        let n = p.num_vars();
        let m = p.num_rows();
        let ncols = n + 2 * m;
        let mut lo = vec![0.0; ncols];
        let mut hi = vec![0.0; ncols];
        let mut state = vec![VarState::AtLower; ncols];

        for j in 0..n {
            lo[j] = p.lower[j];
            hi[j] = p.upper[j];
            state[j] = if p.lower[j].is_finite() {
                VarState::AtLower
            } else if p.upper[j].is_finite() {
                VarState::AtUpper
            } else {
                VarState::FreeZero
            };
        }
        for (i, sense) in p.row_senses.iter().enumerate() {
            let j = n + i;
            match sense {
                RowSense::Le => {
                    lo[j] = 0.0;
                    hi[j] = f64::INFINITY;
                }
                RowSense::Ge => {
                    lo[j] = f64::NEG_INFINITY;
                    hi[j] = 0.0;
                }
                RowSense::Eq => {
                    lo[j] = 0.0;
                    hi[j] = 0.0;
                }
            }
            state[j] = match sense {
                RowSense::Ge => VarState::AtUpper,
                _ => VarState::AtLower,
            };
        }

        let mut s = Simplex {
            m,
            ncols,
            n_struct: n,
            a0: vec![0.0; m * ncols],
            b0: p.rhs.clone(),
            tab: vec![0.0; m * ncols],
            xb: vec![0.0; m],
            basis: vec![0; m],
            state,
            lo,
            hi,
            cost: vec![0.0; ncols],
            dj: vec![0.0; ncols],
            art_sign: vec![1.0; m],
            degen_run: 0,
            use_bland: false,
            pivots_since_refactor: 0,
            price_tol: TOL.feas,
        };

        // Crash basis: rows whose slack can host the residual start with the
        // slack basic (no phase-1 work); the rest get a signed artificial.
        for i in 0..m {
            let mut r = p.rhs[i];
            for j in 0..n {
                r -= p.rows[i][j] * s.rest_value(j);
            }
            let slack = n + i;
            let a = n + m + i;
            let sign = if r >= 0.0 { 1.0 } else { -1.0 };
            s.art_sign[i] = sign;
            s.lo[a] = 0.0;
            s.hi[a] = f64::INFINITY;
            for j in 0..n {
                s.a0[i * ncols + j] = p.rows[i][j];
            }
            s.a0[i * ncols + slack] = 1.0;
            s.a0[i * ncols + a] = sign;

            let slack_fits = r >= s.lo[slack] - 1e-12 && r <= s.hi[slack] + 1e-12;
            if slack_fits {
                // B column is the +1 slack; rows copy over unscaled.
                for j in 0..n {
                    s.tab[i * ncols + j] = p.rows[i][j];
                }
                s.tab[i * ncols + slack] = 1.0;
                s.tab[i * ncols + a] = sign;
                s.xb[i] = r;
                s.basis[i] = slack;
                s.state[slack] = VarState::Basic(i);
                // the artificial stays nonbasic and pinned at zero
                s.hi[a] = 0.0;
            } else {
                for j in 0..n {
                    s.tab[i * ncols + j] = sign * p.rows[i][j];
                }
                s.tab[i * ncols + slack] = sign;
                s.tab[i * ncols + a] = 1.0;
                s.xb[i] = r.abs();
                s.basis[i] = a;
                s.state[a] = VarState::Basic(i);
            }
        }

        s.set_costs(minimize_cost);
        s
    }

    /// Rebuild the tableau and basic values from the basis via Gaussian
    /// elimination on the original columns, discarding pivot drift.
    fn refactorize(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let ncols = self.ncols;
        // augmented system [B | a0 | b0]
        let width = m + ncols + 1;
        let mut aug = vec![0.0; m * width];
        for i in 0..m {
            for (r, &b) in self.basis.iter().enumerate() {
                aug[i * width + r] = self.a0[i * ncols + b];
            }
            for j in 0..ncols {
                aug[i * width + m + j] = self.a0[i * ncols + j];
            }
            aug[i * width + m + ncols] = self.b0[i];
        }
        for col in 0..m {
            let piv_row = (col..m)
                .max_by(|&a, &b| {
                    aug[a * width + col]
                        .abs()
                        .total_cmp(&aug[b * width + col].abs())
                })
                .unwrap();
            if aug[piv_row * width + col].abs() < 1e-12 {
                return Err(LpError::Numerical("singular basis during refactorization"));
            }
            if piv_row != col {
                for j in 0..width {
                    aug.swap(col * width + j, piv_row * width + j);
                }
            }
            let inv = 1.0 / aug[col * width + col];
            for j in col..width {
                aug[col * width + j] *= inv;
            }
            for i in 0..m {
                if i == col {
                    continue;
                }
                let f = aug[i * width + col];
                if f == 0.0 {
                    continue;
                }
                for j in col..width {
                    aug[i * width + j] -= f * aug[col * width + j];
                }
                aug[i * width + col] = 0.0;
            }
        }
        // the elimination ordered rows so that row r carries basis[r]
        for i in 0..m {
            for j in 0..ncols {
                self.tab[i * ncols + j] = aug[i * width + m + j];
            }
        }
        // xb = B^{-1} b - sum over nonbasic columns at nonzero rest values
        for i in 0..m {
            self.xb[i] = aug[i * width + m + ncols];
        }
        for j in 0..ncols {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let v = self.rest_value(j);
            if v != 0.0 {
                for i in 0..m {
                    self.xb[i] -= self.tab[i * ncols + j] * v;
                }
            }
        }
        let cost = self.cost.clone();
        self.set_costs(&cost);
        self.pivots_since_refactor = 0;
        Ok(())
    }

    /// Worst absolute row residual of the current (basic + rest) point.
    fn max_residual(&self) -> f64 {
        let mut values = vec![0.0; self.ncols];
        for j in 0..self.ncols {
            values[j] = self.rest_value(j);
        }
        let mut worst = 0.0f64;
        for i in 0..self.m {
            let mut acc = -self.b0[i];
            for j in 0..self.ncols {
                let a = self.a0[i * self.ncols + j];
                if a != 0.0 {
                    acc += a * values[j];
                }
            }
            worst = worst.max(acc.abs());
        }
        worst
    }

    fn rest_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => self.lo[j],
            VarState::AtUpper => self.hi[j],
            VarState::FreeZero => 0.0,
            VarState::Basic(r) => self.xb[r],
        }
    }

    /// Install a cost vector and recompute reduced costs from scratch,
    /// using d_j = c_j - c_B' (B^{-1} A_j).
    fn set_costs(&mut self, cost: &[f64]) {
        self.cost.copy_from_slice(cost);
        for j in 0..self.ncols {
            let mut acc = self.cost[j];
            for i in 0..self.m {
                acc -= self.cost[self.basis[i]] * self.tab[i * self.ncols + j];
            }
            self.dj[j] = acc;
        }
    }

    fn objective_value(&self) -> f64 {
        (0..self.ncols).map(|j| self.cost[j] * self.rest_value(j)).sum()
    }

    fn price(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.ncols {
            let score = match self.state[j] {
                VarState::Basic(_) => continue,
                VarState::AtLower => {
                    if self.lo[j] == self.hi[j] {
                        continue; // fixed column can never improve
                    }
                    self.dj[j]
                }
                VarState::AtUpper => -self.dj[j],
                VarState::FreeZero => -self.dj[j].abs(),
            };
            if score < -self.price_tol {
                if self.use_bland {
                    return Some((j, score));
                }
                match best {
                    Some((_, s)) if s <= score => {}
                    _ => best = Some((j, score)),
                }
            }
        }
        best
    }

    fn step(&mut self) -> Step {
        let Some((q, _)) = self.price() else {
            return Step::Optimal;
        };
        let dir = match self.state[q] {
            VarState::AtLower => 1.0,
            VarState::AtUpper => -1.0,
            VarState::FreeZero => {
                if self.dj[q] < 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            VarState::Basic(_) => unreachable!(),
        };

        // Ratio test: entering moves by t >= 0 in direction `dir`. Ties at
        // the blocking step prefer the largest pivot element for stability
        // (lowest basis index under Bland's rule, for termination).
        let mut t_limit = if self.lo[q].is_finite() && self.hi[q].is_finite() {
            self.hi[q] - self.lo[q]
        } else {
            f64::INFINITY
        };
        let mut leave: Option<usize> = None;
        for i in 0..self.m {
            let coef = self.tab[i * self.ncols + q];
            if coef.abs() <= PIVOT_TOL {
                continue;
            }
            let rate = -dir * coef;
            let b = self.basis[i];
            let t_i = if rate < 0.0 {
                if self.lo[b].is_finite() {
                    (self.xb[i] - self.lo[b]) / (-rate)
                } else {
                    continue;
                }
            } else {
                if self.hi[b].is_finite() {
                    (self.hi[b] - self.xb[i]) / rate
                } else {
                    continue;
                }
            };
            let t_i = t_i.max(0.0);
            if t_i > t_limit + 1e-12 {
                continue;
            }
            let better = match leave {
                None => t_i < t_limit - 1e-12 || t_limit.is_infinite(),
                Some(r) => {
                    let tied = t_i <= t_limit + 1e-12;
                    let prev = self.tab[r * self.ncols + q].abs();
                    t_i < t_limit - 1e-12
                        || (tied
                            && if self.use_bland {
                                self.basis[i] < self.basis[r]
                            } else {
                                coef.abs() > prev
                            })
                }
            };
            if better {
                t_limit = t_i.min(t_limit);
                leave = Some(i);
            }
        }

        if t_limit.is_infinite() {
            return Step::Unbounded;
        }
        let t = t_limit;
        if t <= DEGEN_TOL {
            self.degen_run += 1;
            if self.degen_run > 3 * (self.m + self.n_struct) {
                self.use_bland = true;
            }
        } else {
            self.degen_run = 0;
            self.use_bland = false;
        }

        let entering_value = self.rest_value(q) + dir * t;
        for i in 0..self.m {
            let coef = self.tab[i * self.ncols + q];
            if coef.abs() > 0.0 {
                self.xb[i] -= dir * coef * t;
            }
        }

        match leave {
            None => {
                // Bound flip: the entering variable runs to its other bound.
                self.state[q] = match self.state[q] {
                    VarState::AtLower => VarState::AtUpper,
                    VarState::AtUpper => VarState::AtLower,
                    other => other,
                };
                Step::Pivoted
            }
            Some(r) => {
                let b = self.basis[r];
                let rate = -dir * self.tab[r * self.ncols + q];
                self.state[b] = if rate < 0.0 {
                    VarState::AtLower
                } else {
                    VarState::AtUpper
                };
                if self.lo[b] == self.hi[b] {
                    self.state[b] = VarState::AtLower;
                }
                self.basis[r] = q;
                self.state[q] = VarState::Basic(r);
                self.xb[r] = entering_value;
                self.eliminate(r, q);
                Step::Pivoted
            }
        }
    }

    /// Gaussian elimination of column `q` against pivot row `r`.
    fn eliminate(&mut self, r: usize, q: usize) {
        let ncols = self.ncols;
        let piv = self.tab[r * ncols + q];
        let inv = 1.0 / piv;
        for j in 0..ncols {
            self.tab[r * ncols + j] *= inv;
        }
        self.tab[r * ncols + q] = 1.0;
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * ncols + q];
            if f.abs() <= 1e-13 {
                self.tab[i * ncols + q] = 0.0;
                continue;
            }
            for j in 0..ncols {
                self.tab[i * ncols + j] -= f * self.tab[r * ncols + j];
            }
            self.tab[i * ncols + q] = 0.0;
        }
        let f = self.dj[q];
        if f.abs() > 0.0 {
            for j in 0..ncols {
                self.dj[j] -= f * self.tab[r * ncols + j];
            }
            self.dj[q] = 0.0;
        }
        self.pivots_since_refactor += 1;
    }

    fn run(&mut self) -> Result<Step, LpError> {
        let cap = 20_000 + 200 * (self.m + self.ncols);
        for _ in 0..cap {
            if self.pivots_since_refactor >= 128 {
                self.refactorize()?;
            }
            match self.step() {
                Step::Pivoted => continue,
                done => return Ok(done),
            }
        }
        Err(LpError::IterationLimit(cap))
    }

    /// Iterate to optimality at the standard pricing tolerance, then wring
    /// out tolerance stall with a much tighter pass; big-bound columns can
    /// otherwise hide objective mass behind near-zero reduced costs.
    fn solve_phase(&mut self) -> Result<Step, LpError> {
        if let Step::Unbounded = self.run_to_optimal()? {
            return Ok(Step::Unbounded);
        }
        self.price_tol = 1e-10;
        let polished = self.run_to_optimal();
        self.price_tol = TOL.feas;
        polished
    }

    /// Iterate to optimality, re-deriving the tableau from the basis until a
    /// drift-free optimum is confirmed. Short clean solves skip the rebuild.
    fn run_to_optimal(&mut self) -> Result<Step, LpError> {
        for _round in 0..40 {
            if let Step::Unbounded = self.run()? {
                return Ok(Step::Unbounded);
            }
            if self.pivots_since_refactor <= 32 && self.max_residual() <= 1e-8 {
                return Ok(Step::Optimal);
            }
            self.refactorize()?;
            if self.price().is_none() {
                return Ok(Step::Optimal);
            }
        }
        Err(LpError::Numerical("optimality did not stabilize under refactorization"))
    }
}

/// Solve a linear program.
///
/// Rows are equilibrated to unit magnitude first so that the solver's
/// absolute tolerances are meaningful regardless of coefficient scale; the
/// reported duals refer to the original rows.
pub fn solve_lp(p: &LpProblem) -> Result<LpOutcome, LpError> {
    p.validate()?;
    let mut scale = vec![1.0; p.num_rows()];
    let mut needs_scaling = false;
    for (i, row) in p.rows.iter().enumerate() {
        let mag = row
            .iter()
            .map(|v| v.abs())
            .fold(p.rhs[i].abs(), f64::max);
        if mag > 10.0 || (mag > 0.0 && mag < 0.1) {
            scale[i] = mag;
            needs_scaling = true;
        }
    }
    if !needs_scaling {
        return solve_lp_unscaled(p);
    }
    let mut scaled = p.clone();
    for i in 0..p.num_rows() {
        if scale[i] != 1.0 {
            for v in scaled.rows[i].iter_mut() {
                *v /= scale[i];
            }
            scaled.rhs[i] /= scale[i];
        }
    }
    let mut out = solve_lp_unscaled(&scaled)?;
    for (i, y) in out.duals.iter_mut().enumerate() {
        *y /= scale[i];
    }
    Ok(out)
}

fn solve_lp_unscaled(p: &LpProblem) -> Result<LpOutcome, LpError> {
    let n = p.num_vars();
    let m = p.num_rows();

    // Internally always minimize.
    let c_int: Vec<f64> = match p.sense {
        Sense::Min => p.objective.clone(),
        Sense::Max => p.objective.iter().map(|v| -v).collect(),
    };

    let mut phase1_cost = vec![0.0; n + 2 * m];
    for j in 0..m {
        phase1_cost[n + m + j] = 1.0;
    }
    let mut s = Simplex::new(p, &phase1_cost);

    match s.solve_phase()? {
        Step::Unbounded => return Err(LpError::Numerical("phase 1 unbounded")),
        Step::Optimal | Step::Pivoted => {}
    }
    if s.objective_value() > 1e-7 {
        if std::env::var_os("BILEVEL_LP_DEBUG").is_some() {
            eprintln!(
                "phase-1 infeasible: objective {:.3e}, residual {:.3e}, {} pivots since refactor",
                s.objective_value(),
                s.max_residual(),
                s.pivots_since_refactor
            );
        }
        return Ok(non_optimal(LpStatus::Infeasible));
    }

    // Drive leftover artificials out of the basis where possible; rows with
    // no eligible pivot are dependent and keep their artificial pinned at 0.
    for r in 0..m {
        let b = s.basis[r];
        if b < n + m {
            continue;
        }
        let mut pivoted = false;
        for j in 0..n + m {
            if matches!(s.state[j], VarState::Basic(_)) {
                continue;
            }
            if s.lo[j] == s.hi[j] {
                continue;
            }
            if s.tab[r * s.ncols + j].abs() > 1e-7 {
                // Degenerate swap: both variables keep their current values.
                let entering_value = s.rest_value(j);
                s.state[b] = VarState::AtLower;
                s.basis[r] = j;
                s.state[j] = VarState::Basic(r);
                s.xb[r] = entering_value;
                s.eliminate(r, j);
                pivoted = true;
                break;
            }
        }
        if !pivoted {
            let a = s.basis[r];
            s.hi[a] = 0.0;
        }
    }
    // Pin all nonbasic artificials so phase 2 cannot reuse them.
    for j in n + m..n + 2 * m {
        if !matches!(s.state[j], VarState::Basic(_)) {
            s.hi[j] = 0.0;
            s.state[j] = VarState::AtLower;
        }
    }

    let mut phase2_cost = vec![0.0; n + 2 * m];
    phase2_cost[..n].copy_from_slice(&c_int);
    s.set_costs(&phase2_cost);
    s.degen_run = 0;
    s.use_bland = false;

    match s.solve_phase()? {
        Step::Unbounded => return Ok(non_optimal(LpStatus::Unbounded)),
        Step::Optimal | Step::Pivoted => {}
    }
    if s.max_residual() > 1e-6 {
        return Err(LpError::Numerical("primal residual too large at optimality"));
    }

    // Extract the primal point.
    let mut primal = vec![0.0; n];
    for (j, p_j) in primal.iter_mut().enumerate() {
        *p_j = s.rest_value(j);
    }
    let objective_int: f64 = c_int.iter().zip(&primal).map(|(c, x)| c * x).sum();

    // Duals from the artificial columns: B^{-1} e_r = sign_r * tab[:, art_r].
    let mut duals_int = vec![0.0; m];
    for r in 0..m {
        let mut acc = 0.0;
        for i in 0..m {
            acc += phase2_cost[s.basis[i]] * s.tab[i * s.ncols + n + m + r];
        }
        duals_int[r] = acc * s.art_sign[r];
    }
    let mut reduced_int = vec![0.0; n];
    for j in 0..n {
        let mut acc = c_int[j];
        for (i, &y) in duals_int.iter().enumerate() {
            acc -= y * p.rows[i][j];
        }
        reduced_int[j] = acc;
    }
    // Dual objective: y'b plus reduced-cost contributions of nonbasic
    // structural columns; nonbasic slacks always rest at 0 and add nothing.
    let mut dual_obj = crate::common::dot(&duals_int, &p.rhs);
    for j in 0..n {
        if !matches!(s.state[j], VarState::Basic(_)) {
            dual_obj += reduced_int[j] * s.rest_value(j);
        }
    }

    let (objective, duals, reduced_costs, dual_objective) = match p.sense {
        Sense::Min => (objective_int, duals_int, reduced_int, dual_obj),
        Sense::Max => (
            -objective_int,
            duals_int.iter().map(|v| -v).collect(),
            reduced_int.iter().map(|v| -v).collect(),
            -dual_obj,
        ),
    };

    Ok(LpOutcome {
        status: LpStatus::Optimal,
        primal,
        objective,
        duals,
        reduced_costs,
        dual_objective,
    })
}

fn non_optimal(status: LpStatus) -> LpOutcome {
    LpOutcome {
        status,
        primal: Vec::new(),
        objective: 0.0,
        duals: Vec::new(),
        reduced_costs: Vec::new(),
        dual_objective: 0.0,
    }
}
