//! Branch-and-bound MILP solver on top of [`crate::lp`] with a lazy-cut
//! callback at integer candidates.
//!
//! Node selection is best-bound, branching picks the most fractional
//! integer variable (ties by lowest index), and cuts returned by the
//! callback enter a global pool so every open node inherits them. A node
//! whose candidate was rejected is re-inserted and re-solved with the new
//! rows appended.

use crate::common::TOL;
use crate::lp::{solve_lp, LpError, LpProblem, LpStatus, RowSense, Sense};
use std::collections::BinaryHeap;
use std::collections::BTreeMap;
use std::ops::Range;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct MilpProblem {
    pub lp: LpProblem,
    /// Integrality flag per variable.
    pub is_integer: Vec<bool>,
    /// Optional named variable blocks for callback addressing.
    pub groups: BTreeMap<String, Range<usize>>,
    /// Optional branching priority per variable (lower branches first);
    /// empty means all variables rank equally and the most fractional wins.
    pub branch_priority: Vec<i32>,
}

impl MilpProblem {
    pub fn new(lp: LpProblem, is_integer: Vec<bool>) -> Self {
        MilpProblem {
            lp,
            is_integer,
            groups: BTreeMap::new(),
            branch_priority: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        self.lp.validate()?;
        if self.is_integer.len() != self.lp.num_vars() {
            return Err(MilpError::FlagLength {
                got: self.is_integer.len(),
                want: self.lp.num_vars(),
            });
        }
        for (j, &flag) in self.is_integer.iter().enumerate() {
            if flag && !(self.lp.lower[j].is_finite() && self.lp.upper[j].is_finite()) {
                return Err(MilpError::UnboundedInteger(j));
            }
        }
        Ok(())
    }
}

/// A linear inequality over all variables of the problem.
#[derive(Debug, Clone)]
pub struct CutRow {
    pub coeffs: Vec<f64>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl CutRow {
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = crate::common::dot(&self.coeffs, x);
        match self.sense {
            RowSense::Le => lhs - self.rhs,
            RowSense::Ge => self.rhs - lhs,
            RowSense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

pub enum CandidateDecision {
    Accept,
    Reject(Vec<CutRow>),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveLimits {
    pub max_nodes: Option<u64>,
    pub time_limit: Option<Duration>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    LimitReached,
}

#[derive(Debug, Clone)]
pub struct MilpOutcome {
    pub status: MilpStatus,
    /// Incumbent assignment, if any integer-feasible point was accepted.
    pub primal: Option<Vec<f64>>,
    pub objective: Option<f64>,
    /// Proven bound in the problem's sense (lower bound for Min).
    pub bound: f64,
    /// (objective - bound) / max(1, |objective|); infinite with no incumbent.
    pub gap: f64,
    pub nodes: u64,
    pub cuts_in_pool: usize,
}

#[derive(Debug, Error)]
pub enum MilpError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("integrality flags length {got} does not match variable count {want}")]
    FlagLength { got: usize, want: usize },
    #[error("integer variable {0} has non-finite bounds")]
    UnboundedInteger(usize),
    #[error("cut has {got} coefficients, expected {want}")]
    CutShape { got: usize, want: usize },
    #[error("callback rejected a candidate without a violated cut")]
    CutNotViolated,
}

pub type Callback<'a> = &'a mut dyn FnMut(&[f64], f64) -> CandidateDecision;

/// Incremental construction of a MILP with sparse rows; densified on build.
/// Can start from an existing problem to bolt on variables and rows.
#[derive(Debug, Clone)]
pub struct MilpBuilder {
    sense: Sense,
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    is_integer: Vec<bool>,
    rows: Vec<(Vec<(usize, f64)>, RowSense, f64)>,
    groups: BTreeMap<String, Range<usize>>,
    branch_priority: Vec<i32>,
}

impl MilpBuilder {
    pub fn new(sense: Sense) -> Self {
        MilpBuilder {
            sense,
            objective: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            is_integer: Vec::new(),
            rows: Vec::new(),
            groups: BTreeMap::new(),
            branch_priority: Vec::new(),
        }
    }

    pub fn from_problem(p: &MilpProblem) -> Self {
        let rows = p
            .lp
            .rows
            .iter()
            .zip(&p.lp.row_senses)
            .zip(&p.lp.rhs)
            .map(|((row, &sense), &rhs)| {
                let terms: Vec<(usize, f64)> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, &v)| (j, v))
                    .collect();
                (terms, sense, rhs)
            })
            .collect();
        MilpBuilder {
            sense: p.lp.sense,
            objective: p.lp.objective.clone(),
            lower: p.lp.lower.clone(),
            upper: p.lp.upper.clone(),
            is_integer: p.is_integer.clone(),
            rows,
            groups: p.groups.clone(),
            branch_priority: p.branch_priority.clone(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_var(&mut self, lo: f64, hi: f64, integer: bool, obj: f64) -> usize {
        let id = self.objective.len();
        self.objective.push(obj);
        self.lower.push(lo);
        self.upper.push(hi);
        self.is_integer.push(integer);
        id
    }

    /// Fixed-value helper, for constants that must appear as columns.
    pub fn add_fixed(&mut self, value: f64) -> usize {
        self.add_var(value, value, false, 0.0)
    }

    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, sense: RowSense, rhs: f64) {
        self.rows.push((terms, sense, rhs));
    }

    pub fn set_group(&mut self, name: &str, range: Range<usize>) {
        self.groups.insert(name.to_string(), range);
    }

    /// Lower priorities branch first; unset variables default to 0.
    pub fn set_branch_priority(&mut self, var: usize, priority: i32) {
        if self.branch_priority.len() < self.objective.len() {
            self.branch_priority.resize(self.objective.len(), 0);
        }
        self.branch_priority[var] = priority;
    }

    pub fn build(self) -> MilpProblem {
        let n = self.objective.len();
        let mut rows = Vec::with_capacity(self.rows.len());
        let mut senses = Vec::with_capacity(self.rows.len());
        let mut rhs = Vec::with_capacity(self.rows.len());
        for (terms, sense, b) in self.rows {
            let mut row = vec![0.0; n];
            for (j, v) in terms {
                row[j] += v;
            }
            rows.push(row);
            senses.push(sense);
            rhs.push(b);
        }
        let mut p = MilpProblem::new(
            LpProblem {
                sense: self.sense,
                objective: self.objective,
                rows,
                row_senses: senses,
                rhs,
                lower: self.lower,
                upper: self.upper,
            },
            self.is_integer,
        );
        p.groups = self.groups;
        p.branch_priority = self.branch_priority;
        p
    }
}

struct Node {
    /// Valid objective bound inherited from the parent (min sense).
    bound: f64,
    /// Bound tightenings accumulated along the branch.
    overrides: Vec<(usize, f64, f64)>,
    seq: u64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for Node {}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap; invert so the lowest bound pops first,
        // with the insertion sequence as a deterministic tie-break.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Solve a MILP, invoking `callback` at every improving integer candidate.
pub fn solve_milp(
    p: &MilpProblem,
    mut callback: Option<Callback<'_>>,
    limits: SolveLimits,
) -> Result<MilpOutcome, MilpError> {
    p.validate()?;
    let start = Instant::now();
    let n = p.lp.num_vars();
    let maximize = p.lp.sense == Sense::Max;

    // Work in min sense internally.
    let mut base = p.lp.clone();
    base.sense = Sense::Min;
    if maximize {
        for c in base.objective.iter_mut() {
            *c = -*c;
        }
    }

    let mut pool: Vec<CutRow> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        overrides: Vec::new(),
        seq,
    });

    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut nodes = 0u64;
    let mut limit_hit = false;
    let mut saw_unbounded = false;

    while let Some(node) = heap.pop() {
        if let Some((_, inc)) = &incumbent {
            if node.bound >= *inc - TOL.equality {
                continue;
            }
        }
        if let Some(max_nodes) = limits.max_nodes {
            if nodes >= max_nodes {
                limit_hit = true;
                heap.push(node);
                break;
            }
        }
        if let Some(tl) = limits.time_limit {
            if start.elapsed() >= tl {
                limit_hit = true;
                heap.push(node);
                break;
            }
        }
        nodes += 1;

        let mut lp = base.clone();
        for cut in &pool {
            lp.rows.push(cut.coeffs.clone());
            lp.row_senses.push(cut.sense);
            lp.rhs.push(cut.rhs);
        }
        for &(var, lo, hi) in &node.overrides {
            lp.lower[var] = lp.lower[var].max(lo);
            lp.upper[var] = lp.upper[var].min(hi);
            if lp.lower[var] > lp.upper[var] {
                // branch emptied the box
                lp.lower[var] = 1.0;
                lp.upper[var] = 0.0;
            }
        }
        if lp.lower.iter().zip(&lp.upper).any(|(l, h)| l > h) {
            continue;
        }

        let out = solve_lp(&lp)?;
        match out.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                saw_unbounded = true;
                break;
            }
            LpStatus::Optimal => {}
        }
        let obj = out.objective;
        if let Some((_, inc)) = &incumbent {
            if obj >= *inc - TOL.equality {
                continue;
            }
        }

        // Most fractional integer variable within the lowest fractional
        // priority class, ties by lowest index.
        let mut branch_var: Option<(usize, f64, i32)> = None;
        for j in 0..n {
            if !p.is_integer[j] {
                continue;
            }
            let v = out.primal[j];
            let dist = (v - v.round()).abs();
            if dist > TOL.int {
                let prio = p.branch_priority.get(j).copied().unwrap_or(0);
                let better = match branch_var {
                    None => true,
                    Some((_, best_dist, best_prio)) => {
                        prio < best_prio || (prio == best_prio && dist > best_dist)
                    }
                };
                if better {
                    branch_var = Some((j, dist, prio));
                }
            }
        }

        match branch_var {
            None => {
                // Integer candidate; round off LP fuzz before reporting.
                let mut sol = out.primal.clone();
                for j in 0..n {
                    if p.is_integer[j] {
                        sol[j] = sol[j].round();
                    }
                }
                let cand_obj = if maximize { -obj } else { obj };
                let decision = match callback.as_mut() {
                    Some(cb) => cb(&sol, cand_obj),
                    None => CandidateDecision::Accept,
                };
                match decision {
                    CandidateDecision::Accept => {
                        incumbent = Some((sol, obj));
                    }
                    CandidateDecision::Reject(cuts) => {
                        let mut any_violated = false;
                        for cut in &cuts {
                            if cut.coeffs.len() != n {
                                return Err(MilpError::CutShape {
                                    got: cut.coeffs.len(),
                                    want: n,
                                });
                            }
                            if cut.violation(&sol) > TOL.cut_violation {
                                any_violated = true;
                            }
                        }
                        if !any_violated {
                            return Err(MilpError::CutNotViolated);
                        }
                        pool.extend(cuts);
                        seq += 1;
                        heap.push(Node {
                            bound: obj,
                            overrides: node.overrides,
                            seq,
                        });
                    }
                }
            }
            Some((var, _, _)) => {
                let v = out.primal[var];
                let floor = v.floor();
                for (lo, hi) in [
                    (p.lp.lower[var], floor),
                    (floor + 1.0, p.lp.upper[var]),
                ] {
                    seq += 1;
                    let mut overrides = node.overrides.clone();
                    overrides.push((var, lo, hi));
                    heap.push(Node {
                        bound: obj,
                        overrides,
                        seq,
                    });
                }
            }
        }
    }

    // Collapse the heap into the proven bound.
    let open_bound = heap
        .iter()
        .map(|nd| nd.bound)
        .fold(f64::INFINITY, f64::min);

    let (status, primal, obj_int, bound_int) = if saw_unbounded {
        (MilpStatus::Unbounded, None, None, f64::NEG_INFINITY)
    } else if limit_hit {
        let (primal, obj) = match incumbent {
            Some((sol, o)) => (Some(sol), Some(o)),
            None => (None, None),
        };
        let bound = open_bound.min(obj.unwrap_or(f64::INFINITY));
        (MilpStatus::LimitReached, primal, obj, bound)
    } else {
        match incumbent {
            Some((sol, o)) => (MilpStatus::Optimal, Some(sol), Some(o), o),
            None => (MilpStatus::Infeasible, None, None, f64::INFINITY),
        }
    };

    let gap = match obj_int {
        Some(o) if bound_int.is_finite() => (o - bound_int).max(0.0) / o.abs().max(1.0),
        _ => f64::INFINITY,
    };
    let (objective, bound) = if maximize {
        (obj_int.map(|o| -o), -bound_int)
    } else {
        (obj_int, bound_int)
    };

    Ok(MilpOutcome {
        status,
        primal,
        objective,
        bound,
        gap,
        nodes,
        cuts_in_pool: pool.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn binary_milp(sense: Sense, obj: Vec<f64>, rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> MilpProblem {
        let n = obj.len();
        let m = rows.len();
        MilpProblem::new(
            LpProblem {
                sense,
                objective: obj,
                rows,
                row_senses: vec![RowSense::Le; m],
                rhs,
                lower: vec![0.0; n],
                upper: vec![1.0; n],
            },
            vec![true; n],
        )
    }

    #[test]
    fn rounding_forced() {
        // max x1+x2 s.t. x1+x2 <= 1.5, binary
        let p = binary_milp(
            Sense::Max,
            vec![1.0, 1.0],
            vec![vec![1.0, 1.0]],
            vec![1.5],
        );
        let out = solve_milp(&p, None, SolveLimits::default()).unwrap();
        assert_eq!(out.status, MilpStatus::Optimal);
        assert!((out.objective.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn knapsack_enumerated() {
        // max 3a+2b s.t. 2a+2b <= 3, binary: enumeration gives 3 at a=1,b=0
        let p = binary_milp(
            Sense::Max,
            vec![3.0, 2.0],
            vec![vec![2.0, 2.0]],
            vec![3.0],
        );
        let out = solve_milp(&p, None, SolveLimits::default()).unwrap();
        assert_eq!(out.status, MilpStatus::Optimal);
        assert!((out.objective.unwrap() - 3.0).abs() < 1e-9);
        let sol = out.primal.unwrap();
        assert_eq!(sol[0].round() as i64, 1);
        assert_eq!(sol[1].round() as i64, 0);
    }

    #[test]
    fn callback_cuts_off_x1() {
        // Reject every candidate with x1 = 1 via the global cut x1 <= 0; the
        // survivor is the best point with x1 = 0.
        let p = binary_milp(
            Sense::Max,
            vec![5.0, 3.0, 2.0],
            vec![vec![1.0, 1.0, 1.0]],
            vec![2.0],
        );
        let mut emitted: Vec<CutRow> = Vec::new();
        let mut cb = |sol: &[f64], _obj: f64| {
            if sol[0] > 0.5 {
                let cut = CutRow {
                    coeffs: vec![1.0, 0.0, 0.0],
                    sense: RowSense::Le,
                    rhs: 0.0,
                };
                emitted.push(cut.clone());
                CandidateDecision::Reject(vec![cut])
            } else {
                CandidateDecision::Accept
            }
        };
        let out = solve_milp(&p, Some(&mut cb), SolveLimits::default()).unwrap();
        assert_eq!(out.status, MilpStatus::Optimal);
        // best with x1=0: 3+2 = 5
        assert!((out.objective.unwrap() - 5.0).abs() < 1e-9);
        let sol = out.primal.unwrap();
        assert!(sol[0] < 0.5);
        // callback soundness: the incumbent violates none of the emitted cuts
        for cut in &emitted {
            assert!(cut.violation(&sol) <= TOL.cut_violation);
        }
    }

    #[test]
    fn infeasible_and_unbounded_distinguished() {
        let inf = binary_milp(Sense::Max, vec![1.0], vec![vec![1.0]], vec![-1.0]);
        assert_eq!(
            solve_milp(&inf, None, SolveLimits::default()).unwrap().status,
            MilpStatus::Infeasible
        );

        let unb = MilpProblem::new(
            LpProblem {
                sense: Sense::Max,
                objective: vec![1.0, 0.0],
                rows: vec![vec![0.0, 1.0]],
                row_senses: vec![RowSense::Le],
                rhs: vec![0.5],
                lower: vec![0.0, 0.0],
                upper: vec![f64::INFINITY, 1.0],
            },
            vec![false, true],
        );
        assert_eq!(
            solve_milp(&unb, None, SolveLimits::default()).unwrap().status,
            MilpStatus::Unbounded
        );
    }

    #[test]
    fn node_limit_reports_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 12;
        let obj: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..10.0)).collect();
        let row: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..10.0)).collect();
        let cap = row.iter().sum::<f64>() / 2.0;
        let p = binary_milp(Sense::Max, obj, vec![row], vec![cap]);
        let out = solve_milp(
            &p,
            None,
            SolveLimits {
                max_nodes: Some(2),
                time_limit: None,
            },
        )
        .unwrap();
        assert_eq!(out.status, MilpStatus::LimitReached);
        assert!(out.gap > 0.0);
    }

    fn enumerate_binary_max(p: &MilpProblem) -> Option<f64> {
        let n = p.lp.num_vars();
        let mut best: Option<f64> = None;
        for mask in 0u64..(1 << n) {
            let x: Vec<f64> = (0..n).map(|j| ((mask >> j) & 1) as f64).collect();
            let feasible = (0..p.lp.num_rows()).all(|i| {
                let lhs = crate::common::dot(&p.lp.rows[i], &x);
                match p.lp.row_senses[i] {
                    RowSense::Le => lhs <= p.lp.rhs[i] + 1e-9,
                    RowSense::Ge => lhs >= p.lp.rhs[i] - 1e-9,
                    RowSense::Eq => (lhs - p.lp.rhs[i]).abs() <= 1e-9,
                }
            });
            if feasible {
                let v = crate::common::dot(&p.lp.objective, &x);
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
        best
    }

    #[test]
    fn matches_enumeration_on_random_milps() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..40 {
            let n = rng.gen_range(3..=10);
            let m = rng.gen_range(1..=4);
            let obj: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let rows: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.gen_range(-3.0..6.0)).collect())
                .collect();
            let rhs: Vec<f64> = (0..m).map(|_| rng.gen_range(1.0..10.0)).collect();
            let p = binary_milp(Sense::Max, obj, rows, rhs);
            let out = solve_milp(&p, None, SolveLimits::default()).unwrap();
            match enumerate_binary_max(&p) {
                Some(best) => {
                    assert_eq!(out.status, MilpStatus::Optimal, "case {case}");
                    assert!(
                        (out.objective.unwrap() - best).abs() < 1e-6,
                        "case {case}: milp {} vs enum {}",
                        out.objective.unwrap(),
                        best
                    );
                    // bound never moves past the proven optimum
                    assert!(out.bound <= best + 1e-6 || out.bound >= best - 1e-6);
                    assert!((out.bound - best).abs() < 1e-6);
                }
                None => assert_eq!(out.status, MilpStatus::Infeasible, "case {case}"),
            }
        }
    }

    #[test]
    fn mixed_integer_continuous() {
        // max 2x + y with x binary, y continuous in [0, 2], x + y <= 2.3
        let p = MilpProblem::new(
            LpProblem {
                sense: Sense::Max,
                objective: vec![2.0, 1.0],
                rows: vec![vec![1.0, 1.0]],
                row_senses: vec![RowSense::Le],
                rhs: vec![2.3],
                lower: vec![0.0, 0.0],
                upper: vec![1.0, 2.0],
            },
            vec![true, false],
        );
        let out = solve_milp(&p, None, SolveLimits::default()).unwrap();
        assert_eq!(out.status, MilpStatus::Optimal);
        // x=1, y=1.3 -> 3.3
        assert!((out.objective.unwrap() - 3.3).abs() < 1e-8);
    }
}
