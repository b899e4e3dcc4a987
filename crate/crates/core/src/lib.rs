//! Solver library for bilevel mixed-integer linear programs whose upper- and
//! lower-level problems are linked through binary tender variables.

pub mod common;
pub mod driver;
pub mod instances;
pub mod lagrangian;
pub mod lp;
pub mod milp;
pub mod model;
pub mod modularity;
pub mod rules;

#[cfg(test)]
pub(crate) mod test_fixtures;

pub use driver::{
    brute_force_solve, solve_bilevel, verify_solution, BilevelSolution, CoeffMode, CutFamily,
    Extras, SolveConfig, SolveStatus, Strategy,
};
pub use lp::{solve_lp, LpOutcome, LpProblem, LpStatus, RowSense, Sense};
pub use milp::{solve_milp, CandidateDecision, CutRow, MilpOutcome, MilpProblem, MilpStatus};
pub use model::{build_hpr, eval_phi, eval_psi, eval_varphi, BilevelInstance, Phi, PhiCache};
