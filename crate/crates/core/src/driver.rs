//! Branch-and-cut orchestration: solve the relaxed single-level master and
//! lazily separate value-function cuts at integer candidates, with optional
//! decision-rule extras; plus a brute-force enumeration oracle and a
//! post-hoc solution verifier.

use crate::common::{bits_of, dot, vec_of_bits, TOL};
use crate::lagrangian::{
    augmented_cut, exact_ul, lagrangian_cut, penalty_cut, quick_rho, quick_ul,
    shift_for_augmented, CoefficientSet, Cut, CutError, Provenance,
};
use crate::milp::{
    solve_milp, CandidateDecision, CutRow, MilpBuilder, MilpError, MilpStatus, SolveLimits,
};
use crate::model::{
    build_hpr, eval_phi, lower_argmax_y1, BilevelInstance, ModelError, Phi, PhiCache,
};
use crate::modularity::{
    closed_form_ul, quasi_lagrangian_cut, quasi_submodular_cut, quasi_supermodular_cut,
    submodular_cut, supermodular_cut, ModKind, OracleError, PhiOracle,
};
use crate::rules::{
    learned_cut, learned_cut_rhs, ldr_separate, LdrMask, LdrOutcome, NeuralRule, RuleError,
    Y1Mode,
};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::time::{Duration, Instant};
use thiserror::Error;

pub const BRUTE_FORCE_CAP: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutFamily {
    Penalty,
    Lagrangian,
    Augmented,
    Submodular,
    Supermodular,
    QuasiLagrangian,
    QuasiSubmodular,
    QuasiSupermodular,
}

impl CutFamily {
    pub fn name(self) -> &'static str {
        match self {
            CutFamily::Penalty => "penalty",
            CutFamily::Lagrangian => "lagrangian",
            CutFamily::Augmented => "augmented",
            CutFamily::Submodular => "submodular",
            CutFamily::Supermodular => "supermodular",
            CutFamily::QuasiLagrangian => "quasi-lagrangian",
            CutFamily::QuasiSubmodular => "quasi-submodular",
            CutFamily::QuasiSupermodular => "quasi-supermodular",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoeffMode {
    Exact,
    Quick,
    ClosedFormSub,
    ClosedFormSuper,
}

impl CoeffMode {
    pub fn name(self) -> &'static str {
        match self {
            CoeffMode::Exact => "exact",
            CoeffMode::Quick => "quick",
            CoeffMode::ClosedFormSub => "closed-sub",
            CoeffMode::ClosedFormSuper => "closed-super",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Extras {
    pub ldr: bool,
    pub learned: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Strategy {
    BranchAndCut {
        family: CutFamily,
        coeff: CoeffMode,
        extras: Extras,
    },
    /// Replace the optimality requirement with the trained-rule cut; yields
    /// a lower bound, then an upper bound by re-solving at the fixed tender.
    LearnedReplace,
}

impl Strategy {
    pub fn branch_and_cut(family: CutFamily, coeff: CoeffMode) -> Self {
        Strategy::BranchAndCut {
            family,
            coeff,
            extras: Extras::default(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Strategy::BranchAndCut {
                family,
                coeff,
                extras,
            } => {
                let mut s = format!("{}/{}", family.name(), coeff.name());
                if extras.ldr {
                    s.push_str("+ldr");
                }
                if extras.learned {
                    s.push_str("+learned");
                }
                s
            }
            Strategy::LearnedReplace => "learned-replace".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
    /// Node cap for each relaxed-coefficient MILP; the proven bound is used
    /// when hit, which keeps the resulting cuts valid.
    pub coeff_node_limit: Option<u64>,
    pub rule: Option<NeuralRule>,
    pub m_pi: Option<f64>,
    pub ldr_free_y1: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            node_limit: None,
            time_limit: None,
            coeff_node_limit: Some(50_000),
            rule: None,
            m_pi: None,
            ldr_free_y1: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    LimitReached,
    Infeasible,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutLogEntry {
    pub z: Vec<u8>,
    pub family: String,
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub provenance: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BilevelSolution {
    pub status: SolveStatus,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub x: Vec<u8>,
    pub y: Vec<f64>,
    pub cuts: Vec<CutLogEntry>,
    pub phi_solves: usize,
    pub wall_ms: u128,
    pub coeff_ms: u128,
    /// Lower bound of the replace-mode master, when that mode ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replace_lower_bound: Option<f64>,
    /// Post-hoc audit of the trained-rule cut at the incumbent: fails only
    /// when the dual box was undersized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learned_cut_audit_ok: Option<bool>,
}

impl BilevelSolution {
    fn infeasible(wall_ms: u128, coeff_ms: u128, phi_solves: usize) -> Self {
        BilevelSolution {
            status: SolveStatus::Infeasible,
            objective: f64::INFINITY,
            bound: f64::INFINITY,
            gap: 0.0,
            x: Vec::new(),
            y: Vec::new(),
            cuts: Vec::new(),
            phi_solves,
            wall_ms,
            coeff_ms,
            replace_lower_bound: None,
            learned_cut_audit_ok: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serialization cannot fail")
    }
}

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Cut(#[from] CutError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("strategy mismatch: {0}")]
    Strategy(String),
    #[error("master problem is unbounded; the high-point relaxation must be bounded")]
    UnboundedMaster,
    #[error("brute force enumeration limited to n_x <= {cap}, got {n_x}")]
    TooLarge { n_x: usize, cap: usize },
    #[error(
        "candidate repeated at z = {z:?} with its cut already satisfied; \
         numerical drift between the cut and the value function"
    )]
    NumericalDrift { z: Vec<u8> },
}

enum Coefficients {
    None,
    Rho(f64),
    Ul(CoefficientSet),
    /// Multiplier set plus the shifted vectors for the augmented family.
    Shifted {
        base: CoefficientSet,
        u: Vec<f64>,
        l: Vec<f64>,
    },
}

fn provenance_name(p: Provenance) -> &'static str {
    match p {
        Provenance::Exact => "exact",
        Provenance::Quick => "quick",
        Provenance::ClosedFormSub => "closed-sub",
        Provenance::ClosedFormSuper => "closed-super",
    }
}

fn ul_for_mode(
    inst: &BilevelInstance,
    mode: CoeffMode,
    limits: SolveLimits,
    cache: &mut PhiCache,
) -> Result<Option<CoefficientSet>, DriverError> {
    match mode {
        CoeffMode::Exact => match exact_ul(inst, cache) {
            Ok(c) => Ok(Some(c)),
            Err(CutError::NoFeasibleVertex) => Ok(None),
            Err(e) => Err(e.into()),
        },
        CoeffMode::Quick => Ok(Some(quick_ul(inst, limits)?)),
        CoeffMode::ClosedFormSub | CoeffMode::ClosedFormSuper => {
            let kind = if mode == CoeffMode::ClosedFormSub {
                ModKind::Sub
            } else {
                ModKind::Super
            };
            let mut oracle = PhiOracle { inst, cache };
            match closed_form_ul(&mut oracle, kind) {
                Ok(c) => Ok(Some(c)),
                Err(OracleError::Infeasible(_)) => Ok(None),
                Err(e) => Err(e.into()),
            }
        }
    }
}

/// Solve the bilevel program with the chosen cut strategy.
pub fn solve_bilevel(
    inst: &BilevelInstance,
    strategy: &Strategy,
    config: &SolveConfig,
) -> Result<BilevelSolution, DriverError> {
    inst.validate()?;
    let start = Instant::now();
    let mut cache = PhiCache::new();

    match strategy {
        Strategy::LearnedReplace => solve_learned_replace(inst, config, start, &mut cache),
        Strategy::BranchAndCut {
            family,
            coeff,
            extras,
        } => solve_branch_and_cut(inst, *family, *coeff, *extras, config, start, &mut cache),
    }
}

fn solve_branch_and_cut(
    inst: &BilevelInstance,
    family: CutFamily,
    coeff: CoeffMode,
    extras: Extras,
    config: &SolveConfig,
    start: Instant,
    cache: &mut PhiCache,
) -> Result<BilevelSolution, DriverError> {
    let n_x = inst.n_x;
    let n_y = inst.n_y();
    let n_b = inst.binary_idx().len();
    let quasi = matches!(
        family,
        CutFamily::QuasiLagrangian | CutFamily::QuasiSubmodular | CutFamily::QuasiSupermodular
    );
    if quasi && n_b == 0 {
        return Err(DriverError::Strategy(format!(
            "{} cuts need a binary follower block; this instance has none",
            family.name()
        )));
    }
    if extras.learned && config.rule.is_none() {
        return Err(DriverError::Strategy(
            "the learned extra needs a trained rule in the config".into(),
        ));
    }

    // Coefficient precomputation for the Lagrangian-style families.
    let coeff_start = Instant::now();
    let coeff_limits = SolveLimits {
        max_nodes: config.coeff_node_limit,
        time_limit: None,
    };
    let coefficients = match family {
        CutFamily::Penalty => match coeff {
            CoeffMode::Quick => Coefficients::Rho(quick_rho(inst, coeff_limits)?.value),
            _ => match ul_for_mode(inst, coeff, coeff_limits, cache)? {
                Some(c) => Coefficients::Rho(c.rho_hat),
                None => Coefficients::None,
            },
        },
        CutFamily::Lagrangian => match ul_for_mode(inst, coeff, coeff_limits, cache)? {
            Some(c) => Coefficients::Ul(c),
            None => Coefficients::None,
        },
        CutFamily::Augmented => match ul_for_mode(inst, coeff, coeff_limits, cache)? {
            Some(c) => {
                let (u, l) = shift_for_augmented(&c.u, &c.l, c.rho_hat);
                Coefficients::Shifted { base: c, u, l }
            }
            None => Coefficients::None,
        },
        _ => Coefficients::None,
    };
    let coeff_ms = coeff_start.elapsed().as_millis();

    // Master: the single-level relaxation, optionally with the trained-rule
    // rows bolted on.
    let hpr = build_hpr(inst)?;
    let mut builder = MilpBuilder::from_problem(&hpr);
    let x_vars: Vec<usize> = (0..n_x).collect();
    let y_vars: Vec<usize> = (n_x..n_x + n_y).collect();
    if extras.learned {
        let rule = config.rule.as_ref().unwrap();
        learned_cut(inst, rule, &mut builder, &x_vars, &y_vars, config.m_pi)?;
        for &xv in &x_vars {
            builder.set_branch_priority(xv, -1);
        }
    }
    let master = builder.build();
    let n_master = master.lp.num_vars();
    let d_l = inst.lower.d_l.clone();
    let ldr_mask = LdrMask::from_instance(inst);

    let mut log: Vec<CutLogEntry> = Vec::new();
    let mut emitted: HashSet<(u64, &'static str)> = HashSet::new();
    let mut callback_error: Option<DriverError> = None;

    let mut callback = |sol: &[f64], _obj: f64| -> CandidateDecision {
        if callback_error.is_some() {
            return CandidateDecision::Accept;
        }
        let x_hat: Vec<u8> = x_vars.iter().map(|&j| sol[j].round() as u8).collect();
        let y_hat: Vec<f64> = y_vars.iter().map(|&j| sol[j]).collect();
        let mut run = || -> Result<CandidateDecision, DriverError> {
            let phi_x = match eval_phi(inst, &x_hat, cache)? {
                Phi::Finite(v) => v,
                // the candidate satisfies the lower-level rows, so its
                // tender is lower-feasible by construction
                Phi::Infeasible => {
                    return Err(DriverError::NumericalDrift { z: x_hat.clone() })
                }
            };
            let recourse = dot(&d_l, &y_hat);
            if recourse >= phi_x - TOL.cut_violation {
                return Ok(CandidateDecision::Accept);
            }

            let key = (bits_of(&x_hat), family.name());
            if !emitted.insert(key) {
                return Err(DriverError::NumericalDrift { z: x_hat.clone() });
            }

            let (cut, provenance): (Cut, String) = match family {
                CutFamily::Penalty => {
                    let rho = match &coefficients {
                        Coefficients::Rho(r) => *r,
                        _ => unreachable!(),
                    };
                    (penalty_cut(&x_hat, rho, phi_x), coeff.name().to_string())
                }
                CutFamily::Lagrangian => {
                    let c = match &coefficients {
                        Coefficients::Ul(c) => c,
                        _ => unreachable!(),
                    };
                    if c.any_unusable() {
                        // fall back to the penalty form at this anchor
                        (
                            penalty_cut(&x_hat, c.rho_hat, phi_x),
                            format!("{}-penalty-fallback", provenance_name(c.provenance)),
                        )
                    } else {
                        (
                            lagrangian_cut(&x_hat, &c.u, &c.l, phi_x),
                            provenance_name(c.provenance).to_string(),
                        )
                    }
                }
                CutFamily::Augmented => {
                    let (base, u, l) = match &coefficients {
                        Coefficients::Shifted { base, u, l } => (base, u, l),
                        _ => unreachable!(),
                    };
                    if base.any_unusable() {
                        (
                            penalty_cut(&x_hat, base.rho_hat, phi_x),
                            format!("{}-penalty-fallback", provenance_name(base.provenance)),
                        )
                    } else {
                        (
                            augmented_cut(&x_hat, u, l, base.rho_hat, phi_x),
                            provenance_name(base.provenance).to_string(),
                        )
                    }
                }
                CutFamily::Submodular => {
                    let mut oracle = PhiOracle { inst, cache };
                    (
                        submodular_cut(&mut oracle, &x_hat)?,
                        "closed-sub".to_string(),
                    )
                }
                CutFamily::Supermodular => {
                    let mut oracle = PhiOracle { inst, cache };
                    (
                        supermodular_cut(&mut oracle, &x_hat)?,
                        "closed-super".to_string(),
                    )
                }
                CutFamily::QuasiLagrangian => (
                    quasi_lagrangian_cut(inst, &x_hat, cache, ModKind::Sub)?,
                    "closed-sub".to_string(),
                ),
                CutFamily::QuasiSubmodular => (
                    quasi_submodular_cut(inst, &x_hat, cache)?,
                    "closed-sub".to_string(),
                ),
                CutFamily::QuasiSupermodular => (
                    quasi_supermodular_cut(inst, &x_hat, cache)?,
                    "closed-super".to_string(),
                ),
            };

            let mut rows: Vec<CutRow> = Vec::new();
            let push_cut = |cut: &Cut, family_name: String, provenance: String,
                                rows: &mut Vec<CutRow>,
                                log: &mut Vec<CutLogEntry>| {
                let mut row = cut.master_row(&d_l);
                row.coeffs.resize(n_master, 0.0);
                rows.push(row);
                log.push(CutLogEntry {
                    z: x_hat.clone(),
                    family: family_name,
                    alpha: cut.alpha.clone(),
                    beta: cut.beta,
                    provenance,
                });
            };
            push_cut(&cut, family.name().to_string(), provenance, &mut rows, &mut log);

            if extras.ldr {
                let y1_mode = if config.ldr_free_y1 {
                    Y1Mode::Free
                } else {
                    let y1 = lower_argmax_y1(inst, &x_hat, cache)?
                        .expect("anchor is lower-feasible");
                    Y1Mode::Fixed(y1)
                };
                match ldr_separate(inst, &x_hat, &y_hat, &ldr_mask, y1_mode)? {
                    LdrOutcome::Cut(ldr, _cert) => {
                        push_cut(&ldr, "ldr".to_string(), "separation".to_string(), &mut rows, &mut log);
                    }
                    LdrOutcome::NoViolation { .. } | LdrOutcome::OmegaEmpty => {}
                }
            }
            Ok(CandidateDecision::Reject(rows))
        };
        match run() {
            Ok(decision) => decision,
            Err(e) => {
                callback_error = Some(e);
                CandidateDecision::Accept
            }
        }
    };

    let limits = SolveLimits {
        max_nodes: config.node_limit,
        time_limit: config.time_limit,
    };
    let outcome = solve_milp(&master, Some(&mut callback), limits)?;
    if let Some(e) = callback_error {
        return Err(e);
    }

    let wall_ms = start.elapsed().as_millis();
    match outcome.status {
        MilpStatus::Unbounded => Err(DriverError::UnboundedMaster),
        MilpStatus::Infeasible => {
            Ok(BilevelSolution::infeasible(wall_ms, coeff_ms, cache.phi_solves))
        }
        MilpStatus::Optimal | MilpStatus::LimitReached => {
            let sol = match outcome.primal {
                Some(s) => s,
                None => {
                    return Ok(BilevelSolution::infeasible(
                        wall_ms,
                        coeff_ms,
                        cache.phi_solves,
                    ))
                }
            };
            let x: Vec<u8> = x_vars.iter().map(|&j| sol[j].round() as u8).collect();
            let y: Vec<f64> = y_vars.iter().map(|&j| sol[j]).collect();
            let objective = outcome.objective.unwrap();
            let learned_cut_audit_ok = if extras.learned {
                let rule = config.rule.as_ref().unwrap();
                let rhs = learned_cut_rhs(inst, rule, &x, config.m_pi)?;
                let phi = eval_phi(inst, &x, cache)?.expect_finite("incumbent tender");
                Some(rhs <= phi + TOL.cut_violation)
            } else {
                None
            };
            Ok(BilevelSolution {
                status: if outcome.status == MilpStatus::Optimal {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::LimitReached
                },
                objective,
                bound: outcome.bound,
                gap: outcome.gap,
                x,
                y,
                cuts: log,
                phi_solves: cache.phi_solves,
                wall_ms,
                coeff_ms,
                replace_lower_bound: None,
                learned_cut_audit_ok,
            })
        }
    }
}

fn solve_learned_replace(
    inst: &BilevelInstance,
    config: &SolveConfig,
    start: Instant,
    cache: &mut PhiCache,
) -> Result<BilevelSolution, DriverError> {
    let rule = config
        .rule
        .as_ref()
        .ok_or_else(|| DriverError::Strategy("learned-replace needs a trained rule".into()))?;
    let n_x = inst.n_x;
    let n_y = inst.n_y();

    let hpr = build_hpr(inst)?;
    let mut builder = MilpBuilder::from_problem(&hpr);
    let x_vars: Vec<usize> = (0..n_x).collect();
    let y_vars: Vec<usize> = (n_x..n_x + n_y).collect();
    learned_cut(inst, rule, &mut builder, &x_vars, &y_vars, config.m_pi)?;
    // Tender bits decide the whole network block; branch on them first.
    for &xv in &x_vars {
        builder.set_branch_priority(xv, -1);
    }
    let master = builder.build();

    let limits = SolveLimits {
        max_nodes: config.node_limit,
        time_limit: config.time_limit,
    };
    let outcome = solve_milp(&master, None, limits)?;
    let wall_ms = start.elapsed().as_millis();
    let sol = match (outcome.status, outcome.primal) {
        (MilpStatus::Unbounded, _) => return Err(DriverError::UnboundedMaster),
        (MilpStatus::Infeasible, _) | (_, None) => {
            return Ok(BilevelSolution::infeasible(wall_ms, 0, cache.phi_solves))
        }
        (_, Some(s)) => s,
    };
    let lower_bound = outcome.bound.min(outcome.objective.unwrap());
    let x_hat: Vec<u8> = (0..n_x).map(|j| sol[j].round() as u8).collect();

    // Upper bound: fix the tender and restore exact follower optimality.
    let phi = eval_phi(inst, &x_hat, cache)?.expect_finite("replace-mode tender");
    let fixed = fixed_tender_problem(inst, &x_hat, phi);
    let fixed_out = solve_milp(&fixed, None, SolveLimits::default())?;
    let c_term = dot_bits(&inst.upper.c_u, &x_hat);
    let (status, objective, y) = match (fixed_out.status, fixed_out.primal) {
        (MilpStatus::Optimal, Some(ysol)) => (
            SolveStatus::Optimal,
            fixed_out.objective.unwrap() + c_term,
            ysol,
        ),
        // A tender without any jointly feasible optimal follower response
        // leaves only the lower bound.
        _ => (SolveStatus::LimitReached, f64::INFINITY, Vec::new()),
    };
    let audit = {
        let rhs = learned_cut_rhs(inst, rule, &x_hat, config.m_pi)?;
        Some(rhs <= phi + TOL.cut_violation)
    };
    let gap = if objective.is_finite() {
        (objective - lower_bound).max(0.0) / objective.abs().max(1.0)
    } else {
        f64::INFINITY
    };
    Ok(BilevelSolution {
        status,
        objective,
        bound: lower_bound,
        gap,
        x: x_hat,
        y,
        cuts: Vec::new(),
        phi_solves: cache.phi_solves,
        wall_ms,
        coeff_ms: 0,
        replace_lower_bound: Some(lower_bound),
        learned_cut_audit_ok: audit,
    })
}

fn dot_bits(coeffs: &[f64], bits: &[u8]) -> f64 {
    coeffs.iter().zip(bits).map(|(&c, &b)| c * b as f64).sum()
}

/// Single-level problem over y at a fixed tender, with follower optimality
/// restored through the value-function row.
fn fixed_tender_problem(
    inst: &BilevelInstance,
    x: &[u8],
    phi_x: f64,
) -> crate::milp::MilpProblem {
    let n_y = inst.n_y();
    let mut b = MilpBuilder::new(crate::lp::Sense::Min);
    let y_bounds = inst.y_bounds();
    let bin = inst.binary_idx();
    let yv: Vec<usize> = (0..n_y)
        .map(|k| {
            b.add_var(
                y_bounds[k].0,
                y_bounds[k].1,
                bin.contains(&k),
                inst.upper.d_u[k],
            )
        })
        .collect();
    for r in 0..inst.m_u() {
        let terms: Vec<(usize, f64)> = (0..n_y)
            .filter(|&k| inst.upper.b_u[r][k] != 0.0)
            .map(|k| (yv[k], inst.upper.b_u[r][k]))
            .collect();
        b.add_row(
            terms,
            crate::lp::RowSense::Le,
            inst.upper.h_u[r] - dot_bits(&inst.upper.a_u[r], x),
        );
    }
    for r in 0..inst.m_l() {
        let terms: Vec<(usize, f64)> = (0..n_y)
            .filter(|&k| inst.lower.b_l[r][k] != 0.0)
            .map(|k| (yv[k], inst.lower.b_l[r][k]))
            .collect();
        b.add_row(
            terms,
            crate::lp::RowSense::Le,
            inst.lower.h_l[r] - dot_bits(&inst.lower.a_l[r], x),
        );
    }
    let opt_row: Vec<(usize, f64)> = (0..n_y)
        .filter(|&k| inst.lower.d_l[k] != 0.0)
        .map(|k| (yv[k], inst.lower.d_l[k]))
        .collect();
    // Slack at equality scale only: a feasibility-scale slack would let the
    // upper objective shave measurably below the true optimum.
    b.add_row(opt_row, crate::lp::RowSense::Ge, phi_x - TOL.equality);
    b.build()
}

/// Ground-truth oracle: enumerate every lower-feasible tender, restore
/// follower optimality through the value-function row, and keep the best.
pub fn brute_force_solve(inst: &BilevelInstance) -> Result<BilevelSolution, DriverError> {
    inst.validate()?;
    if inst.n_x > BRUTE_FORCE_CAP {
        return Err(DriverError::TooLarge {
            n_x: inst.n_x,
            cap: BRUTE_FORCE_CAP,
        });
    }
    let start = Instant::now();
    let mut cache = PhiCache::new();
    let mut best: Option<(f64, Vec<u8>, Vec<f64>)> = None;
    for mask in 0u64..(1 << inst.n_x) {
        let x = vec_of_bits(mask, inst.n_x);
        let phi = match eval_phi(inst, &x, &mut cache)? {
            Phi::Finite(v) => v,
            Phi::Infeasible => continue,
        };
        let p = fixed_tender_problem(inst, &x, phi);
        let out = solve_milp(&p, None, SolveLimits::default())?;
        if out.status != MilpStatus::Optimal {
            continue;
        }
        let obj = out.objective.unwrap() + dot_bits(&inst.upper.c_u, &x);
        match &best {
            Some((b, _, _)) if *b <= obj + TOL.equality => {}
            _ => best = Some((obj, x, out.primal.unwrap())),
        }
    }
    let wall_ms = start.elapsed().as_millis();
    match best {
        None => Ok(BilevelSolution::infeasible(wall_ms, 0, cache.phi_solves)),
        Some((objective, x, y)) => Ok(BilevelSolution {
            status: SolveStatus::Optimal,
            objective,
            bound: objective,
            gap: 0.0,
            x,
            y,
            cuts: Vec::new(),
            phi_solves: cache.phi_solves,
            wall_ms,
            coeff_ms: 0,
            replace_lower_bound: None,
            learned_cut_audit_ok: None,
        }),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Recompute the optimality condition, feasibility residuals and the logged
/// cuts' validity over the (enumerated or sampled) feasible tenders.
pub fn verify_solution(
    inst: &BilevelInstance,
    sol: &BilevelSolution,
) -> Result<VerifyReport, DriverError> {
    let mut failures = Vec::new();
    let mut cache = PhiCache::new();
    if sol.status == SolveStatus::Infeasible {
        return Ok(VerifyReport {
            passed: true,
            failures,
        });
    }
    if sol.x.len() != inst.n_x || sol.y.len() != inst.n_y() {
        failures.push(format!(
            "solution shape ({}, {}) does not match the instance ({}, {})",
            sol.x.len(),
            sol.y.len(),
            inst.n_x,
            inst.n_y()
        ));
        return Ok(VerifyReport {
            passed: false,
            failures,
        });
    }

    // objective recomputation
    let obj = dot_bits(&inst.upper.c_u, &sol.x) + dot(&inst.upper.d_u, &sol.y);
    if (obj - sol.objective).abs() > 1e-6 {
        failures.push(format!(
            "objective mismatch: recomputed {obj}, reported {}",
            sol.objective
        ));
    }
    if sol.status == SolveStatus::Optimal && sol.gap < -1e-9 {
        failures.push(format!("negative gap {}", sol.gap));
    }

    // feasibility residuals
    for r in 0..inst.m_u() {
        let lhs = dot_bits(&inst.upper.a_u[r], &sol.x) + dot(&inst.upper.b_u[r], &sol.y);
        if lhs > inst.upper.h_u[r] + 1e-6 {
            failures.push(format!("upper row {r} violated by {}", lhs - inst.upper.h_u[r]));
        }
    }
    for r in 0..inst.m_l() {
        let lhs = dot_bits(&inst.lower.a_l[r], &sol.x) + dot(&inst.lower.b_l[r], &sol.y);
        if lhs > inst.lower.h_l[r] + 1e-6 {
            failures.push(format!("lower row {r} violated by {}", lhs - inst.lower.h_l[r]));
        }
    }
    let y_bounds = inst.y_bounds();
    for (k, &v) in sol.y.iter().enumerate() {
        if v < y_bounds[k].0 - 1e-6 || v > y_bounds[k].1 + 1e-6 {
            failures.push(format!("y[{k}] = {v} outside its box {:?}", y_bounds[k]));
        }
    }
    for &k in &inst.binary_idx() {
        if (sol.y[k] - sol.y[k].round()).abs() > 1e-6 {
            failures.push(format!("y[{k}] = {} is not integral", sol.y[k]));
        }
    }

    // follower optimality
    match eval_phi(inst, &sol.x, &mut cache)? {
        Phi::Infeasible => failures.push("tender is not lower-feasible".into()),
        Phi::Finite(phi) => {
            let recourse = dot(&inst.lower.d_l, &sol.y);
            if recourse < phi - 1e-6 {
                failures.push(format!(
                    "follower optimality violated: d_l'y = {recourse} < phi = {phi}"
                ));
            }
        }
    }

    // replay every logged cut over the feasible tenders
    let full = inst.n_x <= 10;
    let tenders: Vec<Vec<u8>> = if full {
        (0u64..(1 << inst.n_x)).map(|m| vec_of_bits(m, inst.n_x)).collect()
    } else {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        (0..64)
            .map(|_| (0..inst.n_x).map(|_| rng.gen_range(0..2u8)).collect())
            .collect()
    };
    for (idx, entry) in sol.cuts.iter().enumerate() {
        let cut = Cut {
            alpha: entry.alpha.clone(),
            beta: entry.beta,
        };
        for x in &tenders {
            if let Phi::Finite(phi) = eval_phi(inst, x, &mut cache)? {
                let rhs = cut.rhs_bits(x);
                if rhs > phi + 1e-6 {
                    failures.push(format!(
                        "cut {idx} ({}) invalid at x = {x:?}: rhs {rhs} > phi {phi}",
                        entry.family
                    ));
                    break;
                }
            }
        }
    }

    if sol.learned_cut_audit_ok == Some(false) {
        failures.push("trained-rule cut audit failed: dual box undersized".into());
    }

    Ok(VerifyReport {
        passed: failures.is_empty(),
        failures,
    })
}
