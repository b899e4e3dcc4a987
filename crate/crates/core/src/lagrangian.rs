//! The three value-function cut families anchored at a tender z — penalty,
//! Lagrangian and augmented Lagrangian — together with exact (vertex
//! enumeration) and quick (relaxed MILP) selection of their coefficients.
//!
//! Every cut has the shape `d_l'y >= alpha'x + beta`, is valid wherever the
//! lower level is feasible, and is tight at its anchor.

use crate::common::{vec_of_bits, TOL};
use crate::lp::{LpProblem, RowSense, Sense};
use crate::milp::{solve_milp, MilpError, MilpProblem, MilpStatus, SolveLimits};
use crate::model::{eval_phi, BilevelInstance, ModelError, Phi, PhiCache};
use thiserror::Error;

/// Exact enumeration solves n_x * 2^(n_x - 1) vertex pairs; refuse beyond this.
pub const EXACT_ENUMERATION_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Exact,
    Quick,
    ClosedFormSub,
    ClosedFormSuper,
}

/// Penalty scalar and multiplier bound vectors for the cut families.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub rho_hat: f64,
    pub u: Vec<f64>,
    pub l: Vec<f64>,
    pub provenance: Provenance,
    /// Coordinates with no feasible tender pair; their U/L are zeroed and the
    /// Lagrangian cut must not rely on them off the feasible set.
    pub unusable: Vec<bool>,
    /// Enumeration (or the quick MILPs) skipped infeasible vertices.
    pub restricted: bool,
}

impl CoefficientSet {
    pub fn any_unusable(&self) -> bool {
        self.unusable.iter().any(|&b| b)
    }
}

/// A linear inequality `d_l'y >= alpha'x + beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub alpha: Vec<f64>,
    pub beta: f64,
}

impl Cut {
    /// Right-hand side at a fractional point.
    pub fn rhs(&self, x: &[f64]) -> f64 {
        crate::common::dot(&self.alpha, x) + self.beta
    }

    pub fn rhs_bits(&self, x: &[u8]) -> f64 {
        self.alpha
            .iter()
            .zip(x)
            .map(|(&a, &b)| a * b as f64)
            .sum::<f64>()
            + self.beta
    }

    /// Row over the master's (x, y) layout: -alpha'x + d_l'y >= beta.
    pub fn master_row(&self, d_l: &[f64]) -> crate::milp::CutRow {
        let mut coeffs = Vec::with_capacity(self.alpha.len() + d_l.len());
        coeffs.extend(self.alpha.iter().map(|a| -a));
        coeffs.extend_from_slice(d_l);
        crate::milp::CutRow {
            coeffs,
            sense: RowSense::Ge,
            rhs: self.beta,
        }
    }
}

#[derive(Debug, Error)]
pub enum CutError {
    #[error("exact coefficient enumeration needs n_x <= {cap}, got {n_x}")]
    TooLarge { n_x: usize, cap: usize },
    #[error("no lower-feasible tender exists; coefficients are undefined")]
    NoFeasibleVertex,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

fn phi_table(
    inst: &BilevelInstance,
    cache: &mut PhiCache,
) -> Result<Vec<Option<f64>>, CutError> {
    let n = inst.n_x;
    if n > EXACT_ENUMERATION_CAP {
        return Err(CutError::TooLarge {
            n_x: n,
            cap: EXACT_ENUMERATION_CAP,
        });
    }
    let mut table = Vec::with_capacity(1 << n);
    for mask in 0u64..(1 << n) {
        let x = vec_of_bits(mask, n);
        table.push(eval_phi(inst, &x, cache)?.value());
    }
    if table.iter().all(Option::is_none) {
        return Err(CutError::NoFeasibleVertex);
    }
    Ok(table)
}

/// Exact multiplier bounds: per coordinate, the min/max of phi(z) - phi(z')
/// over tender pairs differing only in that coordinate (z_i = 0, z'_i = 1).
/// Pairs with an infeasible endpoint are skipped and flagged.
pub fn exact_ul(
    inst: &BilevelInstance,
    cache: &mut PhiCache,
) -> Result<CoefficientSet, CutError> {
    let n = inst.n_x;
    let table = phi_table(inst, cache)?;
    let restricted = table.iter().any(Option::is_none);
    let mut u = vec![0.0; n];
    let mut l = vec![0.0; n];
    let mut unusable = vec![false; n];
    for i in 0..n {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for mask in 0u64..(1 << n) {
            if (mask >> i) & 1 == 1 {
                continue;
            }
            let (z, z1) = (table[mask as usize], table[(mask | (1 << i)) as usize]);
            if let (Some(a), Some(b)) = (z, z1) {
                lo = lo.min(a - b);
                hi = hi.max(a - b);
            }
        }
        if lo.is_infinite() {
            unusable[i] = true;
        } else {
            l[i] = lo;
            u[i] = hi;
        }
    }
    let rho_hat = rho_from_ul(&u, &l, &unusable);
    Ok(CoefficientSet {
        rho_hat,
        u,
        l,
        provenance: Provenance::Exact,
        unusable,
        restricted,
    })
}

fn rho_from_ul(u: &[f64], l: &[f64], unusable: &[bool]) -> f64 {
    let mut rho: f64 = 0.0;
    for i in 0..u.len() {
        if !unusable[i] {
            rho = rho.max((-l[i]).max(u[i]));
        }
    }
    rho.max(0.0)
}

/// Exact penalty scalar: the maximum of phi(z) - phi(z') over feasible
/// tender pairs at Hamming distance one.
pub fn exact_rho(inst: &BilevelInstance, cache: &mut PhiCache) -> Result<f64, CutError> {
    Ok(exact_ul(inst, cache)?.rho_hat)
}

/// Outcome of the quick penalty-scalar MILP.
#[derive(Debug, Clone, Copy)]
pub struct QuickRho {
    pub value: f64,
    /// Set when no feasible Hamming-distance-one pair exists; the value is 0.
    pub no_pair: bool,
}

fn y_domain(inst: &BilevelInstance) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let n_y = inst.n_y();
    let mut lower = vec![0.0; n_y];
    let mut upper = vec![1.0; n_y];
    for (i, (lo, hi)) in inst.y_bounds().into_iter().enumerate() {
        lower[i] = lo;
        upper[i] = hi;
    }
    let mut is_int = vec![false; n_y];
    for &i in &inst.binary_idx() {
        is_int[i] = true;
    }
    (lower, upper, is_int)
}

/// Relaxed penalty scalar via a single MILP over a coupled tender pair; an
/// auxiliary vector gamma = z /\ z' expresses the Hamming-distance-one
/// requirement with McCormick rows.
pub fn quick_rho(
    inst: &BilevelInstance,
    limits: SolveLimits,
) -> Result<QuickRho, CutError> {
    let n_x = inst.n_x;
    let n_y = inst.n_y();
    let m_l = inst.m_l();
    // layout: z | z' | gamma | y | y'
    let zi = |i: usize| i;
    let zpi = |i: usize| n_x + i;
    let gi = |i: usize| 2 * n_x + i;
    let yi = |i: usize| 3 * n_x + i;
    let ypi = |i: usize| 3 * n_x + n_y + i;
    let n = 3 * n_x + 2 * n_y;

    let (ylo, yhi, yint) = y_domain(inst);
    let mut lower = vec![0.0; n];
    let mut upper = vec![1.0; n];
    let mut is_int = vec![false; n];
    for i in 0..n_x {
        is_int[zi(i)] = true;
        is_int[zpi(i)] = true;
    }
    for i in 0..n_y {
        lower[yi(i)] = ylo[i];
        upper[yi(i)] = yhi[i];
        lower[ypi(i)] = ylo[i];
        upper[ypi(i)] = yhi[i];
        is_int[yi(i)] = yint[i];
        is_int[ypi(i)] = yint[i];
    }

    let mut objective = vec![0.0; n];
    for i in 0..n_y {
        objective[yi(i)] = inst.lower.d_l[i];
        objective[ypi(i)] = -inst.lower.d_l[i];
    }

    let mut rows = Vec::new();
    let mut senses = Vec::new();
    let mut rhs = Vec::new();
    // 1'z + 1'z' - 2 1'gamma = 1
    let mut row = vec![0.0; n];
    for i in 0..n_x {
        row[zi(i)] = 1.0;
        row[zpi(i)] = 1.0;
        row[gi(i)] = -2.0;
    }
    rows.push(row);
    senses.push(RowSense::Eq);
    rhs.push(1.0);
    // gamma_i <= z_i, gamma_i <= z'_i, z_i + z'_i - gamma_i <= 1
    for i in 0..n_x {
        let mut r1 = vec![0.0; n];
        r1[gi(i)] = 1.0;
        r1[zi(i)] = -1.0;
        rows.push(r1);
        senses.push(RowSense::Le);
        rhs.push(0.0);
        let mut r2 = vec![0.0; n];
        r2[gi(i)] = 1.0;
        r2[zpi(i)] = -1.0;
        rows.push(r2);
        senses.push(RowSense::Le);
        rhs.push(0.0);
        let mut r3 = vec![0.0; n];
        r3[zi(i)] = 1.0;
        r3[zpi(i)] = 1.0;
        r3[gi(i)] = -1.0;
        rows.push(r3);
        senses.push(RowSense::Le);
        rhs.push(1.0);
    }
    // B_l y <= h_l - A_l z and the primed copy
    for r in 0..m_l {
        let mut r1 = vec![0.0; n];
        let mut r2 = vec![0.0; n];
        for i in 0..n_x {
            r1[zi(i)] = inst.lower.a_l[r][i];
            r2[zpi(i)] = inst.lower.a_l[r][i];
        }
        for i in 0..n_y {
            r1[yi(i)] = inst.lower.b_l[r][i];
            r2[ypi(i)] = inst.lower.b_l[r][i];
        }
        rows.push(r1);
        senses.push(RowSense::Le);
        rhs.push(inst.lower.h_l[r]);
        rows.push(r2);
        senses.push(RowSense::Le);
        rhs.push(inst.lower.h_l[r]);
    }

    let p = MilpProblem::new(
        LpProblem {
            sense: Sense::Max,
            objective,
            rows,
            row_senses: senses,
            rhs,
            lower,
            upper,
        },
        is_int,
    );
    let out = solve_milp(&p, None, limits)?;
    match out.status {
        MilpStatus::Infeasible => Ok(QuickRho {
            value: 0.0,
            no_pair: true,
        }),
        MilpStatus::Optimal => Ok(QuickRho {
            value: out.objective.unwrap().max(0.0),
            no_pair: false,
        }),
        // The proven bound over-estimates the true maximum, which keeps the
        // penalty cut valid.
        MilpStatus::LimitReached => Ok(QuickRho {
            value: out.bound.max(0.0),
            no_pair: false,
        }),
        MilpStatus::Unbounded => Err(CutError::Model(ModelError::LowerUnbounded(vec![]))),
    }
}

/// Relaxed multiplier bounds via 2 n_x decoupled MILPs; the tender pair
/// shares all coordinates except i, which is fixed to (0, 1).
pub fn quick_ul(
    inst: &BilevelInstance,
    limits: SolveLimits,
) -> Result<CoefficientSet, CutError> {
    let n_x = inst.n_x;
    let n_y = inst.n_y();
    let m_l = inst.m_l();
    let mut u = vec![0.0; n_x];
    let mut l = vec![0.0; n_x];
    let mut unusable = vec![false; n_x];

    for i in 0..n_x {
        // layout: shared z (minus coordinate i) | y | y'
        let zmap = |j: usize| if j < i { j } else { j - 1 };
        let yi = |k: usize| (n_x - 1) + k;
        let ypi = |k: usize| (n_x - 1) + n_y + k;
        let n = (n_x - 1) + 2 * n_y;

        let (ylo, yhi, yint) = y_domain(inst);
        let mut lower = vec![0.0; n];
        let mut upper = vec![1.0; n];
        let mut is_int = vec![false; n];
        for j in 0..n_x - 1 {
            is_int[j] = true;
        }
        for k in 0..n_y {
            lower[yi(k)] = ylo[k];
            upper[yi(k)] = yhi[k];
            lower[ypi(k)] = ylo[k];
            upper[ypi(k)] = yhi[k];
            is_int[yi(k)] = yint[k];
            is_int[ypi(k)] = yint[k];
        }

        let mut objective = vec![0.0; n];
        for k in 0..n_y {
            objective[yi(k)] = inst.lower.d_l[k];
            objective[ypi(k)] = -inst.lower.d_l[k];
        }

        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for r in 0..m_l {
            let mut r1 = vec![0.0; n];
            let mut r2 = vec![0.0; n];
            for j in 0..n_x {
                if j == i {
                    continue;
                }
                r1[zmap(j)] = inst.lower.a_l[r][j];
                r2[zmap(j)] = inst.lower.a_l[r][j];
            }
            for k in 0..n_y {
                r1[yi(k)] = inst.lower.b_l[r][k];
                r2[ypi(k)] = inst.lower.b_l[r][k];
            }
            rows.push(r1);
            rhs.push(inst.lower.h_l[r]); // z_i = 0
            rows.push(r2);
            rhs.push(inst.lower.h_l[r] - inst.lower.a_l[r][i]); // z'_i = 1
        }
        let senses = vec![RowSense::Le; rows.len()];

        let mut p = MilpProblem::new(
            LpProblem {
                sense: Sense::Max,
                objective,
                rows,
                row_senses: senses,
                rhs,
                lower,
                upper,
            },
            is_int,
        );

        let up = solve_milp(&p, None, limits)?;
        match up.status {
            MilpStatus::Infeasible => {
                unusable[i] = true;
                continue;
            }
            MilpStatus::Optimal => u[i] = up.objective.unwrap(),
            MilpStatus::LimitReached => u[i] = up.bound,
            MilpStatus::Unbounded => {
                return Err(CutError::Model(ModelError::LowerUnbounded(vec![])))
            }
        }

        p.lp.sense = Sense::Min;
        let lo = solve_milp(&p, None, limits)?;
        match lo.status {
            MilpStatus::Infeasible => unusable[i] = true,
            MilpStatus::Optimal => l[i] = lo.objective.unwrap(),
            MilpStatus::LimitReached => l[i] = lo.bound,
            MilpStatus::Unbounded => {
                return Err(CutError::Model(ModelError::LowerUnbounded(vec![])))
            }
        }
    }

    let rho_hat = rho_from_ul(&u, &l, &unusable);
    Ok(CoefficientSet {
        rho_hat,
        u,
        l,
        provenance: Provenance::Quick,
        unusable,
        restricted: false,
    })
}

/// `d_l'y >= phi(z) - rho (1'x + 1'z - 2 x'z)`, folded into alpha/beta form.
pub fn penalty_cut(z: &[u8], rho_hat: f64, phi_z: f64) -> Cut {
    let ones: f64 = z.iter().map(|&b| b as f64).sum();
    let alpha = z.iter().map(|&b| rho_hat * (2.0 * b as f64 - 1.0)).collect();
    Cut {
        alpha,
        beta: phi_z - rho_hat * ones,
    }
}

/// `d_l'y >= phi(z) - lambda(z)'(x - z)` with lambda(z) = U(1-z) + Lz.
pub fn lagrangian_cut(z: &[u8], u: &[f64], l: &[f64], phi_z: f64) -> Cut {
    let lambda: Vec<f64> = z
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let zi = b as f64;
            u[i] * (1.0 - zi) + l[i] * zi
        })
        .collect();
    let anchor: f64 = lambda
        .iter()
        .zip(z)
        .map(|(&lam, &b)| lam * b as f64)
        .sum();
    Cut {
        alpha: lambda.iter().map(|&lam| -lam).collect(),
        beta: phi_z + anchor,
    }
}

/// Shift multiplier bounds for the augmented family: U - rho, L + rho.
pub fn shift_for_augmented(u: &[f64], l: &[f64], rho_hat: f64) -> (Vec<f64>, Vec<f64>) {
    (
        u.iter().map(|&v| v - rho_hat).collect(),
        l.iter().map(|&v| v + rho_hat).collect(),
    )
}

/// `d_l'y >= phi(z) - lambda(z)'(x - z) - rho (1'x + 1'z - 2 x'z)` with the
/// shifted multipliers; pointwise equal to the Lagrangian cut built from the
/// unshifted ones.
pub fn augmented_cut(
    z: &[u8],
    u_shifted: &[f64],
    l_shifted: &[f64],
    rho_hat: f64,
    phi_z: f64,
) -> Cut {
    let lr = lagrangian_cut(z, u_shifted, l_shifted, phi_z);
    let pen = penalty_cut(z, rho_hat, 0.0);
    Cut {
        alpha: lr
            .alpha
            .iter()
            .zip(&pen.alpha)
            .map(|(&a, &b)| a + b)
            .collect(),
        beta: lr.beta + pen.beta,
    }
}

/// Validity check used by tests and by solution verification: the cut's RHS
/// stays below phi over every feasible tender.
pub fn cut_valid_on_feasible_set(
    inst: &BilevelInstance,
    cut: &Cut,
    cache: &mut PhiCache,
) -> Result<bool, CutError> {
    let n = inst.n_x;
    for mask in 0u64..(1 << n) {
        let x = vec_of_bits(mask, n);
        if let Phi::Finite(v) = eval_phi(inst, &x, cache)? {
            if cut.rhs_bits(&x) > v + TOL.cut_violation {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
