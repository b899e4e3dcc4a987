//! Decision-rule valid inequalities.
//!
//! Two routes approximate the follower's policy to bound the recourse value
//! from below: affine rules y2 = Ux + v whose admissible cut coefficients
//! form a polyhedron separated by LP/MILP, and trained neural rules for the
//! binary block that enter the master through an exact piecewise-linear
//! big-M encoding plus an LP-duality bound with McCormick products.
//!
//! All dual-based constructions run on the extended lower row system (boxes
//! appended as rows) so boundedness is carried by rows.

use crate::common::{dot, TOL};
use crate::lagrangian::Cut;
use crate::lp::{solve_lp, LpProblem, LpStatus, RowSense, Sense};
use crate::milp::{solve_milp, MilpBuilder, MilpStatus, SolveLimits};
use crate::model::{
    extended_lower_rows, lower_argmax_y1, BilevelInstance, ModelError, PhiCache,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// The piecewise-linear sigmoid surrogate clips t/5 + 1/2 to [0, 1], so the
/// kinks sit at +-2.5.
const PWL_KINK: f64 = 2.5;
/// Exclusion width separating the step's zero branch from t = 0.
const STEP_EPS: f64 = 1e-9;
const BIG_M_CAP: f64 = 1e7;

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("rule shape mismatch: {0}")]
    Shape(String),
    #[error("big-M constant {0:.3e} exceeds {BIG_M_CAP:.0e}; rescale the rule weights first")]
    BigM(f64),
    #[error("dual system B2'pi = d2, pi >= 0 is infeasible; the continuous block is unbounded")]
    DualInfeasible,
    #[error("training diverged (loss became non-finite) at epoch {0}")]
    Diverged(usize),
    #[error("only {got} of {want} samples found in {attempts} attempts; feasibility rate too low")]
    FeasibilityTooLow {
        got: usize,
        want: usize,
        attempts: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] crate::lp::LpError),
    #[error(transparent)]
    Milp(#[from] crate::milp::MilpError),
}

// ---------------------------------------------------------------------------
// Linear decision rules

/// Sparsity mask for the affine rule matrix; `true` pins the entry to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LdrMask {
    pub forbidden: Vec<Vec<bool>>,
}

impl LdrMask {
    pub fn allow_all(n_y2: usize, n_x: usize) -> Self {
        LdrMask {
            forbidden: vec![vec![false; n_x]; n_y2],
        }
    }

    /// Default policy: tender columns that never touch the lower level
    /// cannot influence the recourse, so their rule entries are pinned.
    pub fn from_instance(inst: &BilevelInstance) -> Self {
        let n_x = inst.n_x;
        let dead_col: Vec<bool> = (0..n_x)
            .map(|i| inst.lower.a_l.iter().all(|row| row[i] == 0.0))
            .collect();
        LdrMask {
            forbidden: vec![dead_col; inst.cont_idx().len()],
        }
    }
}

#[derive(Debug, Clone)]
pub enum Y1Mode {
    Fixed(Vec<u8>),
    Free,
}

/// Witness for an affine under-estimator cut: the rule matrix, anchors and
/// mask that certify (alpha, beta) admissible.
#[derive(Debug, Clone)]
pub struct LdrCertificate {
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub u: Vec<Vec<f64>>,
    pub y2_anchor: Vec<f64>,
    pub y1_anchor: Vec<u8>,
    pub mask: LdrMask,
}

#[derive(Debug)]
pub enum LdrOutcome {
    /// Violated certificate found; the cut reads d_l'y >= alpha'x + beta.
    Cut(Cut, LdrCertificate),
    /// The best admissible estimator does not separate the incumbent.
    NoViolation { gamma: f64 },
    /// No admissible estimator exists under this mask.
    OmegaEmpty,
}

/// Maximize x_hat'alpha + beta over the admissible coefficient set and emit
/// a cut when the optimum exceeds the incumbent's recourse value.
pub fn ldr_separate(
    inst: &BilevelInstance,
    x_hat: &[u8],
    y_hat: &[f64],
    mask: &LdrMask,
    y1_mode: Y1Mode,
) -> Result<LdrOutcome, RuleError> {
    let n_x = inst.n_x;
    let ext = extended_lower_rows(inst);
    let n_rows = ext.num_rows();
    let n_b = inst.binary_idx().len();
    let n_c = inst.cont_idx().len();
    let d1 = inst.d_l1();
    let d2 = inst.d_l2();
    if mask.forbidden.len() != n_c || mask.forbidden.iter().any(|r| r.len() != n_x) {
        return Err(RuleError::Shape(format!(
            "mask must be {n_c} x {n_x} over the continuous block"
        )));
    }

    let mut b = MilpBuilder::new(Sense::Max);
    let inf = f64::INFINITY;
    let alpha: Vec<usize> = (0..n_x)
        .map(|i| b.add_var(-inf, inf, false, x_hat[i] as f64))
        .collect();
    let beta = b.add_var(-inf, inf, false, 1.0);
    // rule matrix entries, skipping masked positions
    let mut u_vars = vec![vec![None; n_x]; n_c];
    for j in 0..n_c {
        for i in 0..n_x {
            if !mask.forbidden[j][i] {
                u_vars[j][i] = Some(b.add_var(-inf, inf, false, 0.0));
            }
        }
    }
    let v: Vec<usize> = (0..n_c).map(|_| b.add_var(-inf, inf, false, 0.0)).collect();
    let w: Vec<usize> = (0..n_x).map(|_| b.add_var(-inf, 0.0, false, 0.0)).collect();
    let y1: Vec<usize> = match &y1_mode {
        Y1Mode::Fixed(_) => Vec::new(),
        Y1Mode::Free => (0..n_b).map(|_| b.add_var(0.0, 1.0, true, 0.0)).collect(),
    };
    let y1_fixed: Option<&Vec<u8>> = match &y1_mode {
        Y1Mode::Fixed(bits) => {
            if bits.len() != n_b {
                return Err(RuleError::Shape(format!(
                    "fixed y1 has length {}, expected {n_b}",
                    bits.len()
                )));
            }
            Some(bits)
        }
        Y1Mode::Free => None,
    };

    // beta <= d1'y1 + d2'v + sum_i w_i
    {
        let mut terms = vec![(beta, 1.0)];
        for j in 0..n_c {
            terms.push((v[j], -d2[j]));
        }
        for &wi in &w {
            terms.push((wi, -1.0));
        }
        let mut rhs = 0.0;
        match y1_fixed {
            Some(bits) => rhs += dot_bits(&d1, bits),
            None => {
                for q in 0..n_b {
                    terms.push((y1[q], -d1[q]));
                }
            }
        }
        b.add_row(terms, RowSense::Le, rhs);
    }
    // w_i <= (U'd2)_i - alpha_i
    for i in 0..n_x {
        let mut terms = vec![(w[i], 1.0), (alpha[i], 1.0)];
        for j in 0..n_c {
            if let Some(uj) = u_vars[j][i] {
                if d2[j] != 0.0 {
                    terms.push((uj, -d2[j]));
                }
            }
        }
        b.add_row(terms, RowSense::Le, 0.0);
    }
    // recourse rows with epigraph positive parts of (A + B2 U) entries
    for r in 0..n_rows {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        let mut rhs = ext.h[r];
        for j in 0..n_c {
            if ext.b2[r][j] != 0.0 {
                terms.push((v[j], ext.b2[r][j]));
            }
        }
        match y1_fixed {
            Some(bits) => rhs -= dot_bits(&ext.b1[r], bits),
            None => {
                for q in 0..n_b {
                    if ext.b1[r][q] != 0.0 {
                        terms.push((y1[q], ext.b1[r][q]));
                    }
                }
            }
        }
        for i in 0..n_x {
            // entry a_ri + sum_j b2_rj U_ji; constant when no U entry is live
            let mut live = Vec::new();
            for j in 0..n_c {
                if ext.b2[r][j] != 0.0 {
                    if let Some(uj) = u_vars[j][i] {
                        live.push((uj, ext.b2[r][j]));
                    }
                }
            }
            if live.is_empty() {
                rhs -= ext.a[r][i].max(0.0);
            } else {
                let t = b.add_var(0.0, inf, false, 0.0);
                // t >= a_ri + sum b2_rj U_ji
                let mut trow = vec![(t, -1.0)];
                trow.extend(live);
                b.add_row(trow, RowSense::Le, -ext.a[r][i]);
                terms.push((t, 1.0));
            }
        }
        b.add_row(terms, RowSense::Le, rhs);
    }

    let p = b.build();
    let out = solve_milp(&p, None, SolveLimits::default())?;
    match out.status {
        MilpStatus::Infeasible => return Ok(LdrOutcome::OmegaEmpty),
        MilpStatus::Unbounded => {
            return Err(RuleError::Shape(
                "separation problem unbounded; admissible set lacks a finite optimum".into(),
            ))
        }
        MilpStatus::Optimal => {}
        MilpStatus::LimitReached => unreachable!("no limits were set"),
    }
    let gamma = out.objective.unwrap();
    let sol = out.primal.unwrap();
    let incumbent_value = dot(&inst.lower.d_l, y_hat);
    if gamma <= incumbent_value + TOL.cut_violation {
        return Ok(LdrOutcome::NoViolation { gamma });
    }

    let alpha_star: Vec<f64> = alpha.iter().map(|&id| sol[id]).collect();
    let beta_star = sol[beta];
    let mut u_star = vec![vec![0.0; n_x]; n_c];
    for j in 0..n_c {
        for i in 0..n_x {
            if let Some(id) = u_vars[j][i] {
                u_star[j][i] = sol[id];
            }
        }
    }
    let y1_anchor = match y1_fixed {
        Some(bits) => bits.clone(),
        None => y1.iter().map(|&id| sol[id].round() as u8).collect(),
    };
    let cert = LdrCertificate {
        alpha: alpha_star.clone(),
        beta: beta_star,
        u: u_star,
        y2_anchor: v.iter().map(|&id| sol[id]).collect(),
        y1_anchor,
        mask: mask.clone(),
    };
    Ok(LdrOutcome::Cut(
        Cut {
            alpha: alpha_star,
            beta: beta_star,
        },
        cert,
    ))
}

/// Replay a certificate against its defining rows; used by verification.
pub fn check_certificate(
    inst: &BilevelInstance,
    cert: &LdrCertificate,
) -> Result<(), String> {
    let ext = extended_lower_rows(inst);
    let d1 = inst.d_l1();
    let d2 = inst.d_l2();
    let n_x = inst.n_x;
    let n_c = inst.cont_idx().len();
    for j in 0..n_c {
        for i in 0..n_x {
            if cert.mask.forbidden[j][i] && cert.u[j][i] != 0.0 {
                return Err(format!("masked rule entry ({j},{i}) is nonzero"));
            }
        }
    }
    // beta row
    let mut rhs = dot_bits(&d1, &cert.y1_anchor) + dot(&d2, &cert.y2_anchor);
    for i in 0..n_x {
        let mut col: f64 = -cert.alpha[i];
        for j in 0..n_c {
            col += d2[j] * cert.u[j][i];
        }
        rhs += col.min(0.0);
    }
    if cert.beta > rhs + 1e-7 {
        return Err(format!("beta {0} exceeds admissible bound {rhs}", cert.beta));
    }
    // recourse rows
    for r in 0..ext.num_rows() {
        let mut lhs = dot_bits(&ext.b1[r], &cert.y1_anchor) + dot(&ext.b2[r], &cert.y2_anchor);
        for i in 0..n_x {
            let mut entry = ext.a[r][i];
            for j in 0..n_c {
                entry += ext.b2[r][j] * cert.u[j][i];
            }
            lhs += entry.max(0.0);
        }
        if lhs > ext.h[r] + 1e-7 {
            return Err(format!("recourse row {r} violated: {lhs} > {}", ext.h[r]));
        }
    }
    Ok(())
}

fn dot_bits(coeffs: &[f64], bits: &[u8]) -> f64 {
    coeffs.iter().zip(bits).map(|(&c, &b)| c * b as f64).sum()
}

// ---------------------------------------------------------------------------
// Neural rules

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RuleLayer {
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(rename = "D")]
    pub d: Option<Vec<Vec<f64>>>,
}

/// Layered affine weights with passthrough; sigmoid activations while
/// training, a clipped-linear/step surrogate when encoded.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NeuralRule {
    #[serde(rename = "K")]
    pub hidden_layers: usize,
    pub layers: Vec<RuleLayer>,
}

impl NeuralRule {
    pub fn input_width(&self) -> usize {
        self.layers[0].w[0].len()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().b.len()
    }

    pub fn validate(&self, n_x: usize, n_out: usize) -> Result<(), RuleError> {
        if self.layers.len() != self.hidden_layers + 1 {
            return Err(RuleError::Shape(format!(
                "K = {} but {} layers present",
                self.hidden_layers,
                self.layers.len()
            )));
        }
        let mut prev = n_x;
        for (k, layer) in self.layers.iter().enumerate() {
            let width = layer.b.len();
            if layer.w.len() != width {
                return Err(RuleError::Shape(format!("layer {k}: W rows != b length")));
            }
            for row in &layer.w {
                if row.len() != prev {
                    return Err(RuleError::Shape(format!(
                        "layer {k}: W columns {} != input width {prev}",
                        row.len()
                    )));
                }
            }
            match (&layer.d, k) {
                (None, 0) => {}
                (Some(_), 0) => {
                    return Err(RuleError::Shape("layer 0 takes no passthrough".into()))
                }
                (None, k) => {
                    return Err(RuleError::Shape(format!(
                        "layer {k} is missing its passthrough weights"
                    )))
                }
                (Some(d), _) => {
                    if d.len() != width || d.iter().any(|r| r.len() != n_x) {
                        return Err(RuleError::Shape(format!(
                            "layer {k}: passthrough must be {width} x {n_x}"
                        )));
                    }
                }
            }
            if !layer.b.iter().all(|v| v.is_finite())
                || !layer.w.iter().flatten().all(|v| v.is_finite())
                || !layer
                    .d
                    .iter()
                    .flatten()
                    .flatten()
                    .all(|v| v.is_finite())
            {
                return Err(RuleError::Shape(format!("layer {k}: non-finite weight")));
            }
            prev = width;
        }
        if prev != n_out {
            return Err(RuleError::Shape(format!(
                "output width {prev} != binary block size {n_out}"
            )));
        }
        Ok(())
    }
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn pwl(t: f64) -> f64 {
    (t / 5.0 + 0.5).clamp(0.0, 1.0)
}

fn layer_preactivation(layer: &RuleLayer, prev: &[f64], x: &[f64]) -> Vec<f64> {
    let mut out = layer.b.clone();
    for (j, row) in layer.w.iter().enumerate() {
        out[j] += dot(row, prev);
    }
    if let Some(d) = &layer.d {
        for (j, row) in d.iter().enumerate() {
            out[j] += dot(row, x);
        }
    }
    out
}

/// Reference semantics of the encoded rule: clipped-linear hidden layers and
/// a unit step at the output, with step(0) = 1.
pub fn evaluate_rule_pwl(rule: &NeuralRule, x: &[u8]) -> Vec<u8> {
    let xf: Vec<f64> = x.iter().map(|&b| b as f64).collect();
    let mut prev = xf.clone();
    for layer in &rule.layers[..rule.hidden_layers] {
        prev = layer_preactivation(layer, &prev, &xf)
            .into_iter()
            .map(pwl)
            .collect();
    }
    let out = layer_preactivation(rule.layers.last().unwrap(), &prev, &xf);
    out.into_iter().map(|t| (t >= 0.0) as u8).collect()
}

/// Sigmoid forward pass used in training; returns the real-valued outputs.
pub fn evaluate_rule_sigmoid(rule: &NeuralRule, x: &[f64]) -> Vec<f64> {
    let mut prev = x.to_vec();
    for layer in &rule.layers[..rule.hidden_layers] {
        prev = layer_preactivation(layer, &prev, x)
            .into_iter()
            .map(sigmoid)
            .collect();
    }
    layer_preactivation(rule.layers.last().unwrap(), &prev, x)
        .into_iter()
        .map(sigmoid)
        .collect()
}

// ---------------------------------------------------------------------------
// Big-M encoding

/// Append the rule's piecewise-linear network to a master builder over the
/// given tender columns; returns the binary output columns. Every big-M is
/// derived per neuron from interval propagation (plus 10% slack), and
/// constant-sign neurons are fixed instead of encoded.
pub fn encode_rule(
    rule: &NeuralRule,
    b: &mut MilpBuilder,
    x_vars: &[usize],
) -> Result<Vec<usize>, RuleError> {
    let n_x = x_vars.len();
    rule.validate(n_x, rule.output_width())?;


    // (var id, output interval) per neuron of the previous layer
    let mut prev: Vec<(usize, f64, f64)> =
        x_vars.iter().map(|&id| (id, 0.0, 1.0)).collect();

    for (k, layer) in rule.layers.iter().enumerate() {
        let is_output = k == rule.hidden_layers;
        let width = layer.b.len();
        let mut next = Vec::with_capacity(width);
        for j in 0..width {
            // interval of the pre-activation over box inputs
            let mut lo = layer.b[j];
            let mut hi = layer.b[j];
            let mut terms: Vec<(usize, f64)> = Vec::new();
            for (c, &wv) in layer.w[j].iter().enumerate() {
                if wv == 0.0 {
                    continue;
                }
                let (id, in_lo, in_hi) = prev[c];
                if wv > 0.0 {
                    lo += wv * in_lo;
                    hi += wv * in_hi;
                } else {
                    lo += wv * in_hi;
                    hi += wv * in_lo;
                }
                terms.push((id, wv));
            }
            if let Some(d) = &layer.d {
                for (i, &dv) in d[j].iter().enumerate() {
                    if dv == 0.0 {
                        continue;
                    }
                    if dv > 0.0 {
                        hi += dv;
                    } else {
                        lo += dv;
                    }
                    terms.push((x_vars[i], dv));
                }
            }

            if is_output {
                let id = if lo >= 0.0 {
                    b.add_fixed(1.0)
                } else if hi < 0.0 {
                    b.add_fixed(0.0)
                } else {
                    let m = 1.1 * hi.max(-lo).max(0.1);
                    if m > BIG_M_CAP {
                        return Err(RuleError::BigM(m));
                    }
                    let s = b.add_var(0.0, 1.0, true, 0.0);
                    // t >= -M (1 - s):  -t + M s <= M  (constant b folded)
                    let mut r1: Vec<(usize, f64)> =
                        terms.iter().map(|&(id, c)| (id, -c)).collect();
                    r1.push((s, m));
                    b.add_row(r1, RowSense::Le, m + layer.b[j]);
                    // t <= M s - eps (1 - s): t - (M + eps) s <= -eps
                    let mut r2 = terms.clone();
                    r2.push((s, -(m + STEP_EPS)));
                    b.add_row(r2, RowSense::Le, -STEP_EPS - layer.b[j]);
                    s
                };
                next.push((id, 0.0, 1.0));
                continue;
            }

            // hidden neuron: s = clip(t/5 + 1/2, [0, 1])
            let out_lo = pwl(lo);
            let out_hi = pwl(hi);
            if lo >= PWL_KINK {
                next.push((b.add_fixed(1.0), 1.0, 1.0));
                continue;
            }
            if hi <= -PWL_KINK {
                next.push((b.add_fixed(0.0), 0.0, 0.0));
                continue;
            }
            let s = b.add_var(out_lo, out_hi, false, 0.0);
            let needs_low_clip = lo < -PWL_KINK;
            let needs_high_clip = hi > PWL_KINK;
            if !needs_low_clip && !needs_high_clip {
                // affine region only: s = t/5 + 1/2
                let mut row: Vec<(usize, f64)> = vec![(s, 1.0)];
                row.extend(terms.iter().map(|&(id, c)| (id, -c / 5.0)));
                b.add_row(row, RowSense::Le, layer.b[j] / 5.0 + 0.5);
                let mut row: Vec<(usize, f64)> = vec![(s, -1.0)];
                row.extend(terms.iter().map(|&(id, c)| (id, c / 5.0)));
                b.add_row(row, RowSense::Le, -(layer.b[j] / 5.0 + 0.5));
                next.push((s, out_lo, out_hi));
                continue;
            }
            let delta0 = if needs_low_clip {
                let m0 = 1.1 * (-lo / 5.0 - 0.5).max(0.1);
                if m0 > BIG_M_CAP {
                    return Err(RuleError::BigM(m0));
                }
                let d0 = b.add_var(0.0, 1.0, true, 0.0);
                // s <= t/5 + 1/2 + M0 d0
                let mut row: Vec<(usize, f64)> = vec![(s, 1.0), (d0, -m0)];
                row.extend(terms.iter().map(|&(id, c)| (id, -c / 5.0)));
                b.add_row(row, RowSense::Le, layer.b[j] / 5.0 + 0.5);
                // s <= 1 - d0
                b.add_row(vec![(s, 1.0), (d0, 1.0)], RowSense::Le, 1.0);
                Some(d0)
            } else {
                // upper side exact: s <= t/5 + 1/2
                let mut row: Vec<(usize, f64)> = vec![(s, 1.0)];
                row.extend(terms.iter().map(|&(id, c)| (id, -c / 5.0)));
                b.add_row(row, RowSense::Le, layer.b[j] / 5.0 + 0.5);
                None
            };
            if needs_high_clip {
                let m1 = 1.1 * (hi / 5.0 - 0.5).max(0.1);
                if m1 > BIG_M_CAP {
                    return Err(RuleError::BigM(m1));
                }
                let d1 = b.add_var(0.0, 1.0, true, 0.0);
                // s >= t/5 + 1/2 - M1 d1
                let mut row: Vec<(usize, f64)> = vec![(s, -1.0), (d1, -m1)];
                row.extend(terms.iter().map(|&(id, c)| (id, c / 5.0)));
                b.add_row(row, RowSense::Le, -(layer.b[j] / 5.0 + 0.5));
                // s >= d1
                b.add_row(vec![(s, -1.0), (d1, 1.0)], RowSense::Le, 0.0);
            } else {
                // lower side exact: s >= t/5 + 1/2
                let mut row: Vec<(usize, f64)> = vec![(s, -1.0)];
                row.extend(terms.iter().map(|&(id, c)| (id, c / 5.0)));
                b.add_row(row, RowSense::Le, -(layer.b[j] / 5.0 + 0.5));
            }
            let _ = delta0;
            next.push((s, out_lo, out_hi));
        }
        prev = next;
    }
    Ok(prev.into_iter().map(|(id, _, _)| id).collect())
}

// ---------------------------------------------------------------------------
// Learned cut

#[derive(Debug, Clone)]
pub struct LearnedCutInfo {
    pub m_pi: f64,
    pub y_tilde: Vec<usize>,
    pub pi_first: usize,
    pub pi_count: usize,
}

pub fn default_m_pi(inst: &BilevelInstance) -> f64 {
    let d2_l1: f64 = inst.d_l2().iter().map(|v| v.abs()).sum();
    let h_inf = inst
        .lower
        .h_l
        .iter()
        .map(|v| v.abs())
        .fold(0.0f64, f64::max);
    10.0 * 1.0f64.max(d2_l1).max(h_inf)
}

fn dual_system_feasible(inst: &BilevelInstance) -> Result<bool, RuleError> {
    let ext = extended_lower_rows(inst);
    let d2 = inst.d_l2();
    let n_rows = ext.num_rows();
    let rows: Vec<Vec<f64>> = (0..d2.len())
        .map(|j| (0..n_rows).map(|r| ext.b2[r][j]).collect())
        .collect();
    let p = LpProblem {
        sense: Sense::Min,
        objective: vec![0.0; n_rows],
        rows,
        row_senses: vec![RowSense::Eq; d2.len()],
        rhs: d2,
        lower: vec![0.0; n_rows],
        upper: vec![f64::INFINITY; n_rows],
    };
    Ok(solve_lp(&p)?.status == LpStatus::Optimal)
}

/// Impose `d_l'y >= d1'y~(x) + (h - A x - B1 y~(x))' pi` on a master whose
/// tender and follower columns are given; the rule is encoded exactly, pi
/// lives in [0, M_pi] under B2'pi = d2, and the binary-continuous products
/// are McCormick-linearized (exact for binary factors).
pub fn learned_cut(
    inst: &BilevelInstance,
    rule: &NeuralRule,
    b: &mut MilpBuilder,
    x_vars: &[usize],
    y_vars: &[usize],
    m_pi: Option<f64>,
) -> Result<LearnedCutInfo, RuleError> {
    let n_b = inst.binary_idx().len();
    rule.validate(inst.n_x, n_b)?;
    if !dual_system_feasible(inst)? {
        return Err(RuleError::DualInfeasible);
    }
    let m_pi = m_pi.unwrap_or_else(|| default_m_pi(inst));
    let ext = extended_lower_rows(inst);
    let n_rows = ext.num_rows();
    let d2 = inst.d_l2();
    let d1 = inst.d_l1();

    let y_tilde = encode_rule(rule, b, x_vars)?;
    let pi_first = b.num_vars();
    let pi: Vec<usize> = (0..n_rows).map(|_| b.add_var(0.0, m_pi, false, 0.0)).collect();
    // B2' pi = d2
    for (j, &dj) in d2.iter().enumerate() {
        let terms: Vec<(usize, f64)> = (0..n_rows)
            .filter(|&r| ext.b2[r][j] != 0.0)
            .map(|r| (pi[r], ext.b2[r][j]))
            .collect();
        b.add_row(terms, RowSense::Eq, dj);
    }

    // McCormick product p = pi_r * z for binary z
    let product = |b: &mut MilpBuilder, pi_var: usize, z_var: usize| -> usize {
        let p = b.add_var(0.0, m_pi, false, 0.0);
        b.add_row(vec![(p, 1.0), (z_var, -m_pi)], RowSense::Le, 0.0);
        b.add_row(vec![(p, 1.0), (pi_var, -1.0)], RowSense::Le, 0.0);
        b.add_row(
            vec![(p, -1.0), (pi_var, 1.0), (z_var, m_pi)],
            RowSense::Le,
            m_pi,
        );
        p
    };

    // d_l'y - d1'y~ - h'pi + sum A_ri p_ri + sum B1_rq q_rq >= 0
    let mut cut: Vec<(usize, f64)> = Vec::new();
    for (k, &yv) in y_vars.iter().enumerate() {
        cut.push((yv, inst.lower.d_l[k]));
    }
    for q in 0..n_b {
        if d1[q] != 0.0 {
            cut.push((y_tilde[q], -d1[q]));
        }
    }
    for r in 0..n_rows {
        if ext.h[r] != 0.0 {
            cut.push((pi[r], -ext.h[r]));
        }
        for i in 0..inst.n_x {
            if ext.a[r][i] != 0.0 {
                let p = product(b, pi[r], x_vars[i]);
                cut.push((p, ext.a[r][i]));
            }
        }
        for q in 0..n_b {
            if ext.b1[r][q] != 0.0 {
                let p = product(b, pi[r], y_tilde[q]);
                cut.push((p, ext.b1[r][q]));
            }
        }
    }
    b.add_row(cut, RowSense::Ge, 0.0);

    Ok(LearnedCutInfo {
        m_pi,
        y_tilde,
        pi_first,
        pi_count: n_rows,
    })
}

/// Evaluate the learned cut's right-hand side at a fixed tender: forward
/// pass, then the restricted dual minimization. Used for validity audits.
pub fn learned_cut_rhs(
    inst: &BilevelInstance,
    rule: &NeuralRule,
    x: &[u8],
    m_pi: Option<f64>,
) -> Result<f64, RuleError> {
    let m_pi = m_pi.unwrap_or_else(|| default_m_pi(inst));
    let y_tilde = evaluate_rule_pwl(rule, x);
    let ext = extended_lower_rows(inst);
    let n_rows = ext.num_rows();
    let d2 = inst.d_l2();
    let d1 = inst.d_l1();
    let objective: Vec<f64> = (0..n_rows)
        .map(|r| {
            ext.h[r] - dot_bits(&ext.a[r], x) - dot_bits(&ext.b1[r], &y_tilde)
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..d2.len())
        .map(|j| (0..n_rows).map(|r| ext.b2[r][j]).collect())
        .collect();
    let p = LpProblem {
        sense: Sense::Min,
        objective,
        rows,
        row_senses: vec![RowSense::Eq; d2.len()],
        rhs: d2,
        lower: vec![0.0; n_rows],
        upper: vec![m_pi; n_rows],
    };
    let out = solve_lp(&p)?;
    match out.status {
        LpStatus::Optimal => Ok(dot_bits(&d1, &y_tilde) + out.objective),
        LpStatus::Infeasible => Err(RuleError::DualInfeasible),
        LpStatus::Unbounded => unreachable!("pi is box-bounded"),
    }
}

// ---------------------------------------------------------------------------
// Sampling and training

/// Draw tenders uniformly, label them with the lower level's optimal binary
/// block; infeasible draws are discarded (at most 10x oversampling).
pub fn sample_training_data(
    inst: &BilevelInstance,
    count: usize,
    seed: u64,
    cache: &mut PhiCache,
) -> Result<Vec<(Vec<u8>, Vec<u8>)>, RuleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let cap = 10 * count.max(1);
    while out.len() < count && attempts < cap {
        attempts += 1;
        let x: Vec<u8> = (0..inst.n_x).map(|_| rng.gen_range(0..2u8)).collect();
        if let Some(y1) = lower_argmax_y1(inst, &x, cache)? {
            out.push((x, y1));
        }
    }
    if out.len() < count {
        return Err(RuleError::FeasibilityTooLow {
            got: out.len(),
            want: count,
            attempts,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Per-epoch decay: lr_t = lr / (1 + decay * t).
    pub decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            learning_rate: 0.01,
            decay: 0.001,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedRule {
    pub rule: NeuralRule,
    pub final_loss: f64,
    pub loss_curve: Vec<f64>,
}

pub fn default_widths(n_x: usize) -> Vec<usize> {
    vec![8usize.max(2 * n_x); 2]
}

fn init_rule(n_x: usize, widths: &[usize], n_out: usize, seed: u64) -> NeuralRule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut glorot = |rows: usize, cols: usize| -> Vec<Vec<f64>> {
        let scale = (6.0 / (rows + cols) as f64).sqrt();
        (0..rows)
            .map(|_| (0..cols).map(|_| rng.gen_range(-scale..scale)).collect())
            .collect()
    };
    let mut layers = Vec::new();
    let mut prev = n_x;
    for (k, &width) in widths.iter().enumerate() {
        layers.push(RuleLayer {
            w: glorot(width, prev),
            b: vec![0.0; width],
            d: if k == 0 { None } else { Some(glorot(width, n_x)) },
        });
        prev = width;
    }
    layers.push(RuleLayer {
        w: glorot(n_out, prev),
        b: vec![0.0; n_out],
        d: Some(glorot(n_out, n_x)),
    });
    NeuralRule {
        hidden_layers: widths.len(),
        layers,
    }
}

/// Full-batch forward/backward pass: binary cross-entropy loss and the
/// gradient in a rule-shaped buffer.
fn loss_and_gradient(
    rule: &NeuralRule,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
) -> (f64, NeuralRule) {
    let mut grad = rule.clone();
    for layer in grad.layers.iter_mut() {
        layer.w.iter_mut().flatten().for_each(|v| *v = 0.0);
        layer.b.iter_mut().for_each(|v| *v = 0.0);
        if let Some(d) = &mut layer.d {
            d.iter_mut().flatten().for_each(|v| *v = 0.0);
        }
    }
    let n_out = rule.output_width();
    let norm = 1.0 / (xs.len() * n_out) as f64;
    let mut loss = 0.0;

    for (x, y) in xs.iter().zip(ys) {
        // forward, retaining activations
        let mut acts: Vec<Vec<f64>> = vec![x.clone()];
        for (k, layer) in rule.layers.iter().enumerate() {
            let pre = layer_preactivation(layer, &acts[k], x);
            acts.push(pre.into_iter().map(sigmoid).collect());
        }
        let out = acts.last().unwrap();
        for (o, t) in out.iter().zip(y) {
            let p = o.clamp(1e-12, 1.0 - 1e-12);
            loss -= norm * (t * p.ln() + (1.0 - t) * (1.0 - p).ln());
        }

        // backward: delta on the sigmoid pre-activation of the output layer
        let mut delta: Vec<f64> = out
            .iter()
            .zip(y)
            .map(|(o, t)| norm * (o - t))
            .collect();
        for k in (0..rule.layers.len()).rev() {
            let input = &acts[k];
            {
                let gl = &mut grad.layers[k];
                for (j, &dj) in delta.iter().enumerate() {
                    gl.b[j] += dj;
                    for (c, gv) in gl.w[j].iter_mut().enumerate() {
                        *gv += dj * input[c];
                    }
                    if let Some(gd) = &mut gl.d {
                        for (i, gv) in gd[j].iter_mut().enumerate() {
                            *gv += dj * x[i];
                        }
                    }
                }
            }
            if k > 0 {
                let layer = &rule.layers[k];
                let mut next = vec![0.0; input.len()];
                for (j, &dj) in delta.iter().enumerate() {
                    for (c, nv) in next.iter_mut().enumerate() {
                        *nv += layer.w[j][c] * dj;
                    }
                }
                for (c, nv) in next.iter_mut().enumerate() {
                    *nv *= input[c] * (1.0 - input[c]);
                }
                delta = next;
            }
        }
    }
    (loss, grad)
}

fn flatten(rule: &NeuralRule) -> Vec<f64> {
    let mut out = Vec::new();
    for layer in &rule.layers {
        out.extend(layer.w.iter().flatten());
        out.extend(&layer.b);
        if let Some(d) = &layer.d {
            out.extend(d.iter().flatten());
        }
    }
    out
}

fn unflatten(template: &NeuralRule, flat: &[f64]) -> NeuralRule {
    let mut rule = template.clone();
    let mut it = flat.iter();
    for layer in rule.layers.iter_mut() {
        for v in layer.w.iter_mut().flatten() {
            *v = *it.next().unwrap();
        }
        for v in layer.b.iter_mut() {
            *v = *it.next().unwrap();
        }
        if let Some(d) = &mut layer.d {
            for v in d.iter_mut().flatten() {
                *v = *it.next().unwrap();
            }
        }
    }
    rule
}

/// Adam over the full batch with a decaying learning rate; deterministic
/// for a given seed.
pub fn train_rule(
    samples: &[(Vec<u8>, Vec<u8>)],
    n_x: usize,
    widths: &[usize],
    n_out: usize,
    cfg: &TrainConfig,
) -> Result<TrainedRule, RuleError> {
    if samples.is_empty() {
        return Err(RuleError::Shape("training needs at least one sample".into()));
    }
    if samples
        .iter()
        .any(|(x, y)| x.len() != n_x || y.len() != n_out)
    {
        return Err(RuleError::Shape("sample dimensions do not match".into()));
    }
    let xs: Vec<Vec<f64>> = samples
        .iter()
        .map(|(x, _)| x.iter().map(|&b| b as f64).collect())
        .collect();
    let ys: Vec<Vec<f64>> = samples
        .iter()
        .map(|(_, y)| y.iter().map(|&b| b as f64).collect())
        .collect();

    let mut rule = init_rule(n_x, widths, n_out, cfg.seed);
    let mut params = flatten(&rule);
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut loss = f64::INFINITY;

    for epoch in 0..cfg.epochs {
        let (l, grad) = loss_and_gradient(&rule, &xs, &ys);
        if !l.is_finite() {
            return Err(RuleError::Diverged(epoch));
        }
        loss = l;
        curve.push(l);
        let g = flatten(&grad);
        let t = (epoch + 1) as f64;
        let lr = cfg.learning_rate / (1.0 + cfg.decay * epoch as f64);
        for i in 0..params.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / (1.0 - beta1.powf(t));
            let v_hat = v[i] / (1.0 - beta2.powf(t));
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        rule = unflatten(&rule, &params);
    }

    Ok(TrainedRule {
        rule,
        final_loss: loss,
        loss_curve: curve,
    })
}

pub fn rule_to_json(rule: &NeuralRule) -> String {
    serde_json::to_string_pretty(rule).expect("rule serialization cannot fail")
}

pub fn rule_from_json(text: &str) -> Result<NeuralRule, RuleError> {
    let rule: NeuralRule =
        serde_json::from_str(text).map_err(|e| RuleError::Shape(e.to_string()))?;
    if rule.layers.len() != rule.hidden_layers + 1 {
        return Err(RuleError::Shape(format!(
            "K = {} but {} layers present",
            rule.hidden_layers,
            rule.layers.len()
        )));
    }
    Ok(rule)
}

pub fn load_rule(path: &Path) -> Result<NeuralRule, RuleError> {
    let text = std::fs::read_to_string(path).map_err(|e| RuleError::Shape(e.to_string()))?;
    rule_from_json(&text)
}

pub fn save_rule(rule: &NeuralRule, path: &Path) -> Result<(), RuleError> {
    std::fs::write(path, rule_to_json(rule)).map_err(|e| RuleError::Shape(e.to_string()))
}
