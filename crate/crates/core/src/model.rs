//! Bilevel instance data model: coefficient blocks of both levels, the
//! high-point relaxation, the lower-level value function and its fixed-y1
//! restriction, the multilinear extension, and JSON persistence.
//!
//! The tender x is binary throughout; the follower vector y splits into a
//! binary block y1 (indices `binary_y_indices`) and a continuous block y2.

use crate::common::{bits_of, vec_of_bits};
use crate::lp::{solve_lp, LpProblem, LpStatus, RowSense, Sense};
use crate::milp::{solve_milp, MilpProblem, MilpStatus, SolveLimits};
use serde::Serialize;
use serde_json::Value;
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

pub const DEFAULT_Y2_BOUND: (f64, f64) = (0.0, 1e6);

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct UpperLevel {
    pub c_u: Vec<f64>,
    pub d_u: Vec<f64>,
    #[serde(rename = "A_u")]
    pub a_u: Vec<Vec<f64>>,
    #[serde(rename = "B_u")]
    pub b_u: Vec<Vec<f64>>,
    pub h_u: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LowerLevel {
    pub d_l: Vec<f64>,
    #[serde(rename = "A_l")]
    pub a_l: Vec<Vec<f64>>,
    #[serde(rename = "B_l")]
    pub b_l: Vec<Vec<f64>>,
    pub h_l: Vec<f64>,
    pub binary_y_indices: Vec<usize>,
    /// Bounds for the continuous y entries, in increasing index order.
    pub y2_bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BilevelInstance {
    pub n_x: usize,
    pub upper: UpperLevel,
    pub lower: LowerLevel,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("missing field {0}")]
    MissingField(String),
    #[error("field {0}: expected {1}")]
    BadField(String, &'static str),
    #[error("{0}")]
    Inconsistent(String),
    #[error("tender variables must be binary-valued; found x_domain = {0:?}")]
    NonBinaryTender(String),
    #[error("lower-level problem is unbounded at x = {0:?}; it must be feasible and bounded")]
    LowerUnbounded(Vec<u8>),
    #[error("multilinear extension needs all {0} tender vertices feasible; x = {1:?} is not")]
    PsiInfeasibleVertex(usize, Vec<u8>),
    #[error("multilinear extension limited to n_x <= 15, got {0}")]
    PsiTooLarge(usize),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Lp(#[from] crate::lp::LpError),
    #[error(transparent)]
    Milp(#[from] crate::milp::MilpError),
}

/// Lower-level value; infeasibility is an explicit marker, never a float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phi {
    Finite(f64),
    Infeasible,
}

impl Phi {
    pub fn value(self) -> Option<f64> {
        match self {
            Phi::Finite(v) => Some(v),
            Phi::Infeasible => None,
        }
    }

    pub fn expect_finite(self, what: &str) -> f64 {
        match self {
            Phi::Finite(v) => v,
            Phi::Infeasible => panic!("{what}: unexpectedly infeasible"),
        }
    }
}

#[derive(Debug, Clone)]
enum PhiEntry {
    Infeasible,
    Feasible { value: f64, y1: Vec<u8> },
}

/// Pool of computed lower-level values, keyed by the tender bits (and the
/// fixed y1 bits for the restricted function).
#[derive(Debug, Default)]
pub struct PhiCache {
    phi: HashMap<u64, PhiEntry>,
    varphi: HashMap<(u64, u64), Phi>,
    /// Lower-level solves actually performed (cache misses).
    pub phi_solves: usize,
    pub varphi_solves: usize,
}

impl PhiCache {
    pub fn new() -> Self {
        Self::default()
    }
}

impl BilevelInstance {
    pub fn n_y(&self) -> usize {
        self.lower.d_l.len()
    }

    pub fn m_u(&self) -> usize {
        self.upper.h_u.len()
    }

    pub fn m_l(&self) -> usize {
        self.lower.h_l.len()
    }

    /// Sorted binary y indices.
    pub fn binary_idx(&self) -> Vec<usize> {
        let mut v = self.lower.binary_y_indices.clone();
        v.sort_unstable();
        v
    }

    /// Sorted continuous y indices (complement of the binary block).
    pub fn cont_idx(&self) -> Vec<usize> {
        let bin = self.binary_idx();
        (0..self.n_y()).filter(|i| !bin.contains(i)).collect()
    }

    pub fn d_l1(&self) -> Vec<f64> {
        self.binary_idx().iter().map(|&i| self.lower.d_l[i]).collect()
    }

    pub fn d_l2(&self) -> Vec<f64> {
        self.cont_idx().iter().map(|&i| self.lower.d_l[i]).collect()
    }

    pub fn b_l1(&self) -> Vec<Vec<f64>> {
        let idx = self.binary_idx();
        self.lower
            .b_l
            .iter()
            .map(|row| idx.iter().map(|&i| row[i]).collect())
            .collect()
    }

    pub fn b_l2(&self) -> Vec<Vec<f64>> {
        let idx = self.cont_idx();
        self.lower
            .b_l
            .iter()
            .map(|row| idx.iter().map(|&i| row[i]).collect())
            .collect()
    }

    /// Bounds of every y variable: [0,1] for the binary block, the stored
    /// box for the continuous block.
    pub fn y_bounds(&self) -> Vec<(f64, f64)> {
        let bin = self.binary_idx();
        let cont = self.cont_idx();
        let mut out = vec![(0.0, 1.0); self.n_y()];
        for (k, &i) in cont.iter().enumerate() {
            out[i] = self.lower.y2_bounds[k];
        }
        for &i in &bin {
            out[i] = (0.0, 1.0);
        }
        out
    }

    /// Split a full y vector into its binary and continuous blocks.
    pub fn split_y(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let y1 = self.binary_idx().iter().map(|&i| y[i]).collect();
        let y2 = self.cont_idx().iter().map(|&i| y[i]).collect();
        (y1, y2)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let n_y = self.n_y();
        let check_vec = |name: &str, len: usize, want: usize| -> Result<(), ModelError> {
            if len != want {
                return Err(ModelError::Inconsistent(format!(
                    "{name} has length {len}, expected {want}"
                )));
            }
            Ok(())
        };
        check_vec("upper.c_u", self.upper.c_u.len(), self.n_x)?;
        check_vec("upper.d_u", self.upper.d_u.len(), n_y)?;
        check_vec("upper.h_u", self.upper.h_u.len(), self.upper.a_u.len())?;
        check_vec("upper.B_u rows", self.upper.b_u.len(), self.upper.a_u.len())?;
        for (i, row) in self.upper.a_u.iter().enumerate() {
            check_vec(&format!("upper.A_u[{i}]"), row.len(), self.n_x)?;
        }
        for (i, row) in self.upper.b_u.iter().enumerate() {
            check_vec(&format!("upper.B_u[{i}]"), row.len(), n_y)?;
        }
        check_vec("lower.h_l", self.lower.h_l.len(), self.lower.a_l.len())?;
        check_vec("lower.B_l rows", self.lower.b_l.len(), self.lower.a_l.len())?;
        for (i, row) in self.lower.a_l.iter().enumerate() {
            check_vec(&format!("lower.A_l[{i}]"), row.len(), self.n_x)?;
        }
        for (i, row) in self.lower.b_l.iter().enumerate() {
            check_vec(&format!("lower.B_l[{i}]"), row.len(), n_y)?;
        }
        let mut seen = vec![false; n_y];
        for &i in &self.lower.binary_y_indices {
            if i >= n_y {
                return Err(ModelError::Inconsistent(format!(
                    "lower.binary_y_indices entry {i} out of range (n_y = {n_y})"
                )));
            }
            if seen[i] {
                return Err(ModelError::Inconsistent(format!(
                    "lower.binary_y_indices entry {i} repeated"
                )));
            }
            seen[i] = true;
        }
        let n_cont = n_y - self.lower.binary_y_indices.len();
        check_vec("lower.y2_bounds", self.lower.y2_bounds.len(), n_cont)?;
        for (k, &(lo, hi)) in self.lower.y2_bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(ModelError::Inconsistent(format!(
                    "lower.y2_bounds[{k}] = ({lo}, {hi}) must be a finite ordered pair"
                )));
            }
        }
        Ok(())
    }
}

/// Rows of the lower level with the continuous-variable boxes appended as
/// explicit inequality rows; the dual-based machinery works on this system
/// so that boundedness is carried by rows rather than variable bounds.
#[derive(Debug, Clone)]
pub struct ExtendedLowerRows {
    pub a: Vec<Vec<f64>>,
    pub b1: Vec<Vec<f64>>,
    pub b2: Vec<Vec<f64>>,
    pub h: Vec<f64>,
}

impl ExtendedLowerRows {
    pub fn num_rows(&self) -> usize {
        self.h.len()
    }
}

pub fn extended_lower_rows(inst: &BilevelInstance) -> ExtendedLowerRows {
    let n_b = inst.binary_idx().len();
    let n_c = inst.cont_idx().len();
    let mut a = inst.lower.a_l.clone();
    let mut b1 = inst.b_l1();
    let mut b2 = inst.b_l2();
    let mut h = inst.lower.h_l.clone();
    for (k, &(lo, hi)) in inst.lower.y2_bounds.iter().enumerate() {
        // y2_k <= hi
        a.push(vec![0.0; inst.n_x]);
        b1.push(vec![0.0; n_b]);
        let mut row = vec![0.0; n_c];
        row[k] = 1.0;
        b2.push(row);
        h.push(hi);
        // -y2_k <= -lo
        a.push(vec![0.0; inst.n_x]);
        b1.push(vec![0.0; n_b]);
        let mut row = vec![0.0; n_c];
        row[k] = -1.0;
        b2.push(row);
        h.push(-lo);
    }
    ExtendedLowerRows { a, b1, b2, h }
}

/// Assemble the high-point relaxation: both levels' constraints, the upper
/// objective, and no lower-level optimality requirement.
pub fn build_hpr(inst: &BilevelInstance) -> Result<MilpProblem, ModelError> {
    inst.validate()?;
    let n_x = inst.n_x;
    let n_y = inst.n_y();
    let n = n_x + n_y;
    let mut objective = vec![0.0; n];
    objective[..n_x].copy_from_slice(&inst.upper.c_u);
    objective[n_x..].copy_from_slice(&inst.upper.d_u);

    let mut rows = Vec::with_capacity(inst.m_u() + inst.m_l());
    let mut rhs = Vec::new();
    for i in 0..inst.m_u() {
        let mut row = vec![0.0; n];
        row[..n_x].copy_from_slice(&inst.upper.a_u[i]);
        row[n_x..].copy_from_slice(&inst.upper.b_u[i]);
        rows.push(row);
        rhs.push(inst.upper.h_u[i]);
    }
    for i in 0..inst.m_l() {
        let mut row = vec![0.0; n];
        row[..n_x].copy_from_slice(&inst.lower.a_l[i]);
        row[n_x..].copy_from_slice(&inst.lower.b_l[i]);
        rows.push(row);
        rhs.push(inst.lower.h_l[i]);
    }
    let m = rows.len();

    let mut lower = vec![0.0; n];
    let mut upper = vec![1.0; n];
    let mut is_integer = vec![true; n];
    for (i, (lo, hi)) in inst.y_bounds().into_iter().enumerate() {
        lower[n_x + i] = lo;
        upper[n_x + i] = hi;
    }
    for &i in &inst.cont_idx() {
        is_integer[n_x + i] = false;
    }

    let mut p = MilpProblem::new(
        LpProblem {
            sense: Sense::Min,
            objective,
            rows,
            row_senses: vec![RowSense::Le; m],
            rhs,
            lower,
            upper,
        },
        is_integer,
    );
    p.groups.insert("x".to_string(), 0..n_x);
    p.groups.insert("y".to_string(), n_x..n);
    Ok(p)
}

fn lower_problem(inst: &BilevelInstance, x: &[u8]) -> MilpProblem {
    let n_y = inst.n_y();
    let rhs: Vec<f64> = (0..inst.m_l())
        .map(|i| {
            inst.lower.h_l[i]
                - inst.lower.a_l[i]
                    .iter()
                    .zip(x)
                    .map(|(&a, &xi)| a * xi as f64)
                    .sum::<f64>()
        })
        .collect();
    let mut lower = vec![0.0; n_y];
    let mut upper = vec![1.0; n_y];
    for (i, (lo, hi)) in inst.y_bounds().into_iter().enumerate() {
        lower[i] = lo;
        upper[i] = hi;
    }
    let mut is_integer = vec![false; n_y];
    for &i in &inst.binary_idx() {
        is_integer[i] = true;
    }
    MilpProblem::new(
        LpProblem {
            sense: Sense::Max,
            objective: inst.lower.d_l.clone(),
            rows: inst.lower.b_l.clone(),
            row_senses: vec![RowSense::Le; inst.m_l()],
            rhs,
            lower,
            upper,
        },
        is_integer,
    )
}

fn solve_lower_uncached(inst: &BilevelInstance, x: &[u8]) -> Result<PhiEntry, ModelError> {
    let p = lower_problem(inst, x);
    let out = solve_milp(&p, None, SolveLimits::default())?;
    match out.status {
        MilpStatus::Infeasible => Ok(PhiEntry::Infeasible),
        MilpStatus::Unbounded => Err(ModelError::LowerUnbounded(x.to_vec())),
        MilpStatus::Optimal => {
            let sol = out.primal.unwrap();
            let y1 = inst
                .binary_idx()
                .iter()
                .map(|&i| sol[i].round() as u8)
                .collect();
            Ok(PhiEntry::Feasible {
                value: out.objective.unwrap(),
                y1,
            })
        }
        MilpStatus::LimitReached => unreachable!("no limits were set"),
    }
}

fn lower_entry<'c>(
    inst: &BilevelInstance,
    x: &[u8],
    cache: &'c mut PhiCache,
) -> Result<&'c PhiEntry, ModelError> {
    let key = bits_of(x);
    if !cache.phi.contains_key(&key) {
        let entry = solve_lower_uncached(inst, x)?;
        cache.phi_solves += 1;
        cache.phi.insert(key, entry);
    }
    Ok(&cache.phi[&key])
}

/// Optimal lower-level objective as a function of the tender.
pub fn eval_phi(
    inst: &BilevelInstance,
    x: &[u8],
    cache: &mut PhiCache,
) -> Result<Phi, ModelError> {
    debug_assert_eq!(x.len(), inst.n_x);
    Ok(match lower_entry(inst, x, cache)? {
        PhiEntry::Infeasible => Phi::Infeasible,
        PhiEntry::Feasible { value, .. } => Phi::Finite(*value),
    })
}

/// A y1 block attaining the lower-level optimum at x, if feasible. The
/// branch-and-bound search is deterministic, so so is this selection.
pub fn lower_argmax_y1(
    inst: &BilevelInstance,
    x: &[u8],
    cache: &mut PhiCache,
) -> Result<Option<Vec<u8>>, ModelError> {
    Ok(match lower_entry(inst, x, cache)? {
        PhiEntry::Infeasible => None,
        PhiEntry::Feasible { y1, .. } => Some(y1.clone()),
    })
}

/// Value of the continuous residual problem with the binary block fixed.
pub fn eval_varphi(
    inst: &BilevelInstance,
    x: &[u8],
    y1: &[u8],
    cache: &mut PhiCache,
) -> Result<Phi, ModelError> {
    let bin = inst.binary_idx();
    debug_assert_eq!(x.len(), inst.n_x);
    debug_assert_eq!(y1.len(), bin.len());
    let key = (bits_of(x), bits_of(y1));
    if let Some(&v) = cache.varphi.get(&key) {
        return Ok(v);
    }
    let cont = inst.cont_idx();
    let b1 = inst.b_l1();
    let rhs: Vec<f64> = (0..inst.m_l())
        .map(|i| {
            inst.lower.h_l[i]
                - dot_u8(&inst.lower.a_l[i], x)
                - dot_u8(&b1[i], y1)
        })
        .collect();
    let p = LpProblem {
        sense: Sense::Max,
        objective: inst.d_l2(),
        rows: inst.b_l2(),
        row_senses: vec![RowSense::Le; inst.m_l()],
        rhs,
        lower: cont.iter().enumerate().map(|(k, _)| inst.lower.y2_bounds[k].0).collect(),
        upper: cont.iter().enumerate().map(|(k, _)| inst.lower.y2_bounds[k].1).collect(),
    };
    let out = solve_lp(&p)?;
    let v = match out.status {
        LpStatus::Infeasible => Phi::Infeasible,
        LpStatus::Unbounded => return Err(ModelError::LowerUnbounded(x.to_vec())),
        LpStatus::Optimal => Phi::Finite(out.objective),
    };
    cache.varphi_solves += 1;
    cache.varphi.insert(key, v);
    Ok(v)
}

fn dot_u8(coeffs: &[f64], bits: &[u8]) -> f64 {
    coeffs.iter().zip(bits).map(|(&c, &b)| c * b as f64).sum()
}

/// Multilinear extension of the value function over the unit hypercube.
/// Coincides with `eval_phi` on binary arguments.
pub fn eval_psi(
    inst: &BilevelInstance,
    z: &[f64],
    cache: &mut PhiCache,
) -> Result<f64, ModelError> {
    let n = inst.n_x;
    if n > 15 {
        return Err(ModelError::PsiTooLarge(n));
    }
    debug_assert_eq!(z.len(), n);
    let mut total = 0.0;
    for mask in 0u64..(1 << n) {
        let x = vec_of_bits(mask, n);
        let phi = match eval_phi(inst, &x, cache)? {
            Phi::Finite(v) => v,
            Phi::Infeasible => return Err(ModelError::PsiInfeasibleVertex(n, x)),
        };
        let mut w = 1.0;
        for i in 0..n {
            w *= if (mask >> i) & 1 == 1 { z[i] } else { 1.0 - z[i] };
        }
        total += phi * w;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Persistence. Loading goes through serde_json::Value so that schema errors
// can name the offending field by path.

pub fn instance_from_json(text: &str) -> Result<BilevelInstance, ModelError> {
    let v: Value = serde_json::from_str(text)?;
    instance_from_value(&v)
}

pub fn instance_from_value(v: &Value) -> Result<BilevelInstance, ModelError> {
    if let Some(dom) = v.get("x_domain") {
        let dom = dom
            .as_str()
            .ok_or_else(|| ModelError::BadField("x_domain".into(), "a string"))?;
        if dom != "binary" {
            return Err(ModelError::NonBinaryTender(dom.to_string()));
        }
    }
    let n_x = get(v, "", "n_x")?
        .as_u64()
        .ok_or_else(|| ModelError::BadField("n_x".into(), "a non-negative integer"))?
        as usize;
    let upper = get(v, "", "upper")?;
    let lower = get(v, "", "lower")?;
    let inst = BilevelInstance {
        n_x,
        upper: UpperLevel {
            c_u: vec_field(upper, "upper.", "c_u")?,
            d_u: vec_field(upper, "upper.", "d_u")?,
            a_u: mat_field(upper, "upper.", "A_u")?,
            b_u: mat_field(upper, "upper.", "B_u")?,
            h_u: vec_field(upper, "upper.", "h_u")?,
        },
        lower: LowerLevel {
            d_l: vec_field(lower, "lower.", "d_l")?,
            a_l: mat_field(lower, "lower.", "A_l")?,
            b_l: mat_field(lower, "lower.", "B_l")?,
            h_l: vec_field(lower, "lower.", "h_l")?,
            binary_y_indices: idx_field(lower, "lower.", "binary_y_indices")?,
            y2_bounds: bounds_field(lower, n_x, v)?,
        },
    };
    inst.validate()?;
    Ok(inst)
}

fn get<'a>(v: &'a Value, path: &str, key: &str) -> Result<&'a Value, ModelError> {
    v.get(key)
        .ok_or_else(|| ModelError::MissingField(format!("{path}{key}")))
}

fn number(v: &Value, path: &str) -> Result<f64, ModelError> {
    let x = v
        .as_f64()
        .ok_or_else(|| ModelError::BadField(path.to_string(), "a number"))?;
    if !x.is_finite() {
        return Err(ModelError::BadField(path.to_string(), "a finite number"));
    }
    Ok(x)
}

fn vec_field(v: &Value, path: &str, key: &str) -> Result<Vec<f64>, ModelError> {
    let arr = get(v, path, key)?
        .as_array()
        .ok_or_else(|| ModelError::BadField(format!("{path}{key}"), "an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{path}{key}[{i}]")))
        .collect()
}

fn mat_field(v: &Value, path: &str, key: &str) -> Result<Vec<Vec<f64>>, ModelError> {
    let arr = get(v, path, key)?
        .as_array()
        .ok_or_else(|| ModelError::BadField(format!("{path}{key}"), "an array of arrays"))?;
    arr.iter()
        .enumerate()
        .map(|(i, row)| {
            let row = row.as_array().ok_or_else(|| {
                ModelError::BadField(format!("{path}{key}[{i}]"), "an array")
            })?;
            row.iter()
                .enumerate()
                .map(|(j, x)| number(x, &format!("{path}{key}[{i}][{j}]")))
                .collect()
        })
        .collect()
}

fn idx_field(v: &Value, path: &str, key: &str) -> Result<Vec<usize>, ModelError> {
    let arr = get(v, path, key)?
        .as_array()
        .ok_or_else(|| ModelError::BadField(format!("{path}{key}"), "an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| {
            x.as_u64()
                .map(|u| u as usize)
                .ok_or_else(|| {
                    ModelError::BadField(
                        format!("{path}{key}[{i}]"),
                        "a non-negative integer",
                    )
                })
        })
        .collect()
}

fn bounds_field(
    lower: &Value,
    _n_x: usize,
    _root: &Value,
) -> Result<Vec<(f64, f64)>, ModelError> {
    match lower.get("y2_bounds") {
        None | Some(Value::Null) => {
            // Absent bounds default to a large finite box so that the
            // boundedness assumption stays checkable.
            let d_l = vec_field(lower, "lower.", "d_l")?;
            let bin = idx_field(lower, "lower.", "binary_y_indices")?;
            let n_cont = d_l.len() - bin.len();
            Ok(vec![DEFAULT_Y2_BOUND; n_cont])
        }
        Some(Value::Array(arr)) => arr
            .iter()
            .enumerate()
            .map(|(k, pair)| {
                let pair = pair.as_array().ok_or_else(|| {
                    ModelError::BadField(format!("lower.y2_bounds[{k}]"), "a [lo, hi] pair")
                })?;
                if pair.len() != 2 {
                    return Err(ModelError::BadField(
                        format!("lower.y2_bounds[{k}]"),
                        "a [lo, hi] pair",
                    ));
                }
                Ok((
                    number(&pair[0], &format!("lower.y2_bounds[{k}][0]"))?,
                    number(&pair[1], &format!("lower.y2_bounds[{k}][1]"))?,
                ))
            })
            .collect(),
        Some(_) => Err(ModelError::BadField(
            "lower.y2_bounds".into(),
            "an array of [lo, hi] pairs",
        )),
    }
}

pub fn instance_to_json(inst: &BilevelInstance) -> String {
    serde_json::to_string_pretty(inst).expect("instance serialization cannot fail")
}

pub fn load_instance(path: &Path) -> Result<BilevelInstance, ModelError> {
    let text = std::fs::read_to_string(path)?;
    instance_from_json(&text)
}

pub fn save_instance(inst: &BilevelInstance, path: &Path) -> Result<(), ModelError> {
    inst.validate()?;
    std::fs::write(path, instance_to_json(inst))?;
    Ok(())
}
