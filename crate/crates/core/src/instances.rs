//! Seeded random instance generators: general bilevel MILPs with box
//! coefficient distributions, and facility-location interdiction problems
//! where an attacker disables facilities under a cardinality budget and the
//! operator re-optimizes repair and flows.
//!
//! Both generators are pure functions of their config; every coefficient
//! block draws from its own ChaCha8 stream of the config seed, so instances
//! are bit-reproducible.

use crate::model::{BilevelInstance, LowerLevel, UpperLevel};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct GeneralGenConfig {
    pub n_x: usize,
    /// n_y = max(1, round(ny_ratio * n_x)).
    pub ny_ratio: f64,
    /// Constraint count ratio at both levels.
    pub constraint_ratio: f64,
    /// Fraction of follower variables that are binary.
    pub bin_ratio: f64,
    /// Probability of zeroing each lower-level constraint coefficient.
    pub sparsity: f64,
    pub seed: u64,
}

impl GeneralGenConfig {
    pub fn new(n_x: usize, seed: u64) -> Self {
        GeneralGenConfig {
            n_x,
            ny_ratio: 1.0,
            constraint_ratio: 0.4,
            bin_ratio: 0.5,
            sparsity: 0.0,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FacilityGenConfig {
    /// Facility count; customers m = 10n, budget B = round(n/3).
    pub n: usize,
    pub seed: u64,
    /// With repair the follower owns a binary repair block; without it the
    /// lower level is a pure LP.
    pub repair: bool,
}

impl FacilityGenConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        FacilityGenConfig {
            n,
            seed,
            repair: true,
        }
    }
}

/// Raw facility data behind a generated interdiction instance.
#[derive(Debug, Clone)]
pub struct FacilityData {
    pub n: usize,
    pub m: usize,
    pub budget: usize,
    pub demand: Vec<f64>,
    pub capacity: Vec<f64>,
    pub repair_capacity: Vec<f64>,
    pub transport_cost: Vec<Vec<f64>>,
    pub repair_cost: Vec<f64>,
    pub penalty: f64,
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("facility generation needs n >= 2, got {0}")]
    TooFewFacilities(usize),
    #[error("capacity resampling exhausted 1000 draws; condition ({0}) kept failing")]
    ResampleCap(&'static str),
}

pub fn facility_budget(n: usize) -> usize {
    (n as f64 / 3.0).round() as usize
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn uniform_mat(rng: &mut ChaCha8Rng, m: usize, n: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (0..m).map(|_| uniform_vec(rng, n, lo, hi)).collect()
}

/// General bilevel MILP with the standard coefficient boxes: objectives in
/// [-50, 50], constraint blocks in [0, 10], upper rhs in [30, 130], lower
/// rhs in [10, 110]; continuous follower variables live in [0, 1].
pub fn gen_general(cfg: &GeneralGenConfig) -> BilevelInstance {
    let n_x = cfg.n_x.max(1);
    let n_y = ((cfg.ny_ratio * n_x as f64).round() as usize).max(1);
    let m_u = ((cfg.constraint_ratio * n_x as f64).round() as usize).max(1);
    let m_l = ((cfg.constraint_ratio * n_y as f64).round() as usize).max(1);
    let k_bin = ((cfg.bin_ratio * n_y as f64).round() as usize).min(n_y);

    let c_u = uniform_vec(&mut stream(cfg.seed, 0), n_x, -50.0, 50.0);
    let d_u = uniform_vec(&mut stream(cfg.seed, 1), n_y, -50.0, 50.0);
    let a_u = uniform_mat(&mut stream(cfg.seed, 2), m_u, n_x, 0.0, 10.0);
    let b_u = uniform_mat(&mut stream(cfg.seed, 3), m_u, n_y, 0.0, 10.0);
    let h_u = uniform_vec(&mut stream(cfg.seed, 4), m_u, 30.0, 130.0);
    let d_l = uniform_vec(&mut stream(cfg.seed, 5), n_y, -50.0, 50.0);
    let mut a_l = uniform_mat(&mut stream(cfg.seed, 6), m_l, n_x, 0.0, 10.0);
    let mut b_l = uniform_mat(&mut stream(cfg.seed, 7), m_l, n_y, 0.0, 10.0);
    let h_l = uniform_vec(&mut stream(cfg.seed, 8), m_l, 10.0, 110.0);

    if cfg.sparsity > 0.0 {
        let mut rng = stream(cfg.seed, 9);
        for row in a_l.iter_mut() {
            for v in row.iter_mut() {
                if rng.gen_range(0.0..1.0) < cfg.sparsity {
                    *v = 0.0;
                }
            }
        }
        for row in b_l.iter_mut() {
            for v in row.iter_mut() {
                if rng.gen_range(0.0..1.0) < cfg.sparsity {
                    *v = 0.0;
                }
            }
        }
    }

    BilevelInstance {
        n_x,
        upper: UpperLevel {
            c_u,
            d_u,
            a_u,
            b_u,
            h_u,
        },
        lower: LowerLevel {
            d_l,
            a_l,
            b_l,
            h_l,
            binary_y_indices: (0..k_bin).collect(),
            y2_bounds: vec![(0.0, 1.0); n_y - k_bin],
        },
    }
}

/// Facility-location interdiction instance plus its raw data. The attacker
/// minimizes -g under the attack budget (x_i = 0 means facility i is down);
/// the operator maximizes -g over repair and flow decisions.
pub fn gen_facility_data(
    cfg: &FacilityGenConfig,
) -> Result<(BilevelInstance, FacilityData), GenError> {
    let n = cfg.n;
    if n < 2 {
        return Err(GenError::TooFewFacilities(n));
    }
    let m = 10 * n;
    let budget = facility_budget(n);
    let ratio = m as f64 / n as f64;

    let demand = uniform_vec(&mut stream(cfg.seed, 0), m, 0.0, 1.0);
    let total_demand: f64 = demand.iter().sum();

    // Only capacities are redrawn while the nontriviality conditions fail;
    // demand and costs stay fixed.
    let mut cap_rng = stream(cfg.seed, 1);
    let mut capacity = Vec::new();
    let mut repair_capacity = Vec::new();
    let mut ok = false;
    let mut failing = "i";
    for _ in 0..1000 {
        capacity = uniform_vec(&mut cap_rng, n, ratio / 3.0, ratio);
        repair_capacity = capacity
            .iter()
            .map(|c| c * budget as f64 / n as f64)
            .collect();
        let total_cap: f64 = capacity.iter().sum();
        let mut sorted = capacity.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let top_b: f64 = sorted.iter().take(budget).sum();
        let total_repair: f64 = repair_capacity.iter().sum();
        // (i) demand fits the intact system
        if total_demand > total_cap {
            failing = "i";
            continue;
        }
        // (ii) the worst-case attack can starve it without repair
        if total_cap - top_b >= total_demand {
            failing = "ii";
            continue;
        }
        // (iii) full repair covers the worst-case attack
        if total_cap - top_b + total_repair < total_demand {
            failing = "iii";
            continue;
        }
        ok = true;
        break;
    }
    if !ok {
        return Err(GenError::ResampleCap(failing));
    }

    let transport_cost = uniform_mat(&mut stream(cfg.seed, 2), n, m, 0.0, 1.0);
    let penalty = 10.0;
    let repair_cost: Vec<f64> = (0..n)
        .map(|i| {
            let max_ct = transport_cost[i]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            2.0 * repair_capacity[i] * max_ct
        })
        .collect();

    let data = FacilityData {
        n,
        m,
        budget,
        demand,
        capacity,
        repair_capacity,
        transport_cost,
        repair_cost,
        penalty,
    };
    Ok((assemble_facility(cfg, &data), data))
}

pub fn gen_facility(cfg: &FacilityGenConfig) -> Result<BilevelInstance, GenError> {
    Ok(gen_facility_data(cfg)?.0)
}

fn assemble_facility(cfg: &FacilityGenConfig, data: &FacilityData) -> BilevelInstance {
    let (n, m) = (data.n, data.m);
    let n_rep = if cfg.repair { n } else { 0 };
    let n_y = n_rep + n * m;
    let flow = |i: usize, j: usize| n_rep + i * m + j;

    // -g coefficients: repair terms -c_r, flow terms (c_p - c_t) * d > 0.
    let mut d_l = vec![0.0; n_y];
    for i in 0..n_rep {
        d_l[i] = -data.repair_cost[i];
    }
    for i in 0..n {
        for j in 0..m {
            d_l[flow(i, j)] = (data.penalty - data.transport_cost[i][j]) * data.demand[j];
        }
    }

    // Budget row: sum(1 - x) <= B, i.e. -sum(x) <= B - n.
    let a_u = vec![vec![-1.0; n]];
    let b_u = vec![vec![0.0; n_y]];
    let h_u = vec![data.budget as f64 - n as f64];

    let m_l = m + n;
    let mut a_l = vec![vec![0.0; n]; m_l];
    let mut b_l = vec![vec![0.0; n_y]; m_l];
    let mut h_l = vec![0.0; m_l];
    // assignment rows: each customer served at most once
    for j in 0..m {
        for i in 0..n {
            b_l[j][flow(i, j)] = 1.0;
        }
        h_l[j] = 1.0;
    }
    // capacity rows: sum_j d_j y2_ij <= C_i x_i + C'_i y1_i
    for i in 0..n {
        let r = m + i;
        a_l[r][i] = -data.capacity[i];
        if cfg.repair {
            b_l[r][i] = -data.repair_capacity[i];
        }
        for j in 0..m {
            b_l[r][flow(i, j)] = data.demand[j];
        }
    }

    BilevelInstance {
        n_x: n,
        upper: UpperLevel {
            c_u: vec![0.0; n],
            d_u: d_l.clone(),
            a_u,
            b_u,
            h_u,
        },
        lower: LowerLevel {
            d_l,
            a_l,
            b_l,
            h_l,
            binary_y_indices: (0..n_rep).collect(),
            y2_bounds: vec![(0.0, 1.0); n * m],
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::instance_to_json;

    #[test]
    fn general_is_seed_deterministic() {
        let cfg = GeneralGenConfig::new(4, 7);
        let a = gen_general(&cfg);
        let b = gen_general(&cfg);
        assert_eq!(instance_to_json(&a), instance_to_json(&b));
        let c = gen_general(&GeneralGenConfig::new(4, 8));
        assert_ne!(instance_to_json(&a), instance_to_json(&c));
    }

    #[test]
    fn general_coefficients_within_ranges() {
        let inst = gen_general(&GeneralGenConfig::new(6, 3));
        let in_range = |vs: &[f64], lo: f64, hi: f64| vs.iter().all(|&v| v >= lo && v <= hi);
        assert!(in_range(&inst.upper.c_u, -50.0, 50.0));
        assert!(in_range(&inst.upper.d_u, -50.0, 50.0));
        assert!(in_range(&inst.lower.d_l, -50.0, 50.0));
        for row in inst.upper.a_u.iter().chain(&inst.upper.b_u) {
            assert!(in_range(row, 0.0, 10.0));
        }
        for row in inst.lower.a_l.iter().chain(&inst.lower.b_l) {
            assert!(in_range(row, 0.0, 10.0));
        }
        assert!(in_range(&inst.upper.h_u, 30.0, 130.0));
        assert!(in_range(&inst.lower.h_l, 10.0, 110.0));
        assert_eq!(inst.n_y(), 6);
        assert_eq!(inst.m_u(), 2);
        assert_eq!(inst.binary_idx().len(), 3);
    }

    #[test]
    fn full_sparsity_still_loads() {
        let mut cfg = GeneralGenConfig::new(4, 11);
        cfg.sparsity = 1.0;
        let inst = gen_general(&cfg);
        for row in inst.lower.a_l.iter().chain(&inst.lower.b_l) {
            assert!(row.iter().all(|&v| v == 0.0));
        }
        inst.validate().unwrap();
        let json = instance_to_json(&inst);
        crate::model::instance_from_json(&json).unwrap();
    }

    #[test]
    fn facility_budget_rounding() {
        assert_eq!(facility_budget(5), 2);
        assert_eq!(facility_budget(3), 1);
        assert_eq!(facility_budget(10), 3);
    }

    #[test]
    fn facility_determinism_and_conditions() {
        let cfg = FacilityGenConfig::new(3, 5);
        let (inst_a, data) = gen_facility_data(&cfg).unwrap();
        let (inst_b, _) = gen_facility_data(&cfg).unwrap();
        assert_eq!(instance_to_json(&inst_a), instance_to_json(&inst_b));

        let total_demand: f64 = data.demand.iter().sum();
        let total_cap: f64 = data.capacity.iter().sum();
        let mut sorted = data.capacity.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let top_b: f64 = sorted.iter().take(data.budget).sum();
        let total_rep: f64 = data.repair_capacity.iter().sum();
        assert!(total_demand <= total_cap);
        assert!(total_cap - top_b < total_demand);
        assert!(total_cap - top_b + total_rep >= total_demand);
    }

    #[test]
    fn facility_feasible_at_every_budgeted_attack() {
        use crate::common::vec_of_bits;
        use crate::model::{eval_phi, Phi, PhiCache};
        let (inst, data) = gen_facility_data(&FacilityGenConfig::new(3, 1)).unwrap();
        let mut cache = PhiCache::new();
        for mask in 0u64..(1 << data.n) {
            let x = vec_of_bits(mask, data.n);
            let down = x.iter().filter(|&&b| b == 0).count();
            if down > data.budget {
                continue;
            }
            match eval_phi(&inst, &x, &mut cache).unwrap() {
                Phi::Finite(_) => {}
                Phi::Infeasible => panic!("lower level infeasible at x={x:?}"),
            }
        }
    }

    #[test]
    fn facility_varphi_is_submodular_at_fixed_repairs() {
        use crate::common::vec_of_bits;
        use crate::model::{eval_varphi, Phi, PhiCache};
        let (inst, data) = gen_facility_data(&FacilityGenConfig::new(3, 2)).unwrap();
        let mut cache = PhiCache::new();
        for y1_mask in 0u64..(1 << data.n) {
            let y1 = vec_of_bits(y1_mask, data.n);
            let mut table = Vec::new();
            for xm in 0u64..(1 << data.n) {
                let x = vec_of_bits(xm, data.n);
                match eval_varphi(&inst, &x, &y1, &mut cache).unwrap() {
                    Phi::Finite(v) => table.push(v),
                    Phi::Infeasible => panic!("varphi infeasible"),
                }
            }
            // local submodularity over all pairs
            let n = data.n;
            for base in 0u64..(1 << n) {
                for i in 0..n {
                    for j in (i + 1)..n {
                        if (base >> i) & 1 == 1 || (base >> j) & 1 == 1 {
                            continue;
                        }
                        let f = |m: u64| table[m as usize];
                        let lhs = f(base | 1 << i) + f(base | 1 << j);
                        let rhs = f(base) + f(base | 1 << i | 1 << j);
                        assert!(
                            lhs >= rhs - 1e-9,
                            "submodularity violated at y1={y1:?}, base={base:#b}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn no_repair_variant_is_pure_lp() {
        let mut cfg = FacilityGenConfig::new(3, 4);
        cfg.repair = false;
        let inst = gen_facility(&cfg).unwrap();
        assert!(inst.binary_idx().is_empty());
        assert_eq!(inst.n_y(), 3 * 30);
    }
}
