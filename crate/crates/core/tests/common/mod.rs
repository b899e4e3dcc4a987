//! Instance builders shared by the integration suites.

use bilevel_core::model::{BilevelInstance, LowerLevel, UpperLevel};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// One binary tender, one continuous follower variable:
/// lower max y s.t. y <= 1 - x, y in [0,1]; upper min -x - y.
pub fn toy_t1() -> BilevelInstance {
    BilevelInstance {
        n_x: 1,
        upper: UpperLevel {
            c_u: vec![-1.0],
            d_u: vec![-1.0],
            a_u: vec![],
            b_u: vec![],
            h_u: vec![],
        },
        lower: LowerLevel {
            d_l: vec![1.0],
            a_l: vec![vec![1.0]],
            b_l: vec![vec![1.0]],
            h_l: vec![1.0],
            binary_y_indices: vec![],
            y2_bounds: vec![(0.0, 1.0)],
        },
    }
}

fn densify(rows: Vec<Vec<(usize, f64)>>, n: usize) -> Vec<Vec<f64>> {
    rows.into_iter()
        .map(|terms| {
            let mut row = vec![0.0; n];
            for (j, v) in terms {
                row[j] = v;
            }
            row
        })
        .collect()
}

/// LP lower level whose value function is a positive combination of
/// subset-minimum terms plus a modular part, hence supermodular:
/// each term c_S * min_{i in S} x_i is realized by a gated [0,1] variable.
pub fn supermodular_instance(n_x: usize, seed: u64) -> BilevelInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_terms = n_x + 1;
    let mut d_l: Vec<f64> = Vec::new();
    let mut a_l: Vec<Vec<f64>> = Vec::new();
    let mut b_sparse: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut h_l: Vec<f64> = Vec::new();

    // interaction terms: w <= x_i for each i in S, coefficient >= 0
    for _ in 0..n_terms {
        let size = rng.gen_range(2..=n_x.max(2));
        let mut members: Vec<usize> = (0..n_x).collect();
        members.shuffle(&mut rng);
        members.truncate(size);
        let var = d_l.len();
        d_l.push(rng.gen_range(0.2..2.0));
        for &i in &members {
            // w - x_i <= 0
            let mut a = vec![0.0; n_x];
            a[i] = -1.0;
            a_l.push(a);
            b_sparse.push(vec![(var, 1.0)]);
            h_l.push(0.0);
        }
    }
    // modular terms, either sign
    for i in 0..n_x {
        let c = rng.gen_range(-1.5..1.5);
        let var = d_l.len();
        d_l.push(c);
        let mut a = vec![0.0; n_x];
        if c >= 0.0 {
            // w <= x_i: the positive coefficient pushes w up to x_i
            a[i] = -1.0;
            a_l.push(a);
            b_sparse.push(vec![(var, 1.0)]);
        } else {
            // w >= x_i: the negative coefficient pushes w down to x_i
            a[i] = 1.0;
            a_l.push(a);
            b_sparse.push(vec![(var, -1.0)]);
        }
        h_l.push(0.0);
    }

    let n_y = d_l.len();
    let mut rng2 = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    let c_u: Vec<f64> = (0..n_x).map(|_| rng2.gen_range(-2.0..2.0)).collect();
    let d_u: Vec<f64> = (0..n_y).map(|_| rng2.gen_range(-2.0..2.0)).collect();
    BilevelInstance {
        n_x,
        upper: UpperLevel {
            c_u,
            d_u,
            a_u: vec![],
            b_u: vec![],
            h_u: vec![],
        },
        lower: LowerLevel {
            d_l,
            a_l,
            b_l: densify(b_sparse, n_y),
            h_l,
            binary_y_indices: vec![],
            y2_bounds: vec![(0.0, 1.0); n_y],
        },
    }
}

/// Mixed lower level that is quasi-supermodular: gated subset-minimum terms
/// where each gate also requires a binary switch to be on.
pub fn quasi_supermodular_instance(n_x: usize, n_b: usize, seed: u64) -> BilevelInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_terms = n_x + 1;
    // y layout: [switches (binary)] then [term variables (continuous)]
    let n_y = n_b + n_terms;
    let mut d_l = vec![0.0; n_y];
    for v in d_l.iter_mut().take(n_b) {
        *v = rng.gen_range(-0.5..1.0);
    }
    let mut a_l: Vec<Vec<f64>> = Vec::new();
    let mut b_sparse: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut h_l = Vec::new();
    for k in 0..n_terms {
        let var = n_b + k;
        d_l[var] = rng.gen_range(0.2..2.0);
        let size = rng.gen_range(2..=n_x.max(2));
        let mut members: Vec<usize> = (0..n_x).collect();
        members.shuffle(&mut rng);
        members.truncate(size);
        for &i in &members {
            // w_k <= x_i
            let mut a = vec![0.0; n_x];
            a[i] = -1.0;
            a_l.push(a);
            b_sparse.push(vec![(var, 1.0)]);
            h_l.push(0.0);
        }
        // w_k <= y1_gate
        let gate = rng.gen_range(0..n_b);
        a_l.push(vec![0.0; n_x]);
        b_sparse.push(vec![(var, 1.0), (gate, -1.0)]);
        h_l.push(0.0);
    }

    let mut rng2 = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
    let c_u: Vec<f64> = (0..n_x).map(|_| rng2.gen_range(-2.0..2.0)).collect();
    let d_u: Vec<f64> = (0..n_y).map(|_| rng2.gen_range(-2.0..2.0)).collect();
    BilevelInstance {
        n_x,
        upper: UpperLevel {
            c_u,
            d_u,
            a_u: vec![],
            b_u: vec![],
            h_u: vec![],
        },
        lower: LowerLevel {
            d_l,
            a_l,
            b_l: densify(b_sparse, n_y),
            h_l,
            binary_y_indices: (0..n_b).collect(),
            y2_bounds: vec![(0.0, 1.0); n_terms],
        },
    }
}
