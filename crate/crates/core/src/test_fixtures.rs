//! Hand-built instances shared by unit tests across modules.

use crate::model::{BilevelInstance, LowerLevel, UpperLevel};

/// One binary tender, one continuous follower variable:
/// lower level max y s.t. y <= 1 - x, y in [0,1]; upper min -x - y.
/// phi(0) = 1, phi(1) = 0; the bilevel optimum is -1 at either tender.
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

/// Two tenders, two binary followers, two continuous followers; feasible
/// and bounded for every tender.
pub fn mixed_toy() -> BilevelInstance {
    BilevelInstance {
        n_x: 2,
        upper: UpperLevel {
            c_u: vec![-1.0, -1.0],
            d_u: vec![1.0, -1.0, 0.5, 0.0],
            a_u: vec![],
            b_u: vec![],
            h_u: vec![],
        },
        lower: LowerLevel {
            d_l: vec![2.0, 1.0, 1.5, 0.5],
            a_l: vec![
                vec![-1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, 0.0],
            ],
            b_l: vec![
                vec![1.0, 0.0, 1.0, 0.0],
                vec![0.0, 1.0, 0.0, 1.0],
                vec![1.0, 1.0, 1.0, 1.0],
            ],
            h_l: vec![1.0, 2.0, 2.5],
            binary_y_indices: vec![0, 1],
            y2_bounds: vec![(0.0, 1.0), (0.0, 1.0)],
        },
    }
}

/// Coverage-style instance with the table phi(00)=1, phi(10)=phi(01)=phi(11)=2
/// (submodular): lower max y0 + y1 s.t. y0 <= 1, y1 <= x0 + x1.
pub fn coverage_toy() -> BilevelInstance {
    BilevelInstance {
        n_x: 2,
        upper: UpperLevel {
            c_u: vec![1.0, 1.0],
            d_u: vec![-1.0, -1.0],
            a_u: vec![],
            b_u: vec![],
            h_u: vec![],
        },
        lower: LowerLevel {
            d_l: vec![1.0, 1.0],
            a_l: vec![vec![0.0, 0.0], vec![-1.0, -1.0]],
            b_l: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            h_l: vec![1.0, 0.0],
            binary_y_indices: vec![],
            y2_bounds: vec![(0.0, 1.0), (0.0, 1.0)],
        },
    }
}

/// Supermodular table phi = min(x0, x1) as an instance:
/// lower max w s.t. w <= x0, w <= x1, w in [0,1].
pub fn min_toy() -> BilevelInstance {
    BilevelInstance {
        n_x: 2,
        upper: UpperLevel {
            c_u: vec![0.5, 0.5],
            d_u: vec![-1.0],
            a_u: vec![],
            b_u: vec![],
            h_u: vec![],
        },
        lower: LowerLevel {
            d_l: vec![1.0],
            a_l: vec![vec![-1.0, 0.0], vec![0.0, -1.0]],
            b_l: vec![vec![1.0], vec![1.0]],
            h_l: vec![0.0, 0.0],
            binary_y_indices: vec![],
            y2_bounds: vec![(0.0, 1.0)],
        },
    }
}

/// 2x2 max-profit transportation with tender-gated capacities; the value
/// table is phi(00)=0, phi(01)=2, phi(10)=3.5, phi(11)=4.6 (hand-enumerated
/// basic solutions).
pub fn transport_toy() -> BilevelInstance {
    // flows f11, f12, f21, f22; profits 3, 1, 2, 2
    // demand rows: f11+f21 <= 1.0, f12+f22 <= 0.8
    // capacity rows: f11+f12 <= 1.5*x0, f21+f22 <= 1.0*x1
    BilevelInstance {
        n_x: 2,
        upper: UpperLevel {
            c_u: vec![0.0, 0.0],
            d_u: vec![-3.0, -1.0, -2.0, -2.0],
            a_u: vec![],
            b_u: vec![],
            h_u: vec![],
        },
        lower: LowerLevel {
            d_l: vec![3.0, 1.0, 2.0, 2.0],
            a_l: vec![
                vec![0.0, 0.0],
                vec![0.0, 0.0],
                vec![-1.5, 0.0],
                vec![0.0, -1.0],
            ],
            b_l: vec![
                vec![1.0, 0.0, 1.0, 0.0],
                vec![0.0, 1.0, 0.0, 1.0],
                vec![1.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 1.0],
            ],
            h_l: vec![1.0, 0.8, 0.0, 0.0],
            binary_y_indices: vec![],
            y2_bounds: vec![(0.0, 2.0); 4],
        },
    }
}

/// Enumerate all lower-feasible tenders and hand each (with its phi value)
/// to the closure.
pub fn for_each_feasible_x<F>(
    inst: &BilevelInstance,
    cache: &mut crate::model::PhiCache,
    mut f: F,
) where
    F: FnMut(&[u8], f64),
{
    use crate::common::vec_of_bits;
    use crate::model::{eval_phi, Phi};
    for mask in 0u64..(1 << inst.n_x) {
        let x = vec_of_bits(mask, inst.n_x);
        if let Phi::Finite(v) = eval_phi(inst, &x, cache).unwrap() {
            f(&x, v);
        }
    }
}
