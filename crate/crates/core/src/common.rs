//! Shared numeric utilities: the global tolerance set, comparison helpers,
//! vector lattice operations and positive/negative parts.

/// Tolerances used across the crate. Every epsilon in the codebase routes
/// through this single definition so they stay auditable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Primal/dual feasibility of LP solutions.
    pub feas: f64,
    /// Integrality of fractional parts in branch-and-bound.
    pub int: f64,
    /// Minimum violation for a lazy cut to be accepted as separating.
    pub cut_violation: f64,
    /// Near-exact equality (tightness checks).
    pub equality: f64,
}

pub const TOL: Tolerances = Tolerances {
    feas: 1e-7,
    int: 1e-6,
    cut_violation: 1e-6,
    equality: 1e-9,
};

/// `a == b` within `tol`.
pub fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// `a <= b` within `tol`.
pub fn leq(a: f64, b: f64, tol: f64) -> bool {
    a <= b + tol
}

/// Whether `v` is integral up to the integrality tolerance.
pub fn is_integral(v: f64, tol: f64) -> bool {
    (v - v.round()).abs() <= tol
}

/// Elementwise maximum of two vectors.
pub fn lattice_join(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "lattice_join: length mismatch");
    a.iter().zip(b).map(|(&x, &y)| x.max(y)).collect()
}

/// Elementwise minimum of two vectors.
pub fn lattice_meet(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "lattice_meet: length mismatch");
    a.iter().zip(b).map(|(&x, &y)| x.min(y)).collect()
}

/// Elementwise max(v, 0).
pub fn pos_part(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}

/// Elementwise min(v, 0).
pub fn neg_part(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.min(0.0)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Binary vector as a bitmask, lowest index in the lowest bit.
pub fn bits_of(x: &[u8]) -> u64 {
    assert!(x.len() <= 63);
    x.iter()
        .enumerate()
        .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i))
}

/// Inverse of [`bits_of`].
pub fn vec_of_bits(bits: u64, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((bits >> i) & 1) as u8).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn join_meet_examples() {
        assert_eq!(lattice_join(&[1.0, 0.0], &[0.0, 1.0]), vec![1.0, 1.0]);
        assert_eq!(lattice_meet(&[1.0, 0.0], &[0.0, 1.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn pos_neg_parts() {
        assert_eq!(pos_part(&[-2.0]), vec![0.0]);
        assert_eq!(neg_part(&[-2.0]), vec![-2.0]);
        assert_eq!(pos_part(&[3.0, -1.0, 0.0]), vec![3.0, 0.0, 0.0]);
    }

    #[test]
    fn bitmask_round_trip() {
        let x = vec![1u8, 0, 1, 1];
        assert_eq!(vec_of_bits(bits_of(&x), 4), x);
        assert_eq!(bits_of(&x), 0b1101);
    }

    proptest! {
        #[test]
        fn lattice_laws(a in proptest::collection::vec(-1e6f64..1e6, 1..8)) {
            // idempotence
            prop_assert_eq!(lattice_join(&a, &a), a.clone());
            prop_assert_eq!(lattice_meet(&a, &a), a.clone());
        }

        #[test]
        fn absorption(
            a in proptest::collection::vec(-1e6f64..1e6, 4),
            b in proptest::collection::vec(-1e6f64..1e6, 4),
        ) {
            // a ∨ (a ∧ b) = a and a ∧ (a ∨ b) = a, exactly on floats
            prop_assert_eq!(lattice_join(&a, &lattice_meet(&a, &b)), a.clone());
            prop_assert_eq!(lattice_meet(&a, &lattice_join(&a, &b)), a.clone());
        }

        #[test]
        fn parts_split(v in proptest::collection::vec(-1e6f64..1e6, 1..8)) {
            let p = pos_part(&v);
            let n = neg_part(&v);
            for i in 0..v.len() {
                prop_assert_eq!(p[i] + n[i], v[i]);
                prop_assert!(p[i] >= 0.0 && n[i] <= 0.0);
            }
        }
    }
}
