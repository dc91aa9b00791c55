//! Quaternion and octonion multiplication on coordinate vectors.
//!
//! Octonions are built from quaternion pairs by Cayley–Dickson doubling with
//! `(a, b)(c, d) = (ac − d̄b, da + bc̄)`. Coordinates are ordered
//! `(1, i, j, k)` for ℍ and `(a₀..a₃, b₀..b₃)` for 𝕆 = ℍ ⊕ ℍ.

use crate::linalg::Mat;

pub type Quat = [f64; 4];
pub type Oct = [f64; 8];

pub fn quat_mul(p: &Quat, q: &Quat) -> Quat {
    let [a1, b1, c1, d1] = *p;
    let [a2, b2, c2, d2] = *q;
    [
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    ]
}

pub fn quat_conj(q: &Quat) -> Quat {
    [q[0], -q[1], -q[2], -q[3]]
}

fn split(x: &Oct) -> (Quat, Quat) {
    ([x[0], x[1], x[2], x[3]], [x[4], x[5], x[6], x[7]])
}

fn join(a: Quat, b: Quat) -> Oct {
    [a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3]]
}

fn quat_add(a: &Quat, b: &Quat) -> Quat {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

fn quat_sub(a: &Quat, b: &Quat) -> Quat {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

pub fn oct_mul(x: &Oct, y: &Oct) -> Oct {
    let (a, b) = split(x);
    let (c, d) = split(y);
    let first = quat_sub(&quat_mul(&a, &c), &quat_mul(&quat_conj(&d), &b));
    let second = quat_add(&quat_mul(&d, &a), &quat_mul(&b, &quat_conj(&c)));
    join(first, second)
}

pub fn oct_conj(x: &Oct) -> Oct {
    let mut out = x.map(|v| -v);
    out[0] = x[0];
    out
}

pub fn quat_unit(i: usize) -> Quat {
    let mut q = [0.0; 4];
    q[i] = 1.0;
    q
}

pub fn oct_unit(i: usize) -> Oct {
    let mut o = [0.0; 8];
    o[i] = 1.0;
    o
}

fn mult_matrix<const D: usize>(f: impl Fn(&[f64; D]) -> [f64; D]) -> Mat {
    let mut m = Mat::zeros(D, D);
    for c in 0..D {
        let mut e = [0.0; D];
        e[c] = 1.0;
        let col = f(&e);
        for r in 0..D {
            m[(r, c)] = col[r];
        }
    }
    m
}

/// Matrix of `x ↦ q·x` on ℍ = ℝ⁴.
pub fn quat_left(q: &Quat) -> Mat {
    mult_matrix::<4>(|x| quat_mul(q, x))
}

/// Matrix of `x ↦ x·q` on ℍ = ℝ⁴.
pub fn quat_right(q: &Quat) -> Mat {
    mult_matrix::<4>(|x| quat_mul(x, q))
}

/// Matrix of `x ↦ v·x` on 𝕆 = ℝ⁸.
pub fn oct_left(v: &Oct) -> Mat {
    mult_matrix::<8>(|x| oct_mul(v, x))
}

/// Matrix of `x ↦ x·v` on 𝕆 = ℝ⁸.
pub fn oct_right(v: &Oct) -> Mat {
    mult_matrix::<8>(|x| oct_mul(x, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &Oct, b: &Oct) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
    }

    #[test]
    fn quaternion_units() {
        let (i, j, k) = (quat_unit(1), quat_unit(2), quat_unit(3));
        assert_eq!(quat_mul(&i, &j), k);
        assert_eq!(quat_mul(&j, &k), i);
        assert_eq!(quat_mul(&k, &i), j);
        assert_eq!(quat_mul(&i, &i), [-1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn octonion_units_square_to_minus_one() {
        for i in 1..8 {
            let e = oct_unit(i);
            let sq = oct_mul(&e, &e);
            assert!(close(&sq, &oct_unit(0).map(|v| -v)), "e{i}² = {sq:?}");
        }
    }

    #[test]
    fn octonions_are_not_associative() {
        let (a, b, c) = (oct_unit(1), oct_unit(2), oct_unit(4));
        let lhs = oct_mul(&oct_mul(&a, &b), &c);
        let rhs = oct_mul(&a, &oct_mul(&b, &c));
        assert!(!close(&lhs, &rhs));
    }

    fn oct_strategy() -> impl Strategy<Value = Oct> {
        proptest::array::uniform8(-2.0f64..2.0)
    }

    proptest! {
        #[test]
        fn alternativity(x in oct_strategy(), y in oct_strategy()) {
            // (xx)y = x(xy) and (yx)x = y(xx)
            prop_assert!(close(&oct_mul(&oct_mul(&x, &x), &y), &oct_mul(&x, &oct_mul(&x, &y))));
            prop_assert!(close(&oct_mul(&oct_mul(&y, &x), &x), &oct_mul(&y, &oct_mul(&x, &x))));
        }

        #[test]
        fn norm_is_multiplicative(x in oct_strategy(), y in oct_strategy()) {
            let n = |v: &Oct| v.iter().map(|a| a * a).sum::<f64>();
            prop_assert!((n(&oct_mul(&x, &y)) - n(&x) * n(&y)).abs() < 1e-8 * (1.0 + n(&x) * n(&y)));
        }

        #[test]
        fn conjugate_reverses_products(x in oct_strategy(), y in oct_strategy()) {
            let lhs = oct_conj(&oct_mul(&x, &y));
            let rhs = oct_mul(&oct_conj(&y), &oct_conj(&x));
            prop_assert!(close(&lhs, &rhs));
        }
    }
}
