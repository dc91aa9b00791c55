//! Dense matrix helpers shared by every module.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub type Mat = DMatrix<f64>;

pub fn identity(n: usize) -> Mat {
    Mat::identity(n, n)
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// `max |AᵀA − I|`.
pub fn orthogonality_residual(m: &Mat) -> f64 {
    let n = m.nrows();
    max_abs(&(m.transpose() * m - identity(n)))
}

pub fn skew_residual(m: &Mat) -> f64 {
    max_abs(&(m + m.transpose()))
}

pub fn is_square(m: &Mat) -> bool {
    m.nrows() == m.ncols()
}

/// Frobenius inner product `trace(AᵀB)`.
pub fn frob_dot(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn skew_part(m: &Mat) -> Mat {
    (m - m.transpose()) * 0.5
}

pub fn sym_part(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Symmetric eigendecomposition with eigenvalues sorted in decreasing order.
/// Columns of the returned matrix are the matching unit eigenvectors.
pub fn sym_eigen_desc(s: &Mat) -> (Vec<f64>, Mat) {
    let n = s.nrows();
    if n == 0 {
        return (Vec::new(), Mat::zeros(0, 0));
    }
    let sym = sym_part(s);
    let f = faer::Mat::<f64>::from_fn(n, n, |i, j| sym[(i, j)]);
    let eig = f
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigendecomposition of a finite matrix");
    let (vals, vecs) = (eig.S().column_vector(), eig.U());
    // ascending from the solver
    let values = (0..n).rev().map(|i| vals[i]).collect();
    let out = Mat::from_fn(n, n, |i, j| vecs[(i, n - 1 - j)]);
    (values, out)
}

/// Applies `f` to the eigenvalues of a symmetric matrix.
pub fn sym_fn(s: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let (vals, vecs) = sym_eigen_desc(s);
    let n = s.nrows();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let fj = f(vals[j]);
        for i in 0..n {
            scaled[(i, j)] *= fj;
        }
    }
    scaled * vecs.transpose()
}

/// Orthogonal polar factor of a skew matrix: `Y (−Y²)^{-1/2}`. When `Y` is
/// invertible the result is a complex structure with the same commutation
/// pattern as `Y`.
pub fn skew_polar(y: &Mat) -> Mat {
    let s = -(y * y);
    let inv_sqrt = sym_fn(&s, |l| if l > 0.0 { 1.0 / l.sqrt() } else { 0.0 });
    skew_part(&(y * inv_sqrt))
}

pub fn random_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn random_skew<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat {
    skew_part(&random_gaussian(n, n, rng))
}

pub fn random_symmetric<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat {
    sym_part(&random_gaussian(n, n, rng))
}

pub fn block_diag(blocks: &[&Mat]) -> Mat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        let d = b.nrows();
        out.view_mut((off, off), (d, d)).copy_from(*b);
        off += d;
    }
    out
}

/// Orthonormalizes `v` against the columns already in `basis`, returning the
/// unit remainder when it is longer than `min_norm`.
pub fn orthonormalize_against(basis: &[nalgebra::DVector<f64>], v: &nalgebra::DVector<f64>, min_norm: f64) -> Option<nalgebra::DVector<f64>> {
    let mut w = v.clone();
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&w);
            w.axpy(-c, b, 1.0);
        }
    }
    let norm = w.norm();
    (norm > min_norm).then(|| w / norm)
}

pub fn columns_to_mat(n: usize, cols: &[nalgebra::DVector<f64>]) -> Mat {
    let mut m = Mat::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

/// Row-major flattening used by every JSON shape.
pub fn to_row_major(m: &Mat) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn from_row_major(n: usize, data: &[f64]) -> Option<Mat> {
    (data.len() == n * n).then(|| Mat::from_row_slice(n, n, data))
}

/// Standard complex structure on ℝⁿ (n even): pairs `(2i, 2i+1)` rotated by π/2.
pub fn standard_complex_structure(n: usize) -> Mat {
    assert!(n % 2 == 0, "complex structure needs even dimension");
    let mut j = Mat::zeros(n, n);
    for b in 0..n / 2 {
        j[(2 * b + 1, 2 * b)] = 1.0;
        j[(2 * b, 2 * b + 1)] = -1.0;
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_symmetric(6, &mut rng);
        let (vals, vecs) = sym_eigen_desc(&s);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let d = Mat::from_diagonal(&nalgebra::DVector::from_vec(vals));
        assert!(max_abs(&(&vecs * d * vecs.transpose() - &s)) < 1e-12);
    }

    #[test]
    fn polar_of_scaled_structure_is_structure() {
        let j = standard_complex_structure(4);
        let p = skew_polar(&(&j * 3.5));
        assert!(max_abs(&(p - j)) < 1e-14);
    }

    #[test]
    fn row_major_roundtrip() {
        let m = Mat::from_fn(3, 3, |i, j| (3 * i + j) as f64);
        let flat = to_row_major(&m);
        assert_eq!(flat[1], 1.0);
        assert_eq!(from_row_major(3, &flat).unwrap(), m);
    }
}
