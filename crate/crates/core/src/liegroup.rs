//! The orthogonal group: skew spectral decomposition, exponential and
//! logarithm, geodesics, the Frobenius distance and determinant winding.
//!
//! Geodesics are parametrized as `γ(t) = base · exp(π t A)`, so integer
//! rotation angles of `A` correspond to `γ(1) = ±I` blocks.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    columns_to_mat, frob_dot, identity, max_abs, orthogonality_residual, orthonormalize_against,
    skew_part, skew_residual, sym_eigen_desc, Mat,
};

/// Angle below which a rotation block is treated as part of the kernel,
/// relative to the largest angle (or 1 for small matrices).
const KERNEL_REL: f64 = 1e-12;
/// Angles below this fraction of the current largest are resolved after deflation.
const DEFLATE_REL: f64 = 1e-4;
/// Largest principal angle [`logm`] accepts.
pub const BRANCH_LIMIT: f64 = PI - 1e-9;

/// `A = Q · blockdiag(a₁R, …, a_rR, 0) · Qᵀ` with `R = [[0, −1], [1, 0]]`.
///
/// Columns `2j, 2j+1` of `frame` span the j-th invariant plane; the remaining
/// columns span the kernel. Angles are positive and non-increasing.
#[derive(Clone, Debug)]
pub struct SkewSpectral {
    pub frame: Mat,
    pub angles: Vec<f64>,
    pub kernel_dim: usize,
}

impl SkewSpectral {
    pub fn n(&self) -> usize {
        self.frame.nrows()
    }

    /// Orthonormal pair `(u, v)` with `A u = a v`, `A v = −a u`.
    pub fn plane(&self, j: usize) -> (DVector<f64>, DVector<f64>) {
        (
            self.frame.column(2 * j).into_owned(),
            self.frame.column(2 * j + 1).into_owned(),
        )
    }

    /// `Q · blockdiag(R(s·aⱼ), I) · Qᵀ`, i.e. `exp(s·A)`.
    pub fn exp_scaled(&self, s: f64) -> Mat {
        let n = self.n();
        let mut inner = identity(n);
        for (j, &a) in self.angles.iter().enumerate() {
            let (c, sn) = ((s * a).cos(), (s * a).sin());
            let b = 2 * j;
            inner[(b, b)] = c;
            inner[(b, b + 1)] = -sn;
            inner[(b + 1, b)] = sn;
            inner[(b + 1, b + 1)] = c;
        }
        &self.frame * inner * self.frame.transpose()
    }

    pub fn reconstruct(&self) -> Mat {
        let mut acc = Mat::zeros(self.n(), self.n());
        for (j, &a) in self.angles.iter().enumerate() {
            let (u, v) = self.plane(j);
            acc += (&v * u.transpose() - &u * v.transpose()) * a;
        }
        acc
    }
}

/// Block decomposition of a skew matrix.
///
/// Eigenvectors of the symmetric matrix `−A²` are paired greedily: each new
/// eigenvector `u` orthogonal to the planes found so far gives the plane
/// `(u, Au/a)`. Angles far below the largest one are resolved by deflating
/// onto the orthogonal complement and repeating.
pub fn skew_spectral(a: &Mat) -> Result<SkewSpectral> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!("{}x{} is not square", n, a.ncols())));
    }
    let scale = max_abs(a).max(1.0);
    if skew_residual(a) > 1e-10 * scale {
        return Err(Error::InvalidInput(format!(
            "matrix is not skew-symmetric (residual {:.3e})",
            skew_residual(a)
        )));
    }
    let a = skew_part(a);
    let floor = KERNEL_REL * spectral_radius(&a).max(1.0);

    let mut planes: Vec<(DVector<f64>, DVector<f64>, f64)> = Vec::new();
    let mut w = identity(n);
    let mut aw = a.clone();
    while aw.ncols() > 0 {
        let (vals, vecs) = sym_eigen_desc(&-(&aw * &aw));
        let top = vals[0].max(0.0).sqrt();
        if top <= floor {
            break;
        }
        let cut = (DEFLATE_REL * top).max(floor);
        let dim = aw.ncols();
        let mut local: Vec<DVector<f64>> = Vec::with_capacity(dim);
        let before = planes.len();
        for (i, &lam) in vals.iter().enumerate() {
            if lam.max(0.0).sqrt() <= cut {
                break;
            }
            let Some(u) = orthonormalize_against(&local, &vecs.column(i).into_owned(), 0.1) else {
                continue;
            };
            let au = &aw * &u;
            let norm = au.norm();
            local.push(u.clone());
            match orthonormalize_against(&local, &(au / norm), 0.5) {
                Some(v) => {
                    planes.push((&w * &u, &w * &v, norm));
                    local.push(v);
                }
                None => {
                    local.pop();
                }
            }
        }
        if planes.len() == before {
            break;
        }
        let paired = local.len();
        let mut rest = local;
        for i in (0..dim).rev() {
            if rest.len() == dim {
                break;
            }
            if let Some(x) = orthonormalize_against(&rest, &vecs.column(i).into_owned(), 0.1) {
                rest.push(x);
            }
        }
        complete_basis(&mut rest, dim);
        let comp = columns_to_mat(dim, &rest[paired..]);
        aw = comp.transpose() * &aw * &comp;
        w = &w * comp;
    }

    let mut order: Vec<usize> = (0..planes.len()).collect();
    order.sort_by(|&x, &y| planes[y].2.total_cmp(&planes[x].2).then(x.cmp(&y)));
    let mut cols = Vec::with_capacity(n);
    for &j in &order {
        cols.push(planes[j].0.clone());
        cols.push(planes[j].1.clone());
    }
    cols.extend(w.column_iter().map(|c| c.into_owned()));
    Ok(SkewSpectral {
        frame: columns_to_mat(n, &cols),
        angles: order.iter().map(|&j| planes[j].2).collect(),
        kernel_dim: w.ncols(),
    })
}

fn spectral_radius(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let (vals, _) = sym_eigen_desc(&-(a * a));
    vals[0].max(0.0).sqrt()
}

fn complete_basis(basis: &mut Vec<DVector<f64>>, dim: usize) {
    for i in 0..dim {
        if basis.len() == dim {
            return;
        }
        let e = DVector::from_fn(dim, |r, _| if r == i { 1.0 } else { 0.0 });
        if let Some(x) = orthonormalize_against(basis, &e, 0.1) {
            basis.push(x);
        }
    }
}

/// Matrix exponential of the skew part of `a`, assembled from exact rotation
/// blocks.
pub fn expm(a: &Mat) -> Mat {
    let a = skew_part(a);
    match skew_spectral(&a) {
        Ok(s) => s.exp_scaled(1.0),
        Err(_) => unreachable!("skew part always decomposes"),
    }
}

/// `exp(θJ) = cos θ·I + sin θ·J` for a complex structure `J`.
pub fn expm_complex(theta: f64, j: &Mat) -> Mat {
    identity(j.nrows()) * theta.cos() + j * theta.sin()
}

/// Principal logarithm of a rotation in spectral form: the frame of the
/// invariant planes and the rotation angles `θⱼ ∈ (0, π)`.
///
/// Computed from the Cayley transform `C = (R − I)(R + I)⁻¹`, whose block
/// angles are `tan(θ/2)`; this stays accurate for small angles.
pub fn log_spectral(r: &Mat) -> Result<SkewSpectral> {
    let n = r.nrows();
    if r.ncols() != n {
        return Err(Error::Dimension(format!("{}x{} is not square", n, r.ncols())));
    }
    let orth = orthogonality_residual(r);
    if orth > 1e-8 {
        return Err(Error::InvalidInput(format!("matrix is not orthogonal (residual {orth:.3e})")));
    }
    let id = identity(n);
    let Some(inv) = (r + &id).lu().try_inverse() else {
        return Err(Error::Branch("rotation has eigenvalue −1".into()));
    };
    let c = skew_part(&((r - &id) * inv));
    let mut spec = skew_spectral(&c)?;
    for t in spec.angles.iter_mut() {
        let theta = 2.0 * t.atan();
        if !theta.is_finite() || theta > BRANCH_LIMIT {
            return Err(Error::Branch(format!("rotation angle {theta:.12} at the branch cut")));
        }
        *t = theta;
    }
    Ok(spec)
}

/// Principal logarithm of a rotation. Fails with [`Error::Branch`] when
/// an angle reaches π.
pub fn logm(r: &Mat) -> Result<Mat> {
    Ok(log_spectral(r)?.reconstruct())
}

/// `P · exp(½ log(PᵀQ))`.
pub fn geodesic_midpoint(p: &Mat, q: &Mat) -> Result<Mat> {
    Ok(p * log_spectral(&(p.transpose() * q))?.exp_scaled(0.5))
}

/// Frobenius norm of `log(PᵀQ)`.
pub fn distance(p: &Mat, q: &Mat) -> Result<f64> {
    Ok(squared_distance(p, q)?.sqrt())
}

pub fn squared_distance(p: &Mat, q: &Mat) -> Result<f64> {
    let spec = log_spectral(&(p.transpose() * q))?;
    Ok(2.0 * spec.angles.iter().map(|a| a * a).sum::<f64>())
}

/// `γ(t) = base · exp(π t A)`.
#[derive(Clone, Debug)]
pub struct GroupGeodesic {
    base: Mat,
    velocity: Mat,
    spectral: SkewSpectral,
}

impl GroupGeodesic {
    pub fn new(base: Mat, velocity: Mat) -> Result<Self> {
        if base.nrows() != velocity.nrows() || base.ncols() != velocity.ncols() {
            return Err(Error::Dimension("base and velocity differ in size".into()));
        }
        if orthogonality_residual(&base) > 1e-8 {
            return Err(Error::InvalidInput("geodesic base is not orthogonal".into()));
        }
        let spectral = skew_spectral(&velocity)?;
        let velocity = skew_part(&velocity);
        Ok(Self { base, velocity, spectral })
    }

    /// The principal geodesic from `p` to `q`.
    pub fn between(p: &Mat, q: &Mat) -> Result<Self> {
        let a = logm(&(p.transpose() * q))? / PI;
        Self::new(p.clone(), a)
    }

    pub fn base(&self) -> &Mat {
        &self.base
    }

    pub fn velocity(&self) -> &Mat {
        &self.velocity
    }

    pub fn spectral(&self) -> &SkewSpectral {
        &self.spectral
    }

    pub fn at(&self, t: f64) -> Mat {
        &self.base * self.spectral.exp_scaled(PI * t)
    }

    /// Continuous energy `∫₀¹ |γ'|² = π² ‖A‖²` on `[0, 1]`.
    pub fn energy(&self) -> f64 {
        PI * PI * frob_dot(&self.velocity, &self.velocity)
    }

    pub fn sample(&self, n: usize) -> Vec<Mat> {
        (0..=n).map(|i| self.at(i as f64 / n as f64)).collect()
    }
}

/// Rounds angles to odd integers; `None` if any is farther than `tol` from one.
pub fn odd_integer_angles(angles: &[f64], tol: f64) -> Option<Vec<i64>> {
    angles
        .iter()
        .map(|&a| {
            let r = a.round();
            ((a - r).abs() <= tol && (r as i64).rem_euclid(2) == 1).then_some(r as i64)
        })
        .collect()
}

/// Block angles of a skew `A` commuting with the complex structure `j`,
/// signed by orientation in `j`: eigenvalues of the symmetric `−A·J`,
/// one per complex line, in non-increasing order.
pub fn signed_angles(a: &Mat, j: &Mat) -> Vec<f64> {
    let s = crate::linalg::sym_part(&-(a * j));
    let (vals, _) = sym_eigen_desc(&s);
    vals.chunks(2).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
}

/// Orthonormal basis `b₁..b_m` such that `{b₁, Jb₁, …, b_m, Jb_m}` is an
/// orthonormal real basis.
pub fn complex_basis(j: &Mat) -> Vec<DVector<f64>> {
    let n = j.nrows();
    let mut real: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(n / 2);
    for i in 0..n {
        let e = DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 });
        if let Some(b) = orthonormalize_against(&real, &e, 0.1) {
            let jb = j * &b;
            real.push(b.clone());
            real.push(jb);
            out.push(b);
        }
        if real.len() >= n {
            break;
        }
    }
    out
}

/// Determinant of `m` as a complex-linear map in the structure `j`.
pub fn complex_det(m: &Mat, j: &Mat, basis: &[DVector<f64>]) -> Complex64 {
    let dim = basis.len();
    let jb: Vec<DVector<f64>> = basis.iter().map(|b| j * b).collect();
    let mut c = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
    for col in 0..dim {
        let mb = m * &basis[col];
        for row in 0..dim {
            c[(row, col)] = Complex64::new(basis[row].dot(&mb), jb[row].dot(&mb));
        }
    }
    c.determinant()
}

/// Winding number of the complex determinant along a closed loop of
/// matrices commuting with the complex structure `j`.
///
/// Each argument step must stay below π/2; coarser loops are rejected as
/// unresolved.
pub fn det_winding(path: &[Mat], j: &Mat) -> Result<i64> {
    let n = j.nrows();
    if path.len() < 2 {
        return Err(Error::InvalidInput("loop needs at least two samples".into()));
    }
    if max_abs(&(j * j + identity(n))) > 1e-8 || orthogonality_residual(j) > 1e-8 {
        return Err(Error::InvalidInput("J_o is not a complex structure".into()));
    }
    for (i, m) in path.iter().enumerate() {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Dimension(format!("loop entry {i} has the wrong size")));
        }
        if max_abs(&(m * j - j * m)) > 1e-8 {
            return Err(Error::InvalidInput(format!("loop entry {i} does not commute with J_o")));
        }
    }
    if max_abs(&(&path[0] - &path[path.len() - 1])) > 1e-8 {
        return Err(Error::InvalidInput("loop is not closed".into()));
    }
    let basis = complex_basis(j);
    let dets: Vec<Complex64> = path.iter().map(|m| complex_det(m, j, &basis)).collect();
    let mut total = 0.0;
    for w in dets.windows(2) {
        if w[0].norm() < 1e-12 || w[1].norm() < 1e-12 {
            return Err(Error::InvalidInput("singular loop entry".into()));
        }
        let step = (w[1] / w[0]).arg();
        if step.abs() >= PI / 2.0 {
            return Err(Error::Resolution(format!(
                "argument step {step:.3} too large; refine the loop"
            )));
        }
        total += step;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_skew;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Scaling and squaring with a degree-18 Taylor polynomial.
    fn expm_oracle(a: &Mat) -> Mat {
        let norm = a.norm();
        let s = if norm > 0.25 { (norm / 0.25).log2().ceil() as i32 } else { 0 };
        let x = a / 2f64.powi(s);
        let n = a.nrows();
        let mut term = identity(n);
        let mut sum = identity(n);
        for k in 1..=18 {
            term = &term * &x / k as f64;
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    fn rot2(theta: f64) -> Mat {
        Mat::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
    }

    fn r2() -> Mat {
        Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
    }

    #[test]
    fn spectral_of_zero_and_single_block() {
        let s = skew_spectral(&Mat::zeros(5, 5)).unwrap();
        assert_eq!((s.angles.len(), s.kernel_dim), (0, 5));
        let s = skew_spectral(&(r2() * PI)).unwrap();
        assert_eq!(s.angles.len(), 1);
        assert!((s.angles[0] - PI).abs() < 1e-12);
        assert!(skew_spectral(&identity(2)).is_err());
    }

    #[test]
    fn spectral_random_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [3, 8, 9, 16] {
            let a = random_skew(n, &mut rng);
            let s = skew_spectral(&a).unwrap();
            assert!(max_abs(&(s.reconstruct() - &a)) < 1e-10, "n = {n}");
            assert!(orthogonality_residual(&s.frame) < 1e-10);
            // independent check: eigenvalues of the symmetric −A² via nalgebra
            let mut ev: Vec<f64> = (-(&a * &a)).symmetric_eigen().eigenvalues.iter().copied().collect();
            ev.sort_by(|x, y| y.total_cmp(x));
            for (j, ang) in s.angles.iter().enumerate() {
                assert!((ang * ang - ev[2 * j]).abs() < 1e-9);
                assert!((ang * ang - ev[2 * j + 1]).abs() < 1e-9);
            }
            assert!(s.angles.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn spectral_degenerate_angles() {
        // 8×8 with angle 1 of multiplicity 4, rotated
        let j = crate::linalg::standard_complex_structure(8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q = expm(&random_skew(8, &mut rng));
        let a = &q * &j * q.transpose();
        let s = skew_spectral(&a).unwrap();
        assert_eq!(s.angles.len(), 4);
        assert!(max_abs(&(s.reconstruct() - &a)) < 1e-10);
    }

    #[test]
    fn expm_examples() {
        assert_eq!(expm(&Mat::zeros(3, 3)), identity(3));
        assert!(max_abs(&(expm(&(r2() * PI)) + identity(2))) < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [2, 5, 8, 12] {
            let a = random_skew(n, &mut rng);
            assert!(max_abs(&(expm(&a) - expm_oracle(&a))) < 1e-10, "n = {n}");
        }
    }

    #[test]
    fn logm_examples() {
        assert_eq!(logm(&identity(4)).unwrap(), Mat::zeros(4, 4));
        assert!(matches!(logm(&-identity(2)), Err(Error::Branch(_))));
        assert!(matches!(logm(&-identity(3)), Err(Error::Branch(_))));
        let small = rot2(1e-9);
        assert!((logm(&small).unwrap()[(1, 0)] - 1e-9).abs() < 1e-20);
        assert!(matches!(logm(&Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn logm_inverts_expm_below_branch() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in [4, 7, 16, 33] {
            let a = random_skew(n, &mut rng);
            let s = skew_spectral(&a).unwrap();
            let a = a * (0.9 * PI / s.angles[0]);
            assert!(max_abs(&(logm(&expm(&a)).unwrap() - &a)) < 1e-9, "n = {n}");
        }
    }

    #[test]
    fn midpoint_and_distance() {
        let p = rot2(0.3);
        assert!(max_abs(&(geodesic_midpoint(&p, &p).unwrap() - &p)) < 1e-14);
        let m = geodesic_midpoint(&identity(2), &rot2(1.2)).unwrap();
        assert!(max_abs(&(m - rot2(0.6))) < 1e-14);
        // d(I, −I) = π√2, approached from inside the branch
        let d = distance(&identity(2), &rot2(PI - 1e-7)).unwrap();
        assert!((d - (PI - 1e-7) * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(distance(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn winding_examples() {
        let j = r2();
        let constant = vec![rot2(0.4); 10];
        assert_eq!(det_winding(&constant, &j).unwrap(), 0);
        let lp: Vec<Mat> = (0..=16).map(|i| rot2(2.0 * PI * i as f64 / 16.0)).collect();
        assert_eq!(det_winding(&lp, &j).unwrap(), 1);
        let coarse: Vec<Mat> = (0..=3).map(|i| rot2(2.0 * PI * i as f64 / 3.0)).collect();
        assert!(matches!(det_winding(&coarse, &j), Err(Error::Resolution(_))));
        // signed angles (6, −2), trace(A)/i = 4 → winding 2
        let big = crate::linalg::standard_complex_structure(4);
        let mut a = big.clone();
        a.view_mut((0, 0), (2, 2)).scale_mut(6.0);
        a.view_mut((2, 2), (2, 2)).scale_mut(-2.0);
        let g = GroupGeodesic::new(identity(4), a).unwrap();
        assert_eq!(det_winding(&g.sample(64), &big).unwrap(), 2);
    }

    #[test]
    fn geodesic_between_recovers_endpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = expm(&random_skew(6, &mut rng));
        let q = expm(&(random_skew(6, &mut rng) * 0.3));
        let g = GroupGeodesic::between(&p, &q).unwrap();
        assert!(max_abs(&(g.at(1.0) - &q)) < 1e-10);
        assert!(max_abs(&(g.at(0.0) - &p)) < 1e-12);
        let d = distance(&p, &q).unwrap();
        assert!((g.energy() - d * d).abs() < 1e-9);
    }

    #[test]
    fn odd_rounding() {
        assert_eq!(odd_integer_angles(&[1.0, 3.0 + 1e-7], 1e-6), Some(vec![1, 3]));
        assert_eq!(odd_integer_angles(&[2.0], 1e-6), None);
        assert_eq!(odd_integer_angles(&[1.1], 1e-6), None);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn expm_is_special_orthogonal(seed in 0u64..10_000, n in 1usize..12, scale in 0.1f64..20.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = expm(&(random_skew(n, &mut rng) * scale));
            prop_assert!(orthogonality_residual(&r) < 1e-10);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn distance_bi_invariant(seed in 0u64..10_000, n in 2usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = expm(&random_skew(n, &mut rng));
            let q = &p * expm(&(random_skew(n, &mut rng) * 0.2));
            let g = expm(&random_skew(n, &mut rng));
            let d = distance(&p, &q).unwrap();
            prop_assert!((distance(&(&g * &p), &(&g * &q)).unwrap() - d).abs() < 1e-9);
            prop_assert!((distance(&(&p * &g), &(&q * &g)).unwrap() - d).abs() < 1e-9);
            prop_assert!((distance(&q, &p).unwrap() - d).abs() < 1e-9);
        }

        #[test]
        fn midpoint_equidistant(seed in 0u64..10_000, n in 2usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = expm(&random_skew(n, &mut rng));
            let q = &p * expm(&(random_skew(n, &mut rng) * 0.3));
            let m = geodesic_midpoint(&p, &q).unwrap();
            let (a, b) = (distance(&p, &m).unwrap(), distance(&m, &q).unwrap());
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!((a + b - distance(&p, &q).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn triangle_inequality(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = expm(&(random_skew(4, &mut rng) * 0.2));
            let q = expm(&(random_skew(4, &mut rng) * 0.2));
            let r = expm(&(random_skew(4, &mut rng) * 0.2));
            let pq = distance(&p, &q).unwrap();
            let qr = distance(&q, &r).unwrap();
            let pr = distance(&p, &r).unwrap();
            prop_assert!(pr <= pq + qr + 1e-9);
        }
    }
}
