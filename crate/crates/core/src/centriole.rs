//! Iterated centrioles `SO(n) ⊃ P₁ ⊃ … ⊃ Pₖ`.
//!
//! `Pₖ` is represented by a chain `J₁..J_{k−1}` and a base point `Jₖ`: it is
//! the component through `Jₖ` of the complex structures anticommuting with
//! the chain. Geodesics from `Jₖ` to `−Jₖ` are `γ(t) = Jₖ·exp(πtA)` with
//! `A` commuting with the chain and anticommuting with `Jₖ`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clifford::{
    commutant_projection, decompose, intertwiner, CliffordSystem, SystemJson, CONSTRUCTION_TOL,
};
use crate::error::{Error, Result};
use crate::liegroup::{expm, skew_spectral, GroupGeodesic};
use crate::linalg::{
    self, frob_dot, identity, max_abs, orthogonality_residual, random_skew, skew_polar, Mat,
};
use crate::pathflow::polygon_energy;

/// Tolerance for membership in a midpoint set.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct CentrioleContext {
    chain: CliffordSystem,
    base: Mat,
}

impl CentrioleContext {
    /// Checks the relations to the construction tolerance.
    pub fn new(chain: CliffordSystem, base: Mat) -> Result<Self> {
        Self::with_tolerance(chain, base, CONSTRUCTION_TOL)
    }

    /// As [`CentrioleContext::new`] with a caller-chosen residual bound, for
    /// contexts recovered from numerical flows.
    pub fn with_tolerance(chain: CliffordSystem, base: Mat, tol: f64) -> Result<Self> {
        let n = chain.n();
        if base.nrows() != n || base.ncols() != n {
            return Err(Error::Dimension(format!(
                "base point is {}x{}, chain acts on dimension {n}",
                base.nrows(),
                base.ncols()
            )));
        }
        chain.extended(base.clone())?.validate(tol)?;
        Ok(Self { chain, base })
    }

    /// The context `P_k` whose chain is all but the last generator of a `Cl_k` system.
    pub fn from_system(s: &CliffordSystem) -> Result<Self> {
        if s.k() == 0 {
            return Err(Error::Precondition("need at least one generator".into()));
        }
        let base = s.generator(s.k() - 1).clone();
        let chain = crate::clifford::restrict(s)?;
        Self::with_tolerance(chain, base, crate::clifford::DECOMPOSITION_TOL)
    }

    pub fn n(&self) -> usize {
        self.chain.n()
    }

    /// Index k of the centriole `P_k`: chain length plus one.
    pub fn k(&self) -> usize {
        self.chain.k() + 1
    }

    pub fn chain(&self) -> &CliffordSystem {
        &self.chain
    }

    pub fn base(&self) -> &Mat {
        &self.base
    }

    /// `J₁..J_{k−1}, Jₖ` as a `Clₖ` system.
    pub fn system(&self) -> CliffordSystem {
        self.chain
            .extended(self.base.clone())
            .expect("shapes checked at construction")
    }

    pub fn in_midpoint_set(&self, j: &Mat) -> bool {
        let n = self.n();
        if j.nrows() != n || j.ncols() != n {
            return false;
        }
        if orthogonality_residual(j) > MEMBERSHIP_TOL || max_abs(&(j * j + identity(n))) > MEMBERSHIP_TOL {
            return false;
        }
        self.chain
            .generators()
            .iter()
            .all(|g| max_abs(&(j * g + g * j)) <= MEMBERSHIP_TOL)
    }

    /// Orthogonal projection onto the tangent space at the base point:
    /// skew `A` commuting with the chain and anticommuting with the base.
    pub fn tangent_project(&self, x: &Mat) -> Mat {
        let a = commutant_projection(&self.chain, &linalg::skew_part(x));
        (&a + &self.base * &a * &self.base) * 0.5
    }

    /// `Q Jₖ Qᵀ` with `Q = exp(X)` for a random skew `X` commuting with the chain.
    pub fn random_point(&self, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = commutant_projection(&self.chain, &random_skew(self.n(), &mut rng));
        let q = expm(&x);
        &q * &self.base * q.transpose()
    }

    /// Checks that `geo` runs from `Jₖ` to `−Jₖ` inside `Pₖ` and reports
    /// whether its velocity has all rotation angles `±1`.
    pub fn minimality_test(&self, geo: &GroupGeodesic) -> Result<Minimality> {
        if max_abs(&(geo.at(0.0) - &self.base)) > 1e-8 || max_abs(&(geo.at(1.0) + &self.base)) > 1e-8 {
            return Err(Error::InvalidInput("geodesic endpoints are not (J_k, −J_k)".into()));
        }
        for i in 1..=8 {
            let t = i as f64 / 9.0;
            if !self.in_midpoint_set(&geo.at(t)) {
                return Err(Error::InvalidInput(format!("geodesic leaves the centriole at t = {t:.3}")));
            }
        }
        let spec = geo.spectral();
        let minimal = spec.kernel_dim == 0 && spec.angles.iter().all(|a| (a - 1.0).abs() < 1e-6);
        Ok(Minimality {
            minimal,
            angles: spec.angles.clone(),
            kernel_dim: spec.kernel_dim,
        })
    }

    /// True when the next step `k + 1 ≡ 3 (mod 4)`, where the two
    /// inequivalent `Cl_{k+1}` modules make the angle signs matter.
    pub fn is_signed_case(&self) -> bool {
        (self.k() + 1) % 4 == 3
    }

    /// Complex structure `J₁⋯J_{k−1}` that reads off signed angles in the signed case.
    pub fn orientation(&self) -> Mat {
        crate::clifford::volume_element(&self.chain)
    }

    /// Splits `ℝⁿ` into irreducible `Cl_{k+1}` modules of a geodesic velocity.
    ///
    /// On each eigenspace of `A²` with angle `a`, `J′ = A/a` is a complex
    /// structure and `(J₁, …, Jₖ, JₖJ′)` is a `Cl_{k+1}` system.
    pub fn velocity_modules(&self, a: &Mat) -> Result<Vec<VelocityModule>> {
        let spec = skew_spectral(a)?;
        if spec.kernel_dim > 0 {
            return Err(Error::InvalidInput("velocity has a kernel; endpoints are not antipodal".into()));
        }
        let orient = self.is_signed_case().then(|| self.orientation());
        let mut out = Vec::new();
        let mut start = 0;
        while start < spec.angles.len() {
            let angle = spec.angles[start];
            let mut end = start + 1;
            while end < spec.angles.len() && (spec.angles[end] - angle).abs() < 1e-6 {
                end += 1;
            }
            let w = spec.frame.columns(2 * start, 2 * (end - start)).into_owned();
            let aw = w.transpose() * a * &w;
            let jprime = skew_polar(&aw);
            let mut gens: Vec<Mat> = self
                .system()
                .generators()
                .iter()
                .map(|g| w.transpose() * g * &w)
                .collect();
            let last = &gens[gens.len() - 1] * &jprime;
            gens.push(last);
            let local = CliffordSystem::new(w.ncols(), gens)?;
            for summand in decompose(&local)?.summands {
                let basis = &w * &summand.basis;
                let restricted = basis.transpose() * a * &basis;
                let m = basis.ncols() as f64;
                let signed = match &orient {
                    Some(o) => -(&restricted * (basis.transpose() * o * &basis)).trace() / m,
                    None => angle,
                };
                out.push(VelocityModule { basis, angle, signed_angle: signed });
            }
            start = end;
        }
        Ok(out)
    }

    /// Builds the corner-cutting deformation for modules `j`, `h` of a
    /// geodesic from `Jₖ` to `−Jₖ`.
    ///
    /// A rotation `B` commuting with `J₁..Jₖ` that swaps `V_j` and `V_h`
    /// conjugates `γ` into a second geodesic `γ_u` meeting `γ` at `t = 1/b`.
    /// The returned path follows `γ`, cuts the corner at `1/b` by a chord,
    /// and finishes along `γ_u`.
    pub fn cut_corner(&self, geo: &GroupGeodesic, j: usize, h: usize) -> Result<CutCorner> {
        self.minimality_test(geo)?;
        let modules = self.velocity_modules(geo.velocity())?;
        if j == h || j >= modules.len() || h >= modules.len() {
            return Err(Error::InvalidInput(format!(
                "module pair ({j}, {h}) out of range for {} modules",
                modules.len()
            )));
        }
        let (vj, vh) = (&modules[j], &modules[h]);
        if vj.dim() != vh.dim() {
            return Err(Error::Precondition("modules of different dimension".into()));
        }
        let signed = self.is_signed_case();
        let b = if signed {
            (vj.signed_angle - vh.signed_angle) / 2.0
        } else {
            (vj.angle + vh.angle) / 2.0
        };
        let b = b.abs().round();
        if b < 2.0 {
            return Err(Error::Precondition(format!("b = {b}: no corner to cut")));
        }

        let sys = self.system();
        let a = geo.velocity();
        let local = |basis: &Mat, flip: f64| -> Vec<Mat> {
            let mut gens: Vec<Mat> = sys.generators().iter().map(|g| basis.transpose() * g * basis).collect();
            if !signed {
                let jp = skew_polar(&(basis.transpose() * a * basis)) * flip;
                let last = &gens[gens.len() - 1] * jp;
                gens.push(last);
            }
            gens
        };
        let pairs: Vec<(Mat, Mat)> = local(&vj.basis, 1.0).into_iter().zip(local(&vh.basis, -1.0)).collect();
        let phi = (0..4)
            .find_map(|s| intertwiner(&pairs, 0xc0c0 + s))
            .ok_or_else(|| Error::NonConvergence("no module isomorphism found".into()))?;
        let lift = &vh.basis * phi * vj.basis.transpose();
        let rot = expm(&((&lift - lift.transpose()) * (PI / 2.0)));
        let other = GroupGeodesic::new(self.base.clone(), &rot * a * rot.transpose())?;

        let nb = b as usize;
        let steps = 64 * nb;
        let corner = 64;
        let half = 16;
        let dt = 1.0 / steps as f64;
        let start = geo.at((corner - half) as f64 * dt);
        let finish = other.at((corner + half) as f64 * dt);
        let chord = GroupGeodesic::between(&start, &finish)?;
        let path: Vec<Mat> = (0..=steps)
            .map(|i| {
                if i <= corner - half {
                    geo.at(i as f64 * dt)
                } else if i < corner + half {
                    chord.at((i - (corner - half)) as f64 / (2 * half) as f64)
                } else {
                    other.at(i as f64 * dt)
                }
            })
            .collect();
        let geodesic_energy = polygon_energy(&geo.sample(steps))?;
        let cut_energy = polygon_energy(&path)?;
        Ok(CutCorner {
            b: nb,
            corner_time: 1.0 / b,
            geodesic_energy,
            cut_energy,
            path,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Minimality {
    pub minimal: bool,
    pub angles: Vec<f64>,
    pub kernel_dim: usize,
}

/// An irreducible `Cl_{k+1}` summand of a geodesic velocity.
#[derive(Clone, Debug)]
pub struct VelocityModule {
    pub basis: Mat,
    /// Rotation angle magnitude of the velocity on this module.
    pub angle: f64,
    /// Angle with sign read in the orientation structure; equals `angle`
    /// outside the signed case.
    pub signed_angle: f64,
}

impl VelocityModule {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

#[derive(Clone, Debug)]
pub struct CutCorner {
    pub b: usize,
    pub corner_time: f64,
    pub geodesic_energy: f64,
    pub cut_energy: f64,
    pub path: Vec<Mat>,
}

/// Combinatorial lower bound for the index of a geodesic from `Jₖ` to `−Jₖ`
/// with odd block angles `angles`.
///
/// When `k + 1 ≢ 3 (mod 4)` this counts pairs with `(|a_j| + |a_h|)/2 ≥ 2`.
/// Otherwise angles are signed, must sum to the degree `c`, and pairs with
/// `|a_j − a_h|/2 ≥ 2` are counted.
pub fn index_lower_bound(angles: &[i64], k: usize, c: i64) -> Result<usize> {
    if let Some(a) = angles.iter().find(|a| a.rem_euclid(2) == 0) {
        return Err(Error::InvalidInput(format!("angle {a} is not odd")));
    }
    let signed = (k + 1) % 4 == 3;
    if signed {
        let sum: i64 = angles.iter().sum();
        if sum != c {
            return Err(Error::InvalidInput(format!("angles sum to {sum}, expected degree {c}")));
        }
    }
    let mut count = 0;
    for (i, &x) in angles.iter().enumerate() {
        for &y in &angles[i + 1..] {
            let b = if signed { (x - y).abs() } else { x.abs() + y.abs() };
            if b >= 4 {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// A test bed for corner cutting: copies of the irreducible `Cl_{k+1}`
/// module with generators `K₁..K_{k+1}`, chain `K₁..K_{k−1}`, base `Kₖ` and
/// velocity `Σ aᵢ J′` with `J′ = −KₖK_{k+1}` on the i-th copy.
pub fn synthetic_geodesic(k: usize, angles: &[i64]) -> Result<(CentrioleContext, GroupGeodesic)> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if angles.is_empty() {
        return Err(Error::InvalidInput("no angles given".into()));
    }
    if let Some(a) = angles.iter().find(|a| a.rem_euclid(2) == 0) {
        return Err(Error::InvalidInput(format!("angle {a} is not odd")));
    }
    let s = crate::clifford::irreducible(k + 1);
    let copies = angles.len();
    let mut total = CliffordSystem::zero(k + 1);
    for _ in 0..copies {
        total = crate::clifford::direct_sum(&total, &s)?;
    }
    let m = s.n();
    let jp_one = -(s.generator(k - 1) * s.generator(k));
    let blocks: Vec<Mat> = angles.iter().map(|&a| &jp_one * a as f64).collect();
    let refs: Vec<&Mat> = blocks.iter().collect();
    let velocity = linalg::block_diag(&refs);
    debug_assert_eq!(velocity.nrows(), m * copies);
    let base = total.generator(k - 1).clone();
    let chain = CliffordSystem::new(total.n(), total.generators()[..k - 1].to_vec())?;
    let ctx = CentrioleContext::new(chain, base.clone())?;
    let geo = GroupGeodesic::new(base, velocity)?;
    Ok((ctx, geo))
}

#[derive(Serialize, Deserialize)]
struct ContextJson {
    chain: SystemJson,
    base: Vec<f64>,
}

impl Serialize for CentrioleContext {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ContextJson {
            chain: SystemJson::from(&self.chain),
            base: linalg::to_row_major(&self.base),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for CentrioleContext {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = ContextJson::deserialize(de)?;
        let chain = CliffordSystem::try_from(j.chain).map_err(D::Error::custom)?;
        let base = linalg::from_row_major(chain.n(), &j.base)
            .ok_or_else(|| D::Error::custom("base has the wrong number of entries"))?;
        CentrioleContext::with_tolerance(chain, base, crate::clifford::DECOMPOSITION_TOL).map_err(D::Error::custom)
    }
}

/// Dimension of the image of the tangent projector, as a trace over an
/// orthonormal basis of skew matrices.
pub fn tangent_dimension(ctx: &CentrioleContext) -> usize {
    let n = ctx.n();
    let mut tr = 0.0;
    for r in 0..n {
        for c in r + 1..n {
            let mut e = Mat::zeros(n, n);
            e[(r, c)] = -std::f64::consts::FRAC_1_SQRT_2;
            e[(c, r)] = std::f64::consts::FRAC_1_SQRT_2;
            tr += frob_dot(&e, &ctx.tangent_project(&e));
        }
    }
    tr.round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::{direct_sum, irreducible, module_sum, restrict, second_irreducible};

    /// Nullity of the constraints `AJᵢ − JᵢA = 0`, `AJₖ + JₖA = 0` on skew matrices.
    fn tangent_dimension_bruteforce(ctx: &CentrioleContext) -> usize {
        let n = ctx.n();
        let mut basis = Vec::new();
        for r in 0..n {
            for c in r + 1..n {
                let mut e = Mat::zeros(n, n);
                e[(r, c)] = -1.0;
                e[(c, r)] = 1.0;
                basis.push(e);
            }
        }
        let gens = ctx.chain().generators();
        let rows = (gens.len() + 1) * n * n;
        let mut m = Mat::zeros(rows, basis.len());
        for (col, e) in basis.iter().enumerate() {
            let mut row = 0;
            let mut push = |x: Mat| {
                for v in x.iter() {
                    m[(row, col)] = *v;
                    row += 1;
                }
            };
            for g in gens {
                push(e * g - g * e);
            }
            push(e * ctx.base() + ctx.base() * e);
        }
        let sv = m.svd(false, false).singular_values;
        basis.len() - sv.iter().filter(|&&x| x > 1e-9).count()
    }

    fn ctx_from(s: &CliffordSystem) -> CentrioleContext {
        CentrioleContext::from_system(s).unwrap()
    }

    #[test]
    fn membership() {
        let ctx = ctx_from(&irreducible(2));
        assert!(ctx.in_midpoint_set(ctx.base()));
        assert!(ctx.in_midpoint_set(&-ctx.base()));
        assert!(!ctx.in_midpoint_set(&identity(4)));
        assert!(!ctx.in_midpoint_set(ctx.chain().generator(0)));
    }

    #[test]
    fn rejects_bad_base() {
        let s = irreducible(2);
        let chain = restrict(&s).unwrap();
        assert!(CentrioleContext::new(chain.clone(), chain.generator(0).clone()).is_err());
        assert!(CentrioleContext::new(chain, identity(3)).is_err());
    }

    #[test]
    fn projector_is_idempotent_and_self_adjoint() {
        let ctx = ctx_from(&module_sum(2, 2, 0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_skew(8, &mut rng);
        let y = random_skew(8, &mut rng);
        let px = ctx.tangent_project(&x);
        assert!(max_abs(&(ctx.tangent_project(&px) - &px)) < 1e-12);
        assert!((frob_dot(&px, &y) - frob_dot(&x, &ctx.tangent_project(&y))).abs() < 1e-10);
        assert!(max_abs(&(&px * ctx.base() + ctx.base() * &px)) < 1e-10);
        let g = ctx.chain().generator(0);
        assert!(max_abs(&(&px * g - g * &px)) < 1e-10);
        // anything commuting with the base is killed
        assert!(max_abs(&ctx.tangent_project(ctx.base())) < 1e-12);
    }

    #[test]
    fn tangent_dimensions() {
        // P₁ = SO(2m)/U(m)
        for m in 2..=4 {
            let ctx = ctx_from(&module_sum(1, m, 0).unwrap());
            assert_eq!(tangent_dimension(&ctx), m * m - m);
            assert_eq!(tangent_dimension_bruteforce(&ctx), m * m - m);
        }
        // P₂ = U(m)/Sp(m/2) with n = 2m
        for p in [2, 4] {
            let ctx = ctx_from(&module_sum(2, p, 0).unwrap());
            let m = 2 * p;
            assert_eq!(tangent_dimension(&ctx), m * (m - 1) / 2);
            assert_eq!(tangent_dimension_bruteforce(&ctx), m * (m - 1) / 2);
        }
        // P₃ through ρ(S₄)^p: quaternionic Grassmannian of dimension 4p²
        for p in [1, 2] {
            let mut s = CliffordSystem::zero(4);
            for _ in 0..p {
                s = direct_sum(&s, &irreducible(4)).unwrap();
            }
            let ctx = ctx_from(&restrict(&s).unwrap());
            assert_eq!(tangent_dimension(&ctx), 4 * p * p);
            assert_eq!(tangent_dimension_bruteforce(&ctx), 4 * p * p);
        }
    }

    #[test]
    fn random_points() {
        let ctx = ctx_from(&module_sum(2, 2, 0).unwrap());
        assert_eq!(ctx.random_point(4), ctx.random_point(4));
        let pts: Vec<Mat> = (0..100).map(|s| ctx.random_point(s)).collect();
        for p in &pts {
            assert!(ctx.in_midpoint_set(p));
            for g in ctx.chain().generators() {
                assert!(max_abs(&(p * g + g * p)) < 1e-9);
            }
        }
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                assert!(max_abs(&(&pts[i] - &pts[j])) > 1e-6);
            }
        }
    }

    #[test]
    fn minimality_reports() {
        let (ctx, geo) = synthetic_geodesic(1, &[1, 1]).unwrap();
        assert!(ctx.minimality_test(&geo).unwrap().minimal);
        let (ctx, geo) = synthetic_geodesic(1, &[3, 1]).unwrap();
        let rep = ctx.minimality_test(&geo).unwrap();
        assert!(!rep.minimal);
        assert!((rep.angles[0] - 3.0).abs() < 1e-9);
        let (ctx, geo) = synthetic_geodesic(2, &[1, -1]).unwrap();
        assert!(ctx.minimality_test(&geo).unwrap().minimal);
        // endpoints must be antipodal
        let bad = GroupGeodesic::new(ctx.base().clone(), Mat::zeros(ctx.n(), ctx.n())).unwrap();
        assert!(matches!(ctx.minimality_test(&bad), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn index_bounds() {
        assert_eq!(index_lower_bound(&[1, 1, 1, 1], 1, 0).unwrap(), 0);
        assert_eq!(index_lower_bound(&[3, 1, 1, 1], 1, 0).unwrap(), 3);
        assert!(index_lower_bound(&[3, -1], 2, 2).unwrap() >= 1);
        assert_eq!(index_lower_bound(&[1, -1, 1], 2, 1).unwrap(), 0);
        assert!(matches!(index_lower_bound(&[2, 1], 1, 0), Err(Error::InvalidInput(_))));
        assert!(matches!(index_lower_bound(&[3, -1], 2, 0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn velocity_modules_of_synthetic() {
        let (ctx, geo) = synthetic_geodesic(2, &[3, -1]).unwrap();
        let mods = ctx.velocity_modules(geo.velocity()).unwrap();
        assert_eq!(mods.len(), 2);
        let mut signed: Vec<f64> = mods.iter().map(|m| m.signed_angle).collect();
        signed.sort_by(f64::total_cmp);
        // one orientation convention or the other, but the gap is 4
        assert!((signed[1] - signed[0] - 4.0).abs() < 1e-8);
    }

    #[test]
    fn corner_cutting_lowers_energy() {
        let (ctx, geo) = synthetic_geodesic(1, &[3, 1]).unwrap();
        let cut = ctx.cut_corner(&geo, 0, 1).unwrap();
        assert_eq!(cut.b, 2);
        assert!((cut.corner_time - 0.5).abs() < 1e-12);
        assert!(cut.cut_energy < cut.geodesic_energy);
        assert_eq!(cut.path.first(), Some(ctx.base()));
        assert!(max_abs(&(cut.path.last().unwrap() + ctx.base())) < 1e-9);

        let (ctx5, geo5) = synthetic_geodesic(1, &[5, 1]).unwrap();
        let cut5 = ctx5.cut_corner(&geo5, 0, 1).unwrap();
        assert_eq!(cut5.b, 3);
        assert!((cut5.corner_time - 1.0 / 3.0).abs() < 1e-12);
        assert!(cut5.geodesic_energy - cut5.cut_energy > cut.geodesic_energy - cut.cut_energy);

        let (ctx1, geo1) = synthetic_geodesic(1, &[1, 1]).unwrap();
        assert!(matches!(ctx1.cut_corner(&geo1, 0, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn corner_cutting_signed_case() {
        let (ctx, geo) = synthetic_geodesic(2, &[3, -1]).unwrap();
        assert!(ctx.is_signed_case());
        let cut = ctx.cut_corner(&geo, 0, 1).unwrap();
        assert_eq!(cut.b, 2);
        assert!(cut.cut_energy < cut.geodesic_energy);
        // equal signs in the signed case give no corner
        let (ctx, geo) = synthetic_geodesic(2, &[3, 1]).unwrap();
        assert!(ctx.cut_corner(&geo, 0, 1).is_err());
    }

    #[test]
    fn corner_cutting_with_repeated_angles() {
        let (ctx, geo) = synthetic_geodesic(2, &[-5, -3, 3, 3]).unwrap();
        let mods = ctx.velocity_modules(geo.velocity()).unwrap();
        let mut cuts = 0;
        for j in 0..mods.len() {
            for h in j + 1..mods.len() {
                if let Ok(c) = ctx.cut_corner(&geo, j, h) {
                    assert!(c.cut_energy < c.geodesic_energy, "pair ({j}, {h})");
                    cuts += 1;
                }
            }
        }
        assert_eq!(cuts, index_lower_bound(&[-5, -3, 3, 3], 2, -2).unwrap());
    }

    #[test]
    fn cut_path_stays_in_centriole() {
        let (ctx, geo) = synthetic_geodesic(3, &[3, 1]).unwrap();
        let cut = ctx.cut_corner(&geo, 0, 1).unwrap();
        for p in cut.path.iter().step_by(8) {
            assert!(ctx.in_midpoint_set(p));
        }
    }

    #[test]
    fn mixed_module_context() {
        let s = direct_sum(&irreducible(3), &second_irreducible(3).unwrap()).unwrap();
        let ctx = ctx_from(&s);
        assert_eq!(ctx.k(), 3);
        assert!(ctx.in_midpoint_set(&ctx.random_point(2)));
    }

    #[test]
    fn json_roundtrip() {
        let ctx = ctx_from(&irreducible(2));
        let v = serde_json::to_value(&ctx).unwrap();
        assert_eq!(v["chain"]["k"], 1);
        assert_eq!(v["base"].as_array().unwrap().len(), 16);
        let back: CentrioleContext = serde_json::from_value(v).unwrap();
        assert_eq!(back, ctx);
    }
}
