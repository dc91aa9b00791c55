//! Real Clifford systems: explicit irreducible modules, direct sums,
//! restriction, isotypic decomposition and the class in 𝒜ₖ.
//!
//! A Clifford system on ℝⁿ is a list of orthogonal matrices `J₁..Jₖ` with
//! `Jᵢ² = −I` and `JᵢJⱼ = −JⱼJᵢ` for `i ≠ j`, i.e. a real `Clₖ`-module.
//!
//! Irreducible modules are built from ℂ (k = 1), left quaternion
//! multiplication (k = 2, 3), left octonion multiplication restricted to the
//! first k imaginary units (k = 4..7), the map `v ↦ ((x, y) ↦ (v·y, −v̄·x))`
//! on 𝕆² (k = 8), and tensoring with the k = 8 module beyond that.
//!
//! For `k ≡ 3 (mod 4)` there are two irreducibles. They are told apart by the
//! volume element `J₁⋯Jₖ`, which acts as `±I` on each of them. The summand on
//! which the volume element acts with the same sign as on [`irreducible`]`(k)`
//! is counted in `p`; the other one (built by [`second_irreducible`]) in `q`.
//! With left multiplication on ℍ this means `J₁J₂J₃ = −I` labels `S₃`.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::division::{oct_conj, oct_left, oct_right, oct_unit, quat_left, quat_right, quat_unit};
use crate::error::{Error, Result};
use crate::linalg::{
    self, frob_dot, identity, max_abs, orthogonality_residual, random_skew, random_symmetric,
    skew_polar, sym_eigen_desc, Mat,
};

/// Residual bound for explicitly constructed systems.
pub const CONSTRUCTION_TOL: f64 = 1e-10;
/// Residual bound for decomposition and extension results.
pub const DECOMPOSITION_TOL: f64 = 1e-8;

const BASE_DIMS: [usize; 9] = [1, 2, 4, 4, 8, 8, 8, 8, 16];

/// Dimension `m_k` of an irreducible real `Clₖ`-module.
pub fn irreducible_dim(k: usize) -> usize {
    if k <= 8 {
        BASE_DIMS[k]
    } else {
        16 * irreducible_dim(k - 8)
    }
}

/// True when `Clₖ` has two non-isomorphic irreducible modules.
pub fn has_two_irreducibles(k: usize) -> bool {
    k % 4 == 3
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliffordSystem {
    k: usize,
    n: usize,
    generators: Vec<Mat>,
}

impl CliffordSystem {
    /// Wraps generators after checking shapes. Relations are not checked here;
    /// see [`CliffordSystem::relation_residual`] and [`CliffordSystem::validate`].
    pub fn new(n: usize, generators: Vec<Mat>) -> Result<Self> {
        for (i, g) in generators.iter().enumerate() {
            if g.nrows() != n || g.ncols() != n {
                return Err(Error::Dimension(format!(
                    "generator {} is {}x{}, expected {n}x{n}",
                    i + 1,
                    g.nrows(),
                    g.ncols()
                )));
            }
        }
        Ok(Self {
            k: generators.len(),
            n,
            generators,
        })
    }

    /// The zero-dimensional `Clₖ`-module.
    pub fn zero(k: usize) -> Self {
        Self {
            k,
            n: 0,
            generators: vec![Mat::zeros(0, 0); k],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[Mat] {
        &self.generators
    }

    pub fn generator(&self, i: usize) -> &Mat {
        &self.generators[i]
    }

    /// Largest entry of `JᵢᵀJᵢ − I`, `Jᵢ² + I` and `JᵢJⱼ + JⱼJᵢ` over all generators.
    pub fn relation_residual(&self) -> f64 {
        let id = identity(self.n);
        let mut worst = 0.0_f64;
        for (i, a) in self.generators.iter().enumerate() {
            worst = worst.max(orthogonality_residual(a));
            worst = worst.max(max_abs(&(a * a + &id)));
            for b in &self.generators[i + 1..] {
                worst = worst.max(max_abs(&(a * b + b * a)));
            }
        }
        worst
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let r = self.relation_residual();
        if r > tol {
            return Err(Error::InvalidInput(format!(
                "Clifford relations violated: residual {r:.3e} > {tol:.1e}"
            )));
        }
        Ok(())
    }

    /// Conjugates every generator by an orthogonal matrix `q`: `Jᵢ ↦ q Jᵢ qᵀ`.
    pub fn conjugate(&self, q: &Mat) -> Self {
        let generators = self.generators.iter().map(|j| q * j * q.transpose()).collect();
        Self { generators, ..self.clone() }
    }

    /// Generators restricted to the span of the orthonormal columns of `basis`.
    /// The span must be invariant; this is not checked.
    pub fn compress(&self, basis: &Mat) -> Self {
        let generators = self
            .generators
            .iter()
            .map(|j| basis.transpose() * j * basis)
            .collect();
        Self {
            k: self.k,
            n: basis.ncols(),
            generators,
        }
    }

    /// Appends one more generator, e.g. an extension witness.
    pub fn extended(&self, next: Mat) -> Result<Self> {
        let mut generators = self.generators.clone();
        generators.push(next);
        Self::new(self.n, generators)
    }
}

/// Left multiplication by `1, e₁, …, e₇` turned into the eight generators on 𝕆².
fn cl8() -> Vec<Mat> {
    let mut out = Vec::with_capacity(8);
    for u in 0..8 {
        let v = oct_unit(u);
        let lv = oct_left(&v);
        let lvbar = oct_left(&oct_conj(&v));
        let mut j = Mat::zeros(16, 16);
        j.view_mut((0, 8), (8, 8)).copy_from(&lv);
        j.view_mut((8, 0), (8, 8)).copy_from(&(-lvbar));
        out.push(j);
    }
    out
}

/// `S ⊗ S₈` as a `Cl_{k+8}`-module: `Jᵢ ⊗ Ω` followed by `I ⊗ Kⱼ`, where
/// `K₁..K₈` generate `S₈` and `Ω = K₁⋯K₈` (Ω² = I, Ω anticommutes with each Kⱼ).
fn tensor_with_s8(base: &CliffordSystem) -> CliffordSystem {
    let k8 = cl8();
    let omega = k8.iter().fold(identity(16), |acc, g| acc * g);
    let id = identity(base.n);
    let mut gens: Vec<Mat> = base.generators.iter().map(|j| j.kronecker(&omega)).collect();
    gens.extend(k8.iter().map(|kj| id.kronecker(kj)));
    CliffordSystem {
        k: base.k + 8,
        n: base.n * 16,
        generators: gens,
    }
}

/// The irreducible `Clₖ`-module `Sₖ` of dimension [`irreducible_dim`]`(k)`.
pub fn irreducible(k: usize) -> CliffordSystem {
    let (n, generators) = match k {
        0 => (1, Vec::new()),
        1 => (2, vec![linalg::standard_complex_structure(2)]),
        2 | 3 => (4, (1..=k).map(|i| quat_left(&quat_unit(i))).collect()),
        4..=7 => (8, (1..=k).map(|i| oct_left(&oct_unit(i))).collect()),
        8 => (16, cl8()),
        _ => return tensor_with_s8(&irreducible(k - 8)),
    };
    CliffordSystem { k, n, generators }
}

/// The second irreducible module `Sₖ′` for `k ≡ 3 (mod 4)`: right
/// multiplication on ℍ or 𝕆, tensored with `S₈` for larger k.
pub fn second_irreducible(k: usize) -> Result<CliffordSystem> {
    if !has_two_irreducibles(k) {
        return Err(Error::Precondition(format!(
            "k = {k}: a second irreducible module exists only for k ≡ 3 mod 4"
        )));
    }
    Ok(match k {
        3 => CliffordSystem {
            k,
            n: 4,
            generators: (1..=3).map(|i| quat_right(&quat_unit(i))).collect(),
        },
        7 => CliffordSystem {
            k,
            n: 8,
            generators: (1..=7).map(|i| oct_right(&oct_unit(i))).collect(),
        },
        _ => tensor_with_s8(&second_irreducible(k - 8)?),
    })
}

/// Block-diagonal sum of two systems with the same k.
pub fn direct_sum(s: &CliffordSystem, t: &CliffordSystem) -> Result<CliffordSystem> {
    if s.k != t.k {
        return Err(Error::Dimension(format!(
            "direct sum of Cl_{} and Cl_{} modules",
            s.k, t.k
        )));
    }
    let generators = s
        .generators
        .iter()
        .zip(&t.generators)
        .map(|(a, b)| linalg::block_diag(&[a, b]))
        .collect();
    Ok(CliffordSystem {
        k: s.k,
        n: s.n + t.n,
        generators,
    })
}

/// `p·Sₖ ⊕ q·Sₖ′`. `q` must be zero unless `k ≡ 3 (mod 4)`.
pub fn module_sum(k: usize, p: usize, q: usize) -> Result<CliffordSystem> {
    if q > 0 && !has_two_irreducibles(k) {
        return Err(Error::Precondition(format!(
            "k = {k} has a single irreducible module; q must be 0"
        )));
    }
    let mut out = CliffordSystem::zero(k);
    if p > 0 {
        let s = irreducible(k);
        for _ in 0..p {
            out = direct_sum(&out, &s)?;
        }
    }
    if q > 0 {
        let s = second_irreducible(k)?;
        for _ in 0..q {
            out = direct_sum(&out, &s)?;
        }
    }
    Ok(out)
}

/// Forgets the last generator, turning a `Cl_{k+1}`-module into a `Clₖ`-module.
pub fn restrict(s: &CliffordSystem) -> Result<CliffordSystem> {
    if s.k == 0 {
        return Err(Error::Precondition("cannot restrict a Cl_0 module".into()));
    }
    let mut generators = s.generators.clone();
    generators.pop();
    Ok(CliffordSystem {
        k: s.k - 1,
        n: s.n,
        generators,
    })
}

/// The product `J₁⋯Jₖ` (identity for k = 0).
pub fn volume_element(s: &CliffordSystem) -> Mat {
    s.generators.iter().fold(identity(s.n), |acc, g| acc * g)
}

/// Sign with which the volume element acts on [`irreducible`]`(k)`,
/// for `k ≡ 3 (mod 4)`. It only depends on `k mod 8`.
pub fn chirality(k: usize) -> f64 {
    debug_assert!(has_two_irreducibles(k));
    let base = irreducible(k % 8);
    volume_element(&base)[(0, 0)].signum()
}

/// Projects `x` onto the matrices commuting with every generator by composing
/// the averaging maps `X ↦ ½(X − JᵢXJᵢ)`.
pub fn commutant_projection(s: &CliffordSystem, x: &Mat) -> Mat {
    s.generators
        .iter()
        .fold(x.clone(), |acc, j| (&acc - j * &acc * j) * 0.5)
}

/// Projects `x` onto the matrices anticommuting with every generator,
/// composing `X ↦ ½(X + JᵢXJᵢ)`.
pub fn anticommutant_projection(s: &CliffordSystem, x: &Mat) -> Mat {
    s.generators
        .iter()
        .fold(x.clone(), |acc, j| (&acc + j * &acc * j) * 0.5)
}

/// Dimension of the commutant `{X : XJᵢ = JᵢX}` from the character formula
/// `2⁻ᵏ Σ_I trace(J_I)²` over all ordered monomials `J_I`.
///
/// Costs `2ᵏ` matrix products; intended for `k ≤ 12`.
pub fn commutant_dimension(s: &CliffordSystem) -> usize {
    fn walk(s: &CliffordSystem, start: usize, prod: &Mat, acc: &mut f64) {
        let t = prod.trace();
        *acc += t * t;
        for i in start..s.k {
            let next = prod * &s.generators[i];
            walk(s, i + 1, &next, acc);
        }
    }
    let mut acc = 0.0;
    walk(s, 0, &identity(s.n), &mut acc);
    (acc / f64::powi(2.0, s.k as i32)).round() as usize
}

/// One irreducible invariant summand of a module.
#[derive(Clone, Debug)]
pub struct Summand {
    /// Orthonormal basis, one column per dimension.
    pub basis: Mat,
    /// True for a copy of `Sₖ′` (only possible when `k ≡ 3 mod 4`).
    pub prime: bool,
}

#[derive(Clone, Debug)]
pub struct IsotypicDecomposition {
    pub k: usize,
    pub p: usize,
    pub q: usize,
    pub summands: Vec<Summand>,
}

impl IsotypicDecomposition {
    /// Largest residual `‖(I − UUᵀ) J U‖` over summands and generators.
    pub fn invariance_residual(&self, s: &CliffordSystem) -> f64 {
        let id = identity(s.n);
        let mut worst = 0.0_f64;
        for summand in &self.summands {
            let u = &summand.basis;
            let proj = &id - u * u.transpose();
            for j in &s.generators {
                worst = worst.max(max_abs(&(&proj * j * u)));
            }
        }
        worst
    }
}

/// Splits a module into irreducible summands.
///
/// A generic symmetric element of the commutant is diagonalized; each of its
/// eigenspaces is one irreducible summand of dimension `m_k`. For
/// `k ≡ 3 (mod 4)` summands are labelled by the sign of the volume element.
pub fn decompose(s: &CliffordSystem) -> Result<IsotypicDecomposition> {
    s.validate(DECOMPOSITION_TOL)?;
    let k = s.k;
    if s.n == 0 {
        return Ok(IsotypicDecomposition { k, p: 0, q: 0, summands: Vec::new() });
    }
    let m = irreducible_dim(k);
    if s.n % m != 0 {
        return Err(Error::InvalidInput(format!(
            "dimension {} is not a multiple of m_{k} = {m}",
            s.n
        )));
    }
    let vol = has_two_irreducibles(k).then(|| volume_element(s));
    let sign = if has_two_irreducibles(k) { chirality(k) } else { 1.0 };

    for attempt in 0..8u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + attempt);
        let h = commutant_projection(s, &random_symmetric(s.n, &mut rng));
        let (_, vecs) = sym_eigen_desc(&h);
        let mut summands = Vec::with_capacity(s.n / m);
        let mut ok = true;
        for chunk in 0..s.n / m {
            let basis = vecs.columns(chunk * m, m).into_owned();
            let prime = match &vol {
                Some(w) => {
                    let t = (basis.transpose() * w * &basis).trace() / m as f64;
                    if (t.abs() - 1.0).abs() > 1e-6 {
                        ok = false;
                        break;
                    }
                    t.signum() != sign
                }
                None => false,
            };
            summands.push(Summand { basis, prime });
        }
        if !ok {
            continue;
        }
        let q = summands.iter().filter(|x| x.prime).count();
        let dec = IsotypicDecomposition {
            k,
            p: summands.len() - q,
            q,
            summands,
        };
        if dec.invariance_residual(s) <= DECOMPOSITION_TOL {
            return Ok(dec);
        }
    }
    Err(Error::NonConvergence(
        "could not separate irreducible summands".into(),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassKind {
    Z,
    Z2,
    Zero,
}

/// Group 𝒜ₖ by residue of k mod 8.
pub fn class_kind(k: usize) -> ClassKind {
    match k % 8 {
        0 | 1 => ClassKind::Z2,
        3 | 7 => ClassKind::Z,
        _ => ClassKind::Zero,
    }
}

/// An element of 𝒜ₖ = ℳₖ / ρ(ℳ_{k+1}). Serialized as `{kind, value}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ModuleClass {
    #[serde(skip)]
    pub k: usize,
    pub kind: ClassKind,
    /// Integer for ℤ, 0 or 1 for ℤ₂, `None` for the trivial group.
    pub value: Option<i64>,
}

impl ModuleClass {
    pub fn from_multiplicities(k: usize, p: usize, q: usize) -> Self {
        let kind = class_kind(k);
        let value = match kind {
            ClassKind::Z2 => Some((p % 2) as i64),
            ClassKind::Z => Some(p as i64 - q as i64),
            ClassKind::Zero => None,
        };
        Self { k, kind, value }
    }

    pub fn is_zero(&self) -> bool {
        self.value.unwrap_or(0) == 0
    }

    /// Group sum; both classes must live in the same 𝒜ₖ.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.k != other.k {
            return Err(Error::Dimension("classes from different k".into()));
        }
        let value = match self.kind {
            ClassKind::Z2 => Some((self.value.unwrap_or(0) + other.value.unwrap_or(0)).rem_euclid(2)),
            ClassKind::Z => Some(self.value.unwrap_or(0) + other.value.unwrap_or(0)),
            ClassKind::Zero => None,
        };
        Ok(Self { value, ..*self })
    }
}

impl std::fmt::Display for ModuleClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.kind, self.value) {
            (ClassKind::Z, Some(v)) => write!(f, "{v} ∈ Z"),
            (ClassKind::Z2, Some(v)) => write!(f, "{v} ∈ Z2"),
            _ => write!(f, "0"),
        }
    }
}

pub fn class_in_ak(s: &CliffordSystem) -> Result<ModuleClass> {
    let dec = decompose(s)?;
    Ok(ModuleClass::from_multiplicities(s.k, dec.p, dec.q))
}

#[derive(Clone, Debug)]
pub struct Extension {
    pub extendible: bool,
    /// A complex structure anticommuting with all generators, when one exists.
    pub witness: Option<Mat>,
}

/// Decides whether a further orthogonal complex structure anticommuting with
/// every generator exists.
///
/// The anticommuting skew matrices form a linear space. A module extends iff
/// that space contains an invertible element, in which case a generic element
/// `Y` is invertible and its polar factor `Y(−Y²)^{-1/2}` is a witness.
pub fn is_extendible(s: &CliffordSystem) -> Result<Extension> {
    s.validate(DECOMPOSITION_TOL)?;
    if s.n == 0 {
        return Ok(Extension { extendible: true, witness: Some(Mat::zeros(0, 0)) });
    }
    if s.n % 2 == 1 {
        return Ok(Extension { extendible: false, witness: None });
    }
    for attempt in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xe87e_0000 + attempt);
        let y = anticommutant_projection(s, &random_skew(s.n, &mut rng));
        let scale = max_abs(&y);
        if scale < 1e-12 {
            // the anticommuting space is zero
            return Ok(Extension { extendible: false, witness: None });
        }
        let y = y / scale;
        let (vals, _) = sym_eigen_desc(&-(&y * &y));
        let (hi, lo) = (vals[0], vals[vals.len() - 1]);
        if lo > 1e-8 * hi {
            let w = skew_polar(&y);
            let ext = s.extended(w.clone())?;
            if ext.relation_residual() <= DECOMPOSITION_TOL {
                return Ok(Extension { extendible: true, witness: Some(w) });
            }
        }
    }
    Ok(Extension { extendible: false, witness: None })
}

/// Solves for an orthogonal map `Φ: ℝᵐ → ℝᵐ` with `Φ Aᵢ = Bᵢ Φ` for every
/// pair `(Aᵢ, Bᵢ)` of orthogonal complex structures. Returns `None` when the
/// constraints only admit zero.
///
/// Between irreducible modules the solution space is a division algebra, so
/// a generic solution is a multiple of an orthogonal map.
pub fn intertwiner(pairs: &[(Mat, Mat)], seed: u64) -> Option<Mat> {
    let m = pairs.first().map(|(a, _)| a.nrows())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // ½(X − B X A) projects onto {XA = BX} since A⁻¹ = −A
    let x = pairs.iter().fold(linalg::random_gaussian(m, m, &mut rng), |acc, (a, b)| {
        (&acc - b * &acc * a) * 0.5
    });
    let scale = (frob_dot(&x, &x) / m as f64).sqrt();
    if scale < 1e-10 {
        return None;
    }
    let gram = x.transpose() * &x;
    let inv_sqrt = linalg::sym_fn(&gram, |l| if l > 1e-14 { 1.0 / l.sqrt() } else { 0.0 });
    let phi = &x * inv_sqrt;
    if orthogonality_residual(&phi) > 1e-8 {
        return None;
    }
    let worst = pairs
        .iter()
        .map(|(a, b)| max_abs(&(&phi * a - b * &phi)))
        .fold(0.0, f64::max);
    (worst < 1e-8).then_some(phi)
}

/// Orthonormal basis of the span of `vectors`, dropping dependent ones.
pub fn orthonormal_span(n: usize, vectors: &[DVector<f64>]) -> Mat {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        if let Some(u) = linalg::orthonormalize_against(&basis, v, 1e-8) {
            basis.push(u);
        }
    }
    linalg::columns_to_mat(n, &basis)
}

/// JSON shape `{k, n, generators: [row-major arrays]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemJson {
    pub k: usize,
    pub n: usize,
    pub generators: Vec<Vec<f64>>,
}

impl From<&CliffordSystem> for SystemJson {
    fn from(s: &CliffordSystem) -> Self {
        Self {
            k: s.k,
            n: s.n,
            generators: s.generators.iter().map(linalg::to_row_major).collect(),
        }
    }
}

impl TryFrom<SystemJson> for CliffordSystem {
    type Error = Error;

    fn try_from(j: SystemJson) -> Result<Self> {
        if j.generators.len() != j.k {
            return Err(Error::InvalidInput(format!(
                "k = {} but {} generators given",
                j.k,
                j.generators.len()
            )));
        }
        let gens = j
            .generators
            .iter()
            .map(|g| {
                linalg::from_row_major(j.n, g).ok_or_else(|| {
                    Error::InvalidInput(format!("generator has {} entries, expected {}", g.len(), j.n * j.n))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        CliffordSystem::new(j.n, gens)
    }
}

impl Serialize for CliffordSystem {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        SystemJson::from(self).serialize(ser)
    }
}

impl<'de> Deserialize<'de> for CliffordSystem {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let j = SystemJson::deserialize(de)?;
        CliffordSystem::try_from(j).map_err(serde::de::Error::custom)
    }
}
