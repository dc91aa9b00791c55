//! Birkhoff curve shortening in SO(n), for single paths and for families of
//! meridians over recursive sphere grids.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::centriole::CentrioleContext;
use crate::clifford::commutant_projection;
use crate::error::{Error, Result};
use crate::liegroup::{
    expm, log_spectral, logm, odd_integer_angles, skew_spectral, squared_distance, GroupGeodesic,
};
use crate::linalg::{self, identity, max_abs, orthogonality_residual, random_skew, skew_polar, Mat};

/// Flow parameters shared by single-path and family flows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Samples per meridian of a sphere grid.
    #[serde(rename = "T")]
    pub grid_t: usize,
    /// Points per shortened path, minus one.
    #[serde(rename = "N")]
    pub path_n: usize,
    /// Stop when one sweep lowers the energy by less than this fraction.
    pub tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            grid_t: 64,
            path_n: 64,
            tol: 1e-9,
            max_sweeps: 20_000,
            seed: 0x0b07_7000,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_t < 2 || self.grid_t % 2 == 1 {
            return Err(Error::InvalidInput(format!("T = {} must be even and at least 2", self.grid_t)));
        }
        if self.path_n < 2 || self.path_n % 2 == 1 {
            return Err(Error::InvalidInput(format!("N = {} must be even and at least 2", self.path_n)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput("tol must be positive".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidInput("max_sweeps must be positive".into()));
        }
        Ok(())
    }
}

/// A polygon `x₀, …, x_N` of orthogonal matrices with fixed endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePath {
    points: Vec<Mat>,
}

impl DiscretePath {
    pub fn new(points: Vec<Mat>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput("a path needs at least two points".into()));
        }
        let n = points[0].nrows();
        for (i, p) in points.iter().enumerate() {
            if p.nrows() != n || p.ncols() != n {
                return Err(Error::Dimension(format!("point {i} is not {n}x{n}")));
            }
            let r = orthogonality_residual(p);
            if r > 1e-8 {
                return Err(Error::InvalidInput(format!("point {i} is not orthogonal (residual {r:.2e})")));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Mat] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Mat> {
        self.points
    }

    /// Number of segments N.
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.points[0].nrows()
    }

    /// `N · Σ d(xᵢ, xᵢ₊₁)²`.
    pub fn energy(&self) -> Result<f64> {
        polygon_energy(&self.points)
    }

    pub fn length(&self) -> Result<f64> {
        self.points
            .windows(2)
            .map(|w| Ok(squared_distance(&w[0], &w[1])?.sqrt()))
            .sum()
    }

    /// Largest rotation angle of a single step.
    pub fn max_step_angle(&self) -> Result<f64> {
        max_step_angle(&self.points)
    }
}

/// Discrete energy `N · Σ d(xᵢ, xᵢ₊₁)²` of a polygon with N segments.
pub fn polygon_energy(points: &[Mat]) -> Result<f64> {
    let n = points.len().saturating_sub(1) as f64;
    let sum: f64 = points
        .windows(2)
        .map(|w| squared_distance(&w[0], &w[1]))
        .sum::<Result<f64>>()?;
    Ok(n * sum)
}

fn max_step_angle(points: &[Mat]) -> Result<f64> {
    let mut worst = 0.0_f64;
    for w in points.windows(2) {
        let spec = log_spectral(&(w[0].transpose() * &w[1]))?;
        worst = worst.max(spec.angles.first().copied().unwrap_or(0.0));
    }
    Ok(worst)
}

/// One Birkhoff sweep: odd interior points move to the geodesic midpoint of
/// their neighbours, then even ones. The result never has larger energy than
/// the input; if rounding would make it so, the input is returned unchanged.
pub fn birkhoff_sweep(path: &DiscretePath) -> Result<DiscretePath> {
    let before = path.energy()?;
    let mut pts = path.points.clone();
    sweep_points(&mut pts)?;
    let after = polygon_energy(&pts)?;
    if after > before {
        return Ok(path.clone());
    }
    Ok(DiscretePath { points: pts })
}

fn sweep_points(pts: &mut [Mat]) -> Result<()> {
    let last = pts.len() - 1;
    for parity in [1, 0] {
        let mut i = if parity == 1 { 1 } else { 2 };
        while i < last {
            let spec = log_spectral(&(pts[i - 1].transpose() * &pts[i + 1]))?;
            pts[i] = &pts[i - 1] * spec.exp_scaled(0.5);
            i += 2;
        }
    }
    Ok(())
}

/// Result of [`shorten`].
#[derive(Clone, Debug)]
pub struct Shortened {
    pub path: DiscretePath,
    pub geodesic: GroupGeodesic,
    /// Sweeps performed over all resolution levels.
    pub sweeps: usize,
    /// `(N, energy)` after the start of each level and after every sweep.
    pub energies: Vec<(usize, f64)>,
    /// Largest entry of `xᵢ − γ(tᵢ)` against the fitted geodesic.
    pub max_deviation: f64,
}

impl Shortened {
    pub fn final_energy(&self) -> f64 {
        self.energies.last().map(|e| e.1).unwrap_or(0.0)
    }

    /// Rotation angles of the fitted velocity.
    pub fn angles(&self) -> &[f64] {
        &self.geodesic.spectral().angles
    }
}

/// Shortens a path with fixed endpoints to an approximate geodesic.
///
/// The path is first coarsened by dropping every other point while steps
/// stay below π/2, converged on the coarsest level, and then refined by
/// inserting midpoints and converging again on each finer level.
pub fn shorten(path: &DiscretePath, tol: f64, max_sweeps: usize) -> Result<Shortened> {
    let e0 = path.energy()?;
    let trial = birkhoff_sweep(path)?;
    let e1 = trial.energy()?;
    if relative_drop(e0, e1) < tol {
        return finish(path.clone(), 0, vec![(path.steps(), e0)]);
    }

    let mut levels = vec![path.points.clone()];
    loop {
        let cur = levels.last().unwrap();
        let steps = cur.len() - 1;
        if steps % 2 == 1 || steps / 2 < 4 {
            break;
        }
        let coarse: Vec<Mat> = cur.iter().step_by(2).cloned().collect();
        if max_step_angle(&coarse).map_or(true, |a| a >= PI / 2.0) {
            break;
        }
        levels.push(coarse);
    }

    let mut energies = Vec::new();
    let mut sweeps = 0;
    let mut pts = levels.pop().unwrap();
    loop {
        let steps = pts.len() - 1;
        let mut e = polygon_energy(&pts)?;
        energies.push((steps, e));
        loop {
            if sweeps >= max_sweeps {
                return Err(Error::NonConvergence(format!(
                    "no convergence after {sweeps} sweeps (N = {steps}, energy {e:.9})"
                )));
            }
            let mut next = pts.clone();
            sweep_points(&mut next)?;
            let en = polygon_energy(&next)?;
            sweeps += 1;
            if en > e {
                break;
            }
            let drop = relative_drop(e, en);
            pts = next;
            e = en;
            energies.push((steps, e));
            if drop < tol {
                break;
            }
        }
        match levels.pop() {
            None => break,
            Some(original) => {
                // keep the original endpoints bit-identical
                let mut fine = Vec::with_capacity(2 * pts.len() - 1);
                for w in pts.windows(2) {
                    fine.push(w[0].clone());
                    fine.push(crate::liegroup::geodesic_midpoint(&w[0], &w[1])?);
                }
                fine.push(pts[pts.len() - 1].clone());
                let last = fine.len() - 1;
                fine[0] = original[0].clone();
                fine[last] = original[last].clone();
                pts = fine;
            }
        }
    }
    finish(DiscretePath { points: pts }, sweeps, energies)
}

fn relative_drop(before: f64, after: f64) -> f64 {
    if before <= 0.0 {
        0.0
    } else {
        (before - after) / before
    }
}

fn finish(path: DiscretePath, sweeps: usize, energies: Vec<(usize, f64)>) -> Result<Shortened> {
    let geodesic = fit_geodesic(&path)?;
    let n = path.steps();
    let max_deviation = path
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| max_abs(&(p - geodesic.at(i as f64 / n as f64))))
        .fold(0.0, f64::max);
    Ok(Shortened {
        path,
        geodesic,
        sweeps,
        energies,
        max_deviation,
    })
}

/// Geodesic through `x₀` whose velocity is the mean one-step logarithm,
/// `A = (N/π) · mean log(xᵢᵀxᵢ₊₁)`.
pub fn fit_geodesic(path: &DiscretePath) -> Result<GroupGeodesic> {
    let dim = path.dim();
    let mut acc = Mat::zeros(dim, dim);
    for w in path.points.windows(2) {
        acc += logm(&(w[0].transpose() * &w[1]))?;
    }
    GroupGeodesic::new(path.points[0].clone(), acc / PI)
}

/// Samples of `x(t) = exp(πtJ)·exp(Σₘ sin(mπt)Xₘ)` from `I` to `−I`, where `J`
/// is a random complex structure and `Xₘ` random skew matrices of size
/// `amplitude / m`.
pub fn random_path(n: usize, steps: usize, amplitude: f64, seed: u64) -> Result<DiscretePath> {
    if n % 2 == 1 || n == 0 {
        return Err(Error::InvalidInput(format!("n = {n} must be positive and even")));
    }
    if steps < 2 {
        return Err(Error::InvalidInput(format!("N = {steps} is too small to shorten")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = expm(&(random_skew(n, &mut rng) * 2.0));
    let j = &q * linalg::standard_complex_structure(n) * q.transpose();
    let xs: Vec<Mat> = (1..=3)
        .map(|m| {
            let x = random_skew(n, &mut rng);
            let norm = x.norm().max(1e-12);
            x * (amplitude / m as f64 / norm)
        })
        .collect();
    let base = skew_spectral(&j)?;
    let points = (0..=steps)
        .map(|i| {
            let t = i as f64 / steps as f64;
            let wiggle = xs
                .iter()
                .enumerate()
                .fold(Mat::zeros(n, n), |acc, (m, x)| acc + x * ((m + 1) as f64 * PI * t).sin());
            base.exp_scaled(PI * t) * expm(&wiggle)
        })
        .collect::<Vec<_>>();
    let mut points = points;
    points[0] = identity(n);
    points[steps] = -identity(n);
    DiscretePath::new(points)
}

/// Piecewise-geodesic resampling of a polygon to `steps` segments.
pub fn resample(points: &[Mat], steps: usize) -> Result<Vec<Mat>> {
    let m = points.len() - 1;
    if m == steps {
        return Ok(points.to_vec());
    }
    let mut out = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let s = i as f64 * m as f64 / steps as f64;
        let seg = (s.floor() as usize).min(m - 1);
        let frac = s - seg as f64;
        if frac == 0.0 {
            out.push(points[seg].clone());
        } else {
            let spec = log_spectral(&(points[seg].transpose() * &points[seg + 1]))?;
            out.push(&points[seg] * spec.exp_scaled(frac));
        }
    }
    out[steps] = points[m].clone();
    Ok(out)
}

/// Meridian-recursive grid on `Sᵏ ⊂ ℝ^{k+1}`.
///
/// Node order: the north pole `N = e_{k+1}`, the south pole `−N`, then for
/// each node `e` of the equator grid (in its own order) the interior meridian
/// samples `cos(πj/T)·N + sin(πj/T)·e` for `j = 1..T−1`. The grid of `S⁰` is
/// `{+1, −1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereGrid {
    k: usize,
    t: usize,
    nodes: Vec<DVector<f64>>,
}

impl SphereGrid {
    pub fn new(k: usize, t: usize) -> Result<Self> {
        if t < 2 || t % 2 == 1 {
            return Err(Error::InvalidInput(format!("T = {t} must be even and at least 2")));
        }
        Ok(Self::build(k, t))
    }

    fn build(k: usize, t: usize) -> Self {
        if k == 0 {
            let nodes = vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)];
            return Self { k, t, nodes };
        }
        let eq = Self::build(k - 1, t);
        let dim = k + 1;
        let north = DVector::from_fn(dim, |i, _| if i == k { 1.0 } else { 0.0 });
        let mut nodes = Vec::with_capacity(2 + eq.nodes.len() * (t - 1));
        nodes.push(north.clone());
        nodes.push(-&north);
        for e in &eq.nodes {
            let e = e.clone().push(0.0);
            for j in 1..t {
                let th = PI * j as f64 / t as f64;
                nodes.push(&north * th.cos() + &e * th.sin());
            }
        }
        Self { k, t, nodes }
    }

    /// Node count `2 + |equator| · (T − 1)`; cheap, without building the grid.
    pub fn node_count(k: usize, t: usize) -> usize {
        if k == 0 {
            2
        } else {
            2 + Self::node_count(k - 1, t) * (t - 1)
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn nodes(&self) -> &[DVector<f64>] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn equator(&self) -> Result<SphereGrid> {
        if self.k == 0 {
            return Err(Error::Precondition("S⁰ has no equator".into()));
        }
        Ok(Self::build(self.k - 1, self.t))
    }

    /// Number of meridians: the size of the equator grid.
    pub fn meridian_count(&self) -> usize {
        (self.nodes.len() - 2) / (self.t - 1)
    }

    /// Grid indices of meridian `q` from `N` to `−N` (T + 1 entries).
    pub fn meridian(&self, q: usize) -> Vec<usize> {
        let mut idx = Vec::with_capacity(self.t + 1);
        idx.push(0);
        idx.extend((1..self.t).map(|j| 2 + q * (self.t - 1) + (j - 1)));
        idx.push(1);
        idx
    }

    /// Angle from the south pole, in `[0, π]`.
    pub fn angle_from_south(&self, i: usize) -> f64 {
        (-self.nodes[i][self.k]).clamp(-1.0, 1.0).acos()
    }
}

/// Values of a clutching map on the nodes of a sphere grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MapFamily {
    grid: SphereGrid,
    values: Vec<Mat>,
}

impl MapFamily {
    pub fn new(grid: SphereGrid, values: Vec<Mat>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} values for {} grid nodes",
                values.len(),
                grid.len()
            )));
        }
        let n = values.first().map(|v| v.nrows()).unwrap_or(0);
        for (i, v) in values.iter().enumerate() {
            if v.nrows() != n || v.ncols() != n {
                return Err(Error::Dimension(format!("value at node {i} is not {n}x{n}")));
            }
        }
        Ok(Self { grid, values })
    }

    /// Evaluates `f` at every grid node.
    pub fn from_fn(grid: SphereGrid, f: impl Fn(&DVector<f64>) -> Mat + Sync) -> Result<Self> {
        let values = grid.nodes.par_iter().map(&f).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &SphereGrid {
        &self.grid
    }

    pub fn k(&self) -> usize {
        self.grid.k
    }

    pub fn n(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    pub fn north(&self) -> &Mat {
        &self.values[0]
    }

    pub fn south(&self) -> &Mat {
        &self.values[1]
    }

    pub fn map_values(&self, f: impl Fn(usize, &Mat) -> Mat + Sync) -> Self {
        let values = self.values.par_iter().enumerate().map(|(i, v)| f(i, v)).collect();
        Self { grid: self.grid.clone(), values }
    }

    /// Largest orthogonality residual over all values.
    pub fn orthogonality_residual(&self) -> f64 {
        self.values.iter().map(orthogonality_residual).fold(0.0, f64::max)
    }

    pub fn validate_orthogonal(&self, tol: f64) -> Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            let r = orthogonality_residual(v);
            if r > tol || !r.is_finite() {
                return Err(Error::InvalidInput(format!("value at node {i} is not orthogonal (residual {r:.2e})")));
            }
        }
        Ok(())
    }

    /// The values along meridian `q`, from `N` to `−N`.
    pub fn meridian(&self, q: usize) -> Vec<Mat> {
        self.grid.meridian(q).into_iter().map(|i| self.values[i].clone()).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct NodeJson {
    coords: Vec<f64>,
    value: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FamilyJson {
    k: usize,
    #[serde(rename = "T")]
    t: usize,
    nodes: Vec<NodeJson>,
}

impl Serialize for MapFamily {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        FamilyJson {
            k: self.grid.k,
            t: self.grid.t,
            nodes: self
                .grid
                .nodes
                .iter()
                .zip(&self.values)
                .map(|(c, v)| NodeJson {
                    coords: c.iter().copied().collect(),
                    value: linalg::to_row_major(v),
                })
                .collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for MapFamily {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = FamilyJson::deserialize(de)?;
        if j.t < 2 || j.t % 2 == 1 {
            return Err(D::Error::custom(format!("T = {} must be even and at least 2", j.t)));
        }
        if j.nodes.len() != SphereGrid::node_count(j.k, j.t) {
            return Err(D::Error::custom(format!(
                "{} nodes, a grid with k = {} and T = {} has {}",
                j.nodes.len(),
                j.k,
                j.t,
                SphereGrid::node_count(j.k, j.t)
            )));
        }
        let grid = SphereGrid::build(j.k, j.t);
        let first = j.nodes.first().map(|n| n.value.len()).unwrap_or(0);
        let n = (first as f64).sqrt().round() as usize;
        let mut values = Vec::with_capacity(j.nodes.len());
        for (i, (node, expected)) in j.nodes.iter().zip(&grid.nodes).enumerate() {
            let c = DVector::from_column_slice(&node.coords);
            if c.len() != expected.len() || (c - expected).amax() > 1e-9 {
                return Err(D::Error::custom(format!("node {i} coordinates do not match the grid")));
            }
            let v = linalg::from_row_major(n, &node.value)
                .ok_or_else(|| D::Error::custom(format!("node {i} value is not {n}x{n}")))?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(D::Error::custom(format!("node {i} value is not finite")));
            }
            values.push(v);
        }
        MapFamily::new(grid, values).map_err(D::Error::custom)
    }
}

/// Bump `β(θ) = ½(1 + cos(πθ/θ₀))` for `θ < θ₀`, zero beyond.
pub fn bump(theta: f64, width: f64) -> f64 {
    if theta >= width {
        0.0
    } else {
        0.5 * (1.0 + (PI * theta / width).cos())
    }
}

/// Deforms a family so that `φ(N) = I` and `φ(−N) = −I`.
///
/// Values are right-translated by `φ(N)⁻¹`; then, within angle π/2 of the
/// south pole, multiplied by `exp(β(θ)·L)` with `exp(L) = −φ(−N)⁻¹`, which
/// rotates the south pole value to `−I` along a homotopy.
pub fn normalize_poles(family: &MapFamily) -> Result<MapFamily> {
    family.validate_orthogonal(1e-8)?;
    if family.n() % 2 == 1 {
        return Err(Error::InvalidInput("odd rank: −I is not in SO(n)".into()));
    }
    let qt = family.north().transpose();
    let shifted = family.map_values(|_, v| v * &qt);
    let target = -shifted.south().transpose();
    let l = logm(&target).map_err(|e| match e {
        Error::Branch(msg) => Error::Branch(format!(
            "cannot rotate φ(−N) to −I ({msg}); re-sample or perturb the input"
        )),
        other => other,
    })?;
    if max_abs(&l) == 0.0 {
        return Ok(shifted);
    }
    let spec = skew_spectral(&l)?;
    let grid = shifted.grid.clone();
    let mut out = shifted.map_values(|i, v| {
        let beta = bump(grid.angle_from_south(i), PI / 2.0);
        if beta == 0.0 {
            v.clone()
        } else {
            v * spec.exp_scaled(beta)
        }
    });
    let n = out.n();
    out.values[0] = identity(n);
    out.values[1] = -identity(n);
    Ok(out)
}

/// Deforms a family with values in the centriole of `chain` so that its south
/// pole becomes the negative of its north pole `J`.
///
/// With `K = φ(−N)` and `L = log(KJ)`, conjugation by `exp(−L/2)` carries
/// `K` to `−J`. `L` commutes with the chain, so conjugating by
/// `exp(−β(θ)L/2)` near the south pole stays inside the centriole.
pub fn normalize_in_centriole(family: &MapFamily, chain: &crate::clifford::CliffordSystem) -> Result<MapFamily> {
    let j = family.north().clone();
    let k = family.south().clone();
    let mut structure: Vec<Mat> = chain.generators().to_vec();
    structure.push(j.clone());
    let l = rotation_log(&(&k * &j), &structure, &j)?;
    if max_abs(&l) == 0.0 {
        let mut out = family.clone();
        out.values[1] = -&j;
        return Ok(out);
    }
    let spec = skew_spectral(&l)?;
    let grid = family.grid.clone();
    let mut out = family.map_values(|i, v| {
        let beta = bump(grid.angle_from_south(i), PI / 2.0);
        if beta == 0.0 {
            v.clone()
        } else {
            let g = spec.exp_scaled(-0.5 * beta);
            &g * v * g.transpose()
        }
    });
    out.values[1] = -&j;
    Ok(out)
}

/// A logarithm of the rotation `m`.
///
/// Off the `−1` eigenspace `W` this is the principal logarithm. On `W` it is
/// `π·twist·X` where `X` is a complex structure anticommuting with
/// `structure` restricted to `W`; this commutes with the chain and
/// anticommutes with `twist`.
fn rotation_log(m: &Mat, structure: &[Mat], twist: &Mat) -> Result<Mat> {
    match logm(m) {
        Ok(l) => return Ok(l),
        Err(Error::Branch(_)) => {}
        Err(e) => return Err(e),
    }
    let n = m.nrows();
    let (vals, vecs) = linalg::sym_eigen_desc(&linalg::sym_part(m));
    let w_cols: Vec<DVector<f64>> = vals
        .iter()
        .enumerate()
        .filter(|(_, &v)| v < -1.0 + 1e-6)
        .map(|(i, _)| vecs.column(i).into_owned())
        .collect();
    let w = linalg::columns_to_mat(n, &w_cols);
    if max_abs(&(m * &w + &w)) > 1e-10 {
        return Err(Error::Branch(
            "rotation angle close to π; re-sample or perturb the input".into(),
        ));
    }
    let c_cols: Vec<DVector<f64>> = vals
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= -1.0 + 1e-6)
        .map(|(i, _)| vecs.column(i).into_owned())
        .collect();
    let c = linalg::columns_to_mat(n, &c_cols);
    let l_c = logm(&(c.transpose() * m * &c))?;
    let local: Vec<Mat> = structure.iter().map(|g| w.transpose() * g * &w).collect();
    let sys = crate::clifford::CliffordSystem::new(w.ncols(), local)?;
    let ext = crate::clifford::is_extendible(&sys)?;
    let Some(x) = ext.witness else {
        return Err(Error::Branch(format!(
            "no rotation to the antipode on the {}-dimensional fixed subspace",
            w.ncols()
        )));
    };
    let l_w = (w.transpose() * twist * &w) * x * PI;
    Ok(&c * l_c * c.transpose() + &w * l_w * w.transpose())
}

/// Per-meridian outcome of [`flow_family`].
#[derive(Clone, Debug, Serialize)]
pub struct MeridianReport {
    pub node: usize,
    pub sweeps: usize,
    pub energy: f64,
    pub max_deviation: f64,
    pub retries: usize,
}

/// Midpoint family on the equator grid plus per-meridian diagnostics.
#[derive(Clone, Debug)]
pub struct FlowResult {
    pub midpoints: MapFamily,
    pub meridians: Vec<MeridianReport>,
}

impl FlowResult {
    pub fn total_energy(&self) -> f64 {
        self.meridians.iter().map(|m| m.energy).sum()
    }

    pub fn max_deviation(&self) -> f64 {
        self.meridians.iter().map(|m| m.max_deviation).fold(0.0, f64::max)
    }
}

/// Angle tolerance for accepting a shortened meridian as minimal.
pub const MINIMAL_ANGLE_TOL: f64 = 1e-3;
const RESEED_MAGNITUDE: f64 = 1e-3;

/// Shortens every meridian of a normalized family and returns the family of
/// their midpoints on the equator.
///
/// Without a context the poles must be `±I`; with one, the values must lie
/// in its centriole and the poles must be `±base`. Midpoints are snapped to
/// `base · polar(A)` where `A` is the fitted velocity projected to the
/// tangent space. Meridians whose angles are not all `±1` are re-flowed from
/// a slightly perturbed start.
pub fn flow_family(family: &MapFamily, ctx: Option<&CentrioleContext>, cfg: &FlowConfig) -> Result<FlowResult> {
    cfg.validate()?;
    let n = family.n();
    let base = ctx.map(|c| c.base().clone()).unwrap_or_else(|| identity(n));
    if max_abs(&(family.north() - &base)) > 1e-8 || max_abs(&(family.south() + &base)) > 1e-8 {
        return Err(Error::Precondition("family is not normalized: poles are not (J, −J)".into()));
    }
    if let Some(c) = ctx {
        if let Some(i) = (0..family.values.len()).find(|&i| !c.in_midpoint_set(&family.values[i])) {
            return Err(Error::Precondition(format!("value at node {i} is outside the centriole")));
        }
    }
    let equator = family.grid.equator()?;
    let count = family.grid.meridian_count();
    let results: Vec<Result<(Mat, MeridianReport)>> = (0..count)
        .into_par_iter()
        .map(|q| flow_meridian(family, q, ctx, &base, cfg))
        .collect();

    let mut values = Vec::with_capacity(count);
    let mut reports = Vec::with_capacity(count);
    let mut failures = Vec::new();
    for (q, r) in results.into_iter().enumerate() {
        match r {
            Ok((m, rep)) => {
                values.push(m);
                reports.push(rep);
            }
            Err(e) => failures.push(format!("meridian {q}: {e}")),
        }
    }
    if !failures.is_empty() {
        let shown: Vec<&str> = failures.iter().take(5).map(String::as_str).collect();
        return Err(Error::NonConvergence(format!(
            "{} of {count} meridians failed; {}",
            failures.len(),
            shown.join("; ")
        )));
    }
    Ok(FlowResult {
        midpoints: MapFamily::new(equator, values)?,
        meridians: reports,
    })
}

fn flow_meridian(
    family: &MapFamily,
    q: usize,
    ctx: Option<&CentrioleContext>,
    base: &Mat,
    cfg: &FlowConfig,
) -> Result<(Mat, MeridianReport)> {
    let raw = resample(&family.meridian(q), cfg.path_n)?;
    let n = family.n();
    let mut last_err = None;
    for attempt in 0..=3usize {
        let pts = if attempt == 0 {
            raw.clone()
        } else {
            perturb(&raw, ctx, cfg.seed ^ ((q as u64) << 8) ^ attempt as u64)
        };
        let result = DiscretePath::new(pts).and_then(|p| shorten(&p, cfg.tol, cfg.max_sweeps));
        let short = match result {
            Ok(s) => s,
            Err(e) if e.is_numerical() => {
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let a = short.geodesic.velocity();
        let a = match ctx {
            Some(c) => c.tangent_project(a),
            None => linalg::skew_part(a),
        };
        let spec = skew_spectral(&a)?;
        let minimal = spec.kernel_dim == 0
            && spec.angles.len() * 2 == n
            && spec.angles.iter().all(|x| (x - 1.0).abs() < MINIMAL_ANGLE_TOL);
        if !minimal {
            last_err = Some(Error::NonConvergence(format!(
                "meridian converged to angles {:?}",
                spec.angles.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>()
            )));
            continue;
        }
        let mid = base * skew_polar(&a);
        return Ok((
            mid,
            MeridianReport {
                node: q,
                sweeps: short.sweeps,
                energy: short.final_energy(),
                max_deviation: short.max_deviation,
                retries: attempt,
            },
        ));
    }
    Err(last_err.unwrap_or_else(|| Error::NonConvergence("meridian did not converge".into())))
}

/// Conjugates interior points by `exp(ε sin(πt) Y)` with `Y` commuting with
/// the chain (stays in the centriole), or right-multiplies by
/// `exp(ε sin(πt) X)` without a context.
fn perturb(points: &[Mat], ctx: Option<&CentrioleContext>, seed: u64) -> Vec<Mat> {
    let n = points[0].nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_skew(n, &mut rng);
    let last = points.len() - 1;
    let y = match ctx {
        Some(c) => commutant_projection(c.chain(), &x),
        None => x,
    };
    let y = &y * (RESEED_MAGNITUDE / max_abs(&y).max(1e-300));
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if i == 0 || i == last {
                return p.clone();
            }
            let g = expm(&(&y * (PI * i as f64 / last as f64).sin()));
            match ctx {
                Some(_) => &g * p * g.transpose(),
                None => p * g,
            }
        })
        .collect()
}

/// Angles of a shortened path between antipodal points, rounded to odd integers.
pub fn antipodal_angles(s: &Shortened, tol: f64) -> Option<Vec<i64>> {
    odd_integer_angles(s.angles(), tol)
}
