//! Classification of clutching maps `Sᵏ → SO(n)` into 𝒜ₖ.
//!
//! A normalized family is flowed meridian by meridian; the midpoints form a
//! family on `S^{k−1}` inside the next centriole, whose north pole is recorded
//! as the next generator. After `k − 1` stages a loop remains. Its shortened
//! velocity splits `ℝⁿ` into a trivial part and a module carrying the
//! recovered Clifford system.
//!
//! Conventions: the generator recorded at stage `j` is the `(k+1−j)`-th
//! generator of a linear input, so the recovered list is reversed before it
//! is reported. Hopf families of left-ℍ modules classify as `+1` for `k = 3`.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::centriole::CentrioleContext;
use crate::clifford::{
    class_in_ak, commutant_projection, irreducible_dim, CliffordSystem, ModuleClass,
};
use crate::error::{Error, Result};
use crate::liegroup::{expm, expm_complex, skew_spectral};
use crate::linalg::{
    self, block_diag, identity, max_abs, orthogonality_residual, random_skew, skew_polar, Mat,
};
use crate::pathflow::{
    flow_family, normalize_in_centriole, normalize_poles, resample, shorten, DiscretePath,
    FlowConfig, MapFamily, SphereGrid,
};

/// Residual bound for recovered systems.
pub const RECOVERY_TOL: f64 = 1e-6;
/// Distance to the nearest integer accepted for a loop angle.
pub const ANGLE_TOL: f64 = 1e-3;
/// Padding rounds before the final stage gives up.
pub const MAX_PADDING_ROUNDS: usize = 3;
const PERTURBATION: f64 = 1e-3;

/// `φ_S(v) = v_{k+1}·I + Σ vᵢJᵢ` on the nodes of `grid`.
pub fn hopf_clutching(s: &CliffordSystem, grid: &SphereGrid) -> Result<MapFamily> {
    if grid.k() != s.k() {
        return Err(Error::Dimension(format!(
            "grid is on S^{} but the system has {} generators",
            grid.k(),
            s.k()
        )));
    }
    if s.n() == 0 {
        return Err(Error::InvalidInput("zero-dimensional system".into()));
    }
    let k = s.k();
    let n = s.n();
    MapFamily::from_fn(grid.clone(), |v| {
        s.generators()
            .iter()
            .enumerate()
            .fold(identity(n) * v[k], |acc, (i, g)| acc + g * v[i])
    })
}

/// Hopf family of `s` plus a trivial block of rank `pad`, which rotates
/// from `I` to `−I` with the polar angle: `exp(θ_N(v)·J)` for the standard
/// complex structure `J`.
///
/// `pad` must be a multiple of `2·m_{k−1}` so that every stage of the
/// cascade can rotate the block to the antipode.
pub fn hopf_clutching_padded(s: &CliffordSystem, grid: &SphereGrid, pad: usize) -> Result<MapFamily> {
    if pad == 0 {
        return hopf_clutching(s, grid);
    }
    let k = s.k();
    if k == 0 {
        return Err(Error::InvalidInput("padding needs k ≥ 1".into()));
    }
    let unit = 2 * irreducible_dim(k - 1);
    if pad % unit != 0 {
        return Err(Error::InvalidInput(format!("padding {pad} is not a multiple of {unit}")));
    }
    let hopf = hopf_clutching(s, grid)?;
    let j = linalg::standard_complex_structure(pad);
    let nodes = grid.nodes().to_vec();
    Ok(hopf.map_values(|i, v| {
        let theta = nodes[i][k].clamp(-1.0, 1.0).acos();
        block_diag(&[v, &expm_complex(theta, &j)])
    }))
}

/// Reads a Clifford system off the values `φ(e₁)..φ(e_{k+1})` of a linear
/// clutching map: `Jᵢ = φ(eᵢ)·φ(e_{k+1})ᵀ`.
pub fn linear_to_module(frame: &[Mat]) -> Result<CliffordSystem> {
    let Some(last) = frame.last() else {
        return Err(Error::InvalidInput("empty frame".into()));
    };
    let n = last.nrows();
    for (i, f) in frame.iter().enumerate() {
        if f.nrows() != n || f.ncols() != n {
            return Err(Error::Dimension(format!("frame value {i} is not {n}x{n}")));
        }
        if orthogonality_residual(f) > 1e-8 {
            return Err(Error::InvalidInput(format!("frame value {i} is not orthogonal")));
        }
    }
    // the span must map the unit sphere into O(n)
    let mut rng = ChaCha8Rng::seed_from_u64(0x11ea7);
    for _ in 0..4 {
        let c = linalg::random_gaussian(frame.len(), 1, &mut rng);
        let c = &c / c.norm();
        let m = frame.iter().enumerate().fold(Mat::zeros(n, n), |acc, (i, f)| acc + f * c[i]);
        if orthogonality_residual(&m) > 1e-8 {
            return Err(Error::InvalidInput("frame does not span a linear clutching map".into()));
        }
    }
    let qt = last.transpose();
    let gens: Vec<Mat> = frame[..frame.len() - 1].iter().map(|f| f * &qt).collect();
    let s = CliffordSystem::new(n, gens)?;
    s.validate(1e-8)
        .map_err(|e| Error::InvalidInput(format!("not a linear clutching map: {e}")))?;
    Ok(s)
}

#[derive(Clone, Copy, Debug)]
pub struct ClassifyConfig {
    pub flow: FlowConfig,
    /// Largest sphere dimension accepted; grids grow as `Tᵏ`.
    pub max_k: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self { flow: FlowConfig::default(), max_k: 3 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StageDiagnostics {
    pub stage: usize,
    pub meridians: usize,
    pub total_energy: f64,
    pub max_deviation: f64,
    pub max_sweeps: usize,
    pub retries: usize,
    /// Largest entry change made by the normalization that follows the flow.
    pub normalization_shift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LoopDiagnostics {
    pub energy: f64,
    pub sweeps: usize,
    pub max_deviation: f64,
    /// Rotation angles of the closed geodesic, one per invariant plane.
    pub angles: Vec<f64>,
    pub padding_rounds: usize,
    pub padded_rank: usize,
    pub relation_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    /// Largest entry change made by the initial pole normalization.
    pub pole_shift: f64,
    pub stages: Vec<StageDiagnostics>,
    pub final_loop: LoopDiagnostics,
}

/// Splitting `E = E₀ ⊕ E₁` of a classified bundle.
#[derive(Clone, Debug, Serialize)]
pub struct BundleReport {
    pub k: usize,
    /// Rank of the analysed bundle, including any padding added by the final stage.
    pub n: usize,
    pub class: ModuleClass,
    pub trivial_rank: usize,
    /// Clifford system on `E₁`.
    pub system: CliffordSystem,
    pub diagnostics: Diagnostics,
}

fn in_stage(stage: &str, e: Error) -> Error {
    match e {
        Error::InvalidInput(m) => Error::InvalidInput(format!("{stage}: {m}")),
        Error::Precondition(m) => Error::Precondition(format!("{stage}: {m}")),
        Error::Dimension(m) => Error::Dimension(format!("{stage}: {m}")),
        Error::Branch(m) => Error::Branch(format!("{stage}: {m}")),
        Error::Resolution(m) => Error::Resolution(format!("{stage}: {m}")),
        Error::NonConvergence(m) => Error::NonConvergence(format!("{stage}: {m}")),
        other => other,
    }
}

fn shift(a: &MapFamily, b: &MapFamily) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| max_abs(&(x - y))).fold(0.0, f64::max)
}

/// Deforms a clutching map into a linear one and reads off its class.
pub fn classify(family: &MapFamily, cfg: &ClassifyConfig) -> Result<BundleReport> {
    cfg.flow.validate()?;
    let k = family.k();
    if k == 0 || k > cfg.max_k {
        return Err(Error::InvalidInput(format!("k = {k} is outside 1..={}", cfg.max_k)));
    }
    let n = family.n();
    if n % 2 == 1 {
        return Err(Error::InvalidInput(format!("odd rank {n}: −I is not in SO(n)")));
    }
    family.validate_orthogonal(1e-8)?;
    if family.values().iter().any(|v| v.determinant() < 0.0) {
        return Err(Error::InvalidInput("values must lie in SO(n)".into()));
    }

    let mut fam = normalize_poles(family).map_err(|e| in_stage("normalization", e))?;
    let pole_shift = shift(family, &fam);
    let mut chain: Vec<Mat> = Vec::new();
    let mut stages = Vec::new();
    for j in 1..k {
        let name = format!("stage {j}");
        let ctx = match chain.split_last() {
            None => None,
            Some((base, rest)) => Some(context(n, rest, base).map_err(|e| in_stage(&name, e))?),
        };
        let flow = flow_family(&fam, ctx.as_ref(), &cfg.flow).map_err(|e| in_stage(&name, e))?;
        let mids = flow.midpoints;
        let next = mids.north().clone();
        let deeper = context(n, &chain, &next).map_err(|e| in_stage(&name, e))?;
        if let Some(i) = (0..mids.values().len()).find(|&i| !deeper.in_midpoint_set(&mids.values()[i])) {
            return Err(Error::Resolution(format!(
                "{name}: midpoint {i} is not in the next centriole; increase T or N"
            )));
        }
        let normalized = normalize_in_centriole(&mids, deeper.chain()).map_err(|e| in_stage(&name, e))?;
        stages.push(StageDiagnostics {
            stage: j,
            meridians: flow.meridians.len(),
            total_energy: flow.meridians.iter().map(|m| m.energy).sum(),
            max_deviation: flow.meridians.iter().map(|m| m.max_deviation).fold(0.0, f64::max),
            max_sweeps: flow.meridians.iter().map(|m| m.sweeps).max().unwrap_or(0),
            retries: flow.meridians.iter().map(|m| m.retries).sum(),
            normalization_shift: shift(&mids, &normalized),
        });
        fam = normalized;
        chain.push(next);
    }

    let base = chain.pop().unwrap_or_else(|| identity(n));
    let outcome = final_loop(&fam, k, chain, base, &cfg.flow).map_err(|e| in_stage("final loop", e))?;
    let class = if outcome.system.n() == 0 {
        ModuleClass::from_multiplicities(k, 0, 0)
    } else {
        class_in_ak(&outcome.system).map_err(|e| in_stage("final loop", e))?
    };
    Ok(BundleReport {
        k,
        n: outcome.rank,
        class,
        trivial_rank: outcome.rank - outcome.system.n(),
        system: outcome.system,
        diagnostics: Diagnostics { pole_shift, stages, final_loop: outcome.diagnostics },
    })
}

fn context(n: usize, chain: &[Mat], base: &Mat) -> Result<CentrioleContext> {
    let sys = CliffordSystem::new(n, chain.to_vec())?;
    CentrioleContext::with_tolerance(sys, base.clone(), RECOVERY_TOL)
        .map_err(|e| Error::Resolution(format!("recorded generators drifted: {e}")))
}

struct LoopOutcome {
    rank: usize,
    system: CliffordSystem,
    diagnostics: LoopDiagnostics,
}

/// Shortens the loop `N → −N → N` of a family on `S¹` with the basepoint
/// pinned, and recovers the system from the closed geodesic
/// `γ(t) = J·exp(2πtA)`.
fn final_loop(fam: &MapFamily, k: usize, mut chain: Vec<Mat>, mut base: Mat, cfg: &FlowConfig) -> Result<LoopOutcome> {
    let steps = cfg.path_n;
    let mut points = resample(&fam.meridian(0), steps)?;
    let mut back = resample(&fam.meridian(1), steps)?;
    back.reverse();
    points.extend(back.into_iter().skip(1));
    let last = points.len() - 1;
    points[last] = points[0].clone();

    let mut sweeps = 0;
    for round in 0..=MAX_PADDING_ROUNDS {
        let n = base.nrows();
        let short = shorten(&DiscretePath::new(points.clone())?, cfg.tol, cfg.max_sweeps)?;
        sweeps += short.sweeps;
        let half = short.geodesic.velocity() * 0.5;
        let a = if k == 1 {
            linalg::skew_part(&half)
        } else {
            context(n, &chain, &base)?.tangent_project(&half)
        };
        let spec = skew_spectral(&a)?;
        let mut rounded = Vec::with_capacity(spec.angles.len());
        for &x in &spec.angles {
            let r = x.round();
            if (x - r).abs() > ANGLE_TOL {
                return Err(Error::Resolution(format!(
                    "loop angle {x:.6} is not an integer; increase N or lower tol"
                )));
            }
            rounded.push(r as i64);
        }
        let (vals, vecs) = linalg::sym_eigen_desc(&-(&a * &a));
        if rounded.iter().any(|&r| r >= 2) {
            if round == MAX_PADDING_ROUNDS {
                return Err(Error::NonConvergence(format!(
                    "loop angles {rounded:?} still violate minimality after {round} padding rounds"
                )));
            }
            let cols: Vec<usize> = (0..n).filter(|&i| vals[i] > 2.25).collect();
            let v = vecs.select_columns(&cols);
            let restrict = |m: &Mat| block_diag(&[m, &(v.transpose() * m * &v)]);
            chain = chain.iter().map(restrict).collect();
            base = restrict(&base);
            let pad_base = v.transpose() * short.path.points()[0].clone() * &v;
            let padded: Vec<Mat> = short.path.points().iter().map(|p| block_diag(&[p, &pad_base])).collect();
            let sys = CliffordSystem::new(base.nrows(), chain.clone())?;
            points = conjugate_interior(&padded, &sys, cfg.seed ^ (round as u64 + 1));
            continue;
        }

        let cols: Vec<usize> = (0..n).filter(|&i| vals[i] > 0.25).collect();
        let u = vecs.select_columns(&cols);
        let system = if u.ncols() == 0 {
            CliffordSystem::zero(k)
        } else {
            let jprime = skew_polar(&(u.transpose() * &a * &u));
            let local_base = u.transpose() * &base * &u;
            let mut gens: Vec<Mat> = chain.iter().map(|g| u.transpose() * g * &u).collect();
            if k > 1 {
                gens.push(local_base.clone());
            }
            gens.push(&local_base * &jprime);
            gens.reverse();
            let s = CliffordSystem::new(u.ncols(), gens)?;
            s.validate(RECOVERY_TOL).map_err(|e| {
                Error::Resolution(format!("recovered system fails the relations ({e}); increase T or N"))
            })?;
            s
        };
        return Ok(LoopOutcome {
            rank: n,
            diagnostics: LoopDiagnostics {
                energy: short.final_energy(),
                sweeps,
                max_deviation: short.max_deviation,
                angles: spec.angles.clone(),
                padding_rounds: round,
                padded_rank: n - fam.n(),
                relation_residual: system.relation_residual(),
            },
            system,
        });
    }
    unreachable!("the last padding round returns")
}

/// Conjugates interior points by `exp(ε sin(πt) Y)` with `Y` commuting with `chain`.
fn conjugate_interior(points: &[Mat], chain: &CliffordSystem, seed: u64) -> Vec<Mat> {
    let n = chain.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = commutant_projection(chain, &random_skew(n, &mut rng));
    let y = &y * (PERTURBATION / max_abs(&y).max(1e-300));
    let last = points.len() - 1;
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if i == 0 || i == last {
                return p.clone();
            }
            let g = expm(&(&y * (std::f64::consts::PI * i as f64 / last as f64).sin()));
            &g * p * g.transpose()
        })
        .collect()
}

/// Human-readable summary of a report.
pub fn split_report(report: &BundleReport) -> String {
    let mut out = String::new();
    let e1 = report.system.n();
    let _ = writeln!(out, "bundle over S^{} of rank {}", report.k + 1, report.n);
    if e1 == 0 {
        let _ = writeln!(out, "E = E_0, trivial rank {}; E_1 absent", report.trivial_rank);
    } else {
        let _ = writeln!(out, "E = E_0 ⊕ E_1 with rank E_0 = {}, rank E_1 = {e1}", report.trivial_rank);
        for (i, g) in report.system.generators().iter().enumerate() {
            let _ = writeln!(out, "J_{} =", i + 1);
            for r in 0..g.nrows() {
                let row: Vec<String> = (0..g.ncols()).map(|c| format!("{:7.4}", g[(r, c)])).collect();
                let _ = writeln!(out, "  [{}]", row.join(" "));
            }
        }
    }
    let _ = writeln!(out, "class in A_{}: {}", report.k, report.class);
    let d = &report.diagnostics;
    let _ = writeln!(out, "pole normalization shift {:.3e}", d.pole_shift);
    for s in &d.stages {
        let _ = writeln!(
            out,
            "stage {}: {} meridians, energy {:.6}, max deviation {:.2e}, max sweeps {}, retries {}, normalization shift {:.3e}",
            s.stage, s.meridians, s.total_energy, s.max_deviation, s.max_sweeps, s.retries, s.normalization_shift
        );
    }
    let l = &d.final_loop;
    let angles: Vec<String> = l.angles.iter().map(|a| format!("{a:.5}")).collect();
    let _ = writeln!(
        out,
        "final loop: energy {:.6}, sweeps {}, angles [{}], padding rounds {}, relation residual {:.2e}",
        l.energy,
        l.sweeps,
        angles.join(", "),
        l.padding_rounds,
        l.relation_residual
    );
    out
}
