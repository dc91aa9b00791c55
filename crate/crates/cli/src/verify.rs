//! Reduced invariant suite behind `bottlab verify`.

use std::f64::consts::PI;

use bottlab_core::centriole::{index_lower_bound, synthetic_geodesic};
use bottlab_core::classifier::{classify, hopf_clutching, ClassifyConfig};
use bottlab_core::clifford::{
    class_in_ak, decompose, irreducible, is_extendible, module_sum, restrict, second_irreducible,
    ModuleClass,
};
use bottlab_core::liegroup::{det_winding, expm};
use bottlab_core::linalg::standard_complex_structure;
use bottlab_core::pathflow::{random_path, shorten, FlowConfig, SphereGrid};

use crate::Failure;

type Check = Result<String, String>;

fn err(e: impl ToString) -> String {
    e.to_string()
}

fn relations() -> Check {
    let mut count = 0;
    for k in 0..=9 {
        let mut systems = vec![irreducible(k)];
        if k % 4 == 3 {
            systems.push(second_irreducible(k).map_err(err)?);
        }
        for s in systems {
            let r = s.relation_residual();
            if r > 1e-10 {
                return Err(format!("k = {k}: residual {r:.2e}"));
            }
            count += 1;
        }
    }
    Ok(format!("{count} irreducible systems, k ≤ 9"))
}

fn restriction() -> Check {
    for k in 0..=8 {
        let dec = decompose(&restrict(&irreducible(k + 1)).map_err(err)?).map_err(err)?;
        let ok = match k % 8 {
            0 | 1 => (dec.p, dec.q) == (2, 0),
            3 | 7 => (dec.p, dec.q) == (1, 1),
            _ => true,
        };
        if !ok {
            return Err(format!("k = {k}: p = {}, q = {}", dec.p, dec.q));
        }
    }
    Ok("restriction law for k ≤ 8".into())
}

fn extendibility() -> Check {
    let mut count = 0;
    for k in 0..=8 {
        let qmax = if k % 4 == 3 { 2 } else { 0 };
        for p in 0..=2 {
            for q in 0..=qmax {
                let s = module_sum(k, p, q).map_err(err)?;
                let zero = ModuleClass::from_multiplicities(k, p, q).is_zero();
                let ext = is_extendible(&s).map_err(err)?;
                if ext.extendible != zero {
                    return Err(format!("k = {k}, p = {p}, q = {q}"));
                }
                if s.n() > 0 && class_in_ak(&s).map_err(err)?.is_zero() != zero {
                    return Err(format!("decomposition class mismatch at k = {k}, p = {p}, q = {q}"));
                }
                count += 1;
            }
        }
    }
    Ok(format!("{count} modules"))
}

fn flow(cfg: &FlowConfig) -> Check {
    for seed in 0..5 {
        let p = random_path(4, cfg.path_n, 1.0, cfg.seed.wrapping_add(seed)).map_err(err)?;
        let s = shorten(&p, cfg.tol, cfg.max_sweeps).map_err(err)?;
        if s.energies.windows(2).any(|w| w[0].0 == w[1].0 && w[1].1 > w[0].1) {
            return Err(format!("seed {seed}: energy increased"));
        }
        if s.angles().iter().any(|a| (a - 1.0).abs() > 1e-4) {
            return Err(format!("seed {seed}: angles {:?}", s.angles()));
        }
    }
    Ok("5 random SO(4) paths reach minimal geodesics".into())
}

fn classifier(cfg: &FlowConfig) -> Check {
    for (k, copies, t) in [(1, 1, cfg.grid_t), (1, 2, cfg.grid_t), (2, 1, cfg.grid_t.min(16))] {
        let s = module_sum(k, copies, 0).map_err(err)?;
        let grid = SphereGrid::new(k, t).map_err(err)?;
        let flow = FlowConfig { grid_t: t, ..*cfg };
        let report = classify(&hopf_clutching(&s, &grid).map_err(err)?, &ClassifyConfig { flow, max_k: 3 })
            .map_err(|e| format!("k = {k}, {copies} copies: {e}"))?;
        let expected = ModuleClass::from_multiplicities(k, copies, 0);
        if report.class != expected {
            return Err(format!("k = {k}, {copies} copies: class {}", report.class));
        }
    }
    Ok("Hopf round trips for k = 1, 2".into())
}

fn degree() -> Check {
    let j = standard_complex_structure(4);
    for (a, b) in [(2, 0), (2, -4), (6, 2)] {
        let blocks = [standard_complex_structure(2) * a as f64, standard_complex_structure(2) * b as f64];
        let m = bottlab_core::linalg::block_diag(&[&blocks[0], &blocks[1]]);
        let path: Vec<_> = (0..=64).map(|i| expm(&(&m * (PI * i as f64 / 64.0)))).collect();
        let w = det_winding(&path, &j).map_err(err)?;
        if w != (a + b) / 2 {
            return Err(format!("angles ({a}, {b}): winding {w}"));
        }
    }
    Ok("loop degrees equal half the angle sum".into())
}

fn index() -> Check {
    for angles in [vec![1, 1], vec![1, -1, 1], vec![-1, -1, -1, 1]] {
        for k in 1..=4 {
            let b = index_lower_bound(&angles, k, angles.iter().sum()).map_err(err)?;
            if b != 0 {
                return Err(format!("{angles:?}, k = {k}: bound {b}"));
            }
        }
    }
    let (ctx, geo) = synthetic_geodesic(1, &[3, 1]).map_err(err)?;
    let cut = ctx.cut_corner(&geo, 0, 1).map_err(err)?;
    if cut.cut_energy >= cut.geodesic_energy {
        return Err("corner cut did not lower the energy".into());
    }
    Ok("bound 0 on ±1 angles; corner cut lowers energy".into())
}

pub fn run(cfg: &FlowConfig) -> Result<(), Failure> {
    let checks: [(&str, Box<dyn Fn() -> Check>); 7] = [
        ("clifford relations", Box::new(relations)),
        ("restriction law", Box::new(restriction)),
        ("extendibility vs zero class", Box::new(extendibility)),
        ("path shortening", Box::new(move || flow(cfg))),
        ("classifier round trip", Box::new(move || classifier(cfg))),
        ("loop degree", Box::new(degree)),
        ("index bound", Box::new(index)),
    ];
    let mut failed = 0;
    for (name, check) in checks.iter() {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        return Err(Failure { code: 2, message: format!("{failed} invariant checks failed") });
    }
    Ok(())
}
