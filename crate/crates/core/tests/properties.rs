use bottlab_core::centriole::{index_lower_bound, CentrioleContext};
use bottlab_core::classifier::{classify, hopf_clutching, ClassifyConfig};
use bottlab_core::clifford::{class_in_ak, direct_sum, is_extendible, module_sum, CliffordSystem, ModuleClass};
use bottlab_core::linalg::{random_skew, standard_complex_structure};
use bottlab_core::liegroup::{det_winding, expm, logm};
use bottlab_core::pathflow::{birkhoff_sweep, random_path, FlowConfig, MapFamily, SphereGrid};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_module() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..=7, 0usize..=2, 0usize..=2)
        .prop_map(|(k, p, q)| (k, p, if k % 4 == 3 { q } else { 0 }))
        .prop_filter("non-empty", |(_, p, q)| p + q > 0)
}

fn perturbed(fam: &MapFamily, eps: f64, seed: u64) -> MapFamily {
    let n = fam.n();
    fam.map_values(|i, v| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(7919).wrapping_add(i as u64));
        let x = random_skew(n, &mut rng);
        v * expm(&(x * (eps / (n as f64).sqrt())))
    })
}

fn classify_at(fam: &MapFamily, t: usize) -> bottlab_core::BundleReport {
    let cfg = ClassifyConfig { flow: FlowConfig { grid_t: t, ..FlowConfig::default() }, max_k: 3 };
    classify(fam, &cfg).unwrap()
}

fn check_recovered(report: &bottlab_core::BundleReport) {
    let s: &CliffordSystem = &report.system;
    if s.n() > 0 {
        s.validate(1e-6).unwrap();
        assert_eq!(class_in_ak(s).unwrap(), report.class);
    }
    assert_eq!(report.trivial_rank + s.n(), report.n);
    if report.class.is_zero() && s.n() > 0 {
        let ext = is_extendible(s).unwrap();
        assert!(ext.extendible);
        let w = ext.witness.unwrap();
        assert!(s.extended(w).unwrap().relation_residual() < 1e-6);
    }
}

#[test]
fn homotopy_invariance_k1() {
    for (copies, seed) in (0..20).map(|i| (1 + i % 2, i as u64)) {
        let s = module_sum(1, copies, 0).unwrap();
        let fam = hopf_clutching(&s, &SphereGrid::new(1, 32).unwrap()).unwrap();
        let report = classify_at(&perturbed(&fam, 0.1, seed), 32);
        assert_eq!(report.class, ModuleClass::from_multiplicities(1, copies, 0), "seed {seed}");
        check_recovered(&report);
    }
}

#[test]
fn homotopy_invariance_k2() {
    for seed in 0..20u64 {
        let s = module_sum(2, 1, 0).unwrap();
        let fam = hopf_clutching(&s, &SphereGrid::new(2, 16).unwrap()).unwrap();
        let report = classify_at(&perturbed(&fam, 0.1, seed), 16);
        assert_eq!(report.class, ModuleClass::from_multiplicities(2, 1, 0), "seed {seed}");
        check_recovered(&report);
    }
}

#[test]
fn homotopy_invariance_k3() {
    for seed in 0..20u64 {
        let (p, q) = if seed % 2 == 0 { (1, 0) } else { (0, 1) };
        let s = module_sum(3, p, q).unwrap();
        let fam = hopf_clutching(&s, &SphereGrid::new(3, 8).unwrap()).unwrap();
        let report = classify_at(&perturbed(&fam, 0.1, seed), 8);
        assert_eq!(report.class, ModuleClass::from_multiplicities(3, p, q), "seed {seed}");
        check_recovered(&report);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn class_is_additive(a in small_module(), b in (0usize..=2, 0usize..=2)) {
        let (k, p, q) = a;
        let (p2, q2) = if k % 4 == 3 { b } else { (b.0, 0) };
        prop_assume!(p2 + q2 > 0);
        let s = module_sum(k, p, q).unwrap();
        let t = module_sum(k, p2, q2).unwrap();
        let sum = class_in_ak(&direct_sum(&s, &t).unwrap()).unwrap();
        prop_assert_eq!(sum, class_in_ak(&s).unwrap().add(&class_in_ak(&t).unwrap()).unwrap());
    }

    #[test]
    fn zero_class_modules_extend(m in small_module(), seed in 0u64..1000) {
        let (k, p, q) = m;
        let s = module_sum(k, p, q).unwrap();
        let q_mat = expm(&random_skew(s.n(), &mut ChaCha8Rng::seed_from_u64(seed)));
        let s = s.conjugate(&q_mat);
        let ext = is_extendible(&s).unwrap();
        prop_assert_eq!(ext.extendible, class_in_ak(&s).unwrap().is_zero());
        if let Some(w) = ext.witness {
            prop_assert!(s.extended(w).unwrap().relation_residual() < 1e-8);
        }
    }

    #[test]
    fn sweeps_never_raise_energy(seed in 0u64..10_000, half in 1usize..=4, steps in 4usize..24) {
        let mut path = random_path(2 * half, steps, 1.0, seed).unwrap();
        let (first, last) = (path.points()[0].clone(), path.points()[steps].clone());
        let mut e = path.energy().unwrap();
        for _ in 0..5 {
            path = birkhoff_sweep(&path).unwrap();
            let next = path.energy().unwrap();
            prop_assert!(next <= e, "{} > {}", next, e);
            e = next;
        }
        prop_assert_eq!(&path.points()[0], &first);
        prop_assert_eq!(&path.points()[steps], &last);
    }

    #[test]
    fn tangent_projection_is_a_projection(k in 1usize..=3, seed in 0u64..1000) {
        let s = module_sum(k, 2, 0).unwrap();
        let ctx = CentrioleContext::from_system(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_skew(ctx.n(), &mut rng);
        let y = random_skew(ctx.n(), &mut rng);
        let px = ctx.tangent_project(&x);
        prop_assert!((ctx.tangent_project(&px) - &px).amax() < 1e-10);
        let lhs = ctx.tangent_project(&x).dot(&y);
        let rhs = x.dot(&ctx.tangent_project(&y));
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn winding_survives_refinement(a in -3i64..=3, b in -3i64..=3, steps in 16usize..40) {
        let (a, b) = (2 * a, 2 * b);
        let j2 = standard_complex_structure(2);
        let m = bottlab_core::linalg::block_diag(&[&(&j2 * a as f64), &(&j2 * b as f64)]);
        let j = standard_complex_structure(4);
        let sample = |n: usize| -> Vec<_> {
            (0..=n).map(|i| expm(&(&m * (std::f64::consts::PI * i as f64 / n as f64)))).collect()
        };
        let coarse = det_winding(&sample(steps * 4), &j).unwrap();
        prop_assert_eq!(coarse, (a + b) / 2);
        prop_assert_eq!(det_winding(&sample(steps * 8), &j).unwrap(), coarse);
    }

    #[test]
    fn log_inverts_exp(seed in 0u64..10_000, n in 2usize..=16, scale in 0.05f64..0.9) {
        let a = random_skew(n, &mut ChaCha8Rng::seed_from_u64(seed));
        let spec = bottlab_core::liegroup::skew_spectral(&a).unwrap();
        let top = spec.angles.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assume!(top > 0.0);
        let a = a * (scale * std::f64::consts::PI / top);
        prop_assert!((logm(&expm(&a)).unwrap() - &a).amax() < 1e-9);
    }

    #[test]
    fn bound_vanishes_on_unit_angles(signs in proptest::collection::vec(any::<bool>(), 1..8), k in 1usize..=8) {
        let angles: Vec<i64> = signs.iter().map(|s| if *s { 1 } else { -1 }).collect();
        let c = angles.iter().sum();
        prop_assert_eq!(index_lower_bound(&angles, k, c).unwrap(), 0);
    }
}
