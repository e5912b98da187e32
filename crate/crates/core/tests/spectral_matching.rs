use nalgebra::DMatrix;
use proptest::prelude::*;
use qergo::rng::stream;
use qergo::spectral::{
    c_clusters, inv_sqrt_near_identity, match_eigenvectors, projection_defect, FiniteSpectralSystem, QuasimodeBatch,
};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

mod common;
use common::*;

#[test]
fn randomized_instances_satisfy_the_conclusion() {
    let failures: Vec<String> = (0..100u64)
        .into_par_iter()
        .filter_map(|seed| {
            let inst = build_instance(1000 + seed);
            let r = match_eigenvectors(&inst.system, &inst.batch, C, inst.eps, DELTA).unwrap();
            assert!(r.hypotheses_hold);
            for (k, &j) in r.eigen_indices.iter().enumerate() {
                let u = inst.system.eigenvectors.column(j).into_owned();
                let oracle = gram_schmidt_defect(&u, &inst.batch.vectors);
                assert!((r.defects[k] - oracle).abs() < 1e-10, "seed {seed}: {} vs {oracle}", r.defects[k]);
                assert!((r.defects[k] - r.defects_gram_route[k]).abs() < 1e-8);
                assert!(r.defects[k] <= r.proof_route_defects[k] + 1e-12);
            }
            assert!(r.min_projected_norm_sq > r.projected_norm_bound);
            assert!(r.max_projected_overlap < r.projected_overlap_bound);
            (!r.conclusion_holds).then(|| format!("seed {seed}: {} < {}", r.count_within_bound, r.required_count))
        })
        .collect();
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn instances_exercise_partial_coverage() {
    // at least some instances must contain eigenvectors only half-covered
    let partial = (0..10u64)
        .filter(|&s| {
            let inst = build_instance(1000 + s);
            let r = match_eigenvectors(&inst.system, &inst.batch, C, inst.eps, DELTA).unwrap();
            r.m > r.n
        })
        .count();
    assert!(partial > 0);
}

#[test]
fn exact_eigenvectors_have_zero_defect() {
    let mut rng = stream(7, 0);
    let u = random_orthogonal(&mut rng, 50);
    let eig: Vec<f64> = (0..50).map(|j| j as f64).collect();
    let system = FiniteSpectralSystem::new(eig.clone(), u.clone()).unwrap();
    let idx: Vec<usize> = (10..30).collect();
    let cols: Vec<_> = idx.iter().map(|&j| u.column(j).into_owned()).collect();
    let batch = QuasimodeBatch::measured(&system, DMatrix::from_columns(&cols), idx.iter().map(|&j| eig[j]).collect()).unwrap();
    let r = match_eigenvectors(&system, &batch, 0.1, 0.04, 1e-3).unwrap();
    assert_eq!(r.m, r.n);
    assert!(r.hypotheses_hold);
    assert!(r.defects.iter().all(|&d| d < 1e-12));
    assert_eq!(r.count_within_bound, 20);
}

#[test]
fn too_many_eigenvalues_is_reported_not_raised() {
    let mut rng = stream(8, 0);
    let u = random_orthogonal(&mut rng, 30);
    // eigenvalues bunched so one window swallows many of them
    let eig: Vec<f64> = (0..30).map(|j| 1.0 + 1e-4 * j as f64).collect();
    let system = FiniteSpectralSystem::new(eig.clone(), u.clone()).unwrap();
    let batch = QuasimodeBatch::measured(&system, DMatrix::from_columns(&[u.column(0).into_owned()]), vec![eig[0]]).unwrap();
    let r = match_eigenvectors(&system, &batch, 0.01, 0.04, 1e-3).unwrap();
    assert!(!r.hypotheses_hold);
    assert!(!r.hypotheses[0].holds);
    assert_eq!(r.m, 30);
}

#[test]
fn projection_defect_agrees_with_gram_schmidt() {
    let mut rng = stream(9, 0);
    for _ in 0..20 {
        let basis = DMatrix::from_fn(40, 7, |_, _| rng.sample::<f64, _>(StandardNormal));
        let u = random_unit(&mut rng, 40);
        let d = projection_defect(&u, &basis).unwrap();
        assert!((d - gram_schmidt_defect(&u, &basis)).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&d));
    }
}

fn random_symmetric(seed: u64, dim: usize, hs: f64) -> DMatrix<f64> {
    let mut rng = stream(seed, 0);
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = &g + g.transpose();
    let n = s.norm();
    s * (hs / n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inv_sqrt_matches_eigendecomposition(seed in 0u64..1_000_000, dim in 1usize..12, hs in 0.0f64..0.49) {
        let e = random_symmetric(seed, dim, hs);
        let m = DMatrix::<f64>::identity(dim, dim) + &e;
        let a = inv_sqrt_near_identity(&m, 1e-13).unwrap();
        prop_assert!((&a - a.transpose()).amax() < 1e-15);
        prop_assert!((&a - eigen_inv_sqrt(&m)).amax() < 1e-11);
        let dev = (&a - DMatrix::<f64>::identity(dim, dim)).norm();
        prop_assert!(dev <= hs / (1.0 - hs) + 1e-12);
    }

    #[test]
    fn clusters_cover_exactly_the_window_union(values in prop::collection::vec(-10.0f64..10.0, 1..40), c in 0.01f64..1.0, probes in prop::collection::vec(-12.0f64..12.0, 50)) {
        let set = c_clusters(&values, c).unwrap();
        for w in set.windows.windows(2) {
            prop_assert!(w[0].1 < w[1].0 + 1e-12);
        }
        for &p in &probes {
            let covered = values.iter().any(|&v| (p - v).abs() <= c);
            // tolerance band at the window edges
            let near_edge = values.iter().any(|&v| ((p - v).abs() - c).abs() < 1e-9);
            if !near_edge {
                prop_assert_eq!(set.contains(p), covered);
            }
        }
        for (i, &v) in values.iter().enumerate() {
            prop_assert_eq!(set.window_of(v), Some(set.membership[i]));
        }
        // count of components = 1 + number of sorted gaps at least 2c
        let mut s = values.clone();
        s.sort_by(f64::total_cmp);
        let gaps = s.windows(2).filter(|w| w[1] - w[0] >= 2.0 * c * (1.0 - 1e-12)).count();
        prop_assert_eq!(set.windows.len(), gaps + 1);
    }
}

#[test]
fn random_symmetric_perturbation_bound() {
    for seed in 0..20 {
        let e = random_symmetric(seed, 8, 0.3);
        let m = DMatrix::<f64>::identity(8, 8) + &e;
        let a = inv_sqrt_near_identity(&m, 1e-14).unwrap();
        let dev = (&a - DMatrix::<f64>::identity(8, 8)).norm();
        assert!(dev <= 0.3 / 0.7);
        assert!((&a * &m * a.transpose() - DMatrix::<f64>::identity(8, 8)).norm() < 1e-13);
    }
}
