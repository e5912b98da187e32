use proptest::prelude::*;
use qergo::billiard::{area, MushroomParams};
use qergo::grid::{
    cluster_fraction, count_below, eigenvalue_branches, eigenvalues_below, lowest_eigenvalues, lowest_eigenvalues_with, rasterize,
    slope_constant, weyl_deficit, GridError, RasterDomain, SolverOptions, SpectrumSlice,
};
use qergo::quasimode::quasi_eigenvalues;
use qergo::special::bessel_zero;
use std::f64::consts::PI;
use std::sync::OnceLock;

fn mushroom() -> MushroomParams {
    MushroomParams::new(1.0, 2.0, 1.0).unwrap()
}

// Interior nodes of the unit square with spacing 1/m.
fn unit_square(m: i64) -> RasterDomain {
    RasterDomain::from_lattice(1.0 / m as f64, (1, m - 1), (1, m - 1), |_, _| true).unwrap()
}

// Exact spectrum of the 5-point Laplacian on an (a-1)×(b-1) interior grid.
fn discrete_rectangle_spectrum(a: i64, b: i64, h: f64) -> Vec<f64> {
    let s = |k: i64, m: i64| (k as f64 * PI / (2.0 * m as f64)).sin().powi(2);
    let mut v = Vec::new();
    for p in 1..a {
        for q in 1..b {
            v.push(4.0 / (h * h) * (s(p, a) + s(q, b)));
        }
    }
    v.sort_by(f64::total_cmp);
    v
}

fn continuum_square_spectrum(count: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (1..30).flat_map(|m| (1..30).map(move |n| PI * PI * (m * m + n * n) as f64)).collect();
    v.sort_by(f64::total_cmp);
    v.truncate(count);
    v
}

// Eigenvalues of the h = 0.01 mushroom below 400, shared by the Weyl tests.
fn mushroom_fine() -> &'static SpectrumSlice {
    static SLICE: OnceLock<SpectrumSlice> = OnceLock::new();
    SLICE.get_or_init(|| {
        let dom = rasterize(&mushroom(), 0.01).unwrap();
        eigenvalues_below(&dom, 400.0, &SolverOptions::default()).unwrap()
    })
}

#[test]
fn square_matches_separable_spectrum() {
    let dom = unit_square(200);
    let slice = lowest_eigenvalues(&dom, 20).unwrap();
    let exact = continuum_square_spectrum(20);
    let discrete = discrete_rectangle_spectrum(200, 200, 0.005);
    for j in 0..20 {
        let e = slice.eigenvalues[j];
        assert!((e - exact[j]).abs() / exact[j] < 0.01, "j={j}: {e} vs {}", exact[j]);
        assert!((e - discrete[j]).abs() / discrete[j] < 1e-9, "j={j}: {e} vs discrete {}", discrete[j]);
    }
}

#[test]
fn square_error_is_second_order() {
    let err = |m: i64| {
        let s = lowest_eigenvalues(&unit_square(m), 1).unwrap();
        s.eigenvalues[0] - 2.0 * PI * PI
    };
    let (e1, e2, e3) = (err(20), err(40), err(80));
    for r in [e1 / e2, e2 / e3] {
        assert!((r - 4.0).abs() < 0.2, "error ratio {r}");
    }
}

#[test]
fn disk_ground_state_matches_bessel_zero() {
    let j01 = bessel_zero(0, 1).unwrap().alpha;
    let dom = RasterDomain::from_predicate(0.01, [-1.0, 1.0, -1.0, 1.0], |x, y| x * x + y * y < 1.0).unwrap();
    let slice = lowest_eigenvalues(&dom, 1).unwrap();
    let e = slice.eigenvalues[0];
    assert!((e - j01 * j01).abs() / (j01 * j01) < 0.02, "{e} vs {}", j01 * j01);
}

#[test]
fn raster_area_close_and_gap_halves() {
    let p = mushroom();
    let a = area(&p);
    let gap = |h: f64| (rasterize(&p, h).unwrap().raster_area() - a).abs() / a;
    let (g1, g2, g3) = (gap(0.04), gap(0.02), gap(0.01));
    assert!(g3 < 0.01, "gap at h=0.01: {g3}");
    for r in [g1 / g2, g2 / g3] {
        assert!(r > 1.4 && r < 2.8, "gap ratio {r}");
    }
}

#[test]
fn raster_nodes_strictly_inside() {
    let p = mushroom();
    let dom = rasterize(&p, 0.02).unwrap();
    for k in 0..dom.dim() {
        let (x, y) = dom.node_position(k);
        assert!(p.contains_strictly([x, y]), "node ({x}, {y}) outside");
    }
    // aligned to the stalk: the wall columns and floor row carry no nodes
    assert!((0..dom.dim()).all(|k| {
        let (x, y) = dom.node_position(k);
        !(y <= 0.0 && ((x.abs() - 1.0).abs() < 1e-9 || (y + 1.0).abs() < 1e-9))
    }));
}

#[test]
fn rasterize_preconditions() {
    let p = mushroom();
    assert!(matches!(rasterize(&p, 0.2), Err(GridError::TooCoarse { .. })));
    assert!(matches!(rasterize(&p, 0.03), Err(GridError::Misaligned(_))));
    assert!(matches!(rasterize(&p, 0.0), Err(GridError::TooCoarse { .. })));
    assert!(matches!(rasterize(&p, 0.005), Err(GridError::TooLarge(_))));
    assert!(MushroomParams::new(1.0, 1.0, 1.0).is_err());
    assert!(MushroomParams::new(1.0, 2.0, 0.0).is_err());
}

#[test]
fn mushroom_spectrum_positive_increasing_with_small_residuals() {
    let dom = rasterize(&mushroom(), 0.02).unwrap();
    let slice = lowest_eigenvalues(&dom, 60).unwrap();
    assert_eq!(slice.n_computed, 60);
    assert!(slice.eigenvalues[0] > 0.0);
    assert!(slice.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    assert!(slice.residual_bounds.iter().all(|&r| r < 1e-8));
    // inertia agrees with the computed list
    for j in [0usize, 19, 59] {
        let (c, _) = count_below(&dom, slice.eigenvalues[j] * (1.0 + 1e-9)).unwrap();
        assert!(c > j, "count below E_{j} is {c}");
    }
}

#[test]
fn solver_is_deterministic_given_seed() {
    let dom = rasterize(&mushroom(), 0.05).unwrap();
    let opts = SolverOptions { seed: 7, ..SolverOptions::default() };
    let a = lowest_eigenvalues_with(&dom, 30, &opts).unwrap();
    let b = lowest_eigenvalues_with(&dom, 30, &opts).unwrap();
    assert_eq!(a.eigenvalues, b.eigenvalues);
    let c = lowest_eigenvalues_with(&dom, 30, &SolverOptions { seed: 8, ..opts }).unwrap();
    for (x, y) in a.eigenvalues.iter().zip(&c.eigenvalues) {
        assert!((x - y).abs() < 1e-9 * x);
    }
}

#[test]
fn too_many_eigenvalues_rejected() {
    let dom = unit_square(20);
    assert!(matches!(lowest_eigenvalues(&dom, 100), Err(GridError::TooManyEigenvalues { .. })));
    assert!(matches!(lowest_eigenvalues(&dom, 0), Err(GridError::TooManyEigenvalues { .. })));
}

#[test]
fn weyl_gap_within_bound_and_shrinking() {
    let p = mushroom();
    let slice = mushroom_fine();
    assert!(slice.residual_bounds.iter().all(|&r| r < 1e-8));
    let gaps: Vec<f64> = [10.0, 15.0, 20.0]
        .iter()
        .map(|&l| {
            let w = weyl_deficit(slice, &p, 0.01, l).unwrap();
            let direct = slice.eigenvalues.iter().filter(|&&e| e <= l * l).count();
            assert_eq!(w.n_count, direct);
            assert!((w.weyl_main - l * l * area(&p) / (4.0 * PI)).abs() < 1e-12);
            // boundary-term estimate: the count sits below the main term by about L/(λA)
            let predicted = -p.perimeter() / (l * area(&p));
            println!("lambda {l}: N {} main {:.2} gap {:.4} boundary estimate {predicted:.4}", w.n_count, w.weyl_main, w.relative_gap);
            w.relative_gap
        })
        .collect();
    assert!(gaps[1].abs() <= 0.15 && gaps[2].abs() <= 0.15, "gaps {gaps:?}");
    assert!(gaps[2].abs() < gaps[1].abs() && gaps[1].abs() < gaps[0].abs(), "gaps {gaps:?}");
}

#[test]
fn weyl_edge_cases() {
    let p = mushroom();
    let dom = rasterize(&p, 0.05).unwrap();
    let slice = eigenvalues_below(&dom, 20.0, &SolverOptions::default()).unwrap();
    let w = weyl_deficit(&slice, &p, 0.05, 0.5).unwrap();
    assert_eq!(w.n_count, 0);
    assert!(matches!(weyl_deficit(&slice, &p, 0.05, 6.0), Err(GridError::UntrustedRange(_))));
    assert!(matches!(weyl_deficit(&slice, &p, 0.05, 5.0), Err(GridError::SliceTooShort { .. })));
}

#[test]
fn hadamard_branches_monotone_with_bounded_slope() {
    let ps: Vec<MushroomParams> = [0.5, 0.75, 1.0].iter().map(|&t| MushroomParams::new(1.0, 2.0, t).unwrap()).collect();
    let table = eigenvalue_branches(&ps, 0.025, 100, &SolverOptions::default(), 1e-6).unwrap();
    assert!(table.monotone.iter().all(|&m| m), "max increase {}", table.max_increase);
    assert!(table.max_increase <= 1e-6);
    assert!(table.areas.windows(2).all(|w| w[0] < w[1]));
    for (i, r) in table.slope_ratio.iter().enumerate() {
        assert!(*r <= 1.0, "interval {i}: slope ratio {r}");
    }
    assert!((slope_constant(0.5, 1.0) - 1.5).abs() < 1e-15);
}

#[test]
fn branches_reject_bad_t_grid() {
    let a = MushroomParams::new(1.0, 2.0, 1.0).unwrap();
    let b = MushroomParams::new(1.0, 2.0, 0.5).unwrap();
    assert!(matches!(eigenvalue_branches(&[a, b], 0.05, 5, &SolverOptions::default(), 1e-6), Err(GridError::Invalid(_))));
}

#[test]
fn cluster_fraction_reported_under_refinement() {
    let p = mushroom();
    let fine = mushroom_fine();
    let coarse = eigenvalues_below(&rasterize(&p, 0.02).unwrap(), 400.0, &SolverOptions::default()).unwrap();
    let quasi = quasi_eigenvalues(&p, 20.0, 0.1).unwrap();
    let c = 1.0;
    let f_coarse = cluster_fraction(&coarse.eigenvalues, &quasi, c);
    let f_fine = cluster_fraction(&fine.eigenvalues, &quasi, c);
    println!("cluster fraction c={c}: h=0.02 {f_coarse:.4}, h=0.01 {f_fine:.4}, change {:.4}", (f_fine - f_coarse).abs());
    assert!((0.0..=1.0).contains(&f_coarse) && (0.0..=1.0).contains(&f_fine));
    assert_eq!(cluster_fraction(&[], &quasi, c), 0.0);
    assert_eq!(cluster_fraction(&quasi, &quasi, 0.5), 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rectangles_match_exact_discrete_spectrum(a in 12i64..40, b in 12i64..40, count in 1usize..8) {
        let h = 0.05;
        let dom = RasterDomain::from_lattice(h, (1, a - 1), (1, b - 1), |_, _| true).unwrap();
        let slice = lowest_eigenvalues(&dom, count).unwrap();
        let exact = discrete_rectangle_spectrum(a, b, h);
        for j in 0..count {
            prop_assert!((slice.eigenvalues[j] - exact[j]).abs() < 1e-9 * exact[j]);
        }
    }

    #[test]
    fn inertia_count_matches_exact(a in 5i64..25, b in 5i64..25, frac in 0.0f64..1.0) {
        let h = 0.1;
        let dom = RasterDomain::from_lattice(h, (1, a - 1), (1, b - 1), |_, _| true).unwrap();
        let exact = discrete_rectangle_spectrum(a, b, h);
        let s = frac * exact[exact.len() - 1] * 1.1;
        let (c, used) = count_below(&dom, s).unwrap();
        prop_assert_eq!(c, exact.iter().filter(|&&e| e < used).count());
    }
}
