//! Quasimode family: normalisation, residual decay, near-orthogonality and counting.

use qergo::billiard::MushroomParams;
use qergo::quasimode::*;
use qergo::special::{bessel_j, envelope_bound};
use std::f64::consts::PI;

fn mushroom() -> MushroomParams {
    MushroomParams::new(1.0, 2.0, 1.0).unwrap()
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Envelope-based upper bound on the relative residual, independent of the
/// library's quadrature: |J_n(y)| ≤ E_n(y), |J_n'| ≤ (E_{n-1} + E_{n+1})/2 and
/// the normalisation bounded below by the exact disk integral minus the
/// envelope of the cut-off part.
fn envelope_residual_bound(spec: &QuasimodeSpec) -> f64 {
    let (r1, rc) = spec.cutoff.transition().unwrap();
    let n = spec.n();
    let s = spec.alpha() / spec.r2;
    // sup of |χ'|, |χ''| sampled densely, with a small safety margin
    let samples = 20_000;
    let (mut c1, mut c2) = (0.0f64, 0.0f64);
    for i in 0..=samples {
        let r = r1 + (rc - r1) * i as f64 / samples as f64;
        let (_, d1, d2) = spec.cutoff.eval(r);
        c1 = c1.max(d1.abs());
        c2 = c2.max(d2.abs());
    }
    c1 *= 1.01;
    c2 *= 1.01;
    let integrand = |r: f64| {
        let y = s * r;
        let j = envelope_bound(n, y);
        let jd = 0.5 * (envelope_bound(n - 1, y) + envelope_bound(n + 1, y));
        let g = 2.0 * c1 * s * jd + (c2 + c1 / r) * j;
        g * g * r
    };
    let num = 0.5 * PI * simpson(integrand, r1, rc, 4000);
    let full = 0.5 * spec.r2 * spec.r2 * bessel_j(n + 1, spec.alpha()).unwrap().powi(2);
    let cut = simpson(|r| envelope_bound(n, s * r).powi(2) * r, 0.0, rc, 4000);
    let norm_sq = 0.5 * PI * (full - cut);
    assert!(norm_sq > 0.0);
    (num / norm_sq).sqrt() / spec.quasi_eigenvalue()
}

#[test]
fn eval_vanishes_on_axis_and_inside_cutoff() {
    let q = QuasimodeSpec::new(&mushroom(), 0.5, 60, 1).unwrap();
    for &r in &[0.2, 0.9, 1.0, 1.5, 1.9] {
        assert_eq!(quasimode_eval(&q, r, 0.0).unwrap().abs(), 0.0);
    }
    for &r in &[0.0, 0.5, 1.0] {
        assert_eq!(quasimode_eval(&q, r, 1.0).unwrap(), 0.0);
    }
}

#[test]
fn normalisation_by_independent_quadrature() {
    for &(n, k) in &[(40u32, 1u32), (60, 2), (120, 1)] {
        let q = QuasimodeSpec::new(&mushroom(), 0.5, n, k).unwrap();
        // ∫∫ v² r dr dθ: radial Simpson times a θ trapezoid sum
        let radial = simpson(
            |r| {
                let v = quasimode_eval(&q, r, PI / (2.0 * n as f64)).unwrap();
                v * v * r
            },
            1.0,
            2.0,
            20_000,
        );
        let m = 4 * n as usize;
        let angular: f64 = (0..m)
            .map(|i| {
                let th = PI * i as f64 / m as f64;
                (n as f64 * th).sin().powi(2)
            })
            .sum::<f64>()
            * PI
            / m as f64;
        // the radial slice was taken at sin(nθ) = 1
        let total = radial * angular;
        assert!((total - 1.0).abs() < 1e-8, "n={n} k={k}: {total}");
    }
}

#[test]
fn admissibility_enforced() {
    assert!(matches!(
        QuasimodeSpec::new(&mushroom(), 0.5, 3, 1),
        Err(QuasimodeError::NotAdmissible { .. })
    ));
    assert!(matches!(QuasimodeSpec::new(&mushroom(), 0.5, 0, 1), Err(QuasimodeError::ZeroOrder)));
}

#[test]
fn identity_cutoff_has_zero_residual() {
    let q = QuasimodeSpec::without_cutoff(2.0, 7, 3).unwrap();
    let r = quasimode_residual(&q).unwrap();
    assert_eq!(r.absolute, 0.0);
}

#[test]
fn residuals_respect_envelope_bound() {
    for &eps in &[0.3, 0.5] {
        for &n in &[50u32, 100, 200] {
            let q = QuasimodeSpec::new(&mushroom(), eps, n, 1).unwrap();
            let r = quasimode_residual(&q).unwrap();
            let bound = envelope_residual_bound(&q);
            assert!(r.relative <= bound, "eps={eps} n={n}: {} > {}", r.relative, bound);
            assert!(r.relative > 0.0);
        }
    }
}

#[test]
fn residual_decay() {
    let res = |n| quasimode_residual(&QuasimodeSpec::new(&mushroom(), 0.5, n, 1).unwrap()).unwrap().relative;
    let (r50, r100, r200) = (res(50), res(100), res(200));
    assert!(r200 < 1e-2);
    assert!(r100 / r50 < 0.1, "{r100} / {r50}");
    assert!(r200 / r100 < 0.1, "{r200} / {r100}");
}

#[test]
fn overlap_examples() {
    let wide = MushroomParams::new(0.5, 2.0, 1.0).unwrap();
    let a = QuasimodeSpec::new(&wide, 0.1, 3, 1).unwrap();
    let b = QuasimodeSpec::new(&wide, 0.1, 5, 1).unwrap();
    assert!(quasimode_overlap(&a, &b).unwrap().abs() < 1e-12);
    assert!((quasimode_overlap(&a, &a).unwrap() - 1.0).abs() < 1e-8);

    let m = mushroom();
    let a = QuasimodeSpec::new(&m, 0.5, 100, 1).unwrap();
    let b = QuasimodeSpec::new(&m, 0.5, 100, 2).unwrap();
    let ov = quasimode_overlap(&a, &b).unwrap();
    // envelope bound on the cut-off contribution
    let (sa, sb) = (a.alpha() / 2.0, b.alpha() / 2.0);
    let (_, rc) = a.cutoff.transition().unwrap();
    let env = 0.5 * PI * simpson(|r| envelope_bound(100, sa * r) * envelope_bound(100, sb * r) * r, 0.0, rc, 4000)
        / (a.norm * b.norm);
    assert!(ov.abs() <= env, "{ov} vs {env}");
    assert!(ov.abs() < 1e-3);
}

#[test]
fn gram_of_twenty_high_order_quasimodes() {
    let m = mushroom();
    let specs: Vec<QuasimodeSpec> = (0..10u32)
        .flat_map(|i| [(100 + 3 * (i / 2), 1 + i % 2)])
        .chain((0..10u32).map(|i| (130 + i, 1 + i % 3)))
        .map(|(n, k)| QuasimodeSpec::new(&m, 0.5, n, k).unwrap())
        .collect();
    assert_eq!(specs.len(), 20);
    let mut worst = 0.0f64;
    for (i, a) in specs.iter().enumerate() {
        for (j, b) in specs.iter().enumerate() {
            let g = quasimode_overlap(a, b).unwrap();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    assert!(worst < 1e-2, "{worst}");
}

#[test]
fn counting_small_lambda_is_empty() {
    assert_eq!(count_quasi_eigenvalues(&mushroom(), 1.0, 0.01).unwrap().count, 0);
}

#[test]
fn counting_monotone_and_stabilising() {
    let m = mushroom();
    let mut prev = 0;
    for i in 1..=40 {
        let c = count_quasi_eigenvalues(&m, 2.5 * i as f64, 0.1).unwrap().count;
        assert!(c >= prev);
        prev = c;
    }
    let coef = |l: f64| count_quasi_eigenvalues(&m, l, 0.01).unwrap().coefficient;
    let c: Vec<f64> = [50.0, 100.0, 200.0, 400.0].iter().map(|&l| coef(l)).collect();
    let d: Vec<f64> = c.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(d[1] < d[0] && d[2] < d[1], "{c:?}");
}

#[test]
fn counting_coefficient_near_closed_form() {
    let r = count_quasi_eigenvalues(&mushroom(), 200.0, 0.01).unwrap();
    assert!((r.closed_form - 0.19550).abs() < 1e-5);
    assert!((r.coefficient - r.closed_form).abs() / r.closed_form < 0.05, "{r:?}");
}
