//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use num_complex::Complex64;
use qergo::billiard::{liouville_fractions, monte_carlo_fractions, MushroomParams};
use qergo::circle::{kam_iterate, rotation_number, CircleMap};
use qergo::flow::{full_density_subsequence, full_upper_density_subsequence, occupancy, synth_flow, DensityFamilyMember, FlowConfig, WindowConfig};
use qergo::fourier::TorusFourier;
use qergo::grid::{eigenvalue_branches, eigenvalues_below, rasterize, weyl_deficit, SolverOptions};
use qergo::quasimode::{count_quasi_eigenvalues, quasimode_residual, QuasimodeSpec};
use qergo::rng::stream;
use qergo::spectral::match_eigenvectors;
use qergo::torus::{
    apply_transport, fourier_decay_check, quasi_lattice, regularized_denominator, solve_homological, truncate_with_bound, ActionLattice,
    ActionSet, FrequencyVector,
};
use rand::Rng;
use rayon::prelude::*;
use std::f64::consts::{PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

mod common;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64, detail: String) -> Outcome {
    let t = elapsed.as_secs_f64();
    check(t < limit_s, format!("{detail}; {t:.1}s of {limit_s}s allowed"))
}

fn mushroom(t: f64) -> MushroomParams {
    MushroomParams::new(1.0, 2.0, t).unwrap()
}

fn golden() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>()
}

fn liouville_fraction() -> Outcome {
    let start = Instant::now();
    let p = mushroom(1.0);
    let d = liouville_fractions(&p).map_err(|e| e.to_string())?.d;
    let mc = monte_carlo_fractions(&p, 1_000_000, 7).map_err(|e| e.to_string())?;
    let z = (mc.d_hat - d) / mc.stderr;
    if z.abs() > 3.0 {
        return Err(format!("d={d:.5} d_hat={:.5} z={z:.2}", mc.d_hat));
    }
    within(start.elapsed(), 30.0, format!("d={d:.5} d_hat={:.5} z={z:.2}", mc.d_hat))
}

fn quasimode_counting() -> Outcome {
    let start = Instant::now();
    let c: f64 = 2.0;
    let oracle = (4.0 / 8.0) * (1.0 - 2.0 / (PI * c * c) * (c * c - 1.0).sqrt() - 2.0 / PI * (1.0 / c).asin());
    let r = count_quasi_eigenvalues(&mushroom(1.0), 200.0, 0.01).map_err(|e| e.to_string())?;
    let rel = (r.coefficient - oracle) / oracle;
    let detail = format!("count={} count/λ²={:.4} closed form={oracle:.4} rel={rel:+.4}", r.count, r.coefficient);
    if rel.abs() >= 0.05 || (oracle - 0.1955).abs() > 1e-4 {
        return Err(detail);
    }
    within(start.elapsed(), 120.0, detail)
}

fn residual_decay() -> Outcome {
    let start = Instant::now();
    let res = |n| -> Result<f64, String> {
        let spec = QuasimodeSpec::new(&mushroom(1.0), 0.5, n, 1).map_err(|e| e.to_string())?;
        Ok(quasimode_residual(&spec).map_err(|e| e.to_string())?.relative)
    };
    let (r50, r100, r200) = (res(50)?, res(100)?, res(200)?);
    let detail = format!("r(200)={r200:.2e} r(100)/r(50)={:.2e} r(200)/r(100)={:.2e}", r100 / r50, r200 / r100);
    if !(r200 < 1e-2 && r100 / r50 < 0.1 && r200 / r100 < 0.1) {
        return Err(detail);
    }
    within(start.elapsed(), 60.0, detail)
}

fn spectral_matching() -> Outcome {
    let failures: Vec<u64> = (0..100u64)
        .into_par_iter()
        .filter(|&seed| {
            let inst = common::build_instance(1000 + seed);
            let r = match_eigenvectors(&inst.system, &inst.batch, common::C, inst.eps, common::DELTA).unwrap();
            !(r.hypotheses_hold && r.conclusion_holds)
        })
        .collect();
    check(failures.is_empty(), format!("100 instances of dimension {}, failures: {failures:?}", common::DIM))
}

fn grid_weyl() -> Outcome {
    let start = Instant::now();
    let p = mushroom(1.0);
    let dom = rasterize(&p, 0.01).map_err(|e| e.to_string())?;
    let slice = eigenvalues_below(&dom, 400.0, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let g15 = weyl_deficit(&slice, &p, 0.01, 15.0).map_err(|e| e.to_string())?.relative_gap;
    let g20 = weyl_deficit(&slice, &p, 0.01, 20.0).map_err(|e| e.to_string())?.relative_gap;
    let detail = format!("gap(15)={g15:+.4} gap(20)={g20:+.4}, {} eigenvalues", slice.n_computed);
    if !(g15.abs() <= 0.15 && g20.abs() <= 0.15 && g20.abs() < g15.abs()) {
        return Err(detail);
    }
    within(start.elapsed(), 300.0, detail)
}

fn hadamard() -> Outcome {
    let ps: Vec<MushroomParams> = [0.5, 0.75, 1.0].iter().map(|&t| mushroom(t)).collect();
    let table = eigenvalue_branches(&ps, 0.025, 100, &SolverOptions::default(), 1e-6).map_err(|e| e.to_string())?;
    let bad = table.monotone.iter().filter(|&&m| !m).count();
    check(
        bad == 0 && table.monotone.len() == 100,
        format!("{} branches, {bad} non-monotone, max increase {:.2e} (h=0.025)", table.monotone.len(), table.max_increase),
    )
}

fn circle_kam() -> Outcome {
    let theta = golden();
    let f = CircleMap::sine_perturbation(theta, 1e-3, 1, 0.5).map_err(|e| e.to_string())?;
    let r = kam_iterate(&f, theta, 6, 1e-10).map_err(|e| e.to_string())?;
    let expo = r.contraction_exponent().unwrap_or(f64::NAN);
    let rho_err = (rotation_number(&f.shifted(r.lambda), 100_000, true) - theta).abs();
    check(
        r.converged && r.defect < 1e-10 && r.iterations <= 6 && expo >= 1.4 && rho_err < 1e-8,
        format!("defect={:.2e} after {} iterations, exponent={expo:.3}, rotation error={rho_err:.1e}", r.defect, r.iterations),
    )
}

fn homological() -> Outcome {
    let k_max = 8;
    let w = vec![1.0, golden()];
    let probe = FrequencyVector::new(w.clone(), 1.0, 1.5).map_err(|e| e.to_string())?;
    let omega = FrequencyVector::new(w, 0.5 * probe.margin(k_max), 1.5).map_err(|e| e.to_string())?;
    let mut rng = stream(22, 0);
    let mut f = TorusFourier::zeros(2, k_max);
    let modes: Vec<Vec<i64>> = f.iter().map(|(k, _)| k).collect();
    for k in &modes {
        if k.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0) {
            f.set_real_mode(k, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        }
    }
    let u = solve_homological(&f, &omega).map_err(|e| e.to_string())?;
    let plug = apply_transport(&u, &omega).map_err(|e| e.to_string())?.combine(1.0, &f, -1.0).mass() / f.mass();

    // denominator sweep over random frequency vectors and wavevectors
    let mut rng = stream(21, 0);
    let mut worst = f64::INFINITY;
    for _ in 0..10_000 {
        let n = rng.random_range(2..=4usize);
        let kappa = rng.random_range(0.01..0.5);
        let tau = n as f64 - 1.0 + rng.random_range(0.1..2.0);
        let om: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut k: Vec<i64> = (0..n).map(|_| rng.random_range(-6..=6)).collect();
        if k.iter().all(|&v| v == 0) {
            k[0] = 1;
        }
        let fv = FrequencyVector::new(om, kappa, tau).map_err(|e| e.to_string())?;
        let norm: f64 = k.iter().map(|v| v.abs() as f64).sum();
        worst = worst.min(regularized_denominator(&fv, &k).norm() / (kappa * norm.powf(-tau)));
    }
    check(
        plug < 1e-12 && worst >= 0.25,
        format!("relative plug-back residual={plug:.2e}, min |denominator|/(κ|k|^-τ)={worst:.3}"),
    )
}

fn appendix_bounds() -> Outcome {
    let rho = 2.0 - 3f64.sqrt();
    let sigma = rho.recip().ln() / TAU;
    let f = TorusFourier::from_fn(1, 128, |k| Complex64::new(rho.powi(k[0].abs() as i32), 0.0))
        .and_then(|f| f.with_decay(sigma))
        .map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut ok = true;
    for k in [10usize, 20, 40] {
        let rec = truncate_with_bound(&f, k, sigma / 2.0).map_err(|e| e.to_string())?;
        // the tail of a positive geometric series peaks at x = 0
        let oracle = 2.0 * rho.powi(k as i32 + 1) / (1.0 - rho);
        ok &= (rec.tail_norm - oracle).abs() < 1e-10 * oracle && rec.tail_norm <= rec.bound;
        parts.push(format!("K={k}: {:.1e}≤{:.1e}", rec.tail_norm, rec.bound));
    }
    let g = TorusFourier::from_fn(1, 64, |m| Complex64::new(rho.powi(m[0].abs() as i32) / 3f64.sqrt(), 0.0)).map_err(|e| e.to_string())?;
    let exact = fourier_decay_check(&g, sigma - 1e-6).map_err(|e| e.to_string())?.passes;
    let inflated = fourier_decay_check(&g, 1.2 * sigma).map_err(|e| e.to_string())?.passes;
    check(ok && exact && !inflated, format!("{}; decay check exact σ={exact}, 1.2σ={inflated}", parts.join(" ")))
}

fn flow_occupancy() -> Outcome {
    let start = Instant::now();
    let base = FlowConfig::default();
    let cfg = WindowConfig::new(1e-3, base.default_band()).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut missing = Vec::new();
    for seed in 0..20 {
        let model = synth_flow(&FlowConfig { seed, ..base }).map_err(|e| e.to_string())?;
        let r = occupancy(&model, &cfg, 201).map_err(|e| e.to_string())?;
        worst = worst.max(r.fast_mean);
        if r.t_star.is_none() {
            missing.push(seed);
        }
    }
    let detail = format!("worst fast-cohort mean q={worst:.4} over 20 seeds, seeds without t*: {missing:?}");
    if !(worst <= 0.35 && missing.is_empty()) {
        return Err(detail);
    }
    within(start.elapsed(), 60.0, detail)
}

fn lattice_weyl() -> Outcome {
    let count = |h: f64| -> Result<usize, String> {
        let lat = ActionLattice { set: ActionSet::Ball { center: vec![0.5, 0.5], radius: 0.3 }, h, l: 1.0, maslov: vec![0, 0] };
        Ok(quasi_lattice(&lat).map_err(|e| e.to_string())?.len())
    };
    let n = count(1e-3)?;
    let rel = (TAU * 1e-3).powi(2) * n as f64 / (TAU * TAU * PI * 0.09) - 1.0;
    let pts = [1e-2f64, 5e-3, 2.5e-3]
        .iter()
        .map(|&h| Ok(((1.0 / h).ln(), (count(h)? as f64).ln())))
        .collect::<Result<Vec<_>, String>>()?;
    let slope = fit_slope(&pts);
    check(rel.abs() < 0.05 && (slope / 2.0 - 1.0).abs() < 0.02, format!("h=1e-3 relative error={rel:+.4}, fitted exponent={slope:.4}"))
}

fn noisy_g(n: usize) -> f64 {
    let h = (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    if h % 100 < 8 {
        1.0
    } else {
        1.0 / (n as f64).sqrt()
    }
}

fn density_lemma() -> Outcome {
    let family = || -> Vec<DensityFamilyMember<'static>> {
        (1..=6)
            .map(|j| DensityFamilyMember { contains: Box::new(|n| noisy_g(n) < 0.5), eps: 0.02 / j as f64, eps_prime: 0.4 / j as f64 })
            .collect()
    };
    let mut prev: Option<f64> = None;
    let mut worst_loss = 0.0f64;
    let mut ok = true;
    for h in [2_500, 5_000, 10_000, 20_000, 40_000, 80_000] {
        let lower = full_density_subsequence(&noisy_g, &family(), 0.9, h, 0.02).map_err(|e| e.to_string())?;
        let upper = full_upper_density_subsequence(&noisy_g, &family(), 0.9, h, 0.02).map_err(|e| e.to_string())?;
        ok &= lower.g_conclusion && lower.density_conclusion && upper.g_conclusion && upper.density_conclusion;
        if let Some(p) = prev {
            worst_loss = worst_loss.max(p - lower.density_at_horizon);
        }
        prev = Some(lower.density_at_horizon);
    }
    check(ok && worst_loss <= 0.01, format!("horizons 2.5e3..8e4, both conclusions={ok}, worst doubling loss={worst_loss:.4}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("liouville-fraction", liouville_fraction),
        ("quasimode-counting", quasimode_counting),
        ("quasimode-residual-decay", residual_decay),
        ("spectral-matching", spectral_matching),
        ("grid-weyl", grid_weyl),
        ("hadamard-monotonicity", hadamard),
        ("circle-kam", circle_kam),
        ("homological-solver", homological),
        ("fourier-bounds", appendix_bounds),
        ("flow-occupancy", flow_occupancy),
        ("quasi-lattice-weyl", lattice_weyl),
        ("density-lemma", density_lemma),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let t = start.elapsed().as_secs_f64();
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {name:<26} [{t:7.1}s] {detail}", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
