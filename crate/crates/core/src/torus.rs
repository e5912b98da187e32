//! Diophantine frequencies on the n-torus, the regularized homological
//! equation, analytic-estimate checks and the quasi-eigenvalue lattice.
//!
//! |k| is the ℓ¹ norm throughout. Period one in every angle.

use crate::fourier::{l1, FourierError, TorusFourier};
use crate::rng::stream;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TorusError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("input has nonzero mean {0:e}")]
    NonzeroMean(f64),
    #[error("decay metadata required")]
    MissingDecay,
    #[error(transparent)]
    Fourier(#[from] FourierError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiophantineParams {
    pub kappa: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyVector {
    pub omega: Vec<f64>,
    pub diop: DiophantineParams,
}

impl FrequencyVector {
    pub fn new(omega: Vec<f64>, kappa: f64, tau: f64) -> Result<Self, TorusError> {
        let n = omega.len();
        if n == 0 || omega.iter().any(|w| !w.is_finite()) {
            return Err(TorusError::InvalidParameters("omega must be a finite nonempty vector".into()));
        }
        if !(kappa > 0.0) || !(tau > n as f64 - 1.0) {
            return Err(TorusError::InvalidParameters(format!("need kappa > 0 and tau > {}, got {kappa}, {tau}", n - 1)));
        }
        Ok(Self {
            omega,
            diop: DiophantineParams { kappa, tau },
        })
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn dot(&self, k: &[i64]) -> f64 {
        self.omega.iter().zip(k).map(|(w, &ki)| w * ki as f64).sum()
    }

    /// |⟨ω,k⟩|·|k|^τ for k ≠ 0.
    pub fn scaled_divisor(&self, k: &[i64]) -> f64 {
        self.dot(k).abs() * (l1(k) as f64).powf(self.diop.tau)
    }

    /// min over 0 < |k|∞ ≤ K of |⟨ω,k⟩||k|^τ / κ.
    pub fn margin(&self, k_max: usize) -> f64 {
        let probe = TorusFourier::zeros(self.dim(), k_max);
        probe
            .iter()
            .filter(|(k, _)| k.iter().any(|&v| v != 0))
            .map(|(k, _)| self.scaled_divisor(&k) / self.diop.kappa)
            .fold(f64::INFINITY, f64::min)
    }
}

fn smoothstep(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        a / (a + b)
    }
}

/// 1 on [0, κ/4], 0 on [κ/2, ∞), monotone exp-mollifier profile in between.
pub fn gevrey_bump(x: f64, kappa: f64) -> f64 {
    1.0 - smoothstep((x - kappa / 4.0) / (kappa / 4.0))
}

/// g_k = ⟨ω,k⟩ + iκ|k|^{−τ} ψ(|⟨ω,k⟩||k|^τ).
pub fn regularized_denominator(omega: &FrequencyVector, k: &[i64]) -> Complex64 {
    assert!(k.iter().any(|&v| v != 0), "k must be nonzero");
    let DiophantineParams { kappa, tau } = omega.diop;
    let dot = omega.dot(k);
    let norm = l1(k) as f64;
    let psi = gevrey_bump(dot.abs() * norm.powf(tau), kappa);
    Complex64::new(dot, kappa * norm.powf(-tau) * psi)
}

fn check_dims(f: &TorusFourier, omega: &FrequencyVector) -> Result<(), TorusError> {
    if f.dim() != omega.dim() {
        return Err(TorusError::InvalidParameters(format!(
            "series on T^{} with frequency in R^{}",
            f.dim(),
            omega.dim()
        )));
    }
    Ok(())
}

/// û(k) = f̂(k)/(i g_k), û(0) = 0.
pub fn solve_homological(f: &TorusFourier, omega: &FrequencyVector) -> Result<TorusFourier, TorusError> {
    check_dims(f, omega)?;
    let mean = f.mean().norm();
    if mean > 1e-14 * f.mass().max(f64::MIN_POSITIVE) {
        return Err(TorusError::NonzeroMean(mean));
    }
    Ok(f.map_modes(|k, c| {
        if k.iter().all(|&v| v == 0) {
            Complex64::new(0.0, 0.0)
        } else {
            c / (Complex64::i() * regularized_denominator(omega, k))
        }
    }))
}

/// L_ω u = ⟨ω, ∂_θ⟩u in the angle variables θ = 2πx: û(k) ↦ i⟨k,ω⟩û(k).
pub fn apply_transport(u: &TorusFourier, omega: &FrequencyVector) -> Result<TorusFourier, TorusError> {
    check_dims(u, omega)?;
    Ok(u.map_modes(|k, c| c * Complex64::new(0.0, omega.dot(k))))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomologicalResiduals {
    /// ‖L_ω u − f‖ / ‖f‖ in coefficient mass.
    pub exact: f64,
    /// ‖i g_k û − f̂‖ / ‖f‖.
    pub regularized: f64,
    /// Number of modes where the bump is active (ψ > 0).
    pub active_modes: usize,
}

pub fn homological_residuals(f: &TorusFourier, u: &TorusFourier, omega: &FrequencyVector) -> Result<HomologicalResiduals, TorusError> {
    check_dims(f, omega)?;
    let lu = apply_transport(u, omega)?;
    let scale = f.mass().max(f64::MIN_POSITIVE);
    let exact = lu.combine(1.0, f, -1.0).mass() / scale;
    let mut reg = 0.0;
    let mut active = 0;
    for (k, c) in f.iter() {
        if k.iter().all(|&v| v == 0) {
            continue;
        }
        let g = regularized_denominator(omega, &k);
        if g.im != 0.0 {
            active += 1;
        }
        reg += (Complex64::i() * g * u.coeff(&k) - c).norm();
    }
    Ok(HomologicalResiduals {
        exact,
        regularized: reg / scale,
        active_modes: active,
    })
}

/// C(n, δ) = n 2ⁿ / (1 − e^{−2πδ})ⁿ.
pub fn truncation_constant(n: usize, delta: f64) -> f64 {
    n as f64 * 2f64.powi(n as i32) / (1.0 - (-TAU * delta).exp()).powi(n as i32)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationRecord {
    /// Sup of the tail f − T_K f on a real grid.
    pub tail_norm: f64,
    /// Σ_{|k|∞>K} |f̂_k|, an upper bound for the sup.
    pub tail_mass: f64,
    /// C(n,δ) Kⁿ e^{−2πKδ} ‖f‖_δ.
    pub bound: f64,
    /// Majorant norm at width δ.
    pub norm: f64,
}

/// Tail of the truncation to |k|∞ ≤ K against C(n,δ) Kⁿ e^{−2πKδ} ‖f‖_δ,
/// where ‖·‖_δ is the weighted majorant and 0 < δ < σ.
pub fn truncate_with_bound(f: &TorusFourier, k: usize, delta: f64) -> Result<TruncationRecord, TorusError> {
    let decay = f.decay().ok_or(TorusError::MissingDecay)?;
    if !(delta > 0.0 && delta < decay.sigma) || k == 0 {
        return Err(TorusError::InvalidParameters(format!("need 0 < delta < {} and K > 0", decay.sigma)));
    }
    let n = f.dim();
    let tail = f.combine(1.0, &f.truncated(k), -1.0);
    let grid = (4 * f.k_max() + 4).next_power_of_two();
    let tail_norm = tail.grid_values(grid)?.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let norm = f.majorant_norm(delta);
    Ok(TruncationRecord {
        tail_norm,
        tail_mass: f.tail_mass(k),
        bound: truncation_constant(n, delta) * (k as f64).powi(n as i32) * (-TAU * k as f64 * delta).exp() * norm,
        norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCheck {
    pub passes: bool,
    /// Strip sup-norm surrogate from the modes |m|∞ ≤ K/2.
    pub norm: f64,
    /// max_m |f̂(m)| e^{2π|m|σ} / norm.
    pub worst_ratio: f64,
}

/// |f̂(m)| ≤ e^{−2π|m|₁σ}‖f‖ for every stored m, with ‖f‖ the sup of the
/// resolved part (|m|∞ ≤ K/2) on the boundary of the strip of width σ.
pub fn fourier_decay_check(f: &TorusFourier, sigma: f64) -> Result<DecayCheck, TorusError> {
    if !(sigma > 0.0) {
        return Err(TorusError::InvalidParameters("sigma must be positive".into()));
    }
    let grid = (8 * f.k_max() + 8).next_power_of_two();
    let norm = f.strip_sup_norm(sigma, f.k_max() / 2, grid)?;
    let worst_ratio = f
        .iter()
        .map(|(m, c)| c.norm() * (TAU * sigma * l1(&m) as f64).exp() / norm)
        .fold(0.0, f64::max);
    Ok(DecayCheck {
        passes: worst_ratio <= 1.0 + 1e-12,
        norm,
        worst_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyRow {
    pub order: u32,
    /// sup of |f^{(α)}| on Im x = ±(σ − r).
    pub derivative_norm: f64,
    /// α! r^{−α} A, with A the sup on Im x = ±σ.
    pub bound: f64,
}

/// Cauchy estimate check for a one-dimensional series, orders 0..=max_order.
pub fn cauchy_check(f: &TorusFourier, sigma: f64, r: f64, max_order: u32) -> Result<Vec<CauchyRow>, TorusError> {
    if f.dim() != 1 || !(r > 0.0 && r < sigma) {
        return Err(TorusError::InvalidParameters("need a 1-d series and 0 < r < sigma".into()));
    }
    let grid = (8 * f.k_max() + 8).next_power_of_two();
    let a = f.strip_sup_norm(sigma, f.k_max(), grid)?;
    let mut g = f.clone();
    let mut fact = 1.0;
    let mut rows = Vec::new();
    for order in 0..=max_order {
        if order > 0 {
            g = g.derivative(0);
            fact *= order as f64;
        }
        rows.push(CauchyRow {
            order,
            derivative_norm: g.strip_sup_norm(sigma - r, g.k_max(), grid)?,
            bound: fact * r.powi(-(order as i32)) * a,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiophantineMeasure {
    pub kappas: Vec<f64>,
    pub bad_fractions: Vec<f64>,
    /// Least-squares slope of log(bad fraction) against log κ.
    pub fit_slope: f64,
}

/// Fraction of ω ∈ [0,1)ⁿ with |⟨ω,k⟩| < κ/|k|^τ for some 0 < |k|₁ ≤ K, for
/// each κ in the sweep using the same samples.
pub fn diophantine_measure(kappas: &[f64], tau: f64, n: usize, k_max: usize, samples: usize, seed: u64) -> Result<DiophantineMeasure, TorusError> {
    if n == 0 || !(tau > n as f64 - 1.0) || samples == 0 {
        return Err(TorusError::InvalidParameters(format!("need n >= 1, tau > {}, samples > 0", n as f64 - 1.0)));
    }
    // half of the ℓ¹ ball: the first nonzero component positive
    let probe = TorusFourier::zeros(n, k_max);
    let ks: Vec<(Vec<f64>, f64)> = probe
        .iter()
        .map(|(k, _)| k)
        .filter(|k| {
            let s = l1(k);
            s > 0 && s as usize <= k_max && k.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0)
        })
        .map(|k| (k.iter().map(|&v| v as f64).collect(), (l1(&k) as f64).powf(tau)))
        .collect();
    const SHARD: usize = 4096;
    let shards = samples.div_ceil(SHARD);
    let minima: Vec<f64> = (0..shards)
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut rng = stream(seed, s as u64);
            let count = SHARD.min(samples - s * SHARD);
            let ks = &ks;
            (0..count)
                .map(move |_| {
                    let omega: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                    ks.iter()
                        .map(|(k, w)| k.iter().zip(&omega).map(|(a, b)| a * b).sum::<f64>().abs() * w)
                        .fold(f64::INFINITY, f64::min)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let bad_fractions: Vec<f64> = kappas
        .iter()
        .map(|&kappa| minima.iter().filter(|&&m| m < kappa).count() as f64 / samples as f64)
        .collect();
    let pts: Vec<(f64, f64)> = kappas
        .iter()
        .zip(&bad_fractions)
        .filter(|(_, &b)| b > 0.0)
        .map(|(k, b)| (k.ln(), b.ln()))
        .collect();
    let fit_slope = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>()
    } else {
        f64::NAN
    };
    Ok(DiophantineMeasure {
        kappas: kappas.to_vec(),
        bad_fractions,
        fit_slope,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionSet {
    Points(Vec<Vec<f64>>),
    Ball { center: Vec<f64>, radius: f64 },
}

impl ActionSet {
    pub fn dim(&self) -> usize {
        match self {
            ActionSet::Points(p) => p.first().map_or(0, Vec::len),
            ActionSet::Ball { center, .. } => center.len(),
        }
    }

    /// Euclidean distance from x.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        match self {
            ActionSet::Points(p) => p.iter().map(|s| d(s, x)).fold(f64::INFINITY, f64::min),
            ActionSet::Ball { center, radius } => (d(center, x) - radius).max(0.0),
        }
    }

    fn scaled(&self, s: f64) -> Self {
        match self {
            ActionSet::Points(p) => ActionSet::Points(p.iter().map(|x| x.iter().map(|v| v * s).collect()).collect()),
            ActionSet::Ball { center, radius } => ActionSet::Ball {
                center: center.iter().map(|v| v * s).collect(),
                radius: radius * s,
            },
        }
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ActionSet::Points(p) => {
                let n = self.dim();
                let lo = (0..n).map(|j| p.iter().map(|s| s[j]).fold(f64::INFINITY, f64::min)).collect();
                let hi = (0..n).map(|j| p.iter().map(|s| s[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
                (lo, hi)
            }
            ActionSet::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    /// Volume of the set (zero for point sets).
    pub fn volume(&self) -> f64 {
        match self {
            ActionSet::Points(_) => 0.0,
            ActionSet::Ball { radius, .. } => {
                let n = self.dim() as f64;
                PI.powf(n / 2.0) / gamma_half_integer(n / 2.0 + 1.0) * radius.powf(n)
            }
        }
    }
}

// Γ at positive integers and half-integers.
fn gamma_half_integer(x: f64) -> f64 {
    let mut g = if (x - x.round()).abs() < 1e-12 { 1.0 } else { PI.sqrt() };
    let mut y = if (x - x.round()).abs() < 1e-12 { 1.0 } else { 0.5 };
    while y < x - 1e-12 {
        g *= y;
        y += 1.0;
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionLattice {
    pub set: ActionSet,
    pub h: f64,
    /// Window constant L.
    pub l: f64,
    /// Maslov shift ϑ.
    pub maslov: Vec<i64>,
}

/// M_h = {m ∈ ℤⁿ : dist(S, h(m + ϑ/4)) < L h}, in lexicographic order.
pub fn quasi_lattice(lattice: &ActionLattice) -> Result<Vec<Vec<i64>>, TorusError> {
    let n = lattice.set.dim();
    if n == 0 || lattice.maslov.len() != n || !(lattice.h > 0.0) || !(lattice.l > 0.0) {
        return Err(TorusError::InvalidParameters("need h > 0, L > 0 and matching dimensions".into()));
    }
    // work in units of h so that lattice points are exact
    let set = lattice.set.scaled(1.0 / lattice.h);
    let (lo, hi) = set.bounding_box();
    let reach = lattice.l;
    let shift: Vec<f64> = lattice.maslov.iter().map(|&t| t as f64 / 4.0).collect();
    let lo_i: Vec<i64> = (0..n).map(|j| (lo[j] - reach - shift[j]).floor() as i64 - 1).collect();
    let hi_i: Vec<i64> = (0..n).map(|j| (hi[j] + reach - shift[j]).ceil() as i64 + 1).collect();
    // parallel over the first coordinate
    let rows: Vec<Vec<Vec<i64>>> = (lo_i[0]..=hi_i[0])
        .into_par_iter()
        .map(|m0| {
            let mut out = Vec::new();
            let mut m = lo_i.clone();
            m[0] = m0;
            loop {
                let x: Vec<f64> = (0..n).map(|j| m[j] as f64 + shift[j]).collect();
                if set.distance(&x) < reach {
                    out.push(m.clone());
                }
                let mut j = n - 1;
                loop {
                    if j == 0 {
                        return out;
                    }
                    if m[j] < hi_i[j] {
                        m[j] += 1;
                        break;
                    }
                    m[j] = lo_i[j];
                    j -= 1;
                }
            }
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden_omega() -> FrequencyVector {
        FrequencyVector::new(vec![1.0, (5f64.sqrt() - 1.0) / 2.0], 0.1, 1.5).unwrap()
    }

    #[test]
    fn bump_plateaus() {
        assert_eq!(gevrey_bump(0.0, 0.1), 1.0);
        assert_eq!(gevrey_bump(0.1, 0.1), 0.0);
        let mid = gevrey_bump(0.0375, 0.1);
        assert!(mid > 0.0 && mid < 1.0);
        let mut prev = 1.0;
        for j in 0..=1000 {
            let v = gevrey_bump(j as f64 * 1e-4, 0.1);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn denominators() {
        let w = FrequencyVector::new(vec![1.0, 1.0], 0.1, 1.5).unwrap();
        let g = regularized_denominator(&w, &[1, -1]);
        assert_eq!(g, Complex64::new(0.0, 0.1 * 2f64.powf(-1.5)));
        let g = regularized_denominator(&w, &[1, 0]);
        assert_eq!(g, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn single_mode_homological() {
        let w = golden_omega();
        let mut f = TorusFourier::zeros(2, 2);
        f.set_real_mode(&[1, 0], Complex64::new(0.5, 0.0));
        let u = solve_homological(&f, &w).unwrap();
        // cos(2πx₁) = ⟨ω,∂⟩ u with ⟨ω,∂⟩ acting as i⟨k,ω⟩ ⇒ u = sin(2πx₁)
        assert!((u.eval(&[0.25, 0.3]).re - 1.0).abs() < 1e-15);
        assert!(solve_homological(&TorusFourier::zeros(2, 3), &w).unwrap().mass() == 0.0);
        let mut g = f.clone();
        g.set_real_mode(&[0, 0], Complex64::new(1.0, 0.0));
        assert!(matches!(solve_homological(&g, &w), Err(TorusError::NonzeroMean(_))));
    }

    #[test]
    fn lattice_examples() {
        let lat = ActionLattice {
            set: ActionSet::Points(vec![vec![0.5]]),
            h: 0.1,
            l: 1.0,
            maslov: vec![0],
        };
        assert_eq!(quasi_lattice(&lat).unwrap(), vec![vec![5]]);
        assert!((ActionSet::Ball { center: vec![0.0, 0.0], radius: 2.0 }.volume() - 4.0 * PI).abs() < 1e-12);
        assert!((ActionSet::Ball { center: vec![0.0; 3], radius: 1.0 }.volume() - 4.0 * PI / 3.0).abs() < 1e-12);
    }
}
