//! Analytic circle diffeomorphisms close to a rotation: rotation numbers,
//! Diophantine certificates and the quadratically convergent conjugacy scheme.

use crate::fourier::{FourierError, TorusFourier};
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CircleError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("theta equals {p}/{q} to machine precision")]
    Rational { p: i64, q: i64 },
    #[error("small divisor |e^(2 pi i n theta) - 1| = {value:e} at n = {n}")]
    DivisorUnderflow { n: i64, value: f64 },
    #[error("conjugacy not invertible: max |mu'| = {0}")]
    InversionFailure(f64),
    #[error("map is not orientation preserving (min f' = {0})")]
    NotOrientationPreserving(f64),
    #[error("no contraction for 3 consecutive steps (iteration {0})")]
    Divergence(usize),
    #[error(transparent)]
    Fourier(#[from] FourierError),
}

/// Lift f(x) = x + θ + η(x) with η one-periodic and real.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleMap {
    pub eta: TorusFourier,
    pub theta: f64,
    /// Half-width of the analyticity strip the data is claimed on.
    pub sigma: f64,
}

impl CircleMap {
    pub fn new(eta: TorusFourier, theta: f64, sigma: f64) -> Result<Self, CircleError> {
        if eta.dim() != 1 {
            return Err(CircleError::InvalidParameters("eta must be one-dimensional".into()));
        }
        if !theta.is_finite() || !(sigma > 0.0) {
            return Err(CircleError::InvalidParameters(format!("theta={theta}, sigma={sigma}")));
        }
        let n = (8 * (eta.k_max() + 1)).max(64);
        let min_slope = (0..n)
            .map(|j| 1.0 + eta.eval_1d_with_derivative(j as f64 / n as f64).1)
            .fold(f64::INFINITY, f64::min);
        if min_slope <= 0.0 {
            return Err(CircleError::NotOrientationPreserving(min_slope));
        }
        Ok(Self { eta, theta, sigma })
    }

    pub fn rotation(theta: f64) -> Self {
        Self {
            eta: TorusFourier::zeros(1, 0),
            theta,
            sigma: 1.0,
        }
    }

    /// x + θ + ε sin(2π m x).
    pub fn sine_perturbation(theta: f64, eps: f64, m: usize, sigma: f64) -> Result<Self, CircleError> {
        let mut eta = TorusFourier::zeros(1, m);
        eta.set_real_mode(&[m as i64], Complex64::new(0.0, -eps / 2.0));
        Self::new(eta, theta, sigma)
    }

    pub fn eval(&self, x: f64) -> f64 {
        x + self.theta + self.eta.eval_1d_with_derivative(x).0
    }

    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let (v, d) = self.eta.eval_1d_with_derivative(x);
        (x + self.theta + v, 1.0 + d)
    }

    /// The same map shifted down by a constant.
    pub fn shifted(&self, lambda: f64) -> Self {
        Self {
            eta: self.eta.clone(),
            theta: self.theta - lambda,
            sigma: self.sigma,
        }
    }
}

fn birkhoff_weight(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (t * (1.0 - t))).exp()
    }
}

/// Rotation number from the orbit of `x0`. With `refine`, displacements are
/// averaged with the smooth weight exp(−1/(t(1−t))), which converges much
/// faster than the plain average for maps conjugate to Diophantine rotations.
pub fn rotation_number_from(f: &CircleMap, x0: f64, iterations: usize, refine: bool) -> f64 {
    assert!(iterations > 0);
    // the orbit is kept in [0, 1); displacements are summed with compensation
    let mut x = x0.rem_euclid(1.0);
    let (mut num, mut comp, mut den) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..iterations {
        let d = f.theta + f.eta.eval_1d_with_derivative(x).0;
        let w = if refine {
            birkhoff_weight((k as f64 + 1.0) / (iterations as f64 + 1.0))
        } else {
            1.0
        };
        let term = w * d;
        let t = num + term;
        comp += if num.abs() >= term.abs() { (num - t) + term } else { (term - t) + num };
        num = t;
        den += w;
        x = (x + d).rem_euclid(1.0);
    }
    if refine {
        (num + comp) / den
    } else {
        (num + comp) / iterations as f64
    }
}

pub fn rotation_number(f: &CircleMap, iterations: usize, refine: bool) -> f64 {
    rotation_number_from(f, 0.0, iterations, refine)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiophantineCertificate {
    pub theta: f64,
    pub kappa: f64,
    pub rho: f64,
    pub q_max: u64,
    /// Convergents p/q with q ≤ q_max, in order, up to the first violation.
    pub convergents: Vec<(i64, i64)>,
    /// Smallest |θ − p/q| q^ρ / κ over the listed convergents.
    pub min_margin: f64,
    pub first_violation: Option<(i64, i64)>,
    pub valid: bool,
}

/// Check |θ − p/q| > κ/q^ρ for all q ≤ q_max. Only convergents can violate it:
/// any other p/q has |θ − p/q| ≥ 1/(2q²) ≥ κ/q^ρ once κ ≤ 1/2 and ρ > 2.
pub fn diophantine_certificate(theta: f64, kappa: f64, rho: f64, q_max: u64) -> Result<DiophantineCertificate, CircleError> {
    if !(rho > 2.0) || !(kappa > 0.0 && kappa <= 0.5) || !theta.is_finite() || q_max == 0 {
        return Err(CircleError::InvalidParameters(format!(
            "need rho > 2 and 0 < kappa <= 1/2, got rho={rho}, kappa={kappa}"
        )));
    }
    if q_max > 1 << 40 {
        return Err(CircleError::InvalidParameters("q_max beyond double precision".into()));
    }
    let (mut p_prev, mut q_prev) = (1i64, 0i64);
    let a0 = theta.floor();
    let (mut p, mut q) = (a0 as i64, 1i64);
    let mut rem = theta - a0;
    let mut convergents = Vec::new();
    let mut min_margin = f64::INFINITY;
    let mut first_violation = None;
    loop {
        let gap = (theta - p as f64 / q as f64).abs();
        if gap <= 4.0 * f64::EPSILON * theta.abs().max(1.0) {
            return Err(CircleError::Rational { p, q });
        }
        convergents.push((p, q));
        let margin = gap * (q as f64).powf(rho) / kappa;
        min_margin = min_margin.min(margin);
        if margin <= 1.0 {
            first_violation = Some((p, q));
            break;
        }
        if rem <= 0.0 {
            return Err(CircleError::Rational { p, q });
        }
        let x = 1.0 / rem;
        let a = x.floor();
        rem = x - a;
        let a = a as i64;
        let (pn, qn) = (a * p + p_prev, a * q + q_prev);
        if qn as u64 > q_max {
            break;
        }
        (p_prev, q_prev, p, q) = (p, q, pn, qn);
    }
    Ok(DiophantineCertificate {
        theta,
        kappa,
        rho,
        q_max,
        convergents,
        min_margin,
        valid: first_violation.is_none(),
        first_violation,
    })
}

/// e^{2πinθ} − 1 with nθ reduced mod 1 before the trigonometry.
pub fn small_divisor(n: i64, theta: f64) -> Complex64 {
    let frac = (n as f64 * theta).rem_euclid(1.0);
    let s = (PI * frac).sin();
    Complex64::new(-2.0 * s * s, (TAU * frac).sin())
}

/// min over 0 < |n| ≤ N of |e^{2πinθ} − 1|·|n|^{ρ−1}/(4κ).
pub fn small_divisor_bound_check(theta: f64, kappa: f64, rho: f64, n_max: u64) -> f64 {
    (1..=n_max as i64)
        .map(|n| small_divisor(n, theta).norm() * (n as f64).powf(rho - 1.0) / (4.0 * kappa))
        .fold(f64::INFINITY, f64::min)
}

/// Zero-mean μ with μ(x+θ) − μ(x) = η(x) − η̂(0).
pub fn solve_linearized(eta: &TorusFourier, theta: f64) -> Result<TorusFourier, CircleError> {
    if eta.dim() != 1 {
        return Err(CircleError::InvalidParameters("eta must be one-dimensional".into()));
    }
    for n in 1..=eta.k_max() as i64 {
        let d = small_divisor(n, theta).norm();
        if d < 1e-14 {
            return Err(CircleError::DivisorUnderflow { n, value: d });
        }
    }
    Ok(eta.map_modes(|k, c| if k[0] == 0 { Complex64::new(0.0, 0.0) } else { c / small_divisor(k[0], theta) }))
}

// Solve v + m(v) = w by safeguarded Newton.
fn invert_near_identity(m: &TorusFourier, w: f64) -> Option<f64> {
    let mut v = w - m.eval_1d_with_derivative(w).0;
    for _ in 0..60 {
        let (mv, dm) = m.eval_1d_with_derivative(v);
        let r = v + mv - w;
        if r.abs() < 1e-13 * w.abs().max(1.0) {
            return Some(v);
        }
        let slope = 1.0 + dm;
        if slope <= 0.0 {
            return None;
        }
        v -= r / slope;
    }
    let r = v + m.eval_1d_with_derivative(v).0 - w;
    (r.abs() < 1e-12 * w.abs().max(1.0)).then_some(v)
}

fn grid(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |j| j as f64 / n as f64)
}

fn sup(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn max_slope(m: &TorusFourier, n: usize) -> f64 {
    grid(n).map(|z| m.eval_1d_with_derivative(z).1.abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KamStep {
    /// μ, with χ = id + μ.
    pub chi: TorusFourier,
    pub f_next: CircleMap,
    /// Grid sup-norm of η (including f.theta − θ).
    pub eta_norm: f64,
    pub eta_norm_next: f64,
    /// ‖η_next‖ / ‖η‖².
    pub contraction: f64,
}

/// One plain conjugation step χ⁻¹∘f∘χ towards the rotation by θ.
pub fn kam_step(f: &CircleMap, theta: f64, grid_size: usize) -> Result<KamStep, CircleError> {
    if grid_size < 2 * f.eta.k_max() + 2 || grid_size % 2 != 0 {
        return Err(CircleError::InvalidParameters(format!(
            "grid of {grid_size} points for {} modes",
            f.eta.k_max()
        )));
    }
    let mut eta = f.eta.clone();
    if eta.k_max() == 0 {
        eta = eta.truncated(1);
    }
    let offset = f.theta - theta;
    let mean = eta.mean();
    eta.set_real_mode(&[0], mean + offset);
    let eta_samples = eta.samples_1d(grid_size)?;
    let mu = solve_linearized(&eta, theta)?;
    let slope = max_slope(&mu, grid_size.max(64));
    if slope >= 1.0 {
        return Err(CircleError::InversionFailure(slope));
    }
    let mut next = Vec::with_capacity(grid_size);
    for z in grid(grid_size) {
        let y = z + mu.eval_1d_with_derivative(z).0;
        let w = f.eval(y);
        let v = invert_near_identity(&mu, w).ok_or(CircleError::InversionFailure(slope))?;
        next.push(v - z - theta);
    }
    let eta_next = TorusFourier::from_samples_1d(&next);
    let eta_norm = sup(&eta_samples);
    let eta_norm_next = sup(&next);
    let f_next = CircleMap {
        eta: eta_next,
        theta,
        sigma: f.sigma * 5.0 / 6.0,
    };
    Ok(KamStep {
        chi: mu,
        f_next,
        eta_norm,
        eta_norm_next,
        contraction: eta_norm_next / (eta_norm * eta_norm),
    })
}

/// Largest initial perturbation accepted by [`kam_iterate`].
pub const EPS0: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct KamRecord {
    pub iteration: usize,
    /// Grid sup-norm of η_n.
    pub eps: f64,
    pub sigma: f64,
    pub delta: f64,
    /// max |χ(z+θ) − (f − λ)(χ(z))| on the grid before the step.
    pub defect: f64,
    pub grid_size: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KamTrace {
    pub records: Vec<KamRecord>,
}

impl KamTrace {
    /// Per-step exponents ln ε_{n+1} / ln ε_n over steps whose ε_{n+1} is above `floor`.
    pub fn contraction_exponents(&self, floor: f64) -> Vec<f64> {
        self.records
            .windows(2)
            .filter(|w| w[1].eps > floor && w[0].eps < 1.0)
            .map(|w| w[1].eps.ln() / w[0].eps.ln())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KamResult {
    /// Periodic part M of χ_total = id + M.
    pub chi_total: TorusFourier,
    /// Counterterm: f − λ is conjugated to the rotation by θ.
    pub lambda: f64,
    pub trace: KamTrace,
    pub defect: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl KamResult {
    pub fn chi(&self, x: f64) -> f64 {
        x + self.chi_total.eval_1d_with_derivative(x).0
    }

    /// Smallest per-step exponent above the 1e-13 noise floor.
    pub fn contraction_exponent(&self) -> Option<f64> {
        self.trace.contraction_exponents(1e-13).into_iter().reduce(f64::min)
    }
}

/// Conjugate f − λ to the rotation by θ, adjusting the constant λ each step.
/// Every step is recomputed from the original map: f_n = χ⁻¹∘(f − λ)∘χ.
pub fn kam_iterate(f: &CircleMap, theta: f64, max_iter: usize, target: f64) -> Result<KamResult, CircleError> {
    let initial = f.eta.mass() + (f.theta - theta).abs();
    if initial > EPS0 {
        return Err(CircleError::InvalidParameters(format!("perturbation {initial} exceeds {EPS0}")));
    }
    let mut n_grid = (4 * (f.eta.k_max() + 1)).next_power_of_two().max(64);
    let mut m = TorusFourier::zeros(1, 1);
    let mut lambda = 0.0;
    let mut trace = KamTrace::default();
    let mut sigma_n = f.sigma;
    let mut stalled = 0;
    let mut iteration = 0;
    loop {
        let mut eta_samples = Vec::with_capacity(n_grid);
        let mut defect = 0.0f64;
        for z in grid(n_grid) {
            let y = z + m.eval_1d_with_derivative(z).0;
            let w = f.eval(y) - lambda;
            let v = invert_near_identity(&m, w).ok_or(CircleError::InversionFailure(max_slope(&m, n_grid)))?;
            eta_samples.push(v - z - theta);
            defect = defect.max((z + theta + m.eval_1d_with_derivative(z + theta).0 - w).abs());
        }
        let eta_n = TorusFourier::from_samples_1d(&eta_samples);
        let eps = sup(&eta_samples);
        let tail = eta_n.tail_mass(n_grid / 4) + m.tail_mass(n_grid / 4);
        if tail > (1e-14 * (eta_n.mass() + m.mass())).max(1e-13) && n_grid < 1 << 16 {
            n_grid *= 2;
            continue;
        }
        let delta = f.sigma / (36.0 * (1.0 + (iteration * iteration) as f64));
        trace.records.push(KamRecord {
            iteration,
            eps,
            sigma: sigma_n,
            delta,
            defect,
            grid_size: n_grid,
        });
        if defect <= target || iteration == max_iter {
            return Ok(KamResult {
                chi_total: m,
                lambda,
                trace,
                defect,
                iterations: iteration,
                converged: defect <= target,
            });
        }
        if let [.., a, b] = trace.records.as_slice() {
            stalled = if b.eps >= a.eps { stalled + 1 } else { 0 };
            if stalled >= 3 {
                return Err(CircleError::Divergence(iteration));
            }
        }
        let mu = solve_linearized(&eta_n, theta)?;
        let slope = max_slope(&mu, n_grid);
        if slope >= 1.0 {
            return Err(CircleError::InversionFailure(slope));
        }
        let mut composed = Vec::with_capacity(n_grid);
        let mut inv_slope = 0.0;
        for z in grid(n_grid) {
            let (u, du) = mu.eval_1d_with_derivative(z);
            let (mz, dm) = m.eval_1d_with_derivative(z + u);
            composed.push(u + mz);
            inv_slope += 1.0 / ((1.0 + dm) * (1.0 + du));
        }
        m = TorusFourier::from_samples_1d(&composed);
        lambda += eta_n.mean().re / (inv_slope / n_grid as f64);
        sigma_n -= 6.0 * delta;
        iteration += 1;
    }
}
