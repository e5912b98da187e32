//! Semidisk quasimodes v = χ(r) sin(nθ) J_n(α r/r2) / N on the mushroom hat.
//!
//! The cutoff χ vanishes on r ≤ r1 and equals 1 on r ≥ r_c = (r1+ε)√(1−ε²).
//! Because sin(nθ)J_n(αr/r2) is an exact Dirichlet eigenfunction of the
//! half-disk, the residual reduces to the commutator terms supported on the
//! cutoff annulus, which are integrated radially.

use crate::billiard::MushroomParams;
use crate::quad::{integrate, QuadError, QuadOptions};
use crate::special::{
    bessel_j_flush, bessel_j_with_derivative_flush, bessel_zero, count_zeros_below, BesselError,
    BesselZero, BesselZeroError,
};
use rayon::prelude::*;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuasimodeError {
    #[error("invalid cutoff parameter eps = {0}")]
    InvalidEps(f64),
    #[error("quasimode (n={n}, k={k}) is not admissible: alpha = {alpha} >= n r2/(r1+eps) = {limit}")]
    NotAdmissible { n: u32, k: u32, alpha: f64, limit: f64 },
    #[error("angular order must be at least 1")]
    ZeroOrder,
    #[error("quasimodes live on different domains")]
    MismatchedDomains,
    #[error("point outside the half-disk")]
    OutsideDomain,
    #[error("invalid frequency cutoff lambda = {0}")]
    InvalidLambda(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Bessel(#[from] BesselError),
    #[error(transparent)]
    Zero(#[from] BesselZeroError),
}

/// Smooth radial cutoff built from the e^{-1/x} mollifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    Smooth { r1: f64, rc: f64 },
    /// χ ≡ 1, for comparison with the exact half-disk eigenfunction.
    Identity,
}

impl Cutoff {
    pub fn new(r1: f64, eps: f64) -> Result<Self, QuasimodeError> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(QuasimodeError::InvalidEps(eps));
        }
        let rc = (r1 + eps) * (1.0 - eps * eps).sqrt();
        if rc <= r1 {
            return Err(QuasimodeError::InvalidEps(eps));
        }
        Ok(Cutoff::Smooth { r1, rc })
    }

    /// Support of χ' as (start, end).
    pub fn transition(&self) -> Option<(f64, f64)> {
        match *self {
            Cutoff::Smooth { r1, rc } => Some((r1, rc)),
            Cutoff::Identity => None,
        }
    }

    /// (χ, χ', χ'') at radius r.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let (r1, rc) = match *self {
            Cutoff::Smooth { r1, rc } => (r1, rc),
            Cutoff::Identity => return (1.0, 0.0, 0.0),
        };
        if r <= r1 {
            return (0.0, 0.0, 0.0);
        }
        if r >= rc {
            return (1.0, 0.0, 0.0);
        }
        let l = rc - r1;
        let u = (r - r1) / l;
        let w = 1.0 - u;
        let a = (-1.0 / u).exp();
        let b = (-1.0 / w).exp();
        let a1 = a / (u * u);
        let b1 = -b / (w * w);
        let a2 = a * (1.0 / u.powi(4) - 2.0 / u.powi(3));
        let b2 = b * (1.0 / w.powi(4) - 2.0 / w.powi(3));
        let s = a + b;
        let num1 = a1 * b - a * b1;
        let chi = a / s;
        let d1 = num1 / (s * s);
        let d2 = ((a2 * b - a * b2) * s - 2.0 * num1 * (a1 + b1)) / (s * s * s);
        (chi, d1 / l, d2 / (l * l))
    }
}

/// An indexed quasimode with its precomputed L² normalisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasimodeSpec {
    pub zero: BesselZero,
    pub r1: f64,
    pub r2: f64,
    pub eps: f64,
    pub cutoff: Cutoff,
    /// L² norm of χ sin(nθ) J_n(αr/r2) over the half-disk.
    pub norm: f64,
}

fn radial_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-300,
        rel_tol: 1e-11,
        max_intervals: 4000,
    }
}

impl QuasimodeSpec {
    /// Admissible member (n, k) of the family on the mushroom hat.
    pub fn new(params: &MushroomParams, eps: f64, n: u32, k: u32) -> Result<Self, QuasimodeError> {
        if n == 0 {
            return Err(QuasimodeError::ZeroOrder);
        }
        let cutoff = Cutoff::new(params.r1, eps)?;
        let zero = bessel_zero(n, k)?;
        let limit = n as f64 * params.r2 / (params.r1 + eps);
        if zero.alpha >= limit {
            return Err(QuasimodeError::NotAdmissible {
                n,
                k,
                alpha: zero.alpha,
                limit,
            });
        }
        let mut spec = Self {
            zero,
            r1: params.r1,
            r2: params.r2,
            eps,
            cutoff,
            norm: 1.0,
        };
        spec.norm = spec.overlap_integral(&spec)?.sqrt();
        Ok(spec)
    }

    /// The exact half-disk eigenfunction (no cutoff) of radius `r2`.
    pub fn without_cutoff(r2: f64, n: u32, k: u32) -> Result<Self, QuasimodeError> {
        if n == 0 {
            return Err(QuasimodeError::ZeroOrder);
        }
        let zero = bessel_zero(n, k)?;
        let mut spec = Self {
            zero,
            r1: 0.0,
            r2,
            eps: 0.0,
            cutoff: Cutoff::Identity,
            norm: 1.0,
        };
        spec.norm = spec.overlap_integral(&spec)?.sqrt();
        Ok(spec)
    }

    pub fn n(&self) -> u32 {
        self.zero.n
    }

    pub fn alpha(&self) -> f64 {
        self.zero.alpha
    }

    /// Quasi-eigenvalue α²/r2².
    pub fn quasi_eigenvalue(&self) -> f64 {
        (self.zero.alpha / self.r2).powi(2)
    }

    fn radial(&self, r: f64) -> Result<f64, BesselError> {
        bessel_j_flush(self.zero.n, self.zero.alpha * r / self.r2)
    }

    /// Unnormalised ∫∫ χ² u_a u_b over the half-disk, using
    /// ∫_0^{r2} J_n(α_a r/r2) J_n(α_b r/r2) r dr = δ_ab r2²/2 J_{n+1}(α)².
    fn overlap_integral(&self, other: &Self) -> Result<f64, QuasimodeError> {
        if self.zero.n != other.zero.n {
            return Ok(0.0);
        }
        let n = self.zero.n;
        let full = if self.zero.k == other.zero.k {
            0.5 * self.r2 * self.r2 * bessel_j_flush(n + 1, self.zero.alpha)?.powi(2)
        } else {
            0.0
        };
        let complement = match self.cutoff.transition() {
            None => 0.0,
            Some((r1, rc)) => {
                let mut err = None;
                let inner = integrate(
                    |r| match (self.radial(r), other.radial(r)) {
                        (Ok(a), Ok(b)) => a * b * r,
                        (Err(e), _) | (_, Err(e)) => {
                            err = Some(e);
                            0.0
                        }
                    },
                    0.0,
                    r1,
                    radial_opts(),
                )?;
                let ring = integrate(
                    |r| {
                        let chi = self.cutoff.eval(r).0;
                        match (self.radial(r), other.radial(r)) {
                            (Ok(a), Ok(b)) => (1.0 - chi * chi) * a * b * r,
                            (Err(e), _) | (_, Err(e)) => {
                                err = Some(e);
                                0.0
                            }
                        }
                    },
                    r1,
                    rc,
                    radial_opts(),
                )?;
                if let Some(e) = err {
                    return Err(e.into());
                }
                inner.value + ring.value
            }
        };
        Ok(0.5 * PI * (full - complement))
    }
}

/// Pointwise value of the normalised quasimode at polar coordinates (r, θ).
pub fn quasimode_eval(spec: &QuasimodeSpec, r: f64, theta: f64) -> Result<f64, QuasimodeError> {
    if !(0.0..=spec.r2).contains(&r) || !(0.0..=PI).contains(&theta) {
        return Err(QuasimodeError::OutsideDomain);
    }
    let chi = spec.cutoff.eval(r).0;
    if chi == 0.0 {
        return Ok(0.0);
    }
    Ok(chi * (spec.n() as f64 * theta).sin() * spec.radial(r)? / spec.norm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    /// ‖(Δ + α²/r2²) v‖.
    pub absolute: f64,
    /// `absolute` divided by the quasi-eigenvalue.
    pub relative: f64,
}

/// L² norm of (Δ + α²/r2²)v = [2χ'∂_r u + (χ'' + χ'/r)u] sin(nθ)/N.
pub fn quasimode_residual(spec: &QuasimodeSpec) -> Result<Residual, QuasimodeError> {
    let Some((r1, rc)) = spec.cutoff.transition() else {
        return Ok(Residual {
            absolute: 0.0,
            relative: 0.0,
        });
    };
    let n = spec.n();
    let scale = spec.alpha() / spec.r2;
    let mut err = None;
    let q = integrate(
        |r| {
            let (_, d1, d2) = spec.cutoff.eval(r);
            match bessel_j_with_derivative_flush(n, scale * r) {
                Ok((j, jd)) => {
                    let g = 2.0 * d1 * scale * jd + (d2 + d1 / r) * j;
                    g * g * r
                }
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            }
        },
        r1,
        rc,
        radial_opts(),
    )?;
    if let Some(e) = err {
        return Err(e.into());
    }
    let absolute = (0.5 * PI * q.value).sqrt() / spec.norm;
    Ok(Residual {
        absolute,
        relative: absolute / spec.quasi_eigenvalue(),
    })
}

/// Inner product ⟨v_a, v_b⟩ over the half-disk.
pub fn quasimode_overlap(a: &QuasimodeSpec, b: &QuasimodeSpec) -> Result<f64, QuasimodeError> {
    if a.r1 != b.r1 || a.r2 != b.r2 || a.eps != b.eps {
        return Err(QuasimodeError::MismatchedDomains);
    }
    Ok(a.overlap_integral(b)? / (a.norm * b.norm))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountingReport {
    pub lambda: f64,
    pub eps: f64,
    pub count: u64,
    /// count/λ².
    pub coefficient: f64,
    pub closed_form: f64,
}

/// Limiting value of count/λ²: (r2²/8)(1 − 2√(C²−1)/(πC²) − (2/π) asin(1/C)).
pub fn counting_closed_form(r1: f64, r2: f64) -> f64 {
    let c = r2 / r1;
    r2 * r2 / 8.0 * (1.0 - 2.0 * (c * c - 1.0).sqrt() / (PI * c * c) - 2.0 / PI * (1.0 / c).asin())
}

/// Number of admissible (n, k) with α_{n,k} < λ r2.
pub fn count_quasi_eigenvalues(params: &MushroomParams, lambda: f64, eps: f64) -> Result<CountingReport, QuasimodeError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(QuasimodeError::InvalidLambda(lambda));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(QuasimodeError::InvalidEps(eps));
    }
    let top = lambda * params.r2;
    let max_n = top.floor() as u32;
    let count = (1..=max_n)
        .into_par_iter()
        .map(|n| {
            let limit = top.min(n as f64 * params.r2 / (params.r1 + eps));
            count_zeros_below(n, limit).map(u64::from)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(CountingReport {
        lambda,
        eps,
        count,
        coefficient: count as f64 / (lambda * lambda),
        closed_form: counting_closed_form(params.r1, params.r2),
    })
}

/// The admissible quasi-eigenvalues α²/r2² with α_{n,k} < λ r2, sorted.
pub fn quasi_eigenvalues(params: &MushroomParams, lambda: f64, eps: f64) -> Result<Vec<f64>, QuasimodeError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(QuasimodeError::InvalidLambda(lambda));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(QuasimodeError::InvalidEps(eps));
    }
    let top = lambda * params.r2;
    let per_n: Vec<Vec<f64>> = (1..=top.floor() as u32)
        .into_par_iter()
        .map(|n| -> Result<Vec<f64>, QuasimodeError> {
            let limit = top.min(n as f64 * params.r2 / (params.r1 + eps));
            let count = count_zeros_below(n, limit)?;
            (1..=count)
                .map(|k| Ok((bessel_zero(n, k)?.alpha / params.r2).powi(2)))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let mut all: Vec<f64> = per_n.into_iter().flatten().collect();
    all.sort_by(f64::total_cmp);
    Ok(all)
}
