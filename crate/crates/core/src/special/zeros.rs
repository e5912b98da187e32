//! Positive zeros of J_n: uniform asymptotic initial guesses, sign-change
//! bracketing and safeguarded Newton refinement.

use super::airy::airy_zero;
use super::bessel::{bessel_j_flush, bessel_j_with_derivative_flush, BesselError};
use std::f64::consts::{FRAC_PI_2, PI};

/// The k-th positive zero `alpha` of J_n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselZero {
    pub n: u32,
    pub k: u32,
    pub alpha: f64,
}

/// Solution z ≥ 1 of (2/3)(-ζ)^{3/2} = √(z²-1) - asec z for ζ ≤ 0.
pub fn z_of_zeta(zeta: f64) -> f64 {
    assert!(zeta <= 0.0 && zeta.is_finite(), "z_of_zeta requires finite zeta <= 0");
    let s = 2.0 / 3.0 * (-zeta).powf(1.5);
    if s == 0.0 {
        return 1.0;
    }
    let g = |z: f64| (z * z - 1.0).sqrt() - (1.0 / z).acos() - s;
    let mut lo = 1.0;
    let mut hi = s + FRAC_PI_2 + 1.0;
    // near z = 1 the left side behaves like (2√2/3)(z-1)^{3/2}
    let small = 1.0 + (3.0 * s / (2.0 * 2f64.sqrt())).powf(2.0 / 3.0);
    let mut z = if s < 1.0 { small.min(hi) } else { s + FRAC_PI_2 };
    for _ in 0..200 {
        let gz = g(z);
        if gz > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        let slope = (z * z - 1.0).sqrt() / z;
        let mut next = z - gz / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - z).abs() <= 2.0 * f64::EPSILON * z {
            return next;
        }
        z = next;
    }
    z
}

fn mcmahon(n: u32, k: u32) -> f64 {
    let mu = 4.0 * (n as f64).powi(2);
    let beta = (k as f64 + 0.5 * n as f64 - 0.25) * PI;
    let e = 8.0 * beta;
    beta - (mu - 1.0) / e - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * e.powi(3))
}

fn initial_guess(n: u32, k: u32) -> f64 {
    if n == 0 || k > n {
        mcmahon(n, k)
    } else {
        let nf = n as f64;
        nf * z_of_zeta(nf.powf(-2.0 / 3.0) * airy_zero(k))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BesselZeroError {
    #[error("no bracket found for zero k={k} of J_{n}")]
    BracketFailure { n: u32, k: u32 },
    #[error(transparent)]
    Bessel(#[from] BesselError),
}

/// Scan sample points with spacing at most 1 starting at x = n, where J_n has no
/// zero in (0, n] and consecutive zeros are more than π apart.
fn scan_points(n: u32, upto: f64) -> impl Iterator<Item = f64> {
    let start = n as f64;
    let steps = ((upto - start).max(0.0)).ceil() as usize;
    (0..=steps).map(move |i| (start + i as f64).min(upto))
}

/// Number of zeros of J_n in the open interval (0, upper).
pub fn count_zeros_below(n: u32, upper: f64) -> Result<u32, BesselError> {
    if upper <= n as f64 {
        return Ok(0);
    }
    let mut count = 0;
    let mut prev = 0.0f64;
    for x in scan_points(n, upper) {
        let v = bessel_j_flush(n, x)?;
        if v != 0.0 {
            if prev != 0.0 && prev.signum() != v.signum() {
                count += 1;
            }
            prev = v;
        }
    }
    Ok(count)
}

/// The k-th positive zero of J_n, guaranteed to be the k-th by sign-change counting.
pub fn bessel_zero(n: u32, k: u32) -> Result<BesselZero, BesselZeroError> {
    if k == 0 {
        return Err(BesselZeroError::BracketFailure { n, k });
    }
    let guess = initial_guess(n, k);
    // locate the k-th sign change on a unit-spaced scan
    let limit = guess + 10.0 + 4.0 * k as f64;
    let mut seen = 0;
    let mut prev: Option<(f64, f64)> = None;
    let mut bracket = None;
    let mut x = n as f64;
    while x <= limit + 1.0 {
        let v = bessel_j_flush(n, x)?;
        if v == 0.0 && x > n as f64 {
            // exact hit on a zero
            seen += 1;
            if seen == k {
                return Ok(BesselZero { n, k, alpha: x });
            }
        } else if let Some((px, pv)) = prev {
            if pv.signum() != v.signum() && pv != 0.0 {
                seen += 1;
                if seen == k {
                    bracket = Some((px, x));
                    break;
                }
            }
        }
        if v != 0.0 || x == n as f64 {
            prev = Some((x, v));
        }
        x += 1.0;
    }
    let (mut a, mut b) = bracket.ok_or(BesselZeroError::BracketFailure { n, k })?;
    let mut fa = bessel_j_flush(n, a)?;
    let mut z = if guess > a && guess < b { guess } else { 0.5 * (a + b) };
    for _ in 0..200 {
        let (f, d) = bessel_j_with_derivative_flush(n, z)?;
        if f == 0.0 {
            return Ok(BesselZero { n, k, alpha: z });
        }
        if f.signum() == fa.signum() {
            a = z;
            fa = f;
        } else {
            b = z;
        }
        let mut next = z - f / d;
        if !(next > a && next < b) || !next.is_finite() {
            next = 0.5 * (a + b);
        }
        let done = (next - z).abs() <= 4.0 * f64::EPSILON * z || b - a <= 4.0 * f64::EPSILON * b;
        z = next;
        if done {
            break;
        }
    }
    let residual = bessel_j_flush(n, z)?;
    if residual.abs() >= 1e-10 || !(z > n as f64) {
        return Err(BesselZeroError::BracketFailure { n, k });
    }
    Ok(BesselZero { n, k, alpha: z })
}
