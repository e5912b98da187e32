//! J_n(x) by Miller's downward recurrence normalised with J_0 + 2ΣJ_{2k} = 1.

/// Below this bound (natural log) the envelope guarantees |J_n(x)| < 1e-300.
const UNDERFLOW_LOG: f64 = -690.775_527_898_213_7;
const RESCALE: f64 = 1e250;
const RESCALE_LOG: f64 = 575.646_273_248_511_4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BesselError {
    #[error("bessel argument out of range: n = {n}, x = {x}")]
    Domain { n: u32, x: f64 },
    #[error("J_{n}({x}) underflows: log10 |J| <= {log10_bound:.1}")]
    Underflow { n: u32, x: f64, log10_bound: f64 },
}

/// Upper bound for |J_n(x)| below the turning point x < n:
/// (z e^s / (1+s))^n with z = x/n and s = sqrt(1-z²). Returns 1 for x ≥ n.
pub fn envelope_bound(n: u32, x: f64) -> f64 {
    log_envelope(n, x).exp()
}

fn log_envelope(n: u32, x: f64) -> f64 {
    if n == 0 || x >= n as f64 {
        return 0.0;
    }
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    let z = x / n as f64;
    let s = (1.0 - z * z).sqrt();
    n as f64 * (z.ln() + s - s.ln_1p())
}

fn check_domain(n: u32, x: f64) -> Result<(), BesselError> {
    if !(0.0..=1e5).contains(&x) || n > 10_000 {
        return Err(BesselError::Domain { n, x });
    }
    Ok(())
}

/// J_n(x) for 0 ≤ n ≤ 10⁴ and 0 ≤ x ≤ 10⁵.
pub fn bessel_j(n: u32, x: f64) -> Result<f64, BesselError> {
    bessel_j_with_derivative(n, x).map(|(j, _)| j)
}

/// J_n(x) and J_n'(x) from a single recurrence sweep.
pub fn bessel_j_with_derivative(n: u32, x: f64) -> Result<(f64, f64), BesselError> {
    check_domain(n, x)?;
    if x == 0.0 {
        return Ok(match n {
            0 => (1.0, 0.0),
            1 => (0.0, 0.5),
            _ => (0.0, 0.0),
        });
    }
    let env = log_envelope(n, x);
    if env < UNDERFLOW_LOG {
        return Err(BesselError::Underflow {
            n,
            x,
            log10_bound: env / std::f64::consts::LN_10,
        });
    }
    let (jm, j, jp) = miller(n, x);
    if x < n as f64 && j.abs() < 1e-300 {
        return Err(BesselError::Underflow {
            n,
            x,
            log10_bound: env / std::f64::consts::LN_10,
        });
    }
    let d = if n == 0 { -jp } else { 0.5 * (jm - jp) };
    Ok((j, d))
}

/// Like [`bessel_j`] but returns 0 on underflow.
pub fn bessel_j_flush(n: u32, x: f64) -> Result<f64, BesselError> {
    match bessel_j(n, x) {
        Err(BesselError::Underflow { .. }) => Ok(0.0),
        other => other,
    }
}

/// Like [`bessel_j_with_derivative`] but returns zeros on underflow.
pub fn bessel_j_with_derivative_flush(n: u32, x: f64) -> Result<(f64, f64), BesselError> {
    match bessel_j_with_derivative(n, x) {
        Err(BesselError::Underflow { .. }) => Ok((0.0, 0.0)),
        other => other,
    }
}

/// Returns (J_{n-1}, J_n, J_{n+1}); J_{-1} is reported as -J_1.
fn miller(n: u32, x: f64) -> (f64, f64, f64) {
    let m = (n as f64).max(x.ceil());
    let mut top = (m + 20.0 + 16.0 * m.cbrt()) as usize;
    top += top % 2;
    let n = n as usize;

    let mut hi = 0.0f64; // v_{k+1}
    let mut cur = 1e-30f64; // v_k
    let mut sum = 0.0f64;
    // saved (value, rescale count at save) for indices n-1, n, n+1
    let mut saved = [(0.0f64, 0u32); 3];
    let mut rescales = 0u32;
    let two_over_x = 2.0 / x;

    let mut k = top;
    loop {
        if k + 1 == n {
            saved[0] = (cur, rescales);
        } else if k == n {
            saved[1] = (cur, rescales);
        } else if k == n + 1 {
            saved[2] = (cur, rescales);
        }
        if k % 2 == 0 {
            sum += if k == 0 { cur } else { 2.0 * cur };
        }
        if k == 0 {
            break;
        }
        let lo = k as f64 * two_over_x * cur - hi;
        hi = cur;
        cur = lo;
        k -= 1;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            hi /= RESCALE;
            sum /= RESCALE;
            rescales += 1;
        }
    }
    let scale = |(v, at): (f64, u32)| -> f64 {
        let r = rescales - at;
        if r == 0 {
            v / sum
        } else {
            let log = v.abs().ln() - sum.abs().ln() - r as f64 * RESCALE_LOG;
            let mag = log.exp();
            if (v < 0.0) != (sum < 0.0) {
                -mag
            } else {
                mag
            }
        }
    };
    let j = scale(saved[1]);
    let jp = scale(saved[2]);
    let jm = if n == 0 { -jp } else { scale(saved[0]) };
    (jm, j, jp)
}
