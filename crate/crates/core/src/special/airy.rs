//! Ai on the non-positive axis and its zeros a_k.

use std::f64::consts::PI;

const C1: f64 = 0.355_028_053_887_817_24;
const C2: f64 = 0.258_819_403_792_806_8;
/// Crossover between the Maclaurin series and the oscillatory expansion.
const SERIES_LIMIT: f64 = 7.2;

/// (Ai(x), Ai'(x)) for x ≤ 1.
pub(crate) fn airy_ai_pair(x: f64) -> (f64, f64) {
    assert!(x <= 1.0, "airy evaluation implemented for x <= 1");
    if x >= -SERIES_LIMIT {
        series(x)
    } else {
        oscillatory(-x)
    }
}

/// Ai(x) for x ≤ 1.
pub fn airy_ai(x: f64) -> f64 {
    airy_ai_pair(x).0
}

fn series(x: f64) -> (f64, f64) {
    let x3 = x * x * x;
    let (mut f, mut tf) = (1.0, 1.0);
    let (mut g, mut tg) = (x, x);
    let (mut fd, mut tfd) = (0.5 * x * x, 0.5 * x * x);
    let (mut gd, mut tgd) = (1.0, 1.0);
    for k in 1..200 {
        let kf = k as f64;
        tf *= x3 / ((3.0 * kf) * (3.0 * kf - 1.0));
        tg *= x3 / ((3.0 * kf + 1.0) * (3.0 * kf));
        tgd *= x3 / ((3.0 * kf) * (3.0 * kf - 2.0));
        f += tf;
        g += tg;
        gd += tgd;
        if k >= 2 {
            tfd *= x3 / ((3.0 * kf - 1.0) * (3.0 * kf - 3.0));
            fd += tfd;
        }
        let scale = f.abs() + g.abs() + fd.abs() + gd.abs();
        if tf.abs() + tg.abs() + tfd.abs() + tgd.abs() < 1e-18 * scale {
            break;
        }
    }
    (C1 * f - C2 * g, C1 * fd - C2 * gd)
}

/// Ai(-z), Ai'(-z) for large z from the oscillatory asymptotic series with
/// optimal truncation.
fn oscillatory(z: f64) -> (f64, f64) {
    let zeta = 2.0 / 3.0 * z * z.sqrt();
    // u_k and v_k coefficients
    let mut u = [0.0f64; 40];
    let mut v = [0.0f64; 40];
    u[0] = 1.0;
    v[0] = 1.0;
    for k in 1..40 {
        let kf = k as f64;
        u[k] = u[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)
            / ((2.0 * kf - 1.0) * 216.0 * kf);
        v[k] = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u[k];
    }
    let series_pair = |c: &[f64; 40]| -> (f64, f64) {
        // even part Σ(-1)^k c_{2k} ζ^{-2k}, odd part Σ(-1)^k c_{2k+1} ζ^{-2k-1}
        let mut even = 0.0;
        let mut odd = 0.0;
        let mut last = f64::INFINITY;
        let mut zp = 1.0;
        for k in 0..40 {
            let term = c[k] * zp;
            if term.abs() > last {
                break;
            }
            last = term.abs();
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if k % 2 == 0 {
                even += sign * term;
            } else {
                odd += sign * term;
            }
            if last < 1e-17 {
                break;
            }
            zp /= zeta;
        }
        (even, odd)
    };
    let (pu, qu) = series_pair(&u);
    let (pv, qv) = series_pair(&v);
    let phase = zeta - PI / 4.0;
    let (s, c) = phase.sin_cos();
    let z4 = z.powf(0.25);
    let sqrt_pi = PI.sqrt();
    let ai = (c * pu + s * qu) / (sqrt_pi * z4);
    let aid = z4 / sqrt_pi * (s * pv - c * qv);
    (ai, aid)
}

/// The k-th negative zero of Ai (k ≥ 1), Newton-refined from the
/// large-argument expansion.
pub fn airy_zero(k: u32) -> f64 {
    assert!(k >= 1, "airy zeros are indexed from 1");
    let t = 3.0 * PI * (4.0 * k as f64 - 1.0) / 8.0;
    let t2 = 1.0 / (t * t);
    let mut a = -t.powf(2.0 / 3.0)
        * (1.0 + t2 * (5.0 / 48.0 + t2 * (-5.0 / 36.0 + t2 * (77_125.0 / 82_944.0 - t2 * 108_056_875.0 / 6_967_296.0))));
    for _ in 0..50 {
        let (f, d) = airy_ai_pair(a);
        let step = f / d;
        a -= step;
        if step.abs() <= 4.0 * f64::EPSILON * a.abs() {
            break;
        }
    }
    a
}
