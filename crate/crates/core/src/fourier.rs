//! Truncated Fourier series on the d-torus.
//!
//! Period one in every variable: f(x) = Σ_k c_k e^{2πi⟨k,x⟩}, coefficients
//! stored for |k|∞ ≤ K with the first component varying slowest.
//! Weighted norms use |k|₁.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::TAU;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FourierError {
    #[error("expected {expected} coefficients, got {got}")]
    Length { expected: usize, got: usize },
    #[error("dimension must be at least 1")]
    Dimension,
    #[error("non-finite coefficient")]
    NonFinite,
    #[error("coefficients are not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("tail beyond K/2 carries {0:e} of the coefficient mass")]
    TailTooHeavy(f64),
    #[error("grid of {grid} points cannot resolve modes up to {k_max}")]
    GridTooCoarse { grid: usize, k_max: usize },
    #[error("strip width must be positive and finite, got {0}")]
    InvalidSigma(f64),
}

/// Claimed analyticity strip and the observed geometric rate of the coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decay {
    pub sigma: f64,
    /// Fitted ratio r with max_{|k|₁ = s} |c_k| ≈ C r^s.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusFourier {
    dim: usize,
    k_max: usize,
    coeffs: Vec<Complex64>,
    decay: Option<Decay>,
}

pub fn l1(k: &[i64]) -> i64 {
    k.iter().map(|v| v.abs()).sum()
}

impl TorusFourier {
    pub fn zeros(dim: usize, k_max: usize) -> Self {
        assert!(dim >= 1);
        let side = 2 * k_max + 1;
        Self {
            dim,
            k_max,
            coeffs: vec![Complex64::new(0.0, 0.0); side.pow(dim as u32)],
            decay: None,
        }
    }

    /// Validated constructor; coefficients must describe a real-valued function.
    pub fn new(dim: usize, k_max: usize, coeffs: Vec<Complex64>) -> Result<Self, FourierError> {
        if dim == 0 {
            return Err(FourierError::Dimension);
        }
        let expected = (2 * k_max + 1).pow(dim as u32);
        if coeffs.len() != expected {
            return Err(FourierError::Length {
                expected,
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(FourierError::NonFinite);
        }
        let f = Self {
            dim,
            k_max,
            coeffs,
            decay: None,
        };
        let defect = f.hermitian_defect();
        if defect > 1e-12 * f.mass().max(f64::MIN_POSITIVE) {
            return Err(FourierError::NotHermitian(defect));
        }
        Ok(f)
    }

    pub fn from_fn(dim: usize, k_max: usize, mut g: impl FnMut(&[i64]) -> Complex64) -> Result<Self, FourierError> {
        let mut f = Self::zeros(dim, k_max);
        for i in 0..f.coeffs.len() {
            let k = f.wavevector(i);
            f.coeffs[i] = g(&k);
        }
        Self::new(dim, k_max, f.coeffs)
    }

    /// Attach decay metadata; the tail beyond K/2 must be negligible.
    pub fn with_decay(mut self, sigma: f64) -> Result<Self, FourierError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(FourierError::InvalidSigma(sigma));
        }
        let mass = self.mass();
        let tail = self.tail_mass(self.k_max / 2);
        if mass > 0.0 && tail > 1e-12 * mass {
            return Err(FourierError::TailTooHeavy(tail / mass));
        }
        self.decay = Some(Decay {
            sigma,
            rate: self.fitted_rate(),
        });
        Ok(self)
    }

    fn fitted_rate(&self) -> f64 {
        let smax = self.dim * self.k_max;
        let mut shell = vec![0.0f64; smax + 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            let s = l1(&self.wavevector(i)) as usize;
            shell[s] = shell[s].max(c.norm());
        }
        let pts: Vec<(f64, f64)> = shell
            .iter()
            .enumerate()
            .filter(|(s, &m)| *s > 0 && m > 1e-280)
            .map(|(s, &m)| (s as f64, m.ln()))
            .collect();
        if pts.len() < 2 {
            return 0.0;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxy / sxx).exp()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn decay(&self) -> Option<Decay> {
        self.decay
    }

    fn side(&self) -> usize {
        2 * self.k_max + 1
    }

    pub fn index(&self, k: &[i64]) -> Option<usize> {
        let km = self.k_max as i64;
        if k.len() != self.dim || k.iter().any(|v| v.abs() > km) {
            return None;
        }
        Some(k.iter().fold(0usize, |acc, &v| acc * self.side() + (v + km) as usize))
    }

    pub fn wavevector(&self, mut idx: usize) -> Vec<i64> {
        let side = self.side();
        let mut k = vec![0i64; self.dim];
        for slot in k.iter_mut().rev() {
            *slot = (idx % side) as i64 - self.k_max as i64;
            idx /= side;
        }
        k
    }

    /// Coefficient of mode k, zero outside the stored range.
    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        self.index(k).map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    /// Set a coefficient and its Hermitian partner.
    pub fn set_real_mode(&mut self, k: &[i64], c: Complex64) {
        let neg: Vec<i64> = k.iter().map(|v| -v).collect();
        let i = self.index(k).expect("mode within truncation");
        let j = self.index(&neg).expect("mode within truncation");
        if i == j {
            self.coeffs[i] = Complex64::new(c.re, 0.0);
        } else {
            self.coeffs[i] = c;
            self.coeffs[j] = c.conj();
        }
        self.decay = None;
    }

    pub fn mean(&self) -> Complex64 {
        self.coeff(&vec![0; self.dim])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec<i64>, Complex64)> + '_ {
        self.coeffs.iter().enumerate().map(|(i, &c)| (self.wavevector(i), c))
    }

    /// max_k |c_{−k} − conj(c_k)|.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.coeffs.len();
        (0..n).map(|i| (self.coeffs[n - 1 - i] - self.coeffs[i].conj()).norm()).fold(0.0, f64::max)
    }

    /// Σ|c_k|.
    pub fn mass(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// Weighted majorant Σ|c_k| e^{2πσ|k|₁}.
    pub fn majorant_norm(&self, sigma: f64) -> f64 {
        self.iter().map(|(k, c)| c.norm() * (TAU * sigma * l1(&k) as f64).exp()).sum()
    }

    /// Σ_{|k|∞ > K} |c_k|.
    pub fn tail_mass(&self, k: usize) -> f64 {
        self.iter()
            .filter(|(kv, _)| kv.iter().any(|v| v.unsigned_abs() as usize > k))
            .map(|(_, c)| c.norm())
            .sum()
    }

    /// Restrict (or zero-pad) to |k|∞ ≤ K.
    pub fn truncated(&self, k: usize) -> Self {
        let mut out = Self::zeros(self.dim, k);
        for i in 0..out.coeffs.len() {
            let kv = out.wavevector(i);
            out.coeffs[i] = self.coeff(&kv);
        }
        out
    }

    /// Apply a coefficient-wise multiplier c_k ↦ m(k) c_k.
    pub fn map_modes(&self, mut m: impl FnMut(&[i64], Complex64) -> Complex64) -> Self {
        let mut out = Self::zeros(self.dim, self.k_max);
        for i in 0..self.coeffs.len() {
            let k = self.wavevector(i);
            out.coeffs[i] = m(&k, self.coeffs[i]);
        }
        out
    }

    /// a·self + b·other on the larger truncation.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!(self.dim, other.dim);
        let km = self.k_max.max(other.k_max);
        let mut out = Self::zeros(self.dim, km);
        for i in 0..out.coeffs.len() {
            let k = out.wavevector(i);
            out.coeffs[i] = self.coeff(&k) * a + other.coeff(&k) * b;
        }
        out
    }

    /// ∂/∂x_axis.
    pub fn derivative(&self, axis: usize) -> Self {
        self.map_modes(|k, c| c * Complex64::new(0.0, TAU * k[axis] as f64))
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        assert_eq!(x.len(), self.dim);
        self.iter()
            .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
            .map(|(k, c)| {
                let phase: f64 = k.iter().zip(x).map(|(&ki, &xi)| ki as f64 * xi).sum();
                c * Complex64::from_polar(1.0, TAU * phase.rem_euclid(1.0))
            })
            .sum()
    }

    /// Evaluation in angle variables θ ∈ [0, 2π)^d.
    pub fn eval_angle(&self, theta: &[f64]) -> Complex64 {
        let x: Vec<f64> = theta.iter().map(|t| t / TAU).collect();
        self.eval(&x)
    }

    /// Value and derivative of a one-dimensional series at real x.
    pub fn eval_1d_with_derivative(&self, x: f64) -> (f64, f64) {
        assert_eq!(self.dim, 1);
        let km = self.k_max as i64;
        let step = Complex64::from_polar(1.0, TAU * x.rem_euclid(1.0));
        // positive modes by recurrence; negative ones are conjugates for real series
        let mut p = Complex64::new(1.0, 0.0);
        let mut val = self.coeffs[km as usize];
        let mut der = Complex64::new(0.0, 0.0);
        for k in 1..=km {
            p *= step;
            if k % 64 == 0 {
                p = Complex64::from_polar(1.0, TAU * (k as f64 * x).rem_euclid(1.0));
            }
            let cp = self.coeffs[(km + k) as usize];
            let cn = self.coeffs[(km - k) as usize];
            let pc = p.conj();
            val += cp * p + cn * pc;
            der += Complex64::new(0.0, TAU * k as f64) * (cp * p - cn * pc);
        }
        (val.re, der.re)
    }

    /// Values on the uniform grid x = j/n in every axis (row-major, first axis slowest).
    pub fn grid_values(&self, n: usize) -> Result<Vec<Complex64>, FourierError> {
        if n < 2 * self.k_max + 1 {
            return Err(FourierError::GridTooCoarse {
                grid: n,
                k_max: self.k_max,
            });
        }
        let total = n.pow(self.dim as u32);
        let mut buf = vec![Complex64::new(0.0, 0.0); total];
        for (i, &c) in self.coeffs.iter().enumerate() {
            let k = self.wavevector(i);
            let pos = k.iter().fold(0usize, |acc, &v| acc * n + v.rem_euclid(n as i64) as usize);
            buf[pos] += c;
        }
        let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
        transform_axes(&mut buf, n, self.dim, |line| fft.process(line));
        Ok(buf)
    }

    /// Real part of the values on the grid x_j = j/n.
    pub fn samples_1d(&self, n: usize) -> Result<Vec<f64>, FourierError> {
        assert_eq!(self.dim, 1);
        Ok(self.grid_values(n)?.into_iter().map(|c| c.re).collect())
    }

    /// Interpolating series through real samples at x_j = j/n, n even.
    /// The Nyquist coefficient is split evenly between ±n/2.
    pub fn from_samples_1d(samples: &[f64]) -> Self {
        let n = samples.len();
        assert!(n >= 2 && n % 2 == 0, "need an even number of samples");
        let mut buf: Vec<Complex64> = samples.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
        let km = n / 2;
        let mut out = Self::zeros(1, km);
        let scale = 1.0 / n as f64;
        for k in -(km as i64)..=(km as i64) {
            let mut c = buf[k.rem_euclid(n as i64) as usize] * scale;
            if k.unsigned_abs() as usize == km {
                c = Complex64::new(c.re * 0.5, 0.0);
            }
            out.coeffs[(k + km as i64) as usize] = c;
        }
        for k in 1..=km {
            let avg = 0.5 * (out.coeffs[km + k] + out.coeffs[km - k].conj());
            out.coeffs[km + k] = avg;
            out.coeffs[km - k] = avg.conj();
        }
        out.coeffs[km].im = 0.0;
        out
    }

    /// Sup of |f| over the boundary tori Im x = ±σ (every sign pattern), using
    /// modes with |k|∞ ≤ max_mode and an n-point grid per axis.
    pub fn strip_sup_norm(&self, sigma: f64, max_mode: usize, n: usize) -> Result<f64, FourierError> {
        let trunc = self.truncated(max_mode.min(self.k_max));
        let mut best = 0.0f64;
        for pattern in 0..(1usize << self.dim) {
            let signs: Vec<f64> = (0..self.dim).map(|j| if pattern >> j & 1 == 1 { 1.0 } else { -1.0 }).collect();
            let shifted = trunc.map_modes(|k, c| {
                let w: f64 = k.iter().zip(&signs).map(|(&ki, s)| ki as f64 * s).sum();
                c * (-TAU * sigma * w).exp()
            });
            let vals = shifted.grid_values(n)?;
            best = best.max(vals.iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
        Ok(best)
    }
}

fn transform_axes(buf: &mut [Complex64], n: usize, dim: usize, mut f: impl FnMut(&mut [Complex64])) {
    let total = buf.len();
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        for start in 0..total {
            // first element of each line along this axis
            if (start / stride) % n != 0 {
                continue;
            }
            for (j, slot) in line.iter_mut().enumerate() {
                *slot = buf[start + j * stride];
            }
            f(&mut line);
            for (j, v) in line.iter().enumerate() {
                buf[start + j * stride] = *v;
            }
        }
    }
}
