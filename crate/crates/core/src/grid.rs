//! Five-point Dirichlet Laplacian on rasterized domains and its low spectrum.
//!
//! Nodes sit on the lattice hℤ². The axis with more nodes is ordered
//! outermost so the envelope of the matrix is about one short column wide.
//! Eigenvalues come from spectrum slicing: an envelope LDLᵀ factorization of
//! A − sI gives exact counts below s (Sylvester inertia), and shift-invert
//! Lanczos with thick restarts, full reorthogonalization and locking fills
//! each slice. Solves are iteratively refined because the factorization is
//! unpivoted.

use crate::billiard::{area, MushroomParams};
use crate::rng::stream;
use crate::spectral::c_clusters;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

const NONE: u32 = u32::MAX;

pub const EIGENSOLVER: &str = "envelope LDLT spectrum slicing + thick-restart shift-invert Lanczos (full reorthogonalization, iterative refinement, locking)";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("grid spacing {h} is too coarse (need h <= {max})")]
    TooCoarse { h: f64, max: f64 },
    #[error("grid spacing {0} does not align with the stalk")]
    Misaligned(f64),
    #[error("domain has no interior nodes")]
    Empty,
    #[error("too many unknowns: {0}")]
    TooLarge(usize),
    #[error("requested {requested} eigenvalues but at most {max} allowed")]
    TooManyEigenvalues { requested: usize, max: usize },
    #[error("eigensolver found {found} of {expected} eigenvalues in [{lo}, {hi})")]
    NonConvergence { found: usize, expected: usize, lo: f64, hi: f64 },
    #[error("factorization kept hitting tiny pivots near shift {0}")]
    Factorization(f64),
    #[error("spectrum slice only complete below {complete}, need {needed}")]
    SliceTooShort { complete: f64, needed: f64 },
    #[error("lambda * h = {0} is outside the trusted range")]
    UntrustedRange(f64),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Maximum number of unknowns.
pub const MAX_UNKNOWNS: usize = 100_000;

#[derive(Debug, Clone)]
pub struct RasterDomain {
    pub h_grid: f64,
    pub params: Option<MushroomParams>,
    /// Lattice coordinates (i, j) of the interior nodes, in solver order.
    nodes: Vec<(i64, i64)>,
    left: Vec<u32>,
    right: Vec<u32>,
    down: Vec<u32>,
    up: Vec<u32>,
}

impl RasterDomain {
    /// Interior nodes (i h, j h) inside the bounding box with `inside(i, j)`.
    pub fn from_lattice(h: f64, i_range: (i64, i64), j_range: (i64, i64), inside: impl Fn(i64, i64) -> bool) -> Result<Self, GridError> {
        let ni = (i_range.1 - i_range.0 + 1).max(0) as usize;
        let nj = (j_range.1 - j_range.0 + 1).max(0) as usize;
        let x_outer = ni >= nj;
        let (o_range, n_inner) = if x_outer { (i_range, nj) } else { (j_range, ni) };
        let n_outer = (o_range.1 - o_range.0 + 1).max(0) as usize;
        let mut id = vec![NONE; n_outer * n_inner];
        let mut nodes = Vec::new();
        for o in 0..n_outer {
            for q in 0..n_inner {
                let (i, j) = if x_outer {
                    (i_range.0 + o as i64, j_range.0 + q as i64)
                } else {
                    (i_range.0 + q as i64, j_range.0 + o as i64)
                };
                if inside(i, j) {
                    id[o * n_inner + q] = nodes.len() as u32;
                    nodes.push((i, j));
                }
            }
        }
        if nodes.is_empty() {
            return Err(GridError::Empty);
        }
        if nodes.len() > MAX_UNKNOWNS {
            return Err(GridError::TooLarge(nodes.len()));
        }
        let n = nodes.len();
        let (mut left, mut right, mut down, mut up) = (vec![NONE; n], vec![NONE; n], vec![NONE; n], vec![NONE; n]);
        for o in 0..n_outer {
            for q in 0..n_inner {
                let p = id[o * n_inner + q];
                if p == NONE {
                    continue;
                }
                let p = p as usize;
                if o > 0 {
                    left[p] = id[(o - 1) * n_inner + q];
                }
                if o + 1 < n_outer {
                    right[p] = id[(o + 1) * n_inner + q];
                }
                if q > 0 {
                    down[p] = id[o * n_inner + q - 1];
                }
                if q + 1 < n_inner {
                    up[p] = id[o * n_inner + q + 1];
                }
            }
        }
        Ok(Self {
            h_grid: h,
            params: None,
            nodes,
            left,
            right,
            down,
            up,
        })
    }

    /// Interior nodes of a region given by a point predicate on the box [x0,x1]×[y0,y1].
    pub fn from_predicate(h: f64, bbox: [f64; 4], inside: impl Fn(f64, f64) -> bool) -> Result<Self, GridError> {
        if !(h > 0.0) {
            return Err(GridError::Invalid("h must be positive".into()));
        }
        let [x0, x1, y0, y1] = bbox;
        let ir = ((x0 / h).floor() as i64, (x1 / h).ceil() as i64);
        let jr = ((y0 / h).floor() as i64, (y1 / h).ceil() as i64);
        Self::from_lattice(h, ir, jr, |i, j| inside(i as f64 * h, j as f64 * h))
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    /// Number of interior nodes times h².
    pub fn raster_area(&self) -> f64 {
        self.dim() as f64 * self.h_grid * self.h_grid
    }

    pub fn node_position(&self, p: usize) -> (f64, f64) {
        let (i, j) = self.nodes[p];
        (i as f64 * self.h_grid, j as f64 * self.h_grid)
    }

    /// y = A x with A = h⁻²(4I − neighbours).
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let s = 1.0 / (self.h_grid * self.h_grid);
        let get = |q: u32| if q == NONE { 0.0 } else { x[q as usize] };
        y.par_chunks_mut(4096).enumerate().for_each(|(c, chunk)| {
            for (off, out) in chunk.iter_mut().enumerate() {
                let p = c * 4096 + off;
                *out = s * (4.0 * x[p] - get(self.left[p]) - get(self.right[p]) - get(self.down[p]) - get(self.up[p]));
            }
        });
    }

    fn envelope_start(&self, p: usize) -> usize {
        if self.left[p] != NONE {
            self.left[p] as usize
        } else if self.down[p] != NONE {
            self.down[p] as usize
        } else {
            p
        }
    }
}

/// Mushroom interior nodes. The stalk walls and floor must lie on grid lines.
pub fn rasterize(params: &MushroomParams, h_grid: f64) -> Result<RasterDomain, GridError> {
    let max = params.r1 / 10.0;
    if !(h_grid > 0.0) || h_grid > max * (1.0 + 1e-12) {
        return Err(GridError::TooCoarse { h: h_grid, max });
    }
    let r1 = params.r1 / h_grid;
    let t = params.t / h_grid;
    if (r1 - r1.round()).abs() > 1e-6 || (t - t.round()).abs() > 1e-6 {
        return Err(GridError::Misaligned(h_grid));
    }
    let (r1, t) = (r1.round() as i64, t.round() as i64);
    let r2 = params.r2 / h_grid;
    let r2sq = r2 * r2;
    let top = r2.ceil() as i64;
    let mut d = RasterDomain::from_lattice(h_grid, (-top, top), (-t, top), |i, j| {
        let in_hat = j > 0 && ((i * i + j * j) as f64) < r2sq;
        let in_stalk = i.abs() < r1 && j <= 0 && j > -t;
        in_hat || in_stalk
    })?;
    d.params = Some(*params);
    Ok(d)
}

/// Envelope LDLᵀ factorization of A − sI.
struct EnvelopeLdl {
    start: Vec<usize>,
    offset: Vec<usize>,
    l: Vec<f64>,
    d: Vec<f64>,
}

impl EnvelopeLdl {
    fn factor(dom: &RasterDomain, shift: f64) -> Option<Self> {
        let n = dom.dim();
        let inv_h2 = 1.0 / (dom.h_grid * dom.h_grid);
        let mut start = Vec::with_capacity(n);
        let mut offset = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for p in 0..n {
            let f = dom.envelope_start(p);
            start.push(f);
            offset.push(total);
            total += p - f;
        }
        offset.push(total);
        let mut l = vec![0.0f64; total];
        let mut d = vec![0.0f64; n];
        let mut w = Vec::new();
        let tiny = 1e-11 * 8.0 * inv_h2;
        for p in 0..n {
            let fp = start[p];
            let len = p - fp;
            w.clear();
            w.resize(len, 0.0);
            if dom.left[p] != NONE {
                w[dom.left[p] as usize - fp] = -inv_h2;
            }
            if dom.down[p] != NONE {
                w[dom.down[p] as usize - fp] = -inv_h2;
            }
            for j in fp..p {
                let fj = start[j];
                let lo = fp.max(fj);
                let lj = &l[offset[j] + (lo - fj)..offset[j] + (j - fj)];
                let wp = &w[lo - fp..j - fp];
                let s: f64 = wp.iter().zip(lj).map(|(a, b)| a * b).sum();
                w[j - fp] -= s;
            }
            let row = &mut l[offset[p]..offset[p] + len];
            let mut dp = 4.0 * inv_h2 - shift;
            for (q, r) in row.iter_mut().enumerate() {
                let lv = w[q] / d[fp + q];
                *r = lv;
                dp -= w[q] * lv;
            }
            if dp.abs() < tiny || !dp.is_finite() {
                return None;
            }
            d[p] = dp;
        }
        Some(Self { start, offset, l, d })
    }

    fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.d.len();
        x.copy_from_slice(b);
        for p in 0..n {
            let fp = self.start[p];
            let row = &self.l[self.offset[p]..self.offset[p + 1]];
            let s: f64 = row.iter().zip(&x[fp..p]).map(|(a, b)| a * b).sum();
            x[p] -= s;
        }
        for p in 0..n {
            x[p] /= self.d[p];
        }
        for p in (0..n).rev() {
            let fp = self.start[p];
            let xp = x[p];
            let row = &self.l[self.offset[p]..self.offset[p + 1]];
            for (xj, lv) in x[fp..p].iter_mut().zip(row) {
                *xj -= lv * xp;
            }
        }
    }
}

fn factor_near(dom: &RasterDomain, shift: f64) -> Result<(EnvelopeLdl, f64), GridError> {
    let mut s = shift;
    for attempt in 0..8 {
        if let Some(f) = EnvelopeLdl::factor(dom, s) {
            return Ok((f, s));
        }
        s = shift + 1e-7 * (1.0 + shift.abs()) * (attempt as f64 + 1.0);
    }
    Err(GridError::Factorization(shift))
}

// Factorization for shift-invert: without pivoting a pivot close to zero can
// spoil solves even when it passes the tiny-pivot test, so each candidate shift
// is checked with one solve and moved inside [lo, hi) until the relative
// solve residual is below 1e-10.
fn factor_for_slice(dom: &RasterDomain, lo: f64, hi: f64) -> Result<(EnvelopeLdl, f64, usize), GridError> {
    let n = dom.dim();
    let b: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.618_033_988_749_895).fract() - 0.5).collect();
    let nb = dot(&b, &b).sqrt();
    let mut x = vec![0.0; n];
    let mut ax = vec![0.0; n];
    let mid = 0.5 * (lo + hi);
    let mut tries = 0;
    for attempt in 0..12 {
        // 0, +, −, +2, −2, ... in steps of a fiftieth of the slice width
        let k = (attempt as usize).div_ceil(2) as f64 * if attempt % 2 == 1 { 1.0 } else { -1.0 };
        let (f, sigma) = factor_near(dom, mid + k * (hi - lo) / 50.0)?;
        tries += 1;
        f.solve(&b, &mut x);
        dom.apply(&x, &mut ax);
        let res = (0..n).map(|i| (b[i] - ax[i] + sigma * x[i]).powi(2)).sum::<f64>().sqrt();
        if res < 1e-10 * nb {
            return Ok((f, sigma, tries));
        }
    }
    Err(GridError::Factorization(mid))
}

/// Number of eigenvalues below `s` (Sylvester inertia; `s` may be nudged by
/// a relative 1e-7 to avoid tiny pivots, which is reported back).
pub fn count_below(dom: &RasterDomain, s: f64) -> Result<(usize, f64), GridError> {
    if s <= 0.0 {
        return Ok((0, s));
    }
    let (f, used) = factor_near(dom, s)?;
    Ok((f.negative_pivots(), used))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Bound on ‖A u − E u‖ for unit u.
    pub tol: f64,
    pub seed: u64,
    /// Target number of eigenvalues per slice.
    pub slice_size: usize,
    pub max_restarts: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            seed: 0,
            slice_size: 40,
            max_restarts: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSlice {
    pub eigenvalues: Vec<f64>,
    pub n_computed: usize,
    /// ‖A u − E u‖ per eigenpair.
    pub residual_bounds: Vec<f64>,
    /// Every eigenvalue below this value is listed.
    pub complete_below: f64,
    pub method: &'static str,
    pub factorizations: usize,
}

// x = (A − σI)⁻¹ b with `steps` rounds of iterative refinement, which remove
// the rounding left by the unpivoted indefinite factorization.
fn refined_solve(dom: &RasterDomain, fac: &EnvelopeLdl, sigma: f64, b: &[f64], x: &mut [f64], steps: usize) {
    let n = b.len();
    let mut ax = vec![0.0; n];
    let mut dx = vec![0.0; n];
    fac.solve(b, x);
    for _ in 0..steps {
        dom.apply(x, &mut ax);
        let res: Vec<f64> = (0..n).map(|i| b[i] - (ax[i] - sigma * x[i])).collect();
        fac.solve(&res, &mut dx);
        axpy(1.0, &dx, x);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for v in basis {
            let c = dot(v, w);
            axpy(-c, v, w);
        }
    }
}

// All eigenpairs with eigenvalue in [lo, hi), of which there are `count`.
// Thick-restart Lanczos on (A − σI)⁻¹ with full reorthogonalization. A Ritz
// pair (θ, u) with Op u = θu + βs v_next is purified to u' ∝ θu + βs v_next,
// whose A-residual is about β|s|/θ²; converged pairs are locked.
fn solve_slice(dom: &RasterDomain, lo: f64, hi: f64, count: usize, opts: &SolverOptions, stream_id: u64) -> Result<(Vec<(f64, f64)>, usize), GridError> {
    let n = dom.dim();
    let (fac, sigma, tries) = factor_for_slice(dom, lo, hi)?;
    let mut rng = stream(opts.seed, stream_id);
    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut found: Vec<(f64, f64)> = Vec::new();
    let m_max = (2 * count + 30).min(n);
    let mut au = vec![0.0; n];
    let mut w = vec![0.0; n];

    let mut start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nv = dot(&start, &start).sqrt();
    start.iter_mut().for_each(|x| *x /= nv);
    let mut basis: Vec<Vec<f64>> = vec![start];
    // projected matrix, column j holds ⟨v_i, Op v_j⟩ for i ≤ j
    let mut h = DMatrix::<f64>::zeros(m_max + 1, m_max + 1);
    let mut kept = 0usize;
    for _cycle in 0..opts.max_restarts * 4 {
        let mut beta = 0.0;
        let mut j = kept;
        while j < m_max && j < basis.len() {
            refined_solve(dom, &fac, sigma, &basis[j], &mut w, 1);
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(v, &w);
                    axpy(-c, v, &mut w);
                    h[(i, j)] += c;
                }
                for v in &locked {
                    let c = dot(v, &w);
                    axpy(-c, v, &mut w);
                }
            }
            beta = dot(&w, &w).sqrt();
            j += 1;
            if beta < 1e-13 * h[(j - 1, j - 1)].abs().max(1e-300) || basis.len() + locked.len() >= n {
                beta = 0.0;
                break;
            }
            if j < m_max {
                basis.push(w.iter().map(|x| x / beta).collect());
            }
        }
        let k = j;
        let next: Vec<f64> = if beta > 0.0 { w.iter().map(|x| x / beta).collect() } else { vec![0.0; n] };
        let hs = DMatrix::from_fn(k, k, |r, c| if r <= c { h[(r, c)] } else { h[(c, r)] });
        let eig = SymmetricEigen::new(hs);
        // order Ritz values by distance of E from σ (largest |θ| first)
        let mut order: Vec<usize> = (0..k).filter(|&i| eig.eigenvalues[i] != 0.0).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));
        let mut converged = vec![false; k];
        let mut pending: Vec<(usize, Vec<f64>)> = Vec::new();
        for &i in &order {
            let theta = eig.eigenvalues[i];
            let e_est = sigma + 1.0 / theta;
            if !(e_est >= lo - 1e-6 && e_est < hi + 1e-6) {
                continue;
            }
            let s_last = eig.eigenvectors[(k - 1, i)];
            if beta * s_last.abs() / (theta * theta) > 0.1 * opts.tol && beta > 0.0 {
                continue;
            }
            // polish: one refined inverse-iteration step from the Ritz vector
            let s = eig.eigenvectors.column(i);
            let mut y = vec![0.0; n];
            for (c, bv) in basis.iter().take(k).enumerate() {
                axpy(s[c], bv, &mut y);
            }
            let mut u = vec![0.0; n];
            refined_solve(dom, &fac, sigma, &y, &mut u, 2);
            for _ in 0..2 {
                for v in &locked {
                    let c = dot(v, &u);
                    axpy(-c, v, &mut u);
                }
            }
            let nu = dot(&u, &u).sqrt();
            u.iter_mut().for_each(|x| *x /= nu);
            dom.apply(&u, &mut au);
            let e = dot(&u, &au);
            let r = au.iter().zip(&u).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt();
            if r < opts.tol && e >= lo && e < hi {
                found.push((e, r));
                locked.push(u);
                converged[i] = true;
            } else if r < 1e3 * opts.tol {
                pending.push((i, u));
            }
        }
        // near-degenerate pairs are mixed at the level of the solve error;
        // a Rayleigh-Ritz step with A on the polished vectors separates them
        if !pending.is_empty() {
            let mut z: Vec<Vec<f64>> = Vec::new();
            for (_, mut u) in pending.drain(..) {
                for _ in 0..2 {
                    for v in locked.iter().chain(z.iter()) {
                        let c = dot(v, &u);
                        axpy(-c, v, &mut u);
                    }
                }
                let nu = dot(&u, &u).sqrt();
                if nu > 1e-3 {
                    u.iter_mut().for_each(|x| *x /= nu);
                    z.push(u);
                }
            }
            let az: Vec<Vec<f64>> = z
                .iter()
                .map(|u| {
                    let mut a = vec![0.0; n];
                    dom.apply(u, &mut a);
                    a
                })
                .collect();
            let p = z.len();
            let g = DMatrix::from_fn(p, p, |r, c| 0.5 * (dot(&z[r], &az[c]) + dot(&z[c], &az[r])));
            let ge = SymmetricEigen::new(g);
            for q in 0..p {
                let mut u = vec![0.0; n];
                let mut a = vec![0.0; n];
                for c in 0..p {
                    let w = ge.eigenvectors[(c, q)];
                    axpy(w, &z[c], &mut u);
                    axpy(w, &az[c], &mut a);
                }
                let e = ge.eigenvalues[q];
                let r = a.iter().zip(&u).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt();
                if r < opts.tol && e >= lo && e < hi && found.len() < count {
                    found.push((e, r));
                    locked.push(u);
                }
            }
        }
        if found.len() >= count || basis.len() + locked.len() >= n {
            break;
        }
        // restart with the unconverged Ritz vectors nearest σ plus the residual direction
        let want = count - found.len();
        let keep: Vec<usize> = order.iter().copied().filter(|&i| !converged[i]).take((want + 8).min(m_max / 2)).collect();
        let mut new_basis: Vec<Vec<f64>> = Vec::with_capacity(m_max);
        h.fill(0.0);
        for (slot, &i) in keep.iter().enumerate() {
            let s = eig.eigenvectors.column(i);
            let mut y = vec![0.0; n];
            for (c, bv) in basis.iter().take(k).enumerate() {
                axpy(s[c], bv, &mut y);
            }
            h[(slot, slot)] = eig.eigenvalues[i];
            new_basis.push(y);
        }
        kept = new_basis.len();
        if beta > 0.0 {
            // couplings ⟨y_i, Op v_next⟩ = β s_last,i are recomputed by the next orthogonalization
            new_basis.push(next);
        } else {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            orthogonalize(&mut v, &locked);
            orthogonalize(&mut v, &new_basis);
            let nv = dot(&v, &v).sqrt();
            new_basis.push(v.iter().map(|x| x / nv).collect());
        }
        basis = new_basis;
    }
    if found.len() != count {
        return Err(GridError::NonConvergence {
            found: found.len(),
            expected: count,
            lo,
            hi,
        });
    }
    Ok((found, tries))
}

/// All eigenvalues below `e_max`.
pub fn eigenvalues_below(dom: &RasterDomain, e_max: f64, opts: &SolverOptions) -> Result<SpectrumSlice, GridError> {
    let (total, e_top) = count_below(dom, e_max)?;
    let mut factorizations = usize::from(e_max > 0.0);
    if total > 400 {
        return Err(GridError::TooManyEigenvalues { requested: total, max: 400 });
    }
    // slice boundaries from the Weyl density, refined by inertia counts
    let density = dom.raster_area() / (4.0 * PI);
    let mut bounds: Vec<(f64, usize)> = vec![(0.0, 0)];
    let mut k = 1;
    loop {
        let e = opts.slice_size as f64 * k as f64 / density;
        if e >= e_top {
            break;
        }
        let (c, used) = count_below(dom, e)?;
        factorizations += 1;
        bounds.push((used, c));
        k += 1;
    }
    bounds.push((e_top, total));
    let mut i = 0;
    while i + 1 < bounds.len() {
        let (a, ca) = bounds[i];
        let (b, cb) = bounds[i + 1];
        if cb - ca > opts.slice_size * 3 / 2 && b - a > 1e-6 * b {
            let mid = 0.5 * (a + b);
            let (c, used) = count_below(dom, mid)?;
            factorizations += 1;
            bounds.insert(i + 1, (used, c));
        } else {
            i += 1;
        }
    }
    let mut pairs = Vec::with_capacity(total);
    for (sid, w) in bounds.windows(2).enumerate() {
        let ((a, ca), (b, cb)) = (w[0], w[1]);
        if cb > ca {
            let (found, tries) = solve_slice(dom, a, b, cb - ca, opts, sid as u64)?;
            pairs.extend(found);
            factorizations += tries;
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(SpectrumSlice {
        n_computed: pairs.len(),
        eigenvalues: pairs.iter().map(|p| p.0).collect(),
        residual_bounds: pairs.iter().map(|p| p.1).collect(),
        complete_below: e_top,
        method: EIGENSOLVER,
        factorizations,
    })
}

/// The `count` smallest eigenvalues.
pub fn lowest_eigenvalues(dom: &RasterDomain, count: usize) -> Result<SpectrumSlice, GridError> {
    lowest_eigenvalues_with(dom, count, &SolverOptions::default())
}

pub fn lowest_eigenvalues_with(dom: &RasterDomain, count: usize, opts: &SolverOptions) -> Result<SpectrumSlice, GridError> {
    let max = (dom.dim() / 10).min(400);
    if count == 0 || count > max {
        return Err(GridError::TooManyEigenvalues { requested: count, max });
    }
    // find e with count ≤ N(e) ≤ 1.2 count + 2, starting from the Weyl guess
    let density = dom.raster_area() / (4.0 * PI);
    let mut e = (count as f64 + 0.5) / density;
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    let mut chosen = None;
    for _ in 0..60 {
        let (c, used) = count_below(dom, e)?;
        if c < count {
            lo = used;
            e = if hi.is_finite() { 0.5 * (lo + hi) } else { e * 1.3 };
        } else if c > count + count / 5 + 2 {
            hi = used;
            e = 0.5 * (lo + hi);
        } else {
            chosen = Some(used);
            break;
        }
    }
    let e = chosen.ok_or_else(|| GridError::Invalid("could not bracket the requested eigenvalues".into()))?;
    let mut slice = eigenvalues_below(dom, e, opts)?;
    slice.eigenvalues.truncate(count);
    slice.residual_bounds.truncate(count);
    slice.n_computed = slice.eigenvalues.len();
    slice.complete_below = *slice.eigenvalues.last().expect("nonempty");
    Ok(slice)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylDeficit {
    pub n_count: usize,
    pub weyl_main: f64,
    pub relative_gap: f64,
}

/// Compare #{E ≤ λ²} with λ² A / (4π) for the continuum area A.
pub fn weyl_deficit(slice: &SpectrumSlice, params: &MushroomParams, h_grid: f64, lambda: f64) -> Result<WeylDeficit, GridError> {
    if lambda * h_grid >= 0.3 {
        return Err(GridError::UntrustedRange(lambda * h_grid));
    }
    let e = lambda * lambda;
    if e > slice.complete_below {
        return Err(GridError::SliceTooShort {
            complete: slice.complete_below,
            needed: e,
        });
    }
    let n_count = slice.eigenvalues.iter().filter(|&&v| v <= e).count();
    let weyl_main = e * area(params) / (4.0 * PI);
    Ok(WeylDeficit {
        n_count,
        weyl_main,
        relative_gap: (n_count as f64 - weyl_main) / weyl_main,
    })
}

/// Domain-monotonicity slope constant between stalk lengths t < t':
/// M_{t'} ⊆ (t'/t)·M_t gives E(t') ≥ (t/t')² E(t).
pub fn slope_constant(t: f64, t_next: f64) -> f64 {
    (1.0 - (t / t_next).powi(2)) / (t_next - t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchTable {
    pub ts: Vec<f64>,
    pub areas: Vec<f64>,
    /// eigenvalues[i][j] = E_j(t_i).
    pub eigenvalues: Vec<Vec<f64>>,
    /// Branch j is non-increasing in t within `tol`.
    pub monotone: Vec<bool>,
    pub max_increase: f64,
    /// Per interval: max over branches of −slope/(C E_j) (≤ 1 means within bound).
    pub slope_ratio: Vec<f64>,
}

/// Sorted-spectrum branches over an increasing list of stalk lengths.
pub fn eigenvalue_branches(params_list: &[MushroomParams], h_grid: f64, count: usize, opts: &SolverOptions, tol: f64) -> Result<BranchTable, GridError> {
    if params_list.windows(2).any(|w| w[1].t <= w[0].t || w[1].r1 != w[0].r1 || w[1].r2 != w[0].r2) {
        return Err(GridError::Invalid("t must increase with fixed r1, r2".into()));
    }
    let eigenvalues: Vec<Vec<f64>> = params_list
        .par_iter()
        .map(|p| lowest_eigenvalues_with(&rasterize(p, h_grid)?, count, opts).map(|s| s.eigenvalues))
        .collect::<Result<_, _>>()?;
    let mut monotone = vec![true; count];
    let mut max_increase = f64::NEG_INFINITY;
    let mut slope_ratio = Vec::new();
    for (i, w) in eigenvalues.windows(2).enumerate() {
        let (t0, t1) = (params_list[i].t, params_list[i + 1].t);
        let c = slope_constant(t0, t1);
        let mut worst = 0.0f64;
        for j in 0..count {
            let inc = w[1][j] - w[0][j];
            max_increase = max_increase.max(inc);
            if inc > tol {
                monotone[j] = false;
            }
            let slope = inc / (t1 - t0);
            worst = worst.max(-slope / (c * w[0][j]));
        }
        slope_ratio.push(worst);
    }
    Ok(BranchTable {
        ts: params_list.iter().map(|p| p.t).collect(),
        areas: params_list.iter().map(area).collect(),
        eigenvalues,
        monotone,
        max_increase,
        slope_ratio,
    })
}

/// Fraction of eigenvalues lying in the c-clusters of the quasi-eigenvalues.
pub fn cluster_fraction(eigenvalues: &[f64], quasi_eigenvalues: &[f64], c: f64) -> f64 {
    if eigenvalues.is_empty() || quasi_eigenvalues.is_empty() {
        return 0.0;
    }
    let Ok(set) = c_clusters(quasi_eigenvalues, c) else {
        return f64::NAN;
    };
    eigenvalues.iter().filter(|&&e| set.contains(e)).count() as f64 / eigenvalues.len() as f64
}
