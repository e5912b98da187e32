//! Synthetic eigenvalue-flow model: eigenlines sweeping past slow quasi-eigenvalue
//! windows, their occupancy, interval covers, good times, and the density-lemma
//! constructions of full-density subsequences.
//!
//! Eigenlines are piecewise linear on a uniform time grid. A fast cohort moves at
//! speeds in [Q−, Q+]; the remaining lines move at speeds in [0, M_cap]. Lines are
//! re-sorted at every grid time, so each stored branch is the k-th smallest value,
//! which models eigenvalue crossings as kinks. Quasi-lines have slopes in
//! [B_min, B] and keep their identity, since window ids matter for covers.
//! All asymptotic quantities (liminf, limsup) are replaced by finite-horizon
//! minima and maxima, and every report records the horizon used.

use crate::rng::stream;
use crate::spectral::c_clusters;
use rand::Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error("speed ordering violated: need B_min <= B <= Q- <= Q+ <= M_cap, got {0}")]
    Ordering(String),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("time {0} outside the model range")]
    TimeOutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub n_lines: usize,
    /// Eigenlines per unit energy at the initial time.
    pub weyl_rate: f64,
    /// Quasi-lines per eigenline.
    pub d: f64,
    /// Fraction of eigenlines outside the fast cohort.
    pub eps_frac: f64,
    pub q_minus: f64,
    pub q_plus: f64,
    /// Upper bound on quasi-line slopes.
    pub b: f64,
    /// Lower bound on quasi-line slopes.
    pub b_min: f64,
    /// Speed cap for every line.
    pub m_cap: f64,
    pub t_range: (f64, f64),
    /// Number of linear segments in time.
    pub steps: usize,
    pub seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            n_lines: 1000,
            weyl_rate: 100.0,
            d: 0.3,
            eps_frac: 0.05,
            q_minus: 1.0,
            q_plus: 1.1,
            b: 0.2,
            b_min: 0.0,
            m_cap: 2.0,
            t_range: (0.0, 1.0),
            steps: 100,
            seed: 0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let ordered = self.b_min <= self.b && self.b <= self.q_minus && self.q_minus <= self.q_plus && self.q_plus <= self.m_cap;
        if !ordered || !(self.b_min >= 0.0) {
            return Err(FlowError::Ordering(format!(
                "B_min={}, B={}, Q-={}, Q+={}, M_cap={}",
                self.b_min, self.b, self.q_minus, self.q_plus, self.m_cap
            )));
        }
        if self.n_lines == 0 || self.steps == 0 {
            return Err(FlowError::Invalid("n_lines and steps must be positive".into()));
        }
        if !(self.weyl_rate > 0.0 && self.weyl_rate.is_finite()) {
            return Err(FlowError::Invalid(format!("weyl_rate {}", self.weyl_rate)));
        }
        if !(self.d >= 0.0 && self.d.is_finite()) || !(0.0..=1.0).contains(&self.eps_frac) {
            return Err(FlowError::Invalid(format!("d {} eps_frac {}", self.d, self.eps_frac)));
        }
        if !(self.t_range.1 > self.t_range.0) {
            return Err(FlowError::Invalid("empty time range".into()));
        }
        Ok(())
    }

    /// Total energy span of the initial eigenlines.
    pub fn energy_span(&self) -> f64 {
        self.n_lines as f64 / self.weyl_rate
    }

    /// Default band: the part of the span that stays populated from below for the whole run.
    pub fn default_band(&self) -> (f64, f64) {
        let dt = self.t_range.1 - self.t_range.0;
        (self.m_cap * dt, self.energy_span())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    /// Window half-width.
    pub width: f64,
    pub band: (f64, f64),
}

impl WindowConfig {
    pub fn new(width: f64, band: (f64, f64)) -> Result<Self, FlowError> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(FlowError::Invalid(format!("window width {width}")));
        }
        if !(band.1 > band.0) {
            return Err(FlowError::Invalid(format!("band {band:?}")));
        }
        Ok(Self { width, band })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowModel {
    pub config: FlowConfig,
    pub times: Vec<f64>,
    /// branches[k][i] = k-th smallest eigenline value at times[i].
    pub branches: Vec<Vec<f64>>,
    /// quasi[m][i] = value of quasi-line m at times[i].
    pub quasi: Vec<Vec<f64>>,
}

/// Build a reproducible model. Initial values are jittered lattices with the
/// configured densities.
pub fn synth_flow(config: &FlowConfig) -> Result<FlowModel, FlowError> {
    config.validate()?;
    let n_t = config.steps + 1;
    let (t0, t1) = config.t_range;
    let dt = (t1 - t0) / config.steps as f64;
    let times: Vec<f64> = (0..n_t).map(|i| if i == config.steps { t1 } else { t0 + i as f64 * dt }).collect();
    let n_slow = (config.eps_frac * config.n_lines as f64).round() as usize;
    let mut rng = stream(config.seed, 0);
    // slow lines are spread evenly through the index range
    let slow: Vec<bool> = (0..config.n_lines).map(|k| n_slow > 0 && (k * n_slow) % config.n_lines < n_slow).collect();
    let mut raw: Vec<Vec<f64>> = Vec::with_capacity(config.n_lines);
    for &is_slow in &slow {
        let mut v = Vec::with_capacity(n_t);
        let mut e = (raw.len() as f64 + rng.random::<f64>()) / config.weyl_rate;
        v.push(e);
        for _ in 0..config.steps {
            let speed = if is_slow {
                rng.random_range(0.0..=config.m_cap)
            } else if config.q_plus > config.q_minus {
                rng.random_range(config.q_minus..config.q_plus)
            } else {
                config.q_minus
            };
            e += speed * dt;
            v.push(e);
        }
        raw.push(v);
    }
    let mut branches = vec![vec![0.0; n_t]; config.n_lines];
    let mut column = vec![0.0; config.n_lines];
    for i in 0..n_t {
        for (c, r) in column.iter_mut().zip(&raw) {
            *c = r[i];
        }
        column.sort_by(f64::total_cmp);
        for (b, &c) in branches.iter_mut().zip(&column) {
            b[i] = c;
        }
    }
    let n_quasi = (config.d * config.n_lines as f64).round() as usize;
    let quasi_rate = config.d * config.weyl_rate;
    let mut qrng = stream(config.seed, 1);
    let quasi = (0..n_quasi)
        .map(|m| {
            let mut v = Vec::with_capacity(n_t);
            let mut e = (m as f64 + qrng.random::<f64>()) / quasi_rate;
            v.push(e);
            for _ in 0..config.steps {
                let s = if config.b > config.b_min { qrng.random_range(config.b_min..config.b) } else { config.b };
                e += s * dt;
                v.push(e);
            }
            v
        })
        .collect();
    Ok(FlowModel { config: *config, times, branches, quasi })
}

impl FlowModel {
    pub fn n_lines(&self) -> usize {
        self.branches.len()
    }

    pub fn n_quasi(&self) -> usize {
        self.quasi.len()
    }

    fn locate(&self, t: f64) -> Result<(usize, f64), FlowError> {
        let (t0, t1) = (self.times[0], *self.times.last().expect("nonempty"));
        if !(t >= t0 && t <= t1) {
            return Err(FlowError::TimeOutOfRange(t));
        }
        let i = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1) - 1;
        let frac = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        Ok((i, frac))
    }

    fn interp(v: &[f64], i: usize, frac: f64) -> f64 {
        v[i] + (v[i + 1] - v[i]) * frac
    }

    pub fn eigen_at(&self, t: f64) -> Result<Vec<f64>, FlowError> {
        let (i, f) = self.locate(t)?;
        Ok(self.branches.iter().map(|b| Self::interp(b, i, f)).collect())
    }

    pub fn quasi_at(&self, t: f64) -> Result<Vec<f64>, FlowError> {
        let (i, f) = self.locate(t)?;
        Ok(self.quasi.iter().map(|q| Self::interp(q, i, f)).collect())
    }

    /// Empirical eigenline density per unit energy over `band` at the initial time.
    pub fn initial_density(&self, band: (f64, f64)) -> f64 {
        let n = self.branches.iter().filter(|b| b[0] >= band.0 && b[0] < band.1).count();
        n as f64 / (band.1 - band.0)
    }

    /// Speed of branch k on segment i.
    pub fn branch_speed(&self, k: usize, i: usize) -> f64 {
        (self.branches[k][i + 1] - self.branches[k][i]) / (self.times[i + 1] - self.times[i])
    }

    /// The drift-subtracted view: every value shifted by −s·(t − t0).
    pub fn drift_subtracted(&self, s: f64) -> FlowModel {
        let t0 = self.times[0];
        let shift = |v: &Vec<f64>| v.iter().zip(&self.times).map(|(x, t)| x - s * (t - t0)).collect::<Vec<f64>>();
        FlowModel {
            config: self.config,
            times: self.times.clone(),
            branches: self.branches.iter().map(shift).collect(),
            quasi: self.quasi.iter().map(shift).collect(),
        }
    }
}

/// W(t): union of [μ_m(t) − w, μ_m(t) + w] ∩ band, as disjoint increasing intervals.
pub fn windows(model: &FlowModel, cfg: &WindowConfig, t: f64) -> Result<Vec<(f64, f64)>, FlowError> {
    let mu = model.quasi_at(t)?;
    if mu.is_empty() {
        return Ok(Vec::new());
    }
    let set = c_clusters(&mu, cfg.width).map_err(|e| FlowError::Invalid(e.to_string()))?;
    Ok(set
        .windows
        .iter()
        .map(|&(a, b)| (a.max(cfg.band.0), b.min(cfg.band.1)))
        .filter(|(a, b)| b > a)
        .collect())
}

/// Times during which one branch sits in one window, per window id.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowVisits {
    /// (window id, merged intervals in increasing order).
    pub visits: Vec<(usize, Vec<(f64, f64)>)>,
    /// Lebesgue measure of the union over all windows.
    pub occupancy_time: f64,
}

// Quasi-lines sorted by value at each grid time, for candidate lookup.
struct QuasiIndex {
    order: Vec<Vec<usize>>,
    values: Vec<Vec<f64>>,
    max_slope: f64,
}

impl QuasiIndex {
    fn new(model: &FlowModel) -> Self {
        let n_t = model.times.len();
        let mut order = Vec::with_capacity(n_t);
        let mut values = Vec::with_capacity(n_t);
        for i in 0..n_t {
            let mut idx: Vec<usize> = (0..model.quasi.len()).collect();
            idx.sort_by(|&a, &b| model.quasi[a][i].total_cmp(&model.quasi[b][i]));
            values.push(idx.iter().map(|&m| model.quasi[m][i]).collect());
            order.push(idx);
        }
        let max_slope = model.config.b.abs().max(model.config.b_min.abs());
        Self { order, values, max_slope }
    }
}

// Sub-interval of [0, 1] where lo ≤ x0 + (x1 − x0)s ≤ hi.
fn linear_preimage(x0: f64, x1: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let dx = x1 - x0;
    let (a, b) = if dx == 0.0 {
        if x0 >= lo && x0 <= hi {
            (0.0, 1.0)
        } else {
            return None;
        }
    } else {
        let s_lo = (lo - x0) / dx;
        let s_hi = (hi - x0) / dx;
        (s_lo.min(s_hi).max(0.0), s_lo.max(s_hi).min(1.0))
    };
    (b > a).then_some((a, b))
}

fn union_measure(mut iv: Vec<(f64, f64)>) -> f64 {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (a, b) in iv {
        match cur {
            Some((ca, cb)) if a <= cb => cur = Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                total += cb - ca;
                cur = Some((a, b));
            }
            None => cur = Some((a, b)),
        }
    }
    if let Some((a, b)) = cur {
        total += b - a;
    }
    total
}

fn visits_with_index(model: &FlowModel, cfg: &WindowConfig, k: usize, index: &QuasiIndex) -> WindowVisits {
    let w = cfg.width;
    let e = &model.branches[k];
    let mut per_window: std::collections::BTreeMap<usize, Vec<(f64, f64)>> = std::collections::BTreeMap::new();
    let mut all = Vec::new();
    for i in 0..model.times.len() - 1 {
        let (ta, tb) = (model.times[i], model.times[i + 1]);
        let dt = tb - ta;
        let (e0, e1) = (e[i], e[i + 1]);
        let Some((ba, bb)) = linear_preimage(e0, e1, cfg.band.0, cfg.band.1) else {
            continue;
        };
        let reach = w + index.max_slope * dt;
        let lo = e0.min(e1) - reach;
        let hi = e0.max(e1) + reach;
        let vals = &index.values[i];
        let start = vals.partition_point(|&v| v < lo);
        let end = vals.partition_point(|&v| v <= hi);
        for &m in &index.order[i][start..end] {
            let q = &model.quasi[m];
            if let Some((a, b)) = linear_preimage(e0 - q[i], e1 - q[i + 1], -w, w) {
                let (a, b) = (a.max(ba), b.min(bb));
                if b > a {
                    let iv = (ta + a * dt, ta + b * dt);
                    let list = per_window.entry(m).or_default();
                    match list.last_mut() {
                        Some(last) if (iv.0 - last.1).abs() <= 1e-14 * (1.0 + iv.0.abs()) => last.1 = iv.1,
                        _ => list.push(iv),
                    }
                    all.push(iv);
                }
            }
        }
    }
    WindowVisits {
        visits: per_window.into_iter().collect(),
        occupancy_time: union_measure(all),
    }
}

/// Exact window visits of branch k (each segment is linear relative to each quasi-line).
pub fn window_visits(model: &FlowModel, cfg: &WindowConfig, k: usize) -> WindowVisits {
    visits_with_index(model, cfg, k, &QuasiIndex::new(model))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverInterval {
    pub start: f64,
    pub end: f64,
    pub window: usize,
    /// E(end) − E(start).
    pub jump: f64,
    /// 2w + B (end − start), the bound on the jump.
    pub jump_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalCover {
    pub intervals: Vec<CoverInterval>,
    pub cover_measure: f64,
    pub occupancy_time: f64,
}

/// Inductive cover of {t : E_k(t) ∈ W(t)}: s_j is the first entry after the
/// previous interval, the window is the one holding the line at s_j whose
/// current stay ends last (ties go to the lowest id), and s_j' is the end of
/// that stay. The union equals the occupancy set. When no window is
/// re-entered, as under monotone relative motion, s_j' is the last exit from
/// the window and the ids are distinct.
pub fn interval_cover(model: &FlowModel, cfg: &WindowConfig, k: usize) -> Result<IntervalCover, FlowError> {
    if k >= model.n_lines() {
        return Err(FlowError::Invalid(format!("line {k} out of range")));
    }
    let v = window_visits(model, cfg, k);
    let e = &model.branches[k];
    let eval = |t: f64| -> f64 {
        let i = model.times.partition_point(|&s| s <= t).clamp(1, model.times.len() - 1) - 1;
        let f = (t - model.times[i]) / (model.times[i + 1] - model.times[i]);
        e[i] + (e[i + 1] - e[i]) * f
    };
    let mut intervals = Vec::new();
    let mut cur = f64::NEG_INFINITY;
    loop {
        // first time after cur at which some window holds the line
        let mut s = f64::INFINITY;
        for (_, iv) in &v.visits {
            for &(a, b) in iv {
                if b > cur {
                    s = s.min(a.max(cur));
                }
            }
        }
        if !s.is_finite() {
            break;
        }
        let tol = 1e-13 * (1.0 + s.abs());
        let mut best: Option<(usize, f64)> = None;
        for (m, iv) in &v.visits {
            if let Some(&(_, exit)) = iv.iter().find(|&&(a, b)| a <= s + tol && b > s) {
                if best.is_none_or(|(_, x)| exit > x) {
                    best = Some((*m, exit));
                }
            }
        }
        let (m, end) = best.expect("a window holds the line at its entry time");
        intervals.push(CoverInterval {
            start: s,
            end,
            window: m,
            jump: eval(end) - eval(s),
            jump_bound: 2.0 * cfg.width + model.config.b * (end - s),
        });
        cur = end;
    }
    let cover_measure = union_measure(intervals.iter().map(|c| (c.start, c.end)).collect());
    Ok(IntervalCover {
        intervals,
        cover_measure,
        occupancy_time: v.occupancy_time,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyReport {
    /// Time fraction of each branch spent in W(t).
    pub q: Vec<f64>,
    /// Branches that move at speeds in [Q−, Q+] for at least 1 − √eps_frac of the
    /// time and stay inside the band throughout.
    pub fast: Vec<bool>,
    pub fast_mean: f64,
    pub fast_max: f64,
    /// (Q+ − Q−)/(Q+ − B): the share of time a fast line can spend in slow windows.
    pub d_target: f64,
    /// 2w · (quasi-line density) · Q+/(Q+ − B): the cost of window crossings.
    pub window_term: f64,
    /// Scan times and N(t)/#quasi(t) on them.
    pub scan_times: Vec<f64>,
    pub ratio: Vec<f64>,
    pub mean_ratio: f64,
    /// First scan time with ratio < 1/2.
    pub t_star: Option<f64>,
}

/// N(t) = #{k : E_k(t) ∈ W(t)} and the number of quasi-lines inside the band.
pub fn window_counts(model: &FlowModel, cfg: &WindowConfig, t: f64) -> Result<(usize, usize), FlowError> {
    let w = windows(model, cfg, t)?;
    let e = model.eigen_at(t)?;
    let n = e
        .iter()
        .filter(|&&x| {
            let i = w.partition_point(|iv| iv.1 < x);
            i < w.len() && w[i].0 <= x
        })
        .count();
    let nq = model.quasi_at(t)?.iter().filter(|&&x| x >= cfg.band.0 && x <= cfg.band.1).count();
    Ok((n, nq))
}

pub fn occupancy(model: &FlowModel, cfg: &WindowConfig, scan_points: usize) -> Result<OccupancyReport, FlowError> {
    let c = &model.config;
    let span = c.t_range.1 - c.t_range.0;
    let index = QuasiIndex::new(model);
    let q: Vec<f64> = (0..model.n_lines())
        .into_par_iter()
        .map(|k| visits_with_index(model, cfg, k, &index).occupancy_time / span)
        .collect();
    let tol = 1e-9 * (1.0 + c.q_plus);
    let need = 1.0 - c.eps_frac.sqrt();
    let fast: Vec<bool> = (0..model.n_lines())
        .map(|k| {
            let b = &model.branches[k];
            let inside = b.iter().all(|&x| x >= cfg.band.0 && x <= cfg.band.1);
            let fast_time: f64 = (0..c.steps)
                .filter(|&i| {
                    let s = model.branch_speed(k, i);
                    s >= c.q_minus - tol && s <= c.q_plus + tol
                })
                .map(|i| model.times[i + 1] - model.times[i])
                .sum();
            inside && fast_time >= need * span - 1e-12
        })
        .collect();
    let fq: Vec<f64> = q.iter().zip(&fast).filter(|(_, &f)| f).map(|(x, _)| *x).collect();
    let fast_mean = if fq.is_empty() { f64::NAN } else { fq.iter().sum::<f64>() / fq.len() as f64 };
    let fast_max = fq.iter().cloned().fold(f64::NAN, f64::max);
    let denom = c.q_plus - c.b;
    let (d_target, window_term) = if denom > 0.0 {
        ((c.q_plus - c.q_minus) / denom, 2.0 * cfg.width * c.d * c.weyl_rate * c.q_plus / denom)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let n_scan = scan_points.max(2);
    let scan_times: Vec<f64> = (0..n_scan).map(|i| c.t_range.0 + span * i as f64 / (n_scan - 1) as f64).collect();
    let ratio: Vec<f64> = scan_times
        .par_iter()
        .map(|&t| {
            let (n, nq) = window_counts(model, cfg, t)?;
            Ok(if nq == 0 { f64::NAN } else { n as f64 / nq as f64 })
        })
        .collect::<Result<_, FlowError>>()?;
    let finite: Vec<f64> = ratio.iter().cloned().filter(|r| r.is_finite()).collect();
    let mean_ratio = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
    let t_star = scan_times.iter().zip(&ratio).find(|(_, &r)| r < 0.5).map(|(t, _)| *t);
    Ok(OccupancyReport {
        q,
        fast,
        fast_mean,
        fast_max,
        d_target,
        window_term,
        scan_times,
        ratio,
        mean_ratio,
        t_star,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodTimeReport {
    pub times: Vec<f64>,
    pub flags: Vec<bool>,
    /// min over the count grid of #eigen / #quasi in the first n clusters.
    pub min_ratio: Vec<f64>,
    /// Largest cluster count n used (the finite horizon).
    pub horizon: usize,
    pub epsilon: f64,
}

/// Eigen-to-quasi count ratio over the first n clusters of W(t), for n on the grid
/// ⌈jN/8⌉, j = 1..8, with N = min(n_max, #clusters).
pub fn cluster_ratios(model: &FlowModel, cfg: &WindowConfig, t: f64, n_max: usize) -> Result<Vec<(usize, f64)>, FlowError> {
    let mu: Vec<f64> = model.quasi_at(t)?.into_iter().filter(|&x| x >= cfg.band.0 && x <= cfg.band.1).collect();
    if mu.is_empty() {
        return Ok(Vec::new());
    }
    let set = c_clusters(&mu, cfg.width).map_err(|e| FlowError::Invalid(e.to_string()))?;
    let mut quasi_per = vec![0usize; set.windows.len()];
    for &m in &set.membership {
        quasi_per[m] += 1;
    }
    let mut eigen_per = vec![0usize; set.windows.len()];
    for x in model.eigen_at(t)? {
        if x >= cfg.band.0 && x <= cfg.band.1 {
            if let Some(i) = set.window_of(x) {
                eigen_per[i] += 1;
            }
        }
    }
    let n = n_max.min(set.windows.len());
    let mut grid: Vec<usize> = (1..=8).map(|j| (j * n).div_ceil(8)).filter(|&v| v > 0).collect();
    grid.dedup();
    let mut out = Vec::with_capacity(grid.len());
    let (mut ne, mut nq, mut done) = (0usize, 0usize, 0usize);
    for g in grid {
        while done < g {
            ne += eigen_per[done];
            nq += quasi_per[done];
            done += 1;
        }
        out.push((g, ne as f64 / nq as f64));
    }
    Ok(out)
}

/// A time is flagged good when the finite-horizon minimum of the cluster ratio
/// is below 1 + ε².
pub fn good_time_detect(model: &FlowModel, cfg: &WindowConfig, t_grid: &[f64], epsilon: f64, n_max: usize) -> Result<GoodTimeReport, FlowError> {
    let min_ratio: Vec<f64> = t_grid
        .par_iter()
        .map(|&t| Ok(cluster_ratios(model, cfg, t, n_max)?.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)))
        .collect::<Result<_, FlowError>>()?;
    // no clusters at all: nothing concentrates, so the time is good
    let flags = min_ratio.iter().map(|&r| !r.is_finite() || r < 1.0 + epsilon * epsilon).collect();
    Ok(GoodTimeReport {
        times: t_grid.to_vec(),
        flags,
        min_ratio,
        horizon: n_max,
        epsilon,
    })
}

/// One member S_j of the family fed to the density lemma.
pub struct DensityFamilyMember<'a> {
    pub contains: Box<dyn Fn(usize) -> bool + Sync + 'a>,
    /// Density slack ε_j.
    pub eps: f64,
    /// Bound ε'_j on g along S_j.
    pub eps_prime: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityLemmaReport {
    /// Membership of 1..=horizon (index 0 is n = 1).
    pub member: Vec<bool>,
    pub horizon: usize,
    /// Cutover thresholds N_j; horizon + 1 marks a stage that never activates.
    pub thresholds: Vec<usize>,
    /// Density of S at the horizon and its minimum over n ∈ [horizon/2, horizon].
    pub density_at_horizon: f64,
    pub min_tail_density: f64,
    /// max g over S ∩ [N_j, horizon], per stage.
    pub max_g_after: Vec<f64>,
    /// max g ≤ bound on each active stage (2ε'_j for the lower-density version, ε'_j for the upper).
    pub g_conclusion: bool,
    pub density_conclusion: bool,
    /// Hypothesis check on the horizon: d_n(S_j) > d − ε_j at n = horizon.
    pub hypotheses: Vec<bool>,
}

impl DensityLemmaReport {
    pub fn len(&self) -> usize {
        self.member.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, n: usize) -> bool {
        n >= 1 && n <= self.horizon && self.member[n - 1]
    }
}

fn check_family(family: &[DensityFamilyMember], horizon: usize) -> Result<(), FlowError> {
    if horizon < 2 || family.is_empty() {
        return Err(FlowError::Invalid("need a horizon >= 2 and a nonempty family".into()));
    }
    for w in family.windows(2) {
        if w[1].eps > w[0].eps || w[1].eps_prime > w[0].eps_prime {
            return Err(FlowError::Invalid("eps_j and eps'_j must be non-increasing".into()));
        }
    }
    if family.iter().any(|f| !(f.eps >= 0.0 && f.eps_prime > 0.0)) {
        return Err(FlowError::Invalid("eps_j must be >= 0 and eps'_j > 0".into()));
    }
    Ok(())
}

fn prefix_density(indicator: &[bool]) -> Vec<f64> {
    let mut c = 0usize;
    indicator
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            c += usize::from(b);
            c as f64 / (i + 1) as f64
        })
        .collect()
}

fn density_summary(member: &[bool], d: f64, slack: f64) -> (f64, f64, bool) {
    let dens = prefix_density(member);
    let horizon = member.len();
    let at = dens[horizon - 1];
    let min_tail = dens[horizon / 2..].iter().cloned().fold(f64::INFINITY, f64::min);
    (at, min_tail, min_tail >= d - slack)
}

/// Lower-density construction on 1..=horizon. B_j = {g ≥ 2ε'_j}; N_j is the
/// smallest n > N_{j−1} with d_m(B_j) < 1 − d + 2ε_j for all m ∈ [n, horizon];
/// S is the complement of ∪_j B_j ∩ [N_j, horizon].
pub fn full_density_subsequence(
    g: &(dyn Fn(usize) -> f64 + Sync),
    family: &[DensityFamilyMember],
    d: f64,
    horizon: usize,
    slack: f64,
) -> Result<DensityLemmaReport, FlowError> {
    check_family(family, horizon)?;
    let gv: Vec<f64> = (1..=horizon).into_par_iter().map(g).collect();
    let mut thresholds = Vec::with_capacity(family.len());
    let mut prev = 0usize;
    let mut bad = vec![false; horizon];
    for f in family {
        let bj: Vec<bool> = gv.iter().map(|&x| x >= 2.0 * f.eps_prime).collect();
        let dens = prefix_density(&bj);
        let limit = 1.0 - d + 2.0 * f.eps;
        // smallest n with the inequality on all of [n, horizon]
        let mut first_ok = horizon + 1;
        for n in (1..=horizon).rev() {
            if dens[n - 1] < limit {
                first_ok = n;
            } else {
                break;
            }
        }
        let nj = first_ok.max(prev + 1);
        thresholds.push(nj);
        for n in nj..=horizon {
            if bj[n - 1] {
                bad[n - 1] = true;
            }
        }
        prev = nj;
    }
    let member: Vec<bool> = bad.iter().map(|b| !b).collect();
    let max_g_after: Vec<f64> = thresholds
        .iter()
        .map(|&nj| (nj..=horizon).filter(|&n| member[n - 1]).map(|n| gv[n - 1]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let g_conclusion = max_g_after.iter().zip(family).all(|(&m, f)| !(m >= 2.0 * f.eps_prime));
    let (at, min_tail, density_conclusion) = density_summary(&member, d, slack);
    let hypotheses = family
        .iter()
        .map(|f| (1..=horizon).filter(|&n| (f.contains)(n)).count() as f64 / horizon as f64 > d - f.eps)
        .collect();
    Ok(DensityLemmaReport {
        member,
        horizon,
        thresholds,
        density_at_horizon: at,
        min_tail_density: min_tail,
        max_g_after,
        g_conclusion,
        density_conclusion,
        hypotheses,
    })
}

/// Upper-density construction on 1..=horizon. Stage k keeps S_k on (N_{k−1}, N_k].
/// N_0 is the last index of S_1 with g ≥ ε'_1; N_k is the smallest n with
/// n ≥ N_{k−1}/ε_k, n past the last index of S_{k+1} with g ≥ ε'_{k+1}, and
/// d_n(S_k) > d − ε_k. After the last stage S_last is kept.
pub fn full_upper_density_subsequence(
    g: &(dyn Fn(usize) -> f64 + Sync),
    family: &[DensityFamilyMember],
    d: f64,
    horizon: usize,
    slack: f64,
) -> Result<DensityLemmaReport, FlowError> {
    check_family(family, horizon)?;
    if family.iter().any(|f| f.eps <= 0.0) {
        return Err(FlowError::Invalid("upper-density stages need eps_j > 0".into()));
    }
    let gv: Vec<f64> = (1..=horizon).into_par_iter().map(g).collect();
    let sets: Vec<Vec<bool>> = family.iter().map(|f| (1..=horizon).map(|n| (f.contains)(n)).collect()).collect();
    let last_bad: Vec<usize> = sets
        .iter()
        .zip(family)
        .map(|(s, f)| (1..=horizon).rev().find(|&n| s[n - 1] && gv[n - 1] >= f.eps_prime).unwrap_or(0))
        .collect();
    let mut member = vec![false; horizon];
    let mut thresholds = Vec::with_capacity(family.len());
    let mut prev = last_bad[0];
    let mut stage = 0usize;
    while stage < family.len() {
        let f = &family[stage];
        let dens = prefix_density(&sets[stage]);
        let next_bad = last_bad.get(stage + 1).copied().unwrap_or(0);
        let floor = ((prev as f64 / f.eps).ceil() as usize).max(next_bad).max(prev + 1);
        let nk = (floor..=horizon).find(|&n| dens[n - 1] > d - f.eps).unwrap_or(horizon + 1);
        for n in prev + 1..=nk.min(horizon) {
            member[n - 1] = sets[stage][n - 1];
        }
        thresholds.push(nk);
        if nk > horizon || stage + 1 == family.len() {
            for n in nk.min(horizon) + 1..=horizon {
                member[n - 1] = sets[stage][n - 1];
            }
            break;
        }
        prev = nk;
        stage += 1;
    }
    let max_g_after: Vec<f64> = thresholds
        .iter()
        .map(|&nk| (nk + 1..=horizon).filter(|&n| member[n - 1]).map(|n| gv[n - 1]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let g_conclusion = max_g_after.iter().zip(family).all(|(&m, f)| !(m >= f.eps_prime));
    let dens = prefix_density(&member);
    // upper density: the best density seen at an active threshold or at the horizon
    let best = thresholds
        .iter()
        .filter(|&&n| n <= horizon)
        .map(|&n| dens[n - 1])
        .fold(dens[horizon - 1], f64::max);
    let min_tail = dens[horizon / 2..].iter().cloned().fold(f64::INFINITY, f64::min);
    let hypotheses = sets
        .iter()
        .zip(family)
        .map(|(s, f)| prefix_density(s).iter().any(|&x| x > d - f.eps))
        .collect();
    Ok(DensityLemmaReport {
        member,
        horizon,
        thresholds,
        density_at_horizon: dens[horizon - 1],
        min_tail_density: min_tail,
        max_g_after,
        g_conclusion,
        density_conclusion: best >= d - slack,
        hypotheses,
    })
}
