//! Subcommand definitions. Each one validates its parameters in `prepare`
//! (used alone by `--dry-run`) and returns a job that does the computation.

use crate::output::{json_f64, Outcome, Table};
use crate::row;
use clap::{Args, Subcommand};
use num_complex::Complex64;
use qergo::billiard::{self, MushroomParams, PhasePoint};
use qergo::circle::{kam_iterate, rotation_number, CircleMap};
use qergo::flow::{self, FlowConfig, WindowConfig};
use qergo::fourier::TorusFourier;
use qergo::grid::{self, SolverOptions};
use qergo::quasimode::{self, QuasimodeSpec};
use qergo::rng::stream;
use qergo::torus::{self, ActionLattice, ActionSet, FrequencyVector};
use rand::Rng;
use serde::{Serialize, Serializer};
use serde_json::Value;
use std::f64::consts::TAU;
use std::str::FromStr;

pub type Job = Box<dyn FnOnce() -> Result<Outcome, String>>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Comma-separated reals, kept as the original text in metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Floats(pub Vec<f64>);

impl FromStr for Floats {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let v = s
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(format!("expected finite comma-separated numbers, got {s:?}"));
        }
        Ok(Floats(v))
    }
}

impl Serialize for Floats {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.iter().map(f64::to_string).collect::<Vec<_>>().join(","))
    }
}

impl Floats {
    fn counts(&self, what: &str) -> Result<Vec<usize>, String> {
        self.0.iter().map(|&x| to_count(x).map_err(|e| format!("{what}: {e}"))).collect()
    }
}

fn to_count(x: f64) -> Result<usize, String> {
    if x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x <= 9.0e15 {
        Ok(x as usize)
    } else {
        Err(format!("expected a non-negative integer, got {x}"))
    }
}

/// Integer that also accepts scientific notation such as `1e6`.
fn parse_count(s: &str) -> Result<usize, String> {
    to_count(s.trim().parse::<f64>().map_err(|e| e.to_string())?)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Mushroom {
    /// Stalk half-width r1.
    #[arg(long, default_value_t = 1.0)]
    pub r1: f64,
    /// Cap radius r2.
    #[arg(long, default_value_t = 2.0)]
    pub r2: f64,
    /// Stalk length t.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
}

impl Mushroom {
    fn params(&self) -> Result<MushroomParams, String> {
        MushroomParams::new(self.r1, self.r2, self.t).map_err(err)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Solver {
    /// Grid spacing.
    #[arg(long, default_value_t = 0.02)]
    pub h: f64,
    /// Eigenpair residual tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl Solver {
    fn options(&self) -> Result<SolverOptions, String> {
        if !(self.tol > 0.0 && self.tol < 1e-2) {
            return Err(format!("tol must lie in (0, 1e-2), got {}", self.tol));
        }
        Ok(SolverOptions { tol: self.tol, seed: self.seed, ..SolverOptions::default() })
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Liouville fraction of the integrable region: closed form against Monte Carlo.
    BilliardFractions(BilliardFractions),
    /// Bounce sequence of one billiard trajectory.
    BilliardOrbit(BilliardOrbit),
    /// Count of admissible quasi-eigenvalues below lambda.
    QuasimodeCount(QuasimodeCount),
    /// Quasimode residuals for a list of angular orders.
    QuasimodeResidual(QuasimodeResidual),
    /// Gram matrix of a block of quasimodes.
    QuasimodeGram(QuasimodeGram),
    /// Lowest Dirichlet eigenvalues of the rasterised mushroom.
    GridSpectrum(GridSpectrum),
    /// Eigenvalue counts against the Weyl main term.
    WeylCheck(WeylCheck),
    /// Sorted eigenvalue branches over a list of stalk lengths.
    EigenBranches(EigenBranches),
    /// KAM iteration for a perturbed circle rotation.
    KamCircle(KamCircle),
    /// Regularised homological equation on the 2-torus.
    HomologicalSolve(HomologicalSolve),
    /// Fourier truncation tails and coefficient-decay checks.
    FourierBounds(FourierBounds),
    /// Measure of the non-Diophantine set as a function of kappa.
    DiophantineMeasure(DiophantineMeasure),
    /// Quasi-eigenvalue lattice counts for a ball of actions.
    QuasiLattice(QuasiLattice),
    /// Synthetic eigenvalue-flow occupancy statistics.
    FlowSim(FlowSim),
    /// Full-density subsequence construction.
    DensityLemma(DensityLemma),
}

pub const NAMES: [&str; 15] = [
    "billiard-fractions",
    "billiard-orbit",
    "quasimode-count",
    "quasimode-residual",
    "quasimode-gram",
    "grid-spectrum",
    "weyl-check",
    "eigen-branches",
    "kam-circle",
    "homological-solve",
    "fourier-bounds",
    "diophantine-measure",
    "quasi-lattice",
    "flow-sim",
    "density-lemma",
];

impl Command {
    pub fn name(&self) -> &'static str {
        let i = match self {
            Command::BilliardFractions(_) => 0,
            Command::BilliardOrbit(_) => 1,
            Command::QuasimodeCount(_) => 2,
            Command::QuasimodeResidual(_) => 3,
            Command::QuasimodeGram(_) => 4,
            Command::GridSpectrum(_) => 5,
            Command::WeylCheck(_) => 6,
            Command::EigenBranches(_) => 7,
            Command::KamCircle(_) => 8,
            Command::HomologicalSolve(_) => 9,
            Command::FourierBounds(_) => 10,
            Command::DiophantineMeasure(_) => 11,
            Command::QuasiLattice(_) => 12,
            Command::FlowSim(_) => 13,
            Command::DensityLemma(_) => 14,
        };
        NAMES[i]
    }

    pub fn params(&self) -> Value {
        let v = match self {
            Command::BilliardFractions(a) => serde_json::to_value(a),
            Command::BilliardOrbit(a) => serde_json::to_value(a),
            Command::QuasimodeCount(a) => serde_json::to_value(a),
            Command::QuasimodeResidual(a) => serde_json::to_value(a),
            Command::QuasimodeGram(a) => serde_json::to_value(a),
            Command::GridSpectrum(a) => serde_json::to_value(a),
            Command::WeylCheck(a) => serde_json::to_value(a),
            Command::EigenBranches(a) => serde_json::to_value(a),
            Command::KamCircle(a) => serde_json::to_value(a),
            Command::HomologicalSolve(a) => serde_json::to_value(a),
            Command::FourierBounds(a) => serde_json::to_value(a),
            Command::DiophantineMeasure(a) => serde_json::to_value(a),
            Command::QuasiLattice(a) => serde_json::to_value(a),
            Command::FlowSim(a) => serde_json::to_value(a),
            Command::DensityLemma(a) => serde_json::to_value(a),
        };
        v.unwrap_or(Value::Null)
    }

    pub fn prepare(&self) -> Result<Job, String> {
        match self {
            Command::BilliardFractions(a) => a.prepare(),
            Command::BilliardOrbit(a) => a.prepare(),
            Command::QuasimodeCount(a) => a.prepare(),
            Command::QuasimodeResidual(a) => a.prepare(),
            Command::QuasimodeGram(a) => a.prepare(),
            Command::GridSpectrum(a) => a.prepare(),
            Command::WeylCheck(a) => a.prepare(),
            Command::EigenBranches(a) => a.prepare(),
            Command::KamCircle(a) => a.prepare(),
            Command::HomologicalSolve(a) => a.prepare(),
            Command::FourierBounds(a) => a.prepare(),
            Command::DiophantineMeasure(a) => a.prepare(),
            Command::QuasiLattice(a) => a.prepare(),
            Command::FlowSim(a) => a.prepare(),
            Command::DensityLemma(a) => a.prepare(),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BilliardFractions {
    #[command(flatten)]
    #[serde(flatten)]
    pub mushroom: Mushroom,
    /// Monte Carlo samples (at least 1000; `1e6` accepted).
    #[arg(long, default_value = "1e6", value_parser = parse_count)]
    pub samples: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

impl BilliardFractions {
    fn prepare(&self) -> Result<Job, String> {
        let p = self.mushroom.params()?;
        let exact = billiard::liouville_fractions(&p).map_err(err)?;
        if self.samples < 1000 {
            return Err(format!("samples must be at least 1000, got {}", self.samples));
        }
        let (n, seed) = (self.samples, self.seed);
        Ok(Box::new(move || {
            let mc = billiard::monte_carlo_fractions(&p, n, seed).map_err(err)?;
            let z = (mc.d_hat - exact.d) / mc.stderr;
            let mut table = Table::new(&["d", "d_hat", "stderr", "z_score", "samples", "redrawn", "mu_total", "mu_integrable"]);
            table.push(row![exact.d, mc.d_hat, mc.stderr, z, mc.samples, mc.redrawn, exact.mu_total, exact.mu_integrable]);
            Ok(Outcome { table, results: vec![("d", json_f64(exact.d)), ("d_hat", json_f64(mc.d_hat)), ("z_score", json_f64(z))] })
        }))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BilliardOrbit {
    #[command(flatten)]
    #[serde(flatten)]
    pub mushroom: Mushroom,
    #[arg(long, default_value_t = 1.2, allow_negative_numbers = true)]
    pub x: f64,
    #[arg(long, default_value_t = 0.9, allow_negative_numbers = true)]
    pub y: f64,
    /// Initial direction; normalised to unit speed.
    #[arg(long, default_value_t = -0.6, allow_negative_numbers = true)]
    pub vx: f64,
    #[arg(long, default_value_t = -0.8, allow_negative_numbers = true)]
    pub vy: f64,
    #[arg(long, default_value_t = 100)]
    pub bounces: usize,
}

impl BilliardOrbit {
    fn prepare(&self) -> Result<Job, String> {
        let p = self.mushroom.params()?;
        let norm = self.vx.hypot(self.vy);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err("direction must be a nonzero finite vector".into());
        }
        let x = [self.x, self.y];
        if !p.contains_strictly(x) {
            return Err(format!("start point {x:?} is not inside the mushroom"));
        }
        let start = PhasePoint::new(x, [self.vx / norm, self.vy / norm]).map_err(err)?;
        let bounces = self.bounces;
        Ok(Box::new(move || {
            let mut table = Table::new(&["bounce", "time", "x", "y", "vx", "vy", "wall"]);
            table.push(row![0usize, 0.0, start.x[0], start.x[1], start.v[0], start.v[1], ""]);
            let (mut cur, mut time) = (start, 0.0);
            for b in 1..=bounces {
                let c = billiard::next_collision(&cur, &p).map_err(err)?;
                time += c.flight_time;
                cur = c.point;
                table.push(row![b, time, cur.x[0], cur.x[1], cur.v[0], cur.v[1], c.wall.name()]);
            }
            let label = format!("{:?}", billiard::classify_initial_condition(&start, &p)).to_lowercase();
            Ok(Outcome {
                table,
                results: vec![("label", Value::from(label)), ("angular_momentum", json_f64(start.angular_momentum()))],
            })
        }))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QuasimodeCount {
    #[command(flatten)]
    #[serde(flatten)]
    pub mushroom: Mushroom,
    #[arg(long, default_value_t = 200.0)]
    pub lambda: f64,
    /// Cutoff margin eps in (0, 1).
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
}

impl QuasimodeCount {
    fn prepare(&self) -> Result<Job, String> {
        let p = self.mushroom.params()?;
        quasimode::Cutoff::new(p.r1, self.eps).map_err(err)?;
        if !(self.lambda > 0.0 && self.lambda <= 2000.0) {
            return Err(format!("lambda must lie in (0, 2000], got {}", self.lambda));
        }
        let (lambda, eps) = (self.lambda, self.eps);
        Ok(Box::new(move || {
            let r = quasimode::count_quasi_eigenvalues(&p, lambda, eps).map_err(err)?;
            let rel = (r.coefficient - r.closed_form) / r.closed_form;
            let mut table = Table::new(&["lambda", "eps", "count", "count_over_lambda_sq", "closed_form", "relative_error"]);
            table.push(row![r.lambda, r.eps, r.count, r.coefficient, r.closed_form, rel]);
            Ok(Outcome { table, results: vec![("relative_error", json_f64(rel))] })
        }))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QuasimodeResidual {
    #[command(flatten)]
    #[serde(flatten)]
    pub mushroom: Mushroom,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    /// Radial index k.
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    /// Angular orders n, comma-separated.
    #[arg(long, default_value = "50,100,200")]
    pub ns: Floats,
}

impl QuasimodeResidual {
    fn prepare(&self) -> Result<Job, String> {
        let p = self.mushroom.params()?;
        let specs = self
            .ns
            .counts("ns")?
            .into_iter()
            .map(|n| QuasimodeSpec::new(&p, self.eps, n as u32, self.k).map_err(err))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Box::new(move || {
            let mut table = Table::new(&["n", "k", "alpha", "quasi_eigenvalue", "residual_abs", "residual_rel", "ratio_to_previous"]);
            let mut prev: Option<f64> = None;
            let mut last = f64::NAN;
            for s in &specs {
                let r = quasimode::quasimode_residual(s).map_err(err)?;
                table.push(row![s.n(), s.zero.k, s.alpha(), s.quasi_eigenvalue(), r.absolute, r.relative, prev.map(|q| r.relative / q)]);
                prev = Some(r.relative);
                last = r.relative;
            }
            Ok(Outcome { table, results: vec![("last_relative_residual", json_f64(last))] })
        }))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QuasimodeGram {
    #[command(flatten)]
    #[serde(flatten)]
    pub mushroom: Mushroom,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, default_value_t = 100)]
    pub n_min: u32,
    #[arg(long, default_value_t = 109)]
    pub n_max: u32,
    /// Radial indices 1..=k_max for every n.
    #[arg(long, default_value_t = 2)]
    pub k_max: u32,
}

impl QuasimodeGram {
    fn prepare(&self) -> Result<Job, String> {
        let p = self.mushroom.params()?;
        if self.n_min > self.n_max || self.k_max == 0 {
            return Err("need n_min <= n_max and k_max >= 1".into());
        }
        let size = (self.n_max - self.n_min + 1) as usize * self.k_max as usize;
        if size > 200 {
            return Err(format!("{size} quasimodes requested, at most 200 allowed"));
        }
        let specs = (self.n_min..=self.n_max)
            .flat_map(|n| (1..=self.k_max).map(move |k| (n, k)))
            .map(|(n, k)| QuasimodeSpec::new(&p, self.eps, n, k).map_err(err))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Box::new(move || {
            let mut table = Table::new(&["i", "j", "n_i", "k_i", "n_j", "k_j", "gram"]);
            let mut worst = 0.0f64;
            for (i, a) in specs.iter().enumerate() {
                for (j, b) in specs.iter().enumerate().skip(i) {
                    let g = quasimode::quasimode_overlap(a, b).map_err(err)?;
                    worst = worst.max((g - if i == j { 1.0 } else { 0.0 }).abs());
                    table.push(row![i, j, a.n(), a.zero.k, b.n(), b.zero.k, g]);
                }
            }
            Ok(Outcome { table, results: vec![("max_deviation_from_identity", json_f64(worst))] })
        }))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridSpectrum {
    #[command(flatten)]
    #[serde(flatten)]
    pub mushroom: Mushroom,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: Solver,
    /// Number of lowest eigenvalues.
    #[arg(long, default_value_t = 20)]
    pub count: usize,
}

impl GridSpectrum {
    fn prepare(&self) -> Result<Job, String> {
        let p = self.mushroom.params()?;
        let opts = self.solver.options()?;
        let dom = grid::rasterize(&p, self.solver.h).map_err(err)?;
        let max = (dom.dim() / 10).min(400);
        if self.count == 0 || self.count > max {
            return Err(format!("count must lie in 1..={max} for this grid"));
        }
        let count = self.count;
        Ok(Box::new(move || {
            let s = grid::lowest_eigenvalues_with(&dom, count, &opts).map_err(err)?;
            let mut table = Table::new(&["index", "eigenvalue", "residual_bound"]);
            for (i, (e, r)) in s.eigenvalues.iter().zip(&s.residual_bounds).enumerate() {
                table.push(row![i + 1, *e, *r]);
            }
            Ok(Outcome {
                table,
                results: vec![
                    ("method", Value::from(s.method)),
                    ("unknowns", Value::from(dom.dim())),
                    ("raster_area", json_f64(dom.raster_area())),
                    ("factorizations", Value::from(s.factorizations)),
                ],
            })
        }))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WeylCheck {
    #[command(flatten)]
    #[serde(flatten)]
    pub mushroom: Mushroom,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: Solver,
    /// Frequencies lambda; eigenvalues are counted up to lambda squared.
    #[arg(long, default_value = "5,7.5,10")]
    pub lambdas: Floats,
}

impl WeylCheck {
    fn prepare(&self) -> Result<Job, String> {
        let p = self.mushroom.params()?;
        let opts = self.solver.options()?;
        let h = self.solver.h;
        let dom = grid::rasterize(&p, h).map_err(err)?;
        let lambdas = self.lambdas.0.clone();
        if lambdas.iter().any(|&l| !(l > 0.0) || l * h >= 0.3) {
            return Err(format!("every lambda must be positive with lambda*h < 0.3, got {lambdas:?}"));
        }
        let top = lambdas.iter().cloned().fold(0.0, f64::max);
        Ok(Box::new(move || {
            let slice = grid::eigenvalues_below(&dom, top * top * (1.0 + 1e-9), &opts).map_err(err)?;
            let (area, perimeter) = (billiard::area(&p), p.perimeter());
            let mut table = Table::new(&["lambda", "n_count", "weyl_main", "relative_gap", "boundary_term"]);
            let mut gaps = Vec::new();
            for &l in &lambdas {
                let w = grid::weyl_deficit(&slice, &p, h, l).map_err(err)?;
                table.push(row![l, w.n_count, w.weyl_main, w.relative_gap, -perimeter / (l * area)]);
                gaps.push(w.relative_gap);
            }
            Ok(Outcome {
                table,
                results: vec![
                    ("max_abs_gap", json_f64(gaps.iter().map(|g| g.abs()).fold(0.0, f64::max))),
                    ("eigenvalues_computed", Value::from(slice.n_computed)),
                ],
            })
        }))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EigenBranches {
    #[arg(long, default_value_t = 1.0)]
    pub r1: f64,
    #[arg(long, default_value_t = 2.0)]
    pub r2: f64,
    /// Stalk lengths, comma-separated and increasing.
    #[arg(long, default_value = "0.5,0.75,1.0")]
    pub ts: Floats,
    #[arg(long, default_value_t = 0.05)]
    pub h: f64,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    /// Allowed increase before a branch counts as non-monotone.
    #[arg(long, default_value_t = 1e-6)]
    pub mono_tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl EigenBranches {
    fn prepare(&self) -> Result<Job, String> {
        let list = self
            .ts
            .0
            .iter()
            .map(|&t| MushroomParams::new(self.r1, self.r2, t).map_err(err))
            .collect::<Result<Vec<_>, _>>()?;
        if list.len() < 2 || list.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err("need at least two increasing stalk lengths".into());
        }
        for p in &list {
            grid::rasterize(p, self.h).map_err(err)?;
        }
        let (h, count, tol) = (self.h, self.count, self.mono_tol);
        let opts = SolverOptions { seed: self.seed, ..SolverOptions::default() };
        Ok(Box::new(move || {
            let b = grid::eigenvalue_branches(&list, h, count, &opts, tol).map_err(err)?;
            let mut table = Table::new(&["branch", "t", "area", "eigenvalue", "monotone"]);
            for (j, mono) in b.monotone.iter().enumerate() {
                for (i, &t) in b.ts.iter().enumerate() {
                    table.push(row![j + 1, t, b.areas[i], b.eigenvalues[i][j], *mono]);
                }
            }
            let ratios = b.slope_ratio.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
            Ok(Outcome {
                table,
                results: vec![
                    ("all_monotone", Value::from(b.monotone.iter().all(|&m| m))),
                    ("max_increase", json_f64(b.max_increase)),
                    ("slope_ratios", Value::from(ratios)),
                ],
            })
        }))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KamCircle {
    /// Target rotation number; defaults to the golden mean.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Perturbation size in x + theta + eps sin(2 pi m x).
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[arg(long, default_value_t = 1)]
    pub mode: usize,
    /// Analyticity strip width.
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 6)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub target: f64,
}

impl KamCircle {
    fn prepare(&self) -> Result<Job, String> {
        let theta = self.theta.unwrap_or((5f64.sqrt() - 1.0) / 2.0);
        let f = CircleMap::sine_perturbation(theta, self.eps, self.mode.max(1), self.sigma).map_err(err)?;
        if self.max_iter == 0 || self.max_iter > 50 {
            return Err("max_iter must lie in 1..=50".into());
        }
        let (max_iter, target) = (self.max_iter, self.target);
        Ok(Box::new(move || {
            let r = kam_iterate(&f, theta, max_iter, target).map_err(err)?;
            let mut table = Table::new(&["iteration", "eps", "sigma", "delta", "defect", "grid_size"]);
            for rec in &r.trace.records {
                table.push(row![rec.iteration, rec.eps, rec.sigma, rec.delta, rec.defect, rec.grid_size]);
            }
            let rho = rotation_number(&f.shifted(r.lambda), 100_000, true);
            Ok(Outcome {
                table,
                results: vec![
                    ("theta", json_f64(theta)),
                    ("lambda", json_f64(r.lambda)),
                    ("converged", Value::from(r.converged)),
                    ("iterations", Value::from(r.iterations)),
                    ("defect", json_f64(r.defect)),
                    ("contraction_exponent", r.contraction_exponent().map_or(Value::Null, json_f64)),
                    ("rotation_number_error", json_f64((rho - theta).abs())),
                ],
            })
        }))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HomologicalSolve {
    /// Modes |k|_inf <= k_max in each direction.
    #[arg(long, default_value_t = 8)]
    pub k_max: usize,
    #[arg(long, default_value_t = 1.5)]
    pub tau: f64,
    /// kappa as a fraction of the Diophantine margin of (1, golden mean) on the truncation.
    #[arg(long, default_value_t = 0.5)]
    pub kappa_frac: f64,
    #[arg(long, default_value_t = 22)]
    pub seed: u64,
}

impl HomologicalSolve {
    fn prepare(&self) -> Result<Job, String> {
        if self.k_max == 0 || self.k_max > 32 {
            return Err("k_max must lie in 1..=32".into());
        }
        if !(self.kappa_frac > 0.0) {
            return Err("kappa_frac must be positive".into());
        }
        let w = vec![1.0, (5f64.sqrt() - 1.0) / 2.0];
        let probe = FrequencyVector::new(w.clone(), 1.0, self.tau).map_err(err)?;
        let kappa = self.kappa_frac * probe.margin(self.k_max);
        let omega = FrequencyVector::new(w, kappa, self.tau).map_err(err)?;
        let (k_max, seed) = (self.k_max, self.seed);
        Ok(Box::new(move || {
            let mut rng = stream(seed, 0);
            let mut f = TorusFourier::zeros(2, k_max);
            let modes: Vec<Vec<i64>> = f.iter().map(|(k, _)| k).collect();
            for k in &modes {
                if k.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0) {
                    f.set_real_mode(k, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
                }
            }
            let u = torus::solve_homological(&f, &omega).map_err(err)?;
            let res = torus::homological_residuals(&f, &u, &omega).map_err(err)?;
            let mut table = Table::new(&["k1", "k2", "f_re", "f_im", "u_re", "u_im", "denominator_abs"]);
            for k in &modes {
                let (fk, uk) = (f.coeff(k), u.coeff(k));
                let den = if k.iter().all(|&v| v == 0) { 0.0 } else { torus::regularized_denominator(&omega, k).norm() };
                table.push(row![k[0], k[1], fk.re, fk.im, uk.re, uk.im, den]);
            }
            Ok(Outcome {
                table,
                results: vec![
                    ("kappa", json_f64(kappa)),
                    ("margin", json_f64(omega.margin(k_max))),
                    ("residual_exact", json_f64(res.exact)),
                    ("residual_regularized", json_f64(res.regularized)),
                    ("active_modes", Value::from(res.active_modes)),
                ],
            })
        }))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FourierBounds {
    /// Truncation orders K.
    #[arg(long, default_value = "10,20,40")]
    pub ks: Floats,
    /// Torus dimension of the geometric test function.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Stored modes per direction.
    #[arg(long, default_value_t = 128)]
    pub k_store: usize,
    /// delta as a fraction of the exact strip width sigma.
    #[arg(long, default_value_t = 0.5)]
    pub delta_frac: f64,
    /// Inflation factor for the sigma that must fail the decay check.
    #[arg(long, default_value_t = 1.2)]
    pub inflate: f64,
}

impl FourierBounds {
    fn prepare(&self) -> Result<Job, String> {
        let ks = self.ks.counts("ks")?;
        if self.dim == 0 || self.dim > 3 || ks.iter().any(|&k| k >= self.k_store) {
            return Err("need 1 <= dim <= 3 and every K below k_store".into());
        }
        if (2 * self.k_store + 1).pow(self.dim as u32) > 2_000_000 {
            return Err("too many stored modes".into());
        }
        if !(self.delta_frac > 0.0 && self.delta_frac < 1.0) || !(self.inflate > 1.0) {
            return Err("need 0 < delta_frac < 1 and inflate > 1".into());
        }
        let (dim, k_store, delta_frac, inflate) = (self.dim, self.k_store, self.delta_frac, self.inflate);
        Ok(Box::new(move || {
            // coefficients ρ^{|k|₁} with ρ = 2 − √3, analytic in the strip of width σ = ln(1/ρ)/2π
            let rho = 2.0 - 3f64.sqrt();
            let sigma = rho.recip().ln() / TAU;
            let f = TorusFourier::from_fn(dim, k_store, |k| Complex64::new(rho.powi(k.iter().map(|v| v.abs() as i32).sum()), 0.0))
                .map_err(err)?
                .with_decay(sigma)
                .map_err(err)?;
            let mut table = Table::new(&["k", "tail_norm", "tail_mass", "bound", "holds"]);
            let mut all = true;
            for &k in &ks {
                let rec = torus::truncate_with_bound(&f, k, delta_frac * sigma).map_err(err)?;
                let holds = rec.tail_norm <= rec.bound;
                all &= holds;
                table.push(row![k, rec.tail_norm, rec.tail_mass, rec.bound, holds]);
            }
            let g = TorusFourier::from_fn(1, 64, |m| Complex64::new(rho.powi(m[0].abs() as i32) / 3f64.sqrt(), 0.0)).map_err(err)?;
            let exact = torus::fourier_decay_check(&g, sigma - 1e-6).map_err(err)?.passes;
            let inflated = torus::fourier_decay_check(&g, inflate * sigma).map_err(err)?.passes;
            Ok(Outcome {
                table,
                results: vec![
                    ("sigma", json_f64(sigma)),
                    ("all_bounds_hold", Value::from(all)),
                    ("decay_check_exact_sigma", Value::from(exact)),
                    ("decay_check_inflated_sigma", Value::from(inflated)),
                ],
            })
        }))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiophantineMeasure {
    #[arg(long, default_value = "0.04,0.02,0.01")]
    pub kappas: Floats,
    #[arg(long, default_value_t = 1.5)]
    pub tau: f64,
    /// Dimension of omega.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Largest |k|_1 tested.
    #[arg(long, default_value_t = 20)]
    pub k_max: usize,
    #[arg(long, default_value = "2e5", value_parser = parse_count)]
    pub samples: usize,
    #[arg(long, default_value_t = 31)]
    pub seed: u64,
}

impl DiophantineMeasure {
    fn prepare(&self) -> Result<Job, String> {
        if self.kappas.0.iter().any(|&k| !(k > 0.0)) {
            return Err("kappas must be positive".into());
        }
        if self.n == 0 || !(self.tau > self.n as f64 - 1.0) || self.samples == 0 {
            return Err("need n >= 1, tau > n - 1 and samples > 0".into());
        }
        let a = self.clone();
        Ok(Box::new(move || {
            let m = torus::diophantine_measure(&a.kappas.0, a.tau, a.n, a.k_max, a.samples, a.seed).map_err(err)?;
            let mut table = Table::new(&["kappa", "bad_fraction", "bad_over_kappa"]);
            for (k, b) in m.kappas.iter().zip(&m.bad_fractions) {
                table.push(row![*k, *b, b / k]);
            }
            Ok(Outcome { table, results: vec![("fit_slope", json_f64(m.fit_slope))] })
        }))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QuasiLattice {
    /// Dimension of the action ball.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.3)]
    pub radius: f64,
    /// Ball centre coordinate (the same in every direction).
    #[arg(long, default_value_t = 0.5)]
    pub center: f64,
    /// Window constant L.
    #[arg(long, default_value_t = 1.0)]
    pub l: f64,
    /// Semiclassical parameters h.
    #[arg(long, default_value = "1e-2,5e-3,2.5e-3,1e-3")]
    pub hs: Floats,
}

impl QuasiLattice {
    fn prepare(&self) -> Result<Job, String> {
        if self.dim == 0 || self.dim > 3 || !(self.radius > 0.0) || !(self.l > 0.0) {
            return Err("need 1 <= dim <= 3, radius > 0 and l > 0".into());
        }
        let hs = self.hs.0.clone();
        let cells = |h: f64| ((2.0 * self.radius + 2.0 * self.l * h) / h + 3.0).powi(self.dim as i32);
        if hs.iter().any(|&h| !(h > 0.0) || cells(h) > 5e7) {
            return Err("every h must be positive and small enough lattices only (at most 5e7 cells)".into());
        }
        let set = ActionSet::Ball { center: vec![self.center; self.dim], radius: self.radius };
        let (l, dim) = (self.l, self.dim);
        Ok(Box::new(move || {
            let target = TAU.powi(dim as i32) * set.volume();
            let mut table = Table::new(&["h", "count", "scaled_count", "target", "relative_error"]);
            let mut pts = Vec::new();
            for &h in &hs {
                let lat = ActionLattice { set: set.clone(), h, l, maslov: vec![0; dim] };
                let count = torus::quasi_lattice(&lat).map_err(err)?.len();
                let scaled = (TAU * h).powi(dim as i32) * count as f64;
                table.push(row![h, count, scaled, target, scaled / target - 1.0]);
                if count > 0 {
                    pts.push(((1.0 / h).ln(), (count as f64).ln()));
                }
            }
            let exponent = if pts.len() >= 2 { fit_slope(&pts) } else { f64::NAN };
            Ok(Outcome { table, results: vec![("fitted_exponent", json_f64(exponent))] })
        }))
    }
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FlowSim {
    #[arg(long, default_value_t = 1000)]
    pub n_lines: usize,
    /// Eigenlines per unit energy.
    #[arg(long, default_value_t = 100.0)]
    pub weyl_rate: f64,
    /// Quasi-lines per eigenline.
    #[arg(long, default_value_t = 0.3)]
    pub d: f64,
    /// Fraction of eigenlines outside the fast cohort.
    #[arg(long, default_value_t = 0.05)]
    pub eps_frac: f64,
    #[arg(long, default_value_t = 1.0)]
    pub q_minus: f64,
    #[arg(long, default_value_t = 1.1)]
    pub q_plus: f64,
    /// Upper bound on quasi-line slopes.
    #[arg(long, default_value_t = 0.2)]
    pub b: f64,
    #[arg(long, default_value_t = 0.0)]
    pub b_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub m_cap: f64,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Window half-width.
    #[arg(long, default_value_t = 1e-3)]
    pub width: f64,
    /// Scan points for N(t)/#quasi.
    #[arg(long, default_value_t = 201)]
    pub scan: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of consecutive seeds starting at `seed`.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
}

impl FlowSim {
    fn config(&self, seed: u64) -> FlowConfig {
        FlowConfig {
            n_lines: self.n_lines,
            weyl_rate: self.weyl_rate,
            d: self.d,
            eps_frac: self.eps_frac,
            q_minus: self.q_minus,
            q_plus: self.q_plus,
            b: self.b,
            b_min: self.b_min,
            m_cap: self.m_cap,
            t_range: (0.0, 1.0),
            steps: self.steps,
            seed,
        }
    }

    fn prepare(&self) -> Result<Job, String> {
        let c = self.config(self.seed);
        c.validate().map_err(err)?;
        if self.n_lines > 200_000 || self.steps > 10_000 || self.seeds == 0 || self.seeds > 1000 {
            return Err("need n_lines <= 200000, steps <= 10000 and 1 <= seeds <= 1000".into());
        }
        let cfg = WindowConfig::new(self.width, c.default_band()).map_err(err)?;
        let a = self.clone();
        Ok(Box::new(move || {
            let mut table = Table::new(&[
                "seed", "n_fast", "fast_mean_q", "fast_max_q", "d_target", "window_term", "mean_ratio", "t_star",
            ]);
            let mut worst_mean = 0.0f64;
            let mut all_t_star = true;
            for seed in a.seed..a.seed + a.seeds {
                let model = flow::synth_flow(&a.config(seed)).map_err(err)?;
                let r = flow::occupancy(&model, &cfg, a.scan).map_err(err)?;
                let n_fast = r.fast.iter().filter(|&&f| f).count();
                worst_mean = worst_mean.max(r.fast_mean);
                all_t_star &= r.t_star.is_some();
                table.push(row![seed, n_fast, r.fast_mean, r.fast_max, r.d_target, r.window_term, r.mean_ratio, r.t_star]);
            }
            Ok(Outcome {
                table,
                results: vec![
                    ("band_low", json_f64(cfg.band.0)),
                    ("band_high", json_f64(cfg.band.1)),
                    ("worst_fast_mean_q", json_f64(worst_mean)),
                    ("t_star_in_every_seed", Value::from(all_t_star)),
                ],
            })
        }))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DensityLemma {
    /// Density of the pseudo-random set where g = 1 (g = n^{-1/2} elsewhere).
    #[arg(long, default_value_t = 0.08)]
    pub bad_density: f64,
    /// Target density d.
    #[arg(long, default_value_t = 0.9)]
    pub d: f64,
    #[arg(long, default_value = "2500,5000,10000,20000,40000")]
    pub horizons: Floats,
    /// Number of family members S_j = {g < 1/2}, with eps_j = 0.02/j and eps'_j = 0.4/j.
    #[arg(long, default_value_t = 6)]
    pub stages: usize,
    /// Allowed shortfall of the achieved density below d.
    #[arg(long, default_value_t = 0.02)]
    pub slack: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use the upper-density construction.
    #[arg(long)]
    pub upper: bool,
}

impl DensityLemma {
    fn prepare(&self) -> Result<Job, String> {
        if !(0.0..=1.0).contains(&self.bad_density) || !(0.0..=1.0).contains(&self.d) || self.stages == 0 {
            return Err("need bad_density and d in [0, 1] and stages >= 1".into());
        }
        let horizons = self.horizons.counts("horizons")?;
        if horizons.iter().any(|&h| !(2..=10_000_000).contains(&h)) {
            return Err("horizons must lie in 2..=1e7".into());
        }
        let a = self.clone();
        Ok(Box::new(move || {
            let (p, seed) = (a.bad_density, a.seed);
            let g = move |n: usize| {
                let x = ((n as u64) ^ seed.rotate_left(32)).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
                if ((x >> 11) as f64) / ((1u64 << 53) as f64) < p {
                    1.0
                } else {
                    1.0 / (n as f64).sqrt()
                }
            };
            let mut table = Table::new(&[
                "horizon", "density_at_horizon", "min_tail_density", "g_conclusion", "density_conclusion", "thresholds",
            ]);
            let mut prev: Option<f64> = None;
            let mut worst_loss = 0.0f64;
            let mut all = true;
            for &h in &horizons {
                let family: Vec<flow::DensityFamilyMember> = (1..=a.stages)
                    .map(|j| flow::DensityFamilyMember {
                        contains: Box::new(move |n| g(n) < 0.5),
                        eps: 0.02 / j as f64,
                        eps_prime: 0.4 / j as f64,
                    })
                    .collect();
                let rep = if a.upper {
                    flow::full_upper_density_subsequence(&g, &family, a.d, h, a.slack)
                } else {
                    flow::full_density_subsequence(&g, &family, a.d, h, a.slack)
                }
                .map_err(err)?;
                if let Some(q) = prev {
                    worst_loss = worst_loss.max(q - rep.density_at_horizon);
                }
                prev = Some(rep.density_at_horizon);
                all &= rep.g_conclusion && rep.density_conclusion;
                let th = rep.thresholds.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
                table.push(row![h, rep.density_at_horizon, rep.min_tail_density, rep.g_conclusion, rep.density_conclusion, th]);
            }
            Ok(Outcome {
                table,
                results: vec![("both_conclusions_everywhere", Value::from(all)), ("worst_density_loss", json_f64(worst_loss))],
            })
        }))
    }
}
