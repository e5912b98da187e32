//! Mushroom billiards: geometry, the broken billiard flow and Liouville fractions.
//!
//! The mushroom M_t is the upper half-disk of radius `r2` joined along the opening
//! `|x| < r1, y = 0` to the stalk `[-r1, r1] × [-t, 0]`.

use rand::Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Relative tolerance for tangencies, corner hits and the chord threshold.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BilliardError {
    #[error("invalid mushroom parameters r1={r1}, r2={r2}, t={t}: need 0 < r1 < r2 and 0 < t <= 2")]
    InvalidParams { r1: f64, r2: f64, t: f64 },
    #[error("degenerate configuration: {0}")]
    Degenerate(&'static str),
    #[error("phase point is not inside the mushroom")]
    Outside,
    #[error("direction is not a unit vector (|v| = {0})")]
    NotUnit(f64),
    #[error("need at least 1000 samples, got {0}")]
    TooFewSamples(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MushroomParams {
    pub r1: f64,
    pub r2: f64,
    pub t: f64,
}

impl MushroomParams {
    pub fn new(r1: f64, r2: f64, t: f64) -> Result<Self, BilliardError> {
        let ok = r1.is_finite() && r2.is_finite() && t.is_finite() && 0.0 < r1 && r1 < r2 && 0.0 < t && t <= 2.0;
        if ok {
            Ok(Self { r1, r2, t })
        } else {
            Err(BilliardError::InvalidParams { r1, r2, t })
        }
    }

    /// Radius ratio C = r2/r1.
    pub fn ratio(&self) -> f64 {
        self.r2 / self.r1
    }

    /// Closed-set membership test with slack `tol`.
    pub fn contains(&self, x: [f64; 2], tol: f64) -> bool {
        let [px, py] = x;
        let in_hat = py >= -tol && px * px + py * py <= (self.r2 + tol).powi(2);
        let in_stalk = px.abs() <= self.r1 + tol && py <= tol && py >= -self.t - tol;
        in_hat || in_stalk
    }

    /// Open-set membership test.
    pub fn contains_strictly(&self, x: [f64; 2]) -> bool {
        let [px, py] = x;
        let in_hat = py > 0.0 && px * px + py * py < self.r2 * self.r2;
        let in_stalk = px.abs() < self.r1 && py <= 0.0 && py > -self.t;
        in_hat || in_stalk
    }

    /// Perimeter of the boundary.
    pub fn perimeter(&self) -> f64 {
        PI * self.r2 + 2.0 * (self.r2 - self.r1) + 2.0 * self.t + 2.0 * self.r1
    }
}

/// Area A(t) = π r2²/2 + 2 r1 t.
pub fn area(params: &MushroomParams) -> f64 {
    0.5 * PI * params.r2 * params.r2 + 2.0 * params.r1 * params.t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiouvilleFractions {
    pub mu_total: f64,
    pub mu_integrable: f64,
    pub d: f64,
}

/// Liouville measure of the phase space (normalised as 2π·A(t)), of the
/// integrable region, and their ratio.
pub fn liouville_fractions(params: &MushroomParams) -> Result<LiouvilleFractions, BilliardError> {
    let c = params.ratio();
    if c <= 1.0 {
        return Err(BilliardError::InvalidParams {
            r1: params.r1,
            r2: params.r2,
            t: params.t,
        });
    }
    let (r1, r2) = (params.r1, params.r2);
    let mu_total = 2.0 * PI * area(params);
    let mu_integrable = PI * PI * r2 * r2 - 2.0 * PI * r1 * r1 * (c * c - 1.0).sqrt() - 2.0 * PI * r2 * r2 * (1.0 / c).asin();
    Ok(LiouvilleFractions {
        mu_total,
        mu_integrable,
        d: mu_integrable / mu_total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: [f64; 2],
    pub v: [f64; 2],
}

impl PhasePoint {
    pub fn new(x: [f64; 2], v: [f64; 2]) -> Result<Self, BilliardError> {
        let norm = v[0].hypot(v[1]);
        if (norm - 1.0).abs() > 1e-12 {
            return Err(BilliardError::NotUnit(norm));
        }
        Ok(Self { x, v })
    }

    /// Unit direction at angle `phi`.
    pub fn from_angle(x: [f64; 2], phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Self { x, v: [c, s] }
    }

    /// Angular momentum x₁v₂ − x₂v₁ about the disk centre.
    pub fn angular_momentum(&self) -> f64 {
        self.x[0] * self.v[1] - self.x[1] * self.v[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionLabel {
    Integrable,
    Ergodic,
    Degenerate,
}

/// Specular reflection against the outward unit `normal`.
pub fn reflect(p: &PhasePoint, normal: [f64; 2]) -> Result<PhasePoint, BilliardError> {
    let dot = p.v[0] * normal[0] + p.v[1] * normal[1];
    if dot <= DEGENERACY_TOL {
        return Err(BilliardError::Degenerate("tangential or outgoing reflection"));
    }
    let v = [p.v[0] - 2.0 * dot * normal[0], p.v[1] - 2.0 * dot * normal[1]];
    let norm = v[0].hypot(v[1]);
    Ok(PhasePoint {
        x: p.x,
        v: [v[0] / norm, v[1] / norm],
    })
}

/// Boundary pieces of the mushroom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Wall {
    Arc,
    HatLeft,
    HatRight,
    StalkLeft,
    StalkRight,
    Floor,
}

impl Wall {
    pub fn name(&self) -> &'static str {
        match self {
            Wall::Arc => "arc",
            Wall::HatLeft => "hat-left",
            Wall::HatRight => "hat-right",
            Wall::StalkLeft => "stalk-left",
            Wall::StalkRight => "stalk-right",
            Wall::Floor => "floor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collision {
    /// Collision point with the post-reflection direction.
    pub point: PhasePoint,
    pub flight_time: f64,
    pub wall: Wall,
}

/// Flight to the next boundary collision followed by specular reflection.
pub fn next_collision(p: &PhasePoint, params: &MushroomParams) -> Result<Collision, BilliardError> {
    let MushroomParams { r1, r2, t } = *params;
    let [x, y] = p.x;
    let [vx, vy] = p.v;
    let s_min = 1e-10 * r2;
    let mut best: Option<(f64, Wall)> = None;
    let mut consider = |s: f64, wall: Wall| {
        if s > s_min && best.is_none_or(|(b, _)| s < b) {
            best = Some((s, wall));
        }
    };

    // semicircle: exit root of |x + s v|² = r2²
    let b = x * vx + y * vy;
    let c = x * x + y * y - r2 * r2;
    let disc = b * b - c;
    if disc >= 0.0 {
        let s = -b + disc.sqrt();
        if y + s * vy >= -1e-12 * r2 {
            consider(s, Wall::Arc);
        }
    }
    // y = 0 hat bottoms, approached from above
    if vy < 0.0 && y > -1e-12 * r2 {
        let s = -y / vy;
        let xh = x + s * vx;
        if xh.abs() >= r1 && xh.abs() <= r2 {
            consider(s, if xh < 0.0 { Wall::HatLeft } else { Wall::HatRight });
        }
    }
    // stalk walls
    if vx != 0.0 {
        for (xw, wall) in [(-r1, Wall::StalkLeft), (r1, Wall::StalkRight)] {
            let s = (xw - x) / vx;
            let yh = y + s * vy;
            let toward = (xw - x) * vx > 0.0;
            if toward && (-t..=0.0).contains(&yh) {
                consider(s, wall);
            }
        }
    }
    // stalk floor
    if vy < 0.0 {
        let s = (-t - y) / vy;
        let xh = x + s * vx;
        if xh.abs() <= r1 {
            consider(s, Wall::Floor);
        }
    }

    let (s, wall) = best.ok_or(BilliardError::Outside)?;
    let mut hit = [x + s * vx, y + s * vy];
    let normal = match wall {
        Wall::Arc => {
            let r = hit[0].hypot(hit[1]);
            hit = [hit[0] * r2 / r, hit[1] * r2 / r];
            [hit[0] / r2, hit[1] / r2]
        }
        Wall::HatLeft | Wall::HatRight => {
            hit[1] = 0.0;
            [0.0, -1.0]
        }
        Wall::StalkLeft => {
            hit[0] = -r1;
            [-1.0, 0.0]
        }
        Wall::StalkRight => {
            hit[0] = r1;
            [1.0, 0.0]
        }
        Wall::Floor => {
            hit[1] = -t;
            [0.0, -1.0]
        }
    };
    let corners = [[-r2, 0.0], [r2, 0.0], [-r1, 0.0], [r1, 0.0], [-r1, -t], [r1, -t]];
    let tol = DEGENERACY_TOL * r2;
    if corners.iter().any(|c| (hit[0] - c[0]).hypot(hit[1] - c[1]) <= tol) {
        return Err(BilliardError::Degenerate("corner hit"));
    }
    let point = reflect(&PhasePoint { x: hit, v: p.v }, normal)?;
    Ok(Collision {
        point,
        flight_time: s,
        wall,
    })
}

/// Label of an initial condition: inside the open semi-annulus the chord
/// invariant decides; elsewhere the label is `Ergodic`.
pub fn classify_initial_condition(p: &PhasePoint, params: &MushroomParams) -> RegionLabel {
    let [x, y] = p.x;
    let r = x.hypot(y);
    if !(y > 0.0 && r > params.r1 && r < params.r2) {
        return RegionLabel::Ergodic;
    }
    let chord = p.angular_momentum().abs();
    if (chord - params.r1).abs() <= DEGENERACY_TOL * params.r1 {
        RegionLabel::Degenerate
    } else if chord >= params.r1 {
        RegionLabel::Integrable
    } else {
        RegionLabel::Ergodic
    }
}

/// Label by direct simulation: `Ergodic` as soon as the orbit enters the stalk
/// within `max_bounces` collisions, `Integrable` otherwise.
pub fn classify_by_simulation(p: &PhasePoint, params: &MushroomParams, max_bounces: usize) -> RegionLabel {
    if p.x[1] < 0.0 {
        return RegionLabel::Ergodic;
    }
    let mut cur = *p;
    for _ in 0..max_bounces {
        match next_collision(&cur, params) {
            Ok(c) => {
                if matches!(c.wall, Wall::StalkLeft | Wall::StalkRight | Wall::Floor) {
                    return RegionLabel::Ergodic;
                }
                cur = c.point;
            }
            Err(_) => return RegionLabel::Degenerate,
        }
    }
    RegionLabel::Integrable
}

/// Liouville-uniform sample: position uniform in M_t, direction uniform on the circle.
pub fn sample_phase_point<R: Rng + ?Sized>(params: &MushroomParams, rng: &mut R) -> PhasePoint {
    loop {
        let x = rng.random_range(-params.r2..params.r2);
        let y = rng.random_range(-params.t..params.r2);
        if params.contains_strictly([x, y]) {
            let phi = rng.random_range(0.0..2.0 * PI);
            return PhasePoint::from_angle([x, y], phi);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloFractions {
    pub d_hat: f64,
    pub stderr: f64,
    pub samples: usize,
    pub redrawn: usize,
}

const SHARD: usize = 1 << 16;

/// Monte Carlo estimate of the integrable fraction d.
pub fn monte_carlo_fractions(
    params: &MushroomParams,
    n_samples: usize,
    seed: u64,
) -> Result<MonteCarloFractions, BilliardError> {
    if n_samples < 1000 {
        return Err(BilliardError::TooFewSamples(n_samples));
    }
    let shards = n_samples.div_ceil(SHARD);
    let (hits, redrawn) = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = crate::rng::stream(seed, shard as u64);
            let count = SHARD.min(n_samples - shard * SHARD);
            let mut hits = 0usize;
            let mut redrawn = 0usize;
            for _ in 0..count {
                loop {
                    let p = sample_phase_point(params, &mut rng);
                    match classify_initial_condition(&p, params) {
                        RegionLabel::Integrable => hits += 1,
                        RegionLabel::Ergodic => {}
                        RegionLabel::Degenerate => {
                            redrawn += 1;
                            continue;
                        }
                    }
                    break;
                }
            }
            (hits, redrawn)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let d_hat = hits as f64 / n_samples as f64;
    Ok(MonteCarloFractions {
        d_hat,
        stderr: (d_hat * (1.0 - d_hat) / n_samples as f64).sqrt(),
        samples: n_samples,
        redrawn,
    })
}
