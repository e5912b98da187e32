//! Finite-dimensional spectral matching: c-clusters, near-identity inverse
//! square roots and the approximation of eigenvectors by quasimodes.
//!
//! All matrix norms are Hilbert–Schmidt (Frobenius).

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("non-finite input")]
    NonFinite,
    #[error("cluster half-width must be positive, got {0}")]
    InvalidWidth(f64),
    #[error("||M - I||_HS = {0} is not below 1/2")]
    NotNearIdentity(f64),
    #[error("inverse square root failed verification: ||A M A^T - I|| = {0:e}")]
    VerificationFailed(f64),
    #[error("basis is rank deficient (smallest pivot ratio {0:e})")]
    RankDeficient(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("eigenvalues must be non-decreasing")]
    NotSorted,
    #[error("eigenvectors are not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("quasimode {index} has norm {norm}")]
    NotNormalised { index: usize, norm: f64 },
}

/// Connected components of ∪[μ_i − c, μ_i + c].
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    /// Disjoint closed windows in increasing order.
    pub windows: Vec<(f64, f64)>,
    /// Cluster index of each input value, in input order.
    pub membership: Vec<usize>,
}

impl ClusterSet {
    /// Index of the window containing `e`, if any.
    pub fn window_of(&self, e: f64) -> Option<usize> {
        let idx = self.windows.partition_point(|w| w.1 < e);
        (idx < self.windows.len() && self.windows[idx].0 <= e).then_some(idx)
    }

    pub fn contains(&self, e: f64) -> bool {
        self.window_of(e).is_some()
    }

    pub fn total_length(&self) -> f64 {
        self.windows.iter().map(|w| w.1 - w.0).sum()
    }
}

/// Merge windows of half-width `c` around `values`. Windows that merely touch
/// stay separate: two values are merged when their gap is below 2c by more
/// than a relative 1e-12.
pub fn c_clusters(values: &[f64], c: f64) -> Result<ClusterSet, SpectralError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(SpectralError::InvalidWidth(c));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::NonFinite);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut windows: Vec<(f64, f64)> = Vec::new();
    let mut membership = vec![0usize; values.len()];
    let mut last: Option<f64> = None;
    for &i in &order {
        let v = values[i];
        let merge = last.is_some_and(|p| v - p < 2.0 * c * (1.0 - 1e-12));
        if merge {
            windows.last_mut().expect("window exists").1 = v + c;
        } else {
            windows.push((v - c, v + c));
        }
        membership[i] = windows.len() - 1;
        last = Some(v);
    }
    Ok(ClusterSet { windows, membership })
}

/// M^{-1/2} for symmetric M with ||M − I||_HS < 1/2 via the binomial series
/// Σ_k (−1)^k C(2k,k) 4^{−k} (M − I)^k, truncated once a term's norm drops below `tol`.
pub fn inv_sqrt_near_identity(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>, SpectralError> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(SpectralError::Dimension("matrix must be square".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::NonFinite);
    }
    let id = DMatrix::<f64>::identity(n, n);
    let e = m - &id;
    let hs = e.norm();
    if hs >= 0.5 {
        return Err(SpectralError::NotNearIdentity(hs));
    }
    let mut sum = id.clone();
    let mut power = id.clone();
    let mut coeff = 1.0f64;
    for k in 1..10_000 {
        power = &power * &e;
        coeff *= -(2.0 * k as f64 - 1.0) / (2.0 * k as f64);
        let term_norm = coeff.abs() * power.norm();
        sum += coeff * &power;
        if term_norm < tol {
            break;
        }
    }
    let a = 0.5 * (&sum + sum.transpose());
    let check = (&a * m * a.transpose() - &id).norm();
    if check >= 10.0 * tol.max(f64::EPSILON * n as f64) {
        return Err(SpectralError::VerificationFailed(check));
    }
    Ok(a)
}

/// ||u − π_V u|| for V spanned by the columns of `basis` (Householder QR).
pub fn projection_defect(u: &DVector<f64>, basis: &DMatrix<f64>) -> Result<f64, SpectralError> {
    if basis.nrows() != u.len() {
        return Err(SpectralError::Dimension("basis rows must match vector length".into()));
    }
    if basis.ncols() == 0 {
        return Ok(u.norm());
    }
    let q = orthonormal_basis(basis)?;
    let coeffs = q.tr_mul(u);
    Ok((u - &q * coeffs).norm())
}

fn orthonormal_basis(basis: &DMatrix<f64>) -> Result<DMatrix<f64>, SpectralError> {
    let qr = basis.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if basis.ncols() > basis.nrows() || max == 0.0 || min / max < 1e-12 {
        return Err(SpectralError::RankDeficient(if max > 0.0 { min / max } else { 0.0 }));
    }
    Ok(qr.q())
}

/// A symmetric operator given by its sorted spectrum and orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSpectralSystem {
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns.
    pub eigenvectors: DMatrix<f64>,
}

impl FiniteSpectralSystem {
    pub fn new(eigenvalues: Vec<f64>, eigenvectors: DMatrix<f64>) -> Result<Self, SpectralError> {
        let dim = eigenvectors.nrows();
        if eigenvectors.ncols() != dim || eigenvalues.len() != dim {
            return Err(SpectralError::Dimension("need dim eigenvalues and a square eigenvector matrix".into()));
        }
        if eigenvalues.iter().any(|e| !e.is_finite()) {
            return Err(SpectralError::NonFinite);
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(SpectralError::NotSorted);
        }
        let dev = (eigenvectors.tr_mul(&eigenvectors) - DMatrix::<f64>::identity(dim, dim)).amax();
        if dev > 1e-10 {
            return Err(SpectralError::NotOrthonormal(dev));
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// P v = Σ_j E_j ⟨u_j, v⟩ u_j.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut c = self.eigenvectors.tr_mul(v);
        for (ci, e) in c.iter_mut().zip(&self.eigenvalues) {
            *ci *= e;
        }
        &self.eigenvectors * c
    }
}

/// Normalised quasimodes with residual bound eps1 and pairwise overlap bound eps2.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasimodeBatch {
    pub vectors: DMatrix<f64>,
    pub quasi_eigenvalues: Vec<f64>,
    pub eps1: f64,
    pub eps2: f64,
}

impl QuasimodeBatch {
    pub fn new(vectors: DMatrix<f64>, quasi_eigenvalues: Vec<f64>, eps1: f64, eps2: f64) -> Result<Self, SpectralError> {
        if vectors.ncols() != quasi_eigenvalues.len() {
            return Err(SpectralError::Dimension("one quasi-eigenvalue per vector".into()));
        }
        for (index, col) in vectors.column_iter().enumerate() {
            let norm = col.norm();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(SpectralError::NotNormalised { index, norm });
            }
        }
        Ok(Self {
            vectors,
            quasi_eigenvalues,
            eps1,
            eps2,
        })
    }

    /// Batch whose bounds are the measured maxima for `system`.
    pub fn measured(system: &FiniteSpectralSystem, vectors: DMatrix<f64>, quasi_eigenvalues: Vec<f64>) -> Result<Self, SpectralError> {
        let mut batch = Self::new(vectors, quasi_eigenvalues, 0.0, 0.0)?;
        batch.eps1 = batch.residuals(system).into_iter().fold(0.0, f64::max);
        batch.eps2 = batch.max_overlap();
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.quasi_eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quasi_eigenvalues.is_empty()
    }

    /// ||(P − μ_i) v_i|| for each quasimode.
    pub fn residuals(&self, system: &FiniteSpectralSystem) -> Vec<f64> {
        self.vectors
            .column_iter()
            .zip(&self.quasi_eigenvalues)
            .map(|(v, &mu)| {
                let v = v.into_owned();
                (system.apply(&v) - mu * &v).norm()
            })
            .collect()
    }

    /// max_{i≠j} |⟨v_i, v_j⟩|.
    pub fn max_overlap(&self) -> f64 {
        let g = self.vectors.tr_mul(&self.vectors);
        let mut worst = 0.0f64;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                if i != j {
                    worst = worst.max(g[(i, j)].abs());
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport {
    /// Number of quasimodes.
    pub n: usize,
    /// Number of eigenvalues inside the cluster union.
    pub m: usize,
    pub hypotheses: Vec<HypothesisCheck>,
    pub hypotheses_hold: bool,
    /// Indices j of eigenvalues in the cluster union.
    pub eigen_indices: Vec<usize>,
    /// ||u_j − π_V u_j|| by Householder QR of the quasimode basis.
    pub defects: Vec<f64>,
    /// The same defects through the G^{-1/2}-orthonormalised quasimodes
    /// (NaN when the quasimode Gram matrix is not within 1/2 of I).
    pub defects_gram_route: Vec<f64>,
    /// ||u_j − π_W u_j|| where W is spanned by the orthonormalised projections π_U v_i.
    pub projected_defects: Vec<f64>,
    /// ||u_j − Σ_i ⟨u_j, w_i⟩ Σ_k A_ik v_k||, the constructive approximant.
    pub proof_route_defects: Vec<f64>,
    pub defect_bound: f64,
    pub count_within_bound: usize,
    pub required_count: usize,
    pub conclusion_holds: bool,
    /// min_i ||π_U v_i||² against its lower bound 1 − ε₁²/c².
    pub min_projected_norm_sq: f64,
    pub projected_norm_bound: f64,
    /// max_{i≠j} |⟨π_U v_i, π_U v_j⟩| against ε₂ + ε₁²/c².
    pub max_projected_overlap: f64,
    pub projected_overlap_bound: f64,
    /// ||G − I||_HS for the Gram matrix of the projections.
    pub gram_deviation: f64,
    /// ||A − I||_HS for A = G^{-1/2}.
    pub inv_sqrt_deviation: f64,
    pub norm: &'static str,
}

fn check(name: &'static str, lhs: f64, rhs: f64) -> HypothesisCheck {
    HypothesisCheck {
        name,
        lhs,
        rhs,
        holds: lhs < rhs,
    }
}

/// Compare the eigenvectors with eigenvalues inside the c-clusters of the
/// quasi-eigenvalues against the span of the quasimodes.
pub fn match_eigenvectors(
    system: &FiniteSpectralSystem,
    batch: &QuasimodeBatch,
    c: f64,
    eps: f64,
    delta: f64,
) -> Result<MatchReport, SpectralError> {
    if batch.vectors.nrows() != system.dim() {
        return Err(SpectralError::Dimension("quasimodes and system differ in dimension".into()));
    }
    let n = batch.len();
    let clusters = c_clusters(&batch.quasi_eigenvalues, c)?;
    let eigen_indices: Vec<usize> = (0..system.dim()).filter(|&j| clusters.contains(system.eigenvalues[j])).collect();
    let m = eigen_indices.len();

    let measured_eps1 = batch.residuals(system).into_iter().fold(0.0, f64::max);
    let measured_eps2 = batch.max_overlap();
    let ratio = batch.eps1 * batch.eps1 / (c * c);
    let hypotheses = vec![
        check("m < n(1+eps)", m as f64, n as f64 * (1.0 + eps)),
        check("eps1^2/c^2 + eps2 < delta/n", ratio + batch.eps2, delta / n as f64),
        check("-min(eps, 1/2 - eps) < 0", -eps.min(0.5 - eps), 0.0),
        check("-min(delta, 1/2 - delta) < 0", -delta.min(0.5 - delta), 0.0),
        HypothesisCheck {
            name: "measured residuals <= eps1",
            lhs: measured_eps1,
            rhs: batch.eps1,
            holds: measured_eps1 <= batch.eps1,
        },
        HypothesisCheck {
            name: "measured overlaps <= eps2",
            lhs: measured_eps2,
            rhs: batch.eps2,
            holds: measured_eps2 <= batch.eps2,
        },
    ];
    let hypotheses_hold = hypotheses.iter().all(|h| h.holds);

    let us = DMatrix::from_fn(system.dim(), m, |r, col| system.eigenvectors[(r, eigen_indices[col])]);
    let vs = &batch.vectors;

    // route 1: Householder QR of the quasimode span
    let defects: Vec<f64> = if n == 0 {
        vec![1.0; m]
    } else {
        let q = orthonormal_basis(vs)?;
        us.column_iter()
            .map(|u| {
                let u = u.into_owned();
                let coeffs = q.tr_mul(&u);
                (&u - &q * coeffs).norm()
            })
            .collect()
    };

    // route 2: orthonormalise the quasimodes with H^{-1/2}, H = VᵀV
    let defects_gram_route: Vec<f64> = match inv_sqrt_near_identity(&vs.tr_mul(vs), 1e-14) {
        Ok(b) if n > 0 => {
            let q = vs * b;
            us.column_iter()
                .map(|u| {
                    let u = u.into_owned();
                    let coeffs = q.tr_mul(&u);
                    (&u - &q * coeffs).norm()
                })
                .collect()
        }
        _ => vec![f64::NAN; m],
    };

    // the constructive chain through the projections onto U
    let proj = &us * us.tr_mul(vs);
    let g = proj.tr_mul(&proj);
    let gram_deviation = (&g - DMatrix::<f64>::identity(n, n)).norm();
    let min_projected_norm_sq = (0..n).map(|i| g[(i, i)]).fold(f64::INFINITY, f64::min);
    let mut max_projected_overlap = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                max_projected_overlap = max_projected_overlap.max(g[(i, j)].abs());
            }
        }
    }
    let (projected_defects, proof_route_defects, inv_sqrt_deviation) = match inv_sqrt_near_identity(&g, 1e-14) {
        Ok(a) if n > 0 => {
            let w = &proj * &a;
            let av = vs * &a;
            let mut pd = Vec::with_capacity(m);
            let mut br = Vec::with_capacity(m);
            for u in us.column_iter() {
                let u = u.into_owned();
                let b = w.tr_mul(&u);
                pd.push((&u - &w * &b).norm());
                br.push((&u - &av * &b).norm());
            }
            let dev = (&a - DMatrix::<f64>::identity(n, n)).norm();
            (pd, br, dev)
        }
        _ => (vec![f64::NAN; m], vec![f64::NAN; m], f64::NAN),
    };

    let defect_bound = eps.powf(0.25) + 2.0 * delta.powf(1.5);
    let count_within_bound = defects.iter().filter(|&&d| d < defect_bound).count();
    let required_count = (n as f64 * (1.0 - eps.sqrt())).ceil() as usize;
    Ok(MatchReport {
        n,
        m,
        hypotheses,
        hypotheses_hold,
        eigen_indices,
        defects,
        defects_gram_route,
        projected_defects,
        proof_route_defects,
        defect_bound,
        count_within_bound,
        required_count,
        conclusion_holds: count_within_bound >= required_count,
        min_projected_norm_sq: if n == 0 { f64::NAN } else { min_projected_norm_sq },
        projected_norm_bound: 1.0 - ratio,
        max_projected_overlap,
        projected_overlap_bound: batch.eps2 + ratio,
        gram_deviation,
        inv_sqrt_deviation,
        norm: "Hilbert-Schmidt",
    })
}
