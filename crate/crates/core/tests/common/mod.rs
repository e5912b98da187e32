//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use qergo::rng::stream;
use qergo::spectral::{match_eigenvectors, FiniteSpectralSystem, QuasimodeBatch};
use rand::Rng;
use rand_distr::StandardNormal;

pub const DIM: usize = 200;
pub const C: f64 = 1e-2;
pub const DELTA: f64 = 1e-3;

// Classical Gram–Schmidt applied twice; independent of Householder QR.
pub fn gram_schmidt_defect(u: &DVector<f64>, basis: &DMatrix<f64>) -> f64 {
    let mut q: Vec<DVector<f64>> = Vec::new();
    for col in basis.column_iter() {
        let mut w = col.into_owned();
        for _ in 0..2 {
            for qi in &q {
                let d = qi.dot(&w);
                w -= qi * d;
            }
        }
        let nrm = w.norm();
        q.push(w / nrm);
    }
    let mut r = u.clone();
    for _ in 0..2 {
        for qi in &q {
            let d = qi.dot(&r);
            r -= qi * d;
        }
    }
    r.norm()
}

// M^{-1/2} through the symmetric eigendecomposition.
pub fn eigen_inv_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(m.clone());
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|l| l.powf(-0.5)));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

pub fn random_orthogonal(rng: &mut impl Rng, dim: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

pub fn random_unit(rng: &mut impl Rng, dim: usize) -> DVector<f64> {
    let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let n = v.norm();
    v / n
}

pub struct Instance {
    pub system: FiniteSpectralSystem,
    pub batch: QuasimodeBatch,
    pub eps: f64,
}

// Well separated spectrum with a few near-degenerate pairs. Singletons get a
// small random perturbation; some pairs are covered by one mixed quasimode,
// others by two orthogonal mixtures.
pub fn build_instance(seed: u64) -> Instance {
    for attempt in 0.. {
        let mut rng = stream(seed, attempt);
        let u = random_orthogonal(&mut rng, DIM);
        let mut eig = Vec::with_capacity(DIM);
        let mut e = 1.0;
        let mut j = 0;
        let mut pairs = Vec::new();
        while j < DIM {
            if j + 1 < DIM && rng.random::<f64>() < 0.08 {
                let split = 1e-5 * (0.5 + rng.random::<f64>());
                eig.push(e);
                eig.push(e + split);
                pairs.push(j);
                j += 2;
            } else {
                eig.push(e);
                j += 1;
            }
            e += 0.5 + 0.1 * (rng.random::<f64>() - 0.5);
        }
        let n_target = rng.random_range(20..=60);
        let eps = 0.04 + 0.16 * rng.random::<f64>();
        let amp = 10f64.powf(-9.0 + 3.0 * rng.random::<f64>());

        let mut vectors: Vec<DVector<f64>> = Vec::new();
        let mut mus = Vec::new();
        let mut j = rng.random_range(0..DIM / 4);
        while vectors.len() < n_target && j < DIM {
            if pairs.contains(&j) {
                let phi = std::f64::consts::PI * rng.random::<f64>();
                let (a, b) = (u.column(j).into_owned(), u.column(j + 1).into_owned());
                let mid = 0.5 * (eig[j] + eig[j + 1]);
                vectors.push(&a * phi.cos() + &b * phi.sin());
                mus.push(mid);
                if rng.random::<f64>() < 0.5 && vectors.len() < n_target {
                    vectors.push(-&a * phi.sin() + &b * phi.cos());
                    mus.push(mid);
                }
                j += 2;
            } else {
                if pairs.contains(&(j.wrapping_sub(1))) {
                    j += 1;
                    continue;
                }
                let v = u.column(j).into_owned() + random_unit(&mut rng, DIM) * amp;
                let nrm = v.norm();
                vectors.push(v / nrm);
                mus.push(eig[j]);
                j += 1 + usize::from(rng.random::<f64>() < 0.3);
            }
        }
        let system = FiniteSpectralSystem::new(eig, u).unwrap();
        let batch = QuasimodeBatch::measured(&system, DMatrix::from_columns(&vectors), mus).unwrap();
        let report = match_eigenvectors(&system, &batch, C, eps, DELTA).unwrap();
        if report.hypotheses_hold {
            return Instance { system, batch, eps };
        }
    }
    unreachable!()
}
