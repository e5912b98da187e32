//! Numerical laboratory for quantum ergodicity in mixed billiards and KAM systems.
//!
//! The crate is organised by subsystem:
//!
//! * [`billiard`]: mushroom geometry, the broken billiard flow and Liouville fractions.
//! * [`special`]: Bessel functions, Airy zeros and Bessel zeros.
//! * [`quasimode`]: the semidisk quasimode family, residuals, overlaps and counting.
//! * [`spectral`]: c-clusters, near-identity inverse square roots and eigenvector matching.
//! * [`grid`]: finite-difference Dirichlet Laplacian on rasterised domains.
//! * [`circle`]: rotation numbers, Diophantine certificates and the circle-map KAM iteration.
//! * [`torus`]: Fourier utilities on tori, the regularised homological equation and the
//!   quasi-eigenvalue lattice.
//! * [`flow`]: synthetic eigenvalue-flow model, window occupancy and density lemmas.

pub mod billiard;
pub mod circle;
pub mod flow;
pub mod fourier;
pub mod grid;
pub mod quad;
pub mod quasimode;
pub mod rng;
pub mod special;
pub mod spectral;
pub mod torus;
