//! Special functions: integer-order Bessel functions, Airy zeros and Bessel zeros.

mod airy;
mod bessel;
mod zeros;

pub use airy::{airy_ai, airy_zero};
pub use bessel::{
    bessel_j, bessel_j_flush, bessel_j_with_derivative, bessel_j_with_derivative_flush,
    envelope_bound, BesselError,
};
pub use zeros::{bessel_zero, count_zeros_below, z_of_zeta, BesselZero, BesselZeroError};
