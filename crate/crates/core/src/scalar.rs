// SPDX-License-Identifier: Apache-2.0

//! Scalar abstraction.
//!
//! Everything numeric in this crate is generic over a real field `T`
//! (`f32` or `f64`); complex amplitudes are `Complex<T>`. Numerical
//! thresholds depend on the working precision, so each scalar type carries
//! its own tolerance table.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Tolerance table for one working precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Orthonormality / Hermiticity checks on inputs.
    pub check: f64,
    /// Accuracy expected from constructors (normalization of states).
    pub construct: f64,
    /// Probe weights `<psi|K^dag K|psi>` below this are treated as zero.
    pub zero_weight: f64,
    /// Eigenvalues with modulus below this count as zero.
    pub zero_eigenvalue: f64,
    /// Relative residual below which a constraint is linearly dependent.
    pub rank: f64,
    /// Relative duality gap at which the SDP solver stops.
    pub sdp_gap: f64,
    /// Primal/dual residual at which the SDP solver stops.
    pub sdp_residual: f64,
}

/// Real scalar field the crate is generic over.
pub trait Real:
    RealField
    + Copy
    + FromPrimitive
    + ToPrimitive
    + Display
    + Debug
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    const TOL: Tolerances;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn tol(pick: impl Fn(&Tolerances) -> f64) -> Self {
        Self::lit(pick(&Self::TOL))
    }
}

impl Real for f64 {
    const TOL: Tolerances = Tolerances {
        check: 1e-10,
        construct: 1e-12,
        zero_weight: 1e-12,
        zero_eigenvalue: 1e-9,
        rank: 1e-8,
        sdp_gap: 1e-7,
        sdp_residual: 1e-8,
    };
}

impl Real for f32 {
    const TOL: Tolerances = Tolerances {
        check: 1e-4,
        construct: 1e-5,
        zero_weight: 1e-6,
        zero_eigenvalue: 1e-4,
        rank: 1e-3,
        sdp_gap: 1e-4,
        sdp_residual: 1e-4,
    };
}

/// Complex scalar over `T`.
pub type C<T> = Complex<T>;

#[inline]
pub fn c<T: Real>(re: T, im: T) -> C<T> {
    Complex::new(re, im)
}

#[inline]
pub fn cr<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}

/// `exp(i * phase)`.
#[inline]
pub fn cis<T: Real>(phase: T) -> C<T> {
    Complex::new(phase.cos(), phase.sin())
}
