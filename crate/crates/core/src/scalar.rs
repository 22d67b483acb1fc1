//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Real floating-point scalar: `f32` or `f64`.
///
/// Tolerances are part of the scalar because the invariants they guard
/// (unitarity, symmetry, refocusing) are roundoff statements.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Absolute max-norm tolerance for `U†U = I`.
    fn unitarity_tol() -> Self;
    /// Looser tolerance used when accepting externally supplied matrices.
    fn acceptance_tol() -> Self;
    /// Probability below which a transition phase is reported as undefined.
    fn phase_floor() -> Self;

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
}

impl Real for f64 {
    fn unitarity_tol() -> Self {
        1e-12
    }
    fn acceptance_tol() -> Self {
        1e-10
    }
    fn phase_floor() -> Self {
        1e-15
    }
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Real for f32 {
    fn unitarity_tol() -> Self {
        1e-5
    }
    fn acceptance_tol() -> Self {
        1e-4
    }
    fn phase_floor() -> Self {
        1e-7
    }
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

/// Wrap an angle into `(-π, π]`.
pub fn wrap_angle<T: Real>(x: T) -> T {
    let two_pi = T::TAU();
    let mut y = x % two_pi;
    if y > T::PI() {
        y = y - two_pi;
    } else if y <= -T::PI() {
        y = y + two_pi;
    }
    y
}
