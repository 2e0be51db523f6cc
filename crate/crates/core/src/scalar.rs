//! Scalar abstraction shared by every solver.
//!
//! All numerical code is written against [`Real`], so the same solvers run in
//! `f64` (the default used by the crate-root aliases) or `f32`. Complex
//! matrices are `nalgebra` matrices over [`Cplx<T>`].

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable by the solvers.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + LowerExp + Debug + Send + Sync
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over `T`.
pub type Cplx<T> = Complex<T>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts `T` to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Cplx<T> {
    Complex::new(re, im)
}

#[inline]
pub fn creal<T: Real>(re: T) -> Cplx<T> {
    Complex::new(re, T::zero())
}

/// `e^{j theta}`.
#[inline]
pub fn cis<T: Real>(theta: T) -> Cplx<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// Machine epsilon of `T`.
#[inline]
pub fn eps<T: Real>() -> T {
    T::default_epsilon()
}

/// Modulus of a complex number.
#[inline]
pub fn cabs<T: Real>(z: Cplx<T>) -> T {
    z.re.hypot(z.im)
}
