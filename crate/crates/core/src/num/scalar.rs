//! Scalar abstraction for the numeric core.
//!
//! All dense/sparse linear algebra, the gradient tape and the optimizer are
//! generic over [`Scalar`] so the same code runs at f32 or f64. The rest of
//! the crate pins the pipeline to f64 through the aliases at the crate root.

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar usable by tensors, the tape and the optimizer.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + std::iter::Sum + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    /// Lossy conversion from f64, for literals and RNG output.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Logistic sigmoid, computed without overflow for large |x|.
pub fn logistic<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Numerically stable ln(1 + e^x).
pub fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-(x.abs())).exp().ln_1p()
}

/// Rectified linear unit.
pub fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}
