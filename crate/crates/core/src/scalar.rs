//! Scalar abstractions.
//!
//! Polynomial evaluation only needs ring operations and integer embedding, so it runs over
//! [`Scalar`] (floats, `Ratio<i64>`, `BigRational`). Distributions, spectra and root finding
//! need a floating-point type and run over [`Real`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, Num, NumAssign, ToPrimitive};

/// A number type a characteristic polynomial can be evaluated over, exact or not.
pub trait Scalar: Num + Clone + PartialOrd + Debug + FromPrimitive + ToPrimitive {}

impl<T> Scalar for T where T: Num + Clone + PartialOrd + Debug + FromPrimitive + ToPrimitive {}

/// Floating-point scalar for probabilities and Fourier coefficients.
pub trait Real: Scalar + Float + NumAssign + Copy + Send + Sync + Sum + Display + Default + 'static {
    /// Lossless for `f64`, rounding for `f32`.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to every Real")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Convert a `Scalar` built from small integers; panics only on types that cannot hold `u64`.
pub(crate) fn from_u64<T: Scalar>(x: u64) -> T {
    T::from_u64(x).expect("scalar type holds small integers")
}
