use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the numerical pipeline runs on: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + rustfft::FftNum + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant. Never fails for the implemented types.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
