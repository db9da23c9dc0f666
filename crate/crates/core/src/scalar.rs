//! Real scalar abstraction for the floating-point side of the toolkit.
//!
//! Inference is integer-only; training, quantization and reporting run on a
//! generic real type so the same code serves `f32` and `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal; exact for every value the crate feeds in.
    fn lit(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;
}

macro_rules! impl_scalar {
    ($($t:ty),*) => {$(
        impl Scalar for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }
        }
    )*};
}

impl_scalar!(f32, f64);
