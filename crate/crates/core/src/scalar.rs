use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar used by the numeric layers (normalization,
/// clustering, shift factors, error metrics). Implemented for `f32` and `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; panics only for values the type cannot hold at all.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("scalar conversion")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
