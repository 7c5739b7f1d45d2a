//! Scalar abstraction for the signal-processing path.
//!
//! Synthesis, the unitary DFT and the energy detector are written once over
//! [`Real`] and instantiated for `f32` and `f64`. Scheduling and throughput
//! accounting stay in `f64`.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating point sample type: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Debug + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; used for constants and RNG draws.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 is representable in every Real type")
    }

    /// Widen to `f64` for reporting.
    fn widen(self) -> f64 {
        self.to_f64().expect("Real values widen to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip_through_f64() {
        assert_eq!(<f64 as Real>::of(0.25).widen(), 0.25);
        assert_eq!(<f32 as Real>::of(0.25).widen(), 0.25);
    }
}
