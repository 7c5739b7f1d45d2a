//! Unitary DFT used project-wide.
//!
//! Both directions are scaled by `1/sqrt(N)`, so `sum |x_n|^2 == sum |X_k|^2`
//! and energy thresholds do not depend on the transform convention.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

#[derive(Clone)]
pub struct UnitaryDft<T: Real> {
    size: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    scale: T,
}

impl<T: Real> UnitaryDft<T> {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
            scale: T::one() / T::of(size as f64).sqrt(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// In-place forward transform. Panics if `buf.len() != size`.
    pub fn forward(&self, buf: &mut [Complex<T>]) {
        assert_eq!(buf.len(), self.size, "DFT length mismatch");
        self.forward.process(buf);
        self.normalize(buf);
    }

    /// In-place inverse transform. Panics if `buf.len() != size`.
    pub fn inverse(&self, buf: &mut [Complex<T>]) {
        assert_eq!(buf.len(), self.size, "DFT length mismatch");
        self.inverse.process(buf);
        self.normalize(buf);
    }

    fn normalize(&self, buf: &mut [Complex<T>]) {
        for x in buf {
            *x = *x * self.scale;
        }
    }
}

impl<T: Real> fmt::Debug for UnitaryDft<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UnitaryDft").field("size", &self.size).finish()
    }
}

pub fn energy<T: Real>(samples: &[Complex<T>]) -> T {
    samples.iter().fold(T::zero(), |acc, x| acc + x.norm_sqr())
}
