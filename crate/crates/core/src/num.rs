//! Scalar abstraction shared by the geometry, filtering and planning code.
//!
//! Everything numeric in this crate is generic over [`Real`], which is
//! implemented for `f32` and `f64`. The scenario engine and file formats are
//! pinned to `f64`; see the aliases at the crate root.

use nalgebra::RealField;
use num_traits::{FloatConst, ToPrimitive};
use std::fmt;

/// Floating point scalar usable throughout the crate.
pub trait Real:
    RealField + Copy + FloatConst + ToPrimitive + fmt::Debug + fmt::Display + Default + Send + Sync
{
    fn infinity() -> Self;

    /// Converts an `f64` literal. Never fails for the supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite-or-infinite float converts to f64")
    }
}

impl Real for f64 {
    #[inline]
    fn infinity() -> Self {
        f64::INFINITY
    }
}

impl Real for f32 {
    #[inline]
    fn infinity() -> Self {
        f32::INFINITY
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Real>(theta: T) -> T {
    let pi = T::pi();
    if theta > -pi && theta <= pi {
        return theta;
    }
    let two_pi = T::two_pi();
    let mut wrapped = theta % two_pi;
    if wrapped <= -pi {
        wrapped += two_pi;
    } else if wrapped > pi {
        wrapped -= two_pi;
    }
    // `%` can land exactly on -pi after the correction for some inputs.
    if wrapped <= -pi {
        wrapped += two_pi;
    }
    wrapped
}
