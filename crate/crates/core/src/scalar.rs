use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used throughout the crate: `f32` or `f64`.
pub trait RisFloat:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn of(x: f64) -> Self;

    fn as_f64(self) -> f64;

    fn deg(self) -> Self {
        self.to_degrees()
    }

    fn rad(self) -> Self {
        self.to_radians()
    }
}

impl RisFloat for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl RisFloat for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// `e^{j·phase}`.
#[inline]
pub fn cis<T: RisFloat>(phase: T) -> Complex<T> {
    Complex::new(phase.cos(), phase.sin())
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_pi<T: RisFloat>(x: T) -> T {
    let two_pi = T::TAU();
    let mut r = x % two_pi;
    if r > T::PI() {
        r = r - two_pi;
    } else if r <= -T::PI() {
        r = r + two_pi;
    }
    r
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_two_pi<T: RisFloat>(x: T) -> T {
    let two_pi = T::TAU();
    let r = x % two_pi;
    let r = if r < T::zero() { r + two_pi } else { r };
    if r >= two_pi {
        T::zero()
    } else {
        r
    }
}

/// Amplitude ratio to dB with a finite floor.
pub fn amplitude_db<T: RisFloat>(amplitude: T, floor_db: T) -> T {
    if amplitude > T::zero() && amplitude.is_finite() {
        (T::of(20.0) * amplitude.log10()).max(floor_db)
    } else {
        floor_db
    }
}
