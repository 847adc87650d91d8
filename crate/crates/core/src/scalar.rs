use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar the whole crate is generic over.
///
/// Implemented for `f32` and `f64`. Tolerances throughout the crate are
/// tuned for `f64`; `f32` works for structural operations and coarse checks.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Panics only for values outside the type's range.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Exact integer ratio rounded once into the scalar type.
    fn ratio(num: i64, den: i64) -> Self {
        Self::lit(num as f64) / Self::lit(den as f64)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

/// Largest absolute entry, zero for an empty slice.
pub fn max_abs<T: Real>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Entry of largest magnitude, keeping its sign.
pub fn signed_max_abs<T: Real>(xs: &[T]) -> T {
    xs.iter()
        .copied()
        .fold(T::zero(), |m, x| if x.abs() > m.abs() { x } else { m })
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// `n` points log-spaced over `[lo, hi]`, endpoints included.
pub fn logspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n == 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / T::from_usize(n - 1).unwrap();
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + step * T::from_usize(i).unwrap()).exp()
            }
        })
        .collect()
}
