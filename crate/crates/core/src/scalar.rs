//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All math is written against [`Scalar`], which is implemented for `f32` and
//! `f64`. Pipelines run at `f64`; `f32` is the on-disk interchange width for
//! embeddings.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::{Deserialize, Serialize};

/// Storage width of a floating-point payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Width {
    F32,
    F64,
}

impl Width {
    pub fn bytes(self) -> usize {
        match self {
            Width::F32 => 4,
            Width::F64 => 8,
        }
    }
}

/// Floating-point type usable by the crate: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    const WIDTH: Width;

    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;

    fn write_le(self, out: &mut Vec<u8>);
}

impl Scalar for f32 {
    const WIDTH: Width = Width::F32;

    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

impl Scalar for f64 {
    const WIDTH: Width = Width::F64;

    #[inline]
    fn lit(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

/// Dot product over eight interleaved partial sums, combined pairwise. The
/// summation order depends only on the length, so results never depend on
/// how callers parallelise.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    for (l, (x, y)) in ra.iter().zip(rb).enumerate() {
        acc[l] = acc[l] + *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[2] + acc[6])) + ((acc[1] + acc[5]) + (acc[3] + acc[7]))
}

#[inline]
pub fn squared_norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

/// Truncated subtraction `max(0, a - b)`, the internal hom of the cost
/// category. `inf - inf` is `0` since `inf >= inf`.
#[inline]
pub fn truncated_sub<T: Scalar>(a: T, b: T) -> T {
    if b >= a {
        T::zero()
    } else {
        a - b
    }
}

/// Total order on scalars, NaN sorting last.
#[inline]
pub fn total_cmp<T: Scalar>(a: T, b: T) -> std::cmp::Ordering {
    a.as_f64().total_cmp(&b.as_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_sub_handles_infinity() {
        assert_eq!(truncated_sub(f64::INFINITY, f64::INFINITY), 0.0);
        assert_eq!(truncated_sub(f64::INFINITY, 1.0), f64::INFINITY);
        assert_eq!(truncated_sub(1.0, 3.0), 0.0);
        assert_eq!(truncated_sub(3.0f32, 1.0), 2.0);
    }

    #[test]
    fn dot_is_order_fixed() {
        let a = [1.0f64, 2.0, 3.0];
        let b = [4.0f64, 5.0, 6.0];
        assert_eq!(dot(&a, &b), 32.0);
        assert_eq!(dot(&a, &b), dot(&b, &a));
    }
}
