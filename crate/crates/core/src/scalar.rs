//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::ToPrimitive;

/// Real floating point scalar the numerical core is generic over.
///
/// Backed by nalgebra's `RealField` so the same type flows through the dense
/// symmetric eigensolver and the quadrature code.
pub trait Real: RealField + Copy + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static {
    /// Values at or below this are treated as an underflowed zero.
    fn tiny() -> Self;
    /// Machine epsilon.
    fn eps() -> Self;
    /// Default relative target for density evaluation.
    fn default_rel_tol() -> Self;
    /// Largest argument a threshold search may reach.
    fn huge() -> Self;
}

impl Real for f64 {
    fn tiny() -> Self {
        1e-300
    }
    fn eps() -> Self {
        f64::EPSILON
    }
    fn default_rel_tol() -> Self {
        1e-9
    }
    fn huge() -> Self {
        1e250
    }
}

impl Real for f32 {
    fn tiny() -> Self {
        f32::MIN_POSITIVE
    }
    fn eps() -> Self {
        f32::EPSILON
    }
    fn default_rel_tol() -> Self {
        1e-4
    }
    fn huge() -> Self {
        1e30
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Converts a count into `T`.
#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

/// Lossy conversion to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `n` log-uniform points from `lo` to `hi` inclusive; the endpoints are exact.
pub fn log_space<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let step = (b - a) / from_usize(n - 1);
            let mut v: Vec<T> = (0..n).map(|i| (a + step * from_usize(i)).exp()).collect();
            v[0] = lo;
            v[n - 1] = hi;
            v
        }
    }
}

/// Points `10^(k/per_decade)` for every integer `k` with the point inside `[lo, hi]`.
///
/// Lattices built with the same `per_decade` share points, so ratios like `r/t`
/// hit exact lattice values.
pub fn decade_lattice<T: Real>(lo: T, hi: T, per_decade: usize) -> Vec<T> {
    let m = per_decade.max(1) as f64;
    let (lo64, hi64) = (to_f64(lo), to_f64(hi));
    let k0 = (lo64.log10() * m - 1e-9).ceil() as i64;
    let k1 = (hi64.log10() * m + 1e-9).floor() as i64;
    (k0..=k1).map(|k| lit(10f64.powf(k as f64 / m))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_space_endpoints() {
        let v = log_space(1e-3_f64, 1e3, 7);
        assert_eq!(v.len(), 7);
        assert_eq!((v[0], v[6]), (1e-3, 1e3));
        assert!((v[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lattice_is_nested_under_refinement() {
        let coarse = decade_lattice(0.01_f64, 10.0, 4);
        let fine = decade_lattice(0.01_f64, 10.0, 8);
        assert_eq!(coarse.len(), 13);
        assert_eq!(fine.len(), 25);
        for c in &coarse {
            assert!(fine.iter().any(|f| ((f - c) / c).abs() < 1e-12));
        }
    }
}
