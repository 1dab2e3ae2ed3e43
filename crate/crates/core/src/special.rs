//! Gamma function for generic scalars (Lanczos, g = 7, n = 9).

use crate::scalar::{lit, Real};

const LANCZOS_G: f64 = 7.0;
// full published digits, for scalars wider than f64
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Γ(x) for real `x` away from the poles.
pub fn gamma<T: Real>(x: T) -> T {
    let half = lit::<T>(0.5);
    if x < half {
        // reflection
        let pi = T::pi();
        return pi / ((pi * x).sin() * gamma(T::one() - x));
    }
    let x = x - T::one();
    let mut acc = lit::<T>(LANCZOS[0]);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += lit::<T>(*c) / (x + lit(i as f64));
    }
    let t = x + lit(LANCZOS_G) + half;
    (T::two_pi()).sqrt() * t.powf(x + half) * (-t).exp() * acc
}

/// ln Γ(x) for `x > 0`.
pub fn ln_gamma<T: Real>(x: T) -> T {
    let half = lit::<T>(0.5);
    if x < half {
        let pi = T::pi();
        return (pi / (pi * x).sin()).abs().ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = lit::<T>(LANCZOS[0]);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += lit::<T>(*c) / (x + lit(i as f64));
    }
    let t = x + lit(LANCZOS_G) + half;
    half * T::two_pi().ln() + (x + half) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((gamma(0.5_f64) - sqrt_pi).abs() < 1e-14);
        assert!((gamma(5.0_f64) - 24.0).abs() < 1e-11);
        assert!((gamma(0.1_f64) - 9.513_507_698_668_732).abs() < 1e-12);
        assert!((gamma(-0.5_f64) + 2.0 * sqrt_pi).abs() < 1e-13);
        assert!((ln_gamma(100.0_f64) - 359.134_205_369_575_4).abs() < 1e-10);
    }

    #[test]
    fn recurrence() {
        for &x in &[0.3_f64, 0.7, 1.3, 2.9, 7.5] {
            let lhs = gamma(x + 1.0);
            let rhs = x * gamma(x);
            assert!((lhs / rhs - 1.0).abs() < 1e-13, "x={x}");
        }
    }
}
