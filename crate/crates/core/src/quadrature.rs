//! Fixed Gauss–Legendre rules and adaptive Gauss–Kronrod integration.

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, to_f64, Real};

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    /// Builds the `n`-point rule; nodes are found by Newton iteration on `P_n` in `f64`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0_f64; n];
        let mut weights = vec![0.0_f64; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes: nodes.into_iter().map(lit).collect(), weights: weights.into_iter().map(lit).collect() }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let half = (b - a) * lit(0.5);
        let mid = (a + b) * lit(0.5);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, w * half))
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F, a: T, b: T) -> T {
        self.mapped(a, b).fold(T::zero(), |acc, (x, w)| acc + w * f(x))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Integrates `f` over `[a, b]` in the variable `ln s` with panels of width
/// at most `width` and the given rule.
pub fn integrate_log_panels<T: Real, F: FnMut(T) -> T>(rule: &GaussLegendre<T>, mut f: F, a: T, b: T, width: T) -> T {
    if !(b > a) {
        return T::zero();
    }
    let (la, lb) = (a.ln(), b.ln());
    let panels = (to_f64((lb - la) / width).ceil() as usize).max(1);
    let step = (lb - la) / from_usize(panels);
    let mut total = T::zero();
    for k in 0..panels {
        let lo = la + step * from_usize(k);
        let hi = if k + 1 == panels { lb } else { lo + step };
        total += rule.integrate(
            |x| {
                let s = x.exp();
                f(s) * s
            },
            lo,
            hi,
        );
    }
    total
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Integral estimate with its error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
}

fn gk15<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> Estimate<T> {
    let half = (b - a) * lit(0.5);
    let mid = (a + b) * lit(0.5);
    let fc = f(mid);
    let mut kron = fc * lit(WGK[7]);
    let mut gauss = fc * lit(WG[3]);
    for j in 0..7 {
        let dx = half * lit(XGK[j]);
        let pair = f(mid - dx) + f(mid + dx);
        kron += pair * lit(WGK[j]);
        if j % 2 == 1 {
            gauss += pair * lit(WG[j / 2]);
        }
    }
    Estimate { value: kron * half, error: ((kron - gauss) * half).abs() }
}

/// Globally adaptive Gauss–Kronrod (7/15) integration.
pub fn adaptive<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    abs_tol: T,
    rel_tol: T,
    max_intervals: usize,
) -> Result<Estimate<T>> {
    let first = gk15(&mut f, a, b);
    let mut parts = vec![(a, b, first)];
    let mut value = first.value;
    let mut error = first.error;
    loop {
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Estimate { value, error });
        }
        if parts.len() >= max_intervals {
            return Err(Error::QuadratureFailure {
                context: "adaptive Gauss-Kronrod".into(),
                partial: to_f64(value),
                error_estimate: to_f64(error),
            });
        }
        let (worst, _) =
            parts.iter().enumerate().fold(
                (0, -T::one()),
                |(bi, be), (i, p)| {
                    if p.2.error > be {
                        (i, p.2.error)
                    } else {
                        (bi, be)
                    }
                },
            );
        let (lo, hi, est) = parts.swap_remove(worst);
        let mid = (lo + hi) * lit(0.5);
        let left = gk15(&mut f, lo, mid);
        let right = gk15(&mut f, mid, hi);
        value += left.value + right.value - est.value;
        error += left.error + right.error - est.error;
        parts.push((lo, mid, left));
        parts.push((mid, hi, right));
        // recompute the error sum occasionally to shed accumulated round-off
        if parts.len() % 64 == 0 {
            error = parts.iter().fold(T::zero(), |acc, p| acc + p.2.error);
            value = parts.iter().fold(T::zero(), |acc, p| acc + p.2.value);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let rule = GaussLegendre::<f64>::new(8);
        // degree 15 is integrated exactly
        let v = rule.integrate(|x| x.powi(14) + 3.0 * x.powi(3), -1.0, 1.0);
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        let w: f64 = rule.mapped(0.0, 3.0).map(|(_, w)| w).sum();
        assert!((w - 3.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_high_order_nodes_symmetric() {
        let rule = GaussLegendre::<f64>::new(33);
        let v = rule.integrate(|x| x.cos(), 0.0, std::f64::consts::FRAC_PI_2);
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let est = adaptive(|x: f64| x.sqrt().recip(), 0.0, 1.0, 1e-12, 1e-12, 400).unwrap();
        assert!((est.value - 2.0).abs() < 1e-9, "{est:?}");
    }

    #[test]
    fn adaptive_reports_failure_with_partial_sum() {
        let err = adaptive(|x: f64| (1.0 / x).sin() / x, 1e-6, 1.0, 1e-14, 1e-14, 4).unwrap_err();
        assert!(matches!(err, Error::QuadratureFailure { .. }));
    }

    #[test]
    fn log_panels_integrate_power_law() {
        let rule = GaussLegendre::<f64>::new(16);
        let v = integrate_log_panels(&rule, |s| s.powf(-1.5), 1.0, 1e6, 1.0);
        assert!((v - 2.0 * (1.0 - 1e-3)).abs() < 1e-12);
    }
}
