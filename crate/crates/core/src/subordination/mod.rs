//! Subordinated kernels `q(t,x,y) = ∫₀^∞ p(t^{1/α}s, x, y) g(α, s) ds`, the
//! semigroup matrices `Q_t`, their gradients, the generator `-(-H)^α` and the
//! exact spectral oracle.

mod base;
mod rule;

use nalgebra::DVector;
use rayon::prelude::*;

pub use base::{BaseGradient, BaseKernel, GaussianBase, GridBase};
pub use rule::{Integrand, QuadratureDiagnostics, QuadratureSpec, SubordinationRule, MAX_REFINEMENTS, PANEL_ORDER};

use crate::base_kernel::{DiscreteEllipticOperator, KernelField, KernelKind};
use crate::error::{domain, Result};
use crate::quadrature::GaussLegendre;
use crate::scalar::{from_usize, lit, Real};
use crate::special::gamma;

fn check_time<T: Real>(t: T) -> Result<()> {
    if t > T::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("time must be positive, got {t}")))
    }
}

/// `t^{1/α}`, the time change applied to the base kernel.
fn time_scale<T: Real>(rule: &SubordinationRule<T>, t: T) -> T {
    t.powf(rule.alpha().recip())
}

/// Subordinated kernel `q(t, x, y)` of a pointwise base kernel.
pub fn subordinate_pointwise<T: Real, K: BaseKernel<T>>(
    p: &K,
    rule: &SubordinationRule<T>,
    t: T,
    x: &[T],
    y: &[T],
) -> Result<T> {
    check_time(t)?;
    let c = time_scale(rule, t);
    let s_min = lit::<T>(rule.spec().s_min);
    let f = |s: T| p.value(c * s, x, y);
    let dev = |s: T| p.deviation_bound(c * s);
    let v = rule.integrate_scalar(&f, p.limit(x, y), &dev, p.sup_bound(c * s_min))?;
    Ok(v.max(T::zero()))
}

/// Subordinated gradient `∇ₓq(t, x, y)`, differentiated under the integral.
pub fn subordinate_gradient<T: Real, G: BaseGradient<T>>(
    grad: &G,
    rule: &SubordinationRule<T>,
    t: T,
    x: &[T],
    y: &[T],
) -> Result<Vec<T>> {
    check_time(t)?;
    let c = time_scale(rule, t);
    let s_min = lit::<T>(rule.spec().s_min);
    let f = |s: T| grad.gradient(c * s, x, y);
    let dev = |s: T| grad.deviation_bound(c * s);
    let it =
        Integrand { f: &f, limit: vec![T::zero(); grad.dim()], deviation: &dev, sup_below: grad.sup_bound(c * s_min) };
    rule.integrate(&it)
}

/// `∫ e^{t^{1/α} s μ} g(α, s) ds` for one eigenvalue `μ ≤ 0`.
pub fn subordinated_factor<T: Real>(rule: &SubordinationRule<T>, t: T, mu: T) -> Result<T> {
    if mu == T::zero() {
        return Ok(T::one());
    }
    let rate = time_scale(rule, t) * mu;
    let f = |s: T| Ok((rate * s).exp());
    let dev = |s: T| (rate * s).exp();
    rule.integrate_scalar(&f, T::zero(), &dev, T::one())
}

/// Matrix of `Q_t = ∫ P_{t^{1/α}s} g(α, s) ds`, one quadrature per eigenvalue.
pub fn subordinate_matrix<T: Real>(
    op: &DiscreteEllipticOperator<T>,
    rule: &SubordinationRule<T>,
    t: T,
) -> Result<KernelField<T>> {
    check_time(t)?;
    let spec = op.spectrum()?;
    let factors: Vec<T> =
        spec.eigenvalues.as_slice().par_iter().map(|&mu| subordinated_factor(rule, t, mu)).collect::<Result<_>>()?;
    let m = spec.kernel_from_factors(&DVector::from_vec(factors));
    Ok(KernelField::new(KernelKind::Kernel, Some(rule.alpha()), t, m, op.grid().cloned(), op.cell_volume()))
}

/// Exact `e^{-t(-H)^α}` kernel: `Σ_k e^{-t|μ_k|^α} v_k v_kᵀ / h^d`; `α = 1` gives `P_t`.
pub fn spectral_oracle<T: Real>(op: &DiscreteEllipticOperator<T>, alpha: T, t: T) -> Result<KernelField<T>> {
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(domain(format!("alpha must lie in (0,1], got {alpha}")));
    }
    if !(t >= T::zero() && t.is_finite()) {
        return Err(domain(format!("time must be nonnegative, got {t}")));
    }
    let spec = op.spectrum()?;
    let m = spec.kernel_of(|mu| if mu == T::zero() { T::one() } else { (-t * (-mu).powf(alpha)).exp() });
    Ok(KernelField::new(KernelKind::Kernel, Some(alpha), t, m, op.grid().cloned(), op.cell_volume()))
}

/// Spectral `-(-H)^α f`, for reference.
pub fn spectral_generator<T: Real>(op: &DiscreteEllipticOperator<T>, alpha: T, f: &DVector<T>) -> Result<DVector<T>> {
    let spec = op.spectrum()?;
    let mut c = spec.project(f);
    for (k, &mu) in spec.eigenvalues.iter().enumerate() {
        c[k] *= if mu == T::zero() { T::zero() } else { -(-mu).powf(alpha) };
    }
    Ok(spec.synthesize(&c))
}

/// Log panels per unit of `ln s` in the generator integral.
const GENERATOR_PANELS_PER_UNIT: usize = 2;

/// `(α/Γ(1-α)) ∫₀^∞ (e^{sμ} - 1) s^{-1-α} ds` for one eigenvalue, by quadrature.
///
/// Below `s₀` the integrand is replaced by its linearization `μ s^{-α}`, with
/// `s₀` chosen so the dropped `s²μ²/2` term stays below `tol`; beyond
/// `S = 50/|μ|` the exponential is dropped and `-S^{-α}/α` added.
fn generator_factor<T: Real>(alpha: T, mu: T, tol: T, gl: &GaussLegendre<T>) -> T {
    if mu == T::zero() {
        return T::zero();
    }
    let one = T::one();
    let two = lit::<T>(2.0);
    let a_mu = -mu;
    // ∫₀^{s₀} s²μ²/2 s^{-1-α} ds = μ² s₀^{2-α} / (2(2-α))
    let s0 = (two * (two - alpha) * tol / (a_mu * a_mu)).powf((two - alpha).recip());
    let big = lit::<T>(50.0) / a_mu;
    let s0 = s0.min(big * lit(1e-3));
    let head = mu * s0.powf(one - alpha) / (one - alpha);
    let (la, lb) = (s0.ln(), big.ln());
    let panels = ((crate::scalar::to_f64(lb - la) * GENERATOR_PANELS_PER_UNIT as f64).ceil() as usize).max(1);
    let step = (lb - la) / from_usize(panels);
    let mut body = T::zero();
    for j in 0..panels {
        let a = la + step * from_usize(j);
        let b = if j + 1 == panels { lb } else { a + step };
        body += gl.integrate(
            |x| {
                let s = x.exp();
                (s * mu).exp_m1() * s.powf(-alpha)
            },
            a,
            b,
        );
    }
    let tail = -big.powf(-alpha) / alpha;
    (head + body + tail) * alpha / gamma(one - alpha)
}

/// Generator `-(-H)^α f` from the subordination integral, per eigencomponent.
pub fn generator_apply<T: Real>(
    op: &DiscreteEllipticOperator<T>,
    alpha: T,
    f: &DVector<T>,
    quad: &QuadratureSpec,
) -> Result<DVector<T>> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(domain("grid function has non-finite values"));
    }
    let spec = op.spectrum()?;
    if f.len() != spec.len() {
        return Err(crate::error::Error::Shape(format!(
            "grid function has {} values, operator {}",
            f.len(),
            spec.len()
        )));
    }
    let gl = GaussLegendre::new(PANEL_ORDER);
    let tol = lit::<T>(quad.abs_tol.max(1e-300));
    let mut c = spec.project(f);
    for (k, &mu) in spec.eigenvalues.iter().enumerate() {
        c[k] *= generator_factor(alpha, mu, tol, &gl);
    }
    Ok(spec.synthesize(&c))
}

#[cfg(test)]
mod tests;
