use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::GaussLegendre;
use crate::scalar::{from_usize, lit, to_f64, Real};
use crate::subordinator::StableParams;

/// Gauss–Legendre order per log panel.
pub const PANEL_ORDER: usize = 16;
/// Number of times the panel count may be doubled.
pub const MAX_REFINEMENTS: usize = 4;

/// Truncation points, panel density and tolerances of the subordination integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub s_min: f64,
    pub s_max: f64,
    /// Log panels per decade of `s` on the coarsest level.
    pub panels: usize,
    /// Terms of the power-law tail series used to bound the discarded tail.
    pub tail_order: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl QuadratureSpec {
    /// Defaults for index `α`: `s_min = (A/100)^{(1-α)/α}`, where the small-`s`
    /// density carries the factor `e^{-100}`.
    pub fn for_alpha<T: Real>(params: &StableParams<T>) -> Self {
        let alpha = to_f64(params.alpha());
        let a = to_f64(params.a_const());
        Self {
            s_min: (a / 100.0).powf((1.0 - alpha) / alpha),
            s_max: 1e60,
            panels: 8,
            tail_order: 4,
            abs_tol: 1e-13,
            rel_tol: 1e-10,
        }
    }

    /// Checks the field invariants and that the density mass below `s_min`
    /// is under `abs_tol`.
    pub fn validate<T: Real>(&self, params: &StableParams<T>) -> Result<()> {
        if !(self.s_min > 0.0 && self.s_min < self.s_max && self.s_max.is_finite()) {
            return Err(domain(format!("need 0 < s_min < s_max, got s_min={}, s_max={}", self.s_min, self.s_max)));
        }
        if self.panels < 8 {
            return Err(domain(format!("panels must be at least 8, got {}", self.panels)));
        }
        if self.tail_order < 2 {
            return Err(domain(format!("tail_order must be at least 2, got {}", self.tail_order)));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(domain("tolerances must be positive"));
        }
        let lower = self.lower_mass_bound(params)?;
        if lower > self.abs_tol {
            return Err(domain(format!(
                "density mass below s_min is about {lower:e}, above abs_tol {:e}",
                self.abs_tol
            )));
        }
        Ok(())
    }

    /// `s_min·g(s_min)` from the small-`s` asymptotic; bounds `∫₀^{s_min} g`
    /// while `g` is increasing there.
    pub fn lower_mass_bound<T: Real>(&self, params: &StableParams<T>) -> Result<f64> {
        let s = lit::<T>(self.s_min);
        Ok(to_f64(s * params.small_s_asymptotic(s)?))
    }
}

/// Convergence record of one or more subordination integrals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadratureDiagnostics {
    pub evaluations: usize,
    /// Panels per decade on the finest level used.
    pub max_panels_per_decade: usize,
    pub max_decades: usize,
    /// Largest truncation point reached.
    pub max_s_reached: f64,
    pub max_lower_truncation: f64,
    pub max_upper_truncation: f64,
    /// Largest change between the last two refinement levels.
    pub max_refinement_change: f64,
}

impl QuadratureDiagnostics {
    fn absorb(&mut self, o: &QuadratureDiagnostics) {
        self.evaluations += o.evaluations;
        self.max_panels_per_decade = self.max_panels_per_decade.max(o.max_panels_per_decade);
        self.max_decades = self.max_decades.max(o.max_decades);
        self.max_s_reached = self.max_s_reached.max(o.max_s_reached);
        self.max_lower_truncation = self.max_lower_truncation.max(o.max_lower_truncation);
        self.max_upper_truncation = self.max_upper_truncation.max(o.max_upper_truncation);
        self.max_refinement_change = self.max_refinement_change.max(o.max_refinement_change);
    }
}

type Nodes<T> = Vec<(T, T)>;

struct Level<T: Real> {
    panels_per_decade: usize,
    decades: Vec<OnceLock<Result<Nodes<T>>>>,
}

/// Cached quadrature of `∫ F(s) g(α, s) ds` on log-spaced panels.
///
/// Node weights already include `g(α, s)`, so each density value is computed
/// once per rule and reused across times and points.
pub struct SubordinationRule<T: Real> {
    params: StableParams<T>,
    quad: QuadratureSpec,
    gl: GaussLegendre<T>,
    levels: Vec<Level<T>>,
    tail_cache: Vec<OnceLock<T>>,
    diagnostics: Mutex<QuadratureDiagnostics>,
}

/// Per-integral description: the integrand, its large-`s` limit and bounds.
pub struct Integrand<'f, T> {
    /// Components `F(s)`.
    pub f: &'f (dyn Fn(T) -> Result<Vec<T>> + Sync),
    /// `lim_{s→∞} F(s)`, componentwise.
    pub limit: Vec<T>,
    /// `sup_{s' ≥ s} max_c |F_c(s') - limit_c|`.
    pub deviation: &'f (dyn Fn(T) -> T + Sync),
    /// `sup_{s' ≤ s} max_c |F_c(s')|`, for the piece below `s_min`.
    pub sup_below: T,
}

impl<T: Real> SubordinationRule<T> {
    pub fn new(params: StableParams<T>, quad: QuadratureSpec) -> Result<Self> {
        quad.validate(&params)?;
        let decades = (quad.s_max / quad.s_min).log10().ceil().max(1.0) as usize;
        let levels = (0..=MAX_REFINEMENTS)
            .map(|l| Level {
                panels_per_decade: quad.panels << l,
                decades: (0..decades).map(|_| OnceLock::new()).collect(),
            })
            .collect();
        Ok(Self {
            params,
            quad,
            gl: GaussLegendre::new(PANEL_ORDER),
            levels,
            tail_cache: (0..=decades).map(|_| OnceLock::new()).collect(),
            diagnostics: Mutex::new(QuadratureDiagnostics::default()),
        })
    }

    /// Rule with the default [`QuadratureSpec`] for `params`.
    pub fn with_defaults(params: StableParams<T>) -> Result<Self> {
        let quad = QuadratureSpec::for_alpha(&params);
        Self::new(params, quad)
    }

    pub fn params(&self) -> &StableParams<T> {
        &self.params
    }
    pub fn alpha(&self) -> T {
        self.params.alpha()
    }
    pub fn spec(&self) -> &QuadratureSpec {
        &self.quad
    }

    /// Aggregate diagnostics of every integral evaluated so far.
    pub fn diagnostics(&self) -> QuadratureDiagnostics {
        self.diagnostics.lock().expect("diagnostics lock").clone()
    }

    fn decade_bounds(&self, k: usize) -> (T, T) {
        let lo = lit::<T>(self.quad.s_min) * lit::<T>(10.0).powi(k as i32);
        let hi = (lo * lit(10.0)).min(lit(self.quad.s_max));
        (lo, hi)
    }

    fn nodes(&self, level: usize, k: usize) -> Result<&Nodes<T>> {
        let lvl = &self.levels[level];
        lvl.decades[k]
            .get_or_init(|| {
                let (lo, hi) = self.decade_bounds(k);
                let (la, lb) = (lo.ln(), hi.ln());
                let p = lvl.panels_per_decade;
                let step = (lb - la) / from_usize(p);
                let mut out = Vec::with_capacity(p * PANEL_ORDER);
                for j in 0..p {
                    let a = la + step * from_usize(j);
                    let b = if j + 1 == p { lb } else { a + step };
                    for (x, w) in self.gl.mapped(a, b) {
                        let s = x.exp();
                        out.push((s, w * s * self.params.density(s)?));
                    }
                }
                Ok(out)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Upper bound on `∫_S^∞ g` at the end of decade `k` from the tail series.
    fn tail_bound(&self, k: usize) -> T {
        *self.tail_cache[k].get_or_init(|| {
            let (_, s) = self.decade_bounds(k);
            let (value, next) = self.params.tail_mass(s, self.quad.tail_order);
            if next.abs() <= value.abs() * lit(0.5) && value > T::zero() {
                (value + next.abs()).min(T::one())
            } else {
                T::one()
            }
        })
    }

    fn integrate_level(&self, level: usize, it: &Integrand<'_, T>) -> Result<(Vec<T>, usize, T, T)> {
        let m = it.limit.len();
        let mut acc = it.limit.clone();
        let abs_tol = lit::<T>(self.quad.abs_tol);
        let rel_tol = lit::<T>(self.quad.rel_tol);
        let decades = self.levels[level].decades.len();
        for k in 0..decades {
            for &(s, w) in self.nodes(level, k)? {
                if w == T::zero() {
                    continue;
                }
                let v = (it.f)(s)?;
                if v.len() != m {
                    return Err(Error::Shape("integrand changed its component count".into()));
                }
                for c in 0..m {
                    acc[c] += w * (v[c] - it.limit[c]);
                }
            }
            let (_, s_end) = self.decade_bounds(k);
            let remainder = (it.deviation)(s_end) * self.tail_bound(k);
            let scale = acc.iter().fold(T::zero(), |mx, v| mx.max(v.abs()));
            if remainder <= abs_tol.max(rel_tol * scale) * lit(0.1) {
                return Ok((acc, k + 1, s_end, remainder));
            }
        }
        let scale = acc.iter().fold(T::zero(), |mx, v| mx.max(v.abs()));
        let (_, s_end) = self.decade_bounds(decades - 1);
        let remainder = (it.deviation)(s_end) * self.tail_bound(decades - 1);
        if remainder <= abs_tol.max(rel_tol * scale) {
            return Ok((acc, decades, s_end, remainder));
        }
        Err(Error::QuadratureFailure {
            context: format!("subordination integral truncated at s_max={:e}", self.quad.s_max),
            partial: to_f64(acc[0]),
            error_estimate: to_f64(remainder),
        })
    }

    /// `∫₀^∞ F(s) g(α, s) ds`, written as `F_∞ + ∫ (F - F_∞) g` so the mass
    /// beyond the last decade enters exactly; panels double until two levels agree.
    pub fn integrate(&self, it: &Integrand<'_, T>) -> Result<Vec<T>> {
        let abs_tol = lit::<T>(self.quad.abs_tol);
        let rel_tol = lit::<T>(self.quad.rel_tol);
        let lower = it.sup_below * lit(self.quad.lower_mass_bound(&self.params)?);
        let mut diag =
            QuadratureDiagnostics { evaluations: 1, max_lower_truncation: to_f64(lower), ..Default::default() };
        let (mut prev, ..) = self.integrate_level(0, it)?;
        for level in 1..=MAX_REFINEMENTS {
            let (cur, decades, s_end, rem) = self.integrate_level(level, it)?;
            let (change, scale) = prev
                .iter()
                .zip(&cur)
                .fold((T::zero(), T::zero()), |(d, s), (a, b)| (d.max((*a - *b).abs()), s.max(b.abs())));
            diag.max_panels_per_decade = self.levels[level].panels_per_decade;
            diag.max_decades = decades;
            diag.max_s_reached = to_f64(s_end);
            diag.max_upper_truncation = to_f64(rem);
            diag.max_refinement_change = to_f64(change);
            if change <= abs_tol.max(rel_tol * scale) {
                if lower > abs_tol.max(rel_tol * scale) {
                    return Err(Error::QuadratureFailure {
                        context: "mass below s_min too large for the integrand".into(),
                        partial: to_f64(cur[0]),
                        error_estimate: to_f64(lower),
                    });
                }
                self.diagnostics.lock().expect("diagnostics lock").absorb(&diag);
                return Ok(cur);
            }
            prev = cur;
        }
        Err(Error::QuadratureFailure {
            context: format!("subordination panels did not converge after {MAX_REFINEMENTS} doublings"),
            partial: to_f64(prev[0]),
            error_estimate: diag.max_refinement_change,
        })
    }

    /// Scalar convenience wrapper around [`Self::integrate`].
    pub fn integrate_scalar(
        &self,
        f: &(dyn Fn(T) -> Result<T> + Sync),
        limit: T,
        deviation: &(dyn Fn(T) -> T + Sync),
        sup_below: T,
    ) -> Result<T> {
        let g = |s: T| f(s).map(|v| vec![v]);
        let it = Integrand { f: &g, limit: vec![limit], deviation, sup_below };
        Ok(self.integrate(&it)?[0])
    }
}
