//! Density `g(α, s)` of the one-sided strictly α-stable subordinator.
//!
//! The density is the inverse Laplace transform of `exp(-u^α)`. Three evaluators
//! cover `(0, ∞)`:
//!
//! * below `s_lo` the small-`s` asymptotic `K s^{-(2-α)/(2-2α)} exp(-A s^{-α/(1-α)})`,
//! * on `[s_lo, s_hi]` a direct integral: Pollard's oscillatory integral summed
//!   panel by panel between its zeros, or the nonnegative Zolotarev-type
//!   integral when `α > 1/2` or left of the mode,
//! * above `s_hi` the power-law tail `B s^{-1-α}`.
//!
//! The switch points are calibrated so that the direct value and the adjacent
//! asymptotic agree to `10·rel_tol` at the switch.

use crate::error::{domain, Error, Result};
use crate::quadrature::{adaptive, integrate_log_panels, GaussLegendre};
use crate::scalar::{from_usize, lit, to_f64, Real};
use crate::special::{gamma, ln_gamma};

/// Index `α ∈ (0, 1)` plus evaluator switch points and accuracy target.
#[derive(Debug, Clone, PartialEq)]
pub struct StableParams<T> {
    alpha: T,
    s_lo: T,
    s_hi: T,
    rel_tol: T,
    a_const: T,
    k_const: T,
    b_const: T,
    cos_pa: T,
    sin_pa: T,
}

const PANEL_BUDGET: usize = 20_000;
const LOG_PANEL_WIDTH: f64 = 0.25;

fn check_alpha<T: Real>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha < T::one() {
        Ok(())
    } else {
        Err(domain(format!("alpha must lie in (0,1), got {alpha}")))
    }
}

fn check_positive<T: Real>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be positive, got {v}")))
    }
}

impl<T: Real> StableParams<T> {
    /// Calibrated parameters with the default relative tolerance of `T`.
    pub fn new(alpha: T) -> Result<Self> {
        Self::with_tolerance(alpha, T::default_rel_tol())
    }

    /// Calibrated parameters: `s_lo` is the largest point not above `0.05·α`,
    /// and `s_hi` the smallest point not below 50, where the direct evaluator and
    /// the neighbouring asymptotic agree within `10·rel_tol`.
    pub fn with_tolerance(alpha: T, rel_tol: T) -> Result<Self> {
        let mut p = Self::uncalibrated(alpha, rel_tol)?;
        p.s_lo = p.calibrate_lower()?;
        p.s_hi = p.calibrate_upper()?;
        Ok(p)
    }

    /// Explicit switch points, checked for self-consistency.
    pub fn with_thresholds(alpha: T, s_lo: T, s_hi: T, rel_tol: T) -> Result<Self> {
        let mut p = Self::uncalibrated(alpha, rel_tol)?;
        check_positive("s_lo", s_lo)?;
        check_positive("s_hi", s_hi)?;
        if !(s_lo < s_hi) {
            return Err(domain(format!("s_lo ({s_lo}) must be below s_hi ({s_hi})")));
        }
        p.s_lo = s_lo;
        p.s_hi = s_hi;
        let (lo, hi) = p.switch_discrepancy()?;
        let limit = p.rel_tol * lit(10.0);
        if lo > limit || hi > limit {
            return Err(domain(format!(
                "switch points inconsistent: relative jump {lo:e} at s_lo, {hi:e} at s_hi exceeds {limit:e}"
            )));
        }
        Ok(p)
    }

    fn uncalibrated(alpha: T, rel_tol: T) -> Result<Self> {
        check_alpha(alpha)?;
        if !(rel_tol > T::zero() && rel_tol <= lit(1e-3)) {
            return Err(domain(format!("rel_tol must lie in (0, 1e-3], got {rel_tol}")));
        }
        let one = T::one();
        let q = alpha / (one - alpha);
        let a_const = (one - alpha) * alpha.powf(q);
        let k_const = alpha.powf(one / (lit::<T>(2.0) * (one - alpha))) / (T::two_pi() * (one - alpha)).sqrt();
        let b_const = alpha / gamma(one - alpha);
        let pa = T::pi() * alpha;
        Ok(Self {
            alpha,
            s_lo: lit::<T>(0.05) * alpha,
            s_hi: lit(50.0),
            rel_tol,
            a_const,
            k_const,
            b_const,
            cos_pa: pa.cos(),
            sin_pa: pa.sin(),
        })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }
    pub fn s_lo(&self) -> T {
        self.s_lo
    }
    pub fn s_hi(&self) -> T {
        self.s_hi
    }
    pub fn rel_tol(&self) -> T {
        self.rel_tol
    }
    /// `A = (1-α) α^{α/(1-α)}`.
    pub fn a_const(&self) -> T {
        self.a_const
    }
    /// `K = α^{1/(2-2α)} / sqrt(2π(1-α))`.
    pub fn k_const(&self) -> T {
        self.k_const
    }
    /// `B = α / Γ(1-α)`.
    pub fn b_const(&self) -> T {
        self.b_const
    }

    fn agree(&self, asym: T, direct: T) -> bool {
        asym.max(direct) <= T::tiny() || (asym - direct).abs() <= lit::<T>(10.0) * self.rel_tol * direct
    }

    fn calibrate_lower(&self) -> Result<T> {
        let step = lit::<T>(0.5).sqrt();
        let mut s = lit::<T>(0.05) * self.alpha;
        for _ in 0..4000 {
            let asym = self.small_s_asymptotic(s)?;
            let direct = self.zolotarev_integral(s)?;
            if self.agree(asym, direct) {
                return Ok(s);
            }
            s *= step;
        }
        Err(Error::Calibration(format!("no lower switch point found for alpha={}", self.alpha)))
    }

    fn calibrate_upper(&self) -> Result<T> {
        let step = lit::<T>(2.0).sqrt();
        let mut s = lit::<T>(50.0);
        while s < T::huge() {
            let asym = self.tail_asymptotic(s)?;
            let direct = self.direct(s)?;
            if self.agree(asym, direct) {
                return Ok(s);
            }
            s *= step;
        }
        Err(Error::Calibration(format!(
            "tail asymptotic never reaches relative accuracy {} for alpha={}; loosen rel_tol",
            self.rel_tol, self.alpha
        )))
    }

    /// Relative jumps between the direct evaluator and the asymptotics at the
    /// two switch points (zero where both values underflow).
    pub fn switch_discrepancy(&self) -> Result<(T, T)> {
        let rel = |a: T, d: T| {
            if a.max(d) <= T::tiny() {
                T::zero()
            } else {
                ((a - d) / d).abs()
            }
        };
        let lo = rel(self.small_s_asymptotic(self.s_lo)?, self.direct(self.s_lo)?);
        let hi = rel(self.tail_asymptotic(self.s_hi)?, self.direct(self.s_hi)?);
        Ok((lo, hi))
    }

    /// `K s^{-(2-α)/(2-2α)} exp(-A s^{-α/(1-α)})`.
    pub fn small_s_asymptotic(&self, s: T) -> Result<T> {
        check_positive("s", s)?;
        let one = T::one();
        let two = lit::<T>(2.0);
        let a = self.alpha;
        let log = self.k_const.ln() - (two - a) / (two - two * a) * s.ln() - self.a_const * s.powf(-a / (one - a));
        Ok(log.exp())
    }

    /// `B s^{-1-α}`.
    pub fn tail_asymptotic(&self, s: T) -> Result<T> {
        check_positive("s", s)?;
        Ok(self.b_const * s.powf(-T::one() - self.alpha))
    }

    /// Direct evaluation of `g(α, s)` to relative accuracy `rel_tol`.
    ///
    /// Pollard's integral is used when `α ≤ 1/2` and `s ≥ A^{(1-α)/α}`; otherwise the
    /// Zolotarev-type integral, whose integrand is nonnegative. Pollard's sum
    /// has only absolute accuracy, which is useless left of the mode where `g`
    /// is exponentially small.
    pub fn pollard_density(&self, s: T) -> Result<T> {
        check_positive("s", s)?;
        self.direct(s)
    }

    fn direct(&self, s: T) -> Result<T> {
        let pollard_from = self.a_const.powf((T::one() - self.alpha) / self.alpha);
        let v = if self.alpha > lit(0.5) || s < pollard_from.max(lit::<T>(2.0) * self.s_lo) {
            self.zolotarev_integral(s)?
        } else {
            self.pollard_integral(s)?
        };
        self.clamp(v)
    }

    fn clamp(&self, v: T) -> Result<T> {
        if v >= T::zero() {
            Ok(v)
        } else if v >= -self.rel_tol {
            Ok(T::zero())
        } else {
            Err(Error::Numeric(format!("density evaluated to {v:e} < 0")))
        }
    }

    /// Pollard's integral `(1/π) ∫_0^∞ e^{-su} e^{-u^α cos πα} sin(u^α sin πα) du`.
    ///
    /// Evaluated in `v = s·u`, panel by panel between the zeros
    /// `v_k = s (kπ / sin πα)^{1/α}` of the oscillating factor, with geometric
    /// grading toward `v = 0`. Summation stops when the remaining tail is
    /// bounded below `rel_tol/1000` of the partial sum.
    pub fn pollard_integral(&self, s: T) -> Result<T> {
        check_positive("s", s)?;
        let rule = GaussLegendre::<T>::new(16);
        let alpha = self.alpha;
        let (c, sg) = (self.cos_pa, self.sin_pa);
        let integrand = |v: T| {
            let ua = (v / s).powf(alpha);
            (-v - ua * c).exp() * (ua * sg).sin()
        };
        let zero_at = |k: usize| s * (from_usize::<T>(k) * T::pi() / sg).powf(T::one() / alpha);
        let growth = (-c).max(T::zero());
        let target = self.rel_tol * lit(1e-3);

        let mut sum = T::zero();
        let mut panels = 0usize;

        // graded panels on [0, b0]
        let b0 = zero_at(1).min(T::one());
        let levels = 50;
        let mut hi = b0;
        for _ in 0..levels {
            let lo = hi * lit(0.5);
            sum += rule.integrate(integrand, lo, hi);
            hi = lo;
        }
        sum += rule.integrate(integrand, T::zero(), hi);
        panels += levels + 1;

        let mut start = b0;
        let mut k = 1usize;
        loop {
            let mut end = zero_at(k);
            while end <= start {
                k += 1;
                end = zero_at(k);
            }
            // sub-panels no longer than 2 in v
            let mut a = start;
            while a < end {
                let b = (a + lit(2.0)).min(end);
                sum += rule.integrate(integrand, a, b);
                panels += 1;
                // remainder bound e^{-v + growth (v/s)^α}, valid once decreasing
                let decreasing = growth * alpha * (b / s).powf(alpha - T::one()) < s;
                let bound = (-b + growth * (b / s).powf(alpha)).exp();
                if decreasing && bound <= target * sum.abs() {
                    return Ok(sum / (T::pi() * s));
                }
                if panels > PANEL_BUDGET {
                    return Err(Error::QuadratureFailure {
                        context: format!("Pollard integral at s={s}"),
                        partial: to_f64(sum / (T::pi() * s)),
                        error_estimate: to_f64(bound / (T::pi() * s)),
                    });
                }
                a = b;
            }
            start = end;
            k += 1;
        }
    }

    /// `U(φ) = (sin αφ / sin φ)^{α/(1-α)} · sin((1-α)φ) / sin φ`, with `w = π - φ`
    /// used for `sin φ` on the right half.
    fn zolotarev_u(&self, phi: T, w: T) -> T {
        if phi <= T::zero() {
            return self.a_const;
        }
        let a = self.alpha;
        let one_m = T::one() - a;
        let sin_phi = if phi <= T::frac_pi_2() { phi.sin() } else { w.sin() };
        ((a * phi).sin() / sin_phi).powf(a / one_m) * (one_m * phi).sin() / sin_phi
    }

    /// Zolotarev-type representation
    /// `g = α/(π(1-α)) s^{-1/(1-α)} ∫_0^π U(φ) exp(-s^{-α/(1-α)} U(φ)) dφ`.
    ///
    /// The exponent is shifted by `A = U(0)` and the result assembled in the log
    /// domain, so values far below the underflow threshold stay accurate until
    /// the final exponential.
    pub fn zolotarev_integral(&self, s: T) -> Result<T> {
        check_positive("s", s)?;
        let a = self.alpha;
        let one = T::one();
        let one_m = one - a;
        let zeta = s.powf(-a / one_m);
        let za = zeta * self.a_const;
        let half_pi = T::frac_pi_2();
        let log_pref = (a / (T::pi() * one_m)).ln() - s.ln() / one_m;
        // the integral is at most π (A + 80/ζ); skip work when the result underflows
        let log_bound = log_pref - za + (T::pi() * (self.a_const + lit::<T>(80.0) / zeta)).ln();
        if log_bound < T::tiny().ln() - lit(5.0) {
            return Ok(T::zero());
        }

        // positions where ζU reaches the listed levels
        let offsets = [0.5, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0];
        let mut levels: Vec<T> = Vec::new();
        if za < one {
            levels.push(one);
            levels.extend(offsets[1..].iter().map(|&o| lit::<T>(o)));
        } else {
            levels.extend(offsets.iter().map(|&o| za + lit(o)));
        }

        let u_mid = self.zolotarev_u(half_pi, half_pi);
        let mut left_breaks: Vec<T> = vec![T::zero()];
        let mut right_breaks: Vec<T> = Vec::new(); // values of w
        let mut cut_left: Option<T> = None;
        let mut cut_right: Option<T> = None;
        let last = levels.len() - 1;
        for (i, &level) in levels.iter().enumerate() {
            let target = level / zeta;
            if target <= u_mid {
                let phi = self.solve_left(target);
                left_breaks.push(phi);
                if i == last {
                    cut_left = Some(phi);
                }
            } else {
                let w = self.solve_right(target);
                right_breaks.push(w);
                if i == last {
                    cut_right = Some(w);
                }
            }
        }

        let integrand = |phi: T, w: T| {
            let u = self.zolotarev_u(phi, w);
            let e = (-(zeta * u - za)).exp();
            if e == T::zero() {
                T::zero()
            } else {
                u * e
            }
        };
        let left_f = |phi: T| integrand(phi, T::pi() - phi);
        let right_f = |lw: T| {
            let w = lw.exp();
            integrand(T::pi() - w, w) * w
        };

        // pieces in the left half (φ) and right half (ln w)
        let mut pieces: Vec<(bool, T, T)> = Vec::new();
        let left_end = cut_left.unwrap_or(half_pi);
        left_breaks.retain(|&b| b <= left_end);
        if cut_left.is_none() {
            left_breaks.push(half_pi);
        }
        left_breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
        left_breaks.dedup();
        for pair in left_breaks.windows(2) {
            if pair[1] > pair[0] {
                pieces.push((true, pair[0], pair[1]));
            }
        }
        if cut_left.is_none() {
            let w_cut = cut_right.unwrap_or(T::tiny());
            let mut rb: Vec<T> = right_breaks.into_iter().filter(|&w| w >= w_cut).collect();
            rb.push(half_pi);
            rb.push(w_cut);
            rb.sort_by(|x, y| x.partial_cmp(y).unwrap());
            rb.dedup();
            for pair in rb.windows(2) {
                if pair[1] > pair[0] {
                    pieces.push((false, pair[0].ln(), pair[1].ln()));
                }
            }
        }

        let rough = pieces.iter().fold(T::zero(), |acc, &(left, lo, hi)| {
            let rule = GaussLegendre::<T>::new(8);
            acc + if left { rule.integrate(left_f, lo, hi) } else { rule.integrate(right_f, lo, hi) }
        });
        // rounding in U is amplified by ζ in the exponent
        let inner_tol = (self.rel_tol * lit(1e-3)).max(T::eps() * lit(50.0)).max(za * T::eps() * lit(100.0));
        let abs_tol = rough.abs() * inner_tol * lit(0.1);
        let mut total = T::zero();
        for &(left, lo, hi) in &pieces {
            let est = if left {
                adaptive(left_f, lo, hi, abs_tol, inner_tol, 400)
            } else {
                adaptive(right_f, lo, hi, abs_tol, inner_tol, 400)
            }
            .map_err(|e| match e {
                Error::QuadratureFailure { partial, error_estimate, .. } => Error::QuadratureFailure {
                    context: format!("Zolotarev integral at s={s}"),
                    partial,
                    error_estimate,
                },
                other => other,
            })?;
            total += est.value;
        }
        if total <= T::zero() {
            return Ok(T::zero());
        }
        Ok((log_pref - za + total.ln()).exp())
    }

    fn solve_left(&self, target: T) -> T {
        let (mut lo, mut hi) = (T::zero(), T::frac_pi_2());
        for _ in 0..48 {
            let mid = (lo + hi) * lit(0.5);
            if self.zolotarev_u(mid, T::pi() - mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) * lit(0.5)
    }

    fn solve_right(&self, target: T) -> T {
        // U decreases in w on (0, π/2]
        let (mut lo, mut hi) = (T::tiny().ln(), T::frac_pi_2().ln());
        for _ in 0..60 {
            let mid = (lo + hi) * lit(0.5);
            let w = mid.exp();
            if self.zolotarev_u(T::pi() - w, w) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        ((lo + hi) * lit(0.5)).exp()
    }

    /// Region-switching evaluator of `g(α, s)`.
    pub fn density(&self, s: T) -> Result<T> {
        check_positive("s", s)?;
        if s < self.s_lo {
            self.small_s_asymptotic(s)
        } else if s <= self.s_hi {
            self.direct(s)
        } else {
            self.tail_asymptotic(s)
        }
    }

    /// `g_t(α, s) = t^{-1/α} g(α, t^{-1/α} s)`.
    pub fn scaled_density(&self, t: T, s: T) -> Result<T> {
        check_positive("t", t)?;
        check_positive("s", s)?;
        let scale = t.powf(-T::one() / self.alpha);
        Ok(scale * self.density(scale * s)?)
    }

    /// `∫_0^∞ e^{-us} g(α, s) ds` by log-panel quadrature over the three regions.
    pub fn laplace_check(&self, u: T) -> Result<T> {
        if !(u >= T::zero()) || !u.is_finite() {
            return Err(domain(format!("u must be nonnegative, got {u}")));
        }
        let rule = GaussLegendre::<T>::new(16);
        let width = lit::<T>(LOG_PANEL_WIDTH);
        let weight = |s: T| (-u * s).exp();
        // g vanishes below the point where A s^{-α/(1-α)} = 745
        let floor = (lit::<T>(745.0) / self.a_const).powf(-(T::one() - self.alpha) / self.alpha);
        let cut = if u > T::zero() { lit::<T>(800.0) / u } else { T::max_value().unwrap_or_else(T::huge) };

        let mut total = T::zero();
        let lo_end = self.s_lo.min(cut);
        if floor < lo_end {
            total += integrate_log_panels(
                &rule,
                |s| weight(s) * self.small_s_asymptotic(s).unwrap_or(T::zero()),
                floor,
                lo_end,
                width,
            );
        }
        let mid_end = self.s_hi.min(cut);
        if self.s_lo < mid_end {
            let mut failure: Option<Error> = None;
            total += integrate_log_panels(
                &rule,
                |s| match self.direct(s) {
                    Ok(g) => weight(s) * g,
                    Err(e) => {
                        failure.get_or_insert(e);
                        T::zero()
                    }
                },
                self.s_lo,
                mid_end,
                width,
            );
            if let Some(e) = failure {
                return Err(e);
            }
        }
        if u == T::zero() {
            total += self.b_const * self.s_hi.powf(-self.alpha) / self.alpha;
        } else if self.s_hi < cut {
            total += integrate_log_panels(
                &rule,
                |s| weight(s) * self.b_const * s.powf(-T::one() - self.alpha),
                self.s_hi,
                cut,
                width,
            );
        }
        Ok(total)
    }

    /// Total mass `∫_0^∞ g ds`.
    pub fn mass(&self) -> Result<T> {
        self.laplace_check(T::zero())
    }

    /// Empirical envelope constant `max_s g(α, s) s^{1+α}` over `s_grid`.
    pub fn envelope_constant(&self, s_grid: &[T]) -> Result<T> {
        if s_grid.is_empty() {
            return Err(domain("s_grid must be nonempty"));
        }
        let mut lo = s_grid[0];
        let mut hi = s_grid[0];
        for &s in s_grid {
            check_positive("s", s)?;
            lo = lo.min(s);
            hi = hi.max(s);
        }
        if lo > lit(1e-3 * (1.0 + 1e-9)) || hi < lit(1e3 * (1.0 - 1e-9)) {
            return Err(domain(format!("s_grid must cover [1e-3, 1e3], got [{lo:e}, {hi:e}]")));
        }
        let e = T::one() + self.alpha;
        let mut best = T::zero();
        for &s in s_grid {
            best = best.max(self.density(s)? * s.powf(e));
        }
        Ok(best)
    }

    /// Coefficients `c_k` of the convergent expansion
    /// `g(α, s) = Σ_k c_k s^{-kα-1}`, `k = 1..=terms`.
    pub fn tail_series_coefficients(&self, terms: usize) -> Vec<T> {
        (1..=terms)
            .map(|k| {
                let kf = from_usize::<T>(k);
                let sign = if k % 2 == 1 { T::one() } else { -T::one() };
                let mag = (ln_gamma(kf * self.alpha + T::one()) - ln_gamma(kf + T::one())).exp();
                sign * mag * (kf * T::pi() * self.alpha).sin() / T::pi()
            })
            .collect()
    }

    /// `∫_S^∞ g(α, s) ds` from the first `terms` terms of the tail expansion,
    /// with the magnitude of the next term as an error estimate.
    pub fn tail_mass(&self, big_s: T, terms: usize) -> (T, T) {
        let coeffs = self.tail_series_coefficients(terms + 1);
        let mut value = T::zero();
        let mut next = T::zero();
        for (i, c) in coeffs.iter().enumerate() {
            let ka = from_usize::<T>(i + 1) * self.alpha;
            let term = *c * big_s.powf(-ka) / ka;
            if i < terms {
                value += term;
            } else {
                next = term.abs();
            }
        }
        (value, next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn levy(s: f64) -> f64 {
        (2.0 * std::f64::consts::PI.sqrt()).recip() * s.powf(-1.5) * (-0.25 / s).exp()
    }

    /// Convergent tail series summed directly; accurate where `s^{-α}` is small.
    fn series(alpha: f64, s: f64, terms: usize) -> f64 {
        (1..terms)
            .map(|k| {
                let k = k as f64;
                let sign = if (k as usize) % 2 == 1 { 1.0 } else { -1.0 };
                sign * (ln_gamma(k * alpha + 1.0) - ln_gamma(k + 1.0)).exp()
                    * (k * std::f64::consts::PI * alpha).sin()
                    * s.powf(-k * alpha - 1.0)
            })
            .sum::<f64>()
            / std::f64::consts::PI
    }

    #[test]
    fn constants_reduce_to_levy_at_one_half() {
        let p = StableParams::new(0.5_f64).unwrap();
        assert!((p.a_const() - 0.25).abs() < 1e-15);
        let k_levy = (2.0 * std::f64::consts::PI.sqrt()).recip();
        assert!((p.k_const() - k_levy).abs() < 1e-15);
        assert!((p.b_const() - k_levy).abs() < 1e-14);
    }

    #[test]
    fn pollard_matches_levy_closed_form() {
        let p = StableParams::new(0.5_f64).unwrap();
        for &s in &[0.05, 0.3, 1.0, 7.0, 100.0, 1e4] {
            let v = p.pollard_integral(s).unwrap();
            assert!((v / levy(s) - 1.0).abs() < 1e-10, "s={s} v={v}");
        }
        assert!((p.pollard_density(1.0).unwrap() - 0.219_696).abs() < 5e-7);
        assert!((p.pollard_density(100.0).unwrap() - 2.8139e-4).abs() < 5e-9);
    }

    #[test]
    fn zolotarev_matches_levy_closed_form() {
        let p = StableParams::new(0.5_f64).unwrap();
        for &s in &[0.002, 0.01, 0.1, 1.0, 30.0, 1e5, 1e9] {
            let v = p.zolotarev_integral(s).unwrap();
            assert!((v / levy(s) - 1.0).abs() < 1e-10, "s={s} v={v}");
        }
    }

    #[test]
    fn zolotarev_and_pollard_agree_on_overlap() {
        for &alpha in &[0.2_f64, 0.35, 0.5] {
            let p = StableParams::new(alpha).unwrap();
            for &s in &[0.2, 1.0, 5.0, 40.0] {
                let z = p.zolotarev_integral(s).unwrap();
                let q = p.pollard_integral(s).unwrap();
                assert!((z / q - 1.0).abs() < 1e-9, "alpha={alpha} s={s}: {z} vs {q}");
            }
        }
    }

    #[test]
    fn direct_matches_tail_series_for_large_s() {
        for &alpha in &[0.3_f64, 0.7, 0.9] {
            let p = StableParams::new(alpha).unwrap();
            for &s in &[1e3, 1e6] {
                let d = p.pollard_density(s).unwrap();
                let sr = series(alpha, s, 40);
                assert!((d / sr - 1.0).abs() < 1e-9, "alpha={alpha} s={s}: {d} vs {sr}");
            }
        }
    }

    #[test]
    fn small_s_asymptotic_examples() {
        let p = StableParams::new(0.5_f64).unwrap();
        assert!((p.small_s_asymptotic(0.1).unwrap() - levy(0.1)).abs() < 1e-14);
        assert!((p.small_s_asymptotic(0.1).unwrap() - 0.732_249).abs() < 1e-6);
        assert!((p.small_s_asymptotic(1.0).unwrap() - 0.219_696).abs() < 5e-7);
        for &alpha in &[0.2_f64, 0.6] {
            let p = StableParams::new(alpha).unwrap();
            assert!(p.small_s_asymptotic(1e-30).unwrap() < 1e-300);
        }
    }

    #[test]
    fn tail_asymptotic_examples() {
        let p = StableParams::new(0.5_f64).unwrap();
        assert!((p.tail_asymptotic(1.0).unwrap() - 0.282_095).abs() < 5e-7);
        assert!((p.tail_asymptotic(100.0).unwrap() - 2.820_95e-4).abs() < 5e-10);
        let ratio = p.pollard_density(1000.0).unwrap() / p.tail_asymptotic(1000.0).unwrap();
        assert!((ratio - 1.0).abs() < 3e-4);
        assert!((ratio - (-1.0_f64 / 4000.0).exp()).abs() < 1e-9);
    }

    #[test]
    fn density_regions() {
        let p = StableParams::new(0.5_f64).unwrap();
        assert!((p.density(1.0).unwrap() - 0.219_696).abs() < 5e-7);
        let q = StableParams::new(0.3_f64).unwrap();
        // far below s_lo: the asymptotic branch, no quadrature
        assert!(1e-9 < q.s_lo());
        assert_eq!(q.density(1e-9).unwrap(), q.small_s_asymptotic(1e-9).unwrap());
        assert!(q.density(1e-9).unwrap() >= 0.0);
    }

    #[test]
    fn tight_tolerance_left_of_mode_stays_relative() {
        // the oscillatory sum loses all relative accuracy where g ~ 1e-300
        let p = StableParams::with_tolerance(0.3_f64, 1e-10).unwrap();
        let mut s = 2.0 * p.s_lo();
        while s < 1.0 {
            let d = p.pollard_density(s).unwrap();
            let z = p.zolotarev_integral(s).unwrap();
            assert!(d >= 0.0 && (d - z).abs() <= 1e-10 * z, "s={s:e} {d:e} vs {z:e}");
            s *= 3.0;
        }
        assert!((p.laplace_check(1.0).unwrap() - (-1.0_f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn calibrated_switch_points_are_self_consistent() {
        for &alpha in &[0.1_f64, 0.3, 0.5, 0.7, 0.9] {
            let p = StableParams::new(alpha).unwrap();
            let (lo, hi) = p.switch_discrepancy().unwrap();
            assert!(lo <= 10.0 * p.rel_tol(), "alpha={alpha} lo={lo}");
            assert!(hi <= 10.0 * p.rel_tol(), "alpha={alpha} hi={hi}");
            assert!(p.s_lo() < p.s_hi());
        }
    }

    #[test]
    fn explicit_thresholds_are_validated() {
        // default-style thresholds are too coarse for the tail at alpha = 0.3
        let err = StableParams::with_thresholds(0.3_f64, 0.015, 50.0, 1e-9).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        assert!(StableParams::with_thresholds(0.5_f64, 0.3, 0.2, 1e-9).is_err());
        assert!(StableParams::new(1.5_f64).is_err());
        assert!(StableParams::with_tolerance(0.5_f64, 1e-2).is_err());
    }

    #[test]
    fn scaled_density_examples() {
        let p = StableParams::new(0.5_f64).unwrap();
        assert_eq!(p.scaled_density(1.0, 0.7).unwrap(), p.density(0.7).unwrap());
        let v = p.scaled_density(2.0, 1.0).unwrap();
        assert!((v - 0.25 * levy(0.25)).abs() < 1e-10);
        assert!((v - 0.207_554).abs() < 1e-6);
        assert!(p.scaled_density(0.0, 1.0).is_err());
        assert!(p.scaled_density(1.0, -1.0).is_err());
    }

    #[test]
    fn laplace_examples() {
        let p = StableParams::new(0.5_f64).unwrap();
        assert!((p.laplace_check(0.0).unwrap() - 1.0).abs() < 1e-8);
        assert!((p.laplace_check(1.0).unwrap() - 0.367_879_441).abs() < 1e-8);
        let q = StableParams::new(0.7_f64).unwrap();
        assert!((q.laplace_check(2.0).unwrap() - (-(2f64.powf(0.7))).exp()).abs() < 1e-8);
        assert!((q.laplace_check(2.0).unwrap() - 0.197_009).abs() < 1e-6);
        assert!(p.laplace_check(-1.0).is_err());
    }

    #[test]
    fn envelope_examples() {
        let p = StableParams::new(0.5_f64).unwrap();
        let grid = crate::scalar::log_space(1e-3, 1e3, 121);
        let c = p.envelope_constant(&grid).unwrap();
        assert!(c.is_finite() && c > 0.0);
        assert!((c - 0.282_095).abs() / 0.282_095 < 3e-4);
        let fine = crate::scalar::log_space(1e-3, 1e3, 241);
        let cf = p.envelope_constant(&fine).unwrap();
        assert!(((cf - c) / c).abs() < 0.01);
        assert!(p.envelope_constant(&[]).is_err());
        assert!(p.envelope_constant(&[1.0, 10.0]).is_err());
    }

    #[test]
    fn tail_mass_matches_closed_form_at_one_half() {
        // Lévy: ∫_S^∞ g = erf(1/(2√S))
        let p = StableParams::new(0.5_f64).unwrap();
        let (m, next) = p.tail_mass(1e4, 6);
        let x: f64 = 1.0 / (2.0 * 100.0);
        // erf(x) for small x by its series
        let erf = 2.0 / std::f64::consts::PI.sqrt() * (x - x.powi(3) / 3.0 + x.powi(5) / 10.0);
        assert!((m - erf).abs() < 1e-12, "{m} vs {erf}");
        assert!(next < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let p = StableParams::<f32>::new(0.5).unwrap();
        let v = p.density(1.0).unwrap();
        assert!((v - 0.219_696).abs() < 1e-4);
    }
}
