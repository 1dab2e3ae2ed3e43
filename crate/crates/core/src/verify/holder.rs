use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::fit::{least_squares, line_fit};
use super::report::{BoundReport, FittedExponent, Witness};
use super::scan::{Evaluator, DRIFT_LIMIT};
use crate::error::{domain, Result};

/// Differences below this are treated as zero.
pub const DIFFERENCE_FLOOR: f64 = 1e-14;

/// Sample design of the Hölder fit: anchors `(x, y)`; `x₁ = x + δ e₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderDesign {
    pub times: Vec<f64>,
    pub offsets: Vec<f64>,
    pub anchors: Vec<(Vec<f64>, Vec<f64>)>,
}

impl HolderDesign {
    /// Geometric midpoints inserted between consecutive offsets.
    pub fn refined(&self) -> Self {
        let mut offsets = Vec::with_capacity(2 * self.offsets.len());
        for w in self.offsets.windows(2) {
            offsets.push(w[0]);
            offsets.push((w[0] * w[1]).sqrt());
        }
        offsets.extend(self.offsets.last());
        Self { offsets, ..self.clone() }
    }
}

/// One difference `|q(t,x,y) - q(t,x₁,y)|`; `x` here is the shifted point `x₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderSample {
    pub t: f64,
    pub group: usize,
    pub delta: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct HolderResult {
    pub report: BoundReport,
    pub samples: Vec<HolderSample>,
}

fn differences(q: &Evaluator<'_>, design: &HolderDesign) -> (Vec<HolderSample>, usize) {
    let mut jobs = Vec::new();
    for (ti, &t) in design.times.iter().enumerate() {
        for (ai, (x, y)) in design.anchors.iter().enumerate() {
            for &delta in &design.offsets {
                jobs.push((t, ti * design.anchors.len() + ai, x.clone(), y.clone(), delta));
            }
        }
    }
    let raw: Vec<Option<HolderSample>> = jobs
        .into_par_iter()
        .map(|(t, group, x, y, delta)| {
            let mut x1 = x.clone();
            x1[0] += delta;
            let a = q(t, &x, &y).ok()?;
            let b = q(t, &x1, &y).ok()?;
            Some(HolderSample { t, group, delta, x: x1, y, value: (a - b).abs() })
        })
        .collect();
    let failures = raw.iter().filter(|d| d.is_none()).count();
    (raw.into_iter().flatten().collect(), failures)
}

/// Fits `|q(t,x,y) - q(t,x₁,y)| ≲ ĉ δ^γ̂ t^{-(2d-γ̂)/(2α)}`.
///
/// The slope of `log diff` against `log δ` is fitted per (t, anchor) group;
/// `γ̂` is the smallest slope clamped to 1, and `R²` comes from a pooled fit with
/// a common slope and per-group intercepts. `ĉ` is the sup of the normalized
/// differences on the given design; the verdict also requires the refined design
/// to stay within `ĉ·(1 + 5%)`.
pub fn holder_fit(q: &Evaluator<'_>, alpha: f64, d: usize, design: &HolderDesign) -> Result<HolderResult> {
    if !(alpha > 0.0 && alpha < 1.0) || d == 0 {
        return Err(domain(format!("need alpha in (0,1) and d ≥ 1, got {alpha}, {d}")));
    }
    if design.offsets.len() < 3 || design.times.is_empty() || design.anchors.is_empty() {
        return Err(domain("Hölder design needs times, anchors and at least 3 offsets"));
    }
    let mut report = BoundReport::new("holder");
    report.set_constant("alpha", alpha);
    let (diffs, failures) = differences(q, design);
    report.samples = diffs.len();
    report.failures = failures;
    let usable: Vec<&HolderSample> = diffs.iter().filter(|d| d.value > DIFFERENCE_FLOOR).collect();
    let groups = design.times.len() * design.anchors.len();
    let mut slopes = Vec::new();
    let mut used_groups = Vec::new();
    for g in 0..groups {
        let pts: Vec<&&HolderSample> = usable.iter().filter(|d| d.group == g).collect();
        if pts.len() < 3 {
            continue;
        }
        let xs: Vec<f64> = pts.iter().map(|d| d.delta.ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|d| d.value.ln()).collect();
        if let Some((m, _, _)) = line_fit(&xs, &ys) {
            slopes.push(m);
            used_groups.push(g);
        }
    }
    if slopes.is_empty() {
        report.verdict = None;
        report.notes.push(format!("degenerate regression: all differences below {DIFFERENCE_FLOOR:e}"));
        return Ok(HolderResult { report, samples: diffs });
    }
    let raw_gamma = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let gamma = raw_gamma.min(1.0);

    // pooled fit: common slope, one intercept per group
    let pooled: Vec<&&HolderSample> = usable.iter().filter(|d| used_groups.contains(&d.group)).collect();
    let col = |g: usize| used_groups.iter().position(|&u| u == g).expect("group used") + 1;
    let x = DMatrix::from_fn(pooled.len(), used_groups.len() + 1, |i, j| {
        if j == 0 {
            pooled[i].delta.ln()
        } else if col(pooled[i].group) == j {
            1.0
        } else {
            0.0
        }
    });
    let y = DVector::from_iterator(pooled.len(), pooled.iter().map(|d| d.value.ln()));
    let (beta, r2) = least_squares(&x, &y).ok_or_else(|| domain("pooled Hölder regression failed"))?;
    report.exponents.insert("gamma".into(), FittedExponent { value: gamma, r_squared: r2 });
    report.set_constant("gamma_raw_min_slope", raw_gamma);
    report.set_constant("pooled_slope", beta[0]);

    let df = d as f64;
    let shape = |t: f64, delta: f64| delta.powf(gamma) * t.powf(-(2.0 * df - gamma) / (2.0 * alpha));
    fn sup<'a>(ds: &'a [HolderSample], shape: &dyn Fn(f64, f64) -> f64) -> Option<(f64, &'a HolderSample)> {
        ds.iter().map(|d| (d.value / shape(d.t, d.delta), d)).fold(None, |best, (v, d)| match best {
            Some((b, _)) if b >= v => best,
            _ => Some((v, d)),
        })
    }
    let (c_hat, arg) = sup(&diffs, &shape).expect("nonempty differences");
    report.set_constant("c", c_hat);
    report.set_witness("argmax", Witness::new(arg.t, arg.x.clone(), arg.y.clone(), arg.value));

    let (fine_diffs, fine_failures) = differences(q, &design.refined());
    report.failures += fine_failures;
    let c_fine = sup(&fine_diffs, &shape).map_or(0.0, |(v, _)| v);
    report.set_constant("c_refined", c_fine);
    let drift = if c_hat > 0.0 { (c_fine - c_hat).abs() / c_hat } else { 0.0 };
    report.drift = Some(drift);
    report.verdict = Some(gamma > 0.0 && gamma <= 1.0 && c_fine <= c_hat * (1.0 + DRIFT_LIMIT));
    Ok(HolderResult { report, samples: diffs })
}
