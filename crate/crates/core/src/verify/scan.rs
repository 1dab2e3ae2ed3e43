use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{BoundReport, Witness};
use crate::base_kernel::Grid;
use crate::error::{domain, Result};
use crate::scalar::decade_lattice;

/// Largest relative change of the main constant that still counts as stable.
pub const DRIFT_LIMIT: f64 = 0.05;

/// Pointwise evaluator `(t, x, y) ↦ value` used by the scans.
pub type Evaluator<'a> = dyn Fn(f64, &[f64], &[f64]) -> Result<f64> + Sync + 'a;

/// Sample design: times on a decade lattice, offsets `r = |x - y|` on the same
/// lattice plus `r = 0`, and anchor points `y`; `x = y + r e₁`.
///
/// With a grid attached, points snap to nodes and `r` is the node distance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    pub times: Vec<f64>,
    pub offsets: Vec<f64>,
    pub anchors: Vec<Vec<f64>>,
    per_decade: usize,
    t_range: (f64, f64),
    r_range: (f64, f64),
    grid: Option<Grid<f64>>,
}

/// One scan sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub r: f64,
    pub value: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// A report with the samples behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub report: BoundReport,
    pub samples: Vec<PairSample>,
}

impl ScanGrid {
    pub fn lattice(
        t_range: (f64, f64),
        r_range: (f64, f64),
        per_decade: usize,
        anchors: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let (t_lo, t_hi) = t_range;
        let (r_lo, r_hi) = r_range;
        if !(t_lo > 0.0 && t_hi / t_lo >= 1e3 * (1.0 - 1e-12)) {
            return Err(domain(format!("scan needs at least 3 decades of t, got [{t_lo}, {t_hi}]")));
        }
        if !(r_lo > 0.0 && r_hi > r_lo) {
            return Err(domain(format!("offset range must satisfy 0 < r_lo < r_hi, got [{r_lo}, {r_hi}]")));
        }
        if anchors.is_empty() || per_decade == 0 {
            return Err(domain("scan needs anchors and a positive lattice density"));
        }
        let scan = Self {
            times: decade_lattice(t_lo, t_hi, per_decade),
            offsets: std::iter::once(0.0).chain(decade_lattice(r_lo, r_hi, per_decade)).collect(),
            anchors,
            per_decade,
            t_range,
            r_range,
            grid: None,
        };
        if scan.offsets.len() < 20 {
            return Err(domain(format!("scan needs at least 20 offsets including r=0, got {}", scan.offsets.len())));
        }
        Ok(scan)
    }

    /// Snaps samples to the nodes of `grid`.
    pub fn on_grid(mut self, grid: &Grid<f64>) -> Self {
        self.grid = Some(grid.clone());
        self
    }

    pub fn per_decade(&self) -> usize {
        self.per_decade
    }

    /// The same ranges at twice the lattice density.
    pub fn refined(&self) -> Self {
        let mut s = Self::lattice(self.t_range, self.r_range, self.per_decade * 2, self.anchors.clone())
            .expect("refining a valid scan");
        s.grid = self.grid.clone();
        s
    }

    /// Self-similar rescaling `t → λ^{2α} t`, `r → λ r` (free space only).
    pub fn rescaled(&self, lambda: f64, alpha: f64) -> Self {
        let mut s = self.clone();
        let tl = lambda.powf(2.0 * alpha);
        s.times.iter_mut().for_each(|t| *t *= tl);
        s.offsets.iter_mut().for_each(|r| *r *= lambda);
        s.anchors.iter_mut().flatten().for_each(|a| *a *= lambda);
        s.t_range = (s.t_range.0 * tl, s.t_range.1 * tl);
        s.r_range = (s.r_range.0 * lambda, s.r_range.1 * lambda);
        s
    }

    /// All `(t, x, y, r)` sample tuples in (t, anchor, offset) order.
    pub fn points(&self) -> Vec<(f64, Vec<f64>, Vec<f64>, f64)> {
        let mut pairs: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
        for y in &self.anchors {
            for &r in &self.offsets {
                let mut x = y.clone();
                x[0] += r;
                match &self.grid {
                    None => pairs.push((x, y.clone(), r)),
                    Some(g) => {
                        let inside = x
                            .iter()
                            .enumerate()
                            .all(|(a, &v)| v >= g.origin()[a] - 1e-12 && v <= g.origin()[a] + g.extent()[a] + 1e-12);
                        if !inside {
                            continue;
                        }
                        let (i, j) = (g.nearest(&x), g.nearest(y));
                        let (xs, ys) = (g.coords(i), g.coords(j));
                        let rr = g.distance(i, j);
                        if !pairs.iter().any(|(px, py, _)| *px == xs && *py == ys) {
                            pairs.push((xs, ys, rr));
                        }
                    }
                }
            }
        }
        self.times.iter().flat_map(|&t| pairs.iter().map(move |(x, y, r)| (t, x.clone(), y.clone(), *r))).collect()
    }
}

/// `t^{-a} ∧ t / r^b`, with the second branch `+∞` at `r = 0`.
pub fn bound_shape(t: f64, r: f64, a: f64, b: f64) -> f64 {
    let first = t.powf(-a);
    if r == 0.0 {
        first
    } else {
        first.min(t / r.powf(b))
    }
}

/// Evaluates `f` on the scan in parallel; failures are returned as `None`.
fn sample(f: &Evaluator<'_>, scan: &ScanGrid, shape: impl Fn(f64, f64) -> f64 + Sync) -> Vec<Option<PairSample>> {
    scan.points()
        .into_par_iter()
        .map(|(t, x, y, r)| {
            let value = f(t, &x, &y).ok()?;
            if !value.is_finite() {
                return None;
            }
            let bound = shape(t, r);
            Some(PairSample { t, x, y, r, value, bound, ratio: value / bound })
        })
        .collect()
}

fn witness(s: &PairSample) -> Witness {
    Witness::new(s.t, s.x.clone(), s.y.clone(), s.value)
}

fn relative_drift(coarse: f64, fine: f64) -> f64 {
    if fine == coarse {
        0.0
    } else {
        (fine - coarse).abs() / fine.abs().max(coarse.abs())
    }
}

struct Extremes {
    samples: Vec<PairSample>,
    failures: usize,
    max: Option<usize>,
    min: Option<usize>,
}

fn extremes(raw: Vec<Option<PairSample>>) -> Extremes {
    let failures = raw.iter().filter(|s| s.is_none()).count();
    let samples: Vec<PairSample> = raw.into_iter().flatten().collect();
    // ties resolve to the first sample in scan order
    let mut max: Option<usize> = None;
    let mut min: Option<usize> = None;
    for (k, s) in samples.iter().enumerate() {
        if max.is_none_or(|m| s.ratio > samples[m].ratio) {
            max = Some(k);
        }
        if min.is_none_or(|m| s.ratio < samples[m].ratio) {
            min = Some(k);
        }
    }
    Extremes { samples, failures, max, min }
}

/// `c₁ = sup |∇ₓq| / (t^{-ℓ/(2α)} ∧ t/r^{ℓ+2α})` over the scan; `grad_q` returns `|∇ₓq|`.
pub fn gradient_ratio_scan(grad_q: &Evaluator<'_>, alpha: f64, ell: f64, scan: &ScanGrid) -> Result<ScanResult> {
    if !(alpha > 0.0 && alpha < 1.0) || !(ell >= 0.0) {
        return Err(domain(format!("need alpha in (0,1) and ell ≥ 0, got {alpha}, {ell}")));
    }
    let shape = move |t: f64, r: f64| bound_shape(t, r, ell / (2.0 * alpha), ell + 2.0 * alpha);
    let run = |s: &ScanGrid| extremes(sample(grad_q, s, shape));
    let coarse = run(scan);
    let fine = run(&scan.refined());
    let mut report = BoundReport::new("gradient");
    report.set_constant("alpha", alpha);
    report.set_constant("ell", ell);
    report.samples = coarse.samples.len();
    report.failures = coarse.failures;
    let c1 = coarse.max.map_or(0.0, |k| coarse.samples[k].ratio);
    let c1_fine = fine.max.map_or(0.0, |k| fine.samples[k].ratio);
    report.set_constant("c1", c1);
    report.set_constant("c1_refined", c1_fine);
    if let Some(k) = coarse.max {
        report.set_witness("argmax", witness(&coarse.samples[k]));
    }
    let drift = relative_drift(c1, c1_fine);
    report.drift = Some(drift);
    if coarse.samples.is_empty() {
        report.notes.push("scan produced no rows".into());
    }
    report.verdict = Some(c1.is_finite() && drift <= DRIFT_LIMIT && !coarse.samples.is_empty());
    Ok(ScanResult { report, samples: coarse.samples })
}

/// `c = max(sup ratio, 1/inf ratio)` with `ratio = q / (t^{-d/(2α)} ∧ t/r^{d+2α})`.
pub fn two_sided_ratio_scan(q: &Evaluator<'_>, alpha: f64, d: usize, scan: &ScanGrid) -> Result<ScanResult> {
    if !(alpha > 0.0 && alpha < 1.0) || d == 0 {
        return Err(domain(format!("need alpha in (0,1) and d ≥ 1, got {alpha}, {d}")));
    }
    let df = d as f64;
    let shape = move |t: f64, r: f64| bound_shape(t, r, df / (2.0 * alpha), df + 2.0 * alpha);
    // nonpositive values break the lower bound; count them as failures
    let positive = |t: f64, x: &[f64], y: &[f64]| {
        let v = q(t, x, y)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(domain(format!("kernel not positive ({v:e}) at t={t}")))
        }
    };
    let run = |s: &ScanGrid| extremes(sample(&positive, s, shape));
    let c_of = |e: &Extremes| match (e.max, e.min) {
        (Some(a), Some(b)) => e.samples[a].ratio.max(1.0 / e.samples[b].ratio),
        _ => f64::INFINITY,
    };
    let coarse = run(scan);
    let fine = run(&scan.refined());
    let mut report = BoundReport::new("two_sided");
    report.set_constant("alpha", alpha);
    report.set_constant("d", df);
    report.samples = coarse.samples.len();
    report.failures = coarse.failures;
    let c = c_of(&coarse);
    let c_fine = c_of(&fine);
    report.set_constant("c", c);
    report.set_constant("c_refined", c_fine);
    if let (Some(a), Some(b)) = (coarse.max, coarse.min) {
        report.set_constant("sup_ratio", coarse.samples[a].ratio);
        report.set_constant("inf_ratio", coarse.samples[b].ratio);
        report.set_witness("argmax", witness(&coarse.samples[a]));
        report.set_witness("argmin", witness(&coarse.samples[b]));
    } else {
        report.notes.push("scan produced no rows".into());
    }
    let drift = relative_drift(c, c_fine);
    report.drift = Some(drift);
    report.verdict = Some(c.is_finite() && drift <= DRIFT_LIMIT);
    Ok(ScanResult { report, samples: coarse.samples })
}
