use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::fit::least_squares;
use super::report::{BoundReport, FittedExponent, Witness};
use super::scan::DRIFT_LIMIT;
use crate::base_kernel::{assemble_operator, CoefficientField, DiscreteEllipticOperator, KernelField, MatrixField};
use crate::error::{domain, Error, Result};
use crate::subordination::spectral_oracle;

/// Induced operator norm on the volume-weighted grid `L^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NormSelector {
    One,
    Two,
    Infinity,
}

impl NormSelector {
    pub fn name(self) -> &'static str {
        match self {
            NormSelector::One => "1",
            NormSelector::Two => "2",
            NormSelector::Infinity => "inf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "1" => Some(NormSelector::One),
            "2" => Some(NormSelector::Two),
            "inf" | "infinity" | "∞" => Some(NormSelector::Infinity),
            _ => None,
        }
    }

    pub fn all() -> [NormSelector; 3] {
        [NormSelector::One, NormSelector::Two, NormSelector::Infinity]
    }
}

/// Subsamples per axis when clipping a 2D cell against a ball.
const CELL_SUBSAMPLES: usize = 8;

/// `sup_k Σ_{i,j} ( ∫_{D_k} |a_ij - a2_ij|² dx )^{1/2}` over integer lattice points
/// `k` whose ball `D_k = {|x - k| < 2√d}` meets the domain.
///
/// Each node owns its grid cell clipped to the domain. In 1D the cell-ball
/// overlap is exact; in 2D it is the midpoint rule on an 8×8 subdivision.
pub fn l2loc_norm(a: &CoefficientField<f64>, a2: &CoefficientField<f64>) -> Result<f64> {
    field_distance(a.field(), a2.field())
}

pub(crate) fn field_distance(a: &MatrixField<f64>, b: &MatrixField<f64>) -> Result<f64> {
    let grid = a.grid();
    if !grid.conforms(b.grid()) {
        return Err(domain("coefficient fields live on different grids"));
    }
    let d = grid.dim();
    let radius = 2.0 * (d as f64).sqrt();
    // squared entry differences; off-diagonal entries count for a_12 and a_21
    let sq: Vec<[f64; 4]> = (0..grid.len())
        .map(|i| {
            let (p, q) = (a.at(i), b.at(i));
            if d == 1 {
                [(p.xx - q.xx).powi(2), 0.0, 0.0, 0.0]
            } else {
                let off = (p.xy - q.xy).powi(2);
                [(p.xx - q.xx).powi(2), off, off, (p.yy - q.yy).powi(2)]
            }
        })
        .collect();
    let lo: Vec<f64> = grid.origin().to_vec();
    let hi: Vec<f64> = lo.iter().zip(grid.extent()).map(|(o, e)| o + e).collect();
    let ks: Vec<Vec<i64>> = {
        let ranges: Vec<(i64, i64)> =
            (0..d).map(|ax| ((lo[ax] - radius).floor() as i64, (hi[ax] + radius).ceil() as i64)).collect();
        if d == 1 {
            (ranges[0].0..=ranges[0].1).map(|k| vec![k]).collect()
        } else {
            (ranges[1].0..=ranges[1].1).flat_map(|k1| (ranges[0].0..=ranges[0].1).map(move |k0| vec![k0, k1])).collect()
        }
    };
    let h = grid.spacing();
    let mut best = 0.0_f64;
    for k in ks {
        let mut integrals = [0.0_f64; 4];
        let mut touched = false;
        for (i, row) in sq.iter().enumerate() {
            let c = grid.coords(i);
            let cell: Vec<(f64, f64)> =
                (0..d).map(|ax| ((c[ax] - h[ax] / 2.0).max(lo[ax]), (c[ax] + h[ax] / 2.0).min(hi[ax]))).collect();
            let overlap = if d == 1 {
                let kk = k[0] as f64;
                ((cell[0].1).min(kk + radius) - (cell[0].0).max(kk - radius)).max(0.0)
            } else {
                let m = CELL_SUBSAMPLES;
                let (wx, wy) = ((cell[0].1 - cell[0].0) / m as f64, (cell[1].1 - cell[1].0) / m as f64);
                let mut area = 0.0;
                for sy in 0..m {
                    for sx in 0..m {
                        let px = cell[0].0 + (sx as f64 + 0.5) * wx;
                        let py = cell[1].0 + (sy as f64 + 0.5) * wy;
                        if (px - k[0] as f64).hypot(py - k[1] as f64) < radius {
                            area += wx * wy;
                        }
                    }
                }
                area
            };
            if overlap > 0.0 {
                touched = true;
                for (acc, v) in integrals.iter_mut().zip(row) {
                    *acc += v * overlap;
                }
            }
        }
        if touched {
            best = best.max(integrals.iter().map(|v| v.sqrt()).sum());
        }
    }
    Ok(best)
}

fn weighted_difference(a: &DMatrix<f64>, b: &DMatrix<f64>, vol: f64) -> DMatrix<f64> {
    (a - b) * vol
}

/// Induced norm of `Q_t - Q̃_t` with both semigroups from the spectral oracle.
pub fn semigroup_distance(
    op_a: &DiscreteEllipticOperator<f64>,
    op_b: &DiscreteEllipticOperator<f64>,
    alpha: f64,
    t: f64,
    p: NormSelector,
) -> Result<f64> {
    if op_a.dim() != op_b.dim() || (op_a.cell_volume() - op_b.cell_volume()).abs() > 1e-14 * op_a.cell_volume() {
        return Err(domain("operators live on different grids"));
    }
    if let (Some(ga), Some(gb)) = (op_a.grid(), op_b.grid()) {
        if !ga.conforms(gb) {
            return Err(domain("operators live on different grids"));
        }
    }
    let qa = spectral_oracle(op_a, alpha, t)?;
    let qb = spectral_oracle(op_b, alpha, t)?;
    Ok(matrix_norm(&weighted_difference(qa.matrix(), qb.matrix(), op_a.cell_volume()), p))
}

/// Induced norm of an operator matrix acting on grid functions.
pub fn matrix_norm(m: &DMatrix<f64>, p: NormSelector) -> f64 {
    match p {
        NormSelector::Infinity => m.row_iter().map(|r| r.abs().sum()).fold(0.0, f64::max),
        NormSelector::One => m.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max),
        NormSelector::Two => {
            if m.is_empty() {
                0.0
            } else {
                m.clone().svd(false, false).singular_values.max()
            }
        }
    }
}

/// `max |qA - qB|` over all samples, with its `(t, x, y)` witness.
pub fn kernel_distance_sup(qa: &KernelField<f64>, qb: &KernelField<f64>) -> Result<(f64, Witness)> {
    let (d, k, i, j) = qa.max_abs_diff(qb)?;
    let t = qa.times()[k];
    let (x, y) = match qa.grid() {
        Some(g) => (g.coords(i), g.coords(j)),
        None => (vec![i as f64], vec![j as f64]),
    };
    Ok((d, Witness::new(t, x, y, d)))
}

/// Settings of a stability sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityDesign {
    pub epsilons: Vec<f64>,
    pub alpha: f64,
    pub times: Vec<f64>,
    pub norms: Vec<NormSelector>,
}

/// One `(ε, t)` row of a stability sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub epsilon: f64,
    pub z: f64,
    pub t: f64,
    pub norm_1: Option<f64>,
    pub norm_2: Option<f64>,
    pub norm_inf: Option<f64>,
    pub kernel_sup: f64,
    pub kernel_witness: Witness,
}

impl StabilityRow {
    pub fn get(&self, p: NormSelector) -> Option<f64> {
        match p {
            NormSelector::One => self.norm_1,
            NormSelector::Two => self.norm_2,
            NormSelector::Infinity => self.norm_inf,
        }
    }
}

/// Outcome of [`stability_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityResult {
    pub report: BoundReport,
    pub rows: Vec<StabilityRow>,
}

fn sweep(
    base: &CoefficientField<f64>,
    op0: &DiscreteEllipticOperator<f64>,
    direction: &MatrixField<f64>,
    design: &StabilityDesign,
    notes: &mut Vec<String>,
) -> Result<Vec<StabilityRow>> {
    let mut rows = Vec::new();
    let base_kernels: Vec<KernelField<f64>> =
        design.times.iter().map(|&t| spectral_oracle(op0, design.alpha, t)).collect::<Result<_>>()?;
    for &eps in &design.epsilons {
        let pert = match base.perturbed(direction, eps) {
            Ok(p) => p,
            Err(e @ Error::Ellipticity { .. }) => {
                notes.push(format!("epsilon {eps} skipped: {e}"));
                continue;
            }
            Err(e) => return Err(e),
        };
        let z = l2loc_norm(base, &pert)?;
        let op = assemble_operator(base.grid(), &pert)?;
        for (ti, &t) in design.times.iter().enumerate() {
            let q = spectral_oracle(&op, design.alpha, t)?;
            let diff = weighted_difference(base_kernels[ti].matrix(), q.matrix(), op0.cell_volume());
            let norm = |p: NormSelector| design.norms.contains(&p).then(|| matrix_norm(&diff, p));
            let (ks, w) = kernel_distance_sup(&base_kernels[ti], &q)?;
            rows.push(StabilityRow {
                epsilon: eps,
                z,
                t,
                norm_1: norm(NormSelector::One),
                norm_2: norm(NormSelector::Two),
                norm_inf: norm(NormSelector::Infinity),
                kernel_sup: ks,
                kernel_witness: w,
            });
        }
    }
    Ok(rows)
}

/// Fit of `D ≤ C (1 + t^{-γ/α}) z^δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeFit {
    pub log_c: f64,
    pub gamma: f64,
    pub delta: f64,
    pub r_squared: f64,
    /// Smallest `C` with every sample under the envelope.
    pub c_envelope: f64,
}

const GAMMA_GRID: usize = 201;
const GAMMA_MAX: f64 = 2.0;

/// Log-space least squares for `ln D = ln C + ln(1 + t^{-γ/α}) + δ ln z`:
/// grid search in `γ ∈ [0, 2]`, linear in `(ln C, δ)` for each `γ`.
pub fn fit_envelope(samples: &[(f64, f64, f64)], alpha: f64) -> Option<EnvelopeFit> {
    let pts: Vec<&(f64, f64, f64)> = samples.iter().filter(|(_, z, d)| *z > 0.0 && *d > 0.0).collect();
    if pts.len() < 3 {
        return None;
    }
    let mut best: Option<(f64, EnvelopeFit)> = None;
    for g in 0..GAMMA_GRID {
        let gamma = GAMMA_MAX * g as f64 / (GAMMA_GRID - 1) as f64;
        let x = DMatrix::from_fn(pts.len(), 2, |i, j| if j == 0 { 1.0 } else { pts[i].1.ln() });
        let y =
            DVector::from_iterator(pts.len(), pts.iter().map(|(t, _, d)| d.ln() - (1.0 + t.powf(-gamma / alpha)).ln()));
        let Some((beta, _)) = least_squares(&x, &y) else { continue };
        let sse = (&y - &x * &beta).norm_squared();
        // R² of the whole model against the spread of ln D, not of the detrended y
        let mean = pts.iter().map(|p| p.2.ln()).sum::<f64>() / pts.len() as f64;
        let sst: f64 = pts.iter().map(|p| (p.2.ln() - mean).powi(2)).sum();
        let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
        if best.as_ref().is_none_or(|(b, _)| sse < *b) {
            let c_env =
                pts.iter().map(|(t, z, d)| d / ((1.0 + t.powf(-gamma / alpha)) * z.powf(beta[1]))).fold(0.0, f64::max);
            best = Some((sse, EnvelopeFit { log_c: beta[0], gamma, delta: beta[1], r_squared: r2, c_envelope: c_env }));
        }
    }
    best.map(|(_, f)| f)
}

/// Sup-form fit `|q - q̃|_∞ t^{d/(2α)} ≈ c t^{-γ/α} z^δ`, linear in `(ln c, γ, δ)`.
fn fit_kernel(rows: &[StabilityRow], alpha: f64, d: f64) -> Option<(f64, f64, f64, f64)> {
    let pts: Vec<&StabilityRow> = rows.iter().filter(|r| r.z > 0.0 && r.kernel_sup > 0.0).collect();
    if pts.len() < 4 {
        return None;
    }
    let x = DMatrix::from_fn(pts.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => -pts[i].t.ln() / alpha,
        _ => pts[i].z.ln(),
    });
    let y = DVector::from_iterator(pts.len(), pts.iter().map(|r| r.kernel_sup.ln() + d / (2.0 * alpha) * r.t.ln()));
    let (b, r2) = least_squares(&x, &y)?;
    Some((b[0], b[1], b[2], r2))
}

fn is_monotone(rows: &[StabilityRow], t: f64, value: impl Fn(&StabilityRow) -> Option<f64>) -> bool {
    // rows are in the order of the epsilons; compare along decreasing ε
    let mut seq: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.t == t).filter_map(|r| value(r).map(|v| (r.epsilon, v))).collect();
    seq.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite epsilon"));
    seq.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + DRIFT_LIMIT) + 1e-15)
}

fn densified(eps: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = eps.iter().copied().filter(|e| *e > 0.0).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite epsilon"));
    let mut out = Vec::new();
    for w in sorted.windows(2) {
        out.push(w[0]);
        out.push((w[0] * w[1]).sqrt());
    }
    out.extend(sorted.last());
    out
}

/// Coefficient-stability sweep: for each `ε`, `z = ‖a - a_ε‖_{L²_loc}` and the
/// distances between the semigroups of `a` and `a_ε = a + ε·direction`.
///
/// The verdict needs, per norm, `δ̂ ∈ (0, 1.05]`, `R² ≥ 0.9`, a largest-to-smallest
/// distance ratio of at least 10, monotone decay in `ε` within 5%, every distance
/// ≤ 2, and a refitted `δ̂` (ε list densified ×2) within 5%.
pub fn stability_experiment(
    base: &CoefficientField<f64>,
    direction: &MatrixField<f64>,
    design: &StabilityDesign,
) -> Result<StabilityResult> {
    let alpha = design.alpha;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if design.epsilons.iter().any(|e| !(*e >= 0.0)) || design.times.iter().any(|t| !(*t > 0.0)) {
        return Err(domain("epsilons must be nonnegative and times positive"));
    }
    let op0 = assemble_operator(base.grid(), base)?;
    let mut report = BoundReport::new("stability");
    report.set_constant("alpha", alpha);
    let mut notes = Vec::new();
    let rows = sweep(base, &op0, direction, design, &mut notes)?;
    report.samples = rows.len();
    report.notes.extend(notes);
    let d = base.grid().dim() as f64;

    let all_distances = |r: &StabilityRow| {
        design.norms.iter().filter_map(|&p| r.get(p)).chain(std::iter::once(r.kernel_sup)).collect::<Vec<_>>()
    };
    let max_distance = rows.iter().flat_map(all_distances).fold(0.0, f64::max);
    report.set_constant("max_distance", max_distance);
    let ceiling_ok = rows.iter().all(|r| design.norms.iter().filter_map(|&p| r.get(p)).all(|v| v <= 2.0 + 1e-8));

    if rows.is_empty() {
        report.verdict = Some(false);
        report.notes.push("no admissible epsilon".into());
        return Ok(StabilityResult { report, rows });
    }
    if max_distance == 0.0 {
        report.verdict = Some(ceiling_ok);
        report.notes.push("all distances vanish".into());
        return Ok(StabilityResult { report, rows });
    }

    let mut ok = ceiling_ok;
    for &t in &design.times {
        for &p in &design.norms {
            ok &= is_monotone(&rows, t, |r| r.get(p));
        }
        ok &= is_monotone(&rows, t, |r| Some(r.kernel_sup));
    }
    report.set_constant("monotone", if ok { 1.0 } else { 0.0 });

    let refit = |rows: &[StabilityRow], p: NormSelector| {
        let s: Vec<(f64, f64, f64)> = rows.iter().filter_map(|r| r.get(p).map(|v| (r.t, r.z, v))).collect();
        fit_envelope(&s, alpha)
    };
    let mut fine_notes = Vec::new();
    let fine_design = StabilityDesign { epsilons: densified(&design.epsilons), ..design.clone() };
    let fine_rows = sweep(base, &op0, direction, &fine_design, &mut fine_notes)?;
    let mut drift: f64 = 0.0;
    for &p in &design.norms {
        let key = format!("p{}", p.name());
        let Some(fit) = refit(&rows, p) else {
            ok = false;
            report.notes.push(format!("norm {} fit failed", p.name()));
            continue;
        };
        report.exponents.insert(format!("delta_{key}"), FittedExponent { value: fit.delta, r_squared: fit.r_squared });
        report.exponents.insert(format!("gamma_{key}"), FittedExponent { value: fit.gamma, r_squared: fit.r_squared });
        report.set_constant(&format!("C_fit_{key}"), fit.log_c.exp());
        report.set_constant(&format!("C_envelope_{key}"), fit.c_envelope);
        let vals: Vec<f64> = rows.iter().filter_map(|r| r.get(p)).filter(|v| *v > 0.0).collect();
        let ratio = vals.iter().copied().fold(0.0, f64::max) / vals.iter().copied().fold(f64::INFINITY, f64::min);
        report.set_constant(&format!("decay_ratio_{key}"), ratio);
        ok &= fit.delta > 0.0 && fit.delta <= 1.05 && fit.r_squared >= 0.9 && ratio >= 10.0;
        if let Some(ff) = refit(&fine_rows, p) {
            drift = drift.max((ff.delta - fit.delta).abs() / fit.delta.abs());
        }
    }
    report.drift = Some(drift);
    ok &= drift <= DRIFT_LIMIT;

    // kernel distance in the sup-over-(x,y) form
    if let Some((log_c, g_over, delta, r2)) = fit_kernel(&rows, alpha, d) {
        report.exponents.insert("delta_kernel".into(), FittedExponent { value: delta, r_squared: r2 });
        report.exponents.insert("gamma_kernel".into(), FittedExponent { value: g_over, r_squared: r2 });
        report.set_constant("C_fit_kernel", log_c.exp());
    }
    if let Some(worst) = rows.iter().max_by(|a, b| a.kernel_sup.partial_cmp(&b.kernel_sup).expect("finite")) {
        report.set_witness("kernel_argmax", worst.kernel_witness.clone());
    }
    report.verdict = Some(ok);
    Ok(StabilityResult { report, rows })
}
