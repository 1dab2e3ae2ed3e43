use super::kernel::{KernelField, KernelKind};
use crate::scalar::{to_f64, Real};
use crate::verify::{BoundReport, Witness};

/// Relative precision of the bisection in `ln M`.
const BISECTION_STEPS: usize = 60;
/// Entries this far below the largest are eigensolver round-off.
const NOISE_FLOOR: f64 = 1e-10;

struct Sample {
    t: f64,
    i: usize,
    j: usize,
    r2: f64,
    p: f64,
    scale: f64,
}

/// Two-sided Aronson check
/// `(1/M) t^{-d/2} e^{-M r²/t} ≤ p ≤ M t^{-d/2} e^{-r²/(Mt)}` over all samples.
///
/// Returns the smallest `M ∈ [1, trial_m]` (bisection in `ln M`) for which both
/// sides hold. Entries below the noise floor are left out of the lower check
/// when the lower bound at `trial_m` is itself below the floor. An unsatisfiable
/// range gives `verdict = false` and the worst violations.
pub fn aronson_check<T: Real>(kernel: &KernelField<T>, trial_m: T) -> BoundReport {
    let mut report = BoundReport::new("aronson");
    let trial = to_f64(trial_m);
    report.set_constant("trial_M", trial);
    let Some(grid) = kernel.grid() else {
        report.verdict = Some(false);
        report.notes.push("kernel has no grid geometry; distances unknown".into());
        return report;
    };
    if kernel.kind() != KernelKind::Kernel || !(trial >= 1.0) {
        report.verdict = Some(false);
        report.notes.push("needs a kernel field and trial M ≥ 1".into());
        return report;
    }
    let d = grid.dim() as f64;
    let max_abs = kernel.slices().iter().fold(0.0_f64, |m, s| m.max(to_f64(s.amax())));
    let floor = NOISE_FLOOR * max_abs;
    let mut samples = Vec::new();
    for (t, s) in kernel.times().iter().zip(kernel.slices()) {
        let t = to_f64(*t);
        if t <= 0.0 {
            report.notes.push(format!("slice at t={t} skipped"));
            continue;
        }
        for j in 0..s.ncols() {
            for i in 0..s.nrows() {
                samples.push(Sample {
                    t,
                    i,
                    j,
                    r2: to_f64(grid.distance(i, j).powi(2)),
                    p: to_f64(s[(i, j)]),
                    scale: t.powf(-d / 2.0),
                });
            }
        }
    }
    report.samples = samples.len();
    let lower_active: Vec<bool> = samples.iter().map(|s| lower_bound(s, trial) > floor || s.p > floor).collect();

    // worst ratios at a given M: upper p/bound and lower bound/p, both must be ≤ 1
    let worst = |m: f64| -> ((f64, usize), (f64, usize)) {
        let mut up = (0.0_f64, 0);
        let mut lo = (0.0_f64, 0);
        for (k, s) in samples.iter().enumerate() {
            let u = s.p / upper_bound(s, m);
            if u > up.0 {
                up = (u, k);
            }
            if lower_active[k] {
                let l = if s.p > 0.0 { lower_bound(s, m) / s.p } else { f64::INFINITY };
                if l > lo.0 {
                    lo = (l, k);
                }
            }
        }
        (up, lo)
    };
    let slack = 1.0 + 1e-10;
    let holds = |m: f64| {
        let (u, l) = worst(m);
        u.0 <= slack && l.0 <= slack
    };

    let witness = |k: usize| {
        let s = &samples[k];
        Witness::new(
            s.t,
            grid.coords(s.i).into_iter().map(to_f64).collect(),
            grid.coords(s.j).into_iter().map(to_f64).collect(),
            s.p,
        )
    };

    if samples.is_empty() {
        report.verdict = Some(false);
        report.notes.push("no samples".into());
        return report;
    }
    if !holds(trial) {
        let (u, l) = worst(trial);
        report.verdict = Some(false);
        report.set_constant("upper_ratio_at_trial", u.0);
        report.set_constant("lower_ratio_at_trial", l.0);
        report.set_witness("upper", witness(u.1));
        report.set_witness("lower", witness(l.1));
        report.notes.push(format!("bounds fail for every M ≤ {trial}"));
        return report;
    }
    let (mut lo, mut hi) = (0.0_f64, trial.ln());
    if holds(1.0) {
        hi = 0.0;
    } else {
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if holds(mid.exp()) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let m = hi.exp();
    let (u, l) = worst(m);
    report.verdict = Some(true);
    report.set_constant("M", m);
    report.set_constant("upper_ratio", u.0);
    report.set_constant("lower_ratio", l.0);
    report.set_constant("noise_floor", floor);
    report.set_witness("upper", witness(u.1));
    report.set_witness("lower", witness(l.1));
    report
}

fn upper_bound(s: &Sample, m: f64) -> f64 {
    m * s.scale * (-s.r2 / (m * s.t)).exp()
}

fn lower_bound(s: &Sample, m: f64) -> f64 {
    s.scale * (-m * s.r2 / s.t).exp() / m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_kernel::{
        assemble_operator, gaussian_kernel, heat_kernel_matrix, Boundary, CoefficientField, Grid,
    };
    use nalgebra::DMatrix;

    #[test]
    fn exact_gaussian_needs_at_most_four() {
        let g = Grid::line(20.0_f64, 81, Boundary::Neumann).unwrap().with_origin(&[-10.0]).unwrap();
        let mut field = KernelField::from_fn(&g, 0.1, None, |t, x, y| gaussian_kernel(t, x, y).unwrap());
        for t in [0.5, 2.0] {
            field.push(KernelField::from_fn(&g, t, None, |t, x, y| gaussian_kernel(t, x, y).unwrap())).unwrap();
        }
        let r = aronson_check(&field, 100.0);
        assert_eq!(r.verdict, Some(true));
        let m = r.constant("M").unwrap();
        assert!(m <= 4.0 && m > 3.5, "{m}");
    }

    #[test]
    fn zero_kernel_fails_lower_bound() {
        let g = Grid::line(4.0_f64, 9, Boundary::Neumann).unwrap();
        let f = KernelField::new(KernelKind::Kernel, None, 1.0, DMatrix::zeros(9, 9), Some(g), 0.5);
        let r = aronson_check(&f, 1e6);
        assert_eq!(r.verdict, Some(false));
        assert!(r.constant("lower_ratio_at_trial").unwrap().is_infinite());
    }

    fn checkerboard_m(points: usize) -> f64 {
        let g = Grid::line(16.0_f64, points, Boundary::Neumann).unwrap();
        let op = assemble_operator(&g, &CoefficientField::checkerboard(&g, 2.0, 1.0).unwrap()).unwrap();
        let mut field = heat_kernel_matrix(&op, 0.1).unwrap();
        for t in [0.3, 1.0] {
            field.push(heat_kernel_matrix(&op, t).unwrap()).unwrap();
        }
        let r = aronson_check(&field, 1e3);
        assert_eq!(r.verdict, Some(true), "{r:?}");
        r.constant("M").unwrap()
    }

    #[test]
    fn checkerboard_constant_is_refinement_stable() {
        let coarse = checkerboard_m(129);
        let fine = checkerboard_m(257);
        assert!(coarse.is_finite());
        assert!(((fine - coarse) / coarse).abs() < 0.1, "{coarse} vs {fine}");
    }
}
