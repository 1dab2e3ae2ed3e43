//! The acceptance suite: one check per criterion, each returning a verdict, a
//! one-line summary and the data it was decided on.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::base_kernel::{assemble_operator, Boundary, CoefficientField, Grid};
use crate::cli_report::{execute, parse_config, Cell, Table};
use crate::error::Result;
use crate::scalar::log_space;
use crate::subordination::{
    generator_apply, spectral_generator, spectral_oracle, subordinate_matrix, subordinate_pointwise, GaussianBase,
    QuadratureSpec, SubordinationRule,
};
use crate::subordinator::StableParams;
use crate::verify::NormSelector;

pub const LAPLACE_TOL: f64 = 1e-6;
pub const LEVY_REL_TOL: f64 = 1e-8;
pub const MASS_TOL: f64 = 1e-6;
pub const TAIL_RATIO_TOL: f64 = 1e-3;
pub const POISSON_REL_TOL: f64 = 1e-6;
pub const ORACLE_TOL: f64 = 1e-6;
pub const GENERATOR_TOL: f64 = 1e-6;
pub const CONSTANT_REL_TOL: f64 = 0.02;
pub const DRIFT_TOL: f64 = 0.05;
pub const R2_MIN: f64 = 0.9;
pub const DELTA_MAX: f64 = 1.05;
pub const CONTRACTION_CEILING: f64 = 2.0;
pub const SUITE_BUDGET_SECONDS: f64 = 480.0;

const ALPHAS: [f64; 4] = [0.3, 0.5, 0.7, 0.9];

/// Result of one criterion.
#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: Option<f64>,
    pub data: Table,
}

impl CriterionOutcome {
    /// `PASS  1  title  (0.12 s)  detail`
    pub fn line(&self) -> String {
        format!(
            "{}  {:>2}  {:<32} ({:.2} s)  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds,
            self.detail
        )
    }

    pub fn file_name(&self) -> String {
        format!("criterion_{:02}.csv", self.id)
    }
}

type Check = fn() -> Result<(bool, String, Table)>;

pub struct Criterion {
    pub id: usize,
    pub title: &'static str,
    pub budget_seconds: Option<f64>,
    check: Check,
}

/// Criteria 1 to 9; criterion 10 is [`determinism`], which needs their outcomes.
pub fn criteria() -> Vec<Criterion> {
    let c = |id, title, budget, check| Criterion { id, title, budget_seconds: budget, check };
    vec![
        c(1, "Laplace identity", Some(10.0), laplace_identity as Check),
        c(2, "Levy oracle", Some(10.0), levy_oracle),
        c(3, "Normalization and envelope", None, normalization_and_envelope),
        c(4, "Poisson-kernel oracle", Some(30.0), poisson_oracle),
        c(5, "Spectral-oracle equivalence", Some(60.0), spectral_equivalence),
        c(6, "Generator formula", Some(30.0), generator_formula),
        c(7, "Gradient estimate", Some(120.0), gradient_estimate),
        c(8, "Two-sided and Holder bounds", None, two_sided_and_holder),
        c(9, "Stability", Some(180.0), stability),
    ]
}

/// Runs one criterion; an error or a blown time budget is a failure.
pub fn run(c: &Criterion) -> CriterionOutcome {
    let start = Instant::now();
    let res = (c.check)();
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail, data) = match res {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}"), Table::default()),
    };
    if let Some(b) = c.budget_seconds {
        if seconds > b {
            passed = false;
            detail.push_str(&format!("; runtime {seconds:.1} s exceeds {b} s"));
        }
    }
    CriterionOutcome { id: c.id, title: c.title, passed, detail, seconds, budget_seconds: c.budget_seconds, data }
}

/// Runs every criterion in order, calling `report` as each finishes.
pub fn run_all(mut report: impl FnMut(&CriterionOutcome)) -> Vec<CriterionOutcome> {
    let mut out = Vec::new();
    for c in criteria() {
        let o = run(&c);
        report(&o);
        out.push(o);
    }
    let o = determinism(&out);
    report(&o);
    out.push(o);
    out
}

fn table(columns: &[&str], rows: Vec<Vec<f64>>) -> Table {
    let mut t = Table::new(columns);
    for r in rows {
        t.push(r.into_iter().map(Cell::from).collect());
    }
    t
}

fn laplace_identity() -> Result<(bool, String, Table)> {
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for alpha in ALPHAS {
        let p = StableParams::new(alpha)?;
        for u in [0.5, 1.0, 2.0, 5.0] {
            let (l, exact) = (p.laplace_check(u)?, (-u.powf(alpha)).exp());
            worst = worst.max((l - exact).abs());
            rows.push(vec![alpha, u, l, exact, (l - exact).abs()]);
        }
    }
    Ok((
        worst <= LAPLACE_TOL,
        format!("max |error| {worst:.2e} (tol {LAPLACE_TOL:e})"),
        table(&["alpha", "u", "laplace", "exact", "abs_error"], rows),
    ))
}

fn levy_oracle() -> Result<(bool, String, Table)> {
    let p = StableParams::new(0.5)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for s in log_space(0.01_f64, 100.0, 200) {
        let exact = (-0.25 / s).exp() / (2.0 * PI.sqrt() * s.powf(1.5));
        let g = p.density(s)?;
        let rel = (g / exact - 1.0).abs();
        worst = worst.max(rel);
        rows.push(vec![s, g, exact, rel]);
    }
    Ok((
        worst <= LEVY_REL_TOL,
        format!("max rel error {worst:.2e} over 200 points (tol {LEVY_REL_TOL:e})"),
        table(&["s", "g", "levy", "rel_error"], rows),
    ))
}

fn normalization_and_envelope() -> Result<(bool, String, Table)> {
    let mut rows = Vec::new();
    let mut ok = true;
    let mut notes = Vec::new();
    for alpha in ALPHAS {
        let p = StableParams::new(alpha)?;
        let mass = p.mass()?;
        let envelope = p.envelope_constant(&log_space(1e-3_f64, 1e8, 221))?;
        let s = 1e4;
        let tail = p.density(s)? * s.powf(1.0 + alpha) / p.b_const() - 1.0;
        let mass_ok = (mass - 1.0).abs() <= MASS_TOL;
        let tail_ok = tail.abs() <= TAIL_RATIO_TOL;
        ok &= mass_ok && envelope.is_finite() && tail_ok;
        if !mass_ok {
            notes.push(format!("mass {mass} at α={alpha}"));
        }
        if !tail_ok {
            notes.push(format!("tail ratio - 1 = {tail:+.2e} at α={alpha}"));
        }
        rows.push(vec![alpha, mass, envelope, tail]);
    }
    let detail = if notes.is_empty() {
        "mass within 1e-6, envelope finite, tail ratio within 1e-3 for all α".to_string()
    } else {
        notes.join("; ")
    };
    Ok((ok, detail, table(&["alpha", "mass", "envelope", "tail_ratio_minus_one"], rows)))
}

fn poisson_oracle() -> Result<(bool, String, Table)> {
    let rule = SubordinationRule::with_defaults(StableParams::new(0.5)?)?;
    let base = GaussianBase { dim: 1 };
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for t in [0.1, 1.0, 10.0] {
        for k in 0..20 {
            let r = 10.0 * k as f64 / 19.0;
            let q = subordinate_pointwise(&base, &rule, t, &[r], &[0.0])?;
            let exact = t / (PI * (t * t + r * r));
            let rel = (q / exact - 1.0).abs();
            worst = worst.max(rel);
            rows.push(vec![t, r, q, exact, rel]);
        }
    }
    Ok((
        worst <= POISSON_REL_TOL,
        format!("max rel error {worst:.2e} on 60 points (tol {POISSON_REL_TOL:e})"),
        table(&["t", "r", "quadrature", "poisson", "rel_error"], rows),
    ))
}

fn checkerboard_grid_op(boundary: Boundary) -> Result<crate::base_kernel::DiscreteEllipticOperator<f64>> {
    let grid = Grid::line(8.0, 64, boundary)?;
    assemble_operator(&grid, &CoefficientField::checkerboard(&grid, 2.0, 1.0)?)
}

fn spectral_equivalence() -> Result<(bool, String, Table)> {
    let op = checkerboard_grid_op(Boundary::Dirichlet)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for alpha in [0.3, 0.5, 0.7] {
        let rule = SubordinationRule::with_defaults(StableParams::new(alpha)?)?;
        for t in [0.1, 1.0, 10.0] {
            let (d, ..) = subordinate_matrix(&op, &rule, t)?.max_abs_diff(&spectral_oracle(&op, alpha, t)?)?;
            worst = worst.max(d);
            rows.push(vec![alpha, t, d]);
        }
    }
    Ok((
        worst <= ORACLE_TOL,
        format!("max discrepancy {worst:.2e} (tol {ORACLE_TOL:e})"),
        table(&["alpha", "t", "max_abs_diff"], rows),
    ))
}

fn generator_formula() -> Result<(bool, String, Table)> {
    let op = checkerboard_grid_op(Boundary::Dirichlet)?;
    let spec = op.spectrum()?;
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    // inputs 0-4 are eigenvectors, 5-6 random grid functions
    let mut inputs: Vec<DVector<f64>> = (0..5).map(|k| spec.vectors.column(k).into_owned()).collect();
    for _ in 0..2 {
        inputs.push(DVector::from_fn(n, |_, _| rng.gen_range(-1.0..=1.0)));
    }
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for alpha in [0.3, 0.5, 0.7] {
        let quad = QuadratureSpec::for_alpha(&StableParams::new(alpha)?);
        for (fi, f) in inputs.iter().enumerate() {
            let a = generator_apply(&op, alpha, f, &quad)?;
            let b = spectral_generator(&op, alpha, f)?;
            let d = (a - &b).amax();
            worst = worst.max(d);
            rows.push(vec![alpha, fi as f64, d, b.amax()]);
        }
    }
    Ok((
        worst <= GENERATOR_TOL,
        format!("max discrepancy {worst:.2e} over 5 eigenvectors + 2 random functions × 3 α (tol {GENERATOR_TOL:e})"),
        table(&["alpha", "input", "max_abs_diff", "max_abs_value"], rows),
    ))
}

/// Config of the free-space Poisson scans (α = 1/2, d = 1).
const FREE_SCAN: &str = "\
[stable]
alpha = 0.5
[quadrature]
abs_tol = 1e-30
[scan]
base = gaussian
t_min = 0.01
t_max = 100
r_min = 0.01
r_max = 10000
per_decade = 4
";

/// Variable-coefficient grid: checkerboard λ = 2 on a Neumann segment.
const GRID: &str = "\
[grid]
extent = 64
points = 1024
boundary = neumann
[coefficients]
preset = checkerboard
lambda = 2
cell = 1
";

const GRID_SCAN: &str = "\
[scan]
base = grid
t_min = 0.1
t_max = 100
r_min = 0.001
r_max = 64
per_decade = 4
";

fn run_config(kind: &str, text: &str) -> Result<crate::cli_report::Outcome> {
    execute(&parse_config(&format!("[experiment]\nkind = {kind}\n{text}"))?)
}

fn drift_ok(report: &crate::verify::BoundReport) -> (bool, f64) {
    let d = report.drift.unwrap_or(f64::INFINITY);
    (d <= DRIFT_TOL, d)
}

fn gradient_estimate() -> Result<(bool, String, Table)> {
    let free = run_config("gradient-verify", FREE_SCAN)?;
    let c1 = free.report.constant("c1").unwrap_or(f64::NAN);
    let target = 2.0 / PI;
    let free_ok = (c1 / target - 1.0).abs() <= CONSTANT_REL_TOL;

    let grid = run_config(
        "gradient-verify",
        &format!("[stable]\nalpha = 0.5\n[quadrature]\nabs_tol = 1e-30\n{GRID}{GRID_SCAN}"),
    )?;
    let c1g = grid.report.constant("c1").unwrap_or(f64::NAN);
    let (dok, drift) = drift_ok(&grid.report);
    let grid_ok = c1g.is_finite() && dok;
    Ok((
        free_ok && grid_ok,
        format!("free c1 = {c1:.5} (2/π = {target:.5}); grid c1 = {c1g:.4}, drift {:.2}%", 100.0 * drift),
        free.data,
    ))
}

fn two_sided_and_holder() -> Result<(bool, String, Table)> {
    let free = run_config("two-sided-verify", FREE_SCAN)?;
    let c = free.report.constant("c").unwrap_or(f64::NAN);
    let free_ok = (c / (2.0 * PI) - 1.0).abs() <= CONSTANT_REL_TOL;

    let grid = run_config(
        "two-sided-verify",
        &format!("[stable]\nalpha = 0.5\n[quadrature]\nabs_tol = 1e-30\n{GRID}{GRID_SCAN}"),
    )?;
    let cg = grid.report.constant("c").unwrap_or(f64::NAN);
    let (dok, drift) = drift_ok(&grid.report);
    let grid_ok = cg.is_finite() && dok;

    let holder = run_config(
        "holder-verify",
        "[stable]\nalpha = 0.5\n[grid]\nextent = 8\npoints = 257\nboundary = neumann\n\
         [coefficients]\npreset = checkerboard\nlambda = 2\ncell = 1\n\
         [holder]\nbase = grid\ntimes = 0.5, 1, 2\ndelta_min = 0.03125\ndelta_max = 1\ndelta_count = 11\n\
         anchors = 3.3 | 4.1; 5.2 | 2.5\n",
    )?;
    let g = holder.report.exponents.get("gamma").copied();
    let holder_ok = g.is_some_and(|g| g.value > 0.0 && g.value <= 1.0 && g.r_squared >= R2_MIN);
    let g_text = g.map_or("no fit".to_string(), |g| format!("γ̂ = {:.3}, R² = {:.3}", g.value, g.r_squared));
    Ok((
        free_ok && grid_ok && holder_ok,
        format!(
            "free c = {c:.4} (2π = {:.4}); grid c = {cg:.3}, drift {:.2}%; Hölder {g_text}",
            2.0 * PI,
            100.0 * drift
        ),
        free.data,
    ))
}

/// The stability sweep shared by criterion 9 and the examples.
pub const STABILITY_CONFIG: &str = "\
[stable]
alpha = 0.5
[grid]
extent = 32
points = 128
boundary = neumann
[coefficients]
preset = identity
lambda = 2
[stability]
epsilons = 0.4, 0.2, 0.1, 0.05, 0.025
times = 0.1, 1, 10
norms = 1, 2, inf
direction = checkerboard-cells
direction_cell = 1
";

fn stability() -> Result<(bool, String, Table)> {
    let o = run_config("stability", STABILITY_CONFIG)?;
    let rep = &o.report;
    let monotone = rep.constant("monotone") == Some(1.0);
    let mut ok = monotone;
    let mut parts = Vec::new();
    for p in NormSelector::all() {
        let key = format!("p{}", p.name());
        match rep.exponents.get(&format!("delta_{key}")) {
            Some(d) => {
                ok &= d.value > 0.0 && d.value <= DELTA_MAX && d.r_squared >= R2_MIN;
                parts.push(format!("p={}: δ̂ {:.3} R² {:.3}", p.name(), d.value, d.r_squared));
            }
            None => {
                ok = false;
                parts.push(format!("p={}: no fit", p.name()));
            }
        }
    }
    // every operator-norm distance under the contraction ceiling
    let max_norm = o
        .data
        .rows
        .iter()
        .flat_map(|r| r[3..6].iter())
        .filter_map(|c| if let Cell::Num(v) = c { Some(*v) } else { None })
        .fold(0.0, f64::max);
    ok &= max_norm <= CONTRACTION_CEILING;
    Ok((ok, format!("monotone {monotone}; {}; max distance {max_norm:.3}", parts.join(", ")), o.data))
}

/// Criterion 10: data regenerated in a fresh run and in a one-thread pool is
/// byte-identical, and the suite fits its time budget.
pub fn determinism(previous: &[CriterionOutcome]) -> CriterionOutcome {
    let start = Instant::now();
    let mut problems = Vec::new();
    // cheap criteria again
    for c in criteria().into_iter().filter(|c| matches!(c.id, 1 | 2 | 4)) {
        let again = run(&c);
        let first = previous.iter().find(|o| o.id == c.id);
        let same = first.is_some_and(|f| f.data.to_csv().ok() == again.data.to_csv().ok());
        if !same {
            problems.push(format!("criterion {} data differs on rerun", c.id));
        }
    }
    // every experiment kind, default pool against a single thread
    let configs = [
        ("density", "[stable]\nalpha = 0.7\n[density]\npoints = 40\n"),
        ("laplace-check", "[stable]\nalpha = 0.3\n"),
        ("kernel", "[stable]\nalpha = 0.5\n[grid]\npoints = 24\n[coefficients]\npreset = random\n[kernel]\ntimes = 0.5\n"),
        ("oracle-compare", "[stable]\nalpha = 0.5\n[grid]\npoints = 24\n[kernel]\ntimes = 1\n"),
        ("gradient-verify", "[stable]\nalpha = 0.5\n[scan]\nt_min = 0.1\nr_max = 100\nper_decade = 5\n"),
        ("two-sided-verify", "[stable]\nalpha = 0.7\n[scan]\nt_min = 0.1\nr_max = 100\nper_decade = 5\n"),
        ("holder-verify", "[stable]\nalpha = 0.5\n[holder]\ndelta_count = 5\n"),
        ("stability", "[stable]\nalpha = 0.5\n[grid]\npoints = 32\nboundary = neumann\n[stability]\nepsilons = 0.2, 0.1\ntimes = 1\ndirection = random-sign\n"),
    ];
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build();
    for (kind, text) in configs {
        let csv = || -> Result<Vec<u8>> { run_config(kind, text)?.data.to_csv() };
        let a = csv();
        let b = match &single {
            Ok(pool) => pool.install(csv),
            Err(e) => {
                problems.push(format!("thread pool: {e}"));
                continue;
            }
        };
        match (a, b) {
            (Ok(a), Ok(b)) if a == b => {}
            (Ok(_), Ok(_)) => problems.push(format!("{kind} data depends on the thread count")),
            (Err(e), _) | (_, Err(e)) => problems.push(format!("{kind}: {e}")),
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    let total: f64 = previous.iter().map(|o| o.seconds).sum::<f64>() + seconds;
    if total > SUITE_BUDGET_SECONDS {
        problems.push(format!("suite took {total:.0} s, budget {SUITE_BUDGET_SECONDS} s"));
    }
    let passed = problems.is_empty();
    let detail = if passed {
        format!("reruns byte-identical for 3 criteria and 8 experiment kinds; suite {total:.1} s")
    } else {
        problems.join("; ")
    };
    let mut data = Table::new(&["criterion", "passed"]);
    for o in previous {
        data.push(vec![o.id.into(), (if o.passed { 1usize } else { 0 }).into()]);
    }
    CriterionOutcome {
        id: 10,
        title: "Determinism",
        passed,
        detail,
        seconds,
        budget_seconds: Some(SUITE_BUDGET_SECONDS),
        data,
    }
}
