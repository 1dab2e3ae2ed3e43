//! Experiment dispatch and the on-disk run layout:
//! `report.json`, `data.csv`, `meta.json` and `plot_<name>.csv`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use super::config::{BaseKind, ExperimentConfig, ExperimentKind, KernelMethod};
use crate::base_kernel::{DiscreteEllipticOperator, KernelField};
use crate::error::{io_error, Error, Result};
use crate::scalar::log_space;
use crate::subordination::{
    spectral_oracle, subordinate_gradient, subordinate_matrix, subordinate_pointwise, GaussianBase, GridBase,
    SubordinationRule,
};
use crate::verify::{
    gradient_ratio_scan, holder_fit, stability_experiment, two_sided_ratio_scan, BoundReport, Evaluator, NormSelector,
    PairSample, Witness,
};

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}
impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Column-ordered rows; floats render as `{:.16e}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_columns(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Comma-separated, header row, `\n` line endings.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let err = |e: csv::Error| Error::Io(format!("csv: {e}"));
        w.write_record(&self.columns).map_err(err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(err)?;
        }
        w.into_inner().map_err(|e| Error::Io(format!("csv: {e}")))
    }

    /// Writes the table; a partially written file is removed.
    pub fn write(&self, path: &Path) -> Result<()> {
        let res = self.to_csv().and_then(|bytes| fs::write(path, bytes).map_err(|e| io_error(path, e)));
        if res.is_err() {
            let _ = fs::remove_file(path);
        }
        res
    }
}

/// Everything a run produced, before or after it was written out.
#[derive(Debug, Clone)]
pub struct RunBundle {
    pub config: ExperimentConfig,
    pub report: BoundReport,
    pub data: Table,
    /// `(name, table)`, written as `plot_<name>.csv`.
    pub plots: Vec<(String, Table)>,
    pub errors: Vec<String>,
    pub compute_seconds: f64,
    pub dir: PathBuf,
}

impl RunBundle {
    /// `None` for purely computational experiments.
    pub fn verdict(&self) -> Option<bool> {
        if self.config.kind.is_computational() {
            None
        } else {
            self.report.verdict
        }
    }

    /// 0 on success, 1 if a verdict failed, 2 if an error was recorded.
    pub fn exit_code(&self) -> i32 {
        if !self.errors.is_empty() {
            2
        } else if self.verdict() == Some(false) || (!self.config.kind.is_computational() && self.verdict().is_none()) {
            1
        } else {
            0
        }
    }

    pub fn report_json(&self) -> Value {
        let mut v = self.report.to_json();
        let obj = v.as_object_mut().expect("report serializes to an object");
        obj.insert("experiment".into(), json!(self.config.kind.name()));
        obj.insert("verdict".into(), json!(self.verdict()));
        obj.insert("errors".into(), json!(self.errors));
        obj.insert("timings".into(), json!({ "compute_seconds": self.compute_seconds }));
        v
    }
}

/// Computation without I/O.
pub struct Outcome {
    pub report: BoundReport,
    pub data: Table,
    pub plots: Vec<(String, Table)>,
}

/// Runs the experiment in `config`; `out` overrides `[experiment] output`.
///
/// Fails only if the run directory cannot be used. Errors of the experiment
/// itself are recorded in the bundle and in `report.json`, and no `data.csv`
/// is left behind.
pub fn run_experiment(config: &ExperimentConfig, out: Option<&Path>) -> Result<RunBundle> {
    let dir = out.map_or_else(|| PathBuf::from(&config.output), Path::to_path_buf);
    prepare_dir(&dir)?;
    let start = Instant::now();
    let outcome = execute(config);
    let compute_seconds = start.elapsed().as_secs_f64();
    let mut bundle = match outcome {
        Ok(o) => RunBundle {
            config: config.clone(),
            report: o.report,
            data: o.data,
            plots: o.plots,
            errors: Vec::new(),
            compute_seconds,
            dir: dir.clone(),
        },
        Err(e) => RunBundle {
            config: config.clone(),
            report: BoundReport::new(config.kind.name()),
            data: Table::default(),
            plots: Vec::new(),
            errors: vec![e.to_string()],
            compute_seconds,
            dir: dir.clone(),
        },
    };
    if bundle.errors.is_empty() {
        let data_path = dir.join("data.csv");
        let written = if bundle.data.is_empty() {
            Err(Error::Io("scan produced no rows".into()))
        } else {
            bundle.data.write(&data_path).and_then(|_| emit_plotdata(&bundle).map(|_| ()))
        };
        if let Err(e) = written {
            remove_csvs(&dir);
            bundle.errors.push(e.to_string());
        }
    }
    write_json(&dir.join("report.json"), &bundle.report_json())?;
    let meta = json!({
        "config": config.to_ini(),
        "experiment": config.kind.name(),
        "seed": config.seed,
        "threads": rayon::current_num_threads(),
        "versions": { "fracheat": env!("CARGO_PKG_VERSION") },
        "wall_time_seconds": start.elapsed().as_secs_f64(),
    });
    write_json(&dir.join("meta.json"), &meta)?;
    Ok(bundle)
}

/// Writes `plot_<name>.csv` for every plot of the bundle into its directory.
pub fn emit_plotdata(bundle: &RunBundle) -> Result<Vec<PathBuf>> {
    if bundle.data.is_empty() || bundle.plots.iter().any(|(_, t)| t.is_empty()) {
        return Err(Error::Io("scan produced no rows".into()));
    }
    let mut paths = Vec::new();
    for (name, table) in &bundle.plots {
        let path = bundle.dir.join(format!("plot_{name}.csv"));
        table.write(&path)?;
        paths.push(path);
    }
    Ok(paths)
}

fn prepare_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| io_error(dir, e))?;
        if entries.next().is_some() {
            return Err(Error::Io(format!("{}: refusing to write into a non-empty directory", dir.display())));
        }
    }
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn remove_csvs(dir: &Path) {
    if let Ok(entries) = fs::read_dir(dir) {
        for e in entries.flatten() {
            if e.path().extension().is_some_and(|x| x == "csv") {
                let _ = fs::remove_file(e.path());
            }
        }
    }
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Error::Io(format!("json: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn axis_names(prefix: &str, d: usize) -> Vec<String> {
    (0..d).map(|i| format!("{prefix}_{i}")).collect()
}

fn add_diagnostics(report: &mut BoundReport, rule: &SubordinationRule<f64>) {
    let d = rule.diagnostics();
    report.set_constant("quadrature_evaluations", d.evaluations as f64);
    report.set_constant("quadrature_max_decades", d.max_decades as f64);
    report.set_constant("quadrature_max_refinement_change", d.max_refinement_change);
    report.set_constant("quadrature_max_upper_truncation", d.max_upper_truncation);
    report.set_constant("quadrature_max_lower_truncation", d.max_lower_truncation);
}

/// Dispatches on the experiment kind.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.kind {
        ExperimentKind::Density => density(cfg),
        ExperimentKind::LaplaceCheck => laplace(cfg),
        ExperimentKind::Kernel => kernel(cfg),
        ExperimentKind::OracleCompare => oracle_compare(cfg),
        ExperimentKind::GradientVerify => gradient(cfg),
        ExperimentKind::TwoSidedVerify => two_sided(cfg),
        ExperimentKind::HolderVerify => holder(cfg),
        ExperimentKind::Stability => stability(cfg),
    }
}

fn density(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = cfg.stable_params()?;
    let mut data = Table::new(&["s", "g", "small_asymptotic", "tail_asymptotic"]);
    for s in log_space(cfg.density.s_min, cfg.density.s_max, cfg.density.points) {
        data.push(vec![s.into(), p.density(s)?.into(), p.small_s_asymptotic(s)?.into(), p.tail_asymptotic(s)?.into()]);
    }
    let mut report = BoundReport::new("density");
    report.set_constant("alpha", p.alpha());
    report.set_constant("s_lo", p.s_lo());
    report.set_constant("s_hi", p.s_hi());
    report.set_constant("A", p.a_const());
    report.set_constant("K", p.k_const());
    report.set_constant("B", p.b_const());
    report.set_constant("mass", p.mass()?);
    let (lo, hi) = p.switch_discrepancy()?;
    report.set_constant("switch_discrepancy_lo", lo);
    report.set_constant("switch_discrepancy_hi", hi);
    report.samples = data.len();
    Ok(Outcome { report, plots: vec![("density".into(), data.clone())], data })
}

fn laplace(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = cfg.stable_params()?;
    let alpha = p.alpha();
    let mut data = Table::new(&["u", "laplace", "exact", "abs_error"]);
    let mut plot = Table::new(&["u", "laplace", "exact"]);
    let mut worst: f64 = 0.0;
    for &u in &cfg.laplace.u {
        let (l, exact) = (p.laplace_check(u)?, (-u.powf(alpha)).exp());
        worst = worst.max((l - exact).abs());
        data.push(vec![u.into(), l.into(), exact.into(), (l - exact).abs().into()]);
        plot.push(vec![u.into(), l.into(), exact.into()]);
    }
    let mut report = BoundReport::new("laplace-check");
    report.set_constant("alpha", alpha);
    report.set_constant("max_abs_error", worst);
    report.set_constant("tolerance", cfg.laplace.tolerance);
    report.samples = data.len();
    report.verdict = Some(worst <= cfg.laplace.tolerance);
    Ok(Outcome { report, data, plots: vec![("laplace".into(), plot)] })
}

fn kernel_table(op: &DiscreteEllipticOperator<f64>) -> Table {
    let d = op.grid().map_or(1, |g| g.dim());
    let mut cols = vec!["t".to_string()];
    cols.extend(axis_names("x", d));
    cols.push("value".into());
    Table::with_columns(cols)
}

fn kernel(cfg: &ExperimentConfig) -> Result<Outcome> {
    let op = cfg.operator()?;
    let grid = cfg.grid()?;
    let center = grid.nearest(&super::config::grid_center(&grid));
    let rule = cfg.rule()?;
    let mut data = Table::new(&["t", "x_index", "y_index", "value"]);
    let mut profile = kernel_table(&op);
    let mut report = BoundReport::new("kernel");
    let (mut mass_min, mut mass_max, mut min_value, mut asym) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, 0.0f64);
    for &t in &cfg.kernel.times {
        let q = match cfg.kernel.method {
            KernelMethod::Quadrature => subordinate_matrix(&op, &rule, t)?,
            KernelMethod::Oracle => spectral_oracle(&op, cfg.stable.alpha, t)?,
        };
        let m = q.matrix();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(vec![t.into(), i.into(), j.into(), m[(i, j)].into()]);
            }
        }
        for j in 0..m.ncols() {
            let mut row: Vec<Cell> = vec![t.into()];
            row.extend(grid.coords(j).into_iter().map(Cell::from));
            row.push(m[(center, j)].into());
            profile.push(row);
        }
        for v in q.row_masses() {
            mass_min = mass_min.min(v);
            mass_max = mass_max.max(v);
        }
        min_value = min_value.min(q.min_value());
        asym = asym.max(q.asymmetry());
    }
    report.set_constant("alpha", cfg.stable.alpha);
    report.set_constant("row_mass_min", mass_min);
    report.set_constant("row_mass_max", mass_max);
    report.set_constant("min_value", min_value);
    report.set_constant("asymmetry", asym);
    if cfg.kernel.method == KernelMethod::Quadrature {
        add_diagnostics(&mut report, &rule);
    }
    report.samples = data.len();
    Ok(Outcome { report, data, plots: vec![("kernel_profile".into(), profile)] })
}

fn oracle_compare(cfg: &ExperimentConfig) -> Result<Outcome> {
    let op = cfg.operator()?;
    let grid = cfg.grid()?;
    let rule = cfg.rule()?;
    let mut data = Table::new(&["t", "max_abs_diff", "x_index", "y_index", "quadrature", "oracle"]);
    let mut plot = Table::new(&["t", "max_abs_diff"]);
    let mut report = BoundReport::new("oracle-compare");
    let mut worst: Option<(f64, Witness)> = None;
    for &t in &cfg.kernel.times {
        let a: KernelField<f64> = subordinate_matrix(&op, &rule, t)?;
        let b = spectral_oracle(&op, cfg.stable.alpha, t)?;
        let (d, _, i, j) = a.max_abs_diff(&b)?;
        data.push(vec![t.into(), d.into(), i.into(), j.into(), a.matrix()[(i, j)].into(), b.matrix()[(i, j)].into()]);
        plot.push(vec![t.into(), d.into()]);
        if worst.as_ref().is_none_or(|(w, _)| d > *w) {
            worst = Some((d, Witness::new(t, grid.coords(i), grid.coords(j), d)));
        }
    }
    let (max, witness) = worst.expect("at least one time");
    report.set_constant("alpha", cfg.stable.alpha);
    report.set_constant("max_abs_diff", max);
    report.set_constant("tolerance", cfg.kernel.tolerance);
    report.set_witness("argmax", witness);
    add_diagnostics(&mut report, &rule);
    report.samples = data.len();
    report.verdict = Some(max <= cfg.kernel.tolerance);
    Ok(Outcome { report, data, plots: vec![("discrepancy".into(), plot)] })
}

fn pair_tables(samples: &[PairSample], d: usize, value: &str) -> (Table, Table) {
    let mut cols = vec!["t".to_string(), "r".to_string()];
    cols.extend(axis_names("x", d));
    cols.extend(axis_names("y", d));
    cols.extend([value.to_string(), "bound".into(), "ratio".into()]);
    let mut data = Table::with_columns(cols);
    let mut plot = Table::new(&["t", "r", value, "bound", "ratio"]);
    for s in samples {
        let mut row: Vec<Cell> = vec![s.t.into(), s.r.into()];
        row.extend(s.x.iter().chain(&s.y).map(|v| Cell::from(*v)));
        row.extend([s.value.into(), s.bound.into(), s.ratio.into()]);
        data.push(row);
        plot.push(vec![s.t.into(), s.r.into(), s.value.into(), s.bound.into(), s.ratio.into()]);
    }
    (data, plot)
}

/// Runs `f` with a pointwise or gradient evaluator for the configured base.
fn with_base<R>(
    cfg: &ExperimentConfig,
    base: BaseKind,
    dim: usize,
    gradient: bool,
    f: impl FnOnce(&Evaluator<'_>, &SubordinationRule<f64>) -> Result<R>,
) -> Result<R> {
    let rule = cfg.rule()?;
    let norm = |g: Vec<f64>| g.iter().map(|v| v * v).sum::<f64>().sqrt();
    match base {
        BaseKind::Gaussian => {
            let b = GaussianBase { dim };
            if gradient {
                f(&|t, x, y| subordinate_gradient(&b, &rule, t, x, y).map(norm), &rule)
            } else {
                f(&|t, x, y| subordinate_pointwise(&b, &rule, t, x, y), &rule)
            }
        }
        BaseKind::Grid => {
            let op = cfg.operator()?;
            let b = GridBase::new(&op)?;
            if gradient {
                f(&|t, x, y| subordinate_gradient(&b, &rule, t, x, y).map(norm), &rule)
            } else {
                f(&|t, x, y| subordinate_pointwise(&b, &rule, t, x, y), &rule)
            }
        }
    }
}

fn gradient(cfg: &ExperimentConfig) -> Result<Outcome> {
    let d = cfg.scan_dim();
    let scan = cfg.scan_grid()?;
    let (mut report, samples) = with_base(cfg, cfg.scan.base, d, true, |q, rule| {
        let r = gradient_ratio_scan(q, cfg.stable.alpha, (d + 1) as f64, &scan)?;
        let mut report = r.report;
        add_diagnostics(&mut report, rule);
        Ok((report, r.samples))
    })?;
    report.notes.push(format!("base: {}", cfg.scan.base.name()));
    let (data, plot) = pair_tables(&samples, d, "grad_magnitude");
    Ok(Outcome { report, data, plots: vec![("ratio".into(), plot)] })
}

fn two_sided(cfg: &ExperimentConfig) -> Result<Outcome> {
    let d = cfg.scan_dim();
    let scan = cfg.scan_grid()?;
    let (mut report, samples) = with_base(cfg, cfg.scan.base, d, false, |q, rule| {
        let r = two_sided_ratio_scan(q, cfg.stable.alpha, d, &scan)?;
        let mut report = r.report;
        add_diagnostics(&mut report, rule);
        Ok((report, r.samples))
    })?;
    report.notes.push(format!("base: {}", cfg.scan.base.name()));
    let (data, plot) = pair_tables(&samples, d, "kernel");
    Ok(Outcome { report, data, plots: vec![("ratio".into(), plot)] })
}

fn holder(cfg: &ExperimentConfig) -> Result<Outcome> {
    let d = cfg.holder_dim();
    let design = cfg.holder_design()?;
    let result = with_base(cfg, cfg.holder.base, d, false, |q, rule| {
        let mut r = holder_fit(q, cfg.stable.alpha, d, &design)?;
        add_diagnostics(&mut r.report, rule);
        Ok(r)
    })?;
    let mut cols = vec!["t".to_string(), "delta".to_string()];
    cols.extend(axis_names("x", d));
    cols.extend(axis_names("y", d));
    cols.push("difference".into());
    let mut data = Table::with_columns(cols);
    let mut plot = Table::new(&["t", "delta", "difference"]);
    for s in &result.samples {
        let mut row: Vec<Cell> = vec![s.t.into(), s.delta.into()];
        row.extend(s.x.iter().chain(&s.y).map(|v| Cell::from(*v)));
        row.push(s.value.into());
        data.push(row);
        plot.push(vec![s.t.into(), s.delta.into(), s.value.into()]);
    }
    Ok(Outcome { report: result.report, data, plots: vec![("holder".into(), plot)] })
}

fn stability(cfg: &ExperimentConfig) -> Result<Outcome> {
    let base = cfg.coefficients()?;
    let direction = cfg.direction()?;
    let design = cfg.stability_design();
    let r = stability_experiment(&base, &direction, &design)?;
    let mut data = Table::new(&["epsilon", "z", "t", "norm_1", "norm_2", "norm_inf", "kernel_sup"]);
    for row in &r.rows {
        data.push(vec![
            row.epsilon.into(),
            row.z.into(),
            row.t.into(),
            row.norm_1.into(),
            row.norm_2.into(),
            row.norm_inf.into(),
            row.kernel_sup.into(),
        ]);
    }
    // distance against z with the fitted curves
    let alpha = design.alpha;
    let d = cfg.grid.extent.len() as f64;
    let mut plot = Table::new(&["norm", "t", "z", "distance", "fitted"]);
    let rep = &r.report;
    let fitted = |name: &str, t: f64, z: f64| -> Option<f64> {
        let c = rep.constant(&format!("C_fit_{name}"))?;
        let g = rep.exponents.get(&format!("gamma_{name}"))?.value;
        let dl = rep.exponents.get(&format!("delta_{name}"))?.value;
        Some(if name == "kernel" {
            c * t.powf(-d / (2.0 * alpha)) * t.powf(-g) * z.powf(dl)
        } else {
            c * (1.0 + t.powf(-g / alpha)) * z.powf(dl)
        })
    };
    let mut labels: Vec<(String, Option<NormSelector>)> =
        design.norms.iter().map(|p| (format!("p{}", p.name()), Some(*p))).collect();
    labels.push(("kernel".into(), None));
    for (name, p) in &labels {
        for row in r.rows.iter().filter(|row| row.z > 0.0) {
            let v = match p {
                Some(p) => row.get(*p),
                None => Some(row.kernel_sup),
            };
            if let Some(v) = v {
                plot.push(vec![
                    name.as_str().into(),
                    row.t.into(),
                    row.z.into(),
                    v.into(),
                    fitted(name, row.t, row.z).into(),
                ]);
            }
        }
    }
    let mut plots = vec![];
    if !plot.is_empty() {
        plots.push(("distance".into(), plot));
    }
    Ok(Outcome { report: r.report, data, plots })
}

#[cfg(test)]
mod tests {
    use super::super::config::parse_config;
    use super::*;

    fn cfg(kind: &str, extra: &str) -> ExperimentConfig {
        parse_config(&format!("[experiment]\nkind = {kind}\n[stable]\nalpha = 0.5\n{extra}")).unwrap()
    }

    #[test]
    fn csv_format_contract() {
        let mut t = Table::new(&["a", "b", "c"]);
        t.push(vec![0.1.into(), 3usize.into(), Cell::Empty]);
        let s = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(s, "a,b,c\n1.0000000000000001e-1,3,\n");
    }

    #[test]
    fn density_run_writes_the_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let b = run_experiment(&cfg("density", ""), Some(&out)).unwrap();
        assert_eq!(b.exit_code(), 0);
        let csv = fs::read_to_string(out.join("data.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "s,g,small_asymptotic,tail_asymptotic");
        assert_eq!(lines.len(), 101);
        assert!(!csv.contains('\r'));
        let meta: Value = serde_json::from_str(&fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
        let echoed = parse_config(meta["config"].as_str().unwrap()).unwrap();
        assert_eq!(echoed, b.config);
        let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        for key in ["experiment", "constants", "witnesses", "verdict", "timings"] {
            assert!(report.get(key).is_some(), "{key}");
        }
        assert!(out.join("plot_density.csv").exists());
    }

    #[test]
    fn refuses_non_empty_directories() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("keep"), "x").unwrap();
        let err = run_experiment(&cfg("density", ""), Some(dir.path())).unwrap_err();
        assert!(err.to_string().contains("non-empty"));
        assert_eq!(fs::read_to_string(dir.path().join("keep")).unwrap(), "x");
        // an existing empty directory is fine
        let empty = tempfile::tempdir().unwrap();
        run_experiment(&cfg("laplace-check", ""), Some(empty.path())).unwrap();
    }

    #[test]
    fn oracle_compare_on_64_points_passes() {
        let c = cfg("oracle-compare", "[grid]\npoints = 64\n[coefficients]\npreset = checkerboard\n");
        let o = execute(&c).unwrap();
        assert!(o.report.constant("max_abs_diff").unwrap() <= 1e-6);
        assert_eq!(o.report.verdict, Some(true));
    }

    #[test]
    fn stability_with_zero_epsilon() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg("stability", "[grid]\npoints = 32\n[stability]\nepsilons = 0\n");
        let b = run_experiment(&c, Some(&dir.path().join("r"))).unwrap();
        assert_eq!(b.verdict(), Some(true));
        assert_eq!(b.exit_code(), 0);
        let csv = fs::read_to_string(dir.path().join("r/data.csv")).unwrap();
        for line in csv.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            assert!(f[3..].iter().all(|v| v.parse::<f64>().unwrap() == 0.0), "{line}");
        }
    }

    #[test]
    fn empty_scan_is_an_error_and_leaves_no_csv() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg("laplace-check", "");
        let mut b = run_experiment(&c, Some(&dir.path().join("a"))).unwrap();
        b.data.rows.clear();
        let err = emit_plotdata(&b).unwrap_err();
        assert_eq!(err.to_string(), "scan produced no rows");
    }

    #[test]
    fn failures_are_recorded_with_nonzero_exit() {
        let dir = tempfile::tempdir().unwrap();
        // a failed verdict
        let mut c = cfg("laplace-check", "[laplace]\ntolerance = 1e-300\n");
        let b = run_experiment(&c, Some(&dir.path().join("f"))).unwrap();
        assert_eq!(b.verdict(), Some(false));
        assert_eq!(b.exit_code(), 1);
        // a module error: grid larger than the spectral budget at run time
        c = cfg("kernel", "[grid]\npoints = 16\n");
        c.grid.spectral_budget = 4;
        let b = run_experiment(&c, Some(&dir.path().join("e"))).unwrap();
        assert_eq!(b.exit_code(), 2);
        assert!(!dir.path().join("e/data.csv").exists());
        let report: Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("e/report.json")).unwrap()).unwrap();
        assert!(report["errors"][0].as_str().unwrap().contains("budget"));
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg("two-sided-verify", "[scan]\nt_min = 0.1\nt_max = 100\nr_max = 100\nper_decade = 5\n");
        let a = run_experiment(&c, Some(&dir.path().join("a"))).unwrap();
        let b = run_experiment(&c, Some(&dir.path().join("b"))).unwrap();
        assert!(a.report.verdict.is_some());
        for f in ["data.csv", "plot_ratio.csv"] {
            assert_eq!(
                fs::read(dir.path().join("a").join(f)).unwrap(),
                fs::read(dir.path().join("b").join(f)).unwrap()
            );
        }
        let _ = b;
    }
}
