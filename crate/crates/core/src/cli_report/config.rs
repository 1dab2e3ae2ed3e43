//! Typed experiment configuration on top of [`Document`].
//!
//! Every accepted key is listed in [`KEYS`]; the parser rejects anything else,
//! [`ExperimentConfig::to_ini`] emits exactly the keys of the sections the
//! experiment uses, and [`config_help`] renders the table.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::ini::{config_error, Document, Entry, Section};
use crate::base_kernel::{assemble_operator, Boundary, CoefficientField, DiscreteEllipticOperator, Grid, MatrixField};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::subordination::{QuadratureSpec, SubordinationRule};
use crate::subordinator::StableParams;
use crate::verify::{HolderDesign, NormSelector, ScanGrid, StabilityDesign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExperimentKind {
    Density,
    LaplaceCheck,
    Kernel,
    GradientVerify,
    TwoSidedVerify,
    HolderVerify,
    Stability,
    OracleCompare,
}

impl ExperimentKind {
    pub fn all() -> [Self; 8] {
        use ExperimentKind::*;
        [Density, LaplaceCheck, Kernel, GradientVerify, TwoSidedVerify, HolderVerify, Stability, OracleCompare]
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Density => "density",
            Self::LaplaceCheck => "laplace-check",
            Self::Kernel => "kernel",
            Self::GradientVerify => "gradient-verify",
            Self::TwoSidedVerify => "two-sided-verify",
            Self::HolderVerify => "holder-verify",
            Self::Stability => "stability",
            Self::OracleCompare => "oracle-compare",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::all().into_iter().find(|k| k.name() == s)
    }

    /// Sections this experiment reads, in emission order.
    pub fn sections(self) -> &'static [&'static str] {
        match self {
            Self::Density => &["experiment", "stable", "density"],
            Self::LaplaceCheck => &["experiment", "stable", "laplace"],
            Self::Kernel | Self::OracleCompare => {
                &["experiment", "stable", "quadrature", "grid", "coefficients", "kernel"]
            }
            Self::GradientVerify | Self::TwoSidedVerify => {
                &["experiment", "stable", "quadrature", "grid", "coefficients", "scan"]
            }
            Self::HolderVerify => &["experiment", "stable", "quadrature", "grid", "coefficients", "holder"],
            Self::Stability => &["experiment", "stable", "grid", "coefficients", "stability"],
        }
    }

    /// Experiments without a verdict; they exit 0 unless an error occurs.
    pub fn is_computational(self) -> bool {
        matches!(self, Self::Density | Self::Kernel)
    }
}

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident { $($var:ident => $s:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum $name { $($var),+ }

        impl $name {
            pub fn name(self) -> &'static str {
                match self { $(Self::$var => $s),+ }
            }
            pub fn parse(s: &str) -> Option<Self> {
                match s { $($s => Some(Self::$var),)+ _ => None }
            }
            fn choices() -> &'static str {
                concat!($($s, " "),+)
            }
        }
    };
}

named_enum!(
    /// Named coefficient fields.
    CoefficientPreset {
        Identity => "identity",
        Checkerboard => "checkerboard",
        SmoothBump => "smooth-bump",
        Random => "random",
        Inline => "inline",
    }
);

named_enum!(
    /// Perturbation directions for the stability sweep.
    Direction {
        CheckerboardCells => "checkerboard-cells",
        CheckerboardSign => "checkerboard-sign",
        RandomSign => "random-sign",
    }
);

named_enum!(
    /// Base semigroup of the verification scans.
    BaseKind {
        Gaussian => "gaussian",
        Grid => "grid",
    }
);

named_enum!(
    KernelMethod {
        Quadrature => "quadrature",
        Oracle => "oracle",
    }
);

/// Documentation row of one accepted key.
#[derive(Debug, Clone, Copy)]
pub struct KeyDoc {
    pub section: &'static str,
    pub key: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

const fn k(section: &'static str, key: &'static str, default: &'static str, doc: &'static str) -> KeyDoc {
    KeyDoc { section, key, default, doc }
}

pub const KEYS: &[KeyDoc] = &[
    k("experiment", "kind", "(subcommand)", "density | laplace-check | kernel | gradient-verify | two-sided-verify | holder-verify | stability | oracle-compare"),
    k("experiment", "seed", "0", "seed of the random presets"),
    k("experiment", "output", "fracheat-<kind>", "run directory; must be absent or empty (--out overrides)"),
    k("stable", "alpha", "(required)", "stability index, in (0,1)"),
    k("stable", "rel_tol", "1e-9", "relative accuracy of the density, in (0, 1e-3]"),
    k("stable", "s_lo", "auto", "switch to the small-s asymptotic below this; auto = calibrated"),
    k("stable", "s_hi", "auto", "switch to the tail asymptotic above this; auto = calibrated"),
    k("quadrature", "s_min", "(A/100)^((1-α)/α)", "lower end of the subordination integral"),
    k("quadrature", "s_max", "1e60", "hard upper cap on s"),
    k("quadrature", "panels", "8", "log panels per decade on the coarse level, ≥ 8"),
    k("quadrature", "tail_order", "4", "terms of the tail series beyond the last decade, ≥ 2"),
    k("quadrature", "abs_tol", "1e-13", "absolute tolerance"),
    k("quadrature", "rel_tol", "1e-10", "relative tolerance"),
    k("grid", "extent", "8", "side lengths, one per axis (1 or 2 values)"),
    k("grid", "points", "64", "nodes per axis, ≥ 2 each"),
    k("grid", "boundary", "dirichlet", "dirichlet | neumann"),
    k("grid", "origin", "0", "coordinates of the first node"),
    k("grid", "spectral_budget", "4096", "largest node count for dense eigendecomposition"),
    k("coefficients", "preset", "identity", "identity | checkerboard | smooth-bump | random | inline"),
    k("coefficients", "lambda", "2", "ellipticity constant λ ≥ 1; also the contrast of checkerboard/smooth-bump/random"),
    k("coefficients", "cell", "1", "cell side of checkerboard and random"),
    k("coefficients", "width", "1", "width of smooth-bump"),
    k("coefficients", "values", "(empty)", "inline: one value per node (1D) or xx, xy, yy per node (2D), row-major"),
    k("density", "s_min", "0.01", "first point of the log-spaced s grid"),
    k("density", "s_max", "100", "last point of the s grid"),
    k("density", "points", "100", "number of s points, ≥ 2"),
    k("laplace", "u", "0.5, 1, 2, 5", "Laplace variables, positive"),
    k("laplace", "tolerance", "1e-6", "largest accepted |check - exp(-u^α)|"),
    k("kernel", "times", "0.1, 1, 10", "times t ≥ 0"),
    k("kernel", "method", "quadrature", "kernel only: quadrature | oracle"),
    k("kernel", "tolerance", "1e-6", "oracle-compare only: largest accepted max-norm discrepancy"),
    k("scan", "base", "gaussian", "gaussian (free space) | grid ([grid] and [coefficients])"),
    k("scan", "dim", "1", "dimension of the gaussian base"),
    k("scan", "t_min", "0.01", "smallest time"),
    k("scan", "t_max", "100", "largest time; at least 3 decades above t_min"),
    k("scan", "r_min", "0.01", "smallest nonzero offset"),
    k("scan", "r_max", "10000", "largest offset"),
    k("scan", "per_decade", "4", "lattice points per decade"),
    k("scan", "anchors", "auto", "base points y, `;`-separated, coordinates `,`-separated; auto = origin or grid center"),
    k("holder", "base", "gaussian", "gaussian | grid"),
    k("holder", "dim", "1", "dimension of the gaussian base"),
    k("holder", "times", "0.5, 1, 2", "times t > 0"),
    k("holder", "delta_min", "0.001", "smallest shift |x - x1|"),
    k("holder", "delta_max", "1", "largest shift"),
    k("holder", "delta_count", "13", "log-spaced shifts, ≥ 3; on grids shifts snap to node multiples"),
    k("holder", "anchors", "auto", "pairs `x | y`, `;`-separated; auto = (0.7 | 0) shifted to the grid center"),
    k("stability", "epsilons", "0.4, 0.2, 0.1, 0.05, 0.025", "perturbation sizes ε ≥ 0"),
    k("stability", "times", "0.1, 1, 10", "times t > 0"),
    k("stability", "norms", "1, 2, inf", "operator norms p ∈ {1, 2, inf}"),
    k("stability", "direction", "checkerboard-cells", "checkerboard-cells | checkerboard-sign | random-sign"),
    k("stability", "direction_cell", "1", "cell side of the perturbation direction"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct StableSection {
    pub alpha: f64,
    pub rel_tol: f64,
    pub s_lo: Option<f64>,
    pub s_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSection {
    pub extent: Vec<f64>,
    pub points: Vec<usize>,
    pub boundary: Boundary,
    pub origin: Vec<f64>,
    pub spectral_budget: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSection {
    pub preset: CoefficientPreset,
    pub lambda: f64,
    pub cell: f64,
    pub width: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensitySection {
    pub s_min: f64,
    pub s_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceSection {
    pub u: Vec<f64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSection {
    pub times: Vec<f64>,
    pub method: KernelMethod,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSection {
    pub base: BaseKind,
    pub dim: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub per_decade: usize,
    /// Empty means automatic.
    pub anchors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderSection {
    pub base: BaseKind,
    pub dim: usize,
    pub times: Vec<f64>,
    pub delta_min: f64,
    pub delta_max: f64,
    pub delta_count: usize,
    /// Empty means automatic.
    pub anchors: Vec<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySection {
    pub epsilons: Vec<f64>,
    pub times: Vec<f64>,
    pub norms: Vec<NormSelector>,
    pub direction: Direction,
    pub direction_cell: f64,
}

/// A validated experiment; sections the kind does not read keep their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub output: String,
    pub stable: StableSection,
    pub quadrature: QuadratureSpec,
    pub grid: GridSection,
    pub coefficients: CoefficientSection,
    pub density: DensitySection,
    pub laplace: LaplaceSection,
    pub kernel: KernelSection,
    pub scan: ScanSection,
    pub holder: HolderSection,
    pub stability: StabilitySection,
}

/// Parses a configuration whose `[experiment] kind` is given.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    ExperimentConfig::parse(text, None)
}

// ---- value parsing -------------------------------------------------------

type ParseFn<T> = fn(&str) -> std::result::Result<T, String>;

fn number(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if !v.is_nan() => Ok(v),
        _ => Err(format!("expected a number, got `{s}`")),
    }
}

fn count(s: &str) -> std::result::Result<usize, String> {
    s.parse().map_err(|_| format!("expected a nonnegative integer, got `{s}`"))
}

fn seed(s: &str) -> std::result::Result<u64, String> {
    s.parse().map_err(|_| format!("expected a nonnegative integer, got `{s}`"))
}

fn non_empty(s: &str) -> std::result::Result<String, String> {
    if s.is_empty() {
        Err("expected a value".into())
    } else {
        Ok(s.to_string())
    }
}

fn numbers(s: &str) -> std::result::Result<Vec<f64>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|p| number(p.trim())).collect()
}

fn counts(s: &str) -> std::result::Result<Vec<usize>, String> {
    s.split(',').map(|p| count(p.trim())).collect()
}

fn auto_number(s: &str) -> std::result::Result<Option<f64>, String> {
    if s == "auto" {
        Ok(None)
    } else {
        number(s).map(Some)
    }
}

fn points(s: &str) -> std::result::Result<Vec<Vec<f64>>, String> {
    if s == "auto" {
        return Ok(Vec::new());
    }
    s.split(';').map(|p| numbers(p.trim())).collect()
}

type Point = Vec<f64>;

fn pairs(s: &str) -> std::result::Result<Vec<(Point, Point)>, String> {
    if s == "auto" {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|p| {
            let (x, y) = p.split_once('|').ok_or_else(|| format!("expected `x | y`, got `{}`", p.trim()))?;
            Ok((numbers(x.trim())?, numbers(y.trim())?))
        })
        .collect()
}

fn boundary(s: &str) -> std::result::Result<Boundary, String> {
    match s {
        "dirichlet" => Ok(Boundary::Dirichlet),
        "neumann" => Ok(Boundary::Neumann),
        _ => Err(format!("expected dirichlet | neumann, got `{s}`")),
    }
}

fn norms(s: &str) -> std::result::Result<Vec<NormSelector>, String> {
    s.split(',')
        .map(|p| NormSelector::parse(p.trim()).ok_or_else(|| format!("expected 1 | 2 | inf, got `{}`", p.trim())))
        .collect()
}

macro_rules! enum_parser {
    ($fn:ident, $ty:ident) => {
        fn $fn(s: &str) -> std::result::Result<$ty, String> {
            $ty::parse(s).ok_or_else(|| format!("expected one of {}got `{s}`", $ty::choices()))
        }
    };
}
enum_parser!(preset, CoefficientPreset);
enum_parser!(direction, Direction);
enum_parser!(base_kind, BaseKind);
enum_parser!(kernel_method, KernelMethod);

fn kind(s: &str) -> std::result::Result<ExperimentKind, String> {
    ExperimentKind::parse(s).ok_or_else(|| format!("unknown experiment kind `{s}`"))
}

/// Message of a core error, without the variant prefix of `Display`.
fn message(e: &Error) -> String {
    match e {
        Error::Domain(m) | Error::Numeric(m) | Error::Shape(m) | Error::Calibration(m) => m.clone(),
        other => other.to_string(),
    }
}

struct Reader<'a> {
    name: &'static str,
    section: Option<&'a Section>,
    taken: BTreeSet<&'a str>,
    end: usize,
}

impl<'a> Reader<'a> {
    fn new(doc: &'a Document, name: &'static str) -> Self {
        Self { name, section: doc.section(name), taken: BTreeSet::new(), end: doc.lines.max(1) }
    }

    fn entry(&mut self, key: &str) -> Option<&'a Entry> {
        let e = self.section?.entries.iter().find(|e| e.key == key)?;
        self.taken.insert(e.key.as_str());
        Some(e)
    }

    /// Line of `key`, or of the section header, or the last line.
    fn line(&self, key: &str) -> usize {
        match self.section {
            Some(s) => s.entries.iter().find(|e| e.key == key).map_or(s.line, |e| e.line),
            None => self.end,
        }
    }

    fn get<T>(&mut self, key: &str, parse: ParseFn<T>) -> Result<Option<T>> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => {
                parse(&e.value).map(Some).map_err(|m| config_error(e.line, format!("[{}] {key}: {m}", self.name)))
            }
        }
    }

    fn or<T>(&mut self, key: &str, default: T, parse: ParseFn<T>) -> Result<T> {
        Ok(self.get(key, parse)?.unwrap_or(default))
    }

    fn require<T>(&mut self, key: &str, parse: ParseFn<T>) -> Result<T> {
        let line = self.line(key);
        self.get(key, parse)?.ok_or_else(|| config_error(line, format!("missing key `{key}` in [{}]", self.name)))
    }

    /// Error at `key` unless `ok`.
    fn check(&self, ok: bool, key: &str, msg: impl Into<String>) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(config_error(self.line(key), format!("[{}] {}", self.name, msg.into())))
        }
    }

    fn wrap<T>(&self, key: &str, r: Result<T>) -> Result<T> {
        r.map_err(|e| config_error(self.line(key), format!("[{}] {}", self.name, message(&e))))
    }

    fn finish(self) -> Result<()> {
        if let Some(s) = self.section {
            if let Some(e) = s.entries.iter().find(|e| !self.taken.contains(e.key.as_str())) {
                return Err(config_error(e.line, format!("unknown key `{}` in [{}]", e.key, self.name)));
            }
        }
        Ok(())
    }
}

fn positive(v: &[f64]) -> bool {
    !v.is_empty() && v.iter().all(|x| *x > 0.0 && x.is_finite())
}

impl ExperimentConfig {
    /// Parses `text`; `default_kind` fills a missing `kind` and must agree with a present one.
    pub fn parse(text: &str, default_kind: Option<ExperimentKind>) -> Result<Self> {
        let doc = Document::parse(text)?;

        let mut r = Reader::new(&doc, "experiment");
        let kind = match (r.get("kind", kind)?, default_kind) {
            (Some(k), Some(d)) if k != d => {
                return Err(config_error(
                    r.line("kind"),
                    format!("config is for `{}` but `{}` was requested", k.name(), d.name()),
                ))
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => return Err(config_error(r.line("kind"), "missing key `kind` in [experiment]")),
        };
        let seed = r.or("seed", 0, seed)?;
        let output = r.or("output", format!("fracheat-{}", kind.name()), non_empty)?;
        r.finish()?;

        for s in &doc.sections {
            if !KEYS.iter().any(|k| k.section == s.name) {
                return Err(config_error(s.line, format!("unknown section [{}]", s.name)));
            }
            if !kind.sections().contains(&s.name.as_str()) {
                return Err(config_error(
                    s.line,
                    format!("section [{}] is not used by {} experiments", s.name, kind.name()),
                ));
            }
        }

        let mut r = Reader::new(&doc, "stable");
        let stable = StableSection {
            alpha: r.require("alpha", number)?,
            rel_tol: r.or("rel_tol", f64::default_rel_tol(), number)?,
            s_lo: r.or("s_lo", None, auto_number)?,
            s_hi: r.or("s_hi", None, auto_number)?,
        };
        r.check(
            stable.alpha > 0.0 && stable.alpha < 1.0,
            "alpha",
            format!("alpha must lie in (0,1), got {}", stable.alpha),
        )?;
        r.check(
            stable.s_lo.is_some() == stable.s_hi.is_some(),
            "s_lo",
            "s_lo and s_hi must both be auto or both be set",
        )?;
        let params = r.wrap("rel_tol", stable_params(&stable))?;
        r.finish()?;

        let mut r = Reader::new(&doc, "quadrature");
        let d = QuadratureSpec::for_alpha(&params);
        let quadrature = QuadratureSpec {
            s_min: r.or("s_min", d.s_min, number)?,
            s_max: r.or("s_max", d.s_max, number)?,
            panels: r.or("panels", d.panels, count)?,
            tail_order: r.or("tail_order", d.tail_order, count)?,
            abs_tol: r.or("abs_tol", d.abs_tol, number)?,
            rel_tol: r.or("rel_tol", d.rel_tol, number)?,
        };
        r.wrap("s_min", quadrature.validate(&params))?;
        r.finish()?;

        let mut r = Reader::new(&doc, "grid");
        let extent = r.or("extent", vec![8.0], numbers)?;
        let dim = extent.len();
        let grid = GridSection {
            points: r.or("points", vec![64; dim], counts)?,
            boundary: r.or("boundary", Boundary::Dirichlet, boundary)?,
            origin: r.or("origin", vec![0.0; dim], numbers)?,
            spectral_budget: r.or("spectral_budget", crate::base_kernel::DEFAULT_SPECTRAL_BUDGET, count)?,
            extent,
        };
        r.check(grid.origin.len() == dim, "origin", format!("origin needs {dim} coordinates"))?;
        let built = r.wrap("extent", build_grid(&grid))?;
        let uses_grid = match kind {
            ExperimentKind::GradientVerify | ExperimentKind::TwoSidedVerify => doc
                .section("scan")
                .and_then(|s| s.entries.iter().find(|e| e.key == "base"))
                .is_some_and(|e| e.value == "grid"),
            ExperimentKind::HolderVerify => doc
                .section("holder")
                .and_then(|s| s.entries.iter().find(|e| e.key == "base"))
                .is_some_and(|e| e.value == "grid"),
            k => !matches!(k, ExperimentKind::Density | ExperimentKind::LaplaceCheck),
        };
        if uses_grid {
            r.check(
                built.len() <= grid.spectral_budget,
                "points",
                format!("{} nodes exceed spectral_budget {}", built.len(), grid.spectral_budget),
            )?;
        }
        r.finish()?;

        let mut r = Reader::new(&doc, "coefficients");
        let coefficients = CoefficientSection {
            preset: r.or("preset", CoefficientPreset::Identity, preset)?,
            lambda: r.or("lambda", 2.0, number)?,
            cell: r.or("cell", 1.0, number)?,
            width: r.or("width", 1.0, number)?,
            values: r.or("values", Vec::new(), numbers)?,
        };
        r.check(coefficients.lambda >= 1.0 && coefficients.lambda.is_finite(), "lambda", "lambda must be ≥ 1")?;
        r.check(positive(&[coefficients.cell]), "cell", "cell must be positive")?;
        r.check(positive(&[coefficients.width]), "width", "width must be positive")?;
        r.check(
            coefficients.values.is_empty() || coefficients.preset == CoefficientPreset::Inline,
            "values",
            "values are only read by the inline preset",
        )?;
        let line_key = if coefficients.preset == CoefficientPreset::Inline { "values" } else { "preset" };
        r.wrap(line_key, build_coefficients(&coefficients, &built, seed))?;
        r.finish()?;

        let mut r = Reader::new(&doc, "density");
        let density = DensitySection {
            s_min: r.or("s_min", 0.01, number)?,
            s_max: r.or("s_max", 100.0, number)?,
            points: r.or("points", 100, count)?,
        };
        r.check(
            density.s_min > 0.0 && density.s_min < density.s_max && density.s_max.is_finite(),
            "s_min",
            "need 0 < s_min < s_max",
        )?;
        r.check(density.points >= 2, "points", "points must be ≥ 2")?;
        r.finish()?;

        let mut r = Reader::new(&doc, "laplace");
        let laplace = LaplaceSection {
            u: r.or("u", vec![0.5, 1.0, 2.0, 5.0], numbers)?,
            tolerance: r.or("tolerance", 1e-6, number)?,
        };
        r.check(positive(&laplace.u), "u", "u must be a nonempty list of positive numbers")?;
        r.check(positive(&[laplace.tolerance]), "tolerance", "tolerance must be positive")?;
        r.finish()?;

        let mut r = Reader::new(&doc, "kernel");
        let kernel = KernelSection {
            times: r.or("times", vec![0.1, 1.0, 10.0], numbers)?,
            method: r.or("method", KernelMethod::Quadrature, kernel_method)?,
            tolerance: r.or("tolerance", 1e-6, number)?,
        };
        r.check(
            !kernel.times.is_empty() && kernel.times.iter().all(|t| *t >= 0.0 && t.is_finite()),
            "times",
            "times must be a nonempty list of nonnegative numbers",
        )?;
        r.check(positive(&[kernel.tolerance]), "tolerance", "tolerance must be positive")?;
        r.finish()?;

        let mut r = Reader::new(&doc, "scan");
        let scan = ScanSection {
            base: r.or("base", BaseKind::Gaussian, base_kind)?,
            dim: r.or("dim", 1, count)?,
            t_min: r.or("t_min", 0.01, number)?,
            t_max: r.or("t_max", 100.0, number)?,
            r_min: r.or("r_min", 0.01, number)?,
            r_max: r.or("r_max", 1e4, number)?,
            per_decade: r.or("per_decade", 4, count)?,
            anchors: r.or("anchors", Vec::new(), points)?,
        };
        r.check(scan.dim == 1 || scan.dim == 2, "dim", "dim must be 1 or 2")?;
        let scan_dim = if scan.base == BaseKind::Grid { dim } else { scan.dim };
        r.check(
            scan.anchors.iter().all(|a| a.len() == scan_dim),
            "anchors",
            format!("anchors need {scan_dim} coordinates"),
        )?;
        r.wrap(
            "t_min",
            ScanGrid::lattice(
                (scan.t_min, scan.t_max),
                (scan.r_min, scan.r_max),
                scan.per_decade,
                vec![vec![0.0; scan_dim]],
            ),
        )?;
        r.finish()?;

        let mut r = Reader::new(&doc, "holder");
        let holder = HolderSection {
            base: r.or("base", BaseKind::Gaussian, base_kind)?,
            dim: r.or("dim", 1, count)?,
            times: r.or("times", vec![0.5, 1.0, 2.0], numbers)?,
            delta_min: r.or("delta_min", 1e-3, number)?,
            delta_max: r.or("delta_max", 1.0, number)?,
            delta_count: r.or("delta_count", 13, count)?,
            anchors: r.or("anchors", Vec::new(), pairs)?,
        };
        r.check(holder.dim == 1 || holder.dim == 2, "dim", "dim must be 1 or 2")?;
        r.check(positive(&holder.times), "times", "times must be a nonempty list of positive numbers")?;
        r.check(
            holder.delta_min > 0.0 && holder.delta_min < holder.delta_max && holder.delta_max.is_finite(),
            "delta_min",
            "need 0 < delta_min < delta_max",
        )?;
        r.check(holder.delta_count >= 3, "delta_count", "delta_count must be ≥ 3")?;
        let holder_dim = if holder.base == BaseKind::Grid { dim } else { holder.dim };
        r.check(
            holder.anchors.iter().all(|(x, y)| x.len() == holder_dim && y.len() == holder_dim),
            "anchors",
            format!("anchors need {holder_dim} coordinates"),
        )?;
        r.finish()?;

        let mut r = Reader::new(&doc, "stability");
        let stability = StabilitySection {
            epsilons: r.or("epsilons", vec![0.4, 0.2, 0.1, 0.05, 0.025], numbers)?,
            times: r.or("times", vec![0.1, 1.0, 10.0], numbers)?,
            norms: r.or("norms", NormSelector::all().to_vec(), norms)?,
            direction: r.or("direction", Direction::CheckerboardCells, direction)?,
            direction_cell: r.or("direction_cell", 1.0, number)?,
        };
        r.check(
            !stability.epsilons.is_empty() && stability.epsilons.iter().all(|e| *e >= 0.0 && e.is_finite()),
            "epsilons",
            "epsilons must be a nonempty list of nonnegative numbers",
        )?;
        r.check(positive(&stability.times), "times", "times must be a nonempty list of positive numbers")?;
        r.check(positive(&[stability.direction_cell]), "direction_cell", "direction_cell must be positive")?;
        r.finish()?;

        Ok(Self {
            kind,
            seed,
            output,
            stable,
            quadrature,
            grid,
            coefficients,
            density,
            laplace,
            kernel,
            scan,
            holder,
            stability,
        })
    }

    /// The document that re-parses to `self`: every key of every section the kind reads.
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        for section in self.kind.sections() {
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "[{section}]");
            for key in KEYS.iter().filter(|k| k.section == *section) {
                let v = self.value_of(section, key.key);
                if v.is_empty() {
                    let _ = writeln!(out, "{} =", key.key);
                } else {
                    let _ = writeln!(out, "{} = {v}", key.key);
                }
            }
        }
        out
    }

    fn value_of(&self, section: &str, key: &str) -> String {
        let f = |x: f64| format!("{x:?}");
        let list = |v: &[f64]| v.iter().map(|x| f(*x)).collect::<Vec<_>>().join(", ");
        let auto = |x: Option<f64>| x.map_or("auto".to_string(), f);
        match (section, key) {
            ("experiment", "kind") => self.kind.name().into(),
            ("experiment", "seed") => self.seed.to_string(),
            ("experiment", "output") => self.output.clone(),
            ("stable", "alpha") => f(self.stable.alpha),
            ("stable", "rel_tol") => f(self.stable.rel_tol),
            ("stable", "s_lo") => auto(self.stable.s_lo),
            ("stable", "s_hi") => auto(self.stable.s_hi),
            ("quadrature", "s_min") => f(self.quadrature.s_min),
            ("quadrature", "s_max") => f(self.quadrature.s_max),
            ("quadrature", "panels") => self.quadrature.panels.to_string(),
            ("quadrature", "tail_order") => self.quadrature.tail_order.to_string(),
            ("quadrature", "abs_tol") => f(self.quadrature.abs_tol),
            ("quadrature", "rel_tol") => f(self.quadrature.rel_tol),
            ("grid", "extent") => list(&self.grid.extent),
            ("grid", "points") => self.grid.points.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", "),
            ("grid", "boundary") => self.grid.boundary.name().into(),
            ("grid", "origin") => list(&self.grid.origin),
            ("grid", "spectral_budget") => self.grid.spectral_budget.to_string(),
            ("coefficients", "preset") => self.coefficients.preset.name().into(),
            ("coefficients", "lambda") => f(self.coefficients.lambda),
            ("coefficients", "cell") => f(self.coefficients.cell),
            ("coefficients", "width") => f(self.coefficients.width),
            ("coefficients", "values") => list(&self.coefficients.values),
            ("density", "s_min") => f(self.density.s_min),
            ("density", "s_max") => f(self.density.s_max),
            ("density", "points") => self.density.points.to_string(),
            ("laplace", "u") => list(&self.laplace.u),
            ("laplace", "tolerance") => f(self.laplace.tolerance),
            ("kernel", "times") => list(&self.kernel.times),
            ("kernel", "method") => self.kernel.method.name().into(),
            ("kernel", "tolerance") => f(self.kernel.tolerance),
            ("scan", "base") => self.scan.base.name().into(),
            ("scan", "dim") => self.scan.dim.to_string(),
            ("scan", "t_min") => f(self.scan.t_min),
            ("scan", "t_max") => f(self.scan.t_max),
            ("scan", "r_min") => f(self.scan.r_min),
            ("scan", "r_max") => f(self.scan.r_max),
            ("scan", "per_decade") => self.scan.per_decade.to_string(),
            ("scan", "anchors") => {
                if self.scan.anchors.is_empty() {
                    "auto".into()
                } else {
                    self.scan.anchors.iter().map(|a| list(a)).collect::<Vec<_>>().join("; ")
                }
            }
            ("holder", "base") => self.holder.base.name().into(),
            ("holder", "dim") => self.holder.dim.to_string(),
            ("holder", "times") => list(&self.holder.times),
            ("holder", "delta_min") => f(self.holder.delta_min),
            ("holder", "delta_max") => f(self.holder.delta_max),
            ("holder", "delta_count") => self.holder.delta_count.to_string(),
            ("holder", "anchors") => {
                if self.holder.anchors.is_empty() {
                    "auto".into()
                } else {
                    self.holder
                        .anchors
                        .iter()
                        .map(|(x, y)| format!("{} | {}", list(x), list(y)))
                        .collect::<Vec<_>>()
                        .join("; ")
                }
            }
            ("stability", "epsilons") => list(&self.stability.epsilons),
            ("stability", "times") => list(&self.stability.times),
            ("stability", "norms") => self.stability.norms.iter().map(|n| n.name()).collect::<Vec<_>>().join(", "),
            ("stability", "direction") => self.stability.direction.name().into(),
            ("stability", "direction_cell") => f(self.stability.direction_cell),
            _ => unreachable!("key [{section}] {key} missing from value_of"),
        }
    }

    // ---- builders ----------------------------------------------------------

    pub fn stable_params(&self) -> Result<StableParams<f64>> {
        stable_params(&self.stable)
    }

    pub fn rule(&self) -> Result<SubordinationRule<f64>> {
        SubordinationRule::new(self.stable_params()?, self.quadrature.clone())
    }

    pub fn grid(&self) -> Result<Grid<f64>> {
        build_grid(&self.grid)
    }

    pub fn coefficients(&self) -> Result<CoefficientField<f64>> {
        build_coefficients(&self.coefficients, &self.grid()?, self.seed)
    }

    pub fn operator(&self) -> Result<DiscreteEllipticOperator<f64>> {
        Ok(assemble_operator(&self.grid()?, &self.coefficients()?)?.with_spectral_budget(self.grid.spectral_budget))
    }

    /// The scan lattice, snapped to the grid for the grid base.
    pub fn scan_grid(&self) -> Result<ScanGrid> {
        let s = &self.scan;
        match s.base {
            BaseKind::Gaussian => {
                let anchors = if s.anchors.is_empty() { vec![vec![0.0; s.dim]] } else { s.anchors.clone() };
                ScanGrid::lattice((s.t_min, s.t_max), (s.r_min, s.r_max), s.per_decade, anchors)
            }
            BaseKind::Grid => {
                let grid = self.grid()?;
                let anchors = if s.anchors.is_empty() { vec![grid_center(&grid)] } else { s.anchors.clone() };
                Ok(ScanGrid::lattice((s.t_min, s.t_max), (s.r_min, s.r_max), s.per_decade, anchors)?.on_grid(&grid))
            }
        }
    }

    /// Hölder design; on grids the shifts are rounded to node multiples.
    pub fn holder_design(&self) -> Result<HolderDesign> {
        let h = &self.holder;
        let mut offsets = crate::scalar::log_space(h.delta_min, h.delta_max, h.delta_count);
        let mut anchors = if h.anchors.is_empty() {
            let mut x = vec![0.0; self.holder_dim()];
            x[0] = 0.7;
            vec![(x, vec![0.0; self.holder_dim()])]
        } else {
            h.anchors.clone()
        };
        if h.base == BaseKind::Grid {
            let grid = self.grid()?;
            let step = grid.spacing()[0];
            offsets = offsets.iter().map(|d| (d / step).round() * step).filter(|d| *d > 0.0).collect();
            offsets.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * step);
            if h.anchors.is_empty() {
                let c = grid_center(&grid);
                anchors = anchors
                    .into_iter()
                    .map(|(x, y)| {
                        (x.iter().zip(&c).map(|(a, b)| a + b).collect(), y.iter().zip(&c).map(|(a, b)| a + b).collect())
                    })
                    .collect();
            }
            // snap anchors so that shifted points stay on nodes
            anchors = anchors
                .into_iter()
                .map(|(x, y)| (grid.coords(grid.nearest(&x)), grid.coords(grid.nearest(&y))))
                .collect();
        }
        if offsets.len() < 3 {
            return Err(Error::Domain(format!(
                "holder shifts collapse to {} distinct node multiples; widen delta_min..delta_max",
                offsets.len()
            )));
        }
        Ok(HolderDesign { times: h.times.clone(), offsets, anchors })
    }

    pub fn holder_dim(&self) -> usize {
        match self.holder.base {
            BaseKind::Gaussian => self.holder.dim,
            BaseKind::Grid => self.grid.extent.len(),
        }
    }

    pub fn scan_dim(&self) -> usize {
        match self.scan.base {
            BaseKind::Gaussian => self.scan.dim,
            BaseKind::Grid => self.grid.extent.len(),
        }
    }

    pub fn stability_design(&self) -> StabilityDesign {
        StabilityDesign {
            epsilons: self.stability.epsilons.clone(),
            alpha: self.stable.alpha,
            times: self.stability.times.clone(),
            norms: self.stability.norms.clone(),
        }
    }

    pub fn direction(&self) -> Result<MatrixField<f64>> {
        let grid = self.grid()?;
        let cell = self.stability.direction_cell;
        Ok(match self.stability.direction {
            Direction::CheckerboardCells => MatrixField::checkerboard_cells(&grid, cell),
            Direction::CheckerboardSign => MatrixField::checkerboard_sign(&grid, cell),
            Direction::RandomSign => MatrixField::random_sign(&grid, cell, self.seed),
        })
    }
}

fn stable_params(s: &StableSection) -> Result<StableParams<f64>> {
    match (s.s_lo, s.s_hi) {
        (Some(lo), Some(hi)) => StableParams::with_thresholds(s.alpha, lo, hi, s.rel_tol),
        _ => StableParams::with_tolerance(s.alpha, s.rel_tol),
    }
}

fn build_grid(g: &GridSection) -> Result<Grid<f64>> {
    Grid::new(&g.extent, &g.points, g.boundary)?.with_origin(&g.origin)
}

fn build_coefficients(c: &CoefficientSection, grid: &Grid<f64>, seed: u64) -> Result<CoefficientField<f64>> {
    match c.preset {
        CoefficientPreset::Identity => CoefficientField::new(MatrixField::constant(grid, 1.0), c.lambda),
        CoefficientPreset::Checkerboard => CoefficientField::checkerboard(grid, c.lambda, c.cell),
        CoefficientPreset::SmoothBump => CoefficientField::smooth_bump(grid, c.lambda, c.width),
        CoefficientPreset::Random => CoefficientField::random(grid, c.lambda, c.cell, seed),
        CoefficientPreset::Inline => CoefficientField::inline(grid, &c.values, c.lambda),
    }
}

/// Node closest to the middle of the domain.
pub fn grid_center(grid: &Grid<f64>) -> Vec<f64> {
    let mid: Vec<f64> = grid.origin().iter().zip(grid.extent()).map(|(o, e)| o + e / 2.0).collect();
    grid.coords(grid.nearest(&mid))
}

/// Help text documenting every section and key.
pub fn config_help() -> String {
    let mut out = String::from(
        "CONFIG FILE\n  INI-style: `[section]` headers, `key = value` lines, `#` comments.\n  \
         Lists are `,`-separated. Unknown sections or keys are errors.\n",
    );
    let mut current = "";
    for key in KEYS {
        if key.section != current {
            current = key.section;
            let _ = writeln!(out, "\n  [{current}]");
        }
        let _ = writeln!(out, "    {:<16} default {:<26} {}", key.key, key.default, key.doc);
    }
    out.push_str("\n  Sections by experiment:\n");
    for kind in ExperimentKind::all() {
        let _ = writeln!(out, "    {:<17} {}", kind.name(), kind.sections().join(", "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_of(text: &str) -> (usize, String) {
        match parse_config(text) {
            Err(Error::Config { line, message }) => (line, message),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_density_config_gets_defaults() {
        let c = parse_config("[experiment]\nkind = density\n[stable]\nalpha = 0.5\n").unwrap();
        assert_eq!(c.kind, ExperimentKind::Density);
        assert_eq!(c.density, DensitySection { s_min: 0.01, s_max: 100.0, points: 100 });
        assert_eq!(c.stable.rel_tol, 1e-9);
        assert_eq!(c.output, "fracheat-density");
    }

    #[test]
    fn rejects_alpha_out_of_range() {
        let (line, msg) = line_of("[experiment]\nkind = density\n[stable]\n\nalpha = 1.5\n");
        assert_eq!(line, 5);
        assert!(msg.contains("alpha must lie in (0,1)"), "{msg}");
    }

    #[test]
    fn rejects_unknown_keys_and_sections_with_lines() {
        let base = "[experiment]\nkind = density\n[stable]\nalpha = 0.5\n";
        let (line, msg) = line_of(&format!("{base}bogus = 1\n"));
        assert_eq!(line, 5);
        assert!(msg.contains("unknown key `bogus`"));
        let (line, msg) = line_of(&format!("{base}[nowhere]\n"));
        assert_eq!((line, msg.contains("unknown section")), (5, true));
        let (line, msg) = line_of(&format!("{base}[scan]\n"));
        assert_eq!((line, msg.contains("not used by density")), (5, true));
        let (line, msg) = line_of(&format!("{base}[density]\npoints = many\n"));
        assert_eq!(line, 6);
        assert!(msg.contains("expected a nonnegative integer"));
        let (line, _) = line_of("[experiment]\nkind = density\n");
        assert_eq!(line, 2);
    }

    #[test]
    fn invariant_violations_point_at_the_key() {
        let base = "[experiment]\nkind = stability\n[stable]\nalpha = 0.5\n";
        let (line, msg) = line_of(&format!("{base}[grid]\nextent = 8\npoints = 1\n"));
        assert_eq!(line, 6, "{msg}");
        let (line, msg) = line_of(&format!("{base}[coefficients]\npreset = inline\nvalues = 1, 2\n"));
        assert_eq!(line, 7);
        assert!(msg.contains("inline"), "{msg}");
        let (line, _) = line_of(&format!("{base}[stability]\nepsilons = 0.1, -1\n"));
        assert_eq!(line, 6);
        let (line, _) = line_of(&format!("{base}[grid]\npoints = 100\nspectral_budget = 50\n"));
        assert_eq!(line, 6);
    }

    #[test]
    fn kind_must_agree_with_subcommand() {
        let text = "[experiment]\nkind = density\n[stable]\nalpha = 0.5\n";
        assert!(ExperimentConfig::parse(text, Some(ExperimentKind::Stability)).is_err());
        let no_kind = "[stable]\nalpha = 0.5\n";
        let c = ExperimentConfig::parse(no_kind, Some(ExperimentKind::LaplaceCheck)).unwrap();
        assert_eq!(c.kind, ExperimentKind::LaplaceCheck);
    }

    #[test]
    fn every_kind_round_trips_through_its_echo() {
        for kind in ExperimentKind::all() {
            let text = format!("[experiment]\nkind = {}\nseed = 7\n[stable]\nalpha = 0.3\n", kind.name());
            let c = parse_config(&text).unwrap();
            let echo = c.to_ini();
            let again = parse_config(&echo).unwrap_or_else(|e| panic!("{kind:?}: {e}\n{echo}"));
            assert_eq!(again, c, "{echo}");
            assert_eq!(again.to_ini(), echo);
        }
    }

    #[test]
    fn non_default_values_round_trip() {
        let text = "\
[experiment]
kind = holder-verify
output = somewhere/else
[stable]
alpha = 0.7
s_lo = 0.0247
s_hi = 2.1e11
[quadrature]
abs_tol = 1e-30
[grid]
extent = 6, 4
points = 13, 9
boundary = neumann
origin = -3, -2
[coefficients]
preset = inline
lambda = 3
values = 1, 0, 1.5
[holder]
base = grid
times = 0.25, 4
anchors = 0.5, 0 | 0, 0; -1, 1 | 1, -1
";
        let mut text = text.to_string();
        let values: Vec<String> =
            (0..13 * 9).map(|i| format!("{}, 0.1, {}", 1.0 + (i % 3) as f64 * 0.5, 1.25)).collect();
        text = text.replace("values = 1, 0, 1.5", &format!("values = {}", values.join(", ")));
        let c = parse_config(&text).unwrap();
        assert_eq!(c.holder.anchors.len(), 2);
        assert_eq!(c.stable.s_hi, Some(2.1e11));
        assert_eq!(parse_config(&c.to_ini()).unwrap(), c);
    }

    #[test]
    fn help_mentions_every_key() {
        let help = config_help();
        for key in KEYS {
            assert!(help.contains(key.key), "{}", key.key);
        }
        for kind in ExperimentKind::all() {
            for s in kind.sections() {
                assert!(KEYS.iter().any(|k| k.section == *s));
            }
        }
    }

    #[test]
    fn grid_holder_design_snaps_to_nodes() {
        let text = "[experiment]\nkind = holder-verify\n[stable]\nalpha = 0.5\n[grid]\nextent = 8\npoints = 129\n[holder]\nbase = grid\n";
        let c = parse_config(text).unwrap();
        let d = c.holder_design().unwrap();
        let h = 8.0 / 128.0;
        assert!(d.offsets.iter().all(|o| ((o / h) - (o / h).round()).abs() < 1e-9));
        assert!(d.offsets.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(d.anchors[0].1, vec![4.0]);
    }
}
