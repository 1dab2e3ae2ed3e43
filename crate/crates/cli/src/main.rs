use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracheat_core::acceptance::{run_all, CriterionOutcome};
use fracheat_core::cli_report::{config_help, run_experiment, ExperimentConfig, ExperimentKind, RunBundle};

/// Fractional-power heat kernels by stable subordination, with bound verification.
#[derive(Parser)]
#[command(name = "fracheat", version, after_long_help = config_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// INI configuration file (see `fracheat --help` for the keys).
    #[arg(long)]
    config: PathBuf,
    /// Run directory; overrides `[experiment] output`. Must be absent or empty.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Accepted for symmetry with the other subcommands; the suite is self-contained.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for one `criterion_XX.csv` per criterion. Must be absent or empty.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the one-sided stable density.
    Density(RunArgs),
    /// Check the Laplace transform of the stable density.
    LaplaceCheck(RunArgs),
    /// Evaluate the subordinated kernel on a grid operator.
    Kernel(RunArgs),
    /// Verify the gradient estimate.
    GradientVerify(RunArgs),
    /// Verify the two-sided estimate.
    TwoSidedVerify(RunArgs),
    /// Verify the Hölder estimate.
    HolderVerify(RunArgs),
    /// Measure stability under coefficient perturbations.
    Stability(RunArgs),
    /// Compare quadrature kernels against closed forms.
    OracleCompare(RunArgs),
    /// Run the acceptance suite.
    Selftest(SelftestArgs),
}

fn pool(threads: Option<usize>) -> Result<(), String> {
    match threads {
        Some(0) => Err("--threads must be at least 1".into()),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string()),
        None => Ok(()),
    }
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<RunBundle, String> {
    pool(args.threads)?;
    let text = fs::read_to_string(&args.config).map_err(|e| format!("{}: {e}", args.config.display()))?;
    let config = ExperimentConfig::parse(&text, Some(kind)).map_err(|e| format!("{}: {e}", args.config.display()))?;
    run_experiment(&config, args.out.as_deref()).map_err(|e| e.to_string())
}

fn summary(bundle: &RunBundle) {
    let verdict = match bundle.verdict() {
        Some(true) => "pass",
        Some(false) => "fail",
        None => "none",
    };
    println!("{}: verdict {verdict}", bundle.config.kind.name());
    for (k, v) in &bundle.report.constants {
        println!("  {k} = {v:.6e}");
    }
    for (k, e) in &bundle.report.exponents {
        println!("  {k} = {:.6} (R² {:.4})", e.value, e.r_squared);
    }
    for e in &bundle.errors {
        eprintln!("error: {e}");
    }
    println!("  output: {}", bundle.dir.display());
}

fn empty_dir(dir: &Path) -> Result<(), String> {
    if let Ok(mut entries) = fs::read_dir(dir) {
        if entries.next().is_some() {
            return Err(format!("{}: refusing to write into a non-empty directory", dir.display()));
        }
    }
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))
}

fn selftest(args: &SelftestArgs) -> Result<Vec<CriterionOutcome>, String> {
    pool(args.threads)?;
    if let Some(dir) = &args.out {
        empty_dir(dir)?;
    }
    let mut write_error = None;
    let outcomes = run_all(|o| {
        println!("{}", o.line());
        if let (Some(dir), None) = (&args.out, &write_error) {
            if !o.data.is_empty() {
                if let Err(e) = o.data.write(&dir.join(o.file_name())) {
                    write_error = Some(e.to_string());
                }
            }
        }
    });
    match write_error {
        Some(e) => Err(e),
        None => Ok(outcomes),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Selftest(args) => {
            return match selftest(args) {
                Ok(outcomes) => {
                    let failed = outcomes.iter().filter(|o| !o.passed).count();
                    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
                    ExitCode::from(u8::from(failed > 0))
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Density(a) => (ExperimentKind::Density, a),
        Command::LaplaceCheck(a) => (ExperimentKind::LaplaceCheck, a),
        Command::Kernel(a) => (ExperimentKind::Kernel, a),
        Command::GradientVerify(a) => (ExperimentKind::GradientVerify, a),
        Command::TwoSidedVerify(a) => (ExperimentKind::TwoSidedVerify, a),
        Command::HolderVerify(a) => (ExperimentKind::HolderVerify, a),
        Command::Stability(a) => (ExperimentKind::Stability, a),
        Command::OracleCompare(a) => (ExperimentKind::OracleCompare, a),
    };
    match run(kind, args) {
        Ok(bundle) => {
            summary(&bundle);
            ExitCode::from(bundle.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
