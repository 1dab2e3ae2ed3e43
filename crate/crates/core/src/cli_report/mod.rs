//! Configuration files, experiment runs and their CSV/JSON output.

mod config;
mod ini;
mod run;

pub use config::{
    config_help, grid_center, parse_config, BaseKind, CoefficientPreset, CoefficientSection, DensitySection, Direction,
    ExperimentConfig, ExperimentKind, GridSection, HolderSection, KernelMethod, KernelSection, KeyDoc, LaplaceSection,
    ScanSection, StabilitySection, StableSection, KEYS,
};
pub use ini::{Document, Entry, Section};
pub use run::{emit_plotdata, execute, run_experiment, Cell, Outcome, RunBundle, Table};
