//! Empirical constants and exponents of the gradient, two-sided, Hölder and
//! stability estimates, measured over parameter scans.

mod fit;
mod holder;
mod report;
mod scan;
mod stability;

pub use holder::{holder_fit, HolderDesign, HolderResult, HolderSample, DIFFERENCE_FLOOR};
pub use report::{BoundReport, FittedExponent, Witness};
pub use scan::{
    bound_shape, gradient_ratio_scan, two_sided_ratio_scan, Evaluator, PairSample, ScanGrid, ScanResult, DRIFT_LIMIT,
};
pub use stability::{
    fit_envelope, kernel_distance_sup, l2loc_norm, matrix_norm, semigroup_distance, stability_experiment, EnvelopeFit,
    NormSelector, StabilityDesign, StabilityResult, StabilityRow,
};

#[cfg(test)]
mod tests;
