//! Base heat kernels of `H = ∇·(a(x)∇)`: the free-space Gaussian in closed form
//! and grid discretizations with variable, uniformly elliptic coefficients.

mod aronson;
mod coefficients;
mod grid;
mod kernel;
mod operator;

pub use aronson::aronson_check;
pub use coefficients::{CoefficientField, MatrixField, SymMat};
pub use grid::{Boundary, Grid};
pub use kernel::{gaussian_gradient, gaussian_kernel, heat_kernel_matrix, KernelField, KernelKind};
pub use operator::{assemble_operator, CsrMatrix, DiscreteEllipticOperator, Spectrum, DEFAULT_SPECTRAL_BUDGET};
