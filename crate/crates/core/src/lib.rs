//! Heat kernels and semigroups of fractional powers `-(-H)^α` of divergence-form
//! elliptic operators `H = ∇·(a(x)∇)`, computed by subordination with the
//! one-sided α-stable law, plus empirical checks of gradient, two-sided, Hölder
//! and coefficient-stability estimates.
//!
//! The numerical core is generic over the scalar type (see [`Real`]); the
//! aliases at the crate root fix it to `f64`.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod base_kernel;
pub mod cli_report;
pub mod error;
pub mod quadrature;
pub mod scalar;
pub mod special;
pub mod subordination;
pub mod subordinator;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

pub type StableParams = subordinator::StableParams<f64>;
pub type Grid = base_kernel::Grid<f64>;
pub type CoefficientField = base_kernel::CoefficientField<f64>;
pub type MatrixField = base_kernel::MatrixField<f64>;
pub type DiscreteEllipticOperator = base_kernel::DiscreteEllipticOperator<f64>;
pub type KernelField = base_kernel::KernelField<f64>;
pub type SubordinationRule = subordination::SubordinationRule<f64>;
pub use subordination::QuadratureSpec;
