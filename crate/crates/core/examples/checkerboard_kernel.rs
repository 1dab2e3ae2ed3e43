//! Fractional-power kernel of a 1D checkerboard operator, quadrature against the exact spectral kernel.

use fracheat_core::base_kernel::{assemble_operator, Boundary};
use fracheat_core::subordination::{spectral_oracle, subordinate_matrix};
use fracheat_core::{CoefficientField, Grid, QuadratureSpec, StableParams, SubordinationRule};

fn main() -> fracheat_core::Result<()> {
    let grid = Grid::line(16.0, 129, Boundary::Neumann)?;
    let a = CoefficientField::checkerboard(&grid, 2.0, 1.0)?;
    let op = assemble_operator(&grid, &a)?;

    let params = StableParams::new(0.5)?;
    let rule = SubordinationRule::new(params.clone(), QuadratureSpec::for_alpha(&params))?;
    let q = subordinate_matrix(&op, &rule, 1.0)?;
    let exact = spectral_oracle(&op, 0.5, 1.0)?;
    println!("max |q - q_exact| = {:e}", (q.matrix() - exact.matrix()).amax());
    Ok(())
}
