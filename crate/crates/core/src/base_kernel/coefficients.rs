use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid::Grid;
use crate::error::{domain, Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Symmetric 2×2 matrix; in one dimension only `xx` is used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat<T> {
    pub xx: T,
    pub xy: T,
    pub yy: T,
}

impl<T: Real> SymMat<T> {
    pub fn scalar(c: T) -> Self {
        Self { xx: c, xy: T::zero(), yy: c }
    }

    pub fn zero() -> Self {
        Self::scalar(T::zero())
    }

    /// Eigenvalues in increasing order, restricted to the first `dim` axes.
    pub fn eigenvalues(&self, dim: usize) -> (T, T) {
        if dim == 1 {
            return (self.xx, self.xx);
        }
        let mean = (self.xx + self.yy) * lit(0.5);
        let half = (self.xx - self.yy) * lit(0.5);
        let rad = (half * half + self.xy * self.xy).sqrt();
        (mean - rad, mean + rad)
    }

    fn add_scaled(&self, other: &Self, eps: T) -> Self {
        Self { xx: self.xx + eps * other.xx, xy: self.xy + eps * other.xy, yy: self.yy + eps * other.yy }
    }
}

/// A symmetric-matrix-valued function sampled at the grid nodes, with no
/// ellipticity requirement. Used for perturbation directions.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField<T> {
    grid: Grid<T>,
    values: Vec<SymMat<T>>,
}

impl<T: Real> MatrixField<T> {
    pub fn new(grid: &Grid<T>, values: Vec<SymMat<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} coefficient values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid: grid.clone(), values })
    }

    pub fn from_fn(grid: &Grid<T>, f: impl Fn(&[T]) -> SymMat<T>) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Self { grid: grid.clone(), values }
    }

    /// `Id` everywhere.
    pub fn constant(grid: &Grid<T>, c: T) -> Self {
        Self::from_fn(grid, |_| SymMat::scalar(c))
    }

    /// `±Id` alternating over cells of side `cell`; `+` on the cell containing the origin.
    pub fn checkerboard_sign(grid: &Grid<T>, cell: T) -> Self {
        let origin = grid.origin().to_vec();
        Self::from_fn(grid, |x| SymMat::scalar(if cell_parity(x, &origin, cell) { T::one() } else { -T::one() }))
    }

    /// `Id` on the `+` cells of [`Self::checkerboard_sign`], zero on the others.
    pub fn checkerboard_cells(grid: &Grid<T>, cell: T) -> Self {
        let origin = grid.origin().to_vec();
        Self::from_fn(grid, |x| SymMat::scalar(if cell_parity(x, &origin, cell) { T::one() } else { T::zero() }))
    }

    /// Independent uniform `[-1, 1]` multiples of `Id`, one per cell of side `cell`.
    pub fn random_sign(grid: &Grid<T>, cell: T, seed: u64) -> Self {
        let table = cell_table(grid, cell, seed, |rng| rng.gen_range(-1.0..=1.0));
        let origin = grid.origin().to_vec();
        Self::from_fn(grid, |x| SymMat::scalar(lit(table.lookup(x, &origin, cell))))
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[SymMat<T>] {
        &self.values
    }

    pub fn at(&self, i: usize) -> SymMat<T> {
        self.values[i]
    }

    /// Component list per node: `[xx]` in 1D, `[xx, xy, yy]` in 2D.
    pub fn components(&self, i: usize) -> Vec<T> {
        let m = self.values[i];
        if self.grid.dim() == 1 {
            vec![m.xx]
        } else {
            vec![m.xx, m.xy, m.yy]
        }
    }
}

/// Uniformly elliptic coefficient field `a(x)` with `λ⁻¹ ≤ a(x) ≤ λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField<T> {
    field: MatrixField<T>,
    lambda: T,
}

impl<T: Real> CoefficientField<T> {
    /// Checks ellipticity at every node; the error names the first offending point.
    pub fn new(field: MatrixField<T>, lambda: T) -> Result<Self> {
        if !(lambda >= T::one() && lambda.is_finite()) {
            return Err(domain(format!("ellipticity constant must be at least 1, got {lambda}")));
        }
        let dim = field.grid.dim();
        let slack = lit::<T>(1e-12);
        let (lo_bound, hi_bound) = (lambda.recip() * (T::one() - slack), lambda * (T::one() + slack));
        for (i, m) in field.values.iter().enumerate() {
            let (lo, hi) = m.eigenvalues(dim);
            if !(lo >= lo_bound && hi <= hi_bound) {
                return Err(Error::Ellipticity {
                    point: field.grid.multi_index(i),
                    detail: format!(
                        "eigenvalues [{:.6e}, {:.6e}] outside [1/{lambda}, {lambda}]",
                        to_f64(lo),
                        to_f64(hi)
                    ),
                });
            }
        }
        Ok(Self { field, lambda })
    }

    pub fn identity(grid: &Grid<T>) -> Self {
        Self::new(MatrixField::constant(grid, T::one()), T::one()).expect("identity is elliptic")
    }

    /// `c·Id`, with `λ = max(c, 1/c)`.
    pub fn scaled_identity(grid: &Grid<T>, c: T) -> Result<Self> {
        if !(c > T::zero()) {
            return Err(domain(format!("scale must be positive, got {c}")));
        }
        Self::new(MatrixField::constant(grid, c), c.max(c.recip()))
    }

    /// `λ·Id` and `λ⁻¹·Id` alternating over cells of side `cell`.
    pub fn checkerboard(grid: &Grid<T>, lambda: T, cell: T) -> Result<Self> {
        check_cell(cell)?;
        let origin = grid.origin().to_vec();
        let f = MatrixField::from_fn(grid, |x| {
            SymMat::scalar(if cell_parity(x, &origin, cell) { lambda } else { lambda.recip() })
        });
        Self::new(f, lambda)
    }

    /// `(1 + (λ-1)·exp(-|x-c|²/w²))·Id` with `c` the domain center.
    pub fn smooth_bump(grid: &Grid<T>, lambda: T, width: T) -> Result<Self> {
        if !(width > T::zero()) {
            return Err(domain(format!("bump width must be positive, got {width}")));
        }
        let center: Vec<T> = grid.origin().iter().zip(grid.extent()).map(|(&o, &e)| o + e * lit(0.5)).collect();
        let f = MatrixField::from_fn(grid, |x| {
            let r2 = x.iter().zip(&center).fold(T::zero(), |acc, (&p, &c)| acc + (p - c) * (p - c));
            SymMat::scalar(T::one() + (lambda - T::one()) * (-r2 / (width * width)).exp())
        });
        Self::new(f, lambda)
    }

    /// Log-uniform random multiples of `Id` in `[λ⁻¹, λ]`, constant on cells of side `cell`.
    pub fn random(grid: &Grid<T>, lambda: T, cell: T, seed: u64) -> Result<Self> {
        check_cell(cell)?;
        let ll = to_f64(lambda).ln();
        let table = cell_table(grid, cell, seed, |rng| (rng.gen_range(-1.0..=1.0) * ll).exp());
        let origin = grid.origin().to_vec();
        let f = MatrixField::from_fn(grid, |x| SymMat::scalar(lit(table.lookup(x, &origin, cell))));
        Self::new(f, lambda)
    }

    /// Explicit per-node components: one value per node in 1D, `(xx, xy, yy)` in 2D.
    pub fn inline(grid: &Grid<T>, components: &[T], lambda: T) -> Result<Self> {
        let per = if grid.dim() == 1 { 1 } else { 3 };
        if components.len() != per * grid.len() {
            return Err(Error::Shape(format!(
                "expected {} inline coefficient values, got {}",
                per * grid.len(),
                components.len()
            )));
        }
        let values = components
            .chunks(per)
            .map(|c| match c {
                [v] => SymMat::scalar(*v),
                [xx, xy, yy] => SymMat { xx: *xx, xy: *xy, yy: *yy },
                _ => unreachable!(),
            })
            .collect();
        Self::new(MatrixField::new(grid, values)?, lambda)
    }

    /// `a + ε·direction`, checked against the same `λ`.
    pub fn perturbed(&self, direction: &MatrixField<T>, eps: T) -> Result<Self> {
        if !self.field.grid.conforms(&direction.grid) {
            return Err(domain("perturbation lives on a different grid"));
        }
        let values = self.field.values.iter().zip(&direction.values).map(|(a, d)| a.add_scaled(d, eps)).collect();
        Self::new(MatrixField::new(&self.field.grid, values)?, self.lambda)
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }
    pub fn grid(&self) -> &Grid<T> {
        &self.field.grid
    }
    pub fn field(&self) -> &MatrixField<T> {
        &self.field
    }
    pub fn at(&self, i: usize) -> SymMat<T> {
        self.field.values[i]
    }
}

fn check_cell<T: Real>(cell: T) -> Result<()> {
    if cell > T::zero() && cell.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("cell size must be positive, got {cell}")))
    }
}

fn cell_of<T: Real>(x: &[T], origin: &[T], cell: T) -> Vec<i64> {
    // nodes on a cell boundary go to the upper cell regardless of rounding
    x.iter().zip(origin).map(|(&p, &o)| (to_f64((p - o) / cell) + 1e-9).floor() as i64).collect()
}

fn cell_parity<T: Real>(x: &[T], origin: &[T], cell: T) -> bool {
    cell_of(x, origin, cell).iter().sum::<i64>().rem_euclid(2) == 0
}

struct CellTable {
    counts: Vec<i64>,
    values: Vec<f64>,
}

impl CellTable {
    fn lookup<T: Real>(&self, x: &[T], origin: &[T], cell: T) -> f64 {
        let c = cell_of(x, origin, cell);
        let mut flat = 0usize;
        for a in (0..c.len()).rev() {
            flat = flat * self.counts[a] as usize + c[a].clamp(0, self.counts[a] - 1) as usize;
        }
        self.values[flat]
    }
}

fn cell_table<T: Real>(grid: &Grid<T>, cell: T, seed: u64, mut draw: impl FnMut(&mut ChaCha8Rng) -> f64) -> CellTable {
    let counts: Vec<i64> = grid.extent().iter().map(|&e| (to_f64(e / cell) + 1e-9).floor() as i64 + 1).collect();
    let total: i64 = counts.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..total).map(|_| draw(&mut rng)).collect();
    CellTable { counts, values }
}
