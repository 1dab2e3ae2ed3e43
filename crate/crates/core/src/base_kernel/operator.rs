use std::collections::BTreeMap;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::coefficients::{CoefficientField, SymMat};
use super::grid::{Boundary, Grid};
use crate::error::{domain, Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Largest operator handled by the dense eigensolver unless overridden.
pub const DEFAULT_SPECTRAL_BUDGET: usize = 4096;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    fn from_rows(rows: Vec<BTreeMap<usize, T>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx, values }
    }

    pub fn from_dense(m: &DMatrix<T>) -> Self {
        let rows = (0..m.nrows())
            .map(|i| (0..m.ncols()).filter(|&j| m[(i, j)] != T::zero()).map(|j| (j, m[(i, j)])).collect())
            .collect();
        Self::from_rows(rows)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.row(i).find(|&(c, _)| c == j).map_or(T::zero(), |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &DVector<T>) -> DVector<T> {
        DVector::from_iterator(self.n, (0..self.n).map(|i| self.row(i).fold(T::zero(), |acc, (j, v)| acc + v * x[j])))
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n).map(|i| self.row(i).fold(T::zero(), |acc, (_, v)| acc + v)).collect()
    }

    fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Eigen-decomposition `H = V diag(μ) Vᵀ` with `μ_k ≤ 0`, eigenvalues ascending in `|μ|`.
#[derive(Debug, Clone)]
pub struct Spectrum<T: Real> {
    pub eigenvalues: DVector<T>,
    pub vectors: DMatrix<T>,
    pub cell_volume: T,
}

impl<T: Real> Spectrum<T> {
    /// Kernel matrix of `f(H)`: `V diag(f(μ)) Vᵀ / h^d`.
    pub fn kernel_of(&self, f: impl Fn(T) -> T) -> DMatrix<T> {
        let factors = self.eigenvalues.map(f);
        self.kernel_from_factors(&factors)
    }

    pub fn kernel_from_factors(&self, factors: &DVector<T>) -> DMatrix<T> {
        let mut scaled = self.vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= factors[k];
        }
        (scaled * self.vectors.transpose()) / self.cell_volume
    }

    /// Coordinates of a grid function in the eigenbasis.
    pub fn project(&self, f: &DVector<T>) -> DVector<T> {
        self.vectors.tr_mul(f)
    }

    pub fn synthesize(&self, coeffs: &DVector<T>) -> DVector<T> {
        &self.vectors * coeffs
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest nonzero eigenvalue (closest to zero), or `None` if all vanish.
    pub fn gap(&self) -> Option<T> {
        self.eigenvalues.iter().copied().find(|&m| m < T::zero())
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Finite-volume discretization of `∇·(a∇)`: symmetric, negative semidefinite.
#[derive(Debug)]
pub struct DiscreteEllipticOperator<T: Real> {
    matrix: CsrMatrix<T>,
    grid: Option<Grid<T>>,
    cell_volume: T,
    lambda: T,
    budget: usize,
    spectrum: OnceLock<Spectrum<T>>,
}

impl<T: Real> Clone for DiscreteEllipticOperator<T> {
    fn clone(&self) -> Self {
        let spectrum = OnceLock::new();
        if let Some(s) = self.spectrum.get() {
            let _ = spectrum.set(s.clone());
        }
        Self {
            matrix: self.matrix.clone(),
            grid: self.grid.clone(),
            cell_volume: self.cell_volume,
            lambda: self.lambda,
            budget: self.budget,
            spectrum,
        }
    }
}

impl<T: Real> DiscreteEllipticOperator<T> {
    /// Operator given directly by a symmetric matrix, with node volume `cell_volume`.
    pub fn from_matrix(matrix: DMatrix<T>, cell_volume: T) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::Shape(format!(
                "operator matrix must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !(cell_volume > T::zero()) {
            return Err(domain("cell volume must be positive"));
        }
        let op = Self {
            matrix: CsrMatrix::from_dense(&matrix),
            grid: None,
            cell_volume,
            lambda: T::one(),
            budget: DEFAULT_SPECTRAL_BUDGET,
            spectrum: OnceLock::new(),
        };
        let scale = matrix.amax().max(T::one());
        if op.matrix.asymmetry() > T::eps() * lit::<T>(16.0) * scale {
            return Err(domain("operator matrix is not symmetric"));
        }
        Ok(op)
    }

    pub fn with_spectral_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }
    pub fn grid(&self) -> Option<&Grid<T>> {
        self.grid.as_ref()
    }
    pub fn cell_volume(&self) -> T {
        self.cell_volume
    }
    pub fn lambda(&self) -> T {
        self.lambda
    }
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
    pub fn boundary(&self) -> Option<Boundary> {
        self.grid.as_ref().map(Grid::boundary)
    }

    /// Whether constants lie in the kernel (Neumann grid, or zero row sums).
    pub fn conserves_mass(&self) -> bool {
        match self.boundary() {
            Some(b) => b == Boundary::Neumann,
            None => {
                let scale = self.matrix.values.iter().fold(T::one(), |m, v| m.max(v.abs()));
                self.matrix.row_sums().iter().all(|s| s.abs() <= T::eps() * lit::<T>(64.0) * scale)
            }
        }
    }

    /// Cached eigen-decomposition; computed on first use.
    pub fn spectrum(&self) -> Result<&Spectrum<T>> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let n = self.dim();
        if n > self.budget {
            return Err(Error::Capacity { size: n, budget: self.budget });
        }
        let eig = SymmetricEigen::try_new(self.matrix.to_dense(), T::eps(), 0)
            .ok_or_else(|| Error::Numeric("symmetric eigendecomposition did not converge".into()))?;
        let scale = eig.eigenvalues.amax().max(T::one());
        let tol = lit::<T>(1e-10).max(T::eps() * lit(1e3)) * scale;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).expect("finite eigenvalues"));
        let mut eigenvalues = DVector::zeros(n);
        let mut vectors = DMatrix::zeros(n, n);
        for (k, &src) in order.iter().enumerate() {
            let mu = eig.eigenvalues[src];
            if mu > tol {
                return Err(Error::Numeric(format!(
                    "operator is not negative semidefinite: eigenvalue {:e}",
                    to_f64(mu)
                )));
            }
            // round-off around a null space is snapped to an exact zero
            eigenvalues[k] = if mu.abs() <= tol { T::zero() } else { mu };
            vectors.set_column(k, &eig.eigenvectors.column(src));
        }
        let s = Spectrum { eigenvalues, vectors, cell_volume: self.cell_volume };
        Ok(self.spectrum.get_or_init(|| s))
    }

    /// `H f` on a grid function.
    pub fn apply(&self, f: &DVector<T>) -> DVector<T> {
        self.matrix.mul_vec(f)
    }
}

/// Second-order finite-volume stencil for `∇·(a∇)`.
///
/// Edge coefficients are harmonic means of the nodal diagonal entries. The 2D
/// cross term `a_xy` is averaged arithmetically over each cell and split over its
/// four corners, each pairing the x-edge and y-edge that meet there. Dirichlet
/// grids are assembled on the grid extended by one ghost layer (coefficients
/// copied from the nearest node) and restricted to the real nodes.
pub fn assemble_operator<T: Real>(grid: &Grid<T>, a: &CoefficientField<T>) -> Result<DiscreteEllipticOperator<T>> {
    if !grid.conforms(a.grid()) {
        return Err(domain("coefficient field lives on a different grid"));
    }
    let ghost = usize::from(grid.boundary() == Boundary::Dirichlet);
    let dims: Vec<usize> = grid.points().iter().map(|&n| n + 2 * ghost).collect();
    let ext = Extended { grid, a, ghost, dims: &dims };
    let rows = match grid.dim() {
        1 => ext.assemble_1d(),
        _ => ext.assemble_2d()?,
    };
    let matrix = CsrMatrix::from_rows(rows);
    Ok(DiscreteEllipticOperator {
        matrix,
        grid: Some(grid.clone()),
        cell_volume: grid.cell_volume(),
        lambda: a.lambda(),
        budget: DEFAULT_SPECTRAL_BUDGET,
        spectrum: OnceLock::new(),
    })
}

struct Extended<'a, T: Real> {
    grid: &'a Grid<T>,
    a: &'a CoefficientField<T>,
    ghost: usize,
    dims: &'a [usize],
}

impl<T: Real> Extended<'_, T> {
    /// Real-node index of an extended index, or `None` for a ghost.
    fn real(&self, idx: &[usize]) -> Option<usize> {
        let mut r = Vec::with_capacity(idx.len());
        for (a, &i) in idx.iter().enumerate() {
            let i = i.checked_sub(self.ghost)?;
            if i >= self.grid.points()[a] {
                return None;
            }
            r.push(i);
        }
        Some(self.grid.flat_index(&r))
    }

    fn coeff(&self, idx: &[usize]) -> SymMat<T> {
        let clamped: Vec<usize> =
            idx.iter().enumerate().map(|(a, &i)| i.saturating_sub(self.ghost).min(self.grid.points()[a] - 1)).collect();
        self.a.at(self.grid.flat_index(&clamped))
    }

    fn add(&self, rows: &mut [BTreeMap<usize, T>], i: &[usize], j: &[usize], v: T) {
        if let (Some(r), Some(c)) = (self.real(i), self.real(j)) {
            *rows[r].entry(c).or_insert(T::zero()) += v;
        }
    }

    /// Adds `-w·(e_p - e_q)(e_p - e_q)ᵀ`, the edge term of `-∇ᵀ w ∇`.
    fn edge(&self, rows: &mut [BTreeMap<usize, T>], p: &[usize], q: &[usize], w: T) {
        self.add(rows, p, p, -w);
        self.add(rows, q, q, -w);
        self.add(rows, p, q, w);
        self.add(rows, q, p, w);
    }

    fn assemble_1d(&self) -> Vec<BTreeMap<usize, T>> {
        let mut rows = vec![BTreeMap::new(); self.grid.len()];
        let h = self.grid.spacing()[0];
        for i in 0..self.dims[0] - 1 {
            let w = harmonic(self.coeff(&[i]).xx, self.coeff(&[i + 1]).xx) / (h * h);
            self.edge(&mut rows, &[i], &[i + 1], w);
        }
        rows
    }

    fn assemble_2d(&self) -> Result<Vec<BTreeMap<usize, T>>> {
        let mut rows = vec![BTreeMap::new(); self.grid.len()];
        let (hx, hy) = (self.grid.spacing()[0], self.grid.spacing()[1]);
        let (nx, ny) = (self.dims[0], self.dims[1]);
        let x_edge = |i: usize, j: usize| harmonic(self.coeff(&[i, j]).xx, self.coeff(&[i + 1, j]).xx);
        let y_edge = |i: usize, j: usize| harmonic(self.coeff(&[i, j]).yy, self.coeff(&[i, j + 1]).yy);
        for j in 0..ny {
            for i in 0..nx - 1 {
                self.edge(&mut rows, &[i, j], &[i + 1, j], x_edge(i, j) / (hx * hx));
            }
        }
        for j in 0..ny - 1 {
            for i in 0..nx {
                self.edge(&mut rows, &[i, j], &[i, j + 1], y_edge(i, j) / (hy * hy));
            }
        }
        // cross term: corner (ci, cj) of cell (i, j) pairs the x-edge on row cj and
        // the y-edge on column ci; each corner carries a quarter of 2·a_xy·∂x u·∂y u
        let quarter = lit::<T>(0.25);
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let axy = (self.coeff(&[i, j]).xy
                    + self.coeff(&[i + 1, j]).xy
                    + self.coeff(&[i, j + 1]).xy
                    + self.coeff(&[i + 1, j + 1]).xy)
                    * quarter;
                if axy == T::zero() {
                    continue;
                }
                for (cj, ci) in [(j, i), (j, i + 1), (j + 1, i), (j + 1, i + 1)] {
                    let shares_x = if cj == 0 || cj == ny - 1 { 1 } else { 2 };
                    let shares_y = if ci == 0 || ci == nx - 1 { 1 } else { 2 };
                    let ax = x_edge(i, cj);
                    let ay = y_edge(ci, j);
                    if axy * axy > lit::<T>(4.0) * ax * ay / lit(f64::from(shares_x * shares_y)) {
                        let point = vec![
                            (ci.saturating_sub(self.ghost)).min(self.grid.points()[0] - 1),
                            (cj.saturating_sub(self.ghost)).min(self.grid.points()[1] - 1),
                        ];
                        return Err(Error::Ellipticity {
                            point,
                            detail: format!(
                                "cross coefficient {:.6e} too large for the 9-point stencil (edge coefficients {:.6e}, {:.6e})",
                                to_f64(axy),
                                to_f64(ax),
                                to_f64(ay)
                            ),
                        });
                    }
                    // -(a_xy/4)(c_x c_yᵀ + c_y c_xᵀ) with c_x = (e_{i+1,cj} - e_{i,cj})/hx etc.
                    let cx = [([i + 1, cj], T::one() / hx), ([i, cj], -T::one() / hx)];
                    let cy = [([ci, j + 1], T::one() / hy), ([ci, j], -T::one() / hy)];
                    for (p, vp) in &cx {
                        for (q, vq) in &cy {
                            let v = -axy * quarter * *vp * *vq;
                            self.add(&mut rows, p, q, v);
                            self.add(&mut rows, q, p, v);
                        }
                    }
                }
            }
        }
        Ok(rows)
    }
}

fn harmonic<T: Real>(a: T, b: T) -> T {
    lit::<T>(2.0) * a * b / (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_kernel::MatrixField;

    fn line(n: usize, h: f64, b: Boundary) -> Grid<f64> {
        Grid::line(h * (n - 1) as f64, n, b).unwrap()
    }

    #[test]
    fn three_point_dirichlet_stencil() {
        let g = line(3, 1.0, Boundary::Dirichlet);
        let op = assemble_operator(&g, &CoefficientField::identity(&g)).unwrap();
        let m = op.matrix().to_dense();
        let expected = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.0, 1.0, -2.0, 1.0, 0.0, 1.0, -2.0]);
        assert_eq!(m, expected);
    }

    #[test]
    fn scaling_coefficient_scales_matrix() {
        let g = Grid::square(2.0_f64, 5, Boundary::Neumann).unwrap();
        let a1 = assemble_operator(&g, &CoefficientField::identity(&g)).unwrap();
        let a3 = assemble_operator(&g, &CoefficientField::scaled_identity(&g, 3.0).unwrap()).unwrap();
        let diff = a3.matrix().to_dense() - a1.matrix().to_dense() * 3.0;
        assert!(diff.amax() < 1e-12);
    }

    #[test]
    fn dirichlet_spectrum_matches_closed_form() {
        let n = 20;
        let h = 0.3;
        let g = line(n, h, Boundary::Dirichlet);
        let op = assemble_operator(&g, &CoefficientField::identity(&g)).unwrap();
        let spec = op.spectrum().unwrap();
        for k in 1..=n {
            let exact = -(2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n + 1) as f64).cos()) / (h * h);
            assert!((spec.eigenvalues[k - 1] - exact).abs() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn dirichlet_2d_spectrum_is_sum_of_1d() {
        let g = Grid::square(1.0_f64, 6, Boundary::Dirichlet).unwrap();
        let op = assemble_operator(&g, &CoefficientField::identity(&g)).unwrap();
        let h: f64 = 0.2;
        let one_d: Vec<f64> =
            (1..=6).map(|k| -(2.0 - 2.0 * (k as f64 * std::f64::consts::PI / 7.0).cos()) / (h * h)).collect();
        let mut sums: Vec<f64> = one_d.iter().flat_map(|a| one_d.iter().map(move |b| a + b)).collect();
        sums.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let spec = op.spectrum().unwrap();
        for (k, s) in sums.iter().enumerate() {
            assert!((spec.eigenvalues[k] - s).abs() < 1e-9);
        }
    }

    #[test]
    fn neumann_rows_sum_to_zero_with_cross_terms() {
        let g = Grid::square(3.0_f64, 7, Boundary::Neumann).unwrap();
        let f = MatrixField::from_fn(&g, |x| SymMat { xx: 1.5 + 0.2 * x[0].sin(), xy: 0.3, yy: 1.0 });
        let a = CoefficientField::new(f, 2.0).unwrap();
        let op = assemble_operator(&g, &a).unwrap();
        assert!(op.matrix().row_sums().iter().all(|s| s.abs() < 1e-12));
        assert!(op.matrix().asymmetry() < 1e-13);
        let spec = op.spectrum().unwrap();
        assert!(spec.eigenvalues.iter().all(|&m| m <= 0.0));
        assert!(spec.eigenvalues[0].abs() < 1e-10);
        assert!(op.conserves_mass());
    }

    #[test]
    fn rotated_anisotropy_matches_rotated_spectrum_limit() {
        // a = R diag(2, 1/2) Rᵀ at 45°: constant, so smooth modes see a_xx u_xx + 2 a_xy u_xy + a_yy u_yy
        let g = Grid::<f64>::square(std::f64::consts::PI, 41, Boundary::Dirichlet).unwrap();
        let f = MatrixField::from_fn(&g, |_| SymMat { xx: 1.25, xy: 0.75, yy: 1.25 });
        let a = CoefficientField::new(f, 2.0).unwrap();
        let op = assemble_operator(&g, &a).unwrap();
        // Rayleigh quotient of sin(x)sin(y) approximates (a_xx + a_yy) = 2.5
        let u = DVector::from_iterator(
            g.len(),
            (0..g.len()).map(|i| {
                let c = g.coords(i);
                c[0].sin() * c[1].sin()
            }),
        );
        let hu = op.apply(&u);
        let rq = u.dot(&hu) / u.dot(&u);
        assert!((rq + 2.5).abs() < 0.05, "{rq}");
    }

    #[test]
    fn excessive_cross_term_is_rejected() {
        let g = Grid::square(1.0_f64, 4, Boundary::Neumann).unwrap();
        // elliptic pointwise but the harmonic edge means at a jump starve the cross term
        let f = MatrixField::from_fn(&g, |x| {
            if x[0] < 0.5 {
                SymMat { xx: 1.0, xy: 0.9, yy: 1.0 }
            } else {
                SymMat { xx: 0.1, xy: 0.0, yy: 0.1 }
            }
        });
        let a = CoefficientField::new(f, 10.0).unwrap();
        assert!(matches!(assemble_operator(&g, &a), Err(Error::Ellipticity { .. })));
    }

    #[test]
    fn capacity_and_symmetry_errors() {
        let g = line(10, 1.0, Boundary::Neumann);
        let op = assemble_operator(&g, &CoefficientField::identity(&g)).unwrap().with_spectral_budget(5);
        assert!(matches!(op.spectrum(), Err(Error::Capacity { size: 10, budget: 5 })));
        let bad = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -1.0]);
        assert!(DiscreteEllipticOperator::from_matrix(bad, 1.0).is_err());
        let pos = DMatrix::from_row_slice(1, 1, &[1.0]);
        let op = DiscreteEllipticOperator::from_matrix(pos, 1.0).unwrap();
        assert!(matches!(op.spectrum(), Err(Error::Numeric(_))));
    }
}
