use std::io::Write;

use nalgebra::DMatrix;

use super::grid::Grid;
use super::operator::DiscreteEllipticOperator;
use crate::error::{domain, Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// What a [`KernelField`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Kernel,
    Gradient,
    Difference,
}

/// Kernel values `p(t, x_i, y_j)` on grid node pairs, one matrix per time.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField<T: Real> {
    kind: KernelKind,
    /// `None` for the base (unsubordinated) kernel.
    alpha: Option<T>,
    times: Vec<T>,
    slices: Vec<DMatrix<T>>,
    grid: Option<Grid<T>>,
    cell_volume: T,
}

impl<T: Real> KernelField<T> {
    pub fn new(
        kind: KernelKind,
        alpha: Option<T>,
        t: T,
        values: DMatrix<T>,
        grid: Option<Grid<T>>,
        cell_volume: T,
    ) -> Self {
        Self { kind, alpha, times: vec![t], slices: vec![values], grid, cell_volume }
    }

    /// Kernel field sampled from a closed form `f(t, x, y)` on all node pairs.
    pub fn from_fn(grid: &Grid<T>, t: T, alpha: Option<T>, f: impl Fn(T, &[T], &[T]) -> T) -> Self {
        let n = grid.len();
        let coords: Vec<Vec<T>> = (0..n).map(|i| grid.coords(i)).collect();
        let m = DMatrix::from_fn(n, n, |i, j| f(t, &coords[i], &coords[j]));
        Self::new(KernelKind::Kernel, alpha, t, m, Some(grid.clone()), grid.cell_volume())
    }

    /// Appends the slice of another field at a later time.
    pub fn push(&mut self, other: KernelField<T>) -> Result<()> {
        if other.kind != self.kind || other.slices[0].shape() != self.slices[0].shape() {
            return Err(Error::Shape("kernel slices do not match".into()));
        }
        self.times.extend(other.times);
        self.slices.extend(other.slices);
        Ok(())
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }
    pub fn alpha(&self) -> Option<T> {
        self.alpha
    }
    pub fn times(&self) -> &[T] {
        &self.times
    }
    pub fn slices(&self) -> &[DMatrix<T>] {
        &self.slices
    }
    /// The first (often only) time slice.
    pub fn matrix(&self) -> &DMatrix<T> {
        &self.slices[0]
    }
    pub fn grid(&self) -> Option<&Grid<T>> {
        self.grid.as_ref()
    }
    pub fn cell_volume(&self) -> T {
        self.cell_volume
    }

    /// `Σ_j p(t, x_i, y_j) h^d` for each row of the first slice.
    pub fn row_masses(&self) -> Vec<T> {
        self.matrix().row_iter().map(|r| r.iter().fold(T::zero(), |acc, &v| acc + v) * self.cell_volume).collect()
    }

    pub fn min_value(&self) -> T {
        self.slices.iter().fold(T::max_value().unwrap_or_else(T::huge), |m, s| m.min(s.min()))
    }

    pub fn asymmetry(&self) -> T {
        self.slices.iter().fold(T::zero(), |m, s| m.max((s - s.transpose()).amax()))
    }

    /// Largest entrywise difference and its `(slice, i, j)` location.
    pub fn max_abs_diff(&self, other: &Self) -> Result<(T, usize, usize, usize)> {
        if self.slices.len() != other.slices.len()
            || self.slices.iter().zip(&other.slices).any(|(a, b)| a.shape() != b.shape())
        {
            return Err(Error::Shape("kernel fields are sampled differently".into()));
        }
        let mut best = (T::zero(), 0, 0, 0);
        for (k, (a, b)) in self.slices.iter().zip(&other.slices).enumerate() {
            for j in 0..a.ncols() {
                for i in 0..a.nrows() {
                    let d = (a[(i, j)] - b[(i, j)]).abs();
                    if d > best.0 {
                        best = (d, k, i, j);
                    }
                }
            }
        }
        Ok(best)
    }

    /// CSV with header `t,x_index,y_index,value`, rows in (t, x, y) order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x_index,y_index,value")?;
        for (t, s) in self.times.iter().zip(&self.slices) {
            for i in 0..s.nrows() {
                for j in 0..s.ncols() {
                    writeln!(w, "{:.16e},{i},{j},{:.16e}", to_f64(*t), to_f64(s[(i, j)]))?;
                }
            }
        }
        Ok(())
    }
}

/// Matrix of `p(t, x_i, y_j) = Σ_k e^{tμ_k} v_k(x_i) v_k(y_j) / h^d`.
pub fn heat_kernel_matrix<T: Real>(op: &DiscreteEllipticOperator<T>, t: T) -> Result<KernelField<T>> {
    if !(t >= T::zero() && t.is_finite()) {
        return Err(domain(format!("time must be nonnegative, got {t}")));
    }
    let spec = op.spectrum()?;
    let m = spec.kernel_of(|mu| (t * mu).exp());
    Ok(KernelField::new(KernelKind::Kernel, None, t, m, op.grid().cloned(), op.cell_volume()))
}

fn squared_distance<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() || x.is_empty() {
        return Err(domain(format!("points must share a positive dimension, got {} and {}", x.len(), y.len())));
    }
    Ok(x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b)))
}

/// Free-space heat kernel `(4πt)^{-d/2} exp(-|x-y|²/(4t))`, `d = x.len()`.
pub fn gaussian_kernel<T: Real>(t: T, x: &[T], y: &[T]) -> Result<T> {
    if !(t > T::zero()) {
        return Err(domain(format!("time must be positive, got {t}")));
    }
    let r2 = squared_distance(x, y)?;
    let d = crate::scalar::from_usize::<T>(x.len());
    let four_t = lit::<T>(4.0) * t;
    Ok((T::pi() * four_t).powf(-d * lit(0.5)) * (-r2 / four_t).exp())
}

/// `∇ₓ` of [`gaussian_kernel`]: `-(x-y)/(2t) · p`.
pub fn gaussian_gradient<T: Real>(t: T, x: &[T], y: &[T]) -> Result<Vec<T>> {
    let p = gaussian_kernel(t, x, y)?;
    let c = -p / (lit::<T>(2.0) * t);
    Ok(x.iter().zip(y).map(|(&a, &b)| c * (a - b)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_kernel::{assemble_operator, Boundary, CoefficientField};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gaussian_examples() {
        assert!(close(gaussian_kernel(1.0, &[0.0], &[0.0]).unwrap(), 0.282095, 5e-7));
        assert!(close(gaussian_kernel(1.0, &[2.0], &[0.0]).unwrap(), 0.103777, 5e-7));
        assert!(close(gaussian_kernel(0.5, &[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.159155, 5e-7));
        assert!(gaussian_kernel(0.0, &[0.0], &[0.0]).is_err());
        assert!(gaussian_kernel(1.0, &[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn gaussian_gradient_examples() {
        assert_eq!(gaussian_gradient(1.0, &[0.3, 0.1], &[0.3, 0.1]).unwrap(), vec![0.0, 0.0]);
        let g = gaussian_gradient(1.0_f64, &[1.0], &[0.0]).unwrap();
        assert!(close(g[0].abs(), 0.109847, 1e-6));
        assert!(g[0] < 0.0);
        let g = gaussian_gradient(0.25, &[0.0], &[1.0]).unwrap();
        assert!(close(g[0], 0.415107, 5e-7));
        assert!(gaussian_gradient(-1.0, &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn identity_at_time_zero() {
        let g = Grid::line(3.0_f64, 7, Boundary::Dirichlet).unwrap();
        let op = assemble_operator(&g, &CoefficientField::checkerboard(&g, 2.0, 1.0).unwrap()).unwrap();
        let p = heat_kernel_matrix(&op, 0.0).unwrap();
        let expected = DMatrix::<f64>::identity(7, 7) / 0.5;
        assert!((p.matrix() - expected).amax() < 1e-12);
        assert!(heat_kernel_matrix(&op, -1.0).is_err());
    }

    #[test]
    fn two_point_closed_form() {
        let m = DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -2.0]);
        let op = DiscreteEllipticOperator::from_matrix(m, 1.0).unwrap();
        let t = 0.7_f64;
        let (e1, e3) = ((-t).exp(), (-3.0 * t).exp());
        let p = heat_kernel_matrix(&op, t).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[e1 + e3, e1 - e3, e1 - e3, e1 + e3]) * 0.5;
        assert!((p.matrix() - expected).amax() < 1e-14);
    }

    #[test]
    fn neumann_conserves_mass_and_kernel_properties() {
        let g = Grid::line(8.0_f64, 48, Boundary::Neumann).unwrap();
        let op = assemble_operator(&g, &CoefficientField::checkerboard(&g, 2.0, 1.0).unwrap()).unwrap();
        for t in [0.01, 0.3, 5.0, 200.0] {
            let p = heat_kernel_matrix(&op, t).unwrap();
            assert!(p.row_masses().iter().all(|m| (m - 1.0).abs() < 1e-8), "t={t}");
            assert!(p.asymmetry() < 1e-10);
            assert!(p.min_value() >= -1e-12);
        }
        let dg = Grid::line(8.0_f64, 48, Boundary::Dirichlet).unwrap();
        let dop = assemble_operator(&dg, &CoefficientField::identity(&dg)).unwrap();
        let p = heat_kernel_matrix(&dop, 1.0).unwrap();
        assert!(p.row_masses().iter().all(|&m| m <= 1.0 + 1e-12));
    }

    #[test]
    fn chapman_kolmogorov() {
        let g = Grid::square(4.0_f64, 9, Boundary::Dirichlet).unwrap();
        let op = assemble_operator(&g, &CoefficientField::smooth_bump(&g, 2.0, 1.0).unwrap()).unwrap();
        let (t, s) = (0.2, 0.45);
        let pt = heat_kernel_matrix(&op, t).unwrap();
        let ps = heat_kernel_matrix(&op, s).unwrap();
        let pts = heat_kernel_matrix(&op, t + s).unwrap();
        let prod = pt.matrix() * ps.matrix() * g.cell_volume();
        assert!((prod - pts.matrix()).amax() < 1e-8);
    }

    #[test]
    fn grid_kernel_converges_to_gaussian_at_second_order() {
        // a ≡ Id on [-10, 10], compare at interior pairs away from the boundary
        let t = 0.5;
        let mut errors = Vec::new();
        let mut hs = Vec::new();
        for n in [41, 81, 161] {
            let g = Grid::line(20.0_f64, n, Boundary::Dirichlet).unwrap().with_origin(&[-10.0]).unwrap();
            let op = assemble_operator(&g, &CoefficientField::identity(&g)).unwrap();
            let p = heat_kernel_matrix(&op, t).unwrap();
            let mut err: f64 = 0.0;
            for (x, y) in [(0.0, 0.0), (0.0, 1.0), (-1.0, 1.0), (0.5, -1.5)] {
                let (i, j) = (g.nearest(&[x]), g.nearest(&[y]));
                let exact = gaussian_kernel(t, &g.coords(i), &g.coords(j)).unwrap();
                err = err.max((p.matrix()[(i, j)] - exact).abs());
            }
            errors.push(err);
            hs.push(g.spacing()[0]);
        }
        for k in 0..2 {
            let order = (errors[k] / errors[k + 1]).ln() / (hs[k] / hs[k + 1]).ln();
            assert!(order >= 1.8, "order {order} from {errors:?}");
        }
    }

    #[test]
    fn csv_export_header_and_rows() {
        let g = Grid::line(1.0_f64, 2, Boundary::Neumann).unwrap();
        let f = KernelField::from_fn(&g, 1.0, None, |t, x, y| gaussian_kernel(t, x, y).unwrap());
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x_index,y_index,value");
        assert_eq!(lines.len(), 5);
        assert!(lines[2].starts_with("1.0000000000000000e0,0,1,"));
    }
}
