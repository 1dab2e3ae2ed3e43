use nalgebra::DMatrix;

use crate::base_kernel::{gaussian_gradient, gaussian_kernel, DiscreteEllipticOperator, Grid, Spectrum};
use crate::error::{domain, Result};
use crate::scalar::{from_usize, lit, Real};

/// Pointwise base heat kernel `p(τ, x, y)` with the bounds the subordination
/// integral needs for truncation.
pub trait BaseKernel<T: Real>: Sync {
    fn dim(&self) -> usize;
    fn value(&self, tau: T, x: &[T], y: &[T]) -> Result<T>;
    /// `lim_{τ→∞} p(τ, x, y)`.
    fn limit(&self, _x: &[T], _y: &[T]) -> T {
        T::zero()
    }
    /// `sup_{x,y} |p(τ, x, y)|`.
    fn sup_bound(&self, tau: T) -> T;
    /// `sup_{τ' ≥ τ} sup_{x,y} |p(τ', x, y) - p_∞|`.
    fn deviation_bound(&self, tau: T) -> T;
}

/// Pointwise gradient `∇ₓp(τ, x, y)` with the same bounds.
pub trait BaseGradient<T: Real>: Sync {
    fn dim(&self) -> usize;
    fn gradient(&self, tau: T, x: &[T], y: &[T]) -> Result<Vec<T>>;
    fn sup_bound(&self, tau: T) -> T;
    fn deviation_bound(&self, tau: T) -> T;
}

/// Free-space Gaussian kernel of the Laplacian in `dim` dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaussianBase {
    pub dim: usize,
}

impl<T: Real> BaseKernel<T> for GaussianBase {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, tau: T, x: &[T], y: &[T]) -> Result<T> {
        gaussian_kernel(tau, x, y)
    }
    fn sup_bound(&self, tau: T) -> T {
        (lit::<T>(4.0) * T::pi() * tau).powf(-from_usize::<T>(self.dim) * lit(0.5))
    }
    fn deviation_bound(&self, tau: T) -> T {
        <Self as BaseKernel<T>>::sup_bound(self, tau)
    }
}

impl<T: Real> BaseGradient<T> for GaussianBase {
    fn dim(&self) -> usize {
        self.dim
    }
    fn gradient(&self, tau: T, x: &[T], y: &[T]) -> Result<Vec<T>> {
        gaussian_gradient(tau, x, y)
    }
    fn sup_bound(&self, tau: T) -> T {
        // max over r of r/(2τ)·p is reached at r = √(2τ)
        let p0 = <Self as BaseKernel<T>>::sup_bound(self, tau);
        p0 * (lit::<T>(2.0) * tau).sqrt().recip() * lit::<T>(-0.5).exp()
    }
    fn deviation_bound(&self, tau: T) -> T {
        <Self as BaseGradient<T>>::sup_bound(self, tau)
    }
}

/// Heat kernel of a grid operator from its cached spectrum; points are mapped
/// to the nearest node.
pub struct GridBase<'a, T: Real> {
    grid: &'a Grid<T>,
    spectrum: &'a Spectrum<T>,
    /// Eigenvectors transposed, so that node `i` is the contiguous column `i`.
    modes: DMatrix<T>,
    max_entry: T,
}

impl<'a, T: Real> GridBase<'a, T> {
    pub fn new(op: &'a DiscreteEllipticOperator<T>) -> Result<Self> {
        let grid = op.grid().ok_or_else(|| domain("operator has no grid geometry"))?;
        let spectrum = op.spectrum()?;
        Ok(Self { grid, spectrum, modes: spectrum.vectors.transpose(), max_entry: op.cell_volume().recip() })
    }

    fn nodes(&self, x: &[T], y: &[T]) -> (usize, usize) {
        (self.grid.nearest(x), self.grid.nearest(y))
    }

    /// `Σ_k w(μ_k) (v_k(i) - v_k(i0)) v_k(j) / h^d`, with `v_k(i0)` dropped if `i0` is `None`.
    fn sum_modes(&self, i: usize, i0: Option<usize>, j: usize, weight: impl Fn(T) -> Option<T>) -> T {
        let (vi, vj) = (self.modes.column(i), self.modes.column(j));
        let v0 = i0.map(|i0| self.modes.column(i0));
        let mut acc = T::zero();
        for (k, &mu) in self.spectrum.eigenvalues.iter().enumerate() {
            if let Some(w) = weight(mu) {
                let a = match &v0 {
                    Some(v0) => vi[k] - v0[k],
                    None => vi[k],
                };
                acc += w * a * vj[k];
            }
        }
        acc / self.spectrum.cell_volume
    }

    /// `e^{τμ}`, or `None` once it underflows; eigenvalues are sorted descending.
    fn heat_weight(tau: T) -> impl Fn(T) -> Option<T> {
        move |mu: T| {
            let e = tau * mu;
            (e > lit(-745.0)).then(|| e.exp())
        }
    }

    /// Central difference of `p` in `x` along each axis (one-sided at the edge).
    fn node_gradient(&self, tau: T, i: usize, j: usize) -> Vec<T> {
        let idx = self.grid.multi_index(i);
        (0..self.grid.dim())
            .map(|a| {
                let n = self.grid.points()[a];
                let h = self.grid.spacing()[a];
                let (lo, hi) = (idx[a].saturating_sub(1), (idx[a] + 1).min(n - 1));
                let mut l = idx.clone();
                let mut r = idx.clone();
                l[a] = lo;
                r[a] = hi;
                let (l, r) = (self.grid.flat_index(&l), self.grid.flat_index(&r));
                self.sum_modes(r, Some(l), j, Self::heat_weight(tau)) / (h * from_usize(hi - lo))
            })
            .collect()
    }
}

impl<T: Real> BaseKernel<T> for GridBase<'_, T> {
    fn dim(&self) -> usize {
        self.grid.dim()
    }
    fn value(&self, tau: T, x: &[T], y: &[T]) -> Result<T> {
        let (i, j) = self.nodes(x, y);
        Ok(self.sum_modes(i, None, j, Self::heat_weight(tau)))
    }
    fn limit(&self, x: &[T], y: &[T]) -> T {
        let (i, j) = self.nodes(x, y);
        self.sum_modes(i, None, j, |mu| (mu == T::zero()).then(T::one))
    }
    fn sup_bound(&self, _tau: T) -> T {
        self.max_entry
    }
    fn deviation_bound(&self, tau: T) -> T {
        // Σ_k |v_k(i) v_k(j)| ≤ 1 for an orthonormal basis
        match self.spectrum.gap() {
            Some(gap) => (tau * gap).exp() * self.max_entry,
            None => T::zero(),
        }
    }
}

impl<T: Real> BaseGradient<T> for GridBase<'_, T> {
    fn dim(&self) -> usize {
        self.grid.dim()
    }
    fn gradient(&self, tau: T, x: &[T], y: &[T]) -> Result<Vec<T>> {
        let (i, j) = self.nodes(x, y);
        Ok(self.node_gradient(tau, i, j))
    }
    fn sup_bound(&self, _tau: T) -> T {
        let h = self.grid.spacing().iter().fold(T::huge(), |m, &h| m.min(h));
        lit::<T>(2.0) * self.max_entry / h
    }
    fn deviation_bound(&self, tau: T) -> T {
        let h = self.grid.spacing().iter().fold(T::huge(), |m, &h| m.min(h));
        <Self as BaseKernel<T>>::deviation_bound(self, tau) * lit::<T>(2.0) / h
    }
}
