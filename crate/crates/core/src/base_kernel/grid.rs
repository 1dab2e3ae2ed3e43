use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scalar::{from_usize, Real};

/// Boundary condition of a rectangular grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Zero values one spacing outside the grid.
    Dirichlet,
    /// No flux through the boundary.
    Neumann,
}

impl Boundary {
    pub fn name(self) -> &'static str {
        match self {
            Boundary::Dirichlet => "dirichlet",
            Boundary::Neumann => "neumann",
        }
    }
}

/// Vertex-centered rectangular grid in one or two dimensions.
///
/// Node `i` along an axis sits at `origin + i·h` with `h = extent / (points - 1)`.
/// Nodes are numbered with the first axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    extent: Vec<T>,
    points: Vec<usize>,
    spacing: Vec<T>,
    origin: Vec<T>,
    boundary: Boundary,
}

impl<T: Real> Grid<T> {
    pub fn new(extent: &[T], points: &[usize], boundary: Boundary) -> Result<Self> {
        let dim = extent.len();
        if !(dim == 1 || dim == 2) {
            return Err(domain(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if points.len() != dim {
            return Err(domain(format!("grid has {dim} extents but {} point counts", points.len())));
        }
        for (axis, (&e, &n)) in extent.iter().zip(points).enumerate() {
            if !(e > T::zero() && e.is_finite()) {
                return Err(domain(format!("extent along axis {axis} must be positive, got {e}")));
            }
            if n < 2 {
                return Err(domain(format!("axis {axis} needs at least 2 points, got {n}")));
            }
        }
        let spacing = extent.iter().zip(points).map(|(&e, &n)| e / from_usize(n - 1)).collect();
        Ok(Self { extent: extent.to_vec(), points: points.to_vec(), spacing, origin: vec![T::zero(); dim], boundary })
    }

    pub fn line(extent: T, points: usize, boundary: Boundary) -> Result<Self> {
        Self::new(&[extent], &[points], boundary)
    }

    pub fn square(extent: T, points: usize, boundary: Boundary) -> Result<Self> {
        Self::new(&[extent, extent], &[points, points], boundary)
    }

    pub fn with_origin(mut self, origin: &[T]) -> Result<Self> {
        if origin.len() != self.dim() {
            return Err(domain("origin dimension does not match grid"));
        }
        self.origin = origin.to_vec();
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.extent.len()
    }
    pub fn extent(&self) -> &[T] {
        &self.extent
    }
    pub fn points(&self) -> &[usize] {
        &self.points
    }
    pub fn spacing(&self) -> &[T] {
        &self.spacing
    }
    pub fn origin(&self) -> &[T] {
        &self.origin
    }
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `h^d`, the volume attached to each node.
    pub fn cell_volume(&self) -> T {
        self.spacing.iter().fold(T::one(), |acc, &h| acc * h)
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        match idx {
            [i] => *i,
            [i, j] => i + self.points[0] * j,
            _ => panic!("index dimension must be 1 or 2"),
        }
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        if self.dim() == 1 {
            vec![flat]
        } else {
            vec![flat % self.points[0], flat / self.points[0]]
        }
    }

    pub fn coords(&self, flat: usize) -> Vec<T> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.origin[a] + self.spacing[a] * from_usize(i))
            .collect()
    }

    pub fn distance(&self, i: usize, j: usize) -> T {
        let (a, b) = (self.coords(i), self.coords(j));
        a.iter().zip(&b).fold(T::zero(), |acc, (&p, &q)| acc + (p - q) * (p - q)).sqrt()
    }

    /// Node nearest to `x` (clamped into the grid).
    pub fn nearest(&self, x: &[T]) -> usize {
        let idx: Vec<usize> = (0..self.dim())
            .map(|a| {
                let u = ((x[a] - self.origin[a]) / self.spacing[a]).round();
                let u = crate::scalar::to_f64(u).max(0.0) as usize;
                u.min(self.points[a] - 1)
            })
            .collect();
        self.flat_index(&idx)
    }

    /// Same domain with the spacing halved.
    pub fn refined(&self) -> Self {
        let points: Vec<usize> = self.points.iter().map(|&n| 2 * n - 1).collect();
        let mut g = Self::new(&self.extent, &points, self.boundary).expect("refinement of a valid grid");
        g.origin = self.origin.clone();
        g
    }

    /// True when both grids discretize the same domain with the same nodes.
    pub fn conforms(&self, other: &Self) -> bool {
        self.points == other.points
            && self.boundary == other.boundary
            && self
                .extent
                .iter()
                .zip(&other.extent)
                .chain(self.origin.iter().zip(&other.origin))
                .all(|(&a, &b)| (a - b).abs() <= T::eps() * lit_scale(a, b))
    }
}

fn lit_scale<T: Real>(a: T, b: T) -> T {
    crate::scalar::lit::<T>(16.0) * (T::one() + a.abs().max(b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_is_vertex_centered() {
        let g = Grid::line(8.0_f64, 65, Boundary::Neumann).unwrap();
        assert_eq!(g.spacing()[0], 0.125);
        assert_eq!(g.spacing()[0] * 64.0, g.extent()[0]);
        assert_eq!(g.cell_volume(), 0.125);
        let g2 = Grid::new(&[2.0_f64, 3.0], &[3, 4], Boundary::Dirichlet).unwrap();
        assert_eq!(g2.len(), 12);
        assert_eq!(g2.cell_volume(), 1.0);
        assert_eq!(g2.multi_index(7), vec![1, 2]);
        assert_eq!(g2.flat_index(&[1, 2]), 7);
        assert_eq!(g2.coords(7), vec![1.0, 2.0]);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Grid::line(1.0_f64, 1, Boundary::Neumann).is_err());
        assert!(Grid::line(0.0_f64, 4, Boundary::Neumann).is_err());
        assert!(Grid::new(&[1.0_f64; 3], &[2; 3], Boundary::Neumann).is_err());
    }

    #[test]
    fn refinement_keeps_nodes() {
        let g = Grid::line(4.0_f64, 5, Boundary::Dirichlet).unwrap();
        let f = g.refined();
        assert_eq!(f.points()[0], 9);
        assert_eq!(f.coords(2), g.coords(1));
        assert_eq!(g.nearest(&[2.2]), 2);
        assert_eq!(g.nearest(&[-3.0]), 0);
    }
}
