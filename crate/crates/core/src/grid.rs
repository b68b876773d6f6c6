//! Uniform grids in one and two space dimensions.

use serde::{Deserialize, Serialize};

use crate::error::GridError;

/// How the ends of a 1D grid are treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Node `n_cells` is identified with node 0; indices wrap.
    Periodic,
    /// Values outside the grid come from caller-supplied ghost bands.
    Prescribed,
}

/// A uniform grid on `[a, b]` with `n_cells` cells; node `i` sits at `a + i*dx`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec1D {
    a: f64,
    b: f64,
    n_cells: usize,
    dx: f64,
    boundary: Boundary,
}

impl GridSpec1D {
    pub fn new(a: f64, b: f64, n_cells: usize, boundary: Boundary) -> Result<Self, GridError> {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(GridError::BadInterval { a, b });
        }
        if n_cells == 0 {
            return Err(GridError::TooFewCells { n_cells, required: 1 });
        }
        Ok(Self {
            a,
            b,
            n_cells,
            dx: (b - a) / n_cells as f64,
            boundary,
        })
    }

    pub fn periodic(a: f64, b: f64, n_cells: usize) -> Result<Self, GridError> {
        Self::new(a, b, n_cells, Boundary::Periodic)
    }

    pub fn prescribed(a: f64, b: f64, n_cells: usize) -> Result<Self, GridError> {
        Self::new(a, b, n_cells, Boundary::Prescribed)
    }

    /// Periodic grid on the closed interval `[a, b]`: `(b-a)/dx` is rounded to
    /// a whole number of cells `c`, the spacing becomes `(b-a)/c`, and both
    /// endpoints are distinct nodes, so the period is `(c+1)` cells.
    pub fn periodic_closed(a: f64, b: f64, dx: f64) -> Result<Self, GridError> {
        if !(dx > 0.0) {
            return Err(GridError::BadSpacing(dx));
        }
        if b <= a {
            return Err(GridError::BadInterval { a, b });
        }
        let cells = ((b - a) / dx).round().max(1.0) as usize;
        let h = (b - a) / cells as f64;
        Self::periodic(a, b + h, cells + 1)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    /// Number of distinct nodes carrying unknowns.
    pub fn len(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.n_cells,
            Boundary::Prescribed => self.n_cells + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x(&self, i: usize) -> f64 {
        self.a + i as f64 * self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    /// Wraps a signed index onto the periodic node set.
    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.len() as isize) as usize
    }
}

/// Tensor-product grid; node `(i, j)` is stored at `j * nx + i` (x fastest).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec2D {
    pub x_grid: GridSpec1D,
    pub y_grid: GridSpec1D,
}

impl GridSpec2D {
    pub fn new(x_grid: GridSpec1D, y_grid: GridSpec1D) -> Self {
        Self { x_grid, y_grid }
    }

    pub fn nx(&self) -> usize {
        self.x_grid.len()
    }

    pub fn ny(&self) -> usize {
        self.y_grid.len()
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx() + i
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_grid_wraps() {
        let g = GridSpec1D::periodic(0.0, 4.0, 4).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.wrap(-1), 3);
        assert_eq!(g.wrap(5), 1);
        assert_eq!(g.dx(), 1.0);
    }

    #[test]
    fn closed_periodic_grid_keeps_both_endpoints() {
        let g = GridSpec1D::periodic_closed(-60.0, 60.0, 0.5).unwrap();
        assert_eq!(g.len(), 241);
        assert!((g.x(240) - 60.0).abs() < 1e-12);
        let g = GridSpec1D::periodic_closed(-60.0, 60.0, 0.7).unwrap();
        assert_eq!(g.len(), 172);
        assert!((g.dx() - 120.0 / 171.0).abs() < 1e-14);
        assert!((g.x(171) - 60.0).abs() < 1e-12);
        let g = GridSpec1D::periodic_closed(-60.0, 60.0, 0.3).unwrap();
        assert_eq!(g.len(), 401);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(GridSpec1D::periodic(1.0, 1.0, 4).is_err());
        assert!(GridSpec1D::periodic(0.0, 1.0, 0).is_err());
        assert!(GridSpec1D::periodic_closed(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn prescribed_grid_counts_both_ends() {
        let g = GridSpec1D::prescribed(-0.5, 0.5, 100).unwrap();
        assert_eq!(g.len(), 101);
        let g2 = GridSpec2D::new(g, GridSpec1D::prescribed(-10.0, 10.0, 100).unwrap());
        assert_eq!(g2.len(), 101 * 101);
        assert_eq!(g2.index(3, 2), 2 * 101 + 3);
    }
}
