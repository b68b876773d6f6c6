//! Shift-polynomial stencil operators and the fields they act on.
//!
//! A [`StencilOperator`] is a finite sum `Σ c_k S^k` of shifts. Every scheme in
//! the crate is assembled from these by composition and linear combination,
//! so discrete expressions such as `μ_m(V_0 + γ D_m^2 V_{-1})` become
//! `mu * (id + gamma * d2 * shift(-1))`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::error::StencilError;
use crate::grid::{GridSpec1D, GridSpec2D};

/// Linear operator `Σ coeff · S^offset`, kept sorted by offset with no zero taps.
#[derive(Clone, PartialEq, Default)]
pub struct StencilOperator {
    taps: Vec<(isize, f64)>,
}

impl fmt::Debug for StencilOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.taps.iter()).finish()
    }
}

impl StencilOperator {
    pub fn from_taps<I: IntoIterator<Item = (isize, f64)>>(taps: I) -> Self {
        let mut v: Vec<(isize, f64)> = taps.into_iter().collect();
        v.sort_by_key(|t| t.0);
        let mut merged: Vec<(isize, f64)> = Vec::with_capacity(v.len());
        for (o, c) in v {
            match merged.last_mut() {
                Some(last) if last.0 == o => last.1 += c,
                _ => merged.push((o, c)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        Self { taps: merged }
    }

    pub fn zero() -> Self {
        Self { taps: Vec::new() }
    }

    pub fn identity() -> Self {
        shift(0)
    }

    pub fn taps(&self) -> &[(isize, f64)] {
        &self.taps
    }

    pub fn is_zero(&self) -> bool {
        self.taps.is_empty()
    }

    /// Smallest and largest offset, `(0, 0)` for the zero operator.
    pub fn span(&self) -> (isize, isize) {
        match (self.taps.first(), self.taps.last()) {
            (Some(f), Some(l)) => (f.0, l.0),
            _ => (0, 0),
        }
    }

    pub fn coeff_sum(&self) -> f64 {
        self.taps.iter().map(|t| t.1).sum()
    }

    pub fn coeff(&self, offset: isize) -> f64 {
        self.taps.iter().find(|t| t.0 == offset).map_or(0.0, |t| t.1)
    }

    /// Tap convolution: `(A ∘ B) f = A (B f)`.
    pub fn compose(&self, other: &Self) -> Self {
        Self::from_taps(
            self.taps
                .iter()
                .flat_map(|&(oa, ca)| other.taps.iter().map(move |&(ob, cb)| (oa + ob, ca * cb))),
        )
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::identity(), |acc, _| acc.compose(self))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_taps(self.taps.iter().map(|&(o, c)| (o, c * s)))
    }

    /// Applies the operator to a periodic array.
    pub fn apply_periodic(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.apply_periodic_into(f, &mut out);
        out
    }

    pub fn apply_periodic_into(&self, f: &[f64], out: &mut [f64]) {
        let n = f.len() as isize;
        out.iter_mut().for_each(|o| *o = 0.0);
        if n == 0 {
            return;
        }
        for &(o, c) in &self.taps {
            let o = o.rem_euclid(n) as usize;
            let (head, tail) = f.split_at(o);
            let rotated = tail.iter().chain(head.iter());
            for (dst, &src) in out.iter_mut().zip(rotated) {
                *dst += c * src;
            }
        }
    }

    /// Applies the operator to a 1D field, wrapping or reading ghosts as the grid requires.
    pub fn apply(&self, field: &Field1D) -> Result<Field1D, StencilError> {
        let n = field.values.len();
        if field.grid.is_periodic() {
            return Ok(field.with_values(self.apply_periodic(&field.values)));
        }
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            for &(off, c) in &self.taps {
                *o += c * field
                    .value_at(i as isize + off)
                    .ok_or(StencilError::MissingGhost { node: i, offset: off })?;
            }
        }
        Ok(field.with_values(out))
    }

    /// Applies the operator along one axis of a 2D field.
    pub fn apply_2d(&self, field: &Field2D, axis: Axis) -> Result<Field2D, StencilError> {
        let (nx, ny) = (field.grid.nx(), field.grid.ny());
        let g1 = match axis {
            Axis::X => field.grid.x_grid,
            Axis::Y => field.grid.y_grid,
        };
        let mut out = vec![0.0; field.values.len()];
        for j in 0..ny {
            for i in 0..nx {
                let (pos, len) = match axis {
                    Axis::X => (i, nx),
                    Axis::Y => (j, ny),
                };
                let mut acc = 0.0;
                for &(off, c) in &self.taps {
                    let mut p = pos as isize + off;
                    if g1.is_periodic() {
                        p = p.rem_euclid(len as isize);
                    } else if p < 0 || p >= len as isize {
                        let node = field.grid.index(i, j);
                        return Err(StencilError::MissingGhost { node, offset: off });
                    }
                    let idx = match axis {
                        Axis::X => field.grid.index(p as usize, j),
                        Axis::Y => field.grid.index(i, p as usize),
                    };
                    acc += c * field.values[idx];
                }
                out[field.grid.index(i, j)] = acc;
            }
        }
        Ok(Field2D {
            grid: field.grid,
            values: out,
        })
    }
}

/// `D_m = (S - I)/dx`.
pub fn make_dm(dx: f64) -> StencilOperator {
    StencilOperator::from_taps([(0, -1.0 / dx), (1, 1.0 / dx)])
}

/// `μ_m = (S + I)/2`.
pub fn make_mum() -> StencilOperator {
    StencilOperator::from_taps([(0, 0.5), (1, 0.5)])
}

/// `D_m^(c) = (S - S^{-1})/(2dx)`.
pub fn make_dmc(dx: f64) -> StencilOperator {
    StencilOperator::from_taps([(-1, -0.5 / dx), (1, 0.5 / dx)])
}

pub fn make_shift(k: isize) -> StencilOperator {
    StencilOperator::from_taps([(k, 1.0)])
}

/// Short alias used throughout the scheme builders.
pub fn shift(k: isize) -> StencilOperator {
    make_shift(k)
}

/// Dense matrix of the operator on the grid; row `i` holds `coeff` at column
/// `(i + offset) mod n`. On prescribed grids out-of-range columns are dropped.
pub fn assemble_matrix(op: &StencilOperator, grid: &GridSpec1D) -> DMatrix<f64> {
    let n = grid.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for &(o, c) in op.taps() {
            let j = i as isize + o;
            if grid.is_periodic() {
                m[(i, grid.wrap(j))] += c;
            } else if (0..n as isize).contains(&j) {
                m[(i, j as usize)] += c;
            }
        }
    }
    m
}

impl Add for &StencilOperator {
    type Output = StencilOperator;
    fn add(self, rhs: &StencilOperator) -> StencilOperator {
        StencilOperator::from_taps(self.taps.iter().chain(rhs.taps.iter()).copied())
    }
}

impl Sub for &StencilOperator {
    type Output = StencilOperator;
    fn sub(self, rhs: &StencilOperator) -> StencilOperator {
        self + &(-rhs)
    }
}

impl Neg for &StencilOperator {
    type Output = StencilOperator;
    fn neg(self) -> StencilOperator {
        self.scale(-1.0)
    }
}

impl Mul for &StencilOperator {
    type Output = StencilOperator;
    fn mul(self, rhs: &StencilOperator) -> StencilOperator {
        self.compose(rhs)
    }
}

impl Mul<&StencilOperator> for f64 {
    type Output = StencilOperator;
    fn mul(self, rhs: &StencilOperator) -> StencilOperator {
        rhs.scale(self)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for StencilOperator {
            type Output = StencilOperator;
            fn $m(self, rhs: StencilOperator) -> StencilOperator {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&StencilOperator> for StencilOperator {
            type Output = StencilOperator;
            fn $m(self, rhs: &StencilOperator) -> StencilOperator {
                (&self).$m(rhs)
            }
        }
        impl $tr<StencilOperator> for &StencilOperator {
            type Output = StencilOperator;
            fn $m(self, rhs: StencilOperator) -> StencilOperator {
                self.$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Mul<StencilOperator> for f64 {
    type Output = StencilOperator;
    fn mul(self, rhs: StencilOperator) -> StencilOperator {
        rhs.scale(self)
    }
}

impl Neg for StencilOperator {
    type Output = StencilOperator;
    fn neg(self) -> StencilOperator {
        self.scale(-1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Nodal values on a 1D grid. On prescribed grids, `ghost_left[k]` holds the
/// value at node `-(k+1)` and `ghost_right[k]` the value at node `len + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field1D {
    pub grid: GridSpec1D,
    pub values: Vec<f64>,
    pub ghost_left: Vec<f64>,
    pub ghost_right: Vec<f64>,
}

impl Field1D {
    pub fn new(grid: GridSpec1D, values: Vec<f64>) -> Result<Self, StencilError> {
        if values.len() != grid.len() {
            return Err(StencilError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            grid,
            values,
            ghost_left: Vec::new(),
            ghost_right: Vec::new(),
        })
    }

    pub fn from_fn(grid: GridSpec1D, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self {
            grid,
            values,
            ghost_left: Vec::new(),
            ghost_right: Vec::new(),
        }
    }

    pub fn with_ghosts(mut self, left: Vec<f64>, right: Vec<f64>) -> Self {
        self.ghost_left = left;
        self.ghost_right = right;
        self
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            grid: self.grid,
            values,
            ghost_left: Vec::new(),
            ghost_right: Vec::new(),
        }
    }

    fn value_at(&self, i: isize) -> Option<f64> {
        let n = self.values.len() as isize;
        if i < 0 {
            self.ghost_left.get((-i - 1) as usize).copied()
        } else if i >= n {
            self.ghost_right.get((i - n) as usize).copied()
        } else {
            Some(self.values[i as usize])
        }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Nodal values on a 2D grid, x index fastest. Prescribed axes have no
/// implicit ghosts: applying an operator that reaches past them is an error.
#[derive(Clone, Debug, PartialEq)]
pub struct Field2D {
    pub grid: GridSpec2D,
    pub values: Vec<f64>,
}

impl Field2D {
    pub fn new(grid: GridSpec2D, values: Vec<f64>) -> Result<Self, StencilError> {
        if values.len() != grid.len() {
            return Err(StencilError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }
}
