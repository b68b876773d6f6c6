//! Periodic maps built from stencil operators and pointwise products.
//!
//! Every right-hand side in the Boussinesq schemes is a sum of terms
//! `A x_c` and `P[(L x_a + l₀) ⊙ (R x_b + r₀)]`, where `A, P, L, R` are stencil
//! operators. Writing the map in this form gives exact Jacobians for free.
//!
//! Multi-component states are interleaved: component `c` of node `i` is stored
//! at `i * ncomp + c`, which keeps the Jacobian narrowly banded.

use crate::linalg::BandMatrix;
use crate::stencil::StencilOperator;

/// `op · x[comp] + offset`, with `offset` a fixed nodal array.
#[derive(Clone, Debug)]
pub struct Operand {
    pub comp: usize,
    pub op: StencilOperator,
    pub offset: Option<Vec<f64>>,
}

impl Operand {
    pub fn new(comp: usize, op: StencilOperator) -> Self {
        Self { comp, op, offset: None }
    }

    pub fn with_offset(comp: usize, op: StencilOperator, offset: Vec<f64>) -> Self {
        Self {
            comp,
            op,
            offset: Some(offset),
        }
    }

    fn eval(&self, comps: &[Vec<f64>]) -> Vec<f64> {
        let mut v = self.op.apply_periodic(&comps[self.comp]);
        if let Some(o) = &self.offset {
            v.iter_mut().zip(o).for_each(|(a, b)| *a += b);
        }
        v
    }
}

#[derive(Clone, Debug)]
pub enum Term {
    Linear { comp: usize, op: StencilOperator },
    Constant(Vec<f64>),
    Product { outer: StencilOperator, left: Operand, right: Operand },
}

/// A map `R^{n·ncomp} → R^{n·ncomp}` on a periodic grid of `n` nodes.
#[derive(Clone, Debug)]
pub struct QuadraticMap {
    n: usize,
    ncomp: usize,
    rows: Vec<Vec<Term>>,
}

impl QuadraticMap {
    pub fn new(n: usize, ncomp: usize) -> Self {
        Self {
            n,
            ncomp,
            rows: vec![Vec::new(); ncomp],
        }
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn dim(&self) -> usize {
        self.n * self.ncomp
    }

    pub fn linear(&mut self, row: usize, comp: usize, op: StencilOperator) -> &mut Self {
        if !op.is_zero() {
            self.rows[row].push(Term::Linear { comp, op });
        }
        self
    }

    pub fn constant(&mut self, row: usize, values: Vec<f64>) -> &mut Self {
        self.rows[row].push(Term::Constant(values));
        self
    }

    pub fn product(&mut self, row: usize, outer: StencilOperator, left: Operand, right: Operand) -> &mut Self {
        if !outer.is_zero() {
            self.rows[row].push(Term::Product { outer, left, right });
        }
        self
    }

    /// Polynomial degree of the map in the state.
    pub fn degree(&self) -> usize {
        let prod = |t: &Term| matches!(t, Term::Product { .. });
        if self.rows.iter().flatten().any(prod) {
            2
        } else {
            1
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let comps = split(x, self.ncomp);
        let mut out = vec![0.0; self.dim()];
        for (r, terms) in self.rows.iter().enumerate() {
            let mut acc = vec![0.0; self.n];
            for t in terms {
                match t {
                    Term::Linear { comp, op } => {
                        add_to(&mut acc, &op.apply_periodic(&comps[*comp]));
                    }
                    Term::Constant(v) => add_to(&mut acc, v),
                    Term::Product { outer, left, right } => {
                        let l = left.eval(&comps);
                        let rr = right.eval(&comps);
                        let p: Vec<f64> = l.iter().zip(&rr).map(|(a, b)| a * b).collect();
                        add_to(&mut acc, &outer.apply_periodic(&p));
                    }
                }
            }
            for (i, v) in acc.into_iter().enumerate() {
                out[i * self.ncomp + r] = v;
            }
        }
        out
    }

    /// Node-offset span `(min, max)` over which output depends on input.
    pub fn node_span(&self) -> (isize, isize) {
        let mut lo = 0isize;
        let mut hi = 0isize;
        let mut take = |a: (isize, isize)| {
            lo = lo.min(a.0);
            hi = hi.max(a.1);
        };
        for t in self.rows.iter().flatten() {
            match t {
                Term::Linear { op, .. } => take(op.span()),
                Term::Constant(_) => {}
                Term::Product { outer, left, right } => {
                    let (o0, o1) = outer.span();
                    for s in [left.op.span(), right.op.span()] {
                        take((o0 + s.0, o1 + s.1));
                    }
                }
            }
        }
        (lo, hi)
    }

    /// Interleaved bandwidths `(kl, ku)` of the Jacobian.
    pub fn bandwidths(&self) -> (usize, usize) {
        node_span_to_band(self.node_span(), self.ncomp)
    }

    /// Exact Jacobian at `x`.
    pub fn jacobian(&self, x: &[f64]) -> BandMatrix {
        let (kl, ku) = self.bandwidths();
        let mut j = BandMatrix::zeros(self.dim(), kl, ku, true);
        self.add_jacobian(x, 1.0, &mut j);
        j
    }

    /// `jac += scale · ∂map/∂x` at `x`; `jac` must have room for the band.
    pub fn add_jacobian(&self, x: &[f64], scale: f64, jac: &mut BandMatrix) {
        let nc = self.ncomp;
        let n = self.n as isize;
        let wrap = |i: isize| i.rem_euclid(n) as usize;
        let comps = split(x, nc);
        for (r, terms) in self.rows.iter().enumerate() {
            for t in terms {
                match t {
                    Term::Linear { comp, op } => {
                        for i in 0..self.n {
                            for &(o, w) in op.taps() {
                                let col = wrap(i as isize + o) * nc + comp;
                                jac.add(i * nc + r, col, scale * w).expect("band too narrow");
                            }
                        }
                    }
                    Term::Constant(_) => {}
                    Term::Product { outer, left, right } => {
                        let lv = left.eval(&comps);
                        let rv = right.eval(&comps);
                        for i in 0..self.n {
                            for &(oo, wo) in outer.taps() {
                                let k = wrap(i as isize + oo);
                                for (operand, other) in [(left, &rv), (right, &lv)] {
                                    let f = scale * wo * other[k];
                                    if f == 0.0 {
                                        continue;
                                    }
                                    for &(ol, wl) in operand.op.taps() {
                                        let col = wrap(k as isize + ol) * nc + operand.comp;
                                        jac.add(i * nc + r, col, f * wl).expect("band too narrow");
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn node_span_to_band(span: (isize, isize), ncomp: usize) -> (usize, usize) {
    let kl = (-span.0).max(0) as usize * ncomp + ncomp - 1;
    let ku = span.1.max(0) as usize * ncomp + ncomp - 1;
    (kl, ku)
}

fn add_to(acc: &mut [f64], v: &[f64]) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
}

/// Splits an interleaved state into its components.
pub fn split(x: &[f64], ncomp: usize) -> Vec<Vec<f64>> {
    (0..ncomp).map(|c| x.iter().skip(c).step_by(ncomp).copied().collect()).collect()
}

/// Interleaves equally long component arrays.
pub fn interleave(parts: &[&[f64]]) -> Vec<f64> {
    let nc = parts.len();
    let n = parts.first().map_or(0, |p| p.len());
    let mut out = vec![0.0; n * nc];
    for (c, p) in parts.iter().enumerate() {
        for (i, v) in p.iter().enumerate() {
            out[i * nc + c] = *v;
        }
    }
    out
}
