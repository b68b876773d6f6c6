//! Banded matrices with optional periodic corners, and their LU factorisation.
//!
//! Periodic stencils produce a band plus two corner blocks. Reordering the
//! unknowns as `0, n-1, 1, n-2, …` folds the corners into an ordinary band of
//! roughly twice the width, which is then factorised with partial pivoting, so
//! the work stays linear in `n`.

use nalgebra::{DMatrix, DVector};

use crate::error::LinalgError;

/// Square matrix with `kl` sub- and `ku` super-diagonals. When `periodic`,
/// column indices wrap modulo `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    periodic: bool,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize, periodic: bool) -> Self {
        Self {
            n,
            kl,
            ku,
            periodic,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn identity(n: usize, periodic: bool) -> Self {
        let mut m = Self::zeros(n, 0, 0, periodic);
        m.data.iter_mut().for_each(|v| *v = 1.0);
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn diag_offset(&self, row: usize, col: usize) -> Option<isize> {
        let d = col as isize - row as isize;
        let fits = |d: isize| d >= -(self.kl as isize) && d <= self.ku as isize;
        if fits(d) {
            return Some(d);
        }
        if self.periodic {
            let n = self.n as isize;
            [d - n, d + n].into_iter().find(|&e| fits(e))
        } else {
            None
        }
    }

    /// Adds `v` to entry `(row, col)`.
    pub fn add(&mut self, row: usize, col: usize, v: f64) -> Result<(), LinalgError> {
        let d = self.diag_offset(row, col).ok_or(LinalgError::OutsideBand { row, col })?;
        let w = self.width();
        self.data[row * w + (d + self.kl as isize) as usize] += v;
        Ok(())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let w = self.width();
        let n = self.n as isize;
        (-(self.kl as isize)..=self.ku as isize)
            .filter(|d| {
                let j = row as isize + d;
                if self.periodic {
                    j.rem_euclid(n) == col as isize
                } else {
                    j == col as isize
                }
            })
            .map(|d| self.data[row * w + (d + self.kl as isize) as usize])
            .sum()
    }

    /// Calls `f(row, col, value)` for every stored entry.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, f64)) {
        let w = self.width();
        let n = self.n as isize;
        for i in 0..self.n {
            for (k, &v) in self.data[i * w..(i + 1) * w].iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let j = i as isize + k as isize - self.kl as isize;
                if self.periodic {
                    f(i, j.rem_euclid(n) as usize, v);
                } else if (0..n).contains(&j) {
                    f(i, j as usize, v);
                }
            }
        }
    }

    /// `self += s * other` where `other`'s band fits inside `self`'s.
    pub fn add_scaled(&mut self, s: f64, other: &BandMatrix) -> Result<(), LinalgError> {
        let mut res = Ok(());
        other.for_each_entry(|i, j, v| {
            if res.is_ok() {
                res = self.add(i, j, s * v);
            }
        });
        res
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Matrix product; bandwidths add.
    pub fn matmul(&self, other: &BandMatrix) -> BandMatrix {
        let n = self.n;
        let kl = (self.kl + other.kl).min(n - 1);
        let ku = (self.ku + other.ku).min(n - 1);
        let mut c = BandMatrix::zeros(n, kl, ku, self.periodic || other.periodic);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        other.for_each_entry(|k, j, v| rows[k].push((j, v)));
        self.for_each_entry(|i, k, a| {
            for &(j, b) in &rows[k] {
                c.add(i, j, a * b).expect("product band");
            }
        });
        c
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.for_each_entry(|i, j, v| y[i] += v * x[j]);
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        self.for_each_entry(|i, j, v| m[(i, j)] += v);
        m
    }

    pub fn factor(&self) -> Result<BandLu, LinalgError> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let nb = kl.max(ku);
        let wraps = self.periodic && nb > 0;
        if n <= 2 * (kl + ku) + 4 || (wraps && n <= 3 * nb + 2) {
            return dense_lu(self.to_dense(), self.max_abs()).map(BandLu::Dense);
        }
        if !wraps {
            let mut core = BandCore::from_band(self, n);
            return match core.factor() {
                Ok(()) => Ok(BandLu::Band(core)),
                Err(_) => dense_lu(self.to_dense(), self.max_abs()).map(BandLu::Dense),
            };
        }
        let folded = Folded::new(self);
        match folded {
            Ok(f) => Ok(BandLu::Folded(f)),
            Err(_) => dense_lu(self.to_dense(), self.max_abs()).map(BandLu::Dense),
        }
    }
}

/// Dense LU; a pivot below `n·ε·scale` counts as singular.
fn dense_lu(m: DMatrix<f64>, scale: f64) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, LinalgError> {
    let tol = m.nrows() as f64 * f64::EPSILON * scale;
    let lu = m.lu();
    let u = lu.u();
    for k in 0..u.nrows() {
        if !(u[(k, k)].abs() > tol) {
            return Err(LinalgError::Singular { pivot: k });
        }
    }
    Ok(lu)
}

/// Non-periodic banded LU with partial pivoting. Row `i` stores columns
/// `i-kl ..= i+ku+kl` so pivoting fill-in has room.
#[derive(Clone, Debug)]
pub struct BandCore {
    n: usize,
    kl: usize,
    ku: usize,
    a: Vec<f64>,
    lmul: Vec<f64>,
    piv: Vec<usize>,
}

impl BandCore {
    fn w(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn idx(&self, row: usize, col: usize) -> usize {
        row * self.w() + (col + self.kl - row)
    }

    /// Leading `m × m` block of a band matrix, ignoring wrapped entries.
    fn from_band(src: &BandMatrix, m: usize) -> Self {
        let (kl, ku) = (src.kl, src.ku);
        let mut core = Self {
            n: m,
            kl,
            ku,
            a: vec![0.0; m * (2 * kl + ku + 1)],
            lmul: vec![0.0; m * kl],
            piv: vec![0; m],
        };
        let sw = src.width();
        for i in 0..m {
            for k in 0..sw {
                let j = i as isize + k as isize - kl as isize;
                if j >= 0 && (j as usize) < m {
                    let id = core.idx(i, j as usize);
                    core.a[id] = src.data[i * sw + k];
                }
            }
        }
        core
    }

    fn factor(&mut self) -> Result<(), LinalgError> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.a[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.a[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(LinalgError::Singular { pivot: k });
            }
            self.piv[k] = p;
            if p != k {
                for c in k..=last_col {
                    let (ik, ip) = (self.idx(k, c), self.idx(p, c));
                    self.a.swap(ik, ip);
                }
            }
            let pivot = self.a[self.idx(k, k)];
            for i in k + 1..=last_row {
                let ii = self.idx(i, k);
                let m = self.a[ii] / pivot;
                self.a[ii] = 0.0;
                self.lmul[k * kl + (i - k - 1)] = m;
                if m != 0.0 {
                    for c in k + 1..=last_col {
                        let (ic, kc) = (self.idx(i, c), self.idx(k, c));
                        self.a[ic] -= m * self.a[kc];
                    }
                }
            }
        }
        Ok(())
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    b[i] -= self.lmul[k * kl + (i - k - 1)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for c in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.a[self.idx(k, c)] * b[c];
            }
            b[k] = s / self.a[self.idx(k, k)];
        }
    }
}

/// Position of node `i` in the folded order `0, n-1, 1, n-2, …`.
fn fold(i: usize, n: usize) -> usize {
    if 2 * i < n {
        2 * i
    } else {
        2 * (n - 1 - i) + 1
    }
}

/// Periodic band factorised in the folded order.
#[derive(Clone, Debug)]
pub struct Folded {
    core: BandCore,
}

impl Folded {
    fn new(src: &BandMatrix) -> Result<Self, LinalgError> {
        let n = src.n;
        let w = 2 * src.kl.max(src.ku) + 1;
        let mut band = BandMatrix::zeros(n, w, w, false);
        let mut res = Ok(());
        src.for_each_entry(|i, j, v| {
            if res.is_ok() {
                res = band.add(fold(i, n), fold(j, n), v);
            }
        });
        res?;
        let mut core = BandCore::from_band(&band, n);
        core.factor()?;
        Ok(Self { core })
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = b.len();
        let mut y = vec![0.0; n];
        b.iter().enumerate().for_each(|(i, v)| y[fold(i, n)] = *v);
        self.core.solve_in_place(&mut y);
        b.iter_mut().enumerate().for_each(|(i, v)| *v = y[fold(i, n)]);
    }
}

/// Factorised band matrix ready for repeated solves.
#[derive(Clone, Debug)]
pub enum BandLu {
    Band(BandCore),
    Folded(Folded),
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<(), LinalgError> {
        match self {
            BandLu::Band(c) => {
                c.solve_in_place(b);
                Ok(())
            }
            BandLu::Folded(f) => {
                f.solve_in_place(b);
                Ok(())
            }
            BandLu::Dense(lu) => {
                let x = lu.solve(&DVector::from_column_slice(b)).ok_or(LinalgError::Singular { pivot: 0 })?;
                b.copy_from_slice(x.as_slice());
                Ok(())
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(LinalgError::Singular { pivot: 0 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, kl: usize, ku: usize, periodic: bool, seed: u64) -> BandMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = BandMatrix::zeros(n, kl, ku, periodic);
        for i in 0..n {
            for d in -(kl as isize)..=ku as isize {
                let j = i as isize + d;
                if periodic || (0..n as isize).contains(&j) {
                    let bump = if d == 0 { 1.5 } else { 0.0 };
                    m.add(i, j.rem_euclid(n as isize) as usize, bump + rng.gen_range(-1.0..1.0)).unwrap();
                }
            }
        }
        m
    }

    fn check_solve(m: &BandMatrix, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..m.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = m.matvec(&x);
        let y = m.factor().unwrap().solve(&b).unwrap();
        let r = m.matvec(&y);
        let res = r.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(res < 1e-11, "residual {res}");
        let dense = m.to_dense().lu().solve(&DVector::from_vec(b)).unwrap();
        let diff = dense.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = dense.iter().fold(1.0, |m: f64, v| m.max(v.abs()));
        assert!(diff < 1e-8 * scale, "diff {diff}");
    }

    /// A cyclic shift has a singular leading block but is a permutation.
    #[test]
    fn periodic_shift_with_singular_leading_block() {
        let n = 64;
        let mut m = BandMatrix::zeros(n, 0, 1, true);
        for i in 0..n {
            m.add(i, (i + 1) % n, 1.0).unwrap();
            m.add(i, i, 1e-3).unwrap();
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = m.factor().unwrap().solve(&b).unwrap();
        let r = m.matvec(&x);
        assert!(r.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12));
    }

    #[test]
    fn banded_solve_matches_dense() {
        for (s, &(n, kl, ku)) in [(50, 2, 3), (80, 5, 1), (120, 0, 4), (60, 3, 0)].iter().enumerate() {
            check_solve(&random_band(n, kl, ku, false, s as u64), 100 + s as u64);
        }
    }

    #[test]
    fn periodic_solve_matches_dense() {
        for (s, &(n, kl, ku)) in [(50, 2, 3), (81, 5, 5), (200, 7, 4), (12, 3, 3)].iter().enumerate() {
            check_solve(&random_band(n, kl, ku, true, s as u64), 200 + s as u64);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut m = BandMatrix::zeros(40, 0, 1, true);
        for i in 0..40 {
            m.add(i, i, 0.5).unwrap();
            m.add(i, (i + 1) % 40, 0.5).unwrap();
        }
        assert!(m.factor().is_err());
    }

    #[test]
    fn band_product_matches_dense() {
        let a = random_band(30, 2, 1, true, 7);
        let b = random_band(30, 1, 3, true, 8);
        let c = a.matmul(&b).to_dense();
        let d = a.to_dense() * b.to_dense();
        assert!((c - d).amax() < 1e-13);
    }

    #[test]
    fn corner_entries_wrap() {
        let mut m = BandMatrix::zeros(10, 1, 1, true);
        m.add(0, 9, 2.0).unwrap();
        m.add(9, 0, 3.0).unwrap();
        assert_eq!(m.get(0, 9), 2.0);
        assert_eq!(m.get(9, 0), 3.0);
        assert!(m.add(0, 5, 1.0).is_err());
        let y = m.matvec(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 10.0]);
        assert_eq!(y[0], 20.0);
        assert_eq!(y[9], 3.0);
    }
}
