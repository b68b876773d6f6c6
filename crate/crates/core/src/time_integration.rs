//! Implicit one-step integrators for `M du/dt = g(u, t)` with constant `M`.
//!
//! Stage unknowns of the two-stage methods are interleaved node by node
//! (`(node·s + stage)·block + comp`) so the coupled Newton matrix stays banded.

use log::warn;

use crate::error::{LinalgError, SolveError};
use crate::linalg::{BandLu, BandMatrix};

/// The problem `M du/dt = g(u, t)`.
pub trait MassOde {
    fn dim(&self) -> usize;

    /// Number of consecutive unknowns that belong to one grid node.
    fn block(&self) -> usize {
        1
    }

    fn mass(&self) -> &BandMatrix;

    fn mass_is_identity(&self) -> bool {
        false
    }

    fn g(&self, u: &[f64], t: f64) -> Vec<f64>;

    fn jacobian_g(&self, u: &[f64], t: f64) -> BandMatrix;

    /// `Some(d)` when `g` is a polynomial of degree at most `d` in `u`.
    fn degree(&self) -> Option<usize> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LinearSolver {
    /// Banded LU (periodic corners through a bordered Schur complement).
    #[default]
    Banded,
    /// Dense LU of the assembled matrix.
    Dense,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    /// Residual 2-norm tolerance; `None` means `1e-13·√dim`.
    pub abs_tol: Option<f64>,
    /// Converged once `‖Δx‖∞ ≤ rel_tol·max(1, ‖x‖∞)`.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub linear_solver: LinearSolver,
    /// Factor the Jacobian at the initial guess only (chord iteration).
    pub freeze_jacobian: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            abs_tol: None,
            rel_tol: 1e-13,
            max_iter: 50,
            linear_solver: LinearSolver::Banded,
            freeze_jacobian: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual_norm: f64,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn factor(j: &BandMatrix, solver: LinearSolver) -> Result<BandLu, LinalgError> {
    match solver {
        LinearSolver::Banded => j.factor(),
        LinearSolver::Dense => {
            let n = j.dim();
            let mut full = BandMatrix::zeros(n, n.saturating_sub(1), n.saturating_sub(1), false);
            j.for_each_entry(|r, c, v| full.add(r, c, v).expect("full band"));
            full.factor()
        }
    }
}

/// Newton's method for `residual(x) = 0`.
pub fn newton_solve(
    mut residual: impl FnMut(&[f64]) -> Vec<f64>,
    mut jacobian: impl FnMut(&[f64]) -> BandMatrix,
    guess: Vec<f64>,
    opts: &NewtonOptions,
) -> Result<(Vec<f64>, NewtonReport), SolveError> {
    let mut x = guess;
    let abs_tol = opts.abs_tol.unwrap_or(1e-13 * (x.len() as f64).sqrt());
    let mut frozen: Option<BandLu> = None;
    let mut r = residual(&x);
    let mut rn = norm2(&r);
    for it in 0..opts.max_iter {
        if !rn.is_finite() {
            return Err(SolveError::NonFinite { iterations: it });
        }
        if rn <= abs_tol {
            return Ok((
                x,
                NewtonReport {
                    iterations: it,
                    residual_norm: rn,
                },
            ));
        }
        let dx = if opts.freeze_jacobian {
            if frozen.is_none() {
                frozen = Some(factor(&jacobian(&x), opts.linear_solver)?);
            }
            frozen.as_ref().expect("factored").solve(&r)?
        } else {
            factor(&jacobian(&x), opts.linear_solver)?.solve(&r)?
        };
        x.iter_mut().zip(&dx).for_each(|(a, d)| *a -= d);
        r = residual(&x);
        rn = norm2(&r);
        if norm_inf(&dx) <= opts.rel_tol * norm_inf(&x).max(1.0) {
            if !rn.is_finite() {
                return Err(SolveError::NonFinite { iterations: it + 1 });
            }
            return Ok((
                x,
                NewtonReport {
                    iterations: it + 1,
                    residual_norm: rn,
                },
            ));
        }
    }
    if rn <= abs_tol {
        return Ok((
            x,
            NewtonReport {
                iterations: opts.max_iter,
                residual_norm: rn,
            },
        ));
    }
    Err(SolveError::NoConvergence {
        iterations: opts.max_iter,
        residual: rn,
    })
}

/// Result of one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub u: Vec<f64>,
    pub newton_iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrator {
    Midpoint,
    Gauss4,
    Avf2,
    Epcm4,
    /// Fourth-order corrected AVF:
    /// `M(u₁-u₀)/dt = (I - dt²/12·J²)∫g`, `J = M⁻¹∂g` at the midpoint.
    Avf4,
}

impl Integrator {
    pub fn order(&self) -> usize {
        match self {
            Integrator::Midpoint | Integrator::Avf2 => 2,
            _ => 4,
        }
    }

    /// Advances `u` by `dt`. `guess` is an initial iterate for `u(t+dt)`.
    pub fn step<O: MassOde + ?Sized>(
        &self,
        ode: &O,
        u: &[f64],
        t: f64,
        dt: f64,
        guess: Option<&[f64]>,
        opts: &NewtonOptions,
    ) -> Result<Step, SolveError> {
        match self {
            Integrator::Midpoint => midpoint(ode, u, t, dt, guess, opts),
            Integrator::Gauss4 => gauss4(ode, u, t, dt, guess, opts),
            Integrator::Avf2 => avf2(ode, u, t, dt, guess, opts),
            Integrator::Epcm4 => epcm4(ode, u, t, dt, guess, opts),
            Integrator::Avf4 => avf4(ode, u, t, dt, guess, opts),
        }
    }
}

pub fn step_midpoint<O: MassOde + ?Sized>(ode: &O, u: &[f64], t: f64, dt: f64, opts: &NewtonOptions) -> Result<Step, SolveError> {
    midpoint(ode, u, t, dt, None, opts)
}

pub fn step_gauss4<O: MassOde + ?Sized>(ode: &O, u: &[f64], t: f64, dt: f64, opts: &NewtonOptions) -> Result<Step, SolveError> {
    gauss4(ode, u, t, dt, None, opts)
}

pub fn step_avf2<O: MassOde + ?Sized>(ode: &O, u: &[f64], t: f64, dt: f64, opts: &NewtonOptions) -> Result<Step, SolveError> {
    avf2(ode, u, t, dt, None, opts)
}

pub fn step_epcm4<O: MassOde + ?Sized>(ode: &O, u: &[f64], t: f64, dt: f64, opts: &NewtonOptions) -> Result<Step, SolveError> {
    epcm4(ode, u, t, dt, None, opts)
}

pub fn step_avf4<O: MassOde + ?Sized>(ode: &O, u: &[f64], t: f64, dt: f64, opts: &NewtonOptions) -> Result<Step, SolveError> {
    avf4(ode, u, t, dt, None, opts)
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_01(points: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w): (&[f64], &[f64]) = match points {
        1 => (&[0.0], &[2.0]),
        2 => (&[-0.577_350_269_189_625_8, 0.577_350_269_189_625_8], &[1.0, 1.0]),
        3 => (
            &[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4],
            &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0],
        ),
        4 => (
            &[
                -0.861_136_311_594_052_6,
                -0.339_981_043_584_856_3,
                0.339_981_043_584_856_3,
                0.861_136_311_594_052_6,
            ],
            &[
                0.347_854_845_137_453_9,
                0.652_145_154_862_546_1,
                0.652_145_154_862_546_1,
                0.347_854_845_137_453_9,
            ],
        ),
        _ => (
            &[
                -0.906_179_845_938_664,
                -0.538_469_310_105_683,
                0.0,
                0.538_469_310_105_683,
                0.906_179_845_938_664,
            ],
            &[
                0.236_926_885_056_189_1,
                0.478_628_670_499_366_5,
                0.568_888_888_888_888_9,
                0.478_628_670_499_366_5,
                0.236_926_885_056_189_1,
            ],
        ),
    };
    (x.iter().map(|v| 0.5 * (v + 1.0)).collect(), w.iter().map(|v| 0.5 * v).collect())
}

/// Points needed to integrate a polynomial of `degree` exactly, or a fallback.
fn quadrature_points(degree: Option<usize>, fallback: usize) -> usize {
    match degree {
        Some(d) => d / 2 + 1,
        None => {
            warn!("right-hand side has no declared polynomial degree; using {fallback}-point quadrature");
            fallback
        }
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn lin_comb(terms: &[(f64, &[f64])], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (a, x) in terms {
        axpy(&mut out, *a, x);
    }
    out
}

fn midpoint<O: MassOde + ?Sized>(ode: &O, u0: &[f64], t: f64, dt: f64, guess: Option<&[f64]>, opts: &NewtonOptions) -> Result<Step, SolveError> {
    let n = ode.dim();
    let th = t + 0.5 * dt;
    let residual = |u1: &[f64]| {
        let diff = lin_comb(&[(1.0 / dt, u1), (-1.0 / dt, u0)], n);
        let mut r = ode.mass().matvec(&diff);
        let g = ode.g(&lin_comb(&[(0.5, u0), (0.5, u1)], n), th);
        axpy(&mut r, -1.0, &g);
        r
    };
    let jacobian = |u1: &[f64]| {
        let jg = ode.jacobian_g(&lin_comb(&[(0.5, u0), (0.5, u1)], n), th);
        combine(ode.mass(), 1.0 / dt, &[(-0.5, &jg)])
    };
    let (u, rep) = newton_solve(residual, jacobian, guess.unwrap_or(u0).to_vec(), opts)?;
    Ok(Step {
        u,
        newton_iterations: rep.iterations,
    })
}

fn avf2<O: MassOde + ?Sized>(ode: &O, u0: &[f64], t: f64, dt: f64, guess: Option<&[f64]>, opts: &NewtonOptions) -> Result<Step, SolveError> {
    let n = ode.dim();
    let th = t + 0.5 * dt;
    let (xi, w) = gauss_legendre_01(quadrature_points(ode.degree(), 4));
    let path = |u1: &[f64], s: f64| lin_comb(&[(1.0 - s, u0), (s, u1)], n);
    let residual = |u1: &[f64]| {
        let diff = lin_comb(&[(1.0 / dt, u1), (-1.0 / dt, u0)], n);
        let mut r = ode.mass().matvec(&diff);
        for (s, wq) in xi.iter().zip(&w) {
            axpy(&mut r, -wq, &ode.g(&path(u1, *s), th));
        }
        r
    };
    let jacobian = |u1: &[f64]| {
        let jgs: Vec<BandMatrix> = xi.iter().map(|s| ode.jacobian_g(&path(u1, *s), th)).collect();
        let parts: Vec<(f64, &BandMatrix)> = jgs.iter().zip(xi.iter().zip(&w)).map(|(j, (s, wq))| (-wq * s, j)).collect();
        combine(ode.mass(), 1.0 / dt, &parts)
    };
    let (u, rep) = newton_solve(residual, jacobian, guess.unwrap_or(u0).to_vec(), opts)?;
    Ok(Step {
        u,
        newton_iterations: rep.iterations,
    })
}

/// `s_m·M + Σ c_k·J_k` in the widest band of the operands.
fn combine(mass: &BandMatrix, s_m: f64, parts: &[(f64, &BandMatrix)]) -> BandMatrix {
    let (mut kl, mut ku) = mass.bandwidths();
    for (_, j) in parts {
        let (a, b) = j.bandwidths();
        kl = kl.max(a);
        ku = ku.max(b);
    }
    let mut out = BandMatrix::zeros(mass.dim(), kl, ku, mass.is_periodic() || parts.iter().any(|p| p.1.is_periodic()));
    out.add_scaled(s_m, mass).expect("band");
    for (c, j) in parts {
        out.add_scaled(*c, j).expect("band");
    }
    out
}

/// Stage-interleaved coupled matrix `[s_m·M δ_ij + Σ c·J]_ij` for `s` stages.
struct StageLayout {
    n: usize,
    block: usize,
    s: usize,
}

impl StageLayout {
    fn index(&self, i: usize, stage: usize) -> usize {
        let node = i / self.block;
        (node * self.s + stage) * self.block + i % self.block
    }

    fn pack(&self, stages: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.s];
        for (st, v) in stages.iter().enumerate() {
            for (i, x) in v.iter().enumerate() {
                out[self.index(i, st)] = *x;
            }
        }
        out
    }

    fn unpack(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.s).map(|st| (0..self.n).map(|i| x[self.index(i, st)]).collect()).collect()
    }

    fn band(&self, mats: &[&BandMatrix]) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for m in mats {
            let (a, b) = m.bandwidths();
            kl = kl.max(a);
            ku = ku.max(b);
        }
        let nodes = |k: usize| k.div_ceil(self.block) + 1;
        let w = |k: usize| ((nodes(k) + 1) * self.s * self.block).min(self.n * self.s - 1);
        (w(kl), w(ku))
    }

    /// Builds the coupled matrix from `blocks[i][j] = [(coef, matrix)]`
    /// plus `s_m·M` on the stage diagonal.
    fn assemble(&self, mass: &BandMatrix, s_m: f64, blocks: &[Vec<Vec<(f64, &BandMatrix)>>]) -> BandMatrix {
        let mut all: Vec<&BandMatrix> = vec![mass];
        for row in blocks {
            for cell in row {
                all.extend(cell.iter().map(|p| p.1));
            }
        }
        let (kl, ku) = self.band(&all);
        let periodic = all.iter().any(|m| m.is_periodic());
        let mut out = BandMatrix::zeros(self.n * self.s, kl, ku, periodic);
        for st in 0..self.s {
            mass.for_each_entry(|r, c, v| out.add(self.index(r, st), self.index(c, st), s_m * v).expect("stage band"));
        }
        for (i, row) in blocks.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                for (coef, m) in cell {
                    m.for_each_entry(|r, c, v| out.add(self.index(r, i), self.index(c, j), coef * v).expect("stage band"));
                }
            }
        }
        out
    }
}

const SQRT3: f64 = 1.732_050_807_568_877_2;

fn gauss4<O: MassOde + ?Sized>(ode: &O, u0: &[f64], t: f64, dt: f64, guess: Option<&[f64]>, opts: &NewtonOptions) -> Result<Step, SolveError> {
    let n = ode.dim();
    let a = [[0.25, 0.25 - SQRT3 / 6.0], [0.25 + SQRT3 / 6.0, 0.25]];
    let c = [0.5 - SQRT3 / 6.0, 0.5 + SQRT3 / 6.0];
    let lay = StageLayout { n, block: ode.block(), s: 2 };
    let stage_states = |k: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..2)
            .map(|i| lin_comb(&[(1.0, u0), (dt * a[i][0], &k[0]), (dt * a[i][1], &k[1])], n))
            .collect()
    };
    let residual = |x: &[f64]| {
        let k = lay.unpack(x);
        let y = stage_states(&k);
        let r: Vec<Vec<f64>> = (0..2)
            .map(|i| {
                let mut ri = ode.mass().matvec(&k[i]);
                axpy(&mut ri, -1.0, &ode.g(&y[i], t + c[i] * dt));
                ri
            })
            .collect();
        lay.pack(&r)
    };
    let jacobian = |x: &[f64]| {
        let y = stage_states(&lay.unpack(x));
        let jg: Vec<BandMatrix> = (0..2).map(|i| ode.jacobian_g(&y[i], t + c[i] * dt)).collect();
        let blocks: Vec<Vec<Vec<(f64, &BandMatrix)>>> = (0..2).map(|i| (0..2).map(|j| vec![(-dt * a[i][j], &jg[i])]).collect()).collect();
        lay.assemble(ode.mass(), 1.0, &blocks)
    };
    let k0 = initial_slope(u0, guess, dt);
    let (x, rep) = newton_solve(residual, jacobian, lay.pack(&[k0.clone(), k0]), opts)?;
    let k = lay.unpack(&x);
    let u = lin_comb(&[(1.0, u0), (0.5 * dt, &k[0]), (0.5 * dt, &k[1])], n);
    Ok(Step {
        u,
        newton_iterations: rep.iterations,
    })
}

fn initial_slope(u0: &[f64], guess: Option<&[f64]>, dt: f64) -> Vec<f64> {
    match guess {
        Some(g) => g.iter().zip(u0).map(|(a, b)| (a - b) / dt).collect(),
        None => vec![0.0; u0.len()],
    }
}

fn epcm4<O: MassOde + ?Sized>(ode: &O, u0: &[f64], t: f64, dt: f64, guess: Option<&[f64]>, opts: &NewtonOptions) -> Result<Step, SolveError> {
    let n = ode.dim();
    let c = [0.5 - SQRT3 / 6.0, 0.5 + SQRT3 / 6.0];
    let b = [0.5, 0.5];
    // ℓ_i are the Lagrange polynomials on c; Λ_i their antiderivatives from 0.
    let ell = |i: usize, s: f64| {
        let j = 1 - i;
        (s - c[j]) / (c[i] - c[j])
    };
    let big = |i: usize, s: f64| {
        let j = 1 - i;
        ((s - c[j]).powi(2) - c[j] * c[j]) / (2.0 * (c[i] - c[j]))
    };
    let npts = match ode.degree() {
        Some(d) => d + 1,
        None => quadrature_points(None, 5),
    };
    let (tau, w) = gauss_legendre_01(npts.max(2));
    let lay = StageLayout { n, block: ode.block(), s: 2 };
    let sigma = |k: &[Vec<f64>], s: f64| lin_comb(&[(1.0, u0), (dt * big(0, s), &k[0]), (dt * big(1, s), &k[1])], n);
    let residual = |x: &[f64]| {
        let k = lay.unpack(x);
        let mut r: Vec<Vec<f64>> = (0..2).map(|i| ode.mass().matvec(&k[i])).collect();
        for (s, wq) in tau.iter().zip(&w) {
            let g = ode.g(&sigma(&k, *s), t + s * dt);
            for i in 0..2 {
                axpy(&mut r[i], -wq * ell(i, *s) / b[i], &g);
            }
        }
        lay.pack(&r)
    };
    let jacobian = |x: &[f64]| {
        let k = lay.unpack(x);
        let jg: Vec<BandMatrix> = tau.iter().map(|s| ode.jacobian_g(&sigma(&k, *s), t + s * dt)).collect();
        let blocks: Vec<Vec<Vec<(f64, &BandMatrix)>>> = (0..2)
            .map(|i| {
                (0..2)
                    .map(|j| {
                        tau.iter()
                            .zip(&w)
                            .zip(&jg)
                            .map(|((s, wq), m)| (-wq * ell(i, *s) / b[i] * dt * big(j, *s), m))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        lay.assemble(ode.mass(), 1.0, &blocks)
    };
    let k0 = initial_slope(u0, guess, dt);
    let (x, rep) = newton_solve(residual, jacobian, lay.pack(&[k0.clone(), k0]), opts)?;
    let k = lay.unpack(&x);
    Ok(Step {
        u: sigma(&k, 1.0),
        newton_iterations: rep.iterations,
    })
}

fn avf4<O: MassOde + ?Sized>(ode: &O, u0: &[f64], t: f64, dt: f64, guess: Option<&[f64]>, opts: &NewtonOptions) -> Result<Step, SolveError> {
    let n = ode.dim();
    let th = t + 0.5 * dt;
    let (xi, w) = gauss_legendre_01(quadrature_points(ode.degree(), 4));
    let identity = ode.mass_is_identity();
    let mass_lu = if identity { None } else { Some(ode.mass().factor()?) };
    let minv = |v: &[f64]| -> Result<Vec<f64>, LinalgError> {
        match &mass_lu {
            Some(lu) => lu.solve(v),
            None => Ok(v.to_vec()),
        }
    };
    let mut failure: Option<LinalgError> = None;
    let mut residual = |u1: &[f64]| {
        let mid = lin_comb(&[(0.5, u0), (0.5, u1)], n);
        let jg = ode.jacobian_g(&mid, th);
        let mut avg = vec![0.0; n];
        for (s, wq) in xi.iter().zip(&w) {
            axpy(&mut avg, *wq, &ode.g(&lin_comb(&[(1.0 - s, u0), (*s, u1)], n), th));
        }
        let corr = minv(&avg).and_then(|y| minv(&jg.matvec(&y))).map(|z| jg.matvec(&z));
        let mut r = ode.mass().matvec(&lin_comb(&[(1.0 / dt, u1), (-1.0 / dt, u0)], n));
        axpy(&mut r, -1.0, &avg);
        match corr {
            Ok(c) => axpy(&mut r, dt * dt / 12.0, &c),
            Err(e) => {
                failure = Some(e);
                r.iter_mut().for_each(|v| *v = f64::NAN);
            }
        }
        r
    };
    let jacobian = |u1: &[f64]| {
        let jg = ode.jacobian_g(&lin_comb(&[(0.5, u0), (0.5, u1)], n), th);
        if identity {
            let j3 = jg.matmul(&jg).matmul(&jg);
            combine(ode.mass(), 1.0 / dt, &[(-0.5, &jg), (dt * dt / 24.0, &j3)])
        } else {
            dense_avf4_matrix(ode.mass(), &jg, dt)
        }
    };
    let out = newton_solve(&mut residual, jacobian, guess.unwrap_or(u0).to_vec(), opts);
    if let Some(e) = failure {
        return Err(e.into());
    }
    let (u, rep) = out?;
    Ok(Step {
        u,
        newton_iterations: rep.iterations,
    })
}

/// `M/dt - ½(G - dt²/12·G M⁻¹ G M⁻¹ G)` assembled densely.
fn dense_avf4_matrix(mass: &BandMatrix, jg: &BandMatrix, dt: f64) -> BandMatrix {
    let n = mass.dim();
    let md = mass.to_dense();
    let gd = jg.to_dense();
    let lu = md.clone().lu();
    let mg = lu.solve(&gd).unwrap_or_else(|| nalgebra::DMatrix::from_element(n, n, f64::NAN));
    let corr = &gd * &mg * &mg;
    let full = md / dt - (&gd - corr * (dt * dt / 12.0)) * 0.5;
    let mut out = BandMatrix::zeros(n, n - 1, n - 1, false);
    for r in 0..n {
        for c in 0..n {
            if full[(r, c)] != 0.0 {
                out.add(r, c, full[(r, c)]).expect("full band");
            }
        }
    }
    out
}
