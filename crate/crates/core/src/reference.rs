//! Comparison schemes for the Boussinesq system.
//!
//! MP and DVD are one-step schemes on `(u, v)`: a centred semidiscretisation
//! with implicit midpoint, and a Hamiltonian semidiscretisation with AVF.
//! PS (Preissmann box) and FD4 are scalar three-level schemes for
//! `u_tt = (u + u² - u_xx)_xx` and are advanced by a Newton solve per step.

use serde::{Deserialize, Serialize};

use crate::error::{GridError, SchemeError, SolveError};
use crate::grid::GridSpec1D;
use crate::linalg::BandMatrix;
use crate::quadratic::{interleave, split, Operand, QuadraticMap};
use crate::stencil::{make_dm, make_dmc, make_mum, shift, StencilOperator};
use crate::time_integration::{newton_solve, step_avf2, step_midpoint, MassOde, NewtonOptions, NewtonReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReferenceScheme {
    PS,
    MP,
    DVD,
    FD4,
}

impl ReferenceScheme {
    pub fn name(&self) -> &'static str {
        match self {
            ReferenceScheme::PS => "PS",
            ReferenceScheme::MP => "MP",
            ReferenceScheme::DVD => "DVD",
            ReferenceScheme::FD4 => "FD4",
        }
    }

    /// PS and FD4 need two prior time levels.
    pub fn is_three_level(&self) -> bool {
        matches!(self, ReferenceScheme::PS | ReferenceScheme::FD4)
    }
}

fn check_grid(grid: &GridSpec1D) -> Result<(), SchemeError> {
    if !grid.is_periodic() {
        return Err(GridError::NotPeriodic.into());
    }
    if grid.len() < 6 {
        return Err(GridError::TooFewCells {
            n_cells: grid.len(),
            required: 6,
        }
        .into());
    }
    Ok(())
}

/// `D_m² S⁻¹`.
fn second_difference(dx: f64) -> StencilOperator {
    let d = make_dm(dx);
    &d * &d * shift(-1)
}

/// MP or DVD written as `(U, V)' = g(U, V)` with identity mass.
#[derive(Clone, Debug)]
pub struct OneStepSystem {
    scheme: ReferenceScheme,
    grid: GridSpec1D,
    rhs: QuadraticMap,
    mass: BandMatrix,
}

/// `U' = D^c V`, `V' = D^c(U + U² - D²S⁻¹U)`.
pub fn build_mp(grid: &GridSpec1D) -> Result<OneStepSystem, SchemeError> {
    let dc = make_dmc(grid.dx());
    build_one_step(ReferenceScheme::MP, grid, dc.clone(), dc)
}

/// `U' = D V`, `V' = D S⁻¹(U + U² - D²S⁻¹U)`: the Hamiltonian form whose
/// energy is `½(U² + V² + μ((DU₋₁)²)) + ⅓U³`.
pub fn build_dvd(grid: &GridSpec1D) -> Result<OneStepSystem, SchemeError> {
    let d = make_dm(grid.dx());
    let ds = &d * shift(-1);
    build_one_step(ReferenceScheme::DVD, grid, d, ds)
}

fn build_one_step(scheme: ReferenceScheme, grid: &GridSpec1D, du: StencilOperator, dv: StencilOperator) -> Result<OneStepSystem, SchemeError> {
    check_grid(grid)?;
    let n = grid.len();
    let id = StencilOperator::identity();
    let mut rhs = QuadraticMap::new(n, 2);
    rhs.linear(0, 1, du)
        .linear(1, 0, &dv * (&id - second_difference(grid.dx())))
        .product(1, dv, Operand::new(0, id.clone()), Operand::new(0, id));
    let (kl, ku) = rhs.bandwidths();
    let mut mass = BandMatrix::zeros(2 * n, kl, ku, true);
    for i in 0..2 * n {
        mass.add(i, i, 1.0)?;
    }
    Ok(OneStepSystem {
        scheme,
        grid: *grid,
        rhs,
        mass,
    })
}

impl OneStepSystem {
    pub fn scheme(&self) -> ReferenceScheme {
        self.scheme
    }

    pub fn grid(&self) -> &GridSpec1D {
        &self.grid
    }

    /// Advances `(u, v)` by one step (midpoint for MP, AVF for DVD).
    pub fn step(&self, u: &[f64], v: &[f64], t: f64, dt: f64, opts: &NewtonOptions) -> Result<(Vec<f64>, Vec<f64>, NewtonReport), SolveError> {
        let x = interleave(&[u, v]);
        let s = match self.scheme {
            ReferenceScheme::DVD => step_avf2(self, &x, t, dt, opts)?,
            _ => step_midpoint(self, &x, t, dt, opts)?,
        };
        let mut parts = split(&s.u, 2);
        let v1 = parts.pop().expect("two components");
        Ok((
            parts.pop().expect("two components"),
            v1,
            NewtonReport {
                iterations: s.newton_iterations,
                residual_norm: 0.0,
            },
        ))
    }
}

impl MassOde for OneStepSystem {
    fn dim(&self) -> usize {
        2 * self.grid.len()
    }

    fn block(&self) -> usize {
        2
    }

    fn mass(&self) -> &BandMatrix {
        &self.mass
    }

    fn mass_is_identity(&self) -> bool {
        true
    }

    fn g(&self, u: &[f64], _t: f64) -> Vec<f64> {
        self.rhs.eval(u)
    }

    fn jacobian_g(&self, u: &[f64], _t: f64) -> BandMatrix {
        self.rhs.jacobian(u)
    }

    fn degree(&self) -> Option<usize> {
        Some(2)
    }
}

pub fn step_mp(sys: &OneStepSystem, u: &[f64], v: &[f64], dt: f64, opts: &NewtonOptions) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
    sys.step(u, v, 0.0, dt, opts).map(|(u, v, _)| (u, v))
}

pub fn step_dvd(sys: &OneStepSystem, u: &[f64], v: &[f64], dt: f64, opts: &NewtonOptions) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
    sys.step(u, v, 0.0, dt, opts).map(|(u, v, _)| (u, v))
}

/// PS or FD4 at a fixed grid and time step.
#[derive(Clone, Debug)]
pub struct ThreeLevelScheme {
    scheme: ReferenceScheme,
    grid: GridSpec1D,
    dt: f64,
    /// Linear and quadratic parts in the new level; its Jacobian is the
    /// Newton matrix (it does not depend on the old levels except through
    /// operand offsets, which are set per step).
    linear: StencilOperator,
    outer: StencilOperator,
    inner: StencilOperator,
}

pub fn build_ps(grid: &GridSpec1D, dt: f64) -> Result<ThreeLevelScheme, SchemeError> {
    check_grid(grid)?;
    let dx = grid.dx();
    let (d, mu) = (make_dm(dx), make_mum());
    let s2 = shift(-2);
    let d2 = &d * &d;
    let mu2 = &mu * &mu;
    let linear = (1.0 / (dt * dt)) * (&s2 * &mu2 * &mu2) - 0.25 * (&s2 * &d2 * &mu2) + 0.25 * (&s2 * &d2 * &d2);
    Ok(ThreeLevelScheme {
        scheme: ReferenceScheme::PS,
        grid: *grid,
        dt,
        linear,
        outer: -0.5 * (&s2 * &d2 * &mu),
        inner: 0.5 * &mu,
    })
}

pub fn build_fd4(grid: &GridSpec1D, dt: f64) -> Result<ThreeLevelScheme, SchemeError> {
    check_grid(grid)?;
    let l2 = second_difference(grid.dx());
    let l = StencilOperator::identity() + (grid.dx() * grid.dx() / 12.0) * &l2;
    let linear = (1.0 / (dt * dt)) * (&l * &l) - 0.25 * (&l2 * &l) + 0.25 * (&l2 * &l2);
    Ok(ThreeLevelScheme {
        scheme: ReferenceScheme::FD4,
        grid: *grid,
        dt,
        outer: -0.5 * (&l2 * &l),
        linear,
        inner: 0.5 * StencilOperator::identity(),
    })
}

fn add(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

fn sq(a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| x * x).collect()
}

impl ThreeLevelScheme {
    pub fn scheme(&self) -> ReferenceScheme {
        self.scheme
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Residual of the scheme relation for levels `a` (oldest), `b`, `c` (new),
    /// transcribed directly from the scheme's defining display.
    pub fn residual(&self, a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
        let dx = self.grid.dx();
        let dt2 = self.dt * self.dt;
        let ap = |op: &StencilOperator, f: &[f64]| op.apply_periodic(f);
        let (d, mu) = (make_dm(dx), make_mum());
        let d2 = |f: &[f64]| ap(&d, &ap(&d, f));
        let acc = add(&add(a, b, -2.0), c, 1.0);
        let q: Vec<f64> = (0..a.len()).map(|i| (a[i] + 2.0 * b[i] + c[i]) / 4.0).collect();
        match self.scheme {
            ReferenceScheme::PS => {
                let s2 = shift(-2);
                let mu4 = ap(&mu, &ap(&mu, &ap(&mu, &ap(&mu, &acc))));
                let (ma, mb, mc) = (ap(&mu, a), ap(&mu, b), ap(&mu, c));
                let w1: Vec<f64> = ma.iter().zip(&mb).map(|(x, y)| (x + y) / 2.0).collect();
                let w2: Vec<f64> = mb.iter().zip(&mc).map(|(x, y)| (x + y) / 2.0).collect();
                let nl: Vec<f64> = w1.iter().zip(&w2).map(|(x, y)| (x * x + y * y) / 2.0).collect();
                let t1 = ap(&s2, &mu4);
                let t2 = ap(&s2, &d2(&ap(&mu, &ap(&mu, &q))));
                let t3 = ap(&s2, &d2(&ap(&mu, &nl)));
                let t4 = ap(&s2, &d2(&d2(&q)));
                (0..a.len()).map(|i| t1[i] / dt2 - t2[i] - t3[i] + t4[i]).collect()
            }
            _ => {
                let l = |f: &[f64]| add(f, &ap(&shift(-1), &d2(f)), dx * dx / 12.0);
                let w1: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x + y) / 2.0).collect();
                let w2: Vec<f64> = b.iter().zip(c).map(|(x, y)| (x + y) / 2.0).collect();
                let l1 = l(&add(&w1, &sq(&w1), 1.0));
                let l2 = l(&add(&w2, &sq(&w2), 1.0));
                let wsum: Vec<f64> = w1.iter().zip(&w2).map(|(x, y)| (x + y) / 2.0).collect();
                let disp = ap(&shift(-1), &d2(&wsum));
                let br: Vec<f64> = (0..a.len()).map(|i| (l1[i] + l2[i]) / 2.0 - disp[i]).collect();
                let lhs = l(&l(&acc));
                let rhs = ap(&shift(-1), &d2(&br));
                (0..a.len()).map(|i| lhs[i] / dt2 - rhs[i]).collect()
            }
        }
    }

    /// Jacobian of [`residual`](Self::residual) with respect to the new level.
    pub fn jacobian(&self, b: &[f64], c: &[f64]) -> BandMatrix {
        let offset: Vec<f64> = match self.scheme {
            ReferenceScheme::PS => make_mum().apply_periodic(b).iter().map(|x| x / 2.0).collect(),
            _ => b.iter().map(|x| x / 2.0).collect(),
        };
        let mut m = QuadraticMap::new(self.grid.len(), 1);
        let w = Operand::with_offset(0, self.inner.clone(), offset);
        m.linear(0, 0, self.linear.clone()).product(0, self.outer.clone(), w.clone(), w);
        m.jacobian(c)
    }

    /// Solves for the level after `b`, starting Newton from `2b - a`.
    pub fn step(&self, a: &[f64], b: &[f64], opts: &NewtonOptions) -> Result<(Vec<f64>, NewtonReport), SolveError> {
        let guess = add(&add(b, b, 1.0), a, -1.0);
        newton_solve(|c| self.residual(a, b, c), |c| self.jacobian(b, c), guess, opts)
    }
}

pub fn step_ps(sys: &ThreeLevelScheme, a: &[f64], b: &[f64], opts: &NewtonOptions) -> Result<Vec<f64>, SolveError> {
    sys.step(a, b, opts).map(|r| r.0)
}

pub fn step_fd4(sys: &ThreeLevelScheme, a: &[f64], b: &[f64], opts: &NewtonOptions) -> Result<Vec<f64>, SolveError> {
    sys.step(a, b, opts).map(|r| r.0)
}

/// Recovers `v` for a scalar scheme from its `u` history through `u_t = v_x`:
/// `v^j_m = Σ_{i≤m} Δx·δu_i - ½Δx·δu_m` with `δu = (u^j - u^{j-1})/Δt`,
/// and `v^0 = v^1`.
pub fn reconstruct_v(us: &[Vec<f64>], dx: f64, dt: f64) -> Vec<Vec<f64>> {
    let mut vs: Vec<Vec<f64>> = us
        .windows(2)
        .map(|w| {
            let mut acc = 0.0;
            w[1].iter()
                .zip(&w[0])
                .map(|(new, old)| {
                    let inc = dx * (new - old) / dt;
                    acc += inc;
                    acc - 0.5 * inc
                })
                .collect()
        })
        .collect();
    if let Some(first) = vs.first().cloned() {
        vs.insert(0, first);
    }
    vs
}

/// Monitor densities for schemes without their own: `U`, `V`, `UV` and the
/// energy. `full_energy` selects `½(U² + V² + μ((DU₋₁)²)) + ⅓U³`; otherwise
/// the `u_x` term is dropped.
pub fn default_density(which: usize, u: &[f64], v: &[f64], dx: f64, full_energy: bool) -> Result<Vec<f64>, SchemeError> {
    match which {
        1 => Ok(u.to_vec()),
        2 => Ok(v.to_vec()),
        3 => Ok(u.iter().zip(v).map(|(a, b)| a * b).collect()),
        4 => {
            let grad = if full_energy {
                let du = (make_dm(dx) * shift(-1)).apply_periodic(u);
                make_mum().apply_periodic(&sq(&du))
            } else {
                vec![0.0; u.len()]
            };
            Ok((0..u.len())
                .map(|i| 0.5 * (u[i] * u[i] + v[i] * v[i] + grad[i]) + u[i].powi(3) / 3.0)
                .collect())
        }
        _ => Err(SchemeError::UndefinedDensity(which)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{soliton_uv, SolitonParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> GridSpec1D {
        GridSpec1D::periodic(0.0, 0.5 * n as f64, n).unwrap()
    }

    #[test]
    fn zero_state_is_fixed() {
        let g = grid(24);
        let z = vec![0.0; 24];
        let opts = NewtonOptions::default();
        for sys in [build_mp(&g).unwrap(), build_dvd(&g).unwrap()] {
            let (u, v, _) = sys.step(&z, &z, 0.0, 0.5, &opts).unwrap();
            assert!(u.iter().chain(&v).all(|&x| x == 0.0));
        }
        for sys in [build_ps(&g, 0.5).unwrap(), build_fd4(&g, 0.25).unwrap()] {
            let (c, _) = sys.step(&z, &z, &opts).unwrap();
            assert!(c.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn rejects_prescribed_grid() {
        let g = GridSpec1D::prescribed(0.0, 1.0, 20).unwrap();
        assert!(build_mp(&g).is_err());
        assert!(build_ps(&g, 0.1).is_err());
    }

    #[test]
    fn three_level_jacobians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 15;
        let g = grid(n);
        for sys in [build_ps(&g, 0.5).unwrap(), build_fd4(&g, 0.25).unwrap()] {
            let r = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
            let (a, b, c) = (r(&mut rng), r(&mut rng), r(&mut rng));
            let jac = sys.jacobian(&b, &c).to_dense();
            for col in 0..n {
                let (mut cp, mut cm) = (c.clone(), c.clone());
                cp[col] += 1.0;
                cm[col] -= 1.0;
                let (fp, fm) = (sys.residual(&a, &b, &cp), sys.residual(&a, &b, &cm));
                for row in 0..n {
                    let fd = (fp[row] - fm[row]) / 2.0;
                    assert!(
                        (fd - jac[(row, col)]).abs() < 1e-10 * fd.abs().max(1.0),
                        "{:?} ({row},{col})",
                        sys.scheme()
                    );
                }
            }
        }
    }

    #[test]
    fn one_step_schemes_conserve_linear_invariants() {
        let g = GridSpec1D::periodic_closed(-60.0, 60.0, 0.5).unwrap();
        let p = SolitonParams::benchmark();
        let (u0, v0): (Vec<f64>, Vec<f64>) = g.nodes().iter().map(|&x| soliton_uv(x, 0.0, &p)).unzip();
        let opts = NewtonOptions::default();
        let sum = |f: &[f64]| f.iter().sum::<f64>();
        for sys in [build_mp(&g).unwrap(), build_dvd(&g).unwrap()] {
            let (mut u, mut v) = (u0.clone(), v0.clone());
            for _ in 0..10 {
                (u, v) = step_mp(&sys, &u, &v, 0.5, &opts).unwrap();
            }
            assert!((sum(&u) - sum(&u0)).abs() * g.dx() < 1e-12);
            assert!((sum(&v) - sum(&v0)).abs() * g.dx() < 1e-12);
        }
    }

    #[test]
    fn dvd_conserves_its_energy() {
        let g = GridSpec1D::periodic_closed(-60.0, 60.0, 0.5).unwrap();
        let p = SolitonParams::benchmark();
        let (mut u, mut v): (Vec<f64>, Vec<f64>) = g.nodes().iter().map(|&x| soliton_uv(x, 0.0, &p)).unzip();
        let sys = build_dvd(&g).unwrap();
        let energy = |u: &[f64], v: &[f64]| default_density(4, u, v, g.dx(), true).unwrap().iter().sum::<f64>() * g.dx();
        let e0 = energy(&u, &v);
        for _ in 0..10 {
            (u, v) = step_dvd(&sys, &u, &v, 0.5, &NewtonOptions::default()).unwrap();
        }
        assert!((energy(&u, &v) - e0).abs() < 1e-12);
    }

    #[test]
    fn reconstructed_v_tracks_soliton() {
        let g = GridSpec1D::periodic_closed(-60.0, 60.0, 0.1).unwrap();
        let p = SolitonParams::benchmark();
        let dt = 0.01;
        let us: Vec<Vec<f64>> = (0..3)
            .map(|j| g.nodes().iter().map(|&x| soliton_uv(x, j as f64 * dt, &p).0).collect())
            .collect();
        let vs = reconstruct_v(&us, g.dx(), dt);
        assert_eq!(vs.len(), 3);
        assert_eq!(vs[0], vs[1]);
        // v sits half a step back in time.
        let exact: Vec<f64> = g.nodes().iter().map(|&x| soliton_uv(x, 1.5 * dt, &p).1).collect();
        let err = vs[2].iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 5e-3, "{err}");
    }

    #[test]
    fn default_densities() {
        let u = [1.0, -2.0, 0.5];
        let v = [0.0, 1.0, 2.0];
        assert_eq!(default_density(3, &u, &v, 0.1, false).unwrap(), vec![0.0, -2.0, 1.0]);
        assert!((default_density(4, &u, &v, 0.1, false).unwrap()[0] - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
        assert!(default_density(5, &u, &v, 0.1, false).is_err());
    }
}
