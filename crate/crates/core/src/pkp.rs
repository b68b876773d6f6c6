//! Conservative schemes for the potential KP equation
//! `u_xt + 3/2 u_x u_xx + 1/4 u_xxxx + 3/4 u_yy = 0`.
//!
//! Both families have the divergence form `D_m F̃₁ + D_n G̃₁ + D_t H̃₁ = 0`
//! with `H̃₁ = (I + αD_m²S_m⁻¹)D_m^c U`, and are advanced by implicit midpoint.
//! Fields are stored on the full 2D grid with `x` fastest. On Dirichlet grids
//! the outer [`GHOST_X`] columns and [`GHOST_Y`] rows are ghost data supplied
//! by the caller; the remaining nodes are the unknowns. [`ghosted_grid`] builds
//! such a grid around a physical domain so that every domain node is unknown.

use serde::{Deserialize, Serialize};

use crate::error::{GridError, SchemeError, SolveError};
use crate::grid::{GridSpec1D, GridSpec2D};
use crate::linalg::BandMatrix;
use crate::stencil::{make_dm, make_dmc, make_mum, shift, StencilOperator};
use crate::time_integration::{newton_solve, NewtonOptions, NewtonReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PkpFamily {
    MC1,
    MC2,
}

/// Ghost columns on each side in `x`.
pub const GHOST_X: usize = 2;
/// Ghost rows on each side in `y`.
pub const GHOST_Y: usize = 1;

/// Time level of the ghost values inside the averaged state `ū`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum GhostTiming {
    /// Mean of the ghost data at `t` and `t + dt`, matching how `ū` is formed
    /// at the unknowns.
    #[default]
    Average,
    /// Ghost data evaluated at `t + dt/2`. The mismatch with the interior
    /// average is `O(dt²)` but is amplified by the fourth difference in `F̃₁`.
    Midpoint,
}

/// Grid covering `[xa, xb] × [ya, yb]` plus the ghost bands, so that the
/// unknowns are exactly the domain nodes.
pub fn ghosted_grid(x: (f64, f64), y: (f64, f64), dx: f64, dy: f64) -> Result<GridSpec2D, GridError> {
    let axis = |(a, b): (f64, f64), h: f64, g: usize| -> Result<GridSpec1D, GridError> {
        if !(h > 0.0) || ((b - a) / h - ((b - a) / h).round()).abs() > 1e-9 {
            return Err(GridError::BadSpacing(h));
        }
        if !(b > a) {
            return Err(GridError::BadInterval { a, b });
        }
        let cells = ((b - a) / h).round() as usize;
        let e = g as f64 * h;
        GridSpec1D::prescribed(a - e, b + e, cells + 2 * g)
    };
    Ok(GridSpec2D::new(axis(x, dx, GHOST_X)?, axis(y, dy, GHOST_Y)?))
}

/// One product term `c · (A U)(B U)` of `F̃₁`, with `A`, `B` acting along `x`.
type Product = (f64, StencilOperator, StencilOperator);

#[derive(Clone, Debug)]
pub struct PkpSystem {
    family: PkpFamily,
    alpha: f64,
    grid: GridSpec2D,
    periodic: bool,
    /// `H̃₁ = mass_x U`.
    mass_x: StencilOperator,
    products: Vec<Product>,
    /// Linear part of `F̃₁`.
    linear_x: StencilOperator,
}

pub fn build_pkp(family: PkpFamily, alpha: f64, grid: &GridSpec2D) -> Result<PkpSystem, SchemeError> {
    let periodic = match (grid.x_grid.is_periodic(), grid.y_grid.is_periodic()) {
        (true, true) => true,
        (false, false) => false,
        _ => return Err(SchemeError::BadParameter("both directions must share one boundary type".into())),
    };
    let (min_x, min_y) = if periodic { (5, 3) } else { (2 * GHOST_X + 2, 2 * GHOST_Y + 1) };
    if grid.nx() < min_x {
        return Err(GridError::TooFewCells {
            n_cells: grid.nx(),
            required: min_x,
        }
        .into());
    }
    if grid.ny() < min_y {
        return Err(GridError::TooFewCells {
            n_cells: grid.ny(),
            required: min_y,
        }
        .into());
    }
    let dx = grid.x_grid.dx();
    let (d, dc) = (make_dm(dx), make_dmc(dx));
    let id = StencilOperator::identity();
    let mass_x = (&id + alpha * (&d * &d * shift(-1))) * &dc;
    let dcs = &dc * shift(-1);
    let products = match family {
        PkpFamily::MC1 => vec![(0.75, dcs, dc)],
        PkpFamily::MC2 => vec![(1.0, dcs, dc), (-0.25, &d * shift(-1), &d * shift(-1))],
    };
    let linear_x = 0.25 * (&d * &d * &d * shift(-2));
    Ok(PkpSystem {
        family,
        alpha,
        grid: *grid,
        periodic,
        mass_x,
        products,
        linear_x,
    })
}

/// Row-wise and column-wise periodic stencil helpers on a full 2D field.
struct Plane {
    nx: usize,
    ny: usize,
}

impl Plane {
    fn x(&self, op: &StencilOperator, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        for (row, o) in f.chunks(self.nx).zip(out.chunks_mut(self.nx)) {
            op.apply_periodic_into(row, o);
        }
        out
    }

    fn y(&self, op: &StencilOperator, f: &[f64]) -> Vec<f64> {
        let ny = self.ny as isize;
        let mut out = vec![0.0; f.len()];
        for n in 0..self.ny {
            for &(o, c) in op.taps() {
                let src = (n as isize + o).rem_euclid(ny) as usize;
                for m in 0..self.nx {
                    out[n * self.nx + m] += c * f[src * self.nx + m];
                }
            }
        }
        out
    }
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn lin(terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = vec![0.0; terms[0].1.len()];
    for (c, v) in terms {
        out.iter_mut().zip(v.iter()).for_each(|(o, x)| *o += c * x);
    }
    out
}

impl PkpSystem {
    pub fn family(&self) -> PkpFamily {
        self.family
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grid(&self) -> &GridSpec2D {
        &self.grid
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    fn plane(&self) -> Plane {
        Plane {
            nx: self.grid.nx(),
            ny: self.grid.ny(),
        }
    }

    fn dx(&self) -> f64 {
        self.grid.x_grid.dx()
    }

    fn dy(&self) -> f64 {
        self.grid.y_grid.dx()
    }

    /// Index ranges `(m range, n range)` of the unknowns.
    pub fn interior(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        if self.periodic {
            (0..self.grid.nx(), 0..self.grid.ny())
        } else {
            (GHOST_X..self.grid.nx() - GHOST_X, GHOST_Y..self.grid.ny() - GHOST_Y)
        }
    }

    pub fn n_unknowns(&self) -> usize {
        let (mr, nr) = self.interior();
        mr.len() * nr.len()
    }

    /// Values at the unknowns, in `x`-fastest order.
    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        let (mr, nr) = self.interior();
        let nx = self.grid.nx();
        nr.flat_map(|n| mr.clone().map(move |m| full[n * nx + m])).collect()
    }

    fn scatter(&self, z: &[f64], full: &mut [f64]) {
        let (mr, nr) = self.interior();
        let nx = self.grid.nx();
        let mut k = 0;
        for n in nr {
            for m in mr.clone() {
                full[n * nx + m] = z[k];
                k += 1;
            }
        }
    }

    /// `F̃₁` at every node (periodic wrap; only interior values are meaningful
    /// on Dirichlet grids).
    pub fn f1(&self, u: &[f64]) -> Vec<f64> {
        let p = self.plane();
        let mut out = p.x(&self.linear_x, u);
        for (c, a, b) in &self.products {
            let prod = mul(&p.x(a, u), &p.x(b, u));
            out.iter_mut().zip(&prod).for_each(|(o, v)| *o += c * v);
        }
        out
    }

    /// `G̃₁ = 3/4 D_n U_{0,-1}`.
    pub fn g1(&self, u: &[f64]) -> Vec<f64> {
        self.plane().y(&(0.75 * (make_dm(self.dy()) * shift(-1))), u)
    }

    /// `H̃₁ = (I + αD_m²S_m⁻¹)D_m^c U`.
    pub fn h1(&self, u: &[f64]) -> Vec<f64> {
        self.plane().x(&self.mass_x, u)
    }

    /// `D_m F̃₁ + D_n G̃₁` at every node.
    pub fn flux_divergence(&self, u: &[f64]) -> Vec<f64> {
        let p = self.plane();
        let a = p.x(&make_dm(self.dx()), &self.f1(u));
        let b = p.y(&make_dm(self.dy()), &self.g1(u));
        lin(&[(1.0, &a), (1.0, &b)])
    }

    /// Residual `H̃₁(u₁ - u₀)/dt + D_mF̃₁(ū) + D_nG̃₁(ū)` on the full grid.
    pub fn residual_full(&self, u0: &[f64], u1: &[f64], ubar: &[f64], dt: f64) -> Vec<f64> {
        let du: Vec<f64> = u1.iter().zip(u0).map(|(a, b)| (a - b) / dt).collect();
        lin(&[(1.0, &self.h1(&du)), (1.0, &self.flux_divergence(ubar))])
    }

    /// Newton matrix `∂R/∂u₁` over the unknowns at averaged state `ubar`.
    fn newton_matrix(&self, ubar: &[f64], dt: f64) -> BandMatrix {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let (mr, nr) = self.interior();
        let (w, n_unk) = (mr.len(), self.n_unknowns());
        let p = self.plane();
        let (dx, dy) = (self.dx(), self.dy());
        let dm = make_dm(dx);
        let evaluated: Vec<(f64, &StencilOperator, Vec<f64>, &StencilOperator, Vec<f64>)> =
            self.products.iter().map(|(c, a, b)| (*c, a, p.x(a, ubar), b, p.x(b, ubar))).collect();
        let lin_x = (1.0 / dt) * &self.mass_x + 0.5 * (&dm * &self.linear_x);
        let mut jac = if self.periodic {
            BandMatrix::zeros(n_unk, n_unk - 1, n_unk - 1, false)
        } else {
            BandMatrix::zeros(n_unk, w + 2, w + 2, false)
        };
        let col_of = |m: isize, n: isize| -> Option<usize> {
            if self.periodic {
                let (m, n) = (m.rem_euclid(nx as isize) as usize, n.rem_euclid(ny as isize) as usize);
                Some(n * nx + m)
            } else if mr.contains(&(m as usize)) && m >= 0 && n >= 0 && nr.contains(&(n as usize)) {
                Some((n as usize - nr.start) * w + (m as usize - mr.start))
            } else {
                None
            }
        };
        let wrap_x = |m: isize| m.rem_euclid(nx as isize) as usize;
        let cy = 0.5 * 0.75 / (dy * dy);
        for (row, (n, m)) in nr.clone().flat_map(|n| mr.clone().map(move |m| (n, m))).enumerate() {
            if self.periodic && row == n_unk - 1 {
                (0..n_unk).for_each(|col| jac.add(row, col, 1.0).expect("dense row"));
                continue;
            }
            let (mi, ni) = (m as isize, n as isize);
            let mut put = |dm_: isize, dn_: isize, v: f64| {
                if let Some(col) = col_of(mi + dm_, ni + dn_) {
                    jac.add(row, col, v).expect("pKP Jacobian band");
                }
            };
            for &(o, c) in lin_x.taps() {
                put(o, 0, c);
            }
            for (o, c) in [(-1, cy), (0, -2.0 * cy), (1, cy)] {
                put(0, o, c);
            }
            for &(po, pw) in dm.taps() {
                let k = wrap_x(mi + po);
                for (c, a, av, b, bv) in &evaluated {
                    let f = 0.5 * pw * c;
                    for &(ao, aw) in a.taps() {
                        put(po + ao, 0, f * aw * bv[n * nx + k]);
                    }
                    for &(bo, bw) in b.taps() {
                        put(po + bo, 0, f * bw * av[n * nx + k]);
                    }
                }
            }
        }
        jac
    }

    /// Largest `|u - exact|` over the unknowns.
    pub fn max_abs_error(&self, u: &[f64], exact: &[f64]) -> f64 {
        let d: Vec<f64> = u.iter().zip(exact).map(|(a, b)| a - b).collect();
        self.gather(&d).iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Sets the boundary nodes of `full` from `boundary(x, y)`.
    pub fn fill_boundary(&self, full: &mut [f64], boundary: impl Fn(f64, f64) -> f64) {
        if self.periodic {
            return;
        }
        let (mr, nr) = self.interior();
        let nx = self.grid.nx();
        for n in 0..self.grid.ny() {
            for m in 0..nx {
                if !(mr.contains(&m) && nr.contains(&n)) {
                    full[n * nx + m] = boundary(self.grid.x_grid.x(m), self.grid.y_grid.x(n));
                }
            }
        }
    }

    /// Samples `f(x, y)` on every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let nx = self.grid.nx();
        (0..self.grid.len())
            .map(|k| f(self.grid.x_grid.x(k % nx), self.grid.y_grid.x(k / nx)))
            .collect()
    }
}

/// Advances the full field `u0` from `t` to `t + dt`. `boundary(x, y, t)`
/// supplies Dirichlet data (ignored on periodic grids, where the mean of `u`
/// is held fixed instead).
#[allow(clippy::too_many_arguments)]
pub fn pkp_step_midpoint(
    sys: &PkpSystem,
    u0: &[f64],
    t: f64,
    dt: f64,
    boundary: &dyn Fn(f64, f64, f64) -> f64,
    timing: GhostTiming,
    guess: Option<&[f64]>,
    opts: &NewtonOptions,
) -> Result<(Vec<f64>, NewtonReport), SolveError> {
    let mut u1 = u0.to_vec();
    sys.fill_boundary(&mut u1, |x, y| boundary(x, y, t + dt));
    let mut bar_bc = vec![0.0; u0.len()];
    match timing {
        GhostTiming::Midpoint => sys.fill_boundary(&mut bar_bc, |x, y| boundary(x, y, t + 0.5 * dt)),
        GhostTiming::Average => bar_bc.iter_mut().zip(u0.iter().zip(&u1)).for_each(|(b, (a, c))| *b = 0.5 * (a + c)),
    }
    let (mr, nr) = sys.interior();
    let nx = sys.grid.nx();
    let average = |u1: &[f64]| -> Vec<f64> {
        let mut bar = bar_bc.clone();
        for n in nr.clone() {
            for m in mr.clone() {
                bar[n * nx + m] = 0.5 * (u0[n * nx + m] + u1[n * nx + m]);
            }
        }
        bar
    };
    let z_start = sys.gather(u0);
    let z0 = guess.map_or_else(|| z_start.clone(), |g| sys.gather(g));
    let full_of = |z: &[f64]| {
        let mut f = u1.clone();
        sys.scatter(z, &mut f);
        f
    };
    let (z, report) = newton_solve(
        |z| {
            let f = full_of(z);
            let mut r = sys.gather(&sys.residual_full(u0, &f, &average(&f), dt));
            if sys.periodic {
                // The residuals sum to zero identically; the spare equation
                // fixes the otherwise free mean of u.
                *r.last_mut().expect("nonempty") = z.iter().zip(&z_start).map(|(a, b)| a - b).sum();
            }
            r
        },
        |z| sys.newton_matrix(&average(&full_of(z)), dt),
        z0,
        opts,
    )?;
    Ok((full_of(&z), report))
}

/// Second conservation law components `(F̃₂, G̃₂, H̃₂)` at every node, given
/// `U` and its time derivative `W = D_t U`.
pub fn cl2_components(sys: &PkpSystem, u: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let p = sys.plane();
    let (dx, dy, al) = (sys.dx(), sys.dy(), sys.alpha);
    let sx = |k: isize, f: &[f64]| p.x(&shift(k), f);
    let sy = |k: isize, f: &[f64]| p.y(&shift(k), f);
    let dm = |f: &[f64]| p.x(&make_dm(dx), f);
    let mum = |f: &[f64]| p.x(&make_mum(), f);
    let dc = |f: &[f64]| p.x(&make_dmc(dx), f);
    let dn = |f: &[f64]| p.y(&make_dm(dy), f);
    let mun = |f: &[f64]| p.y(&make_mum(), f);
    let d2 = |f: &[f64]| dm(&dm(f));
    let d3 = |f: &[f64]| dm(&d2(f));
    let (um1, um2, up1) = (sx(-1, u), sx(-2, u), sx(1, u));
    let wm1 = sx(-1, w);
    let u0m1 = sy(-1, u);
    let (cl, wave_terms) = match sys.family {
        PkpFamily::MC1 => (al / 2.0 - dx * dx / 6.0, 1.0),
        PkpFamily::MC2 => (al / 2.0 - dx * dx / 4.0, 0.0),
    };
    let commutator = lin(&[
        (1.0, &mul(&dc(&mum(&um1)), &dm(&dc(&wm1)))),
        (-1.0, &mul(&dm(&dc(&um1)), &dc(&mum(&wm1)))),
    ]);
    let ynn = |f: &[f64]| dn(&dn(f));
    let cross = mum(&lin(&[(1.0, &mul(&um2, &ynn(&u0m1))), (1.0, &mul(u, &ynn(&sy(-1, &um2))))]));
    let (f2, g2, h2) = if wave_terms == 1.0 {
        let f2 = lin(&[
            (cl, &commutator),
            (0.5, &mul(&mul(&dc(&mum(&um1)), &dc(&um1)), &dc(u))),
            (1.0 / 12.0, &mul(&d3(&um2), &dm(&lin(&[(1.0, &um2), (1.0, &um1), (1.0, u)])))),
            (
                -1.0 / 24.0,
                &lin(&[
                    (1.0, &mul(&d2(&um2), &d2(&um2))),
                    (1.0, &mul(&d2(&um2), &d2(&um1))),
                    (1.0, &mul(&d2(&um1), &d2(&um1))),
                ]),
            ),
            (1.0 / 8.0, &cross),
            (1.0 / 16.0, &lin(&[(1.0, &mul(&um1, &ynn(&u0m1))), (1.0, &mul(u, &ynn(&sy(-1, &um1))))])),
        ]);
        let s = lin(&[(1.0, &sy(-1, &um1)), (1.0, &u0m1), (1.0, &sy(-1, &up1))]);
        let g2 = lin(&[
            (1.0 / 8.0, &mul(&dn(&u0m1), &dc(&mun(&s)))),
            (-1.0 / 8.0, &mul(&mun(&u0m1), &dc(&dn(&s)))),
        ]);
        let h2 = lin(&[
            (0.5, &mul(&dc(u), &dc(u))),
            (
                1.0,
                &mul(
                    &lin(&[(al / 6.0, &dc(&lin(&[(1.0, &um1), (1.0, &up1)]))), ((al + dx * dx) / 6.0, &dc(u))]),
                    &d2(&dc(&um1)),
                ),
            ),
        ]);
        (f2, g2, h2)
    } else {
        let f2 = lin(&[
            (cl, &commutator),
            (0.25, &mul(&mul(&dc(&um1), &dc(u)), &dm(&lin(&[(1.0, &um2), (1.0, u)])))),
            (1.0 / 8.0, &mul(&d3(&um2), &dm(&lin(&[(1.0, &um2), (1.0, u)])))),
            (-1.0 / 16.0, &lin(&[(1.0, &mul(&d2(&um2), &d2(&um2))), (1.0, &mul(&d2(&um1), &d2(&um1)))])),
            (3.0 / 16.0, &cross),
        ]);
        let s = lin(&[(1.0, &sy(-1, &um1)), (1.0, &sy(-1, &up1))]);
        let g2 = lin(&[
            (3.0 / 16.0, &mul(&dn(&u0m1), &dc(&mun(&s)))),
            (-3.0 / 16.0, &mul(&mun(&u0m1), &dc(&dn(&s)))),
        ]);
        let h2 = lin(&[
            (0.5, &mul(&dc(u), &dc(u))),
            (
                1.0,
                &mul(
                    &lin(&[(al / 4.0, &dc(&lin(&[(1.0, &um1), (1.0, &up1)]))), (dx * dx / 4.0, &dc(u))]),
                    &d2(&dc(&um1)),
                ),
            ),
        ]);
        (f2, g2, h2)
    };
    (f2, g2, h2)
}

/// `(ΔxΔy ΣH̃₁, ΔxΔy ΣH̃₂)` over the unknown nodes.
pub fn pkp_monitors(sys: &PkpSystem, u: &[f64]) -> (f64, f64) {
    let h1 = sys.h1(u);
    let (_, _, h2) = cl2_components(sys, u, &vec![0.0; u.len()]);
    let w = sys.dx() * sys.dy();
    (w * sys.gather(&h1).iter().sum::<f64>(), w * sys.gather(&h2).iter().sum::<f64>())
}
