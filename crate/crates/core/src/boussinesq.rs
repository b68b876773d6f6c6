//! Conservative semidiscretisations of the Boussinesq system
//! `u_t = v_x`, `v_t = (u + u² - u_xx)_x` on a periodic grid.
//!
//! Each family is written in divergence form `D_m F̃ + D_t G̃ = 0` with `G̃`
//! linear in the unknowns, so the ODE is `M_u U' = -D_m F̃₁`,
//! `M_v V' = -D_m F̃₂` with stencil mass operators `M_u`, `M_v`.
//! The right-hand sides are assembled twice: once by operator algebra into a
//! [`QuadraticMap`] (used by the solvers, with exact Jacobians) and once by a
//! literal node-by-node transcription (used to cross-check the first).

use serde::{Deserialize, Serialize};

use crate::error::{GridError, SchemeError};
use crate::grid::GridSpec1D;
use crate::linalg::BandMatrix;
use crate::quadratic::{interleave, split, Operand, QuadraticMap};
use crate::stencil::{make_dm, make_dmc, make_mum, shift, StencilOperator};
use crate::time_integration::MassOde;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    MC2,
    EC2,
    MC4,
    EC4,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::MC2 => "MC2",
            Family::EC2 => "EC2",
            Family::MC4 => "MC4",
            Family::EC4 => "EC4",
        }
    }

    /// True for the energy-conserving families.
    pub fn is_energy(&self) -> bool {
        matches!(self, Family::EC2 | Family::EC4)
    }

    fn min_cells(&self) -> usize {
        match self {
            Family::MC2 | Family::EC2 => 4,
            Family::MC4 => 6,
            Family::EC4 => 7,
        }
    }
}

/// Free coefficients of a family. Benchmarks use the one-parameter
/// λ-families from [`BoussinesqParams::lambda`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoussinesqParams {
    pub family: Family,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub xi: f64,
    pub s: f64,
}

impl BoussinesqParams {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            xi: 0.0,
            s: 0.0,
        }
    }

    /// MC2: `γ = λΔx²`; EC2: `β = λΔx²`; MC4: `ξ = λΔx⁴`; EC4: `α = λΔx⁴`.
    pub fn lambda(family: Family, lambda: f64, dx: f64) -> Self {
        let mut p = Self::new(family);
        match family {
            Family::MC2 => p.gamma = lambda * dx * dx,
            Family::EC2 => p.beta = lambda * dx * dx,
            Family::MC4 => p.xi = lambda * dx.powi(4),
            Family::EC4 => p.alpha = lambda * dx.powi(4),
        }
        p
    }
}

/// Operators shared by every family on a grid of spacing `dx`.
struct Ops {
    dx: f64,
    id: StencilOperator,
    d: StencilOperator,
    mu: StencilOperator,
    /// `D_m² S⁻¹`, the centred second difference.
    l: StencilOperator,
    /// `D_m⁴ S⁻²`.
    q4: StencilOperator,
}

impl Ops {
    fn new(dx: f64) -> Self {
        let d = make_dm(dx);
        let l = &d * &d * shift(-1);
        let q4 = &l * &l;
        Self {
            dx,
            id: StencilOperator::identity(),
            d,
            mu: make_mum(),
            l,
            q4,
        }
    }

    fn s(&self, k: isize) -> StencilOperator {
        shift(k)
    }
}

/// Flux data of one family: `F̃₁ = a1·V`, `F̃₂ = b2·U + Σ outer[(left U)(right U)]`,
/// `G̃₁ = mass_u·U`, `G̃₂ = mass_v·V`.
struct FluxForm {
    a1: StencilOperator,
    b2: StencilOperator,
    products: Vec<(StencilOperator, StencilOperator, StencilOperator)>,
    mass_u: StencilOperator,
    mass_v: StencilOperator,
}

fn flux_form(p: &BoussinesqParams, o: &Ops) -> Result<FluxForm, SchemeError> {
    let dx2 = o.dx * o.dx;
    let (id, l, q4, mu) = (&o.id, &o.l, &o.q4, &o.mu);
    Ok(match p.family {
        Family::MC2 => {
            let s = p.s;
            if (3.0 - 5.0 * s).abs() < 1e-12 || (5.0 * s - 1.0).abs() < 1e-12 || (s + 1.0).abs() < 1e-12 {
                return Err(SchemeError::BadParameter(format!("s = {s} makes an MC2 coefficient singular")));
            }
            let a = (1.0 - s) * dx2 / (3.0 - 5.0 * s);
            let b = s * dx2 / (5.0 * s - 1.0);
            let k = s * dx2 / (s + 1.0) + p.xi * (3.0 * s - 1.0) * (1.0 - 2.0 * s);
            FluxForm {
                a1: -(id + p.alpha * l),
                b2: (1.0 + p.beta) * l - id.clone(),
                products: vec![
                    (-id, id + a * l, id + b * l),
                    (k * l, id.clone(), id.clone()),
                    (-k * id, &o.d * o.s(-1), o.d.clone()),
                ],
                mass_u: mu * (id + s * dx2 * l),
                mass_v: mu * (id + p.gamma * l),
            }
        }
        Family::EC2 => {
            let avg = mu * mu * o.s(-1);
            FluxForm {
                a1: -(id + p.alpha * l),
                b2: (1.0 + p.beta) * l - id.clone(),
                products: vec![(-id, avg.clone(), avg)],
                mass_u: mu.clone(),
                mass_v: mu * (id + p.gamma * l),
            }
        }
        Family::MC4 => {
            let mut products = vec![(-id, id.clone(), id.clone()), ((dx2 / 24.0) * l, id.clone(), id.clone())];
            products.extend(theta_products(o, [0.0, 0.0, 8.0 / 7.0, -3.0 / 8.0, 0.0, 0.0], 7.0 * dx2 * dx2 / 192.0));
            products.extend(theta_products(
                o,
                [-0.25, -3.0 / 8.0, -2.0, -3.0 / 16.0, -2.0, -1.0 / 16.0],
                -p.gamma / 2.0,
            ));
            FluxForm {
                a1: -(id - (dx2 / 24.0) * l + p.alpha * q4),
                b2: l - id + (dx2 / 24.0) * (l - 3.0 * q4) + p.beta * q4,
                products,
                mass_u: mu * (id - (dx2 / 8.0) * l),
                mass_v: mu * (id - (dx2 / 8.0) * l + p.xi * q4),
            }
        }
        Family::EC4 => {
            let (nu_p, nu_m) = nu(o);
            let sm1 = o.s(-1);
            let ps = &nu_p * &sm1;
            FluxForm {
                a1: -(mu * &sm1 * (&nu_m + p.alpha * q4)),
                b2: mu * &sm1 * (l - &nu_m + (p.beta - dx2 / 4.0) * q4),
                products: vec![
                    (-mu, ps.clone(), ps.clone()),
                    ((dx2 / 3.0) * mu, ps.clone(), l * &sm1 * &nu_p),
                    ((dx2 / 6.0) * (mu * &o.d * &o.d * o.s(-2)), nu_p.clone(), nu_p),
                ],
                mass_u: id.clone(),
                mass_v: id + p.gamma * q4,
            }
        }
    })
}

/// `ν± = I ± Δx²/6·D_m²S⁻¹`.
fn nu(o: &Ops) -> (StencilOperator, StencilOperator) {
    let c = o.dx * o.dx / 6.0;
    (&o.id + c * &o.l, &o.id - c * &o.l)
}

/// `scale·Θ(U; p)` as products, with `Φ(Z; p) = Z₋₁ + pΔx²D_m²Z₋₂` and
/// `Θ = D²Φ(p₁)·D²Φ(p₂) + p₃ SΦ(p₄)·D⁴Z₋₂ + p₅ DμΦ(p₆)·D³μZ₋₂`.
fn theta_products(o: &Ops, p: [f64; 6], scale: f64) -> Vec<(StencilOperator, StencilOperator, StencilOperator)> {
    let dx2 = o.dx * o.dx;
    let d = &o.d;
    let phi = |q: f64| o.s(-1) + q * dx2 * (d * d * o.s(-2));
    let d2 = d * d;
    let mut out = vec![(scale * &o.id, &d2 * phi(p[0]), &d2 * phi(p[1]))];
    if p[2] != 0.0 {
        out.push(((scale * p[2]) * &o.id, o.s(1) * phi(p[3]), &d2 * &d2 * o.s(-2)));
    }
    if p[4] != 0.0 {
        out.push(((scale * p[4]) * &o.id, d * &o.mu * phi(p[5]), &d2 * d * &o.mu * o.s(-2)));
    }
    out
}

/// One scheme family at fixed parameters on a periodic grid.
#[derive(Clone, Debug)]
pub struct SemidiscreteSystem {
    params: BoussinesqParams,
    grid: GridSpec1D,
    ops_dx: f64,
    flux_a1: StencilOperator,
    mass_u: StencilOperator,
    mass_v: StencilOperator,
    rhs: QuadraticMap,
    f2: QuadraticMap,
    mass: BandMatrix,
}

fn check_grid(family: Family, grid: &GridSpec1D) -> Result<(), SchemeError> {
    if !grid.is_periodic() {
        return Err(GridError::NotPeriodic.into());
    }
    if grid.len() < family.min_cells() {
        return Err(GridError::TooFewCells {
            n_cells: grid.len(),
            required: family.min_cells(),
        }
        .into());
    }
    Ok(())
}

fn build(params: BoussinesqParams, grid: &GridSpec1D, expected: Family) -> Result<SemidiscreteSystem, SchemeError> {
    if params.family != expected {
        return Err(SchemeError::WrongFamily {
            expected: expected.name().into(),
            got: params.family.name().into(),
        });
    }
    check_grid(expected, grid)?;
    let o = Ops::new(grid.dx());
    let ff = flux_form(&params, &o)?;
    let n = grid.len();
    let mut rhs = QuadraticMap::new(n, 2);
    rhs.linear(0, 1, -(&o.d * &ff.a1));
    rhs.linear(1, 0, -(&o.d * &ff.b2));
    let mut f2 = QuadraticMap::new(n, 1);
    f2.linear(0, 0, ff.b2.clone());
    for (outer, left, right) in &ff.products {
        rhs.product(1, -(&o.d * outer), Operand::new(0, left.clone()), Operand::new(0, right.clone()));
        f2.product(0, outer.clone(), Operand::new(0, left.clone()), Operand::new(0, right.clone()));
    }
    let mut mm = QuadraticMap::new(n, 2);
    mm.linear(0, 0, ff.mass_u.clone()).linear(1, 1, ff.mass_v.clone());
    let mass = mm.jacobian(&vec![0.0; 2 * n]);
    Ok(SemidiscreteSystem {
        params,
        grid: *grid,
        ops_dx: grid.dx(),
        flux_a1: ff.a1,
        mass_u: ff.mass_u,
        mass_v: ff.mass_v,
        rhs,
        f2,
        mass,
    })
}

pub fn build_mc2(params: BoussinesqParams, grid: &GridSpec1D) -> Result<SemidiscreteSystem, SchemeError> {
    if ![0.0, 1.0 / 3.0, 0.5].iter().any(|s| (params.s - s).abs() < 1e-12) {
        return Err(SchemeError::BadParameter(format!("MC2 needs s in {{0, 1/3, 1/2}}, got {}", params.s)));
    }
    build(params, grid, Family::MC2)
}

pub fn build_ec2(params: BoussinesqParams, grid: &GridSpec1D) -> Result<SemidiscreteSystem, SchemeError> {
    build(params, grid, Family::EC2)
}

pub fn build_mc4(params: BoussinesqParams, grid: &GridSpec1D) -> Result<SemidiscreteSystem, SchemeError> {
    build(params, grid, Family::MC4)
}

pub fn build_ec4(params: BoussinesqParams, grid: &GridSpec1D) -> Result<SemidiscreteSystem, SchemeError> {
    build(params, grid, Family::EC4)
}

/// Dispatches on `params.family`.
pub fn build_system(params: BoussinesqParams, grid: &GridSpec1D) -> Result<SemidiscreteSystem, SchemeError> {
    match params.family {
        Family::MC2 => build_mc2(params, grid),
        Family::EC2 => build_ec2(params, grid),
        Family::MC4 => build_mc4(params, grid),
        Family::EC4 => build_ec4(params, grid),
    }
}

fn mulv(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn sq(a: &[f64]) -> Vec<f64> {
    mulv(a, a)
}

fn lin(terms: &[(f64, &[f64])]) -> Vec<f64> {
    let n = terms[0].1.len();
    let mut out = vec![0.0; n];
    for (c, v) in terms {
        out.iter_mut().zip(v.iter()).for_each(|(o, x)| *o += c * x);
    }
    out
}

impl SemidiscreteSystem {
    pub fn params(&self) -> &BoussinesqParams {
        &self.params
    }

    pub fn family(&self) -> Family {
        self.params.family
    }

    pub fn grid(&self) -> &GridSpec1D {
        &self.grid
    }

    pub fn mass_u(&self) -> &StencilOperator {
        &self.mass_u
    }

    pub fn mass_v(&self) -> &StencilOperator {
        &self.mass_v
    }

    pub fn rhs_map(&self) -> &QuadraticMap {
        &self.rhs
    }

    /// `(r_u, r_v)` at state `(U, V)`.
    pub fn rhs(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let r = self.rhs.eval(&interleave(&[u, v]));
        let mut parts = split(&r, 2);
        let rv = parts.pop().expect("two components");
        (parts.pop().expect("two components"), rv)
    }

    /// `(F̃₁, F̃₂)` from the assembled operators.
    pub fn fluxes(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (self.flux_a1.apply_periodic(v), self.f2.eval(u))
    }

    /// `(F̃₁, F̃₂)` transcribed node by node from the family's defining formulas.
    pub fn fluxes_literal(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let dx = self.ops_dx;
        let dx2 = dx * dx;
        let p = &self.params;
        let sh = |k: isize, f: &[f64]| shift(k).apply_periodic(f);
        let d = |f: &[f64]| make_dm(dx).apply_periodic(f);
        let d2 = |f: &[f64]| d(&d(f));
        let d4 = |f: &[f64]| d2(&d2(f));
        let mu = |f: &[f64]| make_mum().apply_periodic(f);
        match p.family {
            Family::MC2 | Family::EC2 => {
                let f1 = lin(&[(-1.0, v), (-p.alpha, &d2(&sh(-1, v)))]);
                let um1 = sh(-1, u);
                let f2 = if p.family == Family::MC2 {
                    let s = p.s;
                    let a = (1.0 - s) * dx2 / (3.0 - 5.0 * s);
                    let b = s * dx2 / (5.0 * s - 1.0);
                    let k = s * dx2 / (s + 1.0) + p.xi * (3.0 * s - 1.0) * (1.0 - 2.0 * s);
                    let left = lin(&[(1.0, u), (a, &d2(&um1))]);
                    let right = lin(&[(1.0, u), (b, &d2(&um1))]);
                    let bracket = lin(&[(1.0, &d2(&sq(&um1))), (-1.0, &mulv(&d(&um1), &d(u)))]);
                    lin(&[((1.0 + p.beta), &d2(&um1)), (-1.0, u), (-1.0, &mulv(&left, &right)), (k, &bracket)])
                } else {
                    lin(&[((1.0 + p.beta), &d2(&um1)), (-1.0, u), (-1.0, &sq(&mu(&mu(&um1))))])
                };
                (f1, f2)
            }
            Family::MC4 => {
                let f1 = lin(&[(-1.0, v), (dx2 / 24.0, &d2(&sh(-1, v))), (-p.alpha, &d4(&sh(-2, v)))]);
                let um1 = sh(-1, u);
                let um2 = sh(-2, u);
                let inner = lin(&[(1.0, &um1), (1.0, &sq(&um1)), (-3.0, &d2(&um2))]);
                let f2 = lin(&[
                    (1.0, &d2(&um1)),
                    (-1.0, u),
                    (-1.0, &sq(u)),
                    (dx2 / 24.0, &d2(&inner)),
                    (p.beta, &d4(&um2)),
                    (
                        -p.gamma / 2.0,
                        &theta_literal(u, dx, [-0.25, -3.0 / 8.0, -2.0, -3.0 / 16.0, -2.0, -1.0 / 16.0]),
                    ),
                    (
                        7.0 * dx2 * dx2 / 192.0,
                        &theta_literal(u, dx, [0.0, 0.0, 8.0 / 7.0, -3.0 / 8.0, 0.0, 0.0]),
                    ),
                ]);
                (f1, f2)
            }
            Family::EC4 => {
                let nup = |f: &[f64]| lin(&[(1.0, f), (dx2 / 6.0, &d2(&sh(-1, f)))]);
                let num = |f: &[f64]| lin(&[(1.0, f), (-dx2 / 6.0, &d2(&sh(-1, f)))]);
                let f1hat = lin(&[(-1.0, &num(&sh(-1, v))), (-p.alpha, &d4(&sh(-3, v)))]);
                let a = nup(&sh(-1, u));
                let f2hat = lin(&[
                    (1.0, &d2(&sh(-2, u))),
                    (-1.0, &num(&sh(-1, u))),
                    (-1.0, &sq(&a)),
                    (p.beta - dx2 / 4.0, &d4(&sh(-3, u))),
                    (dx2 / 3.0, &mulv(&a, &d2(&nup(&sh(-2, u))))),
                    (dx2 / 6.0, &d2(&sq(&nup(&sh(-2, u))))),
                ]);
                (mu(&f1hat), mu(&f2hat))
            }
        }
    }

    /// `(G̃₁, G̃₂)` transcribed from the defining formulas.
    pub fn linear_densities_literal(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let dx = self.ops_dx;
        let dx2 = dx * dx;
        let p = &self.params;
        let sh = |k: isize, f: &[f64]| shift(k).apply_periodic(f);
        let d = |f: &[f64]| make_dm(dx).apply_periodic(f);
        let d2 = |f: &[f64]| d(&d(f));
        let d4 = |f: &[f64]| d2(&d2(f));
        let mu = |f: &[f64]| make_mum().apply_periodic(f);
        match p.family {
            Family::MC2 => (
                mu(&lin(&[(1.0, u), (p.s * dx2, &d2(&sh(-1, u)))])),
                mu(&lin(&[(1.0, v), (p.gamma, &d2(&sh(-1, v)))])),
            ),
            Family::EC2 => (mu(u), mu(&lin(&[(1.0, v), (p.gamma, &d2(&sh(-1, v)))]))),
            Family::MC4 => (
                mu(&lin(&[(1.0, u), (-dx2 / 8.0, &d2(&sh(-1, u)))])),
                mu(&lin(&[(1.0, v), (-dx2 / 8.0, &d2(&sh(-1, v))), (p.xi, &d4(&sh(-2, v)))])),
            ),
            Family::EC4 => (u.to_vec(), lin(&[(1.0, v), (p.gamma, &d4(&sh(-2, v)))])),
        }
    }

    /// Nodal density `G̃_which`. `G̃₃ = G̃₁G̃₂` exists for the momentum
    /// families and `G̃₄` (the discrete energy) for the energy families.
    pub fn density(&self, which: usize, u: &[f64], v: &[f64]) -> Result<Vec<f64>, SchemeError> {
        let g1 = || self.mass_u.apply_periodic(u);
        let g2 = || self.mass_v.apply_periodic(v);
        match (which, self.family().is_energy()) {
            (1, _) => Ok(g1()),
            (2, _) => Ok(g2()),
            (3, false) => Ok(mulv(&g1(), &g2())),
            (4, true) => Ok(self.energy_density(u, v)),
            _ => Err(SchemeError::UndefinedDensity(which)),
        }
    }

    /// `Δx · Σ_i G̃_which[i]`.
    pub fn global_invariant(&self, which: usize, u: &[f64], v: &[f64]) -> Result<f64, SchemeError> {
        Ok(self.ops_dx * self.density(which, u, v)?.iter().sum::<f64>())
    }

    fn energy_density(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let dx = self.ops_dx;
        let dx2 = dx * dx;
        let p = &self.params;
        let sh = |k: isize, f: &[f64]| shift(k).apply_periodic(f);
        let d = |f: &[f64]| make_dm(dx).apply_periodic(f);
        let d2 = |f: &[f64]| d(&d(f));
        let d4 = |f: &[f64]| d2(&d2(f));
        let mu = |f: &[f64]| make_mum().apply_periodic(f);
        let dc = |f: &[f64]| make_dmc(dx).apply_periodic(f);
        if p.family == Family::EC2 {
            let mu_u = mu(u);
            let va = mu(&lin(&[(1.0, v), (p.alpha, &d2(&sh(-1, v)))]));
            let vg = mu(&lin(&[(1.0, v), (p.gamma, &d2(&sh(-1, v)))]));
            let cube = mulv(&mu_u, &mu(&sq(&mu(&mu(&sh(-1, u))))));
            return lin(&[
                (0.5, &sq(&mu_u)),
                (0.5 * (1.0 + p.beta), &mu(&sq(&dc(u)))),
                (0.5, &mulv(&va, &vg)),
                (1.0 / 3.0, &cube),
            ]);
        }
        let nup = |f: &[f64]| lin(&[(1.0, f), (dx2 / 6.0, &d2(&sh(-1, f)))]);
        let num = |f: &[f64]| lin(&[(1.0, f), (-dx2 / 6.0, &d2(&sh(-1, f)))]);
        let vpart = mulv(
            &lin(&[(1.0, v), (p.gamma, &d4(&sh(-2, v)))]),
            &nup(&lin(&[(1.0, &num(v)), (p.alpha, &d4(&sh(-2, v)))])),
        );
        let um1 = sh(-1, u);
        let grad = mu(&mulv(&d(&um1), &d(&nup(&lin(&[(1.0, &um1), (-dx2 / 4.0, &d2(&sh(-2, u)))])))));
        let upart = mulv(u, &nup(&lin(&[(1.0, &num(u)), (-p.beta, &d4(&sh(-2, u)))])));
        let w0 = nup(u);
        let wm1 = nup(&um1);
        let cubic_inner = lin(&[(1.0, &sq(&w0)), (-dx2 / 3.0, &mulv(&w0, &d2(&wm1))), (-dx2 / 6.0, &d2(&sq(&wm1)))]);
        let cubic = mulv(u, &nup(&cubic_inner));
        lin(&[(0.5, &vpart), (0.5, &grad), (0.5, &upart), (1.0 / 3.0, &cubic)])
    }

    /// Variables the Hamiltonian is differentiated against:
    /// `(μ_m U, μ_m V)` for EC2 and `(U, V)` for EC4.
    pub fn hamiltonian_variables(&self, u: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>), SchemeError> {
        match self.family() {
            Family::EC2 => Ok((make_mum().apply_periodic(u), make_mum().apply_periodic(v))),
            Family::EC4 => Ok((u.to_vec(), v.to_vec())),
            _ => Err(SchemeError::UndefinedDensity(4)),
        }
    }

    /// `Δx · ΣH̃` written directly in the Hamiltonian variables `(W, Z)`.
    pub fn hamiltonian_total(&self, w: &[f64], z: &[f64]) -> Result<f64, SchemeError> {
        let o = Ops::new(self.ops_dx);
        let p = &self.params;
        let dens = match self.family() {
            Family::EC2 => {
                let dw = (&o.d * o.s(-1)).apply_periodic(w);
                let c = (&o.mu * o.s(-1)).apply_periodic(w);
                let za = (&o.id + p.alpha * &o.l).apply_periodic(z);
                let zg = (&o.id + p.gamma * &o.l).apply_periodic(z);
                lin(&[
                    (0.5, &sq(w)),
                    (0.5 * (1.0 + p.beta), &o.mu.apply_periodic(&sq(&dw))),
                    (0.5, &mulv(&za, &zg)),
                    (1.0 / 3.0, &mulv(w, &o.mu.apply_periodic(&sq(&c)))),
                ])
            }
            Family::EC4 => self.energy_density(w, z),
            _ => return Err(SchemeError::UndefinedDensity(4)),
        };
        Ok(self.ops_dx * dens.iter().sum::<f64>())
    }

    /// Analytic gradient of `ΣH̃` (without the `Δx` weight) with respect to
    /// the Hamiltonian variables `(W, Z)`.
    pub fn hamiltonian_gradient(&self, w: &[f64], z: &[f64]) -> Result<(Vec<f64>, Vec<f64>), SchemeError> {
        let o = Ops::new(self.ops_dx);
        let p = &self.params;
        let dx2 = o.dx * o.dx;
        match self.family() {
            Family::EC2 => {
                let c = o.mu.apply_periodic(w);
                let gw = lin(&[
                    (1.0, w),
                    (-(1.0 + p.beta), &o.l.apply_periodic(w)),
                    (1.0, &(&o.mu * o.s(-1)).apply_periodic(&sq(&c))),
                ]);
                let gz = ((&o.id + p.alpha * &o.l) * (&o.id + p.gamma * &o.l)).apply_periodic(z);
                Ok((gw, gz))
            }
            Family::EC4 => {
                let (nu_p, nu_m) = nu(&o);
                let lin_u = -(&o.l * &nu_p * (&o.id - (dx2 / 4.0) * &o.l)) + &nu_p * (&nu_m - p.beta * &o.q4);
                let wv = nu_p.apply_periodic(w);
                let lw = o.l.apply_periodic(&wv);
                let inner = lin(&[
                    (1.0, &sq(&wv)),
                    (-dx2 / 3.0, &mulv(&wv, &lw)),
                    (-dx2 / 6.0, &o.l.apply_periodic(&sq(&wv))),
                ]);
                let gw = lin(&[(1.0, &lin_u.apply_periodic(w)), (1.0, &nu_p.apply_periodic(&inner))]);
                let gz = ((&o.id + p.gamma * &o.q4) * &nu_p * (&nu_m + p.alpha * &o.q4)).apply_periodic(z);
                Ok((gw, gz))
            }
            _ => Err(SchemeError::UndefinedDensity(4)),
        }
    }

    /// Operators `(R, M)` with `D̃_x = R M⁻¹` in the Hamiltonian form
    /// `D_t(W, Z) = (D̃_x δ_Z, D̃_x δ_W)`.
    pub fn structure_operators(&self) -> Result<(StencilOperator, StencilOperator), SchemeError> {
        let o = Ops::new(self.ops_dx);
        match self.family() {
            Family::EC2 => Ok((o.d.clone(), self.mass_v.clone())),
            Family::EC4 => {
                let (nu_p, _) = nu(&o);
                Ok((&o.d * &o.mu, o.s(1) * &nu_p * (&o.id + self.params.gamma * &o.q4)))
            }
            _ => Err(SchemeError::UndefinedDensity(4)),
        }
    }
}

impl MassOde for SemidiscreteSystem {
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
        let id = StencilOperator::identity();
        self.mass_u == id && self.mass_v == id
    }

    fn g(&self, u: &[f64], _t: f64) -> Vec<f64> {
        self.rhs.eval(u)
    }

    fn jacobian_g(&self, u: &[f64], _t: f64) -> BandMatrix {
        self.rhs.jacobian(u)
    }

    fn degree(&self) -> Option<usize> {
        Some(self.rhs.degree())
    }
}

/// `Θ(Z; p)` evaluated node by node.
fn theta_literal(z: &[f64], dx: f64, p: [f64; 6]) -> Vec<f64> {
    let dx2 = dx * dx;
    let sh = |k: isize, f: &[f64]| shift(k).apply_periodic(f);
    let d = |f: &[f64]| make_dm(dx).apply_periodic(f);
    let d2 = |f: &[f64]| d(&d(f));
    let mu = |f: &[f64]| make_mum().apply_periodic(f);
    let phi = |q: f64| lin(&[(1.0, &sh(-1, z)), (q * dx2, &d2(&sh(-2, z)))]);
    let zm2 = sh(-2, z);
    lin(&[
        (1.0, &mulv(&d2(&phi(p[0])), &d2(&phi(p[1])))),
        (p[2], &mulv(&sh(1, &phi(p[3])), &d2(&d2(&zm2)))),
        (p[4], &mulv(&d(&mu(&phi(p[5]))), &d2(&d(&mu(&zm2))))),
    ])
}
