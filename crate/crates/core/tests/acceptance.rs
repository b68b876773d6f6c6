//! Acceptance criteria: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use conserve::boussinesq::{build_system, BoussinesqParams, Family};
use conserve::diagnostics::RunReport;
use conserve::exact::{pkp_wave, soliton_uv, SolitonParams};
use conserve::experiments::{cmd_convergence, cmd_pkp, cmd_table, SchemeId, CONVERGENCE_STEPS};
use conserve::grid::GridSpec1D;
use conserve::linalg::BandMatrix;
use conserve::pkp::{build_pkp, ghosted_grid, PkpFamily};
use conserve::stencil::{assemble_matrix, StencilOperator};
use conserve::time_integration::{Integrator, MassOde, NewtonOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    failures: Vec<String>,
    summary: String,
}

impl Outcome {
    fn new() -> Self {
        Self {
            failures: Vec::new(),
            summary: String::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Reference values per row: `[Err1, Err2, Err3, Err4, sol_err]`.
type ReferenceRow = (&'static str, [f64; 5]);

const SINGLE_SOLITON: [ReferenceRow; 12] = [
    ("MC2(0)", [6.22e-15, 6.22e-15, 1.22e-15, 7.90e-04, 0.0293]),
    ("MC2(-0.21)", [5.33e-15, 1.33e-15, 1.22e-15, 3.77e-04, 0.0059]),
    ("EC2(0)", [4.44e-15, 4.00e-15, 1.08e-05, 6.66e-16, 0.0415]),
    ("EC2(-0.20)", [3.55e-15, 3.55e-15, 2.63e-06, 1.22e-15, 0.0062]),
    ("PS", [5.88e-16, 0.0194, 5.79e-04, 0.0013, 0.0238]),
    ("MP", [5.77e-15, 4.89e-15, 2.77e-04, 0.0030, 0.0706]),
    ("DVD", [5.77e-15, 4.00e-15, 0.0053, 3.44e-15, 0.0740]),
    ("MC4(0)", [5.77e-15, 5.77e-15, 2.00e-15, 3.18e-05, 7.84e-04]),
    ("MC4(0.06)", [5.77e-15, 9.33e-15, 2.89e-15, 8.50e-06, 1.23e-04]),
    ("EC4(0)", [6.66e-15, 1.36e-11, 4.02e-08, 5.03e-14, 4.12e-04]),
    ("EC4(0.03)", [6.21e-15, 1.57e-12, 1.47e-08, 5.57e-14, 1.94e-04]),
    ("FD4", [9.97e-12, 0.0036, 1.07e-04, 2.84e-04, 0.0038]),
];

const TWO_SOLITONS: [ReferenceRow; 12] = [
    ("MC2(0)", [1.69e-14, 7.83e-15, 1.62e-15, 0.0461, 0.0257]),
    ("MC2(-0.19)", [1.60e-14, 9.44e-16, 9.58e-16, 0.0479, 0.0061]),
    ("EC2(0)", [1.33e-14, 3.80e-15, 7.32e-05, 1.44e-15, 0.0362]),
    ("EC2(-0.18)", [1.60e-14, 4.86e-15, 7.88e-05, 1.55e-15, 0.0057]),
    ("PS", [3.11e-16, 3.44e-05, 2.84e-04, 0.0519, 0.0176]),
    ("MP", [1.07e-14, 3.66e-15, 1.55e-04, 0.0532, 0.0676]),
    ("DVD", [1.07e-14, 3.72e-15, 0.0300, 1.44e-15, 0.0422]),
    ("MC4(0)", [1.33e-14, 4.55e-15, 1.71e-15, 0.0494, 5.08e-04]),
    ("MC4(0.06)", [1.42e-14, 4.02e-15, 1.86e-15, 0.0495, 1.12e-04]),
    ("EC4(0)", [1.15e-14, 3.16e-15, 3.91e-07, 1.21e-14, 3.20e-04]),
    ("EC4(0.02)", [1.15e-14, 6.16e-15, 3.89e-07, 1.25e-14, 2.56e-04]),
    ("FD4", [2.98e-12, 4.10e-04, 4.23e-05, 0.0522, 0.0040]),
];

/// Columns (0-based Err index) each scheme conserves exactly.
fn conserved(scheme: &str) -> &'static [usize] {
    match scheme {
        "MC2" | "MC4" => &[0, 1, 2],
        "EC2" | "EC4" | "DVD" => &[0, 1, 3],
        "MP" => &[0, 1],
        _ => &[0],
    }
}

fn check_table(which: u8, reference: &[ReferenceRow; 12], budget: Duration) -> Outcome {
    let mut out = Outcome::new();
    let start = Instant::now();
    let reports: Vec<RunReport> = match cmd_table(which, None) {
        Ok(r) => r,
        Err(e) => {
            out.failures.push(e.to_string());
            return out;
        }
    };
    let elapsed = start.elapsed();
    for (r, (label, p)) in reports.iter().zip(reference) {
        let keep = conserved(&r.scheme);
        for (k, (&got, &want)) in r.errs().iter().zip(p).enumerate() {
            if keep.contains(&k) {
                out.check(got <= 1e-10, || format!("{label} Err{} = {got:.3e} > 1e-10", k + 1));
            } else {
                out.check(rel(got, want) <= 0.25, || {
                    format!("{label} Err{} = {got:.3e} vs {want:.3e} ({:+.1}%)", k + 1, 100.0 * (got / want - 1.0))
                });
            }
        }
        out.check(rel(r.sol_err, p[4]) <= 0.02, || {
            format!(
                "{label} sol_err = {:.4e} vs {:.4e} ({:+.1}%)",
                r.sol_err,
                p[4],
                100.0 * (r.sol_err / p[4] - 1.0)
            )
        });
    }
    out.check(elapsed <= budget, || format!("runtime {:.1} s", elapsed.as_secs_f64()));
    out.summary = format!("{} rows in {:.1} s", reports.len(), elapsed.as_secs_f64());
    out
}

const REFERENCE_ERRORS: [(SchemeId, [f64; 9]); 4] = [
    (
        SchemeId::MC2,
        [
            0.001209761813698,
            0.004819513078445,
            0.010845910281583,
            0.019103698883414,
            0.0292950002010354,
            0.041880187917499,
            0.056456556421426,
            0.070841843339690,
            0.089698515736793,
        ],
    ),
    (
        SchemeId::EC2,
        [
            0.001744352482318,
            0.006932809282745,
            0.015394815532481,
            0.026901540607160,
            0.0414870103342257,
            0.058751742899246,
            0.078467370171848,
            0.097984886423440,
            0.122279591383913,
        ],
    ),
    (
        SchemeId::MC4,
        [
            1.278755235370749e-06,
            2.041567445049071e-05,
            1.030454250181083e-04,
            3.238977725264476e-04,
            0.000784339380931381,
            0.001612047955882,
            0.002980295333747,
            0.004951959701356,
            0.007880113942680,
        ],
    ),
    (
        SchemeId::EC4,
        [
            6.310163625023687e-07,
            1.014844691242605e-05,
            5.128995782971570e-05,
            1.642695585517801e-04,
            0.000412493956780063,
            8.651670551326446e-04,
            0.001655553925816,
            0.002948870766846,
            0.004870595526870,
        ],
    ),
];

/// Reference orders at dx = 0.2, ..., 0.9.
const REFERENCE_ORDERS: [[f64; 8]; 4] = [
    [1.99, 2.00, 1.97, 1.92, 1.96, 1.94, 1.70, 2.00],
    [1.99, 1.97, 1.94, 1.94, 1.91, 1.88, 1.66, 1.88],
    [4.00, 3.99, 3.98, 3.96, 3.95, 3.99, 3.80, 3.94],
    [4.01, 4.00, 4.05, 4.13, 4.06, 4.21, 4.32, 4.26],
];

fn check_convergence() -> Outcome {
    let mut out = Outcome::new();
    let start = Instant::now();
    for ((scheme, errors), orders) in REFERENCE_ERRORS.iter().zip(&REFERENCE_ORDERS) {
        let rows = match cmd_convergence(*scheme, 0.0, &CONVERGENCE_STEPS, None) {
            Ok(r) => r,
            Err(e) => {
                out.failures.push(format!("{scheme}: {e}"));
                continue;
            }
        };
        for (row, &want) in rows.iter().zip(errors) {
            out.check(rel(row.error, want) <= 0.01, || {
                format!(
                    "{scheme}(0) dx={} error {:.6e} vs {want:.6e} ({:+.2}%)",
                    row.dx,
                    row.error,
                    100.0 * (row.error / want - 1.0)
                )
            });
        }
        for (row, &want) in rows[1..].iter().zip(orders) {
            let pi = row.order.unwrap_or(f64::NAN);
            out.check((pi - want).abs() <= 0.1, || format!("{scheme}(0) dx={} pi {pi:.2} vs {want}", row.dx));
        }
    }
    let elapsed = start.elapsed();
    out.check(elapsed <= Duration::from_secs(600), || format!("runtime {:.1} s", elapsed.as_secs_f64()));
    out.summary = format!("36 points in {:.1} s", elapsed.as_secs_f64());
    out
}

fn check_pkp() -> Outcome {
    let mut out = Outcome::new();
    let start = Instant::now();
    let runs = std::thread::scope(|s| {
        let a = s.spawn(|| cmd_pkp(PkpFamily::MC1, 0.0, 0.05, None));
        let b = s.spawn(|| cmd_pkp(PkpFamily::MC2, 0.0, 0.05, None));
        [("MC1(0)", a.join().unwrap(), 3.40e-4), ("MC2(0)", b.join().unwrap(), 3.41e-4)]
    });
    let mut parts = Vec::new();
    for (label, res, want) in runs {
        match res {
            Ok(r) => {
                out.check(rel(r.sol_err, want) <= 0.05, || {
                    format!("{label} max error {:.4e} vs {want:.2e}", r.sol_err)
                });
                parts.push(format!("{label} {:.3e}", r.sol_err));
            }
            Err(e) => out.failures.push(format!("{label}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    out.check(elapsed <= Duration::from_secs(600), || format!("runtime {:.1} s", elapsed.as_secs_f64()));
    out.summary = format!("{} in {:.1} s", parts.join(", "), elapsed.as_secs_f64());
    out
}

/// `u' = f(u)` with a dense Jacobian and identity mass.
struct Dense<F, J> {
    n: usize,
    mass: BandMatrix,
    f: F,
    jac: J,
}

impl<F: Fn(&[f64]) -> Vec<f64>, J: Fn(&[f64]) -> Vec<Vec<f64>>> Dense<F, J> {
    fn new(n: usize, f: F, jac: J) -> Self {
        Self {
            n,
            mass: BandMatrix::identity(n, false),
            f,
            jac,
        }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>, J: Fn(&[f64]) -> Vec<Vec<f64>>> MassOde for Dense<F, J> {
    fn dim(&self) -> usize {
        self.n
    }
    fn mass(&self) -> &BandMatrix {
        &self.mass
    }
    fn g(&self, u: &[f64], _t: f64) -> Vec<f64> {
        (self.f)(u)
    }
    fn jacobian_g(&self, u: &[f64], _t: f64) -> BandMatrix {
        let mut m = BandMatrix::zeros(self.n, self.n - 1, self.n - 1, false);
        for (r, row) in (self.jac)(u).iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                m.add(r, c, *v).unwrap();
            }
        }
        m
    }
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn random_params(family: Family, rng: &mut ChaCha8Rng, dx: f64) -> BoussinesqParams {
    let scale = if matches!(family, Family::MC2 | Family::EC2) {
        dx * dx
    } else {
        dx.powi(4)
    };
    let mut p = BoussinesqParams::new(family);
    p.alpha = rng.gen_range(-0.3..0.3) * scale;
    p.beta = rng.gen_range(-0.3..0.3) * scale;
    p.gamma = rng.gen_range(-0.3..0.3) * scale;
    p.xi = rng.gen_range(-0.3..0.3) * scale;
    p
}

fn telescoping(out: &mut Outcome, rng: &mut ChaCha8Rng) {
    for _ in 0..500 {
        let taps: Vec<(isize, f64)> = (0..rng.gen_range(1..6))
            .map(|_| (rng.gen_range(-4..=4), rng.gen_range(-3.0..3.0)))
            .collect();
        let op = StencilOperator::from_taps(taps);
        let diff = &op - &StencilOperator::from_taps([(0, op.coeff_sum())]);
        let len = rng.gen_range(5..40);
        let f = rand_vec(rng, len);
        let s: f64 = diff.apply_periodic(&f).iter().sum();
        out.check(s.abs() <= 1e-13, || format!("(a) telescoping sum {s:e}"));
    }
}

fn quadratic_invariants(out: &mut Outcome, rng: &mut ChaCha8Rng) {
    for _ in 0..20 {
        let n = 6;
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v: f64 = rng.gen_range(-1.0..1.0);
                a[i][j] = v;
                a[j][i] = -v;
            }
        }
        let ode = Dense::new(n, |u: &[f64]| a.iter().map(|r| dot(r, u)).collect(), |_: &[f64]| a.clone());
        let u = rand_vec(rng, n);
        let n0 = dot(&u, &u);
        for m in [Integrator::Midpoint, Integrator::Gauss4] {
            let s = m.step(&ode, &u, 0.0, 0.25, None, &NewtonOptions::default()).unwrap();
            let drift = (dot(&s.u, &s.u) - n0).abs() / n0;
            out.check(drift <= 1e-13, || format!("(b) {m:?} quadratic drift {drift:e}"));
        }
    }
}

fn energy_conservation(out: &mut Outcome, rng: &mut ChaCha8Rng) {
    let duffing = Dense::new(
        2,
        |u: &[f64]| vec![u[1], -u[0] - u[0].powi(3)],
        |u: &[f64]| vec![vec![0.0, 1.0], vec![-1.0 - 3.0 * u[0] * u[0], 0.0]],
    );
    let pendulum = Dense::new(
        2,
        |u: &[f64]| vec![u[1], -u[0].sin()],
        |u: &[f64]| vec![vec![0.0, 1.0], vec![-u[0].cos(), 0.0]],
    );
    let h_duffing = |u: &[f64]| 0.5 * u[1] * u[1] + 0.5 * u[0] * u[0] + 0.25 * u[0].powi(4);
    let h_pendulum = |u: &[f64]| 0.5 * u[1] * u[1] - u[0].cos();
    for m in [Integrator::Avf2, Integrator::Epcm4] {
        for (name, ode, h) in [
            ("duffing", &duffing as &dyn MassOde, &h_duffing as &dyn Fn(&[f64]) -> f64),
            ("pendulum", &pendulum, &h_pendulum),
        ] {
            let mut u = vec![1.2, 0.3];
            for k in 0..20 {
                let next = m.step(ode, &u, k as f64 * 0.1, 0.1, None, &NewtonOptions::default()).unwrap().u;
                let drift = (h(&next) - h(&u)).abs();
                out.check(drift <= 1e-12, || format!("(c) {m:?} {name} energy drift {drift:e}"));
                u = next;
            }
        }
    }
    let n = 25;
    let g = GridSpec1D::periodic(0.0, n as f64 * 0.4, n).unwrap();
    for f in [Family::EC2, Family::EC4] {
        for _ in 0..10 {
            let sys = build_system(random_params(f, rng, g.dx()), &g).unwrap();
            let (w, z) = sys.hamiltonian_variables(&rand_vec(rng, n), &rand_vec(rng, n)).unwrap();
            let (gw, gz) = sys.hamiltonian_gradient(&w, &z).unwrap();
            let (r, m) = sys.structure_operators().unwrap();
            let lu = assemble_matrix(&m, &g).lu();
            let apply = |x: &[f64]| lu.solve(&nalgebra::DVector::from_vec(r.apply_periodic(x))).unwrap().as_slice().to_vec();
            let (yw, yz) = (apply(&gz), apply(&gw));
            let total = g.dx() * (dot(&gw, &yw) + dot(&gz, &yz));
            let scale = g.dx() * gw.iter().zip(&yw).map(|(a, b)| (a * b).abs()).sum::<f64>();
            out.check(total.abs() <= 1e-11 * scale.max(1.0), || format!("(c) {f:?} skew identity {total:e}"));
        }
    }
}

fn gradients(out: &mut Outcome, rng: &mut ChaCha8Rng) {
    let n = 17;
    let g = GridSpec1D::periodic(0.0, n as f64 * 0.4, n).unwrap();
    for f in [Family::EC2, Family::EC4] {
        let sys = build_system(random_params(f, rng, g.dx()), &g).unwrap();
        let (w, z) = (rand_vec(rng, n), rand_vec(rng, n));
        let (gw, gz) = sys.hamiltonian_gradient(&w, &z).unwrap();
        let h = 1e-5;
        for i in 0..n {
            for (comp, grad) in [(0, &gw), (1, &gz)] {
                let (mut p, mut m) = ([w.clone(), z.clone()], [w.clone(), z.clone()]);
                p[comp][i] += h;
                m[comp][i] -= h;
                let fd = (sys.hamiltonian_total(&p[0], &p[1]).unwrap() - sys.hamiltonian_total(&m[0], &m[1]).unwrap()) / (2.0 * h * g.dx());
                let err = (fd - grad[i]).abs() / grad[i].abs().max(1.0);
                out.check(err <= 1e-7, || format!("(d) {f:?} gradient node {i}: {err:e}"));
            }
        }
    }
}

fn boussinesq_truncation(f: Family, dx: f64) -> f64 {
    let g = GridSpec1D::periodic_closed(-60.0, 60.0, dx).unwrap();
    let sys = build_system(BoussinesqParams::new(f), &g).unwrap();
    let p = SolitonParams::benchmark();
    let (t, h) = (3.0, 1e-4);
    let sample = |t: f64| -> (Vec<f64>, Vec<f64>) { g.nodes().iter().map(|&x| soliton_uv(x, t, &p)).unzip() };
    let (u, v) = sample(t);
    let levels = [sample(t + 2.0 * h), sample(t + h), sample(t - h), sample(t - 2.0 * h)];
    let coeff = [-1.0, 8.0, -8.0, 1.0].map(|c| c / (12.0 * h));
    let deriv = |pick: fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>| -> Vec<f64> {
        (0..u.len())
            .map(|i| levels.iter().zip(coeff).map(|(l, c)| c * pick(l)[i]).sum())
            .collect()
    };
    let (ut, vt) = (deriv(|l| &l.0), deriv(|l| &l.1));
    let (ru, rv) = sys.rhs(&u, &v);
    let res = |m: &StencilOperator, rate: &[f64], r: &[f64]| max_abs(&m.apply_periodic(rate).iter().zip(r).map(|(a, b)| a - b).collect::<Vec<_>>());
    res(sys.mass_u(), &ut, &ru).max(res(sys.mass_v(), &vt, &rv))
}

fn pkp_truncation(family: PkpFamily, h: f64) -> f64 {
    let (dx, dy, dt) = (0.1 * h, 0.4 * h, 0.2 * h);
    let g = ghosted_grid((-0.5, 0.5), (-2.0, 2.0), dx, dy).unwrap();
    let sys = build_pkp(family, 0.0, &g).unwrap();
    let t = 1.0;
    let u0 = sys.sample(|x, y| pkp_wave(x, y, t));
    let u1 = sys.sample(|x, y| pkp_wave(x, y, t + dt));
    let bar: Vec<f64> = u0.iter().zip(&u1).map(|(a, b)| 0.5 * (a + b)).collect();
    max_abs(&sys.gather(&sys.residual_full(&u0, &u1, &bar, dt)))
}

fn truncation_orders(out: &mut Outcome) {
    for (f, nominal) in [(Family::MC2, 2.0), (Family::EC2, 2.0), (Family::MC4, 4.0), (Family::EC4, 4.0)] {
        let order = (boussinesq_truncation(f, 0.5) / boussinesq_truncation(f, 0.25)).log2();
        out.check((order - nominal).abs() <= 0.2, || format!("(e) {f:?} order {order:.3}"));
    }
    for f in [PkpFamily::MC1, PkpFamily::MC2] {
        let order = (pkp_truncation(f, 0.25) / pkp_truncation(f, 0.125)).log2();
        out.check((order - 2.0).abs() <= 0.2, || format!("(e) pKP {f:?} order {order:.3}"));
    }
}

fn check_properties() -> Outcome {
    let mut out = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    telescoping(&mut out, &mut rng);
    quadratic_invariants(&mut out, &mut rng);
    energy_conservation(&mut out, &mut rng);
    gradients(&mut out, &mut rng);
    truncation_orders(&mut out);
    out.summary = "(a)-(e) checked".into();
    out
}

fn main() {
    let results = std::thread::scope(|s| {
        let handles = [
            (
                "1 single-soliton table",
                s.spawn(|| check_table(1, &SINGLE_SOLITON, Duration::from_secs(60))),
            ),
            ("2 two-soliton table", s.spawn(|| check_table(2, &TWO_SOLITONS, Duration::from_secs(180)))),
            ("3 convergence study", s.spawn(check_convergence)),
            ("4 pKP travelling wave", s.spawn(check_pkp)),
            ("5 property suite", s.spawn(check_properties)),
        ];
        handles.map(|(name, h)| (name, h.join().expect("criterion panicked")))
    });
    let mut all = true;
    for (name, out) in &results {
        let ok = out.failures.is_empty();
        all &= ok;
        println!("criterion {name}: {} ({})", if ok { "PASS" } else { "FAIL" }, out.summary);
        for f in &out.failures {
            println!("    {f}");
        }
    }
    if !all {
        std::process::exit(1);
    }
}
