//! Benchmark runs: configuration, time marching, monitors and CSV output.

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boussinesq::{build_system, BoussinesqParams, Family, SemidiscreteSystem};
use crate::diagnostics::{
    err_alpha, fmt_f64, order_estimate, read_profile, rel_solution_error, write_profile, write_report, write_reports, write_series, ProfileRow,
    RunReport, SeriesRow,
};
use crate::error::{GridError, SchemeError, SolveError};
use crate::exact::{pkp_wave, soliton_uv, two_soliton_uv, SolitonParams, TwoSolitonParams};
use crate::grid::GridSpec1D;
use crate::pkp::{build_pkp, ghosted_grid, pkp_monitors, pkp_step_midpoint, GhostTiming, PkpFamily};
use crate::quadratic::{interleave, split};
use crate::reference::{build_dvd, build_fd4, build_mp, build_ps, default_density, reconstruct_v, OneStepSystem, ThreeLevelScheme};
use crate::time_integration::{Integrator, NewtonOptions};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("solver failed at step {step}: {source}")]
    Solver { step: usize, source: SolveError },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl ExperimentError {
    /// Process exit status: 2 for configuration errors, 3 for solver failures, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Scheme(SchemeError::Grid(_) | SchemeError::BadParameter(_) | SchemeError::WrongFamily { .. }) => 2,
            Self::Scheme(_) | Self::Solver { .. } => 3,
            Self::Io(_) | Self::Csv(_) => 4,
        }
    }
}

impl From<GridError> for ExperimentError {
    fn from(e: GridError) -> Self {
        Self::Scheme(e.into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Soliton1,
    Soliton2,
    Pkp,
    /// Periodic initial data from a profile CSV (`i,x,u,v`).
    Custom(PathBuf),
}

impl FromStr for Problem {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "soliton1" => Problem::Soliton1,
            "soliton2" => Problem::Soliton2,
            "pkp" => Problem::Pkp,
            path if path.ends_with(".csv") => Problem::Custom(path.into()),
            other => return Err(ExperimentError::Config(format!("unknown problem '{other}'"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeId {
    MC2,
    EC2,
    MC4,
    EC4,
    PS,
    MP,
    DVD,
    FD4,
    #[serde(rename = "PKP-MC1")]
    PkpMC1,
    #[serde(rename = "PKP-MC2")]
    PkpMC2,
}

impl SchemeId {
    pub const ALL: [SchemeId; 10] = [
        SchemeId::MC2,
        SchemeId::EC2,
        SchemeId::MC4,
        SchemeId::EC4,
        SchemeId::PS,
        SchemeId::MP,
        SchemeId::DVD,
        SchemeId::FD4,
        SchemeId::PkpMC1,
        SchemeId::PkpMC2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SchemeId::MC2 => "MC2",
            SchemeId::EC2 => "EC2",
            SchemeId::MC4 => "MC4",
            SchemeId::EC4 => "EC4",
            SchemeId::PS => "PS",
            SchemeId::MP => "MP",
            SchemeId::DVD => "DVD",
            SchemeId::FD4 => "FD4",
            SchemeId::PkpMC1 => "PKP-MC1",
            SchemeId::PkpMC2 => "PKP-MC2",
        }
    }

    pub fn family(&self) -> Option<Family> {
        match self {
            SchemeId::MC2 => Some(Family::MC2),
            SchemeId::EC2 => Some(Family::EC2),
            SchemeId::MC4 => Some(Family::MC4),
            SchemeId::EC4 => Some(Family::EC4),
            _ => None,
        }
    }

    pub fn pkp_family(&self) -> Option<PkpFamily> {
        match self {
            SchemeId::PkpMC1 => Some(PkpFamily::MC1),
            SchemeId::PkpMC2 => Some(PkpFamily::MC2),
            _ => None,
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ExperimentError::Config(format!("unknown scheme '{s}'")))
    }
}

/// Integrator paired with each Boussinesq family.
pub fn integrator_for(family: Family) -> Integrator {
    match family {
        Family::MC2 => Integrator::Midpoint,
        Family::EC2 => Integrator::Avf2,
        Family::MC4 => Integrator::Gauss4,
        Family::EC4 => Integrator::Avf4,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: Problem,
    pub scheme: SchemeId,
    /// Free parameter: λ for the Boussinesq families, α for pKP.
    pub lambda: f64,
    /// `x` interval.
    pub domain: (f64, f64),
    /// `y` interval (pKP only).
    pub domain_y: (f64, f64),
    pub dx: f64,
    pub dy: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    /// Newton step tolerance; `None` keeps the per-problem default.
    pub newton_tol: Option<f64>,
    pub newton_max_iter: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Benchmark settings for `problem`.
    pub fn new(problem: Problem, scheme: SchemeId) -> Self {
        let (domain, t_final, dx, dt) = match problem {
            Problem::Soliton2 => ((-150.0, 150.0), 50.0, 0.5, 0.5),
            Problem::Pkp => ((-0.5, 0.5), 5.0, 0.01, 0.05),
            _ => ((-60.0, 60.0), 25.0, 0.5, 0.5),
        };
        Self {
            problem,
            scheme,
            lambda: 0.0,
            domain,
            domain_y: (-10.0, 10.0),
            dx,
            dy: 0.2,
            dt,
            t_final,
            newton_tol: None,
            newton_max_iter: None,
            out_dir: None,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_steps(mut self, dx: f64, dt: f64) -> Self {
        self.dx = dx;
        self.dt = dt;
        self
    }

    /// Rejects incompatible or degenerate settings before any computation.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        let is_pkp = self.scheme.pkp_family().is_some();
        match (&self.problem, is_pkp) {
            (Problem::Pkp, false) => return bad(format!("scheme {} does not apply to the pkp problem", self.scheme)),
            (Problem::Soliton1 | Problem::Soliton2 | Problem::Custom(_), true) => {
                return bad(format!("scheme {} only applies to the pkp problem", self.scheme))
            }
            _ => {}
        }
        for (name, v) in [("dx", self.dx), ("dt", self.dt), ("T", self.t_final)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if is_pkp && !(self.dy.is_finite() && self.dy > 0.0) {
            return bad(format!("dy must be positive, got {}", self.dy));
        }
        if !self.lambda.is_finite() {
            return bad("lambda must be finite".into());
        }
        if !(self.domain.0 < self.domain.1) || (is_pkp && !(self.domain_y.0 < self.domain_y.1)) {
            return bad("domain must satisfy a < b".into());
        }
        if self.scheme.family() == Some(Family::MC2) && self.lambda * self.dx * self.dx == 1.0 / 3.0 {
            return bad("MC2 with λΔx² = 1/3 has a singular mass".into());
        }
        if let Some(tol) = self.newton_tol {
            if !(tol > 0.0) {
                return bad(format!("newton tolerance must be positive, got {tol}"));
            }
        }
        if self.newton_max_iter == Some(0) {
            return bad("newton max iterations must be positive".into());
        }
        Ok(())
    }

    /// Number of time steps: `T/dt` rounded to the nearest integer.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round().max(1.0) as usize
    }

    /// Step actually taken, so that [`Self::steps`] steps land exactly on `T`.
    pub fn step_size(&self) -> f64 {
        self.t_final / self.steps() as f64
    }

    fn newton(&self) -> NewtonOptions {
        let mut opts = if self.problem == Problem::Pkp {
            NewtonOptions {
                rel_tol: 1e-11,
                max_iter: 200,
                freeze_jacobian: true,
                ..Default::default()
            }
        } else {
            NewtonOptions::default()
        };
        if let Some(tol) = self.newton_tol {
            opts.rel_tol = tol;
        }
        if let Some(n) = self.newton_max_iter {
            opts.max_iter = n;
        }
        opts
    }
}

/// Everything a run produces.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    pub series: Vec<SeriesRow>,
    pub profile: Vec<ProfileRow>,
    /// pKP only: `(i, j, x, y, u)` at the final time.
    pub field: Vec<(usize, usize, f64, f64, f64)>,
}

fn exact_uv(problem: &Problem, x: f64, t: f64) -> Option<(f64, f64)> {
    match problem {
        Problem::Soliton1 => Some(soliton_uv(x, t, &SolitonParams::benchmark())),
        Problem::Soliton2 => Some(two_soliton_uv(x, t, &TwoSolitonParams::benchmark())),
        _ => None,
    }
}

/// Grid and initial data of a one-dimensional problem.
fn initial_data(cfg: &RunConfig) -> Result<(GridSpec1D, Vec<f64>, Vec<f64>), ExperimentError> {
    if let Problem::Custom(path) = &cfg.problem {
        let rows = read_profile(path)?;
        if rows.len() < 2 {
            return Err(ExperimentError::Config(format!("{} needs at least two rows", path.display())));
        }
        let dx = rows[1].x - rows[0].x;
        let n = rows.len();
        let grid = GridSpec1D::periodic(rows[0].x, rows[0].x + n as f64 * dx, n)?;
        return Ok((grid, rows.iter().map(|r| r.u).collect(), rows.iter().map(|r| r.v).collect()));
    }
    let grid = GridSpec1D::periodic_closed(cfg.domain.0, cfg.domain.1, cfg.dx)?;
    let (u, v) = grid
        .nodes()
        .iter()
        .map(|&x| exact_uv(&cfg.problem, x, 0.0).expect("closed-form problem"))
        .unzip();
    Ok((grid, u, v))
}

/// The four monitor sums `Σ_i G̃_α[i]` for one state.
enum Monitor<'a> {
    Family(&'a SemidiscreteSystem),
    Default { dx: f64, full_energy: bool },
}

impl Monitor<'_> {
    fn sums(&self, u: &[f64], v: &[f64]) -> Result<[f64; 4], SchemeError> {
        let sum = |d: Vec<f64>| d.iter().sum::<f64>();
        match self {
            Monitor::Family(sys) => {
                let (g1, g2) = (sys.density(1, u, v)?, sys.density(2, u, v)?);
                let g3: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a * b).collect();
                let g4 = if sys.family().is_energy() {
                    sys.density(4, u, v)?
                } else {
                    default_density(4, u, v, sys.grid().dx(), false)?
                };
                Ok([sum(g1), sum(g2), sum(g3), sum(g4)])
            }
            Monitor::Default { dx, full_energy } => {
                let mut out = [0.0; 4];
                for (k, o) in out.iter_mut().enumerate() {
                    *o = sum(default_density(k + 1, u, v, *dx, *full_energy)?);
                }
                Ok(out)
            }
        }
    }
}

enum Marcher {
    Family(SemidiscreteSystem, Integrator),
    OneStep(OneStepSystem, Integrator),
    ThreeLevel(ThreeLevelScheme),
}

fn marcher(cfg: &RunConfig, grid: &GridSpec1D) -> Result<Marcher, ExperimentError> {
    Ok(match cfg.scheme {
        SchemeId::MP => Marcher::OneStep(build_mp(grid)?, Integrator::Midpoint),
        SchemeId::DVD => Marcher::OneStep(build_dvd(grid)?, Integrator::Avf2),
        SchemeId::PS => Marcher::ThreeLevel(build_ps(grid, cfg.step_size())?),
        SchemeId::FD4 => Marcher::ThreeLevel(build_fd4(grid, cfg.step_size())?),
        id => {
            let family = id
                .family()
                .ok_or_else(|| ExperimentError::Config(format!("{id} is not a one-dimensional scheme")))?;
            let sys = build_system(BoussinesqParams::lambda(family, cfg.lambda, grid.dx()), grid)?;
            Marcher::Family(sys, integrator_for(family))
        }
    })
}

/// Runs `cfg` without writing anything.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, ExperimentError> {
    cfg.validate()?;
    if cfg.problem == Problem::Pkp {
        return run_pkp(cfg);
    }
    let start = Instant::now();
    let (grid, u0, v0) = initial_data(cfg)?;
    let (dx, dt, steps) = (grid.dx(), cfg.step_size(), cfg.steps());
    let opts = cfg.newton();
    let marcher = marcher(cfg, &grid)?;
    let monitor = match &marcher {
        Marcher::Family(sys, _) => Monitor::Family(sys),
        Marcher::OneStep(sys, _) => Monitor::Default {
            dx,
            full_energy: sys.scheme() == crate::reference::ReferenceScheme::DVD,
        },
        Marcher::ThreeLevel(_) => Monitor::Default { dx, full_energy: false },
    };
    let mut sums = Vec::with_capacity(steps + 1);
    let mut iterations = 0usize;
    let (u, v) = match &marcher {
        Marcher::Family(sys, integrator) => march_one_step(sys, *integrator, &u0, &v0, dt, steps, &opts, &monitor, &mut sums, &mut iterations)?,
        Marcher::OneStep(sys, integrator) => march_one_step(sys, *integrator, &u0, &v0, dt, steps, &opts, &monitor, &mut sums, &mut iterations)?,
        Marcher::ThreeLevel(sys) => {
            // The second starting level comes from the exact solution, or from
            // one implicit midpoint step when there is none.
            let u1 = match exact_uv(&cfg.problem, 0.0, 0.0) {
                Some(_) => grid
                    .nodes()
                    .iter()
                    .map(|&x| exact_uv(&cfg.problem, x, dt).expect("closed form").0)
                    .collect(),
                None => {
                    build_mp(&grid)?
                        .step(&u0, &v0, 0.0, dt, &opts)
                        .map_err(|source| ExperimentError::Solver { step: 0, source })?
                        .0
                }
            };
            let (mut prev, mut cur) = (u0.clone(), u1);
            let first_v = reconstruct_v(&[prev.clone(), cur.clone()], dx, dt).pop().expect("one level");
            sums.push(monitor.sums(&prev, &first_v)?);
            sums.push(monitor.sums(&cur, &first_v)?);
            let mut v = first_v;
            for step in 1..steps {
                let (next, rep) = sys.step(&prev, &cur, &opts).map_err(|source| ExperimentError::Solver { step, source })?;
                iterations += rep.iterations;
                v = reconstruct_v(&[cur.clone(), next.clone()], dx, dt).pop().expect("one level");
                sums.push(monitor.sums(&next, &v)?);
                prev = std::mem::replace(&mut cur, next);
            }
            (cur, v)
        }
    };
    let t_end = cfg.t_final;
    let sol_err = match exact_uv(&cfg.problem, 0.0, 0.0) {
        Some(_) => {
            let exact: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|&x| exact_uv(&cfg.problem, x, t_end).expect("closed form").0)
                .collect();
            rel_solution_error(&u, &exact).unwrap_or(f64::NAN)
        }
        None => f64::NAN,
    };
    let column = |k: usize| sums.iter().map(|s| s[k]).collect::<Vec<f64>>();
    let report = RunReport {
        scheme: cfg.scheme.name().into(),
        dx,
        dt,
        t_final: t_end,
        lambda: cfg.lambda,
        err1: err_alpha(&column(0), dx),
        err2: err_alpha(&column(1), dx),
        err3: err_alpha(&column(2), dx),
        err4: err_alpha(&column(3), dx),
        sol_err,
        newton_avg_iters: iterations as f64 / steps as f64,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    let series = sums
        .iter()
        .enumerate()
        .map(|(j, s)| SeriesRow {
            j,
            t: j as f64 * dt,
            sum_g1: dx * s[0],
            sum_g2: dx * s[1],
            sum_g3: dx * s[2],
            sum_g4: dx * s[3],
        })
        .collect();
    let profile = (0..grid.len())
        .map(|i| ProfileRow {
            i,
            x: grid.x(i),
            u: u[i],
            v: v[i],
        })
        .collect();
    Ok(RunOutput {
        report,
        series,
        profile,
        field: Vec::new(),
    })
}

#[allow(clippy::too_many_arguments)]
fn march_one_step<O: crate::time_integration::MassOde>(
    ode: &O,
    integrator: Integrator,
    u0: &[f64],
    v0: &[f64],
    dt: f64,
    steps: usize,
    opts: &NewtonOptions,
    monitor: &Monitor,
    sums: &mut Vec<[f64; 4]>,
    iterations: &mut usize,
) -> Result<(Vec<f64>, Vec<f64>), ExperimentError> {
    let mut state = interleave(&[u0, v0]);
    let mut prev: Option<Vec<f64>> = None;
    sums.push(monitor.sums(u0, v0)?);
    for step in 0..steps {
        let guess: Option<Vec<f64>> = prev.as_ref().map(|p| state.iter().zip(p).map(|(a, b)| 2.0 * a - b).collect());
        let next = integrator
            .step(ode, &state, step as f64 * dt, dt, guess.as_deref(), opts)
            .map_err(|source| ExperimentError::Solver { step, source })?;
        *iterations += next.newton_iterations;
        prev = Some(std::mem::replace(&mut state, next.u));
        let uv = split(&state, 2);
        sums.push(monitor.sums(&uv[0], &uv[1])?);
    }
    let mut uv = split(&state, 2);
    let v = uv.pop().expect("two components");
    Ok((uv.pop().expect("two components"), v))
}

fn run_pkp(cfg: &RunConfig) -> Result<RunOutput, ExperimentError> {
    let start = Instant::now();
    let family = cfg.scheme.pkp_family().expect("validated");
    let grid = ghosted_grid(cfg.domain, cfg.domain_y, cfg.dx, cfg.dy)?;
    let sys = build_pkp(family, cfg.lambda, &grid)?;
    let (dt, steps) = (cfg.step_size(), cfg.steps());
    let opts = cfg.newton();
    let boundary = |x: f64, y: f64, t: f64| pkp_wave(x, y, t);
    let mut u = sys.sample(|x, y| pkp_wave(x, y, 0.0));
    let mut prev: Option<Vec<f64>> = None;
    let mut sums = vec![pkp_monitors(&sys, &u)];
    let mut iterations = 0usize;
    for step in 0..steps {
        let guess: Option<Vec<f64>> = prev.as_ref().map(|p| u.iter().zip(p).map(|(a, b)| 2.0 * a - b).collect());
        let (next, rep) = pkp_step_midpoint(&sys, &u, step as f64 * dt, dt, &boundary, GhostTiming::Average, guess.as_deref(), &opts)
            .map_err(|source| ExperimentError::Solver { step, source })?;
        iterations += rep.iterations;
        prev = Some(std::mem::replace(&mut u, next));
        sums.push(pkp_monitors(&sys, &u));
    }
    let t_end = cfg.t_final;
    let exact = sys.sample(|x, y| pkp_wave(x, y, t_end));
    let drift = |f: fn(&(f64, f64)) -> f64| err_alpha(&sums.iter().map(f).collect::<Vec<f64>>(), 1.0);
    let report = RunReport {
        scheme: cfg.scheme.name().into(),
        dx: cfg.dx,
        dt,
        t_final: t_end,
        lambda: cfg.lambda,
        err1: drift(|s| s.0),
        err2: drift(|s| s.1),
        err3: f64::NAN,
        err4: f64::NAN,
        sol_err: sys.max_abs_error(&u, &exact),
        newton_avg_iters: iterations as f64 / steps as f64,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    let series = sums
        .iter()
        .enumerate()
        .map(|(j, s)| SeriesRow {
            j,
            t: j as f64 * dt,
            sum_g1: s.0,
            sum_g2: s.1,
            sum_g3: f64::NAN,
            sum_g4: f64::NAN,
        })
        .collect();
    let (mr, nr) = sys.interior();
    let nx = grid.nx();
    let field = nr
        .clone()
        .flat_map(|n| mr.clone().map(move |m| (m, n)))
        .map(|(m, n)| (m - mr.start, n - nr.start, grid.x_grid.x(m), grid.y_grid.x(n), u[n * nx + m]))
        .collect();
    Ok(RunOutput {
        report,
        series,
        profile: Vec::new(),
        field,
    })
}

fn write_field(field: &[(usize, usize, f64, f64, f64)], path: &Path) -> io::Result<()> {
    use std::io::Write;
    let mut w = io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "i,j,x,y,u")?;
    for &(i, j, x, y, u) in field {
        writeln!(w, "{i},{j},{},{},{}", fmt_f64(x), fmt_f64(y), fmt_f64(u))?;
    }
    w.flush()
}

/// Writes `report.csv`, `series.csv` and `profile.csv` (`field.csv` for pKP).
pub fn write_output(out: &RunOutput, dir: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir)?;
    write_report(&out.report, &dir.join("report.csv"))?;
    write_series(&out.series, &dir.join("series.csv"))?;
    if out.field.is_empty() {
        write_profile(&out.profile, &dir.join("profile.csv"))?;
    } else {
        write_field(&out.field, &dir.join("field.csv"))?;
    }
    Ok(())
}

/// Runs `cfg` and writes its CSV files when `out_dir` is set.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunReport, ExperimentError> {
    let out = run(cfg)?;
    if let Some(dir) = &cfg.out_dir {
        write_output(&out, dir)?;
    }
    Ok(out.report)
}

/// Runs independent configurations concurrently, preserving order.
pub fn run_all(configs: &[RunConfig]) -> Vec<Result<RunReport, ExperimentError>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|c| s.spawn(move || cmd_run(c))).collect();
        handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
    })
}

/// The twelve rows of benchmark table 1 (single soliton) or 2 (two solitons).
pub fn table_configs(which: u8) -> Result<Vec<RunConfig>, ExperimentError> {
    let (problem, optimal) = match which {
        1 => (Problem::Soliton1, [-0.21, -0.20, 0.06, 0.03]),
        2 => (Problem::Soliton2, [-0.19, -0.18, 0.06, 0.02]),
        _ => return Err(ExperimentError::Config(format!("no table {which}"))),
    };
    let base = |id| RunConfig::new(problem.clone(), id);
    let mut rows = Vec::new();
    for (id, best) in [(SchemeId::MC2, optimal[0]), (SchemeId::EC2, optimal[1])] {
        rows.push(base(id));
        rows.push(base(id).with_lambda(best));
    }
    rows.extend([SchemeId::PS, SchemeId::MP, SchemeId::DVD].map(base));
    for (id, best) in [(SchemeId::MC4, optimal[2]), (SchemeId::EC4, optimal[3])] {
        rows.push(base(id));
        rows.push(base(id).with_lambda(best));
    }
    rows.push(base(SchemeId::FD4).with_steps(0.5, 0.25));
    Ok(rows)
}

/// Runs a benchmark table and writes `table{which}.csv` into `out_dir`.
pub fn cmd_table(which: u8, out_dir: Option<&Path>) -> Result<Vec<RunReport>, ExperimentError> {
    let reports = run_all(&table_configs(which)?).into_iter().collect::<Result<Vec<_>, _>>()?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        write_reports(&reports, &dir.join(format!("table{which}.csv")))?;
    }
    Ok(reports)
}

/// One row of a convergence study; `order` is empty for the first step size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub dx: f64,
    pub error: f64,
    #[serde(rename = "pi")]
    pub order: Option<f64>,
}

pub const CONVERGENCE_STEPS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Single-soliton errors at `dx = dt ∈ steps` and the observed orders.
pub fn cmd_convergence(scheme: SchemeId, lambda: f64, steps: &[f64], out_dir: Option<&Path>) -> Result<Vec<ConvergenceRow>, ExperimentError> {
    if scheme.family().is_none() {
        return Err(ExperimentError::Config(format!(
            "convergence studies need MC2, EC2, MC4 or EC4, got {scheme}"
        )));
    }
    let configs: Vec<RunConfig> = steps
        .iter()
        .map(|&h| RunConfig::new(Problem::Soliton1, scheme).with_lambda(lambda).with_steps(h, h))
        .collect();
    let reports = run_all(&configs).into_iter().collect::<Result<Vec<_>, _>>()?;
    let pairs: Vec<(f64, f64)> = steps.iter().zip(&reports).map(|(&h, r)| (h, r.sol_err)).collect();
    let orders = order_estimate(&pairs).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let rows: Vec<ConvergenceRow> = pairs
        .iter()
        .enumerate()
        .map(|(k, &(dx, error))| ConvergenceRow {
            dx,
            error,
            order: k.checked_sub(1).map(|i| orders[i]),
        })
        .collect();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join(format!("convergence_{scheme}.csv")))?;
        w.write_record(["dx", "error", "pi"])?;
        for r in &rows {
            w.write_record([fmt_f64(r.dx), fmt_f64(r.error), r.order.map(fmt_f64).unwrap_or_default()])?;
        }
        w.flush()?;
    }
    Ok(rows)
}

/// The pKP travelling-wave benchmark with step `dt`.
pub fn cmd_pkp(family: PkpFamily, alpha: f64, dt: f64, out_dir: Option<&Path>) -> Result<RunReport, ExperimentError> {
    let scheme = match family {
        PkpFamily::MC1 => SchemeId::PkpMC1,
        PkpFamily::MC2 => SchemeId::PkpMC2,
    };
    let mut cfg = RunConfig::new(Problem::Pkp, scheme).with_lambda(alpha);
    cfg.dt = dt;
    cfg.out_dir = out_dir.map(Path::to_path_buf);
    cmd_run(&cfg)
}
