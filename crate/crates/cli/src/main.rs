//! Command-line driver for the benchmark experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use conserve::diagnostics::RunReport;
use conserve::experiments::{cmd_convergence, cmd_pkp, cmd_run, cmd_table, ExperimentError, Problem, RunConfig, SchemeId, CONVERGENCE_STEPS};
use conserve::pkp::PkpFamily;
use serde::Deserialize;

/// Default output directory when `--out` is not given.
const OUT_ENV: &str = "CONSERVE_OUT";

#[derive(Parser, Debug)]
#[command(name = "conserve-bench", version, about = "Conservative finite difference benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// March one configuration and write report, series and profile CSVs.
    Run(RunArgs),
    /// Reproduce a twelve-row benchmark table (1: one soliton, 2: two solitons).
    Table {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=2))]
        which: u8,
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
    },
    /// Single-soliton errors and observed orders at dx = dt = 0.1, ..., 0.9.
    Convergence {
        #[arg(long)]
        scheme: SchemeId,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
    },
    /// The two-dimensional travelling-wave benchmark.
    Pkp {
        #[arg(long, default_value = "PKP-MC1")]
        scheme: SchemeId,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
    },
}

/// Settings shared by the command line and the config file; flags win.
#[derive(Args, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct RunArgs {
    /// TOML file with any of the keys below.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// soliton1, soliton2, pkp, or a profile CSV path.
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    /// λ for the Boussinesq families, α for pKP.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    #[arg(long)]
    dx: Option<f64>,
    #[arg(long)]
    dy: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    t_final: Option<f64>,
    /// x interval as a:b.
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,
    /// y interval as a:b (pKP only).
    #[arg(long, allow_hyphen_values = true)]
    domain_y: Option<String>,
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
    #[arg(long)]
    newton_tol: Option<f64>,
    #[arg(long)]
    newton_max_iter: Option<usize>,
}

fn config_error(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

fn parse_interval(s: &str) -> Result<(f64, f64), ExperimentError> {
    let bad = || config_error(format!("interval '{s}' is not of the form a:b"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

impl RunArgs {
    fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| config_error(format!("{}: {}", path.display(), e.message())))
    }

    /// Fills every unset field from `base`.
    fn or(self, base: Self) -> Self {
        Self {
            config: self.config,
            problem: self.problem.or(base.problem),
            scheme: self.scheme.or(base.scheme),
            lambda: self.lambda.or(base.lambda),
            dx: self.dx.or(base.dx),
            dy: self.dy.or(base.dy),
            dt: self.dt.or(base.dt),
            t_final: self.t_final.or(base.t_final),
            domain: self.domain.or(base.domain),
            domain_y: self.domain_y.or(base.domain_y),
            out: self.out.or(base.out),
            newton_tol: self.newton_tol.or(base.newton_tol),
            newton_max_iter: self.newton_max_iter.or(base.newton_max_iter),
        }
    }

    fn into_config(self) -> Result<RunConfig, ExperimentError> {
        let args = match &self.config {
            Some(path) => {
                let file = Self::from_file(path)?;
                self.or(file)
            }
            None => self,
        };
        let problem: Problem = args.problem.as_deref().unwrap_or("soliton1").parse()?;
        let scheme: SchemeId = args.scheme.as_deref().ok_or_else(|| config_error("--scheme is required"))?.parse()?;
        let mut cfg = RunConfig::new(problem, scheme);
        if let Some(v) = args.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = args.dx {
            cfg.dx = v;
        }
        if let Some(v) = args.dy {
            cfg.dy = v;
        }
        if let Some(v) = args.dt {
            cfg.dt = v;
        }
        if let Some(v) = args.t_final {
            cfg.t_final = v;
        }
        if let Some(s) = &args.domain {
            cfg.domain = parse_interval(s)?;
        }
        if let Some(s) = &args.domain_y {
            cfg.domain_y = parse_interval(s)?;
        }
        cfg.newton_tol = args.newton_tol;
        cfg.newton_max_iter = args.newton_max_iter;
        cfg.out_dir = args.out;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_reports(reports: &[RunReport]) {
    println!(
        "{:<8} {:>7} {:>5} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>8}",
        "scheme", "lambda", "dx", "dt", "err1", "err2", "err3", "err4", "sol_err", "seconds"
    );
    for r in reports {
        println!(
            "{:<8} {:>7.3} {:>5} {:>6} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.4e} {:>8.2}",
            r.scheme, r.lambda, r.dx, r.dt, r.err1, r.err2, r.err3, r.err4, r.sol_err, r.wall_seconds
        );
    }
}

fn execute(command: Command) -> Result<(), ExperimentError> {
    match command {
        Command::Run(args) => {
            let cfg = args.into_config()?;
            log::info!("running {} on {:?}", cfg.scheme, cfg.problem);
            print_reports(&[cmd_run(&cfg)?]);
        }
        Command::Table { which, out } => print_reports(&cmd_table(which, out.as_deref())?),
        Command::Convergence { scheme, lambda, out } => {
            println!("{:>5} {:>22} {:>8}", "dx", "error", "pi");
            for row in cmd_convergence(scheme, lambda, &CONVERGENCE_STEPS, out.as_deref())? {
                let pi = row.order.map(|p| format!("{p:.2}")).unwrap_or_default();
                println!("{:>5} {:>22.15e} {:>8}", row.dx, row.error, pi);
            }
        }
        Command::Pkp { scheme, alpha, dt, out } => {
            let family = scheme.pkp_family().ok_or_else(|| config_error(format!("{scheme} is not a pKP scheme")))?;
            let r = cmd_pkp(family, alpha, dt, out.as_deref())?;
            let name = match family {
                PkpFamily::MC1 => "MC1",
                PkpFamily::MC2 => "MC2",
            };
            println!(
                "{name}({alpha}) max abs error {:.4e}, monitor drifts {:.3e} {:.3e}, {:.1} s",
                r.sol_err, r.err1, r.err2, r.wall_seconds
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
