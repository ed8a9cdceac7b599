//! Subcommand runners and exit-code mapping.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use wpc_core::config::{load_config, validate_tau_list, ConfigError, SimConfig};
use wpc_core::coupling::{simulate, tau_sweep, RunOptions};
use wpc_core::energy::fmt_float;
use wpc_core::Error as SimError;

use crate::output::{write_run, write_sweep};
use crate::suites;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    LimitSweep,
    Verify,
    Modes,
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub out: PathBuf,
    pub tau: Option<Vec<f64>>,
    pub quiet: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ConfigRead { path: PathBuf, source: io::Error },
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("invalid --tau: {0}")]
    TauOverride(String),
    #[error("{0}")]
    Sim(#[from] SimError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("verification failed: {}", .0.join(", "))]
    VerifyFailed(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigRead { .. } | CliError::Config(_) | CliError::TauOverride(_) => 2,
            CliError::Sim(e) => match e.root() {
                SimError::InvalidParams(_) => 2,
                SimError::Degenerate { .. } => 3,
                SimError::PicardDiverged { .. } => 4,
                _ => 1,
            },
            CliError::VerifyFailed(_) => 5,
            CliError::Io(_) => 1,
        }
    }
}

pub fn read_config(path: &Path) -> Result<SimConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::ConfigRead { path: path.to_path_buf(), source })?;
    Ok(load_config(&text)?)
}

/// A single `--tau` value replaces `params.tau`; lists are only meaningful for sweeps.
fn single_tau(config: SimConfig, tau: &Option<Vec<f64>>) -> Result<SimConfig, CliError> {
    match tau.as_deref() {
        None => Ok(config),
        Some([t]) if t.is_finite() && *t >= 0.0 => Ok(config.with_tau(*t)),
        Some([t]) => Err(CliError::TauOverride(format!("{t} is not a nonnegative number"))),
        Some(_) => Err(CliError::TauOverride("expected a single value for this subcommand".into())),
    }
}

pub fn run(inv: &Invocation) -> Result<(), CliError> {
    let config = read_config(&inv.config)?;
    match inv.command {
        Command::Simulate => {
            let config = single_tau(config, &inv.tau)?;
            let out = simulate(&config, RunOptions::default())?;
            write_run(&inv.out, &out)?;
            if !inv.quiet {
                eprintln!(
                    "simulate: {} steps, {} rows, max Picard iterations {}, min alpha {}",
                    out.n_steps,
                    out.reports.len(),
                    out.max_picard_iterations,
                    out.min_alpha
                );
            }
        }
        Command::LimitSweep => {
            let list = match &inv.tau {
                Some(l) => {
                    validate_tau_list(l).map_err(CliError::TauOverride)?;
                    l.clone()
                }
                None => config
                    .tau_list
                    .clone()
                    .ok_or_else(|| CliError::Config(ConfigError::Validation { path: "sweep.tau_list".into(), reason: "required for limit-sweep".into() }))?,
            };
            let sweep = tau_sweep(&config, &list)?;
            write_sweep(&inv.out, &sweep)?;
            if !inv.quiet {
                for e in &sweep.entries {
                    eprintln!("tau {}: e_theta {:e}, e_p {:e}, e_pt {:e}", e.tau, e.e_theta, e.e_p, e.e_pt);
                }
            }
        }
        Command::Verify => {
            let config = single_tau(config, &inv.tau)?;
            let checks = verify_checks(&config)?;
            fs::create_dir_all(&inv.out)?;
            fs::write(inv.out.join("verify.csv"), verify_csv(&checks))?;
            let failed: Vec<String> = checks.iter().filter(|c| !c.pass()).map(|c| c.name.clone()).collect();
            for c in &checks {
                if !c.pass() {
                    eprintln!("FAIL {}: {:e} not in [{:e}, {:e}]", c.name, c.value, c.lower, c.upper);
                } else if !inv.quiet {
                    eprintln!("pass {}: {:e}", c.name, c.value);
                }
            }
            if !failed.is_empty() {
                return Err(CliError::VerifyFailed(failed));
            }
        }
        Command::Modes => {
            let config = single_tau(config, &inv.tau)?;
            let text = modes_csv(&config)?;
            fs::create_dir_all(&inv.out)?;
            fs::write(inv.out.join("modes.csv"), text)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Check {
    fn new(name: &str, value: f64, lower: f64, upper: f64) -> Self {
        Check { name: name.to_string(), value, lower, upper }
    }

    pub fn pass(&self) -> bool {
        self.value >= self.lower && self.value <= self.upper
    }
}

pub fn verify_csv(checks: &[Check]) -> String {
    let mut s = String::from("check,value,lower,upper,pass\n");
    for c in checks {
        let _ = writeln!(s, "{},{},{},{},{}", c.name, fmt_float(c.value), fmt_float(c.lower), fmt_float(c.upper), c.pass());
    }
    s
}

/// Operator, manufactured-solution and energy-balance checks for a config.
pub fn verify_checks(config: &SimConfig) -> Result<Vec<Check>, CliError> {
    let grid = config.grid();
    let params = config.params;
    let k = config.initial_data.mode_k.max(1);
    let mut checks = vec![
        Check::new("sbp_identity", suites::sbp_defect(64, 100, config.seed)?, 0.0, 1e-12),
        Check::new("laplacian_quadratic_dyadic", suites::quadratic_laplacian_defect(63)?, 0.0, 0.0),
        Check::new("laplacian_quadratic_config_n", suites::quadratic_laplacian_defect(config.n)?, 0.0, 1e-8),
        Check::new("laplacian_eigenpair", suites::eigenpair_defect(&grid, k), 0.0, 1e-12),
        Check::new("tridiagonal_residual", suites::tridiagonal_defect(config.n, config.seed)?, 0.0, 1e-12),
    ];

    let temporal: Vec<f64> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt| suites::acoustic_manufactured(256, dt, 1.0).map(|e| e.0))
        .collect::<Result<_, _>>()?;
    let orders = suites::observed_orders(&temporal);
    checks.push(Check::new("mms_temporal_order_min", orders.iter().cloned().fold(f64::INFINITY, f64::min), 0.9, 1.1));
    checks.push(Check::new("mms_temporal_order_max", orders.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 0.9, 1.1));
    let spatial: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| suites::acoustic_manufactured(n, 1e-6, 0.05).map(|e| e.1))
        .collect::<Result<_, _>>()?;
    let orders = suites::observed_orders(&spatial);
    checks.push(Check::new("mms_spatial_order_min", orders.iter().cloned().fold(f64::INFINITY, f64::min), 1.9, f64::INFINITY));

    let dt = config.time.dt;
    let t_end = config.time.t_end;
    let coarse = suites::modal_heat_run(&params, &grid, k, 1.0, dt, t_end)?;
    let fine = suites::modal_heat_run(&params, &grid, k, 1.0, dt / 2.0, t_end)?;
    checks.push(Check::new("modal_error_halving_ratio", coarse.max_error() / fine.max_error(), 1.7, 2.3));

    let defects = suites::modal_balance_defects(&params, grid.length(), grid.mode_gradient_factor(k), 1.0, dt, coarse.times.len() - 1);
    let gap = coarse.heat_residual[1..].iter().zip(&defects).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    checks.push(Check::new("balance_vs_modal_defect", gap, 0.0, 1e-12));
    checks.push(Check::new("energy_monotone_max_increase", suites::max_increase(&coarse.e_tau), f64::NEG_INFINITY, 0.0));
    let c = if params.tau > 0.0 { (params.ell() / params.m()).min(2.0 / params.tau) } else { params.ell() / params.m() };
    checks.push(Check::new("exponential_decay_excess", suites::decay_excess(&coarse.e_tau, c, dt), f64::NEG_INFINITY, 0.0));

    let (heat_ratio, acoustic_ratio) = suites::coupled_residual_ratios(config, dt, t_end.min(0.1))?;
    checks.push(Check::new("coupled_heat_residual_ratio", heat_ratio, 1.7, 2.3));
    checks.push(Check::new("coupled_acoustic_residual_ratio", acoustic_ratio, 1.7, 2.3));

    let identical = suites::tau_zero_paths_identical(config)?;
    checks.push(Check::new("tau_zero_bit_identity", if identical { 1.0 } else { 0.0 }, 1.0, 1.0));
    Ok(checks)
}

/// `t,numeric,oracle,abs_err` for the single-mode heat run at every output stride.
pub fn modes_csv(config: &SimConfig) -> Result<String, CliError> {
    let grid = config.grid();
    let k = config.initial_data.mode_k.max(1);
    let run = suites::modal_heat_run(&config.params, &grid, k, config.initial_data.amplitude_theta, config.time.dt, config.time.t_end)?;
    let last = run.times.len() - 1;
    let mut s = String::from("t,numeric,oracle,abs_err\n");
    for i in (0..=last).filter(|i| i % config.time.output_stride == 0 || *i == last) {
        let (a, b) = (run.numeric[i], run.oracle[i]);
        let _ = writeln!(s, "{},{},{},{}", fmt_float(run.times[i]), fmt_float(a), fmt_float(b), fmt_float((a - b).abs()));
    }
    Ok(s)
}
