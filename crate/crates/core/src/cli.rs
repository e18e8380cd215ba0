//! Command-line front end.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;

use crate::crmax::{brute_force_sup, CrMaxProblem, Family, GridSpec};
use crate::error::Error;
use crate::rational::{RationalTF, TfSpec};
use crate::report;
use crate::rir::{
    exact_rir_certificate, perturb_to_strict, second_order_closed_form, synthesize_marginal_stabilizer,
};
use crate::stability::nyquist_auto;
use crate::tolerance::Tolerances;

#[derive(Debug, Parser)]
#[command(name = "rir", version, about = "Robust instability radius analysis of SISO transfer functions")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// TOML file with a [tolerances] table and an optional `workers` entry.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Distance below which a root counts as lying on the imaginary axis
    #[arg(long, global = true)]
    pub tol_axis: Option<f64>,
    /// Dead band around sign decisions on margins
    #[arg(long, global = true)]
    pub tol_cond: Option<f64>,
    /// Relative gain tolerance for treating peaks as equal
    #[arg(long, global = true)]
    pub tol_peak: Option<f64>,
    /// Fixed Nyquist contour offset.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Worker threads for parameter sweeps.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(short = 'o', long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bounds, exactness certificate and stabilizer for an unstable plant.
    Analyze { input: String },
    /// Marginal all-pass stabilizer and its strictly stabilizing perturbation.
    Stabilize {
        input: String,
        /// Perturbation direction as {"num":[..],"den":[..]}.
        #[arg(long)]
        delta1: Option<String>,
    },
    /// Gain, phase and change rates on a logarithmic grid.
    Bode {
        input: String,
        #[command(flatten)]
        grid: FreqGrid,
    },
    /// Offset Nyquist curve of a loop transfer function with its crossing count.
    Nyquist {
        input: String,
        #[command(flatten)]
        grid: FreqGrid,
    },
    /// Closed-form supremum of the phase change rate against a brute-force sweep.
    Crmax {
        /// Frequency at which the phase is prescribed
        #[arg(long, allow_hyphen_values = true)]
        omega_p: f64,
        /// Prescribed phase in radians
        #[arg(long, allow_hyphen_values = true)]
        theta_p: f64,
        #[arg(long, default_value = "ap_first")]
        family: String,
        /// Evaluations per factor structure.
        #[arg(long, default_value_t = 1_000_000)]
        grid: usize,
    },
    /// Closed-form table of 1/(s^2 + p s + q) over a rectangular grid.
    Sweep2nd {
        #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
        p_min: f64,
        #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
        p_max: f64,
        #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
        q_min: f64,
        #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
        q_max: f64,
        #[arg(long, default_value_t = 50)]
        n: usize,
    },
}

#[derive(Debug, Clone, Copy, Args)]
pub struct FreqGrid {
    #[arg(long, default_value_t = 1e-3)]
    pub w_min: f64,
    #[arg(long, default_value_t = 1e3)]
    pub w_max: f64,
    #[arg(long, default_value_t = 400)]
    pub points: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    tolerances: Tolerances,
    workers: Option<usize>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidInput(_) | Error::DomainViolation(_) => 1,
            Error::NotInG(_) | Error::PipFailed | Error::ConditionFailed { .. } | Error::NotDagger => 2,
            _ => 3,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn read_text(input: &str) -> Result<String, CliError> {
    if input.trim_start().starts_with('{') {
        return Ok(input.to_string());
    }
    if input == "-" {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::usage(format!("reading standard input: {e}")))?;
        return Ok(s);
    }
    fs::read_to_string(input).map_err(|e| CliError::usage(format!("reading {input}: {e}")))
}

/// Parse `{"num":[..],"den":[..]}` from inline JSON, a file path, or `-` for stdin.
pub fn load_system(input: &str, tol: Tolerances) -> Result<RationalTF, CliError> {
    let text = read_text(input)?;
    let spec: TfSpec =
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("malformed transfer function: {e}")))?;
    let f = RationalTF::try_from(spec).map_err(CliError::from)?;
    Ok(f.with_tolerances(tol))
}

fn resolve_tolerances(g: &GlobalOpts) -> Result<(Tolerances, Option<usize>), CliError> {
    let cfg = match &g.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("reading {}: {e}", path.display())))?;
            toml::from_str::<ConfigFile>(&text).map_err(|e| CliError::usage(format!("config: {e}")))?
        }
        None => ConfigFile::default(),
    };
    let mut tol = cfg.tolerances;
    if let Some(x) = g.tol_axis {
        tol.axis = x;
    }
    if let Some(x) = g.tol_cond {
        tol.cond = x;
    }
    if let Some(x) = g.tol_peak {
        tol.peak = x;
    }
    if let Some(x) = g.epsilon {
        if !(x > 0.0 && x < 1.0) {
            return Err(CliError::usage(format!("epsilon {x} outside (0, 1)")));
        }
        tol.epsilon = Some(x);
    }
    tol.validate().map_err(CliError::usage)?;
    Ok((tol, g.workers.or(cfg.workers)))
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::InvalidInput(format!("writing {}: {e}", p.display())).into()),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError {
                    code: 3,
                    message: format!("writing output: {e}"),
                })
        }
    }
}

fn check_grid(g: &FreqGrid) -> Result<Vec<f64>, CliError> {
    if !(g.w_min > 0.0 && g.w_max > g.w_min && g.points >= 2) {
        return Err(CliError::usage("frequency grid needs 0 < w-min < w-max and at least 2 points"));
    }
    Ok(report::log_grid(g.w_min, g.w_max, g.points))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Run one command and return the text to emit.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let (tol, workers) = resolve_tolerances(&cli.global)?;
    if let Some(n) = workers {
        // A pool may already exist when called repeatedly in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match &cli.command {
        Command::Analyze { input } => {
            let g = load_system(input, tol)?;
            let r = exact_rir_certificate(&g)?;
            Ok(report::to_pretty(&report::analyze_json(&g, &r)))
        }
        Command::Stabilize { input, delta1 } => {
            let g = load_system(input, tol)?;
            let d1 = delta1.as_deref().map(|d| load_system(d, tol)).transpose()?;
            let st = synthesize_marginal_stabilizer(&g)?;
            let strict = perturb_to_strict(&g, &st, d1.as_ref())?;
            Ok(report::to_pretty(&report::stabilize_json(&g, &st, &strict)))
        }
        Command::Bode { input, grid } => {
            let f = load_system(input, tol)?;
            Ok(report::bode_csv(&f, &check_grid(grid)?)?)
        }
        Command::Nyquist { input, grid } => {
            let l = load_system(input, tol)?;
            let omegas = check_grid(grid)?;
            let counts = nyquist_auto(&l)?;
            Ok(report::nyquist_csv(&l, &counts, &omegas))
        }
        Command::Crmax {
            omega_p,
            theta_p,
            family,
            grid,
        } => {
            let family: Family = family.parse()?;
            let prob = CrMaxProblem::new(*omega_p, *theta_p, family)?;
            let r = brute_force_sup(&prob, &GridSpec::with_budget(*grid))?;
            Ok(report::to_pretty(&report::crmax_json(&prob, &r)))
        }
        Command::Sweep2nd {
            p_min,
            p_max,
            q_min,
            q_max,
            n,
        } => {
            if *n == 0 || p_min > p_max || q_min > q_max {
                return Err(CliError::usage("empty (p, q) grid"));
            }
            let ps = linspace(*p_min, *p_max, *n);
            let qs = linspace(*q_min, *q_max, *n);
            let pairs: Vec<(f64, f64)> = ps
                .iter()
                .flat_map(|&p| qs.iter().filter(|q| **q != 0.0).map(move |&q| (p, q)))
                .collect();
            let records = pairs
                .par_iter()
                .map(|&(p, q)| second_order_closed_form(p, q))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(report::sweep2nd_csv(&records, &tol))
        }
    }
}

/// Parse arguments, run, write output and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = run(&cli).and_then(|text| emit(cli.global.output.as_deref(), &text));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("rir").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn analyze_inline_system() {
        let out = run(&parse(&["analyze", r#"{"num":[1],"den":[1,-1,1]}"#])).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["exactness"]["status"], "exact");
        assert!((v["bounds"]["rho_p"].as_f64().unwrap() - 0.866025403784).abs() < 1e-11);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(&parse(&["analyze", r#"{"num":[1],"den":[1,1]}"#])).unwrap_err().code, 2);
        assert_eq!(run(&parse(&["analyze", r#"{"num":[1],"den":"x"}"#])).unwrap_err().code, 1);
        assert_eq!(run(&parse(&["analyze", r#"{"num":[1],"den":[0]}"#])).unwrap_err().code, 1);
        assert_eq!(run(&parse(&["--tol-cond", "2", "analyze", "-"])).unwrap_err().code, 1);
    }

    #[test]
    fn negative_flag_values() {
        let cli = parse(&["crmax", "--omega-p", "1", "--theta-p", "-1.5707963267948966", "--grid", "10000"]);
        let v: serde_json::Value = serde_json::from_str(&run(&cli).unwrap()).unwrap();
        assert!((v["closed_form"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_rows() {
        let out = run(&parse(&["sweep2nd", "--n", "4"])).unwrap();
        assert_eq!(out.lines().filter(|l| !l.starts_with('#')).count(), 17);
    }
}
