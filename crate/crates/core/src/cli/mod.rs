//! Command-line front end: `solve`, `compare`, `sweep`, `verify`, `feasibility`.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 infeasible parameters,
//! 3 verification failure.

pub mod config;
pub mod render;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis;
use crate::error::Error;
use crate::mechanisms::{self, MechanismOutcome};
use crate::model::{MarketParams, Mechanism};
use crate::verify::{self, CheckKind, OracleSettings, SuiteConfig, Tolerances};
use config::ConfigFile;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "data-pricing", version, about = "Pricing mechanisms for a closed-loop data supply chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Base value of the data to the most eager end user
    #[arg(long, global = true, allow_negative_numbers = true)]
    v: Option<f64>,
    /// Lower bound of the value-realization multiplier, in [0, 1]
    #[arg(long, global = true, allow_negative_numbers = true)]
    r: Option<f64>,
    /// Value of one unit of feedback data to the provider
    #[arg(long, global = true, allow_negative_numbers = true)]
    d: Option<f64>,
    /// Revenue share kept by the data provider, in (0, 1)
    #[arg(long, global = true, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Flat key = value file; flags override its entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write output here instead of standard output
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Relative tolerance for closed-form vs oracle agreement
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    V,
    R,
    D,
    Rho,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::V => "v",
            SweepParam::R => "r",
            SweepParam::D => "d",
            SweepParam::Rho => "rho",
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one mechanism
    Solve {
        /// d, c, b1, b2, rs or the full snake_case name
        #[arg(long)]
        mechanism: Option<Mechanism>,
    },
    /// Solve every feasible mechanism and compare stakeholders
    Compare,
    /// Re-solve mechanisms along a grid of one parameter
    Sweep {
        #[arg(long, value_enum)]
        param: Option<SweepParam>,
        #[arg(long, allow_negative_numbers = true)]
        from: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        to: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Comma-separated; defaults to d,c,b1,b2 plus rs when rho is set
        #[arg(long, value_delimiter = ',')]
        mechanism: Vec<Mechanism>,
        /// Drop infeasible points instead of failing
        #[arg(long)]
        skip_infeasible: bool,
    },
    /// Randomized closed-form vs oracle and property checks
    Verify {
        #[arg(long)]
        samples: Option<usize>,
        /// Draws per Monte Carlo demand check
        #[arg(long)]
        mc_samples: Option<usize>,
        /// Side of the coarse grid for the joint bargaining search
        #[arg(long)]
        grid_n: Option<usize>,
        /// Convergence tolerance of the numerical searches
        #[arg(long)]
        oracle_tol: Option<f64>,
    },
    /// Report each mechanism's lower bound on v
    Feasibility,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl SweepPlan {
    /// Evenly spaced points, both ends included.
    pub fn points(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| if k + 1 == self.steps { self.to } else { self.from + (self.to - self.from) * k as f64 / last })
            .collect()
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Infeasible(String),
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Infeasible(_) => EXIT_INFEASIBLE,
            Failure::Verification(_) => EXIT_VERIFY,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Infeasible(m) | Failure::Verification(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible { .. } => Failure::Infeasible(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<String> for Failure {
    fn from(msg: String) -> Self {
        Failure::Usage(msg)
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let (result, output) = match execute(cli) {
        Ok((text, out, failure)) => (failure, Some((text, out))),
        Err(failure) => (Some(failure), None),
    };
    if let Some((text, out)) = output {
        let written = match &out {
            Some(path) => std::fs::write(path, text.as_bytes()).map_err(|e| format!("cannot write {}: {e}", path.display())),
            None => stdout.write_all(text.as_bytes()).map_err(|e| e.to_string()),
        };
        if let Err(msg) = written {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_USAGE;
        }
    }
    match result {
        None => EXIT_OK,
        Some(failure) => {
            let _ = writeln!(stderr, "error: {}", failure.message());
            failure.code()
        }
    }
}

struct Resolved {
    file: ConfigFile,
    global: GlobalArgs,
}

impl Resolved {
    fn pick<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(x) => Ok(Some(x)),
            None => self.file.get(key),
        }
    }

    fn params(&self) -> Result<MarketParams, Failure> {
        let need = |flag: Option<f64>, key: &str| -> Result<f64, Failure> {
            self.pick(flag, key)?.ok_or_else(|| Failure::Usage(format!("missing --{key}")))
        };
        let v = need(self.global.v, "v")?;
        let r = need(self.global.r, "r")?;
        let d = need(self.global.d, "d")?;
        Ok(MarketParams::new(v, r, d)?)
    }

    fn rho(&self) -> Result<Option<f64>, String> {
        self.pick(self.global.rho, "rho")
    }

    fn format(&self) -> Result<Format, String> {
        match self.global.format {
            Some(f) => Ok(f),
            None => match self.file.raw("format") {
                None => Ok(Format::Table),
                Some(s) => Format::from_str(s, true).map_err(|_| format!("config key `format`: invalid value `{s}`")),
            },
        }
    }
}

type Executed = (String, Option<PathBuf>, Option<Failure>);
type Rendered = (String, Option<Failure>);

fn execute(cli: Cli) -> Result<Executed, Failure> {
    let file = match &cli.global.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let cfg = Resolved { file, global: cli.global };
    let format = cfg.format()?;
    let out = match cfg.global.out.clone() {
        Some(p) => Some(p),
        None => cfg.file.raw("out").map(PathBuf::from),
    };
    let (text, failure) = match cli.command {
        Command::Solve { mechanism } => (cmd_solve(&cfg, mechanism, format)?, None),
        Command::Compare => (cmd_compare(&cfg, format)?, None),
        Command::Sweep { param, from, to, steps, mechanism, skip_infeasible } => {
            let plan = SweepPlan {
                param: match param {
                    Some(p) => p,
                    None => match cfg.file.raw("param") {
                        Some(s) => SweepParam::from_str(s, true)
                            .map_err(|_| format!("config key `param`: invalid value `{s}`"))?,
                        None => return Err(Failure::Usage("missing --param".into())),
                    },
                },
                from: cfg.pick(from, "from")?.ok_or_else(|| Failure::Usage("missing --from".into()))?,
                to: cfg.pick(to, "to")?.ok_or_else(|| Failure::Usage("missing --to".into()))?,
                steps: cfg.pick(steps, "steps")?.ok_or_else(|| Failure::Usage("missing --steps".into()))?,
            };
            let mechanisms = if mechanism.is_empty() {
                match cfg.file.raw("mechanism") {
                    Some(list) => list.split(',').map(|s| s.trim().parse()).collect::<Result<Vec<_>, _>>()?,
                    None => Vec::new(),
                }
            } else {
                mechanism
            };
            let skip = skip_infeasible || cfg.file.flag("skip-infeasible")?;
            (cmd_sweep(&cfg, &plan, mechanisms, skip, format)?, None)
        }
        Command::Verify { samples, mc_samples, grid_n, oracle_tol } => {
            cmd_verify(&cfg, samples, mc_samples, grid_n, oracle_tol, format)?
        }
        Command::Feasibility => (cmd_feasibility(&cfg, format)?, None),
    };
    Ok((text, out, failure))
}

fn cmd_solve(cfg: &Resolved, mechanism: Option<Mechanism>, format: Format) -> Result<String, Failure> {
    let mechanism = match mechanism {
        Some(m) => m,
        None => cfg.file.get("mechanism")?.ok_or_else(|| Failure::Usage("missing --mechanism".into()))?,
    };
    let params = cfg.params()?;
    let rho = cfg.rho()?;
    let outcome = mechanisms::solve(mechanism, &params, rho)?;
    Ok(match format {
        Format::Table => render::outcome_table(&outcome),
        Format::Json => render::json(&outcome),
        Format::Csv => render::outcomes_csv(std::slice::from_ref(&outcome)),
    })
}

fn cmd_compare(cfg: &Resolved, format: Format) -> Result<String, Failure> {
    let params = cfg.params()?;
    let report = analysis::compare_mechanisms(&params, cfg.rho()?)?;
    Ok(match format {
        Format::Table => render::comparison_table(&report),
        Format::Json => render::json(&report),
        Format::Csv => {
            let outcomes: Vec<MechanismOutcome> = report.entries.iter().filter_map(|e| e.outcome.clone()).collect();
            render::outcomes_csv(&outcomes)
        }
    })
}

fn cmd_sweep(
    cfg: &Resolved,
    plan: &SweepPlan,
    mut mechanisms: Vec<Mechanism>,
    skip_infeasible: bool,
    format: Format,
) -> Result<String, Failure> {
    if plan.steps < 2 {
        return Err(Failure::Usage(format!("--steps must be at least 2, got {}", plan.steps)));
    }
    if !(plan.from < plan.to) {
        return Err(Failure::Usage(format!("--from must be below --to, got {} and {}", plan.from, plan.to)));
    }
    let base_rho = cfg.rho()?;
    let base = match plan.param {
        SweepParam::Rho => cfg.params()?,
        _ => {
            // The swept coordinate may be absent; fill it with the first point.
            let fill = |flag: Option<f64>, key: &str, which: SweepParam| -> Result<f64, Failure> {
                match cfg.pick(flag, key)? {
                    Some(x) => Ok(x),
                    None if which == plan.param => Ok(plan.from),
                    None => Err(Failure::Usage(format!("missing --{key}"))),
                }
            };
            MarketParams::new(
                fill(cfg.global.v, "v", SweepParam::V)?,
                fill(cfg.global.r, "r", SweepParam::R)?,
                fill(cfg.global.d, "d", SweepParam::D)?,
            )?
        }
    };
    if mechanisms.is_empty() {
        mechanisms = vec![Mechanism::Decentralized, Mechanism::Centralized, Mechanism::BargainRatio, Mechanism::BargainBoth];
        if base_rho.is_some() || plan.param == SweepParam::Rho {
            mechanisms.push(Mechanism::RevenueSharing);
        }
    }

    let mut rows = Vec::new();
    for x in plan.points() {
        let (params, rho) = match plan.param {
            SweepParam::V => (base.with_v(x)?, base_rho),
            SweepParam::R => (base.with_r(x)?, base_rho),
            SweepParam::D => (base.with_d(x)?, base_rho),
            SweepParam::Rho => (base, Some(x)),
        };
        for &m in &mechanisms {
            let rho = if m == Mechanism::RevenueSharing { rho } else { None };
            match mechanisms::solve(m, &params, rho) {
                Ok(outcome) => rows.push((x, outcome)),
                Err(Error::Infeasible { .. }) if skip_infeasible => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(match format {
        Format::Table => render::sweep_table(plan.param.name(), &rows),
        Format::Json => {
            let outcomes: Vec<&MechanismOutcome> = rows.iter().map(|(_, o)| o).collect();
            render::json(&outcomes)
        }
        Format::Csv => {
            let outcomes: Vec<MechanismOutcome> = rows.into_iter().map(|(_, o)| o).collect();
            render::outcomes_csv(&outcomes)
        }
    })
}

fn cmd_verify(
    cfg: &Resolved,
    samples: Option<usize>,
    mc_samples: Option<usize>,
    grid_n: Option<usize>,
    oracle_tol: Option<f64>,
    format: Format,
) -> Result<Rendered, Failure> {
    let defaults = SuiteConfig::default();
    let samples = cfg.pick(samples, "samples")?.unwrap_or(defaults.samples);
    if samples == 0 {
        return Err(Failure::Usage("--samples must be at least 1".into()));
    }
    let tolerances = match cfg.pick(cfg.global.tol, "tol")? {
        Some(t) if t > 0.0 && t.is_finite() => Tolerances::uniform(t),
        Some(t) => return Err(Failure::Usage(format!("--tol must be positive, got {t}"))),
        None => defaults.tolerances,
    };
    let oracle = OracleSettings {
        tol: cfg.pick(oracle_tol, "oracle-tol")?.unwrap_or(defaults.oracle.tol),
        grid_n: cfg.pick(grid_n, "grid-n")?.unwrap_or(defaults.oracle.grid_n),
    };
    if !(oracle.tol > 0.0 && oracle.tol < 1.0) {
        return Err(Failure::Usage(format!("--oracle-tol must lie in (0, 1), got {}", oracle.tol)));
    }
    let suite = SuiteConfig {
        samples,
        seed: cfg.pick(cfg.global.seed, "seed")?.unwrap_or(defaults.seed),
        tolerances,
        oracle,
        monte_carlo_samples: cfg.pick(mc_samples, "mc-samples")?.unwrap_or(defaults.monte_carlo_samples),
    };
    let report = verify::run_suite(&suite).map_err(|e| Failure::Usage(e.to_string()))?;

    let (prop_ok, prop_total) = report.tally(CheckKind::Property);
    let (mc_ok, mc_total) = report.tally(CheckKind::MonteCarlo);
    let headline = format!(
        "{}/{} oracle matches, {}",
        report.oracle_matches(),
        report.samples,
        if prop_ok == prop_total { "all orderings hold".to_string() } else { format!("{} property checks failed", prop_total - prop_ok) }
    );
    let text = match format {
        Format::Json => render::json(&report),
        Format::Table | Format::Csv => {
            let mut s = format!("{headline}\n");
            s.push_str(&format!("properties: {prop_ok}/{prop_total} passed\n"));
            s.push_str(&format!("monte carlo: {mc_ok}/{mc_total} within {} standard errors\n", verify::MONTE_CARLO_SIGMAS));
            for f in report.failures() {
                let p = &f.params;
                s.push_str(&format!(
                    "FAIL sample {} {} at v={} r={} d={}: {}\n",
                    f.sample,
                    f.name,
                    render::float_field(p.v()),
                    render::float_field(p.r()),
                    render::float_field(p.d()),
                    f.detail
                ));
            }
            s
        }
    };
    let failure = (!report.all_passed())
        .then(|| Failure::Verification(format!("{} of {} checks failed", report.failures().count(), report.checks.len())));
    Ok((text, failure))
}

fn cmd_feasibility(cfg: &Resolved, format: Format) -> Result<String, Failure> {
    let report = cfg.params()?.check_feasibility();
    Ok(match format {
        Format::Table => render::feasibility_table(&report),
        Format::Json => render::json(&report),
        Format::Csv => render::feasibility_csv(&report),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (u8, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("data-pricing").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn sweep_points_hit_both_ends() {
        let plan = SweepPlan { param: SweepParam::R, from: 0.0, to: 0.6, steps: 7 };
        let pts = plan.points();
        assert_eq!(pts.len(), 7);
        assert_eq!(pts[0], 0.0);
        assert_eq!(pts[6], 0.6);
        assert!((pts[3] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_capture(&["solve", "--mechanism", "zz", "--v", "1", "--r", "0", "--d", "0"]).0, 1);
        assert_eq!(run_capture(&["solve", "--mechanism", "d", "--r", "0", "--d", "0"]).0, 1);
        assert_eq!(run_capture(&["solve", "--mechanism", "d", "--v", "1", "--r", "1.5", "--d", "0"]).0, 1);
        assert_eq!(run_capture(&["sweep", "--param", "r", "--from", "1", "--to", "0", "--steps", "3", "--v", "1", "--d", "0"]).0, 1);
        assert_eq!(run_capture(&["bogus"]).0, 1);
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("sweep"));
    }

    #[test]
    fn infeasible_names_condition() {
        let (code, _, err) = run_capture(&["solve", "--mechanism", "b2", "--v", "3", "--r", "0.5", "--d", "1"]);
        assert_eq!(code, 2);
        assert!(err.contains("v > 6d/(1+r) = 4"), "{err}");
    }

    #[test]
    fn flags_override_config_file() {
        let dir = std::env::temp_dir().join(format!("data-pricing-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("market.cfg");
        std::fs::write(&path, "v = 10\nr = 0.5\nd = 1\nmechanism = b1\nformat = json\n").unwrap();
        let p = path.to_str().unwrap();

        let (code, out, _) = run_capture(&["solve", "--config", p]);
        assert_eq!(code, 0);
        let o: MechanismOutcome = serde_json::from_str(&out).unwrap();
        assert_eq!(o.mechanism, Mechanism::BargainRatio);

        let (code, out, _) = run_capture(&["solve", "--config", p, "--mechanism", "c", "--v", "20", "--format", "table"]);
        assert_eq!(code, 0);
        assert!(out.contains("mechanism=centralized\n") && out.contains("v=20.0000\n"), "{out}");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
