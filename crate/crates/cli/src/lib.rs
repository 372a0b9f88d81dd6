//! Command-line front end: single-point evaluation, grid sweeps written as
//! CSV, and the validation suite.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use relaylab::fading::{db_to_linear, SessionSchedule};
use relaylab::oracle::SampleConfig;
use relaylab::strategies::{
    evaluate, registry, EvalOptions, RatePoint, StrategySpec, DEFAULT_CF_SESSIONS,
};
use relaylab::validate::{validate, Level, ValidationReport};
use relaylab::{CoopMode, PowerConfig};

pub const CSV_HEADER: &str =
    "strategy,alloc,ps_db,pr_db,coop_mode,rate,units,stderr,n_samples,seed,warnings";

pub const DEFAULT_SEED: u64 = 1;

/// Strategies behind the `bounds` shorthand of `--strategies`.
pub const BOUNDS: [&str; 4] = [
    "bound:outage_lb",
    "bound:broadcast_lb",
    "bound:outage_ub",
    "bound:broadcast_ub",
];

#[derive(Debug, Parser)]
#[command(
    name = "relaylab",
    version,
    about = "Broadcast-approach average rates with two cooperating receivers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one strategy at one operating point, as JSON.
    Eval(EvalArgs),
    /// Evaluate strategies over a dB grid, as CSV.
    Sweep(SweepArgs),
    /// Run the validation suite.
    Validate(ValidateArgs),
    /// List the registered strategy names.
    List,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Nats,
    Bits,
}

impl Units {
    pub fn as_str(self) -> &'static str {
        match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        }
    }

    pub fn convert(self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats / std::f64::consts::LN_2,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SamplingArgs {
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Master seed of the fading sampler.
    #[arg(long, env = "RELAYLAB_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Equal-power sessions of multi-session CF.
    #[arg(long, default_value_t = DEFAULT_CF_SESSIONS)]
    pub cf_sessions: usize,
}

impl SamplingArgs {
    fn options(&self) -> Result<EvalOptions, CliError> {
        if self.cf_sessions == 0 {
            return Err(CliError::config("--cf-sessions must be positive"));
        }
        let mut opts = EvalOptions::new(SampleConfig::new(self.samples, self.seed)?);
        opts.cf_schedule = SessionSchedule::Uniform(self.cf_sessions);
        Ok(opts)
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Strategy name, `family:variant[@alloc][+rte]`.
    #[arg(long)]
    pub strategy: String,
    /// Source power in dB.
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pub ps_db: f64,
    /// Relay power relative to the source power, in dB [default: 0].
    #[arg(long, conflicts_with = "pr_db", allow_hyphen_values = true)]
    pub pr_rel_db: Option<f64>,
    /// Absolute relay power in dB.
    #[arg(long, allow_hyphen_values = true)]
    pub pr_db: Option<f64>,
    /// Cooperation link, `nb` or `wb`.
    #[arg(long, default_value = "nb")]
    pub coop_mode: String,
    #[arg(long, value_enum, default_value_t = Units::Nats)]
    pub units: Units,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    #[value(name = "ps_db")]
    PsDb,
    #[value(name = "pr_rel_db")]
    PrRelDb,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: Axis,
    #[arg(long, allow_hyphen_values = true)]
    pub start: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub stop: f64,
    #[arg(long)]
    pub step: f64,
    /// Source power in dB when sweeping `pr_rel_db`.
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pub ps_db: f64,
    /// Relative relay power in dB when sweeping `ps_db`.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub pr_rel_db: f64,
    /// Comma-separated strategy names; `bounds` adds the four broadcasting
    /// and outage bounds.
    #[arg(long, value_delimiter = ',', required = true)]
    pub strategies: Vec<String>,
    /// Layerings to cross with every layered strategy that names none.
    #[arg(long, value_delimiter = ',')]
    pub allocs: Vec<String>,
    #[arg(long, default_value = "nb")]
    pub coop_mode: String,
    #[arg(long, value_enum, default_value_t = Units::Nats)]
    pub units: Units,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    Fast,
    Full,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long, value_enum, default_value_t = LevelArg::Fast)]
    pub level: LevelArg,
    #[arg(long, env = "RELAYLAB_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Print the JSON report instead of the text summary.
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON report to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Numerical,
    Validation,
    Io,
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub error: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            error: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.error {
            ErrorKind::Validation => 1,
            ErrorKind::Config => 2,
            ErrorKind::Numerical | ErrorKind::Io => 3,
        }
    }
}

impl From<relaylab::Error> for CliError {
    fn from(e: relaylab::Error) -> Self {
        let error = if e.is_config() {
            ErrorKind::Config
        } else {
            ErrorKind::Numerical
        };
        CliError {
            error,
            message: e.to_string(),
        }
    }
}

const BROKEN_PIPE: &str = "broken pipe";

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        let message = if e.kind() == io::ErrorKind::BrokenPipe {
            BROKEN_PIPE.into()
        } else {
            e.to_string()
        };
        CliError {
            error: ErrorKind::Io,
            message,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError {
            error: ErrorKind::Io,
            message: e.to_string(),
        }
    }
}

/// Formats with nine significant digits, trailing zeros dropped.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    let s = if (-5..9).contains(&exp) {
        format!("{:.*}", (8 - exp).max(0) as usize, x)
    } else {
        format!("{x:.8e}")
    };
    trim_zeros(&s)
}

fn trim_zeros(s: &str) -> String {
    let (mantissa, exp) = match s.find('e') {
        Some(k) => s.split_at(k),
        None => (s, ""),
    };
    let mantissa = if mantissa.contains('.') {
        mantissa.trim_end_matches('0').trim_end_matches('.')
    } else {
        mantissa
    };
    format!("{mantissa}{exp}")
}

/// An evaluated point as reported by `eval`.
#[derive(Debug, Clone, Serialize)]
pub struct EvalOutput {
    pub strategy: String,
    pub alloc: Option<String>,
    pub ps_db: f64,
    pub pr_db: f64,
    pub coop_mode: CoopMode,
    pub rate: f64,
    pub units: Units,
    pub stderr: Option<f64>,
    pub n_samples: Option<usize>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub warnings: Vec<String>,
}

impl EvalOutput {
    fn new(p: RatePoint, ps_db: f64, pr_db: f64, units: Units) -> Self {
        EvalOutput {
            strategy: p.strategy,
            alloc: p.alloc,
            ps_db,
            pr_db,
            coop_mode: p.coop_mode,
            rate: units.convert(p.rate),
            units,
            stderr: p.stderr.map(|s| units.convert(s)),
            n_samples: p.n_samples,
            seed: p.seed,
            threshold: p.threshold,
            warnings: p.warnings,
        }
    }
}

fn parse_mode(s: &str) -> Result<CoopMode, CliError> {
    Ok(s.parse::<CoopMode>()?)
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let spec: StrategySpec = args.strategy.parse()?;
    let mode = parse_mode(&args.coop_mode)?;
    let pr_db = match args.pr_db {
        Some(db) => db,
        None => args.ps_db + args.pr_rel_db.unwrap_or(0.0),
    };
    let cfg = PowerConfig::new(db_to_linear(args.ps_db), db_to_linear(pr_db), mode)?;
    let point = evaluate(&spec, &cfg, &args.sampling.options()?)?;
    let json = serde_json::to_string_pretty(&EvalOutput::new(point, args.ps_db, pr_db, args.units))
        .map_err(|e| CliError {
            error: ErrorKind::Io,
            message: e.to_string(),
        })?;
    writeln!(out, "{json}")?;
    Ok(())
}

/// Grid values `start + k step` up to `stop`, computed without
/// accumulating rounding.
pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(start.is_finite() && stop.is_finite() && step > 0.0 && step.is_finite()) {
        return Err(CliError::config(format!(
            "invalid sweep range {start}..{stop} step {step}"
        )));
    }
    if start > stop {
        return Err(CliError::config(format!(
            "sweep start {start} exceeds stop {stop}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

/// Expands `bounds` and crosses layered strategies without an explicit
/// layering with `allocs`, keeping the given order.
pub fn expand_strategies(
    names: &[String],
    allocs: &[String],
) -> Result<Vec<StrategySpec>, CliError> {
    let allocs = allocs
        .iter()
        .map(|a| a.parse())
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    for name in names.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        if name == "bounds" {
            for b in BOUNDS {
                out.push(b.parse()?);
            }
            continue;
        }
        let spec: StrategySpec = name.parse()?;
        if spec.alloc.is_none() && spec.default_alloc().is_some() && !allocs.is_empty() {
            for &a in &allocs {
                out.push(StrategySpec {
                    alloc: Some(a),
                    ..spec
                });
            }
        } else {
            out.push(spec);
        }
    }
    if out.is_empty() {
        return Err(CliError::config("no strategies given"));
    }
    Ok(out)
}

/// One CSV row; a failed evaluation leaves the rate empty and records the
/// error among the warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub strategy: String,
    pub alloc: Option<String>,
    pub ps_db: f64,
    pub pr_db: f64,
    pub coop_mode: CoopMode,
    pub rate: Option<f64>,
    pub stderr: Option<f64>,
    pub n_samples: Option<usize>,
    pub seed: Option<u64>,
    pub warnings: Vec<String>,
}

pub fn sweep_rows(args: &SweepArgs) -> Result<Vec<Row>, CliError> {
    let specs = expand_strategies(&args.strategies, &args.allocs)?;
    let mode = parse_mode(&args.coop_mode)?;
    let opts = args.sampling.options()?;
    let points: Vec<(f64, f64)> = grid(args.start, args.stop, args.step)?
        .into_iter()
        .map(|x| match args.axis {
            Axis::PsDb => (x, x + args.pr_rel_db),
            Axis::PrRelDb => (args.ps_db, args.ps_db + x),
        })
        .collect();
    let jobs: Vec<(&StrategySpec, (f64, f64))> = specs
        .iter()
        .flat_map(|s| points.iter().map(move |&p| (s, p)))
        .collect();
    jobs.into_par_iter()
        .map(|(spec, (ps_db, pr_db))| {
            let cfg = PowerConfig::new(db_to_linear(ps_db), db_to_linear(pr_db), mode)?;
            let row = match evaluate(spec, &cfg, &opts) {
                Ok(p) => Row {
                    strategy: p.strategy,
                    alloc: p.alloc,
                    ps_db,
                    pr_db,
                    coop_mode: p.coop_mode,
                    rate: Some(args.units.convert(p.rate)),
                    stderr: p.stderr.map(|s| args.units.convert(s)),
                    n_samples: p.n_samples,
                    seed: p.seed,
                    warnings: p.warnings,
                },
                Err(e) => Row {
                    strategy: spec.to_string(),
                    alloc: spec.alloc_name().map(|a| a.as_str().to_string()),
                    ps_db,
                    pr_db,
                    coop_mode: spec.coop_mode(mode),
                    rate: None,
                    stderr: None,
                    n_samples: None,
                    seed: None,
                    warnings: vec![format!("error: {e}")],
                },
            };
            Ok(row)
        })
        .collect()
}

pub fn write_csv(rows: &[Row], units: Units, out: impl Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    let opt = |x: Option<f64>| x.map(sig9).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.strategy.clone(),
            r.alloc.clone().unwrap_or_default(),
            sig9(r.ps_db),
            sig9(r.pr_db),
            r.coop_mode.as_str().to_string(),
            opt(r.rate),
            units.as_str().to_string(),
            opt(r.stderr),
            r.n_samples.map(|n| n.to_string()).unwrap_or_default(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.warnings.join("; "),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let rows = sweep_rows(args)?;
    match &args.out {
        Some(path) => write_csv(&rows, args.units, std::fs::File::create(path)?),
        None => write_csv(&rows, args.units, out),
    }
}

pub fn render_report(r: &ValidationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "validation level {:?}, {} samples, seed {}",
        r.level, r.n_samples, r.seed
    );
    for c in &r.checks {
        let tag = match (c.passed, c.required) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "info",
        };
        let _ = writeln!(
            s,
            "[{tag}] {}: {} = {:.3e} (limit {:.3e})",
            c.suite, c.name, c.value, c.limit
        );
    }
    let form = |f: Option<String>| f.unwrap_or_else(|| "none passed".into());
    let _ = writeln!(
        s,
        "separate AF cdf integrand: {}",
        form(r.forms.sep_af_cdf.map(|f| format!("{f:?}")))
    );
    let _ = writeln!(
        s,
        "multi-session AF Z integrand: {}",
        form(r.forms.multisession_z.map(|f| format!("{f:?}")))
    );
    let failed = r.failures().count();
    let _ = writeln!(
        s,
        "{}",
        if r.passed {
            "all checks passed".to_string()
        } else {
            format!("{failed} check(s) failed")
        }
    );
    s
}

pub fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let level = match args.level {
        LevelArg::Fast => Level::Fast,
        LevelArg::Full => Level::Full,
    };
    let report = validate(level, args.seed)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError {
        error: ErrorKind::Io,
        message: e.to_string(),
    })?;
    if let Some(path) = &args.report {
        std::fs::write(path, format!("{json}\n"))?;
    }
    if args.json {
        writeln!(out, "{json}")?;
    } else {
        write!(out, "{}", render_report(&report))?;
    }
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<_> = report.failures().map(|c| c.name.clone()).collect();
        Err(CliError {
            error: ErrorKind::Validation,
            message: format!("failed checks: {}", failed.join(", ")),
        })
    }
}

pub fn cmd_list(out: &mut dyn Write) -> Result<(), CliError> {
    for spec in registry() {
        writeln!(out, "{spec}")?;
    }
    Ok(())
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Eval(a) => cmd_eval(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Validate(a) => cmd_validate(a, out),
        Command::List => cmd_list(out),
    }
}

/// Parses the arguments, runs the command and maps failures to exit codes,
/// reporting them as JSON on standard error.
pub fn main_with_args(args: impl IntoIterator<Item = std::ffi::OsString>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(&CliError::config(e.to_string().trim_end())),
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.error == ErrorKind::Io && e.message == BROKEN_PIPE => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &CliError) -> ExitCode {
    let json = serde_json::to_string(e)
        .unwrap_or_else(|_| format!("{{\"error\":\"io\",\"message\":{:?}}}", e.message));
    eprintln!("{json}");
    ExitCode::from(e.exit_code())
}
