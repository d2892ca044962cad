//! The `phase-amp` command line.
//!
//! Physical inputs are given in milliradians at this boundary and converted
//! to radians before reaching the library. Every subcommand prints a short
//! text report; with `--out DIR` it also writes its CSV, JSON and SVG
//! artifacts there (optionally restricted by `--format`). `--format json`
//! without `--out` prints the JSON report instead of the text one.
//!
//! `--config PATH` reads `key = value` lines whose keys are long flag names
//! of the chosen subcommand; flags on the command line take precedence and
//! unknown keys are rejected.
//!
//! Exit statuses: 0 success, 2 parameter error, 3 I/O error, 4 failed
//! Monte Carlo agreement check.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::apparatus::{
    closed_form_amplified_phase, compare_schemes, measured_point, run_amplifier, uniform_beta_grid,
    AmplifierConfig, BalanceMode, MEASURED_GAIN_FLOOR,
};
use crate::error::Error;
use crate::fitting::{measure_amplified_phase, FitResult, ScanMode, ScanPattern};
use crate::jones::Extinction;
use crate::metrology::{
    analytic_uncertainty, mc_uncertainty, minimum_measurable_phase, scenario_uncertainty_full,
    sql_comparison, ErrorModel, SqlComparison, UncertaintyReport, UncertaintyScenario,
    AGREEMENT_SIGMAS,
};
use crate::plot::{Plot, Series};
use crate::table::{format_sig12, Table};

pub const SCHEMA: &str = "phase-amp/1";

const MRAD: f64 = 1e-3;

pub const EXIT_OK: u8 = 0;
pub const EXIT_PARAM: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_CHECK: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Param(String),
    Io(String),
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Param(_) => EXIT_PARAM,
            CliError::Io(_) => EXIT_IO,
            CliError::Check(_) => EXIT_CHECK,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Param(m) | CliError::Io(m) | CliError::Check(m) => m,
        }
    }
}

fn flag_for(param: &str) -> &'static str {
    match param {
        "phi" | "true_phi" => "--phi-mrad",
        "epsilon" | "alpha" => "--eps-mrad",
        "rho" => "--rho-mrad",
        "sample_size" | "N" => "--sample-size",
        "n" => "--n",
        "trials" => "--trials",
        "beta_grid" | "points" => "--points",
        "shots_per_point" => "--shots",
        "rng_seed" => "--seed",
        "visibility" => "--visibility",
        "extinction_transmitted" => "--extinction-transmitted",
        "extinction_reflected" => "--extinction-reflected",
        _ => "(input)",
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        match &err {
            Error::InvalidParameter { name, .. } => {
                CliError::Param(format!("{}: {err}", flag_for(name)))
            }
            Error::Divergent { .. } => CliError::Param(format!("--phi-mrad: {err}")),
            _ => CliError::Param(err.to_string()),
        }
    }
}

fn io_error(path: &Path, err: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {err}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Balance {
    Exact,
    Analytic,
}

impl From<Balance> for BalanceMode {
    fn from(b: Balance) -> Self {
        match b {
            Balance::Exact => BalanceMode::ExactNumeric,
            Balance::Analytic => BalanceMode::Analytic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    Single,
    Noon,
    Weak,
    NoonWeak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Phi,
    Eps,
}

#[derive(Debug, Parser)]
#[command(name = "phase-amp", version, about = "Weak-measurement phase amplification toolkit")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Directory for CSV/JSON/SVG artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Restrict written artifacts to one format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Seed for every sampled quantity.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// key = value file with defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Amplified phase, gain and success probability for one setting.
    Amplify(AmplifyArgs),
    /// Scan reference and signal fringes, fit them and difference the phases.
    Scan(ScanArgs),
    /// Amplified phase over a grid of initial phases and rotation offsets.
    Curves(CurvesArgs),
    /// Phase-uncertainty budget, closed form versus Monte Carlo.
    Uncertainty(UncertaintyArgs),
    /// Success probability of the amplifier versus the standard weak-value scheme.
    CompareSchemes(CompareArgs),
}

#[derive(Debug, Args)]
struct AmplifierFlags {
    /// Initial phase shift, mrad.
    #[arg(long, allow_hyphen_values = true)]
    phi_mrad: f64,
    /// Rotation offset from pi/4, mrad.
    #[arg(long, allow_hyphen_values = true)]
    eps_mrad: f64,
    #[arg(long, value_enum, default_value = "exact")]
    balance: Balance,
    /// Extinction ratio of the transmitted-arm polarizer (ideal if omitted).
    #[arg(long)]
    extinction_transmitted: Option<f64>,
    /// Extinction ratio of the reflected-arm polarizer (ideal if omitted).
    #[arg(long)]
    extinction_reflected: Option<f64>,
}

impl AmplifierFlags {
    fn config(&self) -> Result<AmplifierConfig, CliError> {
        let ext = |e: Option<f64>| e.map_or(Extinction::Ideal, Extinction::Ratio);
        let config = AmplifierConfig::new(self.phi_mrad * MRAD, self.eps_mrad * MRAD)?
            .with_balance(self.balance.into())
            .with_extinctions(ext(self.extinction_transmitted), ext(self.extinction_reflected));
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
struct AmplifyArgs {
    #[command(flatten)]
    amp: AmplifierFlags,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[command(flatten)]
    amp: AmplifierFlags,
    /// Analyzer phases per pattern, evenly spaced over 2 pi.
    #[arg(long, default_value_t = 36)]
    points: usize,
    /// Detection trials per analyzer phase (exact probabilities if omitted).
    #[arg(long)]
    shots: Option<u64>,
    /// Fringe contrast in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    visibility: f64,
}

#[derive(Debug, Args)]
struct CurvesArgs {
    /// Which parameter runs along the horizontal axis.
    #[arg(long, value_enum, default_value = "phi")]
    x: Axis,
    /// Initial phases, mrad: `a,b,c` or `start:stop:count`.
    #[arg(long, allow_hyphen_values = true)]
    phi_mrad: Option<String>,
    /// Rotation offsets, mrad: `a,b,c` or `start:stop:count`.
    #[arg(long, allow_hyphen_values = true)]
    eps_mrad: Option<String>,
}

#[derive(Debug, Args)]
struct UncertaintyArgs {
    #[arg(long, value_enum, default_value = "single")]
    scenario: Scenario,
    /// Photon number of the N00N state.
    #[arg(long, default_value_t = 1)]
    n: u32,
    /// Rotation offset for weak-measurement scenarios, mrad.
    #[arg(long)]
    eps_mrad: Option<f64>,
    /// Standard deviation of the systematic phase error, mrad.
    #[arg(long, default_value_t = 0.0)]
    rho_mrad: f64,
    /// Total number of probe photons N.
    #[arg(long, default_value_t = 1_000_000)]
    sample_size: u64,
    /// Phase under test, mrad (default: the scenario's optimal phase).
    #[arg(long, allow_hyphen_values = true)]
    phi_mrad: Option<f64>,
    /// Monte Carlo runs; Monte Carlo is skipped unless --seed is given.
    #[arg(long, default_value_t = 2000)]
    trials: usize,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long, allow_hyphen_values = true)]
    phi_mrad: f64,
    #[arg(long, allow_hyphen_values = true)]
    eps_mrad: f64,
}

/// Where artifacts go and which formats are wanted.
struct Outputs {
    dir: Option<PathBuf>,
    format: Option<Format>,
}

impl Outputs {
    fn wants(&self, format: Format) -> bool {
        self.dir.is_some() && self.format.is_none_or(|f| f == format)
    }

    fn json_to_stdout(&self) -> bool {
        self.dir.is_none() && self.format == Some(Format::Json)
    }

    fn check_supported(&self, command: &str, supported: &[Format]) -> Result<(), CliError> {
        match self.format {
            Some(f) if !supported.contains(&f) => Err(CliError::Param(format!(
                "--format: {command} does not produce {f:?} output"
            ))),
            _ => Ok(()),
        }
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| io_error(&path, e))
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'static str,
    command: &'a str,
    result: T,
}

fn to_json<T: Serialize>(command: &str, result: T) -> String {
    let envelope = Envelope { schema: SCHEMA, command, result };
    let mut s = serde_json::to_string_pretty(&envelope).expect("report serializes");
    s.push('\n');
    s
}

fn mrad(x: f64) -> String {
    format_sig12(x / MRAD)
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        writeln!($out, $($arg)*).map_err(|e| CliError::Io(format!("stdout: {e}")))
    };
}

// ---- amplify ---------------------------------------------------------------

#[derive(Debug, Serialize)]
struct MeasuredReference {
    measured_phase_rad: f64,
    measured_gain: f64,
    theory_over_measured: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    measured_gain_floor: Option<f64>,
}

#[derive(Debug, Serialize)]
struct AmplifyReport {
    phi_rad: f64,
    epsilon_rad: f64,
    alpha_rad: f64,
    balance: &'static str,
    closed_form_phase_rad: f64,
    pipeline_phase_rad: f64,
    small_angle_phase_rad: f64,
    gain: Option<f64>,
    success_probability: f64,
    nominal_success_probability: f64,
    arm_transmission_h: f64,
    arm_transmission_v: f64,
    measured_reference: Option<MeasuredReference>,
}

fn cmd_amplify(args: &AmplifyArgs, outputs: &Outputs, out: &mut dyn Write) -> Result<(), CliError> {
    outputs.check_supported("amplify", &[Format::Json])?;
    let config = args.amp.config()?;
    let outcome = run_amplifier(&config)?;
    let closed = closed_form_amplified_phase(config.phi, config.epsilon)?;
    let gain = (config.phi != 0.0).then(|| outcome.amplified_phase / config.phi);
    let measured = measured_point(config.phi, config.epsilon).map(|m| MeasuredReference {
        measured_phase_rad: m.measured_phase,
        measured_gain: m.measured_phase / m.phi,
        theory_over_measured: closed / m.measured_phase,
        measured_gain_floor: (m.phi == 0.26e-3).then_some(MEASURED_GAIN_FLOOR),
    });
    let report = AmplifyReport {
        phi_rad: config.phi,
        epsilon_rad: config.epsilon,
        alpha_rad: config.alpha(),
        balance: match config.balance {
            BalanceMode::Analytic => "analytic",
            BalanceMode::ExactNumeric => "exact",
        },
        closed_form_phase_rad: closed,
        pipeline_phase_rad: outcome.amplified_phase,
        small_angle_phase_rad: config.phi / (2.0 * config.epsilon),
        gain,
        success_probability: outcome.success_probability,
        nominal_success_probability: 2.0 * config.epsilon * config.epsilon,
        arm_transmission_h: outcome.arm_transmissions.0,
        arm_transmission_v: outcome.arm_transmissions.1,
        measured_reference: measured,
    };

    let json = to_json("amplify", &report);
    if outputs.wants(Format::Json) {
        outputs.write("amplify.json", &json)?;
    }
    if outputs.json_to_stdout() {
        return say!(out, "{}", json.trim_end());
    }
    say!(out, "phi                  {} mrad", mrad(report.phi_rad))?;
    say!(out, "epsilon              {} mrad", mrad(report.epsilon_rad))?;
    say!(out, "phi' closed form     {} mrad", mrad(report.closed_form_phase_rad))?;
    say!(out, "phi' pipeline        {} mrad", mrad(report.pipeline_phase_rad))?;
    say!(out, "phi/(2 eps)          {} mrad", mrad(report.small_angle_phase_rad))?;
    match report.gain {
        Some(g) => say!(out, "gain                 {}", format_sig12(g))?,
        None => say!(out, "gain                 n/a (phi = 0)")?,
    }
    say!(
        out,
        "success probability  {} (2 eps^2 = {})",
        format_sig12(report.success_probability),
        format_sig12(report.nominal_success_probability)
    )?;
    if let Some(m) = &report.measured_reference {
        say!(
            out,
            "measured reference   {} mrad, gain {} (theory/measured {})",
            mrad(m.measured_phase_rad),
            format_sig12(m.measured_gain),
            format_sig12(m.theory_over_measured)
        )?;
        if let Some(floor) = m.measured_gain_floor {
            say!(out, "measured gain floor  more than {floor}")?;
        }
    }
    Ok(())
}

// ---- scan ------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct FitSummary {
    pub phase_rad: f64,
    pub phase_std_rad: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub visibility: f64,
    pub residual_rms: f64,
}

impl From<&FitResult> for FitSummary {
    fn from(f: &FitResult) -> Self {
        Self {
            phase_rad: f.phase,
            phase_std_rad: f.phase_std(),
            amplitude: f.amplitude,
            offset: f.offset,
            visibility: f.visibility,
            residual_rms: f.residual_rms,
        }
    }
}

#[derive(Debug, Serialize)]
struct ScanReport {
    phi_rad: f64,
    epsilon_rad: f64,
    points: usize,
    mode: &'static str,
    shots_per_point: Option<u64>,
    seed: Option<u64>,
    visibility: f64,
    reference_fit: FitSummary,
    signal_fit: FitSummary,
    phase_shift_rad: f64,
    phase_shift_mrad: f64,
    closed_form_phase_rad: f64,
}

fn pattern_table(pattern: &ScanPattern) -> Table {
    let mut table = Table::new(["beta_rad", "value"]);
    for p in pattern.points() {
        table.push(vec![p.beta, p.value]);
    }
    table
}

/// Rebuilds a pattern from a scan CSV (`beta_rad,value`).
pub fn pattern_from_csv(text: &str, mode: ScanMode) -> crate::Result<ScanPattern> {
    let table = Table::parse_csv(text)?;
    let (Some(beta), Some(value)) = (table.column("beta_rad"), table.column("value")) else {
        return Err(Error::invalid("csv", "expected columns beta_rad,value"));
    };
    let points = beta
        .into_iter()
        .zip(value)
        .map(|(beta, value)| crate::fitting::ScanPoint { beta, value })
        .collect();
    ScanPattern::new(points, mode)
}

fn fringe_plot(report: &ScanReport, scan: &crate::fitting::DifferentialScan) -> Plot {
    let scale = report.shots_per_point.map_or(1.0, |s| 1.0 / s as f64);
    let data = |pattern: &ScanPattern| {
        pattern
            .points()
            .iter()
            .map(|p| (p.beta, p.value * scale))
            .collect::<Vec<_>>()
    };
    let curve = |fit: &FitResult| {
        (0..=360)
            .map(|k| {
                let beta = 2.0 * std::f64::consts::PI * k as f64 / 360.0;
                (beta, fit.evaluate(beta))
            })
            .collect::<Vec<_>>()
    };
    let mut plot = Plot::new(
        format!(
            "Fringes: phi = {} mrad, eps = {} mrad",
            mrad(report.phi_rad),
            mrad(report.epsilon_rad)
        ),
        "analyzer phase beta (rad)",
        "detection probability",
    );
    plot.add(Series::markers("reference data", data(&scan.reference), 0));
    plot.add(Series::line("reference fit", curve(&scan.reference_fit), 0));
    plot.add(Series::markers("signal data", data(&scan.signal), 1));
    plot.add(Series::line("signal fit", curve(&scan.signal_fit), 1));
    plot
}

fn cmd_scan(args: &ScanArgs, seed: Option<u64>, outputs: &Outputs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = args.amp.config()?.with_visibility(args.visibility);
    config.validate()?;
    if args.points == 0 {
        return Err(CliError::Param("--points: must be positive".into()));
    }
    if args.shots.is_some() && seed.is_none() {
        return Err(CliError::Param("--seed: required when --shots is given".into()));
    }
    let grid = uniform_beta_grid(args.points);
    let scan = measure_amplified_phase(&config, &grid, args.shots, seed)?;
    let report = ScanReport {
        phi_rad: config.phi,
        epsilon_rad: config.epsilon,
        points: args.points,
        mode: if args.shots.is_some() { "counts" } else { "exact" },
        shots_per_point: args.shots,
        seed: args.shots.and(seed),
        visibility: config.visibility,
        reference_fit: (&scan.reference_fit).into(),
        signal_fit: (&scan.signal_fit).into(),
        phase_shift_rad: scan.phase_shift,
        phase_shift_mrad: scan.phase_shift / MRAD,
        closed_form_phase_rad: closed_form_amplified_phase(config.phi, config.epsilon)?,
    };

    if outputs.wants(Format::Csv) {
        outputs.write("reference.csv", &pattern_table(&scan.reference).to_csv())?;
        outputs.write("signal.csv", &pattern_table(&scan.signal).to_csv())?;
    }
    let json = to_json("scan", &report);
    if outputs.wants(Format::Json) {
        outputs.write("scan.json", &json)?;
    }
    if outputs.wants(Format::Svg) {
        outputs.write("scan.svg", &fringe_plot(&report, &scan).to_svg())?;
    }
    if outputs.json_to_stdout() {
        return say!(out, "{}", json.trim_end());
    }
    say!(out, "pattern mode         {} ({} points)", report.mode, report.points)?;
    say!(
        out,
        "reference fit        phase {} mrad, visibility {}",
        mrad(report.reference_fit.phase_rad),
        format_sig12(report.reference_fit.visibility)
    )?;
    say!(
        out,
        "signal fit           phase {} mrad, visibility {}",
        mrad(report.signal_fit.phase_rad),
        format_sig12(report.signal_fit.visibility)
    )?;
    say!(
        out,
        "fitted phase shift   {} mrad (+/- {} mrad)",
        mrad(report.phase_shift_rad),
        mrad(report.signal_fit.phase_std_rad.hypot(report.reference_fit.phase_std_rad))
    )?;
    say!(out, "closed form          {} mrad", mrad(report.closed_form_phase_rad))?;
    Ok(())
}

// ---- curves ----------------------------------------------------------------

/// Parses `a,b,c` or `start:stop:count` (inclusive, evenly spaced).
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("bad number `{}`", s.trim()))
    };
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, stop, count] = parts.as_slice() else {
            return Err(format!("range `{text}` must be start:stop:count"));
        };
        let (start, stop) = (number(start)?, number(stop)?);
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| format!("bad count `{}`", count.trim()))?;
        return Ok(match count {
            0 => Vec::new(),
            1 => vec![start],
            _ => (0..count)
                .map(|k| start + (stop - start) * k as f64 / (count - 1) as f64)
                .collect(),
        });
    }
    text.split(',').map(number).collect()
}

/// One curve of amplified phase against the swept parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    /// Value of the held parameter, radians.
    pub fixed: f64,
    /// `(phi, eps, phi')` triples in sweep order, radians.
    pub samples: Vec<(f64, f64, f64)>,
}

/// Closed-form amplified phase over the cross grid, one curve per value of
/// the parameter that is not on the horizontal axis.
pub fn amplification_curves(axis: Axis, phis: &[f64], epsilons: &[f64]) -> crate::Result<Vec<Curve>> {
    if phis.is_empty() {
        return Err(Error::invalid("phi", "grid is empty"));
    }
    if epsilons.is_empty() {
        return Err(Error::invalid("epsilon", "grid is empty"));
    }
    let (fixed, swept) = match axis {
        Axis::Phi => (epsilons, phis),
        Axis::Eps => (phis, epsilons),
    };
    fixed
        .iter()
        .map(|&held| {
            let samples = swept
                .iter()
                .map(|&x| {
                    let (phi, eps) = match axis {
                        Axis::Phi => (x, held),
                        Axis::Eps => (held, x),
                    };
                    Ok((phi, eps, closed_form_amplified_phase(phi, eps)?))
                })
                .collect::<crate::Result<Vec<_>>>()?;
            Ok(Curve { fixed: held, samples })
        })
        .collect()
}

fn cmd_curves(args: &CurvesArgs, outputs: &Outputs, out: &mut dyn Write) -> Result<(), CliError> {
    outputs.check_supported("curves", &[Format::Csv, Format::Svg])?;
    let (phi_default, eps_default) = match args.x {
        Axis::Phi => ("0:6:61", "1.5,3,5,10"),
        Axis::Eps => ("0.26,1,3", "0.5:20:79"),
    };
    let grid = |flag: &str, given: &Option<String>, default: &str| -> Result<Vec<f64>, CliError> {
        let values = parse_grid(given.as_deref().unwrap_or(default))
            .map_err(|e| CliError::Param(format!("{flag}: {e}")))?;
        if values.is_empty() {
            return Err(CliError::Param(format!("{flag}: grid is empty")));
        }
        Ok(values.into_iter().map(|v| v * MRAD).collect())
    };
    let phis = grid("--phi-mrad", &args.phi_mrad, phi_default)?;
    let epsilons = grid("--eps-mrad", &args.eps_mrad, eps_default)?;
    let curves = amplification_curves(args.x, &phis, &epsilons)?;

    let mut table = Table::new(["phi_rad", "eps_rad", "phi_prime_rad"]);
    for curve in &curves {
        for &(phi, eps, phase) in &curve.samples {
            table.push(vec![phi, eps, phase]);
        }
    }
    if outputs.wants(Format::Csv) {
        outputs.write("curves.csv", &table.to_csv())?;
    }
    if outputs.wants(Format::Svg) {
        let (x_label, held) = match args.x {
            Axis::Phi => ("initial phase phi (mrad)", "eps"),
            Axis::Eps => ("rotation offset eps (mrad)", "phi"),
        };
        let mut plot = Plot::new("Amplified phase", x_label, "amplified phase phi' (mrad)");
        for (i, curve) in curves.iter().enumerate() {
            let points = curve
                .samples
                .iter()
                .map(|&(phi, eps, phase)| {
                    let x = match args.x {
                        Axis::Phi => phi,
                        Axis::Eps => eps,
                    };
                    (x / MRAD, phase / MRAD)
                })
                .collect();
            plot.add(Series::line(format!("{held} = {} mrad", mrad(curve.fixed)), points, i));
        }
        outputs.write("curves.svg", &plot.to_svg())?;
    }
    let held = match args.x {
        Axis::Phi => "eps",
        Axis::Eps => "phi",
    };
    for curve in &curves {
        let first = curve.samples.first().expect("non-empty grid");
        let last = curve.samples.last().expect("non-empty grid");
        say!(
            out,
            "{held} = {} mrad: phi' from {} to {} mrad over {} points",
            mrad(curve.fixed),
            mrad(first.2),
            mrad(last.2),
            curve.samples.len()
        )?;
    }
    Ok(())
}

// ---- uncertainty -------------------------------------------------------------

#[derive(Debug, Serialize)]
struct MonteCarloSummary {
    seed: u64,
    report: UncertaintyReport,
    discrepancy_sigmas: f64,
    passes: bool,
    flagged: bool,
}

#[derive(Debug, Serialize)]
struct UncertaintySummary {
    scenario: UncertaintyScenario,
    model: ErrorModel,
    true_phi_rad: f64,
    effective_samples: f64,
    analytic_delta_phi_rad: f64,
    analytic_full_delta_phi_rad: Option<f64>,
    single_qubit_delta_phi_rad: f64,
    minimum_measurable_phase_rad: Option<f64>,
    sql: Option<SqlComparison>,
    monte_carlo: Option<MonteCarloSummary>,
}

fn cmd_uncertainty(
    args: &UncertaintyArgs,
    seed: Option<u64>,
    outputs: &Outputs,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    outputs.check_supported("uncertainty", &[Format::Json])?;
    let eps = || {
        args.eps_mrad
            .map(|e| e * MRAD)
            .ok_or_else(|| CliError::Param("--eps-mrad: required for weak-measurement scenarios".into()))
    };
    let scenario = match args.scenario {
        Scenario::Single => UncertaintyScenario::SingleQubit,
        Scenario::Noon => UncertaintyScenario::Noon { n: args.n },
        Scenario::Weak => UncertaintyScenario::Weak { epsilon: eps()? },
        Scenario::NoonWeak => UncertaintyScenario::NoonWeak { n: args.n, epsilon: eps()? },
    };
    scenario.validate()?;
    let model = ErrorModel::new(args.rho_mrad * MRAD, args.sample_size)?;
    let true_phi = args.phi_mrad.map_or_else(|| scenario.sweet_spot_phase(), |p| p * MRAD);

    let analytic = analytic_uncertainty(&scenario, &model)?;
    let full = scenario_uncertainty_full(&scenario, &model, true_phi).ok();
    let sql = scenario
        .epsilon()
        .map(|e| sql_comparison(scenario.photon_number(), &model, e))
        .transpose()?;

    let monte_carlo = match seed {
        None => None,
        Some(seed) => {
            let report = mc_uncertainty(&scenario, &model, true_phi, args.trials, seed)?;
            Some(MonteCarloSummary {
                seed,
                discrepancy_sigmas: report.discrepancy_sigmas(),
                passes: report.agrees(),
                flagged: report.flagged(),
                report,
            })
        }
    };

    let summary = UncertaintySummary {
        scenario,
        model,
        true_phi_rad: true_phi,
        effective_samples: scenario.effective_samples(model.sample_size),
        analytic_delta_phi_rad: analytic,
        analytic_full_delta_phi_rad: full,
        single_qubit_delta_phi_rad: analytic_uncertainty(&UncertaintyScenario::SingleQubit, &model)?,
        minimum_measurable_phase_rad: minimum_measurable_phase(model.sample_size).ok(),
        sql,
        monte_carlo,
    };

    let json = to_json("uncertainty", &summary);
    if outputs.wants(Format::Json) {
        outputs.write("uncertainty.json", &json)?;
    }
    if outputs.json_to_stdout() {
        say!(out, "{}", json.trim_end())?;
    } else {
        say!(out, "scenario             {scenario}")?;
        say!(out, "rho                  {} mrad", mrad(model.rho))?;
        if model.outside_small_error_regime() {
            say!(out, "warning              rho is outside the small-error regime; closed forms are approximate")?;
        }
        say!(out, "N                    {}", model.sample_size)?;
        say!(out, "effective samples    {}", format_sig12(summary.effective_samples))?;
        say!(out, "phase under test     {} mrad", mrad(true_phi))?;
        say!(out, "analytic delta phi   {} mrad", mrad(analytic))?;
        match full {
            Some(f) => say!(out, "full expression      {} mrad", mrad(f))?,
            None => say!(out, "full expression      diverges at this phase")?,
        }
        say!(
            out,
            "single-qubit         {} mrad (improvement x{})",
            mrad(summary.single_qubit_delta_phi_rad),
            format_sig12(summary.single_qubit_delta_phi_rad / analytic)
        )?;
        if let Some(m) = summary.minimum_measurable_phase_rad {
            say!(out, "min measurable phase {} mrad", mrad(m))?;
        }
        if let Some(s) = &summary.sql {
            say!(
                out,
                "SQL 1/sqrt(N)        {} mrad, beats SQL: {}",
                mrad(s.sql_bound),
                s.beats
            )?;
        }
        if let Some(mc) = &summary.monte_carlo {
            say!(
                out,
                "Monte Carlo          {} +/- {} mrad ({} trials, seed {}, {} clamped)",
                mrad(mc.report.mc_delta_phi),
                mrad(mc.report.mc_standard_error),
                mc.report.trials,
                mc.seed,
                mc.report.clamped
            )?;
            say!(
                out,
                "agreement            {:.2} sigma: {}{}",
                mc.discrepancy_sigmas,
                if mc.passes { "PASS" } else { "FAIL" },
                if mc.flagged { " (flagged: clamp rate >= 1%)" } else { "" }
            )?;
        }
    }

    if let Some(mc) = &summary.monte_carlo {
        if !mc.passes {
            return Err(CliError::Check(format!(
                "Monte Carlo differs from the closed form by {:.2} standard errors (limit {AGREEMENT_SIGMAS})",
                mc.discrepancy_sigmas
            )));
        }
    }
    Ok(())
}

// ---- compare-schemes ---------------------------------------------------------

#[derive(Debug, Serialize)]
struct CompareReport {
    phi_rad: f64,
    epsilon_rad: f64,
    amplifier_success_probability: f64,
    amplifier_phase_rad: f64,
    standard_success_probability: f64,
    standard_meter_phase_rad: f64,
    weak_value_first_order: f64,
    weak_value_exact: f64,
    success_ratio: f64,
}

fn cmd_compare(args: &CompareArgs, outputs: &Outputs, out: &mut dyn Write) -> Result<(), CliError> {
    outputs.check_supported("compare-schemes", &[Format::Json])?;
    let (phi, eps) = (args.phi_mrad * MRAD, args.eps_mrad * MRAD);
    let cmp = compare_schemes(phi, eps)?;
    let report = CompareReport {
        phi_rad: phi,
        epsilon_rad: eps,
        amplifier_success_probability: cmp.amplifier.success_probability,
        amplifier_phase_rad: cmp.amplifier.amplified_phase,
        standard_success_probability: cmp.standard.success_probability,
        standard_meter_phase_rad: cmp.standard.meter_relative_phase,
        weak_value_first_order: cmp.standard.weak_value,
        weak_value_exact: cmp.standard.weak_value_exact,
        success_ratio: cmp.ratio,
    };
    let json = to_json("compare-schemes", &report);
    if outputs.wants(Format::Json) {
        outputs.write("compare_schemes.json", &json)?;
    }
    if outputs.json_to_stdout() {
        return say!(out, "{}", json.trim_end());
    }
    say!(
        out,
        "amplifier            success {}, phase {} mrad",
        format_sig12(report.amplifier_success_probability),
        mrad(report.amplifier_phase_rad)
    )?;
    say!(
        out,
        "standard weak value  success {}, meter phase {} mrad",
        format_sig12(report.standard_success_probability),
        mrad(report.standard_meter_phase_rad)
    )?;
    say!(
        out,
        "weak value           {} (1/eps = {})",
        format_sig12(report.weak_value_exact),
        format_sig12(report.weak_value_first_order)
    )?;
    say!(out, "success ratio        {}", format_sig12(report.success_ratio))?;
    Ok(())
}

// ---- entry point -------------------------------------------------------------

fn config_path(args: &[String]) -> Option<String> {
    let mut iter = args.iter().skip(1);
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            return iter.next().cloned();
        }
        if let Some(path) = arg.strip_prefix("--config=") {
            return Some(path.to_string());
        }
    }
    None
}

fn parse_config_file(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut entries = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Param(format!("--config: line {} is not `key = value`", line_no + 1))
        })?;
        entries.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(entries)
}

/// Splices config-file entries into the argument list right after the
/// subcommand, skipping keys given explicitly on the command line.
fn merge_config(args: &[String]) -> Result<Vec<String>, CliError> {
    let Some(path) = config_path(args) else {
        return Ok(args.to_vec());
    };
    let text = fs::read_to_string(&path).map_err(|e| io_error(Path::new(&path), e))?;
    let entries = parse_config_file(&text)?;

    let root = Cli::command();
    let sub_names: Vec<String> = root.get_subcommands().map(|s| s.get_name().to_string()).collect();
    let Some(sub_idx) = args.iter().position(|a| sub_names.contains(a)) else {
        return Ok(args.to_vec());
    };
    let sub = root
        .find_subcommand(&args[sub_idx])
        .expect("subcommand located above");

    let mut takes_value = std::collections::BTreeMap::new();
    for arg in root.get_arguments().chain(sub.get_arguments()) {
        if let Some(long) = arg.get_long() {
            takes_value.insert(long.to_string(), arg.get_action().takes_values());
        }
    }
    let explicit: BTreeSet<&str> = args
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a))
        .collect();

    let mut injected = Vec::new();
    for (key, value) in entries {
        let Some(&needs_value) = takes_value.get(&key) else {
            return Err(CliError::Param(format!("--config: unknown key `{key}` for {}", sub.get_name())));
        };
        if key == "config" || key == "help" || key == "version" {
            return Err(CliError::Param(format!("--config: key `{key}` is not allowed")));
        }
        if explicit.contains(key.as_str()) {
            continue;
        }
        if needs_value {
            injected.push(format!("--{key}={value}"));
        } else {
            match value.as_str() {
                "true" => injected.push(format!("--{key}")),
                "false" => {}
                _ => return Err(CliError::Param(format!("--config: `{key}` expects true or false"))),
            }
        }
    }
    let mut merged = args[..=sub_idx].to_vec();
    merged.extend(injected);
    merged.extend_from_slice(&args[sub_idx + 1..]);
    Ok(merged)
}

fn dispatch(args: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let merged = merge_config(args)?;
    let cli = match Cli::try_parse_from(&merged) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return write!(out, "{err}").map_err(|e| CliError::Io(format!("stdout: {e}")));
            }
            return Err(CliError::Param(err.to_string().trim_end().to_string()));
        }
    };
    let outputs = Outputs {
        dir: cli.common.out.clone(),
        format: cli.common.format,
    };
    match &cli.command {
        Command::Amplify(a) => cmd_amplify(a, &outputs, out),
        Command::Scan(a) => cmd_scan(a, cli.common.seed, &outputs, out),
        Command::Curves(a) => cmd_curves(a, &outputs, out),
        Command::Uncertainty(a) => cmd_uncertainty(a, cli.common.seed, &outputs, out),
        Command::CompareSchemes(a) => cmd_compare(a, &outputs, out),
    }
}

/// Runs the command line and returns the process exit status.
pub fn run(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    match dispatch(args, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        std::iter::once("phase-amp".to_string())
            .chain(s.split_whitespace().map(String::from))
            .collect()
    }

    fn run_str(s: &str) -> (u8, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(&argv(s), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn grid_syntax() {
        assert_eq!(parse_grid("1.5,3,5").unwrap(), vec![1.5, 3.0, 5.0]);
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("2:9:1").unwrap(), vec![2.0]);
        assert!(parse_grid("").unwrap().is_empty());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn config_file_lines() {
        let entries = parse_config_file("# comment\nphi-mrad = 1\n\neps-mrad=1.5\n").unwrap();
        assert_eq!(entries, vec![("phi-mrad".into(), "1".into()), ("eps-mrad".into(), "1.5".into())]);
        assert!(parse_config_file("nonsense").is_err());
    }

    #[test]
    fn invalid_parameters_name_the_flag() {
        let (code, _, err) = run_str("amplify --phi-mrad 1 --eps-mrad 0");
        assert_eq!(code, EXIT_PARAM);
        assert!(err.contains("--eps-mrad"), "{err}");
        let (code, _, err) = run_str("amplify --phi-mrad 1");
        assert_eq!(code, EXIT_PARAM);
        assert!(err.contains("--eps-mrad"), "{err}");
    }

    #[test]
    fn help_exits_cleanly() {
        let (code, out, _) = run_str("--help");
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("amplify") && out.contains("compare-schemes"));
    }
}
