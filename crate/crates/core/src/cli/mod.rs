//! The `fmhom` command line.
//!
//! Data goes to standard output or `--out`; diagnostics go to standard
//! error. Exit codes: 0 success, 2 bad configuration or input, 3 runtime
//! failure, 4 fit divergence.

mod config;

pub use config::{RunConfig, DEFAULT_SEED, DEFAULT_TRIALS};

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::afc_mapping::{cross_mode_overlap, echo_schedule_with_envelope};
use crate::analysis::{
    fit_dip, moving_average, normalize_curve, read_curve_file, write_dip_curve, write_histogram, CurveFile,
    FitReport, DEFAULT_BASELINE_CUTOFF_NS,
};
use crate::coincidence_mc::{dip_scan, synthesize_histogram, ArtifactPeak, DelayGrid, SynthesisOptions};
use crate::error::{Error, Result};
use crate::format::float17;
use crate::hom_analytic::{
    coincidence_prob_averaged, phase_integral_oracle, sigma_from_fwhm, singles_probs, visibility_limit,
    ORACLE_REFERENCE_NODES,
};
use crate::model::{DipCurve, DipPoint};
use crate::repeater_rates::{p_one_photon, p_two_photon, rate_table, simulate_link_mc, write_rate_table_csv};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_FIT: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "fmhom",
    version,
    about = "Frequency-multiplexed HOM interference and multiplexed repeater rates"
)]
pub struct Cli {
    /// Configuration JSON; `-` reads standard input.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Overrides the configured number of Monte Carlo trials.
    #[arg(long, global = true, value_name = "U64")]
    trials: Option<u64>,
    /// Write data here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalized coincidence versus delay.
    Dip(DipArgs),
    /// Visibility limit of the configured setup, closed form and quadrature.
    Visibility,
    /// Link success probabilities and heralding-rate bounds versus mode count.
    Rates(RatesArgs),
    /// Echo schedules of both banks and their cross-mode overlaps.
    Schedule(ScheduleArgs),
    /// Fits the dip model to a dip curve or to raw counts per delay.
    Fit(FitArgs),
    /// Monte Carlo of the repeater link next to the closed forms.
    Linksim(LinksimArgs),
    /// Synthetic coincidence histogram at one delay.
    Histogram(HistogramArgs),
    /// Prints the default configuration.
    Config,
}

#[derive(Debug, Args)]
struct DipArgs {
    /// Closed-form dip (the default).
    #[arg(long, conflicts_with = "mc")]
    analytic: bool,
    /// Monte Carlo dip scan.
    #[arg(long)]
    mc: bool,
    /// Delay range in ns, `MIN:MAX`.
    #[arg(long, default_value = "-500:500", allow_hyphen_values = true, value_name = "MIN:MAX")]
    tau_range: String,
    /// Delay step, ns.
    #[arg(long, default_value_t = 20.0)]
    step: f64,
    /// Dip width in rad/ns; derived from the pulse duration when omitted.
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Debug, Args)]
struct RatesArgs {
    /// Mode counts to tabulate: `K` for 1..K, or `A..B`. Defaults to 1..N of
    /// the configured rate parameters.
    #[arg(long, value_name = "RANGE")]
    sweep: Option<String>,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    /// Input-time difference, channel 1 minus channel 2, ns.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    tau: f64,
    /// Echo envelope FWHM, ns; the pulse duration when omitted.
    #[arg(long)]
    envelope_fwhm: Option<f64>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Dip-curve CSV (`tau_ns,normalized_coincidence,std_error`) or raw
    /// counts (`tau_ns,count`); `-` reads standard input.
    input: PathBuf,
    /// Baseline region for raw counts, |tau| >= CUTOFF ns.
    #[arg(long, default_value_t = DEFAULT_BASELINE_CUTOFF_NS)]
    cutoff: f64,
    /// Running-mean window applied to raw counts before normalizing.
    #[arg(long, value_name = "ODD")]
    smooth: Option<usize>,
}

#[derive(Debug, Args)]
struct LinksimArgs {
    /// Allow swapping across different successful modes.
    #[arg(long)]
    matched: bool,
    /// One-photon scheme instead of two-photon.
    #[arg(long)]
    one_photon: bool,
}

#[derive(Debug, Args)]
struct HistogramArgs {
    /// Input-time difference, channel 1 minus channel 2, ns.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    tau: f64,
    /// Add an artifact peak at this time, ns.
    #[arg(long, requires = "artifact_counts", allow_hyphen_values = true)]
    artifact_at: Option<f64>,
    #[arg(long)]
    artifact_counts: Option<u64>,
}

/// Parses the arguments, runs the command and returns the process exit code.
pub fn main_exit_code() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fmhom: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation(_) | Error::Config(_) | Error::Parse { .. } => EXIT_CONFIG,
        Error::Fit { .. } => EXIT_FIT,
        Error::Domain(_) | Error::Io(_) => EXIT_RUNTIME,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(trials) = cli.trials {
        config.trials = trials;
    }
    config.check()?;

    let mut out = Vec::new();
    match &cli.command {
        Command::Dip(args) => cmd_dip(&config, args, &mut out)?,
        Command::Visibility => cmd_visibility(&config, &mut out)?,
        Command::Rates(args) => cmd_rates(&config, args, &mut out)?,
        Command::Schedule(args) => cmd_schedule(&config, args, &mut out)?,
        Command::Fit(args) => cmd_fit(args, &mut out)?,
        Command::Linksim(args) => cmd_linksim(&config, args, &mut out)?,
        Command::Histogram(args) => cmd_histogram(&config, args, &mut out)?,
        Command::Config => write_json(&mut out, &config)?,
    }
    match &cli.out {
        Some(path) => std::fs::write(path, &out)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&out)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(out: &mut Vec<u8>, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| Error::Io(e.into()))?;
    out.push(b'\n');
    Ok(())
}

fn parse_tau_range(text: &str) -> Result<(f64, f64)> {
    let bad = || Error::Config(format!("--tau-range expects MIN:MAX, got {text:?}"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    Ok((lo, hi))
}

fn cmd_dip(config: &RunConfig, args: &DipArgs, out: &mut Vec<u8>) -> Result<()> {
    let (lo, hi) = parse_tau_range(&args.tau_range)?;
    let grid = DelayGrid::new(lo, hi, args.step).map_err(as_config)?;
    let sigma = match args.sigma {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(Error::Config(format!("--sigma must be > 0, got {s}"))),
        None => sigma_from_fwhm(config.pulse.fwhm_duration()),
    };
    let curve = if args.mc {
        dip_scan(&config.setup, sigma, &grid, config.trials, config.seed)?
    } else {
        // ideal dip shape with the depth set by the setup's visibility limit
        let v = visibility_limit(&config.setup.with_temporal_overlap(1.0)?)?;
        let points = grid
            .points()
            .into_iter()
            .map(|tau| DipPoint {
                delay: tau,
                normalized_coincidence: 1.0 - v * (-0.5 * sigma * sigma * tau * tau).exp(),
                std_error: 0.0,
            })
            .collect();
        DipCurve::new(points)?
    };
    write_dip_curve(out, &curve)
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::Config(m),
        other => other,
    }
}

#[derive(Serialize)]
struct VisibilityOutput {
    visibility_limit: f64,
    coincidence: f64,
    singles: (f64, f64),
    oracle_coincidence: f64,
    oracle_singles: (f64, f64),
    /// Relative difference between closed form and quadrature.
    oracle_residual: f64,
}

fn relative_difference(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn cmd_visibility(config: &RunConfig, out: &mut Vec<u8>) -> Result<()> {
    let setup = &config.setup;
    let coincidence = coincidence_prob_averaged(setup);
    let oracle = phase_integral_oracle(setup, ORACLE_REFERENCE_NODES)?;
    let report = VisibilityOutput {
        visibility_limit: visibility_limit(setup)?,
        coincidence,
        singles: singles_probs(setup),
        oracle_coincidence: oracle.coincidence,
        oracle_singles: oracle.singles,
        oracle_residual: relative_difference(coincidence, oracle.coincidence),
    };
    write_json(out, &report)
}

fn parse_sweep(text: &str) -> Result<RangeInclusive<u32>> {
    let bad = || Error::Config(format!("--sweep expects K or A..B, got {text:?}"));
    let text = text.trim().trim_start_matches("N=");
    let (a, b) = match text.split_once("..") {
        Some((a, b)) => (a.parse().map_err(|_| bad())?, b.trim_start_matches('=').parse().map_err(|_| bad())?),
        None => (1, text.parse().map_err(|_| bad())?),
    };
    if a < 1 || a > b {
        return Err(bad());
    }
    Ok(a..=b)
}

fn cmd_rates(config: &RunConfig, args: &RatesArgs, out: &mut Vec<u8>) -> Result<()> {
    let modes = match &args.sweep {
        Some(s) => parse_sweep(s)?,
        None => 1..=config.rate_params.n_modes(),
    };
    let rows = rate_table(&config.link_params, &config.rate_params, modes)?;
    write_rate_table_csv(out, &rows)
}

fn cmd_schedule(config: &RunConfig, args: &ScheduleArgs, out: &mut Vec<u8>) -> Result<()> {
    let fwhm = args.envelope_fwhm.unwrap_or(config.pulse.fwhm_duration());
    let (bank1, bank2) = (&config.banks.0, &config.banks.1);
    let first = echo_schedule_with_envelope(bank1, 0.0, args.tau, fwhm)?;
    let second = echo_schedule_with_envelope(bank2, 0.0, 0.0, fwhm)?;
    writeln!(out, "bank,mode_index,retrieval_time_ns,relative_intensity")?;
    for (bank, events) in [(1, &first), (2, &second)] {
        for e in events.iter() {
            writeln!(
                out,
                "{bank},{},{},{}",
                e.mode_index(),
                float17(e.retrieval_time()),
                float17(e.relative_intensity())
            )?;
        }
    }
    writeln!(out)?;
    let matrix = cross_mode_overlap(bank1, bank2, args.tau, fwhm)?;
    let header: Vec<String> = (0..bank2.len()).map(|j| format!("bank2_mode_{j}")).collect();
    writeln!(out, "overlap,{}", header.join(","))?;
    for (i, row) in matrix.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|&v| float17(v)).collect();
        writeln!(out, "bank1_mode_{i},{}", cells.join(","))?;
    }
    Ok(())
}

fn open_input(path: &Path) -> Result<Box<dyn Read>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(std::io::stdin()));
    }
    let file = File::open(path).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    Ok(Box::new(BufReader::new(file)))
}

fn cmd_fit(args: &FitArgs, out: &mut Vec<u8>) -> Result<()> {
    let curve = match read_curve_file(open_input(&args.input)?)? {
        CurveFile::Normalized(curve) => {
            if args.smooth.is_some() {
                return Err(Error::Config("--smooth applies to raw counts only".into()));
            }
            curve
        }
        CurveFile::Raw(mut points) => {
            if let Some(window) = args.smooth {
                let values: Vec<f64> = points.iter().map(|p| p.1).collect();
                let smoothed = moving_average(&values, window).map_err(as_config)?;
                for (p, v) in points.iter_mut().zip(smoothed) {
                    p.1 = v;
                }
            }
            normalize_curve(&points, args.cutoff)?
        }
    };
    let fit = fit_dip(&curve)?;
    write_json(out, &FitReport::new(&fit, curve.len()))
}

#[derive(Serialize)]
struct LinksimOutput {
    trials: u64,
    successes: u64,
    p_hat: f64,
    std_error: f64,
    exact: f64,
    approx: f64,
}

fn cmd_linksim(config: &RunConfig, args: &LinksimArgs, out: &mut Vec<u8>) -> Result<()> {
    let params = &config.link_params;
    let two_photon = !args.one_photon;
    let closed = |exact| {
        if two_photon {
            p_two_photon(params, args.matched, exact)
        } else {
            p_one_photon(params, args.matched, exact)
        }
    };
    let mc = simulate_link_mc(params, args.matched, two_photon, config.trials, config.seed)?;
    let report = LinksimOutput {
        trials: mc.trials,
        successes: mc.successes,
        p_hat: mc.p_hat,
        std_error: mc.std_error,
        exact: closed(true)?,
        approx: closed(false)?,
    };
    write_json(out, &report)
}

fn cmd_histogram(config: &RunConfig, args: &HistogramArgs, out: &mut Vec<u8>) -> Result<()> {
    let setups: Vec<_> = (0..config.banks.0.len()).map(|_| config.setup).collect();
    let options = SynthesisOptions {
        artifact: args.artifact_at.map(|position| ArtifactPeak {
            position,
            counts: args.artifact_counts.unwrap_or(0),
        }),
        ..SynthesisOptions::default()
    };
    let synth = synthesize_histogram(
        (&config.banks.0, &config.banks.1),
        &config.pulse,
        &setups,
        args.tau,
        config.trials,
        config.seed,
        &options,
    )?;
    write_histogram(out, &synth.histogram)
}
