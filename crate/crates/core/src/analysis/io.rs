//! Text formats for histograms, dip curves and fit reports.
//!
//! Histogram files start with `bin_width_ns=<float>` (optional when there
//! are at least two bins) and an optional `delay_ns=<float>`, followed by
//! `bin_start_ns,count` rows. Dip-curve files hold
//! `tau_ns,normalized_coincidence,std_error` rows under an optional header.
//! Lines starting with `#` are comments.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::afc_mapping::csv_io;
use crate::error::{Error, Result, ValidationError, Violation};
use crate::format::float17;
use crate::model::{CoincidenceHistogram, DipCurve, DipFitResult, DipPoint, HistogramBin};

pub const DIP_CURVE_HEADER: [&str; 3] = ["tau_ns", "normalized_coincidence", "std_error"];
const HISTOGRAM_COLUMNS: [&str; 2] = ["bin_start_ns", "count"];
const BIN_WIDTH_KEY: &str = "bin_width_ns=";
const DELAY_KEY: &str = "delay_ns=";

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source)
}

fn parse_error(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Records with their 1-based line numbers, blank records dropped.
fn records<R: Read>(source: R) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut out = Vec::new();
    for rec in reader(source).records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                other => parse_error(line, format!("{other:?}")),
            }
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line());
        out.push((line, rec));
    }
    Ok(out)
}

fn parse_f64(field: &str, line: u64, what: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_error(line, format!("{what}: cannot parse {field:?} as a number")))?;
    if !v.is_finite() {
        return Err(parse_error(line, format!("{what}: {field:?} is not finite")));
    }
    Ok(v)
}

fn is_header(rec: &csv::StringRecord, names: &[&str]) -> bool {
    rec.len() == names.len() && rec.iter().zip(names).all(|(a, b)| a == *b)
}

/// Reads a histogram file and validates it.
pub fn load_histogram<R: Read>(source: R) -> Result<CoincidenceHistogram> {
    let mut bin_width = None;
    let mut delay = 0.0;
    let mut starts: Vec<(f64, i64)> = Vec::new();
    let mut last_line = 0;
    for (line, rec) in records(source)? {
        last_line = line;
        if rec.len() == 1 {
            let field = &rec[0];
            if !starts.is_empty() {
                return Err(parse_error(line, format!("unexpected {field:?} after the bin rows")));
            }
            if let Some(v) = field.strip_prefix(BIN_WIDTH_KEY) {
                bin_width = Some(parse_f64(v.trim(), line, "bin width")?);
            } else if let Some(v) = field.strip_prefix(DELAY_KEY) {
                delay = parse_f64(v.trim(), line, "delay")?;
            } else {
                return Err(parse_error(line, format!("expected `bin_start_ns,count`, got {field:?}")));
            }
        } else if rec.len() == 2 {
            if starts.is_empty() && is_header(&rec, &HISTOGRAM_COLUMNS) {
                continue;
            }
            let start = parse_f64(&rec[0], line, "bin start")?;
            let count: i64 = rec[1]
                .parse()
                .map_err(|_| parse_error(line, format!("count: cannot parse {:?} as an integer", &rec[1])))?;
            starts.push((start, count));
        } else {
            return Err(parse_error(line, format!("expected 2 columns, found {}", rec.len())));
        }
    }
    let bin_width = match (bin_width, starts.as_slice()) {
        (Some(w), _) => w,
        (None, [a, b, ..]) => b.0 - a.0,
        (None, _) => {
            return Err(parse_error(
                last_line,
                "no bin_width_ns header and fewer than two bins to infer it from",
            ))
        }
    };
    let negative: Vec<Violation> = starts
        .iter()
        .enumerate()
        .filter(|(_, s)| s.1 < 0)
        .map(|(k, s)| Violation {
            field: format!("bins[{k}].count"),
            rule: format!("must be >= 0, got {}", s.1),
        })
        .collect();
    if !negative.is_empty() {
        return Err(ValidationError { violations: negative }.into());
    }
    let bins = starts
        .into_iter()
        .map(|(bin_start, count)| HistogramBin {
            bin_start,
            count: count as u64,
        })
        .collect();
    Ok(CoincidenceHistogram::new(bin_width, bins, delay)?)
}

pub fn write_histogram<W: Write>(mut out: W, hist: &CoincidenceHistogram) -> Result<()> {
    writeln!(out, "{BIN_WIDTH_KEY}{}", float17(hist.bin_width()))?;
    writeln!(out, "{DELAY_KEY}{}", float17(hist.delay_setting()))?;
    for b in hist.bins() {
        writeln!(out, "{},{}", float17(b.bin_start), b.count)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_dip_curve<W: Write>(out: W, curve: &DipCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DIP_CURVE_HEADER).map_err(csv_io)?;
    for p in curve.points() {
        w.write_record([p.delay, p.normalized_coincidence, p.std_error].map(float17))
            .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Contents of a file handed to the fitter.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveFile {
    /// `tau_ns,normalized_coincidence,std_error` rows.
    Normalized(DipCurve),
    /// `tau_ns,count` rows, not yet normalized.
    Raw(Vec<(f64, f64)>),
}

/// Reads either a normalized dip curve (three columns) or raw coincidence
/// counts per delay (two columns).
pub fn read_curve_file<R: Read>(source: R) -> Result<CurveFile> {
    let mut columns = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in records(source)? {
        if rec.len() == 1 && rec[0].starts_with(BIN_WIDTH_KEY) {
            return Err(parse_error(
                line,
                "this is a histogram file; window it into a dip curve before fitting",
            ));
        }
        if rows.is_empty() && (is_header(&rec, &DIP_CURVE_HEADER) || is_header(&rec, &["tau_ns", "count"])) {
            continue;
        }
        let n = *columns.get_or_insert(rec.len());
        if !(n == 2 || n == 3) {
            return Err(parse_error(line, format!("expected 2 or 3 columns, found {n}")));
        }
        if rec.len() != n {
            return Err(parse_error(line, format!("expected {n} columns, found {}", rec.len())));
        }
        rows.push(
            rec.iter()
                .map(|f| parse_f64(f, line, "value"))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    match columns {
        Some(3) => {
            let points = rows
                .into_iter()
                .map(|r| DipPoint {
                    delay: r[0],
                    normalized_coincidence: r[1],
                    std_error: r[2],
                })
                .collect();
            Ok(CurveFile::Normalized(DipCurve::new(points)?))
        }
        Some(_) => Ok(CurveFile::Raw(rows.into_iter().map(|r| (r[0], r[1])).collect())),
        None => Err(parse_error(0, "no data rows")),
    }
}

/// Reads a three-column dip curve.
pub fn read_dip_curve<R: Read>(source: R) -> Result<DipCurve> {
    match read_curve_file(source)? {
        CurveFile::Normalized(c) => Ok(c),
        CurveFile::Raw(_) => Err(parse_error(1, "expected 3 columns, found 2")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub baseline: f64,
    pub visibility: f64,
    pub sigma_rad_per_ns: f64,
    pub residual_norm: f64,
    pub n_points: usize,
}

impl FitReport {
    pub fn new(fit: &DipFitResult, n_points: usize) -> Self {
        Self {
            baseline: fit.baseline(),
            visibility: fit.visibility(),
            sigma_rad_per_ns: fit.sigma(),
            residual_norm: fit.residual_norm(),
            n_points,
        }
    }
}
