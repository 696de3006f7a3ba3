//! Turning coincidence histograms into dip curves and visibilities.

mod fit;
mod io;

pub use fit::{fit_dip, MAX_ITERATIONS};
pub use io::{
    load_histogram, read_curve_file, read_dip_curve, write_dip_curve, write_histogram, CurveFile,
    FitReport, DIP_CURVE_HEADER,
};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{CoincidenceHistogram, DipCurve, DipFitResult, DipPoint};

/// Delays at least this far from zero define the normalization baseline, ns.
pub const DEFAULT_BASELINE_CUTOFF_NS: f64 = 300.0;
/// Points averaged by [`moving_average`] unless told otherwise.
pub const DEFAULT_SMOOTHING_WINDOW: usize = 5;

/// Time window `[center − half_width, center + half_width)` selecting one
/// mode's coincidences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeWindow {
    mode_index: usize,
    window_center: f64,
    window_half_width: f64,
}

impl ModeWindow {
    pub fn new(mode_index: usize, window_center: f64, window_half_width: f64) -> Result<Self> {
        if !window_center.is_finite() {
            return Err(Error::Config(format!("window center must be finite, got {window_center}")));
        }
        if !(window_half_width > 0.0 && window_half_width.is_finite()) {
            return Err(Error::Config(format!(
                "window half width must be > 0, got {window_half_width}"
            )));
        }
        Ok(Self {
            mode_index,
            window_center,
            window_half_width,
        })
    }

    pub fn mode_index(&self) -> usize {
        self.mode_index
    }

    pub fn window_center(&self) -> f64 {
        self.window_center
    }

    pub fn window_half_width(&self) -> f64 {
        self.window_half_width
    }

    fn contains(&self, t: f64) -> bool {
        t >= self.window_center - self.window_half_width && t < self.window_center + self.window_half_width
    }

    fn overlaps(&self, other: &Self) -> bool {
        (self.window_center - other.window_center).abs() < self.window_half_width + other.window_half_width
    }
}

/// Windows centered on the given `(mode, center)` peaks, each as wide as
/// possible without reaching halfway to its nearest neighbour, and never
/// wider than `max_half_width`.
pub fn windows_around(peaks: &[(usize, f64)], max_half_width: f64) -> Result<Vec<ModeWindow>> {
    let mut centers: Vec<f64> = peaks.iter().map(|p| p.1).collect();
    centers.sort_by(f64::total_cmp);
    let min_gap = centers
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let half = max_half_width.min(0.49 * min_gap);
    peaks
        .iter()
        .map(|&(mode, center)| ModeWindow::new(mode, center, half))
        .collect()
}

/// Counts per window, in window order, from bins whose centers fall inside.
pub fn window_coincidences(hist: &CoincidenceHistogram, windows: &[ModeWindow]) -> Result<Vec<u64>> {
    for (i, a) in windows.iter().enumerate() {
        for b in &windows[i + 1..] {
            if a.overlaps(b) {
                return Err(Error::Config(format!(
                    "windows of modes {} and {} overlap",
                    a.mode_index, b.mode_index
                )));
            }
        }
    }
    let half_bin = 0.5 * hist.bin_width();
    let mut counts = vec![0u64; windows.len()];
    for bin in hist.bins() {
        let center = bin.bin_start + half_bin;
        if let Some(k) = windows.iter().position(|w| w.contains(center)) {
            counts[k] += bin.count;
        }
    }
    Ok(counts)
}

/// Centered running mean. Near the ends the window is cut off at the edge
/// of the series, so the first output averages `window/2 + 1` values.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window % 2 == 0 {
        return domain(format!("window must be odd, got {window}"));
    }
    if window > series.len() {
        return domain(format!(
            "window {window} is longer than the series ({} points)",
            series.len()
        ));
    }
    let h = window / 2;
    let n = series.len();
    Ok((0..n)
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(h), (i + h).min(n - 1));
            let span = &series[lo..=hi];
            span.iter().sum::<f64>() / span.len() as f64
        })
        .collect())
}

/// Divides raw `(delay, counts)` points by the mean of the points with
/// `|delay| ≥ cutoff`, with `√counts / baseline` error bars.
pub fn normalize_curve(points: &[(f64, f64)], cutoff: f64) -> Result<DipCurve> {
    let outer: Vec<f64> = points
        .iter()
        .filter(|p| p.0.abs() >= cutoff)
        .map(|p| p.1)
        .collect();
    if outer.len() < 3 {
        return domain(format!(
            "need at least 3 points with |tau| >= {cutoff} ns for the baseline, found {}",
            outer.len()
        ));
    }
    let baseline = outer.iter().sum::<f64>() / outer.len() as f64;
    if !(baseline > 0.0 && baseline.is_finite()) {
        return domain(format!("baseline must be positive, got {baseline}"));
    }
    let normalized = points
        .iter()
        .map(|&(delay, raw)| {
            if !(raw >= 0.0) {
                return domain(format!("counts must be non-negative, got {raw} at tau={delay}"));
            }
            Ok(DipPoint {
                delay,
                normalized_coincidence: raw / baseline,
                std_error: raw.sqrt() / baseline,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DipCurve::new(normalized)?)
}

/// Fitted visibility with the extremes it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityReport {
    pub visibility: f64,
    pub p_max: f64,
    pub p_min: f64,
}

pub fn visibility_report(fit: &DipFitResult) -> VisibilityReport {
    VisibilityReport {
        visibility: fit.visibility(),
        p_max: fit.baseline(),
        p_min: fit.p_min(),
    }
}
