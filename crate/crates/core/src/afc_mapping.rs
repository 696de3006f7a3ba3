//! Frequency-to-time mapping of atomic frequency comb memories.
//!
//! A comb with tooth spacing Δ re-emits its stored light after `1/Δ`. The
//! two channels of the interferometer each have their own bank of combs; the
//! delay `tau` is the input-time difference channel 1 minus channel 2, so a
//! positive `tau` pushes every bank-1 echo later relative to bank 2.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::format::float17;
use crate::hom_analytic::envelope_std;
use crate::model::{AfcBank, EchoEvent, DEFAULT_PULSE_FWHM_NS};

/// Retrieval delay of a comb with the given tooth spacing: MHz in, ns out.
pub fn storage_time(comb_spacing_mhz: f64) -> Result<f64> {
    if !(comb_spacing_mhz > 0.0 && comb_spacing_mhz.is_finite()) {
        return domain(format!("comb spacing must be > 0 MHz, got {comb_spacing_mhz}"));
    }
    Ok(1000.0 / comb_spacing_mhz)
}

/// Echoes of one input pulse, ordered by retrieval time, with the default
/// 100 ns envelope.
pub fn echo_schedule(bank: &AfcBank, input_time: f64, channel_delay: f64) -> Result<Vec<EchoEvent>> {
    echo_schedule_with_envelope(bank, input_time, channel_delay, DEFAULT_PULSE_FWHM_NS)
}

pub fn echo_schedule_with_envelope(
    bank: &AfcBank,
    input_time: f64,
    channel_delay: f64,
    envelope_fwhm: f64,
) -> Result<Vec<EchoEvent>> {
    let mut events = bank
        .modes()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let t = input_time + channel_delay + storage_time(m.comb_spacing())?;
            Ok(EchoEvent::new(i, t, envelope_fwhm, m.echo_efficiency())?)
        })
        .collect::<Result<Vec<_>>>()?;
    // stable sort keeps bank order among simultaneous echoes
    events.sort_by(|a, b| a.retrieval_time().total_cmp(&b.retrieval_time()));
    Ok(events)
}

/// Retrieval times in bank order rather than time order.
fn retrieval_times(bank: &AfcBank) -> Result<Vec<f64>> {
    bank.modes()
        .iter()
        .map(|m| storage_time(m.comb_spacing()))
        .collect()
}

/// Overlap of two Gaussian echoes of equal width whose centers are `offset`
/// apart, `exp(−offset²/(4σ_t²))`. This is the factor by which the
/// coincidence dip between the two is reduced.
pub fn gaussian_overlap(offset: f64, envelope_fwhm: f64) -> f64 {
    let s = envelope_std(envelope_fwhm);
    (-offset * offset / (4.0 * s * s)).exp()
}

/// Matrix `[i][j]` of overlaps between echo `i` of bank 1, shifted by `tau`,
/// and echo `j` of bank 2.
pub fn cross_mode_overlap(
    bank1: &AfcBank,
    bank2: &AfcBank,
    tau: f64,
    envelope_fwhm: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(envelope_fwhm > 0.0 && envelope_fwhm.is_finite()) {
        return domain(format!("envelope FWHM must be > 0, got {envelope_fwhm}"));
    }
    let first = retrieval_times(bank1)?;
    let second = retrieval_times(bank2)?;
    // grouping (t1 − t2) + tau makes the swapped call the exact negation
    Ok(first
        .iter()
        .map(|t1| {
            second
                .iter()
                .map(|t2| gaussian_overlap((t1 - t2) + tau, envelope_fwhm))
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityReport {
    pub passed: bool,
    /// Bank indices of the most overlapping echo pair; `None` for a one-mode bank.
    pub worst_pair: Option<(usize, usize)>,
    pub worst_overlap: f64,
    /// Every comb narrower than the spacing between comb centers.
    pub spectrally_separated: bool,
}

/// Checks that no two echoes of one bank overlap by `threshold` or more and
/// that the combs do not overlap in frequency.
pub fn mode_separability_check(
    bank: &AfcBank,
    envelope_fwhm: f64,
    threshold: f64,
) -> Result<SeparabilityReport> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return domain(format!("threshold must lie in (0, 1), got {threshold}"));
    }
    let overlap = cross_mode_overlap(bank, bank, 0.0, envelope_fwhm)?;
    let mut worst_pair = None;
    let mut worst_overlap = 0.0;
    for (i, row) in overlap.iter().enumerate() {
        for (j, &value) in row.iter().enumerate().skip(i + 1) {
            if worst_pair.is_none() || value > worst_overlap {
                worst_pair = Some((i, j));
                worst_overlap = value;
            }
        }
    }
    let spectrally_separated = bank
        .modes()
        .iter()
        .all(|m| m.bandwidth() < bank.mode_spacing());
    Ok(SeparabilityReport {
        passed: spectrally_separated && worst_overlap < threshold,
        worst_pair,
        worst_overlap,
        spectrally_separated,
    })
}

/// CSV with columns `mode_index,retrieval_time_ns,relative_intensity`.
pub fn write_schedule_csv<W: Write>(out: W, events: &[EchoEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["mode_index", "retrieval_time_ns", "relative_intensity"])
        .map_err(csv_io)?;
    for e in events {
        w.write_record([
            e.mode_index().to_string(),
            float17(e.retrieval_time()),
            float17(e.relative_intensity()),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_io(e: csv::Error) -> crate::Error {
    crate::Error::Io(std::io::Error::other(e))
}
