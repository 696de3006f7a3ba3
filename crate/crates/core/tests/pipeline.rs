//! Synthetic histogram through windowing, file round trip and fitting.

use fmhom::analysis::{
    fit_dip, load_histogram, normalize_curve, window_coincidences, windows_around, write_histogram,
};
use fmhom::coincidence_mc::{synthesize_histogram, ArtifactPeak, SynthesisOptions};
use fmhom::hom_analytic::visibility_limit;
use fmhom::model::{AfcBank, HomSetup, PulseSpec};

fn setups() -> Vec<HomSetup> {
    (0..3).map(|m| HomSetup::experiment_mode(m).unwrap()).collect()
}

#[test]
fn windows_recover_every_peak_and_exclude_the_artifact() {
    let bank = AfcBank::default();
    let options = SynthesisOptions {
        artifact: Some(ArtifactPeak {
            position: 100.0,
            counts: 5000,
        }),
        ..SynthesisOptions::default()
    };
    let synth = synthesize_histogram((&bank, &bank), &PulseSpec::default(), &setups(), 0.0, 200_000, 3, &options)
        .unwrap();
    let peaks: Vec<(usize, f64)> = synth.peaks.iter().map(|p| (p.mode_index, p.center)).collect();
    let windows = windows_around(&peaks, 200.0).unwrap();
    let counts = window_coincidences(&synth.histogram, &windows).unwrap();
    for (peak, got) in synth.peaks.iter().zip(&counts) {
        // only the truncated tails of the neighbours can leak in or out
        let diff = (*got as f64 - peak.coincidences as f64).abs();
        assert!(diff <= 0.02 * peak.coincidences as f64 + 3.0, "{peak:?} {got}");
    }
    let total: u64 = synth.peaks.iter().map(|p| p.coincidences).sum();
    assert_eq!(synth.histogram.total(), total + 5000);
}

#[test]
fn histogram_file_round_trip() {
    let bank = AfcBank::default();
    let synth = synthesize_histogram(
        (&bank, &bank),
        &PulseSpec::default(),
        &setups(),
        -380.0,
        50_000,
        8,
        &SynthesisOptions::default(),
    )
    .unwrap();
    let mut buf = Vec::new();
    write_histogram(&mut buf, &synth.histogram).unwrap();
    let back = load_histogram(buf.as_slice()).unwrap();
    assert_eq!(back.bins().len(), synth.histogram.bins().len());
    assert_eq!(back.total(), synth.histogram.total());
    for (a, b) in back.bins().iter().zip(synth.histogram.bins()) {
        assert_eq!(a.count, b.count);
        assert!((a.bin_start - b.bin_start).abs() < 1e-9);
    }
}

#[test]
fn delay_scan_of_windowed_counts_shows_the_dip() {
    let bank = AfcBank::default();
    let setup = HomSetup::experiment_mode(0).unwrap();
    let mut raw = Vec::new();
    for k in -25..=25 {
        let tau = 20.0 * k as f64;
        let synth = synthesize_histogram(
            (&bank, &bank),
            &PulseSpec::default(),
            &[setup; 3],
            tau,
            2_000_000,
            (100 + k) as u64,
            &SynthesisOptions::default(),
        )
        .unwrap();
        let peaks: Vec<(usize, f64)> = synth.peaks.iter().map(|p| (p.mode_index, p.center)).collect();
        let windows = windows_around(&peaks, 200.0).unwrap();
        let counts = window_coincidences(&synth.histogram, &windows).unwrap();
        raw.push((tau, counts[0] as f64));
    }
    let curve = normalize_curve(&raw, 300.0).unwrap();
    let fit = fit_dip(&curve).unwrap();
    let truth = visibility_limit(&setup).unwrap();
    assert!((fit.visibility() - truth).abs() < 0.05, "{fit:?} vs {truth}");
}
