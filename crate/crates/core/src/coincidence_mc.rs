//! Monte Carlo estimates of HOM coincidence probabilities, dip scans, and
//! synthetic coincidence histograms.
//!
//! Two samplers are provided. [`simulate_coincidences`] works directly with
//! the phase-dependent port intensities. [`simulate_coincidences_fock`] draws
//! photon numbers and routes and detects photons one at a time. Both draw
//! the relative laser phase uniformly, which is the source of the phase
//! averaging in the closed form.
//!
//! The Fock sampler does not model amplitude interference photon by photon.
//! Instead it routes each photon to port c with the probability
//! `I_c(θ)/(I_c(θ) + I_d(θ))`. Poisson thinning then makes the port photon
//! numbers independent Poissons with means `I_c(θ)` and `I_d(θ)`, which is
//! exactly what a beam splitter does to a pair of coherent states.

use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::afc_mapping::{cross_mode_overlap, storage_time};
use crate::error::{domain, Error, Result};
use crate::hom_analytic::{coincidence_prob_averaged, envelope_std, temporal_overlap};
use crate::model::{
    AfcBank, CoincidenceHistogram, DipCurve, DipPoint, HomSetup, PulseSpec, HISTOGRAM_BIN_WIDTH_NS,
};
use crate::rng::{count_outcomes, derive_key, tag, trial_stream, uniform};

/// Counts of one Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub trials: u64,
    pub coincidences: u64,
    pub clicks_c: u64,
    pub clicks_d: u64,
    pub p_coin_hat: f64,
    /// Binomial standard error of `p_coin_hat`.
    pub std_error: f64,
}

impl McResult {
    pub fn from_counts(trials: u64, coincidences: u64, clicks_c: u64, clicks_d: u64) -> Self {
        let p = coincidences as f64 / trials as f64;
        Self {
            trials,
            coincidences,
            clicks_c,
            clicks_d,
            p_coin_hat: p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        }
    }
}

fn check_trials(trials: u64) -> Result<()> {
    if trials < 1 {
        return domain("trials must be >= 1");
    }
    Ok(())
}

/// Per-trial click probability, `1 − (1 − d)·exp(−η I)`.
struct ClickModel {
    ln_dark: f64,
    efficiency: f64,
}

impl ClickModel {
    fn new(det: crate::model::DetectorSpec) -> Self {
        Self {
            ln_dark: (-det.dark_count_prob()).ln_1p(),
            efficiency: det.efficiency(),
        }
    }

    fn prob(&self, intensity: f64) -> f64 {
        -(self.ln_dark - self.efficiency * intensity).exp_m1()
    }
}

fn random_phase(rng: &mut rand_philox::Philox) -> f64 {
    std::f64::consts::TAU * uniform(rng)
}

/// Intensity-space sampler: one uniform phase and two Bernoulli clicks per
/// trial.
pub fn simulate_coincidences(setup: &HomSetup, trials: u64, seed: u64) -> Result<McResult> {
    check_trials(trials)?;
    let c = ClickModel::new(setup.det_c());
    let d = ClickModel::new(setup.det_d());
    let [coin, clicks_c, clicks_d] =
        count_outcomes(trials, derive_key(seed, tag::INTENSITY, 0), |rng| {
            let (i_c, i_d) = setup.port_intensities(random_phase(rng));
            let click_c = uniform(rng) < c.prob(i_c);
            let click_d = uniform(rng) < d.prob(i_d);
            [click_c && click_d, click_c, click_d]
        });
    Ok(McResult::from_counts(trials, coin, clicks_c, clicks_d))
}

fn poisson(mean: f64) -> Result<Option<Poisson<f64>>> {
    if mean == 0.0 {
        return Ok(None);
    }
    Poisson::new(mean)
        .map(Some)
        .map_err(|e| Error::Domain(format!("cannot sample Poisson({mean}): {e}")))
}

/// Photon-counting sampler: Poisson photon numbers per input, per-photon
/// routing and detection, then dark counts.
pub fn simulate_coincidences_fock(setup: &HomSetup, trials: u64, seed: u64) -> Result<McResult> {
    check_trials(trials)?;
    let source_a = poisson(setup.mu_a())?;
    let source_b = poisson(setup.mu_b())?;
    let (eta_c, eta_d) = (setup.det_c().efficiency(), setup.det_d().efficiency());
    let (dark_c, dark_d) = (setup.det_c().dark_count_prob(), setup.det_d().dark_count_prob());
    let [coin, clicks_c, clicks_d] = count_outcomes(trials, derive_key(seed, tag::FOCK, 0), |rng| {
        let (i_c, i_d) = setup.port_intensities(random_phase(rng));
        let draw = |s: &Option<Poisson<f64>>, rng: &mut rand_philox::Philox| {
            s.as_ref().map_or(0, |p| p.sample(rng) as u64)
        };
        let photons = draw(&source_a, rng) + draw(&source_b, rng);
        let to_c = if i_c + i_d > 0.0 { i_c / (i_c + i_d) } else { 0.0 };
        let (mut hit_c, mut hit_d) = (false, false);
        for _ in 0..photons {
            if uniform(rng) < to_c {
                hit_c |= uniform(rng) < eta_c;
            } else {
                hit_d |= uniform(rng) < eta_d;
            }
        }
        let click_c = (uniform(rng) < dark_c) | hit_c;
        let click_d = (uniform(rng) < dark_d) | hit_d;
        [click_c && click_d, click_c, click_d]
    });
    Ok(McResult::from_counts(trials, coin, clicks_c, clicks_d))
}

/// Evenly spaced delays from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayGrid {
    min: f64,
    max: f64,
    step: f64,
}

impl DelayGrid {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return domain(format!("delay range needs min < max, got {min}..{max}"));
        }
        if !(step > 0.0 && step.is_finite()) {
            return domain(format!("delay step must be > 0, got {step}"));
        }
        Ok(Self { min, max, step })
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        // tolerate rounding when the span is a whole number of steps
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.min + k as f64 * self.step).collect()
    }
}

impl Default for DelayGrid {
    /// −500 ns to +500 ns in 20 ns steps.
    fn default() -> Self {
        Self {
            min: -500.0,
            max: 500.0,
            step: 20.0,
        }
    }
}

/// Coincidence probability versus delay, normalized by the analytic
/// probability for fully distinguishable inputs.
pub fn dip_scan(
    setup: &HomSetup,
    sigma: f64,
    grid: &DelayGrid,
    trials_per_point: u64,
    seed: u64,
) -> Result<DipCurve> {
    check_trials(trials_per_point)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return domain(format!("sigma must be > 0, got {sigma}"));
    }
    let baseline = coincidence_prob_averaged(&setup.with_temporal_overlap(0.0)?);
    if !(baseline > 0.0) {
        return domain("coincidence probability without interference is zero; nothing to normalize by");
    }
    let points = grid
        .points()
        .into_iter()
        .enumerate()
        .map(|(k, tau)| {
            let at_tau = setup.with_temporal_overlap(temporal_overlap(sigma, tau))?;
            let mc = simulate_coincidences(&at_tau, trials_per_point, derive_key(seed, tag::DIP_POINT, k as u64))?;
            Ok(DipPoint {
                delay: tau,
                normalized_coincidence: mc.p_coin_hat / baseline,
                std_error: mc.std_error / baseline,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DipCurve::new(points)?)
}

/// Cosmetic peak of coincidences from light that passed the memory without
/// being stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArtifactPeak {
    /// ns after the channel-2 trigger.
    pub position: f64,
    pub counts: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub bin_width: f64,
    pub artifact: Option<ArtifactPeak>,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            bin_width: HISTOGRAM_BIN_WIDTH_NS,
            artifact: None,
        }
    }
}

/// Where one mode pair's coincidences landed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesizedPeak {
    pub mode_index: usize,
    /// Peak center, ns after the channel-2 trigger.
    pub center: f64,
    /// Arrival-time difference of the two echoes, channel 1 minus channel 2.
    pub offset: f64,
    pub temporal_overlap: f64,
    pub coincidences: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesizedHistogram {
    pub histogram: CoincidenceHistogram,
    pub peaks: Vec<SynthesizedPeak>,
    /// Overlap of every bank-1 echo with every bank-2 echo at this delay.
    pub cross_overlap: Vec<Vec<f64>>,
    pub artifact_counts: u64,
}

/// Largest |z| kept when drawing event times from the echo envelope.
const TRUNCATION_Z: f64 = 4.0;

fn envelope_offset(rng: &mut rand_philox::Philox, sigma_t: f64) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= TRUNCATION_Z {
            return sigma_t * z;
        }
    }
}

/// Histogram of coincidence-detection times, in the style of a
/// time-interval analyzer started by the channel-2 trigger.
///
/// Mode pair `i` (echo `i` of each bank) contributes a Gaussian peak midway
/// between its two echo times. Its count is a Monte Carlo run of
/// `setups[i]` with the temporal overlap set by the echo offset, so a pair
/// that is badly aligned in time shows no dip. Each event's time is drawn
/// from the echo envelope, truncated at four standard deviations.
pub fn synthesize_histogram(
    banks: (&AfcBank, &AfcBank),
    pulse: &PulseSpec,
    setups: &[HomSetup],
    tau: f64,
    trials: u64,
    seed: u64,
    options: &SynthesisOptions,
) -> Result<SynthesizedHistogram> {
    check_trials(trials)?;
    let (bank1, bank2) = banks;
    if bank1.len() != bank2.len() {
        return Err(Error::Config(format!(
            "banks differ in size ({} vs {})",
            bank1.len(),
            bank2.len()
        )));
    }
    if setups.len() != bank1.len() {
        return Err(Error::Config(format!(
            "need one setup per mode pair: {} modes, {} setups",
            bank1.len(),
            setups.len()
        )));
    }
    if !(options.bin_width > 0.0 && options.bin_width.is_finite()) {
        return Err(Error::Config(format!("bin width must be > 0, got {}", options.bin_width)));
    }
    if !tau.is_finite() {
        return domain("delay must be finite");
    }
    let sigma_t = envelope_std(pulse.fwhm_duration());

    let mut peaks = Vec::with_capacity(setups.len());
    for (i, ((m1, m2), setup)) in bank1.modes().iter().zip(bank2.modes()).zip(setups).enumerate() {
        let t1 = tau + storage_time(m1.comb_spacing())?;
        let t2 = storage_time(m2.comb_spacing())?;
        let offset = t1 - t2;
        let xi = (-offset * offset / (8.0 * sigma_t * sigma_t)).exp();
        let mc = simulate_coincidences(
            &setup.with_temporal_overlap(xi)?,
            trials,
            derive_key(seed, tag::HISTOGRAM_MODE, i as u64),
        )?;
        peaks.push(SynthesizedPeak {
            mode_index: i,
            center: 0.5 * (t1 + t2),
            offset,
            temporal_overlap: xi,
            coincidences: mc.coincidences,
        });
    }

    let artifact = options.artifact.filter(|a| a.counts > 0);
    let centers = peaks.iter().map(|p| p.center).chain(artifact.map(|a| a.position));
    let (lo, hi) = centers.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c), hi.max(c)));
    if !(lo.is_finite() && hi.is_finite()) {
        return domain("histogram span is not finite");
    }
    let margin = (TRUNCATION_Z + 1.0) * sigma_t + options.bin_width;
    let bw = options.bin_width;
    let start = ((lo - margin) / bw).floor() * bw;
    let n_bins = ((hi + margin - start) / bw).ceil() as usize;
    let mut histogram = CoincidenceHistogram::zeros(start, bw, n_bins, tau)?;

    let mut place = |center: f64, count: u64, key: u64| {
        for e in 0..count {
            let t = center + envelope_offset(&mut trial_stream(key, e), sigma_t);
            let k = histogram.bin_index(t).expect("margin covers the truncated envelope");
            histogram.add_count(k, 1);
        }
    };
    for p in &peaks {
        place(p.center, p.coincidences, derive_key(seed, tag::HISTOGRAM_PLACEMENT, p.mode_index as u64));
    }
    if let Some(a) = artifact {
        place(a.position, a.counts, derive_key(seed, tag::HISTOGRAM_ARTIFACT, 0));
    }

    Ok(SynthesizedHistogram {
        histogram,
        peaks,
        cross_overlap: cross_mode_overlap(bank1, bank2, tau, pulse.fwhm_duration())?,
        artifact_counts: artifact.map_or(0, |a| a.counts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hom_analytic::{click_constants, default_sigma, phase_integral_oracle, validation_grid};
    use crate::model::DetectorSpec;

    fn mode1() -> HomSetup {
        HomSetup::experiment_mode(0).unwrap()
    }

    #[test]
    fn result_invariants() {
        let r = McResult::from_counts(1000, 3, 40, 50);
        assert!(r.coincidences <= r.clicks_c.min(r.clicks_d));
        assert!((r.std_error - (0.003f64 * 0.997 / 1000.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(simulate_coincidences(&mode1(), 0, 1).is_err());
        assert!(simulate_coincidences_fock(&mode1(), 0, 1).is_err());
        assert!(dip_scan(&mode1(), 0.0166, &DelayGrid::default(), 0, 1).is_err());
    }

    #[test]
    fn vacuum_gives_no_coincidences() {
        let vac = HomSetup::symmetric(0.0, DetectorSpec::ideal(), 0.0).unwrap();
        for r in [
            simulate_coincidences(&vac, 50_000, 3).unwrap(),
            simulate_coincidences_fock(&vac, 50_000, 3).unwrap(),
        ] {
            assert_eq!((r.coincidences, r.clicks_c, r.clicks_d), (0, 0, 0));
        }
    }

    #[test]
    fn dark_dark_coincidences() {
        let dark = HomSetup::symmetric(0.0, DetectorSpec::new(0.5, 1e-3).unwrap(), 0.0).unwrap();
        let r = simulate_coincidences_fock(&dark, 2_000_000, 11).unwrap();
        assert!((r.p_coin_hat - 1e-6).abs() <= 3.0 * (1e-6f64 / 2e6).sqrt() + 1e-12, "{r:?}");
    }

    #[test]
    fn same_seed_same_result() {
        let a = simulate_coincidences(&mode1(), 100_000, 9).unwrap();
        let b = simulate_coincidences(&mode1(), 100_000, 9).unwrap();
        let c = simulate_coincidences(&mode1(), 100_000, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let f = simulate_coincidences_fock(&mode1(), 100_000, 9).unwrap();
        assert_eq!(f, simulate_coincidences_fock(&mode1(), 100_000, 9).unwrap());
    }

    fn within(r: &McResult, target: f64, n_se: f64) -> bool {
        let se = (target * (1.0 - target) / r.trials as f64).sqrt();
        (r.p_coin_hat - target).abs() <= n_se * se
    }

    #[test]
    fn samplers_match_independence_product_when_distinguishable() {
        let s = mode1().with_temporal_overlap(0.0).unwrap();
        let k = click_constants(&s);
        let target = (1.0 - k.c_const) * (1.0 - k.d_const);
        assert!(within(&simulate_coincidences(&s, 2_000_000, 21).unwrap(), target, 4.0));
        assert!(within(&simulate_coincidences_fock(&s, 2_000_000, 21).unwrap(), target, 4.0));
    }

    #[test]
    fn singles_rates_match_oracle() {
        let s = HomSetup::symmetric(0.5, DetectorSpec::new(0.6, 1e-3).unwrap(), 10.0).unwrap();
        let o = phase_integral_oracle(&s, 4096).unwrap();
        let n = 400_000u64;
        for r in [simulate_coincidences(&s, n, 5).unwrap(), simulate_coincidences_fock(&s, n, 5).unwrap()] {
            for (clicks, p) in [(r.clicks_c, o.singles.0), (r.clicks_d, o.singles.1)] {
                let hat = clicks as f64 / n as f64;
                assert!((hat - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt(), "{hat} vs {p}");
            }
            assert!(within(&r, o.coincidence, 4.0), "{r:?} vs {}", o.coincidence);
        }
    }

    #[test]
    fn estimator_consistency_on_bright_grid_setups() {
        // the grid setups with the largest coincidence probabilities, where
        // 2·10⁴ trials resolve the estimator well
        let mut setups: Vec<(f64, HomSetup)> = validation_grid()
            .into_iter()
            .map(|s| (phase_integral_oracle(&s, 2048).unwrap().coincidence, s))
            .collect();
        setups.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (oracle, setup) in setups.iter().step_by(7).take(8) {
            let mut ok = 0;
            for seed in 0..100 {
                let r = simulate_coincidences(setup, 20_000, seed).unwrap();
                let se = (oracle * (1.0 - oracle) / 20_000.0).sqrt();
                if (r.p_coin_hat - oracle).abs() < 4.0 * se {
                    ok += 1;
                }
            }
            assert!(ok >= 99, "{setup:?}: {ok}/100");
        }
    }

    #[test]
    fn delay_grid_points() {
        let g = DelayGrid::default();
        assert_eq!(g.len(), 51);
        let p = g.points();
        assert_eq!((p[0], p[25], p[50]), (-500.0, 0.0, 500.0));
        assert_eq!(DelayGrid::new(0.0, 1.0, 0.3).unwrap().len(), 4);
        assert!(DelayGrid::new(1.0, 1.0, 1.0).is_err());
        assert!(DelayGrid::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn dip_scan_ideal_and_far_points() {
        let ideal = HomSetup::symmetric(0.01, DetectorSpec::ideal(), 0.0).unwrap();
        let grid = DelayGrid::default();
        let curve = dip_scan(&ideal, 0.01665, &grid, 400_000, 1).unwrap();
        assert_eq!(curve.len(), 51);
        let at = |tau: f64| curve.points().iter().find(|p| p.delay == tau).copied().unwrap();
        let zero = at(0.0);
        assert!((zero.normalized_coincidence - 0.5).abs() <= 3.0 * zero.std_error, "{zero:?}");
        for tau in [-500.0, 500.0] {
            let p = at(tau);
            assert!((p.normalized_coincidence - 1.0).abs() <= 3.0 * p.std_error, "{p:?}");
        }
    }

    #[test]
    fn dip_scan_needs_a_baseline() {
        let vac = HomSetup::symmetric(0.0, DetectorSpec::ideal(), 0.0).unwrap();
        assert!(dip_scan(&vac, default_sigma(), &DelayGrid::default(), 10, 1).is_err());
    }

    fn setups() -> Vec<HomSetup> {
        (0..3).map(|k| HomSetup::experiment_mode(k).unwrap()).collect()
    }

    #[test]
    fn histogram_conserves_counts() {
        let bank = AfcBank::default();
        let pulse = PulseSpec::default();
        let h = synthesize_histogram((&bank, &bank), &pulse, &setups(), 0.0, 200_000, 4, &SynthesisOptions::default()).unwrap();
        let per_mode: u64 = h.peaks.iter().map(|p| p.coincidences).sum();
        assert!(per_mode > 0);
        assert_eq!(h.histogram.total(), per_mode);
        assert_eq!(h.histogram.bin_width(), HISTOGRAM_BIN_WIDTH_NS);
        for p in &h.peaks {
            assert_eq!(p.offset, 0.0);
            assert_eq!(p.temporal_overlap, 1.0);
        }
        // each peak equals an independent run with the same derived seed
        let again = simulate_coincidences(&setups()[1], 200_000, derive_key(4, tag::HISTOGRAM_MODE, 1)).unwrap();
        assert_eq!(h.peaks[1].coincidences, again.coincidences);
    }

    #[test]
    fn histogram_artifact_is_extra() {
        let bank = AfcBank::default();
        let opts = SynthesisOptions {
            artifact: Some(ArtifactPeak { position: 100.0, counts: 250 }),
            ..SynthesisOptions::default()
        };
        let h = synthesize_histogram((&bank, &bank), &PulseSpec::default(), &setups(), 0.0, 100_000, 4, &opts).unwrap();
        let per_mode: u64 = h.peaks.iter().map(|p| p.coincidences).sum();
        assert_eq!(h.histogram.total(), per_mode + 250);
        assert!(h.histogram.bins()[0].bin_start < 100.0 - 4.0 * 42.4);
    }

    #[test]
    fn histogram_cross_overlap_follows_delay() {
        let bank = AfcBank::default();
        let h = synthesize_histogram((&bank, &bank), &PulseSpec::default(), &setups(), -380.0, 1000, 4, &SynthesisOptions::default()).unwrap();
        let m = &h.cross_overlap;
        assert!(m[1][0] > 0.5 && m[2][1] > 0.5);
        // same-mode pairs are 380 ns apart: ξ = exp(−380²/(8σ_t²)) ≈ 4.5e-5
        assert!(h.peaks.iter().all(|p| p.temporal_overlap < 1e-4));
    }

    #[test]
    fn histogram_needs_one_setup_per_mode() {
        let bank = AfcBank::default();
        let err = synthesize_histogram((&bank, &bank), &PulseSpec::default(), &setups()[..2], 0.0, 10, 1, &SynthesisOptions::default());
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
