//! Shared domain types.
//!
//! Every type keeps its fields private and is only obtainable through a
//! checking constructor or through deserialization, which runs the same
//! checks. Units at the boundary: times in ns (AFC storage in µs where noted),
//! frequencies in MHz, angles in degrees.

use serde::{Deserialize, Serialize};

use crate::error::{Checker, ValidationError};

/// Input pulse duration, full width at half maximum.
pub const DEFAULT_PULSE_FWHM_NS: f64 = 100.0;
/// Frequency separation between neighbouring combs in a bank.
pub const DEFAULT_MODE_SPACING_MHZ: f64 = 100.0;
/// Width of each comb.
pub const DEFAULT_AFC_BANDWIDTH_MHZ: f64 = 9.2;
/// Comb tooth spacings of the three modes, highest first.
pub const DEFAULT_COMB_SPACINGS_MHZ: [f64; 3] = [1.533, 0.92, 0.652];
/// Midpoint of the observed 7.4 %..13.7 % echo efficiencies.
pub const DEFAULT_ECHO_EFFICIENCY: f64 = 0.10;
/// Time-interval analyzer bin width.
pub const HISTOGRAM_BIN_WIDTH_NS: f64 = 8.192;
/// Mean photon number per input, per frequency mode.
pub const EXPERIMENT_MEAN_PHOTONS: [f64; 3] = [0.064, 0.053, 0.031];
pub const EXPERIMENT_DETECTOR_EFFICIENCY: f64 = 0.47;
pub const EXPERIMENT_DARK_COUNT_PROB: f64 = 1.5e-4;
pub const EXPERIMENT_POL_MISMATCH_DEG: f64 = 3.0;

const LOSSLESS_TOL: f64 = 1e-12;

/// Types whose invariants can be re-checked.
pub trait Validate {
    fn check(&self) -> Result<(), ValidationError>;
}

/// Returns the value unchanged when every invariant holds.
pub fn validate<T: Validate>(value: T) -> Result<T, ValidationError> {
    value.check()?;
    Ok(value)
}

/// Generates the deserialization shadow of a checked type: serde fills the
/// shadow, then the real value is assembled and checked.
macro_rules! checked_serde {
    ($ty:ident, $repr:ident { $($field:ident : $fty:ty),* $(,)? }) => {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct $repr {
            $($field: $fty),*
        }

        impl TryFrom<$repr> for $ty {
            type Error = ValidationError;

            fn try_from(r: $repr) -> Result<Self, ValidationError> {
                validate($ty { $($field: r.$field),* })
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PulseSpecRepr")]
pub struct PulseSpec {
    fwhm_duration: f64,
    mean_photons_per_mode: f64,
    mode_count: u32,
}

checked_serde!(PulseSpec, PulseSpecRepr {
    fwhm_duration: f64,
    mean_photons_per_mode: f64,
    mode_count: u32,
});

impl PulseSpec {
    pub fn new(
        fwhm_duration: f64,
        mean_photons_per_mode: f64,
        mode_count: u32,
    ) -> Result<Self, ValidationError> {
        validate(Self {
            fwhm_duration,
            mean_photons_per_mode,
            mode_count,
        })
    }

    /// FWHM of the pulse envelope, ns.
    pub fn fwhm_duration(&self) -> f64 {
        self.fwhm_duration
    }

    pub fn mean_photons_per_mode(&self) -> f64 {
        self.mean_photons_per_mode
    }

    pub fn mode_count(&self) -> u32 {
        self.mode_count
    }
}

impl Default for PulseSpec {
    fn default() -> Self {
        Self {
            fwhm_duration: DEFAULT_PULSE_FWHM_NS,
            mean_photons_per_mode: EXPERIMENT_MEAN_PHOTONS[0],
            mode_count: 3,
        }
    }
}

impl Validate for PulseSpec {
    fn check(&self) -> Result<(), ValidationError> {
        let mut c = Checker::new();
        c.positive(self.fwhm_duration, "fwhm_duration");
        c.non_negative(self.mean_photons_per_mode, "mean_photons_per_mode");
        c.require(self.mode_count >= 1, "mode_count", "must be >= 1");
        c.finish()
    }
}

/// Threshold single-photon detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DetectorSpecRepr")]
pub struct DetectorSpec {
    efficiency: f64,
    dark_count_prob: f64,
}

checked_serde!(DetectorSpec, DetectorSpecRepr {
    efficiency: f64,
    dark_count_prob: f64,
});

impl DetectorSpec {
    pub fn new(efficiency: f64, dark_count_prob: f64) -> Result<Self, ValidationError> {
        validate(Self {
            efficiency,
            dark_count_prob,
        })
    }

    /// Unit efficiency, no dark counts.
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_count_prob: 0.0,
        }
    }

    /// The SPDs of the reference experiment.
    pub fn experiment() -> Self {
        Self {
            efficiency: EXPERIMENT_DETECTOR_EFFICIENCY,
            dark_count_prob: EXPERIMENT_DARK_COUNT_PROB,
        }
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    /// Click probability per detection window with no light.
    pub fn dark_count_prob(&self) -> f64 {
        self.dark_count_prob
    }
}

impl Validate for DetectorSpec {
    fn check(&self) -> Result<(), ValidationError> {
        let mut c = Checker::new();
        c.probability(self.efficiency, "efficiency");
        c.probability(self.dark_count_prob, "dark_count_prob");
        c.finish()
    }
}

/// Lossless beam splitter given by its amplitude coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SplitterSpecRepr")]
pub struct SplitterSpec {
    t_amp: f64,
    r_amp: f64,
}

checked_serde!(SplitterSpec, SplitterSpecRepr { t_amp: f64, r_amp: f64 });

impl SplitterSpec {
    pub fn new(t_amp: f64, r_amp: f64) -> Result<Self, ValidationError> {
        validate(Self { t_amp, r_amp })
    }

    /// 50:50 splitter.
    pub fn balanced() -> Self {
        Self {
            t_amp: std::f64::consts::FRAC_1_SQRT_2,
            r_amp: std::f64::consts::FRAC_1_SQRT_2,
        }
    }

    /// Splitter with power transmittance `transmittance`.
    pub fn from_transmittance(transmittance: f64) -> Result<Self, ValidationError> {
        if !(0.0..=1.0).contains(&transmittance) {
            let mut c = Checker::new();
            c.probability(transmittance, "transmittance");
            c.finish()?;
        }
        Self::new(transmittance.sqrt(), (1.0 - transmittance).sqrt())
    }

    pub fn t_amp(&self) -> f64 {
        self.t_amp
    }

    pub fn r_amp(&self) -> f64 {
        self.r_amp
    }

    /// Input a and b exchanged, equivalently t and r exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            t_amp: self.r_amp,
            r_amp: self.t_amp,
        }
    }
}

impl Validate for SplitterSpec {
    fn check(&self) -> Result<(), ValidationError> {
        let mut c = Checker::new();
        c.probability(self.t_amp, "t_amp");
        c.probability(self.r_amp, "r_amp");
        let norm = self.t_amp * self.t_amp + self.r_amp * self.r_amp;
        c.require(
            (norm - 1.0).abs() <= LOSSLESS_TOL,
            "t_amp,r_amp",
            format!("t²+r²={norm}≠1"),
        );
        c.finish()
    }
}

/// Full parameterization of one two-input HOM measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HomSetupRepr")]
pub struct HomSetup {
    mu_a: f64,
    mu_b: f64,
    det_c: DetectorSpec,
    det_d: DetectorSpec,
    splitter: SplitterSpec,
    pol_mismatch: f64,
    temporal_overlap: f64,
}

checked_serde!(HomSetup, HomSetupRepr {
    mu_a: f64,
    mu_b: f64,
    det_c: DetectorSpec,
    det_d: DetectorSpec,
    splitter: SplitterSpec,
    pol_mismatch: f64,
    temporal_overlap: f64,
});

impl HomSetup {
    pub fn new(
        mu_a: f64,
        mu_b: f64,
        det_c: DetectorSpec,
        det_d: DetectorSpec,
        splitter: SplitterSpec,
        pol_mismatch: f64,
        temporal_overlap: f64,
    ) -> Result<Self, ValidationError> {
        validate(Self {
            mu_a,
            mu_b,
            det_c,
            det_d,
            splitter,
            pol_mismatch,
            temporal_overlap,
        })
    }

    /// Equal inputs, identical detectors, 50:50 splitter, full temporal overlap.
    pub fn symmetric(
        mu: f64,
        detector: DetectorSpec,
        pol_mismatch: f64,
    ) -> Result<Self, ValidationError> {
        Self::new(
            mu,
            mu,
            detector,
            detector,
            SplitterSpec::balanced(),
            pol_mismatch,
            1.0,
        )
    }

    /// Setup of experiment frequency mode `mode` (0, 1 or 2).
    pub fn experiment_mode(mode: usize) -> Option<Self> {
        let mu = *EXPERIMENT_MEAN_PHOTONS.get(mode)?;
        Some(Self {
            mu_a: mu,
            mu_b: mu,
            det_c: DetectorSpec::experiment(),
            det_d: DetectorSpec::experiment(),
            splitter: SplitterSpec::balanced(),
            pol_mismatch: EXPERIMENT_POL_MISMATCH_DEG,
            temporal_overlap: 1.0,
        })
    }

    pub fn with_temporal_overlap(&self, temporal_overlap: f64) -> Result<Self, ValidationError> {
        validate(Self {
            temporal_overlap,
            ..*self
        })
    }

    pub fn with_pol_mismatch(&self, pol_mismatch: f64) -> Result<Self, ValidationError> {
        validate(Self {
            pol_mismatch,
            ..*self
        })
    }

    pub fn with_mean_photons(&self, mu_a: f64, mu_b: f64) -> Result<Self, ValidationError> {
        validate(Self {
            mu_a,
            mu_b,
            ..*self
        })
    }

    pub fn mu_a(&self) -> f64 {
        self.mu_a
    }

    pub fn mu_b(&self) -> f64 {
        self.mu_b
    }

    pub fn det_c(&self) -> DetectorSpec {
        self.det_c
    }

    pub fn det_d(&self) -> DetectorSpec {
        self.det_d
    }

    pub fn splitter(&self) -> SplitterSpec {
        self.splitter
    }

    /// Polarization mismatch in degrees.
    pub fn pol_mismatch(&self) -> f64 {
        self.pol_mismatch
    }

    pub fn pol_mismatch_rad(&self) -> f64 {
        self.pol_mismatch.to_radians()
    }

    pub fn temporal_overlap(&self) -> f64 {
        self.temporal_overlap
    }

    /// Amplitude of the phase-dependent part of the port intensities,
    /// `tr·sqrt(mu_a mu_b)·xi·cos(phi)`. Zero when the inputs cannot interfere.
    pub fn interference_amplitude(&self) -> f64 {
        self.splitter.t_amp
            * self.splitter.r_amp
            * (self.mu_a * self.mu_b).sqrt()
            * self.temporal_overlap
            * self.pol_mismatch_rad().cos()
    }

    /// Phase-averaged mean photon number reaching port c.
    pub fn mean_intensity_c(&self) -> f64 {
        let (t, r) = (self.splitter.t_amp, self.splitter.r_amp);
        self.mu_a * t * t + self.mu_b * r * r
    }

    /// Phase-averaged mean photon number reaching port d.
    pub fn mean_intensity_d(&self) -> f64 {
        let (t, r) = (self.splitter.t_amp, self.splitter.r_amp);
        self.mu_a * r * r + self.mu_b * t * t
    }

    /// Port intensities at relative optical phase `theta`.
    pub fn port_intensities(&self, theta: f64) -> (f64, f64) {
        let cross = 2.0 * self.interference_amplitude() * theta.cos();
        (
            (self.mean_intensity_c() + cross).max(0.0),
            (self.mean_intensity_d() - cross).max(0.0),
        )
    }
}

impl Default for HomSetup {
    fn default() -> Self {
        Self::experiment_mode(0).expect("mode 0 exists")
    }
}

impl Validate for HomSetup {
    fn check(&self) -> Result<(), ValidationError> {
        let mut c = Checker::new();
        c.non_negative(self.mu_a, "mu_a");
        c.non_negative(self.mu_b, "mu_b");
        c.probability(self.temporal_overlap, "temporal_overlap");
        c.require(
            (0.0..90.0).contains(&self.pol_mismatch),
            "pol_mismatch",
            format!("must lie in [0, 90) degrees, got {}", self.pol_mismatch),
        );
        for (name, det) in [("det_c", &self.det_c), ("det_d", &self.det_d)] {
            if let Err(e) = det.check() {
                for v in e.violations {
                    c.require(false, &format!("{name}.{}", v.field), v.rule);
                }
            }
        }
        if let Err(e) = self.splitter.check() {
            for v in e.violations {
                c.require(false, &format!("splitter.{}", v.field), v.rule);
            }
        }
        c.finish()
    }
}

/// One atomic frequency comb.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AfcModeSpecRepr")]
pub struct AfcModeSpec {
    center_offset: f64,
    comb_spacing: f64,
    bandwidth: f64,
    echo_efficiency: f64,
}

checked_serde!(AfcModeSpec, AfcModeSpecRepr {
    center_offset: f64,
    comb_spacing: f64,
    bandwidth: f64,
    echo_efficiency: f64,
});

impl AfcModeSpec {
    pub fn new(
        center_offset: f64,
        comb_spacing: f64,
        bandwidth: f64,
        echo_efficiency: f64,
    ) -> Result<Self, ValidationError> {
        validate(Self {
            center_offset,
            comb_spacing,
            bandwidth,
            echo_efficiency,
        })
    }

    /// Offset from the bank origin, MHz.
    pub fn center_offset(&self) -> f64 {
        self.center_offset
    }

    /// Tooth spacing, MHz.
    pub fn comb_spacing(&self) -> f64 {
        self.comb_spacing
    }

    /// Comb width, MHz.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn echo_efficiency(&self) -> f64 {
        self.echo_efficiency
    }
}

impl Validate for AfcModeSpec {
    fn check(&self) -> Result<(), ValidationError> {
        let mut c = Checker::new();
        c.require(
            self.center_offset.is_finite(),
            "center_offset",
            "must be finite",
        );
        c.positive(self.comb_spacing, "comb_spacing");
        c.require(
            self.bandwidth > self.comb_spacing,
            "bandwidth",
            format!(
                "must exceed comb_spacing ({} <= {})",
                self.bandwidth, self.comb_spacing
            ),
        );
        c.probability(self.echo_efficiency, "echo_efficiency");
        c.finish()
    }
}

/// Frequency-multiplexed set of combs prepared in one crystal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AfcBankRepr")]
pub struct AfcBank {
    modes: Vec<AfcModeSpec>,
    mode_spacing: f64,
}

checked_serde!(AfcBank, AfcBankRepr {
    modes: Vec<AfcModeSpec>,
    mode_spacing: f64,
});

impl AfcBank {
    pub fn new(modes: Vec<AfcModeSpec>, mode_spacing: f64) -> Result<Self, ValidationError> {
        validate(Self {
            modes,
            mode_spacing,
        })
    }

    /// Combs at 0, `mode_spacing`, 2·`mode_spacing`, ... with the given tooth
    /// spacings and a shared bandwidth and efficiency.
    pub fn evenly_spaced(
        comb_spacings: &[f64],
        mode_spacing: f64,
        bandwidth: f64,
        echo_efficiency: f64,
    ) -> Result<Self, ValidationError> {
        let modes = comb_spacings
            .iter()
            .enumerate()
            .map(|(i, &delta)| AfcModeSpec {
                center_offset: i as f64 * mode_spacing,
                comb_spacing: delta,
                bandwidth,
                echo_efficiency,
            })
            .collect();
        Self::new(modes, mode_spacing)
    }

    pub fn modes(&self) -> &[AfcModeSpec] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Separation between neighbouring comb centers, MHz.
    pub fn mode_spacing(&self) -> f64 {
        self.mode_spacing
    }
}

impl Default for AfcBank {
    fn default() -> Self {
        Self::evenly_spaced(
            &DEFAULT_COMB_SPACINGS_MHZ,
            DEFAULT_MODE_SPACING_MHZ,
            DEFAULT_AFC_BANDWIDTH_MHZ,
            DEFAULT_ECHO_EFFICIENCY,
        )
        .expect("default bank is valid")
    }
}

impl Validate for AfcBank {
    fn check(&self) -> Result<(), ValidationError> {
        let mut c = Checker::new();
        c.require(!self.modes.is_empty(), "modes", "must hold at least one mode");
        c.positive(self.mode_spacing, "mode_spacing");
        for (i, m) in self.modes.iter().enumerate() {
            if let Err(e) = m.check() {
                for v in e.violations {
                    c.require(false, &format!("modes[{i}].{}", v.field), v.rule);
                }
            }
            c.require(
                m.bandwidth < self.mode_spacing,
                &format!("modes[{i}].bandwidth"),
                format!(
                    "must be below mode_spacing to avoid spectral overlap ({} >= {})",
                    m.bandwidth, self.mode_spacing
                ),
            );
        }
        for (i, pair) in self.modes.windows(2).enumerate() {
            let step = pair[1].center_offset - pair[0].center_offset;
            let tol = 1e-9 * self.mode_spacing.abs().max(1.0);
            c.require(
                (step - self.mode_spacing).abs() <= tol,
                &format!("modes[{}].center_offset", i + 1),
                format!(
                    "must sit mode_spacing={} above the previous mode, got step {step}",
                    self.mode_spacing
                ),
            );
        }
        c.finish()
    }
}

/// One retrieved photon echo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EchoEventRepr")]
pub struct EchoEvent {
    mode_index: usize,
    retrieval_time: f64,
    envelope_fwhm: f64,
    relative_intensity: f64,
}

checked_serde!(EchoEvent, EchoEventRepr {
    mode_index: usize,
    retrieval_time: f64,
    envelope_fwhm: f64,
    relative_intensity: f64,
});

impl EchoEvent {
    pub fn new(
        mode_index: usize,
        retrieval_time: f64,
        envelope_fwhm: f64,
        relative_intensity: f64,
    ) -> Result<Self, ValidationError> {
        validate(Self {
            mode_index,
            retrieval_time,
            envelope_fwhm,
            relative_intensity,
        })
    }

    /// Position of the source comb in its bank (0-based).
    pub fn mode_index(&self) -> usize {
        self.mode_index
    }

    /// ns after the reference trigger.
    pub fn retrieval_time(&self) -> f64 {
        self.retrieval_time
    }

    pub fn envelope_fwhm(&self) -> f64 {
        self.envelope_fwhm
    }

    pub fn relative_intensity(&self) -> f64 {
        self.relative_intensity
    }
}

impl Validate for EchoEvent {
    fn check(&self) -> Result<(), ValidationError> {
        let mut c = Checker::new();
        c.require(
            self.retrieval_time.is_finite(),
            "retrieval_time",
            "must be finite",
        );
        c.positive(self.envelope_fwhm, "envelope_fwhm");
        c.non_negative(self.relative_intensity, "relative_intensity");
        c.finish()
    }
}

/// Inputs to the multiplexed-link success probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LinkParamsRepr")]
pub struct LinkParams {
    p_arrival: f64,
    n_modes: u32,
    eta_two_photon: f64,
    eta_one_photon: f64,
}

checked_serde!(LinkParams, LinkParamsRepr {
    p_arrival: f64,
    n_modes: u32,
    eta_two_photon: f64,
    eta_one_photon: f64,
});

impl LinkParams {
    pub fn new(
        p_arrival: f64,
        n_modes: u32,
        eta_two_photon: f64,
        eta_one_photon: f64,
    ) -> Result<Self, ValidationError> {
        validate(Self {
            p_arrival,
            n_modes,
            eta_two_photon,
            eta_one_photon,
        })
    }

    /// Unit efficiency factors.
    pub fn lossless(p_arrival: f64, n_modes: u32) -> Result<Self, ValidationError> {
        Self::new(p_arrival, n_modes, 1.0, 1.0)
    }

    pub fn with_n_modes(&self, n_modes: u32) -> Result<Self, ValidationError> {
        validate(Self { n_modes, ..*self })
    }

    pub fn p_arrival(&self) -> f64 {
        self.p_arrival
    }

    pub fn n_modes(&self) -> u32 {
        self.n_modes
    }

    pub fn eta_two_photon(&self) -> f64 {
        self.eta_two_photon
    }

    pub fn eta_one_photon(&self) -> f64 {
        self.eta_one_photon
    }
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            p_arrival: 0.01,
            n_modes: 3,
            eta_two_photon: 1.0,
            eta_one_photon: 1.0,
        }
    }
}

impl Validate for LinkParams {
    fn check(&self) -> Result<(), ValidationError> {
        let mut c = Checker::new();
        c.probability(self.p_arrival, "p_arrival");
        c.require(self.n_modes >= 1, "n_modes", "must be >= 1");
        c.non_negative(self.eta_two_photon, "eta_two_photon");
        c.non_negative(self.eta_one_photon, "eta_one_photon");
        c.finish()
    }
}

/// Inputs to the heralding-rate bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RateParamsRepr")]
pub struct RateParams {
    n_modes: u32,
    t_afc: f64,
    eta_afc: f64,
    l_fiber: f64,
    r_wc: f64,
}

checked_serde!(RateParams, RateParamsRepr {
    n_modes: u32,
    t_afc: f64,
    eta_afc: f64,
    l_fiber: f64,
    r_wc: f64,
});

impl RateParams {
    pub fn new(
        n_modes: u32,
        t_afc: f64,
        eta_afc: f64,
        l_fiber: f64,
        r_wc: f64,
    ) -> Result<Self, ValidationError> {
        validate(Self {
            n_modes,
            t_afc,
            eta_afc,
            l_fiber,
            r_wc,
        })
    }

    /// Three modes, 1.52 µs storage, 10 % memory efficiency, 50 km fiber per
    /// half link, 50 % wavelength conversion.
    pub fn experiment() -> Self {
        Self {
            n_modes: 3,
            t_afc: 1.52,
            eta_afc: 0.1,
            l_fiber: 0.1,
            r_wc: 0.5,
        }
    }

    /// Thirty modes, 13.3 µs storage, 20 % memory efficiency, 60 % conversion.
    pub fn feasible_optimum() -> Self {
        Self {
            n_modes: 30,
            t_afc: 13.3,
            eta_afc: 0.2,
            l_fiber: 0.1,
            r_wc: 0.6,
        }
    }

    pub fn with_n_modes(&self, n_modes: u32) -> Result<Self, ValidationError> {
        validate(Self { n_modes, ..*self })
    }

    pub fn n_modes(&self) -> u32 {
        self.n_modes
    }

    /// Maximum storage time, µs.
    pub fn t_afc(&self) -> f64 {
        self.t_afc
    }

    pub fn eta_afc(&self) -> f64 {
        self.eta_afc
    }

    pub fn l_fiber(&self) -> f64 {
        self.l_fiber
    }

    pub fn r_wc(&self) -> f64 {
        self.r_wc
    }
}

impl Default for RateParams {
    fn default() -> Self {
        Self::experiment()
    }
}

impl Validate for RateParams {
    fn check(&self) -> Result<(), ValidationError> {
        let mut c = Checker::new();
        c.require(self.n_modes >= 1, "n_modes", "must be >= 1");
        c.positive(self.t_afc, "t_afc");
        c.probability(self.eta_afc, "eta_afc");
        c.probability(self.l_fiber, "l_fiber");
        c.probability(self.r_wc, "r_wc");
        c.finish()
    }
}

/// One histogram bin: left edge in ns and a count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_start: f64,
    pub count: u64,
}

/// Binned coincidence counts recorded at one delay setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CoincidenceHistogramRepr")]
pub struct CoincidenceHistogram {
    bin_width: f64,
    bins: Vec<HistogramBin>,
    delay_setting: f64,
}

checked_serde!(CoincidenceHistogram, CoincidenceHistogramRepr {
    bin_width: f64,
    bins: Vec<HistogramBin>,
    delay_setting: f64,
});

impl CoincidenceHistogram {
    pub fn new(
        bin_width: f64,
        bins: Vec<HistogramBin>,
        delay_setting: f64,
    ) -> Result<Self, ValidationError> {
        validate(Self {
            bin_width,
            bins,
            delay_setting,
        })
    }

    /// Contiguous zero-count bins covering `[start, start + n·bin_width)`.
    pub fn zeros(start: f64, bin_width: f64, n: usize, delay_setting: f64) -> Result<Self, ValidationError> {
        let bins = (0..n)
            .map(|k| HistogramBin {
                bin_start: start + k as f64 * bin_width,
                count: 0,
            })
            .collect();
        Self::new(bin_width, bins, delay_setting)
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn bins(&self) -> &[HistogramBin] {
        &self.bins
    }

    pub fn delay_setting(&self) -> f64 {
        self.delay_setting
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Index of the bin holding time `t`, if any.
    pub fn bin_index(&self, t: f64) -> Option<usize> {
        let first = self.bins.first()?.bin_start;
        let k = ((t - first) / self.bin_width).floor();
        if k < 0.0 || k >= self.bins.len() as f64 {
            None
        } else {
            Some(k as usize)
        }
    }

    pub(crate) fn add_count(&mut self, index: usize, count: u64) {
        self.bins[index].count += count;
    }
}

impl Validate for CoincidenceHistogram {
    fn check(&self) -> Result<(), ValidationError> {
        let mut c = Checker::new();
        c.positive(self.bin_width, "bin_width");
        c.require(
            self.delay_setting.is_finite(),
            "delay_setting",
            "must be finite",
        );
        for (i, pair) in self.bins.windows(2).enumerate() {
            let step = pair[1].bin_start - pair[0].bin_start;
            let tol = 1e-9 * pair[1].bin_start.abs().max(self.bin_width).max(1.0);
            c.require(
                (step - self.bin_width).abs() <= tol,
                &format!("bins[{}].bin_start", i + 1),
                format!(
                    "bins must be contiguous: expected step {}, got {step}",
                    self.bin_width
                ),
            );
        }
        c.finish()
    }
}

/// One point of a coincidence-versus-delay curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipPoint {
    /// Delay between the two inputs, ns.
    pub delay: f64,
    pub normalized_coincidence: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DipCurveRepr")]
pub struct DipCurve {
    points: Vec<DipPoint>,
}

checked_serde!(DipCurve, DipCurveRepr { points: Vec<DipPoint> });

impl DipCurve {
    pub fn new(points: Vec<DipPoint>) -> Result<Self, ValidationError> {
        validate(Self { points })
    }

    pub fn points(&self) -> &[DipPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Validate for DipCurve {
    fn check(&self) -> Result<(), ValidationError> {
        let mut c = Checker::new();
        for (i, p) in self.points.iter().enumerate() {
            c.require(
                p.delay.is_finite(),
                &format!("points[{i}].delay"),
                "must be finite",
            );
            c.non_negative(
                p.normalized_coincidence,
                &format!("points[{i}].normalized_coincidence"),
            );
            c.non_negative(p.std_error, &format!("points[{i}].std_error"));
        }
        for (i, pair) in self.points.windows(2).enumerate() {
            c.require(
                pair[1].delay > pair[0].delay,
                &format!("points[{}].delay", i + 1),
                "delays must be strictly increasing",
            );
        }
        c.finish()
    }
}

/// Fitted parameters of `B·(1 − V·exp(−σ²τ²/2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DipFitResultRepr")]
pub struct DipFitResult {
    baseline: f64,
    visibility: f64,
    sigma: f64,
    residual_norm: f64,
}

checked_serde!(DipFitResult, DipFitResultRepr {
    baseline: f64,
    visibility: f64,
    sigma: f64,
    residual_norm: f64,
});

impl DipFitResult {
    pub fn new(
        baseline: f64,
        visibility: f64,
        sigma: f64,
        residual_norm: f64,
    ) -> Result<Self, ValidationError> {
        validate(Self {
            baseline,
            visibility,
            sigma,
            residual_norm,
        })
    }

    /// Far-delay coincidence level, P_max.
    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    /// rad/ns.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Weighted residual 2-norm at the solution.
    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }

    /// Dip floor, `B(1 − V)`.
    pub fn p_min(&self) -> f64 {
        self.baseline * (1.0 - self.visibility)
    }
}

impl Validate for DipFitResult {
    fn check(&self) -> Result<(), ValidationError> {
        let mut c = Checker::new();
        c.require(self.baseline.is_finite(), "baseline", "must be finite");
        c.probability(self.visibility, "visibility");
        c.positive(self.sigma, "sigma");
        c.non_negative(self.residual_norm, "residual_norm");
        c.finish()
    }
}
