//! Closed-form HOM physics for phase-randomized weak coherent inputs and
//! threshold detectors.
//!
//! Port intensities at relative phase θ are
//! `I_c(θ) = μ_a t² + μ_b r² + 2tr·sqrt(μ_a μ_b)·ξ·cos φ·cos θ` and
//! `I_d(θ) = μ_a r² + μ_b t² − (same cross term)`; a detector clicks with
//! probability `1 − (1 − d)·exp(−η I)`. Averaging over θ produces the
//! modified Bessel function `I₀`. The phase average is evaluated two ways:
//! in closed form and by direct quadrature ([`phase_integral_oracle`]).

mod bessel;

pub use bessel::{bessel_i0, bessel_i0m1};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::{DetectorSpec, HomSetup, DEFAULT_PULSE_FWHM_NS};

/// Quadrature nodes used when the oracle is run as a reference.
pub const ORACLE_REFERENCE_NODES: usize = 100_000;
pub const ORACLE_MIN_NODES: usize = 64;

/// Temporal standard deviation of a Gaussian intensity envelope with the
/// given FWHM.
pub fn envelope_std(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
}

/// Dip width parameter σ (rad/ns) of a transform-limited Gaussian pulse with
/// the given FWHM duration: `1 / (√2 · temporal std)`.
pub fn sigma_from_fwhm(fwhm_ns: f64) -> f64 {
    1.0 / (std::f64::consts::SQRT_2 * envelope_std(fwhm_ns))
}

/// σ for the default 100 ns pulses, about 0.01665 rad/ns.
pub fn default_sigma() -> f64 {
    sigma_from_fwhm(DEFAULT_PULSE_FWHM_NS)
}

/// Mode overlap `ξ(τ) = exp(−σ²τ²/4)`; its square sets the dip depth.
pub fn temporal_overlap(sigma: f64, tau: f64) -> f64 {
    (-0.25 * sigma * sigma * tau * tau).exp()
}

/// Ideal normalized coincidence probability versus delay,
/// `1 − ½·exp(−σ²τ²/2)`.
pub fn dip_probability(sigma: f64, tau: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return domain(format!("sigma must be > 0, got {sigma}"));
    }
    Ok(1.0 - 0.5 * (-0.5 * sigma * sigma * tau * tau).exp())
}

/// `(P_max − P_min) / P_max`.
pub fn visibility_from_extremes(p_max: f64, p_min: f64) -> Result<f64> {
    if !(p_max > 0.0) {
        return domain(format!("p_max must be > 0, got {p_max}"));
    }
    if !(0.0..=p_max).contains(&p_min) {
        return domain(format!("p_min must lie in [0, p_max], got {p_min}"));
    }
    Ok((p_max - p_min) / p_max)
}

/// No-click probabilities of the two detectors when the interference term
/// is averaged away.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickConstants {
    /// `exp(−η_c·⟨I_c⟩)(1 − d_c)`.
    pub c_const: f64,
    /// `exp(−η_d·⟨I_d⟩)(1 − d_d)`.
    pub d_const: f64,
}

pub fn click_constants(setup: &HomSetup) -> ClickConstants {
    let (ln_c, ln_d) = ln_click_constants(setup);
    ClickConstants {
        c_const: ln_c.exp(),
        d_const: ln_d.exp(),
    }
}

fn ln_no_click(det: DetectorSpec, mean_intensity: f64) -> f64 {
    (-det.dark_count_prob()).ln_1p() - det.efficiency() * mean_intensity
}

fn ln_click_constants(setup: &HomSetup) -> (f64, f64) {
    (
        ln_no_click(setup.det_c(), setup.mean_intensity_c()),
        ln_no_click(setup.det_d(), setup.mean_intensity_d()),
    )
}

/// Which printed form of the coincidence expression to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoincidenceForm {
    /// The phase average derived from the port intensities; agrees with
    /// [`phase_integral_oracle`].
    #[default]
    Corrected,
    /// As typeset in the literature: the second Bessel argument lacks its
    /// factor 2. Kept for comparison only.
    AsPrinted,
}

/// Bessel arguments `(x_c, x_d, x_cross)` of the three interference terms.
fn bessel_arguments(setup: &HomSetup, form: CoincidenceForm) -> (f64, f64, f64) {
    let s = setup.interference_amplitude();
    let eta_c = setup.det_c().efficiency();
    let eta_d = setup.det_d().efficiency();
    let x_d = match form {
        CoincidenceForm::Corrected => 2.0 * eta_d * s,
        CoincidenceForm::AsPrinted => eta_d * s,
    };
    (2.0 * eta_c * s, x_d, 2.0 * (eta_c - eta_d) * s)
}

/// `1 − K·I₀(x)` from `ln K`, without cancellation for small arguments.
fn click_prob(ln_k: f64, x: f64) -> f64 {
    -(ln_k + bessel_i0m1(x).ln_1p()).exp_m1()
}

/// Singles click probabilities `(P^(c), P^(d))`, phase averaged.
pub fn singles_probs(setup: &HomSetup) -> (f64, f64) {
    let (ln_c, ln_d) = ln_click_constants(setup);
    let (x_c, x_d, _) = bessel_arguments(setup, CoincidenceForm::Corrected);
    (click_prob(ln_c, x_c), click_prob(ln_d, x_d))
}

/// Phase-averaged coincidence probability
/// `1 − C·I₀(x_c) − D·I₀(x_d) + CD·I₀(x_c − x_d)`.
pub fn coincidence_prob_averaged(setup: &HomSetup) -> f64 {
    coincidence_prob_with(setup, CoincidenceForm::Corrected)
}

pub fn coincidence_prob_with(setup: &HomSetup, form: CoincidenceForm) -> f64 {
    let (ln_c, ln_d) = ln_click_constants(setup);
    let (x_c, x_d, x_x) = bessel_arguments(setup, form);
    // regrouped as (1 − C·I₀(x_c))(1 − D·I₀(x_d)) + CD·[I₀(x_x) − I₀(x_c)I₀(x_d)]
    let (m_c, m_d, m_x) = (bessel_i0m1(x_c), bessel_i0m1(x_d), bessel_i0m1(x_x));
    let product = click_prob(ln_c, x_c) * click_prob(ln_d, x_d);
    let cross = m_x - m_c - m_d - m_c * m_d;
    (product + (ln_c + ln_d).exp() * cross).max(0.0)
}

/// `V = 1 − P^(coin) / (P^(c) P^(d))` at the setup's temporal overlap.
pub fn visibility_limit(setup: &HomSetup) -> Result<f64> {
    visibility_limit_with(setup, CoincidenceForm::Corrected)
}

pub fn visibility_limit_with(setup: &HomSetup, form: CoincidenceForm) -> Result<f64> {
    let (p_c, p_d) = singles_probs(setup);
    if p_c <= 0.0 || p_d <= 0.0 {
        return domain(format!(
            "visibility undefined with a silent detector (P_c={p_c}, P_d={p_d})"
        ));
    }
    match form {
        CoincidenceForm::Corrected => {
            // equals 1 − P^(coin)/(P^(c)P^(d)) with the common product cancelled
            let (ln_c, ln_d) = ln_click_constants(setup);
            let (x_c, x_d, x_x) = bessel_arguments(setup, form);
            let (m_c, m_d, m_x) = (bessel_i0m1(x_c), bessel_i0m1(x_d), bessel_i0m1(x_x));
            let cross = m_x - m_c - m_d - m_c * m_d;
            Ok(-(ln_c + ln_d).exp() * cross / (p_c * p_d))
        }
        CoincidenceForm::AsPrinted => {
            Ok(1.0 - coincidence_prob_with(setup, form) / (p_c * p_d))
        }
    }
}

/// Phase-averaged probabilities obtained by quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub coincidence: f64,
    pub singles: (f64, f64),
}

/// Averages the per-phase click probabilities over θ ∈ [0, 2π) with the
/// trapezoid rule on `nodes` equally spaced points.
pub fn phase_integral_oracle(setup: &HomSetup, nodes: usize) -> Result<OracleEstimate> {
    if nodes < ORACLE_MIN_NODES {
        return domain(format!(
            "need at least {ORACLE_MIN_NODES} quadrature nodes, got {nodes}"
        ));
    }
    let (det_c, det_d) = (setup.det_c(), setup.det_d());
    let ln_dark_c = (-det_c.dark_count_prob()).ln_1p();
    let ln_dark_d = (-det_d.dark_count_prob()).ln_1p();
    let step = std::f64::consts::TAU / nodes as f64;
    let (mut coin, mut sc, mut sd) = (0.0, 0.0, 0.0);
    for k in 0..nodes {
        let (i_c, i_d) = setup.port_intensities(k as f64 * step);
        let p_c = -(ln_dark_c - det_c.efficiency() * i_c).exp_m1();
        let p_d = -(ln_dark_d - det_d.efficiency() * i_d).exp_m1();
        coin += p_c * p_d;
        sc += p_c;
        sd += p_d;
    }
    let n = nodes as f64;
    Ok(OracleEstimate {
        coincidence: coin / n,
        singles: (sc / n, sd / n),
    })
}

/// The symmetric-setup grid over which closed form, oracle and the
/// weak-coherent visibility bound are cross-checked.
pub fn validation_grid() -> Vec<HomSetup> {
    let mut out = Vec::new();
    for mu in [0.01, 0.031, 0.053, 0.064, 0.2] {
        for eta in [0.2, 0.47, 1.0] {
            for dark in [0.0, 1.5e-4, 1e-3] {
                for phi in [0.0, 3.0, 30.0] {
                    for xi in [0.0, 0.5, 1.0] {
                        let det = DetectorSpec::new(eta, dark).expect("grid detector");
                        let setup = HomSetup::symmetric(mu, det, phi)
                            .and_then(|s| s.with_temporal_overlap(xi))
                            .expect("grid setup");
                        out.push(setup);
                    }
                }
            }
        }
    }
    out
}
