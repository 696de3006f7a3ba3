//! Success probabilities of a frequency-multiplexed repeater link and the
//! heralding-rate ceiling set by the memory's frequency-to-time mapping.
//!
//! One repeater node joins two elementary links. Each link carries `N`
//! frequency modes, and each mode succeeds with probability `q`. The
//! two-photon scheme has `q = p²` and the one-photon scheme has
//! `q = 1 − (1 − p)²`. The swap needs both links to succeed in the same mode.
//!
//! With mode matching, any pair of successful modes can be joined. Without
//! it, the closed form divides by `N`. [`simulate_link_mc`] runs the
//! explicit process in which each link announces one of its successful
//! modes uniformly at random. Its expectation is `(1/N)·[1 − (1 − q)^N]²`,
//! which is exactly the closed form. This holds for any number of successful
//! modes per link.

use std::io::Write;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::afc_mapping::csv_io;
use crate::error::{domain, Result};
use crate::format::float17;
use crate::model::{LinkParams, RateParams};
use crate::rng::{count_outcomes, derive_key, tag, uniform};

/// `1 − (1 − p)^n`, accurate when `p` is tiny.
fn at_least_one(p: f64, n: f64) -> f64 {
    if p >= 1.0 {
        return 1.0;
    }
    -(n * (-p).ln_1p()).exp_m1()
}

/// Success probability of one elementary link in at least one mode:
/// `1 − (1 − p²)^N` for two-photon links, `1 − (1 − p)^{2N}` for one-photon
/// links.
pub fn single_link_success(p: f64, n_modes: u32, two_photon: bool) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("p must lie in [0, 1], got {p}"));
    }
    if n_modes < 1 {
        return domain("need at least one mode");
    }
    let n = f64::from(n_modes);
    Ok(if two_photon {
        at_least_one(p * p, n)
    } else {
        at_least_one(p, 2.0 * n)
    })
}

/// Per-mode success probability `q` on one elementary link.
pub fn mode_success(p: f64, two_photon: bool) -> f64 {
    if two_photon {
        p * p
    } else {
        p * (2.0 - p)
    }
}

fn matching_factor(n_modes: u32, matched: bool) -> f64 {
    if matched {
        1.0
    } else {
        1.0 / f64::from(n_modes)
    }
}

/// Swap success in the two-photon scheme. The exact form is
/// `η·[1 − (1 − p²)^N]²`, divided by `N` without mode matching. The
/// small-p forms are `η·N·p⁴` without matching and `η·N²·p⁴` with it.
pub fn p_two_photon(params: &LinkParams, matched: bool, exact: bool) -> Result<f64> {
    let (p, n) = (params.p_arrival(), params.n_modes());
    let eta = params.eta_two_photon();
    let nf = f64::from(n);
    Ok(if exact {
        let s = single_link_success(p, n, true)?;
        eta * s * s * matching_factor(n, matched)
    } else {
        let gain = if matched { nf * nf } else { nf };
        eta * gain * p.powi(4)
    })
}

/// Swap success in the one-photon scheme. The exact form is
/// `η′·[1 − (1 − p)^{2N}]²`, divided by `N` without mode matching. The
/// small-p forms are `η′·4N·p²` without matching and `η′·4N²·p²` with it.
pub fn p_one_photon(params: &LinkParams, matched: bool, exact: bool) -> Result<f64> {
    let (p, n) = (params.p_arrival(), params.n_modes());
    let eta = params.eta_one_photon();
    let nf = f64::from(n);
    Ok(if exact {
        let s = single_link_success(p, n, false)?;
        eta * s * s * matching_factor(n, matched)
    } else {
        let gain = if matched { nf * nf } else { nf };
        eta * 4.0 * gain * p * p
    })
}

/// Upper bound on the heralding rate in counts/s:
/// `(N/t_AFC)·(η_AFC·L·R)²` for two photons, `(N/t_AFC)·η_AFC·L·R` for one.
pub fn r_limit(params: &RateParams, two_photon: bool) -> f64 {
    let per_second = f64::from(params.n_modes()) / (params.t_afc() * 1e-6);
    let chain = params.eta_afc() * params.l_fiber() * params.r_wc();
    if two_photon {
        per_second * chain * chain
    } else {
        per_second * chain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkMcResult {
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub std_error: f64,
}

impl LinkMcResult {
    pub fn from_counts(trials: u64, successes: u64) -> Self {
        let p = successes as f64 / trials as f64;
        Self {
            trials,
            successes,
            p_hat: p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        }
    }
}

/// Draws which modes succeed on one link and returns the mode it announces,
/// chosen uniformly among the successful ones by reservoir sampling.
fn run_link(rng: &mut rand_philox::Philox, n_modes: u32, q: f64) -> Option<u32> {
    let mut seen = 0u32;
    let mut chosen = None;
    for mode in 0..n_modes {
        if uniform(rng) < q {
            seen += 1;
            if rng.bounded(seen) == 0 {
                chosen = Some(mode);
            }
        }
    }
    chosen
}

/// Monte Carlo of the explicit link process: per-mode successes on both
/// links, then the swap, then a final thinning by `η` (or `η′`).
pub fn simulate_link_mc(
    params: &LinkParams,
    matched: bool,
    two_photon: bool,
    trials: u64,
    seed: u64,
) -> Result<LinkMcResult> {
    if trials < 1 {
        return domain("trials must be >= 1");
    }
    let eta = if two_photon {
        params.eta_two_photon()
    } else {
        params.eta_one_photon()
    };
    if eta > 1.0 {
        return domain(format!(
            "the link simulation applies the efficiency as a probability; got {eta} > 1"
        ));
    }
    let q = mode_success(params.p_arrival(), two_photon);
    let n_modes = params.n_modes();
    let key = derive_key(seed, tag::LINK, u64::from(two_photon) << 1 | u64::from(matched));
    let [successes] = count_outcomes(trials, key, |rng| {
        let left = run_link(rng, n_modes, q);
        let right = run_link(rng, n_modes, q);
        let swapped = match (left, right) {
            (Some(a), Some(b)) => matched || a == b,
            _ => false,
        };
        [swapped && uniform(rng) < eta]
    });
    Ok(LinkMcResult::from_counts(trials, successes))
}

/// One row of a rate table: every success probability and both rate bounds
/// at a given mode count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n_modes: u32,
    pub p_arrival: f64,
    pub p2_unmatched_exact: f64,
    pub p2_unmatched_approx: f64,
    pub p2_matched_exact: f64,
    pub p2_matched_approx: f64,
    pub p1_unmatched_exact: f64,
    pub p1_unmatched_approx: f64,
    pub p1_matched_exact: f64,
    pub p1_matched_approx: f64,
    pub r_limit_two_photon: f64,
    pub r_limit_one_photon: f64,
}

/// One row per mode count in `modes`, overriding the mode count in both
/// parameter sets.
pub fn rate_table(
    link: &LinkParams,
    rates: &RateParams,
    modes: RangeInclusive<u32>,
) -> Result<Vec<RateRow>> {
    if modes.is_empty() || *modes.start() < 1 {
        return domain(format!("mode sweep must be a non-empty range from 1 up, got {modes:?}"));
    }
    modes
        .map(|n| {
            let l = link.with_n_modes(n)?;
            let r = rates.with_n_modes(n)?;
            Ok(RateRow {
                n_modes: n,
                p_arrival: l.p_arrival(),
                p2_unmatched_exact: p_two_photon(&l, false, true)?,
                p2_unmatched_approx: p_two_photon(&l, false, false)?,
                p2_matched_exact: p_two_photon(&l, true, true)?,
                p2_matched_approx: p_two_photon(&l, true, false)?,
                p1_unmatched_exact: p_one_photon(&l, false, true)?,
                p1_unmatched_approx: p_one_photon(&l, false, false)?,
                p1_matched_exact: p_one_photon(&l, true, true)?,
                p1_matched_approx: p_one_photon(&l, true, false)?,
                r_limit_two_photon: r_limit(&r, true),
                r_limit_one_photon: r_limit(&r, false),
            })
        })
        .collect()
}

pub const RATE_TABLE_HEADER: [&str; 12] = [
    "N",
    "p",
    "p2_unmatched_exact",
    "p2_unmatched_approx",
    "p2_matched_exact",
    "p2_matched_approx",
    "p1_unmatched_exact",
    "p1_unmatched_approx",
    "p1_matched_exact",
    "p1_matched_approx",
    "r_limit_two_photon",
    "r_limit_one_photon",
];

pub fn write_rate_table_csv<W: Write>(out: W, rows: &[RateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RATE_TABLE_HEADER).map_err(csv_io)?;
    for r in rows {
        let mut record = vec![r.n_modes.to_string()];
        record.extend(
            [
                r.p_arrival,
                r.p2_unmatched_exact,
                r.p2_unmatched_approx,
                r.p2_matched_exact,
                r.p2_matched_approx,
                r.p1_unmatched_exact,
                r.p1_unmatched_approx,
                r.p1_matched_exact,
                r.p1_matched_approx,
                r.r_limit_two_photon,
                r.r_limit_one_photon,
            ]
            .map(float17),
        );
        w.write_record(&record).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}
