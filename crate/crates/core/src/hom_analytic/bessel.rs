//! Modified Bessel function of the first kind, order zero.
//!
//! The power series has only positive terms, so it is summed directly up to
//! `SERIES_LIMIT`; beyond that the large-argument expansion is used, whose
//! smallest term there is far below f64 resolution.

use std::f64::consts::PI;

const SERIES_LIMIT: f64 = 30.0;

/// `I₀(x)`.
pub fn bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        1.0 + series_tail(x)
    } else {
        asymptotic(x)
    }
}

/// `I₀(x) − 1`, accurate for small `x` where `I₀(x)` is close to one.
pub fn bessel_i0m1(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        series_tail(x)
    } else {
        asymptotic(x) - 1.0
    }
}

/// `Σ_{k≥1} (x²/4)^k / (k!)²`.
fn series_tail(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..500 {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    sum
}

/// `e^x / sqrt(2πx) · Σ_k ((2k−1)!!)² / (k! (8x)^k)`.
fn asymptotic(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        let next = term * odd * odd / (8.0 * k as f64 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= 1e-17 * sum {
            break;
        }
    }
    // split the exponential so that I0 stays finite right up to its overflow point
    let half = (0.5 * x).exp();
    half * (half / (2.0 * PI * x).sqrt()) * sum
}
