//! Weighted Levenberg–Marquardt fit of `B·(1 − V·exp(−σ²τ²/2))`.

use nalgebra::{Matrix3, Vector3};

use crate::error::{domain, Error, Result};
use crate::model::{DipCurve, DipFitResult};

pub const MAX_ITERATIONS: usize = 200;
const RELATIVE_STEP_TOL: f64 = 1e-10;
const MIN_POINTS: usize = 5;
/// Damping beyond this means no step lowers the cost any further.
const MAX_DAMPING: f64 = 1e16;

#[derive(Clone, Copy, Debug)]
struct Params {
    baseline: f64,
    visibility: f64,
    sigma: f64,
}

impl Params {
    fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.baseline, self.visibility, self.sigma)
    }

    /// Keeps V in [0, 1] and σ positive; σ enters only squared.
    fn projected(v: Vector3<f64>) -> Self {
        Self {
            baseline: v[0],
            visibility: v[1].clamp(0.0, 1.0),
            sigma: v[2].abs(),
        }
    }

    fn is_finite(&self) -> bool {
        self.baseline.is_finite() && self.visibility.is_finite() && self.sigma.is_finite()
    }

    fn to_result(self, cost: f64) -> Option<DipFitResult> {
        DipFitResult::new(self.baseline, self.visibility, self.sigma, cost.max(0.0).sqrt()).ok()
    }
}

struct Data {
    tau: Vec<f64>,
    y: Vec<f64>,
    weight: Vec<f64>,
}

impl Data {
    fn cost(&self, p: &Params) -> f64 {
        self.tau
            .iter()
            .zip(&self.y)
            .zip(&self.weight)
            .map(|((&t, &y), &w)| {
                let r = y - model(p, t).0;
                w * r * r
            })
            .sum()
    }

    /// Normal matrix `JᵀWJ` and gradient `JᵀW r`.
    fn normal_equations(&self, p: &Params) -> (Matrix3<f64>, Vector3<f64>) {
        let mut a = Matrix3::zeros();
        let mut g = Vector3::zeros();
        for ((&t, &y), &w) in self.tau.iter().zip(&self.y).zip(&self.weight) {
            let (f, jac) = model(p, t);
            a += w * jac * jac.transpose();
            g += w * (y - f) * jac;
        }
        (a, g)
    }
}

/// Model value and its gradient in (B, V, σ).
fn model(p: &Params, tau: f64) -> (f64, Vector3<f64>) {
    let g = (-0.5 * p.sigma * p.sigma * tau * tau).exp();
    let f = p.baseline * (1.0 - p.visibility * g);
    let jac = Vector3::new(
        1.0 - p.visibility * g,
        -p.baseline * g,
        p.baseline * p.visibility * g * p.sigma * tau * tau,
    );
    (f, jac)
}

/// Starting point: B from the outer half of the delay range, V from the
/// deepest point, σ from where the curve climbs back to half depth.
fn initial_guess(tau: &[f64], y: &[f64]) -> Result<Params> {
    let reach = tau.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let outer: Vec<f64> = tau
        .iter()
        .zip(y)
        .filter(|(t, _)| t.abs() >= 0.5 * reach)
        .map(|(_, &v)| v)
        .collect();
    let baseline = outer.iter().sum::<f64>() / outer.len() as f64;
    if !(baseline > 0.0 && baseline.is_finite()) {
        return domain(format!("baseline estimate must be positive, got {baseline}"));
    }
    let min = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let visibility = (1.0 - min / baseline).clamp(0.0, 1.0);

    let mut by_reach: Vec<(f64, f64)> = tau.iter().map(|t| t.abs()).zip(y.iter().copied()).collect();
    by_reach.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half_level = baseline * (1.0 - 0.5 * visibility);
    let half_width = if visibility < 1e-12 {
        0.5 * reach
    } else {
        let start = by_reach
            .iter()
            .position(|p| p.1 == min)
            .unwrap_or(0);
        match by_reach[start..].windows(2).find(|w| w[1].1 >= half_level) {
            Some(w) if w[1].1 > w[0].1 => {
                let frac = (half_level - w[0].1) / (w[1].1 - w[0].1);
                w[0].0 + frac * (w[1].0 - w[0].0)
            }
            Some(w) => w[1].0,
            None => reach,
        }
    };
    if !(half_width > 0.0) {
        return domain("cannot estimate the dip width from the data");
    }
    let below = by_reach.iter().any(|p| p.0 < half_width);
    let above = by_reach.iter().any(|p| p.0 > half_width);
    if !(below && above) {
        return domain(format!(
            "need points on both sides of the estimated half width {half_width} ns"
        ));
    }
    Ok(Params {
        baseline,
        visibility,
        sigma: (2.0 * std::f64::consts::LN_2).sqrt() / half_width,
    })
}

fn fit_error(message: impl Into<String>, last: &Params, cost: f64) -> Error {
    Error::Fit {
        message: message.into(),
        last_iterate: last.to_result(cost),
    }
}

/// Fits the Gaussian dip model to `curve`, weighting each point by
/// `1/std_error²`. If any point has a zero error bar all points are
/// weighted equally instead.
pub fn fit_dip(curve: &DipCurve) -> Result<DipFitResult> {
    let points = curve.points();
    if points.len() < MIN_POINTS {
        return domain(format!("need at least {MIN_POINTS} points, got {}", points.len()));
    }
    let tau: Vec<f64> = points.iter().map(|p| p.delay).collect();
    let y: Vec<f64> = points.iter().map(|p| p.normalized_coincidence).collect();
    let weighted = points.iter().all(|p| p.std_error > 0.0);
    let weight = points
        .iter()
        .map(|p| if weighted { 1.0 / (p.std_error * p.std_error) } else { 1.0 })
        .collect();
    let data = Data { tau, y, weight };

    let mut p = initial_guess(&data.tau, &data.y)?;
    let mut cost = data.cost(&p);
    let mut damping = 1e-3;
    for _ in 0..MAX_ITERATIONS {
        let (a, g) = data.normal_equations(&p);
        let floor = 1e-12 * a.diagonal().max();
        let mut accepted = None;
        while damping <= MAX_DAMPING {
            let mut m = a;
            for k in 0..3 {
                m[(k, k)] += damping * (a[(k, k)] + floor);
            }
            let step = m
                .lu()
                .solve(&g)
                .ok_or_else(|| fit_error("singular normal equations", &p, cost))?;
            let trial = Params::projected(p.as_vector() + step);
            if !trial.is_finite() {
                return Err(fit_error("parameters diverged", &p, cost));
            }
            let trial_cost = data.cost(&trial);
            if !trial_cost.is_finite() {
                return Err(fit_error("cost diverged", &p, cost));
            }
            if trial_cost <= cost {
                accepted = Some((trial, trial_cost));
                damping = (damping * 0.1).max(1e-12);
                break;
            }
            damping *= 10.0;
        }
        let Some((next, next_cost)) = accepted else {
            // no downhill step left at machine precision
            break;
        };
        let change = (next.as_vector() - p.as_vector()).abs();
        let scale = p.as_vector().abs();
        let converged = (0..3).all(|k| change[k] <= RELATIVE_STEP_TOL * scale[k].max(f64::MIN_POSITIVE));
        p = next;
        cost = next_cost;
        if converged {
            break;
        }
    }
    if !(p.sigma > 0.0) {
        return Err(fit_error("dip width collapsed to zero", &p, cost));
    }
    p.to_result(cost)
        .ok_or_else(|| fit_error("fitted parameters are out of range", &p, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DipPoint;

    fn synthetic(b: f64, v: f64, sigma: f64, err: f64) -> DipCurve {
        let points = (-25..=25)
            .map(|k| {
                let tau = 20.0 * k as f64;
                DipPoint {
                    delay: tau,
                    normalized_coincidence: b * (1.0 - v * (-0.5 * sigma * sigma * tau * tau).exp()),
                    std_error: err,
                }
            })
            .collect();
        DipCurve::new(points).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn noiseless_recovery_on_grid() {
        for b in [0.5, 1.0, 2.0] {
            for v in [0.1, 0.42, 0.5] {
                for sigma in [0.005, 0.01665, 0.05] {
                    for err in [0.0, 0.01] {
                        let fit = fit_dip(&synthetic(b, v, sigma, err)).unwrap();
                        assert!(rel(fit.baseline(), b) < 1e-6, "B {b} {v} {sigma}: {fit:?}");
                        assert!(rel(fit.visibility(), v) < 1e-6, "V {b} {v} {sigma}: {fit:?}");
                        assert!(rel(fit.sigma(), sigma) < 1e-6, "σ {b} {v} {sigma}: {fit:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn constant_curve_has_no_dip() {
        let fit = fit_dip(&synthetic(0.8, 0.0, 0.01665, 0.01)).unwrap();
        assert!(fit.visibility() < 1e-9);
        assert!(rel(fit.baseline(), 0.8) < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let short = DipCurve::new(synthetic(1.0, 0.4, 0.02, 0.0).points()[..4].to_vec()).unwrap();
        assert!(fit_dip(&short).is_err());
    }

    #[test]
    fn all_zero_curve_rejected() {
        assert!(fit_dip(&synthetic(0.0, 0.0, 0.02, 0.0)).is_err());
    }

    #[test]
    fn full_depth_dip() {
        let fit = fit_dip(&synthetic(1.0, 1.0, 0.02, 0.0)).unwrap();
        assert!(rel(fit.visibility(), 1.0) < 1e-9);
    }
}
