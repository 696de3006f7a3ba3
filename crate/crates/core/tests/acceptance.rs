//! Acceptance checks. Runs without the libtest harness so that every
//! criterion prints exactly one PASS or FAIL line, even when all pass.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::Instant;

use fmhom::afc_mapping::{cross_mode_overlap, mode_separability_check, storage_time};
use fmhom::analysis::fit_dip;
use fmhom::coincidence_mc::{dip_scan, simulate_coincidences, simulate_coincidences_fock, DelayGrid};
use fmhom::hom_analytic::{
    coincidence_prob_averaged, default_sigma, dip_probability, phase_integral_oracle, validation_grid,
    visibility_limit, ORACLE_REFERENCE_NODES,
};
use fmhom::model::{AfcBank, DipCurve, DipPoint, HomSetup, LinkParams, RateParams};
use fmhom::repeater_rates::{mode_success, p_one_photon, p_two_photon, r_limit, simulate_link_mc};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Phase-averaged coincidence probability by midpoint quadrature, written
/// out from the port intensities of two phase-randomized coherent states.
fn quadrature_coincidence(setup: &HomSetup, nodes: usize) -> f64 {
    let split = setup.splitter();
    let (t, r) = (split.t_amp(), split.r_amp());
    let (mu_a, mu_b) = (setup.mu_a(), setup.mu_b());
    let base_c = mu_a * t * t + mu_b * r * r;
    let base_d = mu_a * r * r + mu_b * t * t;
    let cross = 2.0 * t * r * (mu_a * mu_b).sqrt() * setup.temporal_overlap() * setup.pol_mismatch().to_radians().cos();
    let (det_c, det_d) = (setup.det_c(), setup.det_d());
    let click = |eff: f64, dark: f64, intensity: f64| 1.0 - (1.0 - dark) * (-eff * intensity.max(0.0)).exp();
    let mut sum = 0.0;
    for k in 0..nodes {
        let theta = 2.0 * PI * (k as f64 + 0.5) / nodes as f64;
        let c = click(det_c.efficiency(), det_c.dark_count_prob(), base_c + cross * theta.cos());
        let d = click(det_d.efficiency(), det_d.dark_count_prob(), base_d - cross * theta.cos());
        sum += c * d;
    }
    sum / nodes as f64
}

fn rate_reproduction() -> Outcome {
    let exp = RateParams::experiment();
    let opt = RateParams::feasible_optimum();
    let values = [
        r_limit(&exp, true),
        r_limit(&exp, false),
        r_limit(&opt, true),
        r_limit(&opt, false),
    ];
    let ok = (values[0] - 49.0).abs() <= 1.0
        && (values[1] / 9.9e3 - 1.0).abs() <= 0.02
        && (values[2] / 3.2e2 - 1.0).abs() <= 0.02
        && (values[3] / 2.7e4 - 1.0).abs() <= 0.02;
    check(
        ok,
        format!(
            "two-photon {:.2}, one-photon {:.1}; optimum {:.2}, {:.1} counts/s",
            values[0], values[1], values[2], values[3]
        ),
    )
}

fn visibility_limits() -> Outcome {
    let v: Vec<f64> = (0..3)
        .map(|m| visibility_limit(&HomSetup::experiment_mode(m).unwrap()).unwrap())
        .collect();
    let mut worst: f64 = 0.0;
    for setup in validation_grid() {
        let closed = coincidence_prob_averaged(&setup);
        let oracle = phase_integral_oracle(&setup, ORACLE_REFERENCE_NODES).unwrap().coincidence;
        let independent = quadrature_coincidence(&setup, ORACLE_REFERENCE_NODES);
        for reference in [oracle, independent] {
            worst = worst.max((closed - reference).abs() / reference);
        }
    }
    let ok = (v[0] - 0.486).abs() <= 0.005
        && v[1..].iter().all(|x| (0.45..=0.50).contains(x))
        && worst <= 1e-9;
    check(
        ok,
        format!(
            "modes {:.4}/{:.4}/{:.4}; worst closed-form vs quadrature relative gap {worst:.2e}",
            v[0], v[1], v[2]
        ),
    )
}

fn sampler_equivalence() -> Outcome {
    const TRIALS: u64 = 10_000_000;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for mode in 0..3 {
        for xi in [0.0, 0.5, 1.0] {
            let setup = HomSetup::experiment_mode(mode).unwrap().with_temporal_overlap(xi).unwrap();
            let oracle = phase_integral_oracle(&setup, ORACLE_REFERENCE_NODES).unwrap().coincidence;
            let seed = 1000 + 10 * mode as u64 + (2.0 * xi) as u64;
            for (name, mc) in [
                ("intensity", simulate_coincidences(&setup, TRIALS, seed).unwrap()),
                ("fock", simulate_coincidences_fock(&setup, TRIALS, seed).unwrap()),
            ] {
                // oracle is exact, so the combined error is the MC error alone
                let z = (mc.p_coin_hat - oracle).abs() / mc.std_error;
                worst = worst.max(z);
                if z > 3.0 {
                    failures.push(format!("mode {} xi {xi} {name}: z={z:.2}", mode + 1));
                }
            }
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("18 runs at 1e7 trials, worst deviation {worst:.2} standard errors")
        } else {
            failures.join("; ")
        },
    )
}

fn dip_shape() -> Outcome {
    let sigma = default_sigma();
    let centre = dip_probability(sigma, 0.0).unwrap();
    let wings = [500.0, -500.0, 600.0, 1000.0, -2000.0]
        .iter()
        .map(|&t| dip_probability(sigma, t).unwrap())
        .fold(f64::INFINITY, f64::min);

    let curve = dip_scan(&HomSetup::default(), sigma, &DelayGrid::default(), 1_000_000, 42).unwrap();
    let points = curve.points();
    let lowest = points
        .iter()
        .min_by(|a, b| a.normalized_coincidence.total_cmp(&b.normalized_coincidence))
        .unwrap();
    let zero = points.iter().find(|p| p.delay == 0.0).unwrap();
    let combined = (zero.std_error.powi(2) + lowest.std_error.powi(2)).sqrt();
    let gap = zero.normalized_coincidence - lowest.normalized_coincidence;
    let ok = centre == 0.5 && wings > 1.0 - 1e-10 && gap <= 3.0 * combined;
    check(
        ok,
        format!(
            "P(0)={centre}, min P(|tau|>=500)={wings:.12}; MC minimum at tau={} ns, tau=0 is {:.2} standard errors above it",
            lowest.delay,
            gap / combined.max(f64::MIN_POSITIVE)
        ),
    )
}

fn fit_recovery() -> Outcome {
    let mut worst: f64 = 0.0;
    for b in [0.5, 1.0, 2.0] {
        for v in [0.1, 0.42, 0.5] {
            for sigma in [0.005, 0.01665, 0.05] {
                let points = (-25..=25)
                    .map(|k| {
                        let tau = 20.0 * k as f64;
                        DipPoint {
                            delay: tau,
                            normalized_coincidence: b * (1.0 - v * (-0.5 * sigma * sigma * tau * tau).exp()),
                            std_error: 0.0,
                        }
                    })
                    .collect();
                let fit = fit_dip(&DipCurve::new(points).unwrap()).unwrap();
                for (got, want) in [(fit.baseline(), b), (fit.visibility(), v), (fit.sigma(), sigma)] {
                    worst = worst.max((got - want).abs() / want);
                }
            }
        }
    }

    let setup = HomSetup::default();
    let truth = visibility_limit(&setup).unwrap();
    let noisy = dip_scan(&setup, default_sigma(), &DelayGrid::default(), 1_000_000, 42).unwrap();
    let fitted = fit_dip(&noisy).unwrap().visibility();
    let ok = worst <= 1e-6 && (fitted - truth).abs() <= 0.02;
    check(
        ok,
        format!("noiseless worst relative error {worst:.1e}; noisy dip V={fitted:.4} against {truth:.4}"),
    )
}

/// Swap probability summed over every pattern of per-mode successes.
fn enumerate_link(p: f64, n: u32, matched: bool, two_photon: bool, eta: f64) -> f64 {
    let q = mode_success(p, two_photon);
    let weight = |k: u32| q.powi(k as i32) * (1.0 - q).powi((n - k) as i32);
    let mut total = 0.0;
    for left in 1u32..1 << n {
        for right in 1u32..1 << n {
            let (kl, kr) = (left.count_ones(), right.count_ones());
            let swap = if matched {
                1.0
            } else {
                f64::from((left & right).count_ones()) / f64::from(kl * kr)
            };
            total += weight(kl) * weight(kr) * swap;
        }
    }
    eta * total
}

fn multiplexing_algebra() -> Outcome {
    let mut problems = Vec::new();

    let mut worst_ratio: f64 = 0.0;
    for n in 1..=100u32 {
        for p in [1e-4, 1e-3, 0.01, 0.1, 0.3, 0.9, 1.0] {
            let link = LinkParams::lossless(p, n).unwrap();
            for exact in [true, false] {
                for two in [true, false] {
                    let f = if two { p_two_photon } else { p_one_photon };
                    let ratio = f(&link, true, exact).unwrap() / f(&link, false, exact).unwrap();
                    worst_ratio = worst_ratio.max((ratio - f64::from(n)).abs() / f64::from(n));
                }
            }
        }
    }
    // the two forms take different rounding paths, so allow a couple of ulps
    if worst_ratio > 2.0 * f64::EPSILON {
        problems.push(format!("ratio off by {worst_ratio:.1e}"));
    }

    let mut worst_approx: f64 = 0.0;
    for n in [1u32, 2, 3, 10, 30, 100] {
        for p in [1e-6, 1e-5, 1e-4, 1e-3, 3e-3, 1e-2, 3e-2] {
            let link = LinkParams::lossless(p, n).unwrap();
            let nf = f64::from(n);
            for matched in [true, false] {
                if nf * p * p < 1e-3 {
                    let e = p_two_photon(&link, matched, true).unwrap();
                    let a = p_two_photon(&link, matched, false).unwrap();
                    worst_approx = worst_approx.max((a - e).abs() / e);
                }
                if nf * p < 1e-3 {
                    let e = p_one_photon(&link, matched, true).unwrap();
                    let a = p_one_photon(&link, matched, false).unwrap();
                    worst_approx = worst_approx.max((a - e).abs() / e);
                }
            }
        }
    }
    if worst_approx > 0.01 {
        problems.push(format!("approximation off by {:.2}%", 100.0 * worst_approx));
    }

    let mut worst_z: f64 = 0.0;
    for n in 1..=4u32 {
        for (p, matched, two) in [(0.3, true, true), (0.3, false, true), (0.2, true, false), (0.2, false, false)] {
            let link = LinkParams::lossless(p, n).unwrap();
            let eta = if two { link.eta_two_photon() } else { link.eta_one_photon() };
            let want = enumerate_link(p, n, matched, two, eta);
            let seed = 77 + u64::from(n);
            let mc = simulate_link_mc(&link, matched, two, 10_000_000, seed).unwrap();
            let se = (want * (1.0 - want) / mc.trials as f64).sqrt();
            let z = (mc.p_hat - want).abs() / se;
            worst_z = worst_z.max(z);
            if z > 3.0 {
                problems.push(format!("link MC N={n} p={p} matched={matched} two-photon={two}: z={z:.2}"));
            }
        }
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            format!(
                "ratio within {worst_ratio:.1e} of N, approximations within {:.3}%, link MC worst {worst_z:.2} standard errors",
                100.0 * worst_approx
            )
        } else {
            problems.join("; ")
        },
    )
}

fn schedule_and_overlap() -> Outcome {
    let bank = AfcBank::default();
    let times: Vec<f64> = bank.modes().iter().map(|m| storage_time(m.comb_spacing()).unwrap()).collect();
    let times_ok = [652.3, 1087.0, 1533.7]
        .iter()
        .zip(&times)
        .all(|(want, got)| (got - want).abs() <= 0.05);

    let fwhm = 100.0;
    let m = cross_mode_overlap(&bank, &bank, -380.0, fwhm).unwrap();
    let dominant = [(1, 0), (2, 1)];
    let weakest_dominant = dominant.iter().map(|&(i, j)| m[i][j]).fold(f64::INFINITY, f64::min);
    let strongest_other = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .filter(|ij| !dominant.contains(ij))
        .map(|(i, j)| m[i][j])
        .fold(0.0, f64::max);

    let plus = cross_mode_overlap(&bank, &bank, 240.0, fwhm).unwrap();
    let off_diag = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .map(|(i, j)| plus[i][j])
        .fold(0.0, f64::max);

    let separable = mode_separability_check(&bank, fwhm, 0.01).unwrap();
    let ok = times_ok && weakest_dominant > strongest_other && off_diag < 0.05 && separable.passed;
    check(
        ok,
        format!(
            "retrieval {:.1}/{:.1}/{:.1} ns; at -380 ns pairs (2,1),(3,2) >= {weakest_dominant:.3} vs others <= {strongest_other:.1e}; at +240 ns off-diagonal max {off_diag:.1e}; separability worst {:.1e}",
            times[0], times[1], times[2], separable.worst_overlap
        ),
    )
}

fn run_cli(args: &[&str], threads: u32) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fmhom"))
        .args(args)
        .env("FMHOM_THREADS", threads.to_string())
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let commands: [&[&str]; 4] = [
        &["dip", "--mc", "--seed", "9", "--trials", "200000"],
        &["linksim", "--matched", "--seed", "9", "--trials", "1000000"],
        &["linksim", "--one-photon", "--seed", "9", "--trials", "1000000"],
        &["histogram", "--tau", "-380", "--seed", "9", "--trials", "200000"],
    ];
    let mut problems = Vec::new();
    for args in commands {
        let runs = [run_cli(args, 1), run_cli(args, 1), run_cli(args, 8), run_cli(args, 8)];
        match runs.into_iter().collect::<Result<Vec<_>, _>>() {
            Err(e) => problems.push(e),
            Ok(outputs) => {
                if outputs.iter().any(|o| *o != outputs[0]) {
                    problems.push(format!("{} output differs between runs", args[0]));
                }
            }
        }
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            "dip, linksim and histogram identical twice over at 1 and 8 threads".to_string()
        } else {
            problems.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("rate reproduction", rate_reproduction),
        ("visibility limit", visibility_limits),
        ("sampler equivalence", sampler_equivalence),
        ("dip shape", dip_shape),
        ("fit recovery", fit_recovery),
        ("multiplexing algebra", multiplexing_algebra),
        ("schedule and overlap", schedule_and_overlap),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail} ({secs:.1} s)", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name}: {detail} ({secs:.1} s)", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
