//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria whose measured outcome contradicts the expected band are reported
//! as FAIL rather than asserted, so the rest of the suite still runs; the
//! harness only panics if a computation itself errors out.
//!
//! Run with `cargo test -p concreg-cli --test acceptance`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::Command;
use std::time::Instant;

use concreg_core::covering::{
    fit_entropy_exponents, greedy_packings, interpolation_net, CountKind, EntropyEstimate, PackingDomain,
    MAX_PACKING,
};
use concreg_core::projection::constraint_rows;
use concreg_core::risk::{decomposition_audit, fit_reports, run_regret, run_risk, RateMetric, SignalSpec};
use concreg_core::rng::{gaussian_vector, stream};
use concreg_core::stats::weighted_line_fit;
use concreg_core::truncation::fuzz_truncation;
use concreg_core::width::{
    audit_paths, check_subgaussian_max, geometric_grid, lipschitz_audit, WidthSampler,
};
use concreg_core::{project, vector, ConeSpec, DEFAULT_TOL};
use rand::Rng;

use common::{brute_force_projection, concave_kkt_absolute};

const SEED: u64 = 20240611;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(id: usize, name: &str, start: Instant, outcome: Outcome) -> bool {
    let verdict = if outcome.passed { "PASS" } else { "FAIL" };
    println!(
        "criterion {id:>2} {verdict} {name}: {} [{:.1}s]",
        outcome.detail,
        start.elapsed().as_secs_f64()
    );
    outcome.passed
}

fn projection_oracle() -> Outcome {
    let mut worst_diff = 0.0f64;
    let mut worst_kkt = 0.0f64;
    for i in 0..1000u64 {
        let mut rng = stream(SEED, i);
        let n = rng.random_range(3..=8usize);
        let scale = 10f64.powf(rng.random_range(-1.0..1.0));
        let y = gaussian_vector(&mut rng, n, scale);
        let rows = constraint_rows(n, &ConeSpec::FullConcave).unwrap();
        let oracle = brute_force_projection(&y, &rows);
        let out = project(&y, &ConeSpec::FullConcave, DEFAULT_TOL).unwrap();
        worst_diff = worst_diff.max(vector::max_abs_diff(&out.point, &oracle));
        worst_kkt = worst_kkt
            .max(out.kkt_residual)
            .max(concave_kkt_absolute(&y, &out.point, &out.active));
    }
    Outcome {
        passed: worst_diff <= 1e-8 && worst_kkt <= 1e-8,
        detail: format!(
            "max |solver - oracle| = {worst_diff:.2e}, max KKT residual = {worst_kkt:.2e} (limit 1e-8)"
        ),
    }
}

fn decomposition() -> Outcome {
    let audit = decomposition_audit(&SignalSpec::quadratic(200), 1.0, 500, SEED).unwrap();
    let worst = audit.max_residual();
    Outcome {
        passed: worst <= 1e-7,
        detail: format!(
            "max relative residual {worst:.2e} over {} replications at n = 200 (limit 1e-7)",
            audit.reps
        ),
    }
}

fn affine_chi2() -> Outcome {
    let audit = decomposition_audit(&SignalSpec::quadratic(50), 1.0, 10_000, SEED + 3).unwrap();
    let (mean, se) = (audit.chi2_mean, audit.chi2_stderr);
    Outcome {
        passed: (mean - 2.0).abs() <= 3.0 * se,
        detail: format!("mean ||P_L z||^2 / sigma^2 = {mean:.4} +- {se:.4} (target 2 +- 3 stderr)"),
    }
}

fn n_grid() -> Vec<usize> {
    (0..7).map(|j| 64usize << j).collect()
}

fn risk_rate() -> Outcome {
    let reports: Vec<_> = n_grid()
        .into_iter()
        .map(|n| run_risk(&SignalSpec::quadratic(n), 1.0, 200, SEED).unwrap())
        .collect();
    let fit = fit_reports(&reports, RateMetric::Loss).unwrap();
    let failures: usize = reports.iter().map(|r| r.failures).sum();
    Outcome {
        passed: (-0.92..=-0.68).contains(&fit.slope) && failures == 0,
        detail: format!(
            "slope {:.3} over n = 64..4096 (band [-0.92, -0.68]; a log n factor is below Monte-Carlo resolution), {failures} failed solves",
            fit.slope
        ),
    }
}

fn regret_rate() -> Outcome {
    let reports: Vec<_> = n_grid()
        .into_iter()
        .map(|n| run_regret(&SignalSpec::convex(n), 1.0, 200, SEED).unwrap())
        .collect();
    let fit = fit_reports(&reports, RateMetric::Regret).unwrap();
    let offsets_positive = reports.iter().all(|r| r.regret.is_some_and(|g| g.offset > 0.0));
    let min_offset = reports
        .iter()
        .filter_map(|r| r.regret.map(|g| g.offset))
        .fold(f64::INFINITY, f64::min);
    Outcome {
        passed: (-0.95..=-0.65).contains(&fit.slope) && offsets_positive,
        detail: format!(
            "regret slope {:.3} (band [-0.95, -0.65]); smallest offset {min_offset:.4} (must be > 0)",
            fit.slope
        ),
    }
}

fn width_paths() -> Outcome {
    let mut worst_monotone = f64::NEG_INFINITY;
    let mut worst_star = f64::NEG_INFINITY;
    let mut worst_zero = 0.0f64;
    let mut all_hold = true;
    for n in [32usize, 128] {
        for center in [vec![0.0; n], SignalSpec::quadratic(n).generate().unwrap()] {
            let sampler = WidthSampler::new(&center, ConeSpec::FullConcave, 1.0, 200, SEED).unwrap();
            let mut grid = vec![0.0];
            grid.extend(geometric_grid(0.1, 10.0 * (n as f64).powf(0.25), 16).unwrap());
            let paths = sampler.paths(&grid).unwrap();
            let audit = audit_paths(&grid, &paths);
            all_hold &= audit.holds(1e-6);
            worst_monotone = worst_monotone.max(audit.monotone_violation);
            worst_star = worst_star.max(audit.star_violation);
            worst_zero = worst_zero.max(audit.zero_value.unwrap_or(f64::INFINITY));
        }
    }
    Outcome {
        passed: all_hold,
        detail: format!(
            "largest decrease {worst_monotone:.2e}, largest rise of sup/t {worst_star:.2e} (slack 1e-6), max |f(0)| = {worst_zero:e}"
        ),
    }
}

fn fixed_point_scaling() -> Outcome {
    let ns = [32usize, 64, 128, 256, 512];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut radii = Vec::new();
    for &n in &ns {
        let sampler = WidthSampler::new(&vec![0.0; n], ConeSpec::FullConcave, 1.0, 200, SEED).unwrap();
        let curve = sampler.curve(&geometric_grid(0.1, 100.0, 16).unwrap()).unwrap();
        let s = curve.fixed_point.expect("fixed point inside the grid");
        radii.push(format!("{s:.2}"));
        xs.push((n as f64).ln());
        ys.push(s.ln());
    }
    let fit = weighted_line_fit(&xs, &ys, &vec![1.0; xs.len()]).unwrap();
    Outcome {
        passed: (0.1..=0.3).contains(&fit.slope),
        detail: format!(
            "slope of log s vs log n = {:.3} (band [0.1, 0.3]); s = [{}] for n = 32..512",
            fit.slope,
            radii.join(", ")
        ),
    }
}

fn truncation() -> Outcome {
    let summary = fuzz_truncation(10_000, 40, SEED).unwrap();
    Outcome {
        passed: summary.violations() == 0,
        detail: format!(
            "{} violations over {} instances ({summary:?})",
            summary.violations(),
            summary.instances
        ),
    }
}

fn entropy() -> Outcome {
    const BUDGET: usize = 50;
    const THREE_BLOCK_CAP: usize = 30_000;
    let mut estimates = Vec::new();
    let mut sandwich = true;
    let mut excess_ok = true;
    let mut saturated = 0;
    let mut worst_margin = f64::NEG_INFINITY;
    for n in [6usize, 12, 24] {
        let root_n = (n as f64).sqrt();
        let eps: Vec<f64> = (0..6)
            .map(|j| 0.5 * 0.04f64.powf(j as f64 / 5.0) * root_n)
            .collect();
        let mut radii = eps.clone();
        radii.extend(eps.iter().map(|e| 2.0 * e));
        let concave = greedy_packings(
            n,
            &PackingDomain::Concave { bound: 1.0 },
            &radii,
            BUDGET,
            MAX_PACKING,
            SEED,
        )
        .unwrap();
        let three_block = greedy_packings(
            n,
            &PackingDomain::AnyThreeBlock { bound: 1.0 },
            &eps,
            BUDGET,
            THREE_BLOCK_CAP,
            SEED,
        )
        .unwrap();
        let allowance = 2.0 * ((n + 2) as f64).ln() + 1.0;
        for (i, &e) in eps.iter().enumerate() {
            let net = interpolation_net(n, 1.0, e).unwrap();
            let est = EntropyEstimate {
                n,
                bound: 1.0,
                epsilon: e,
                packing_count: concave[i].count(),
                net_count: net.count(),
                log_packing: (concave[i].count() as f64).ln(),
                log_net: net.log_count(),
            };
            sandwich &= est.sandwich_holds(concave[i + eps.len()].count());
            // A saturated three-block count is only a lower bound on its
            // packing number, so its excess is a lower bound too.
            let excess = (three_block[i].count() as f64).ln() - est.log_packing;
            if three_block[i].saturated {
                saturated += 1;
            }
            excess_ok &= excess <= allowance;
            worst_margin = worst_margin.max(excess - allowance);
            estimates.push(est);
        }
    }
    let fit = fit_entropy_exponents(&estimates, CountKind::Packing).unwrap();
    let slope = fit.epsilon_slope.unwrap_or(f64::NAN);
    Outcome {
        passed: (0.3..=0.7).contains(&slope) && sandwich && excess_ok,
        detail: format!(
            "epsilon slope {slope:.3} (band [0.3, 0.7]); sandwich {}; three-block excess - allowance <= {worst_margin:.2} ({saturated} points capped at {THREE_BLOCK_CAP})",
            if sandwich { "holds" } else { "violated" }
        ),
    }
}

fn maxima_and_lipschitz() -> Outcome {
    let mut max_ok = true;
    let mut worst_ratio = 0.0f64;
    for n in [10usize, 100, 1000] {
        for a in [0.5, 1.0, 2.0] {
            let check = check_subgaussian_max(n, a, 2000, SEED).unwrap();
            max_ok &= check.holds;
            worst_ratio = worst_ratio.max((check.mean + 3.0 * check.stderr) / check.bound);
        }
    }
    let center = SignalSpec::quadratic(64).generate().unwrap();
    let lip = lipschitz_audit(&center, &ConeSpec::FullConcave, 1.0, 2.0, 1000, SEED, DEFAULT_TOL).unwrap();
    Outcome {
        passed: max_ok && lip.holds,
        detail: format!(
            "max (mean + 3 se) / bound = {worst_ratio:.3}; Lipschitz max excess {:.2e} over {} pairs (slack {:.0e})",
            lip.max_excess, lip.pairs, lip.slack
        ),
    }
}

fn run_binary(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_concreg"))
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn determinism() -> Outcome {
    let runs: [&[&str]; 4] = [
        &["risk", "--seed", "11", "--ngrid", "64:512:x2", "--reps", "40"],
        &[
            "width",
            "--seed",
            "11",
            "--n",
            "48",
            "--reps",
            "60",
            "--center",
            "quadratic",
        ],
        &[
            "cover",
            "--seed",
            "11",
            "--ngrid",
            "6,12",
            "--epsgrid",
            "0.1:0.5:n3",
            "--format",
            "json",
        ],
        &[
            "audit", "--kind", "tail", "--seed", "11", "--n", "64", "--reps", "100",
        ],
    ];
    let mut identical = 0;
    for args in runs {
        let first = run_binary(&[&["--threads", "1"], args].concat());
        let second = run_binary(&[&["--threads", "1"], args].concat());
        let parallel = run_binary(&[&["--threads", "4"], args].concat());
        if first == second && first == parallel {
            identical += 1;
        }
    }
    Outcome {
        passed: identical == runs.len(),
        detail: format!(
            "{identical}/{} reports byte-identical across reruns and --threads 1 vs 4",
            runs.len()
        ),
    }
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("projection oracle", projection_oracle),
        ("decomposition identity", decomposition),
        ("affine chi-square term", affine_chi2),
        ("risk rate", risk_rate),
        ("misspecification regret rate", regret_rate),
        ("width-curve path properties", width_paths),
        ("fixed-point scaling", fixed_point_scaling),
        ("truncation properties", truncation),
        ("entropy scaling", entropy),
        ("maximal inequality and Lipschitz", maxima_and_lipschitz),
        ("determinism", determinism),
    ];
    let mut passed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        if report(i + 1, name, start, run()) {
            passed += 1;
        }
    }
    println!("acceptance: {passed}/{} criteria pass", criteria.len());
}
