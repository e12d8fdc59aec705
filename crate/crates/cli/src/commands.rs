//! One function per subcommand: resolve settings, run, build a [`Report`].

use concreg_core::covering::{
    fit_entropy_exponents, greedy_packings, interpolation_net, CountKind, EntropyEstimate, PackingDomain,
    MAX_PACKING,
};
use concreg_core::risk::{
    decomposition_audit, fit_reports, highprob_audit, run_regret, run_risk, RateMetric, RiskReport,
};
use concreg_core::rng::stream;
use concreg_core::truncation::{
    audit, check_contractive, fuzz_truncation, random_instance_of_len, truncate, DEFAULT_LEVEL_FACTOR,
};
use concreg_core::width::{
    audit_paths, check_subgaussian_max, geometric_grid, lipschitz_audit, WidthSampler, POINTS_PER_DECADE,
};
use concreg_core::{is_member, project, ConeSpec, DEFAULT_TOL};

use crate::config::{
    self, at_least, format_of, n_grid, nonnegative, positive, real_grid, require_seed, Command, Resolved,
    Settings,
};
use crate::error::{CliError, Result};
use crate::output::{format_float, Check, Format, Report};

/// Slack for pathwise width shape checks.
pub const PATH_SLACK: f64 = 1e-6;
/// Decomposition identities must hold to this relative accuracy.
pub const DECOMPOSITION_TOL: f64 = 1e-7;

pub struct Prepared {
    pub report: Report,
    pub format: Format,
}

pub fn execute(command: &Command, settings: &Settings) -> Result<Prepared> {
    let format = format_of(settings)?;
    let mut resolved = Resolved::default();
    resolved.record(
        "format",
        match format {
            Format::Csv => "csv",
            Format::Json => "json",
        },
    );
    let mut report = match command {
        Command::Project(_) => project_cmd(settings, &mut resolved)?,
        Command::Width(_) => width_cmd(settings, &mut resolved)?,
        Command::TruncateDemo(_) => truncate_cmd(settings, &mut resolved)?,
        Command::Cover(_) => cover_cmd(settings, &mut resolved)?,
        Command::Risk(_) => risk_cmd(settings, &mut resolved, false)?,
        Command::Regret(_) => risk_cmd(settings, &mut resolved, true)?,
        Command::Audit(_) => audit_cmd(settings, &mut resolved)?,
    };
    report.config = resolved.entries;
    Ok(Prepared { report, format })
}

fn project_cmd(s: &Settings, r: &mut Resolved) -> Result<Report> {
    let path = s
        .input
        .as_ref()
        .ok_or_else(|| CliError::invalid("input", "the sequence to project is required"))?;
    r.record("input", path.display());
    let y = config::read_sequence("input", path)?;
    let cone = config::cone(r, s)?;
    let tol = positive("tol", r.real("tol", s.tol, DEFAULT_TOL))?;
    cone.validate(y.len())?;
    let fit = project(&y, &cone, tol)?;

    let mut report = Report::new(
        "project",
        "euclidean-projection-kkt",
        &["index", "input", "output"],
    );
    report.seed = s.seed;
    for (i, (a, b)) in y.iter().zip(&fit.point).enumerate() {
        report.push_row(vec![(i + 1).into(), (*a).into(), (*b).into()]);
    }
    report.add_summary("kkt_residual", fit.kkt_residual);
    report.add_summary("iterations", fit.iterations);
    report.add_summary("active_constraints", fit.active.len());
    log::info!("kkt residual {}", format_float(fit.kkt_residual));
    let member = is_member(
        &fit.point,
        &cone,
        10.0 * tol * (1.0 + concreg_core::vector::max_abs(&y)),
    )?;
    report.add_check(Check::new(
        "kkt",
        fit.kkt_residual <= tol,
        format!(
            "residual {} <= tol {}",
            format_float(fit.kkt_residual),
            format_float(tol)
        ),
    ));
    report.add_check(Check::new("feasible", member, "output lies in the cone"));
    Ok(report)
}

fn default_tgrid(sigma: f64, n: usize) -> Result<Vec<f64>> {
    let mut grid = vec![0.0];
    grid.extend(geometric_grid(
        0.1 * sigma,
        10.0 * sigma * (n as f64).powf(0.25),
        POINTS_PER_DECADE,
    )?);
    Ok(grid)
}

fn width_cmd(s: &Settings, r: &mut Resolved) -> Result<Report> {
    let seed = require_seed(s)?;
    let n = at_least("n", r.count("n", s.n, 128), 3)?;
    let center = config::signal(r, s, "center", s.center.as_deref(), "zero", n)?.generate()?;
    let cone = config::cone(r, s)?;
    let sigma = positive("sigma", r.real("sigma", s.sigma, 1.0))?;
    let reps = at_least(
        "reps",
        r.count("reps", s.reps, concreg_core::width::DEFAULT_REPS),
        2,
    )?;
    let tol = positive("tol", r.real("tol", s.tol, DEFAULT_TOL))?;
    let grid = match &s.tgrid {
        None => {
            r.record("tgrid", "geometric");
            default_tgrid(sigma, n)?
        }
        Some(config::GridText::Text(t)) if t.trim() == "geometric" => {
            r.record("tgrid", "geometric");
            default_tgrid(sigma, n)?
        }
        other => real_grid(r, "tgrid", other, "")?,
    };
    if grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] < 0.0 {
        return Err(CliError::invalid(
            "tgrid",
            "radii must be nonnegative and strictly increasing",
        ));
    }
    let member_tol = concreg_core::cone::MEMBERSHIP_TOL * (1.0 + concreg_core::vector::max_abs(&center));
    if !is_member(&center, &cone, member_tol)? {
        return Err(CliError::invalid("center", "the center must lie in the cone"));
    }
    let sampler = WidthSampler::new(&center, cone, sigma, reps, seed)?.with_tol(tol);
    let paths = sampler.paths(&grid)?;
    let curve = sampler.curve_from_paths(&grid, &paths)?;

    let mut report = Report::new(
        "width",
        "localized-width-fixed-point",
        &["t", "mean", "stderr", "reps", "seed"],
    );
    report.seed = Some(seed);
    for e in &curve.estimates {
        report.push_row(vec![
            e.t.into(),
            e.mean.into(),
            e.stderr.into(),
            reps.into(),
            seed.into(),
        ]);
    }
    match curve.fixed_point {
        Some(fp) => report.add_summary("fixed_point", fp),
        None => {
            log::warn!("the radius grid does not reach the fixed point");
            report.add_summary("fixed_point", "none");
        }
    }
    let shape = audit_paths(&grid, &paths);
    report.add_check(Check::new(
        "pathwise_monotone",
        shape.monotone_violation <= PATH_SLACK,
        format!(
            "largest decrease {}",
            format_float(shape.monotone_violation.max(0.0))
        ),
    ));
    report.add_check(Check::new(
        "pathwise_star_shaped",
        shape.star_violation <= PATH_SLACK,
        format!(
            "largest increase of sup/t {}",
            format_float(shape.star_violation.max(0.0))
        ),
    ));
    if let Some(z) = shape.zero_value {
        report.add_check(Check::new(
            "zero_at_origin",
            z == 0.0,
            format!("|f(0)| = {}", format_float(z)),
        ));
    }
    Ok(report)
}

fn truncate_cmd(s: &Settings, r: &mut Resolved) -> Result<Report> {
    let seed = require_seed(s)?;
    let n = at_least("n", r.count("n", s.n, 40), 3)?;
    let sigma = positive("sigma", r.real("sigma", s.sigma, 1.0))?;
    let instances = r.count("instances", s.instances, 10_000);
    let demo = random_instance_of_len(&mut stream(seed, u64::MAX), n);
    let level = positive("level", r.real("level", s.level, DEFAULT_LEVEL_FACTOR * sigma))?;
    let result = truncate(&demo.theta, &demo.theta_star, level)?;
    let checks = audit(&demo.theta, &demo.theta_star, &result)?;

    let mut report = Report::new(
        "truncate-demo",
        "truncation-properties",
        &["theta", "theta_star", "theta_prime"],
    );
    report.seed = Some(seed);
    for i in 0..n {
        report.push_row(vec![
            demo.theta[i].into(),
            demo.theta_star[i].into(),
            result.truncated[i].into(),
        ]);
    }
    report.add_summary("mode", demo.k);
    report.add_summary("level", level);
    report.add_summary("lower_clamp", result.lower_clamp);
    report.add_summary("upper_clamp", result.upper_clamp);
    report.add_summary("s1_size", result.s1.len());
    report.add_summary("s2_size", result.s2.len());
    report.add_summary("m1", result.m1);
    report.add_summary("m2", result.m2);
    report.add_summary(
        "contractive_excess",
        check_contractive(&demo.theta, &demo.theta_star, &result),
    );
    report.add_check(Check::new(
        "demo_instance",
        checks.passed(),
        format!("{checks:?}"),
    ));
    if instances > 0 {
        let fuzz = fuzz_truncation(instances, n.max(3), seed)?;
        report.add_summary("fuzz_instances", fuzz.instances);
        report.add_summary("fuzz_violations", fuzz.violations());
        report.add_check(Check::new(
            "fuzzed_instances",
            fuzz.violations() == 0,
            format!("{fuzz:?}"),
        ));
    }
    Ok(report)
}

/// Allowed log-count excess of the three-block set over the concave set.
pub fn three_block_allowance(n: usize) -> f64 {
    2.0 * ((n + 2) as f64).ln() + 1.0
}

fn cover_cmd(s: &Settings, r: &mut Resolved) -> Result<Report> {
    let seed = require_seed(s)?;
    let ns = n_grid(r, &s.ngrid, "6,12,24", 3)?;
    let bound = positive("bound", r.real("bound", s.bound, 1.0))?;
    let rel = real_grid(r, "epsgrid", &s.epsgrid, "0.02:0.5:n6")?;
    if let Some(e) = rel.iter().find(|e| !(**e > 0.0)) {
        return Err(CliError::invalid(
            "epsgrid",
            format!("radii must be positive, got {e}"),
        ));
    }
    let budget = at_least("budget", r.count("budget", s.budget, 50), 1)?;
    let max_points = at_least("max_points", r.count("max_points", s.max_points, MAX_PACKING), 1)?;
    let cap = r.count("three_block_cap", s.three_block_cap, 30_000);

    let mut report = Report::new(
        "cover",
        "entropy-scaling",
        &[
            "n",
            "B",
            "epsilon",
            "packing_count",
            "net_count",
            "packing_saturated",
            "three_block_count",
            "three_block_saturated",
            "excess",
            "allowance",
        ],
    );
    report.seed = Some(seed);
    let mut estimates = Vec::new();
    let mut sandwich_ok = true;
    let mut excess_ok = true;
    let mut unresolved = 0usize;
    for &n in &ns {
        let scale = bound * (n as f64).sqrt();
        let eps: Vec<f64> = rel.iter().map(|e| e * scale).collect();
        let mut all = eps.clone();
        all.extend(eps.iter().map(|e| 2.0 * e));
        let concave = greedy_packings(
            n,
            &PackingDomain::Concave { bound },
            &all,
            budget,
            max_points,
            seed,
        )?;
        let three = if cap > 0 {
            Some(greedy_packings(
                n,
                &PackingDomain::AnyThreeBlock { bound },
                &eps,
                budget,
                cap,
                seed,
            )?)
        } else {
            None
        };
        for (i, &epsilon) in eps.iter().enumerate() {
            let net = interpolation_net(n, bound, epsilon)?;
            let p = &concave[i];
            let est = EntropyEstimate {
                n,
                bound,
                epsilon,
                packing_count: p.count(),
                net_count: net.count(),
                log_packing: (p.count() as f64).ln(),
                log_net: net.log_count(),
            };
            sandwich_ok &= est.sandwich_holds(concave[i + eps.len()].count());
            let allowance = three_block_allowance(n);
            let (tb_count, tb_sat, excess) = match &three {
                Some(t) => {
                    let q = &t[i];
                    let excess = (q.count() as f64).ln() - est.log_packing;
                    // A saturated count only bounds the excess from below.
                    unresolved += q.saturated as usize;
                    excess_ok &= excess <= allowance;
                    (q.count().into(), q.saturated.into(), excess.into())
                }
                None => ("".into(), "".into(), "".into()),
            };
            report.push_row(vec![
                n.into(),
                bound.into(),
                epsilon.into(),
                p.count().into(),
                net.count().into(),
                p.saturated.into(),
                tb_count,
                tb_sat,
                excess,
                allowance.into(),
            ]);
            estimates.push(est);
        }
    }
    let packing_fit = fit_entropy_exponents(&estimates, CountKind::Packing);
    let net_fit = fit_entropy_exponents(&estimates, CountKind::Net);
    let slope = packing_fit.as_ref().ok().and_then(|f| f.epsilon_slope);
    let put = |report: &mut Report, key: &str, v: Option<f64>| match v {
        Some(v) => report.add_summary(key, v),
        None => report.add_summary(key, "none"),
    };
    put(&mut report, "epsilon_slope", slope);
    put(
        &mut report,
        "n_slope",
        packing_fit.as_ref().ok().and_then(|f| f.n_slope),
    );
    put(
        &mut report,
        "epsilon_slope_net",
        net_fit.as_ref().ok().and_then(|f| f.epsilon_slope),
    );
    put(
        &mut report,
        "n_slope_net",
        net_fit.as_ref().ok().and_then(|f| f.n_slope),
    );
    report.add_check(Check::new(
        "epsilon_slope",
        slope.is_some_and(|v| (0.3..=0.7).contains(&v)),
        format!("{} in [0.3, 0.7]", slope.map_or("none".into(), format_float)),
    ));
    report.add_check(Check::new(
        "sandwich",
        sandwich_ok,
        "packing(2eps) <= net(eps) at every point",
    ));
    if cap > 0 {
        report.add_check(Check::new(
            "three_block_excess",
            excess_ok,
            format!("excess <= 2 log(n+2) + 1 ({unresolved} points saturated at the cap)"),
        ));
    }
    Ok(report)
}

fn risk_cmd(s: &Settings, r: &mut Resolved, regret: bool) -> Result<Report> {
    let seed = require_seed(s)?;
    let ns = n_grid(r, &s.ngrid, "64:4096:x2", 3)?;
    let default_signal = if regret { "convex" } else { "quadratic" };
    let template = config::signal(r, s, "signal", s.signal.as_deref(), default_signal, ns[0])?;
    let sigma = nonnegative("sigma", r.real("sigma", s.sigma, 1.0))?;
    let reps = at_least("reps", r.count("reps", s.reps, 200), 2)?;
    let (lo_default, hi_default) = if regret { (-0.95, -0.65) } else { (-0.92, -0.68) };
    let slope_min = r.real("slope_min", s.slope_min, lo_default);
    let slope_max = r.real("slope_max", s.slope_max, hi_default);
    if matches!(template.family, concreg_core::risk::SignalFamily::Custom { .. }) && ns.len() > 1 {
        return Err(CliError::invalid("ngrid", "a custom signal has a single length"));
    }

    let mut reports: Vec<RiskReport> = Vec::with_capacity(ns.len());
    for &n in &ns {
        let signal = template.with_n(n);
        let rep = if regret {
            run_regret(&signal, sigma, reps, seed)?
        } else {
            run_risk(&signal, sigma, reps, seed)?
        };
        log::info!("n = {n}: mean loss {}", format_float(rep.mean_loss));
        reports.push(rep);
    }

    let mut columns = vec!["n", "mean_loss", "stderr", "q50", "q90", "q99", "failures"];
    if regret {
        columns.extend(["regret_mean", "regret_stderr", "offset", "h"]);
    }
    let claim = if regret {
        "misspecified-regret-rate"
    } else {
        "lse-risk-rate"
    };
    let mut report = Report::new(if regret { "regret" } else { "risk" }, claim, &columns);
    report.seed = Some(seed);
    for rep in &reports {
        let q = |p: f64| rep.quantile(p).unwrap_or(f64::NAN);
        let mut row = vec![
            rep.n().into(),
            rep.mean_loss.into(),
            rep.stderr.into(),
            q(0.5).into(),
            q(0.9).into(),
            q(0.99).into(),
            rep.failures.into(),
        ];
        if let Some(g) = rep.regret {
            row.extend([g.mean.into(), g.stderr.into(), g.offset.into(), g.h.into()]);
        }
        report.push_row(row);
    }
    report.add_check(Check::new(
        "no_failures",
        reports.iter().all(|r| r.failures == 0),
        "every replication solved",
    ));
    let metric = if regret {
        RateMetric::Regret
    } else {
        RateMetric::Loss
    };
    if ns.len() >= 4 {
        let fit = fit_reports(&reports, metric)?;
        report.add_summary("slope", fit.slope);
        report.add_summary("intercept", fit.intercept);
        report.add_summary("r_squared", fit.r_squared);
        report.add_check(Check::new(
            "slope",
            (slope_min..=slope_max).contains(&fit.slope),
            format!("{} in [{slope_min}, {slope_max}]", format_float(fit.slope)),
        ));
    } else {
        log::warn!("fewer than 4 sample sizes; no rate is fitted");
    }
    if regret {
        let offsets_ok = reports.iter().all(|r| r.regret.is_some_and(|g| g.offset > 0.0));
        report.add_check(Check::new(
            "offset_positive",
            offsets_ok,
            "best-approximation error is positive",
        ));
        let sign_ok = reports
            .iter()
            .all(|r| r.regret.is_some_and(|g| g.mean >= -2.0 * g.stderr));
        report.add_check(Check::new(
            "regret_nonnegative",
            sign_ok,
            "regret_mean >= -2 stderr",
        ));
    }
    Ok(report)
}

fn audit_cmd(s: &Settings, r: &mut Resolved) -> Result<Report> {
    let seed = require_seed(s)?;
    let kind = s.kind.as_deref().unwrap_or("decomposition");
    r.record("kind", kind);
    let reject = |keys: &[(&str, bool)]| -> Result<()> {
        match keys.iter().find(|(_, set)| *set) {
            Some((k, _)) => Err(CliError::invalid(
                k,
                format!("does not apply to the `{kind}` audit"),
            )),
            None => Ok(()),
        }
    };
    match kind {
        "decomposition" => {
            reject(&[
                ("ngrid", s.ngrid.is_some()),
                ("xgrid", s.xgrid.is_some()),
                ("agrid", s.agrid.is_some()),
                ("t", s.t.is_some()),
                ("pairs", s.pairs.is_some()),
                ("tol", s.tol.is_some()),
            ])?;
            let n = at_least("n", r.count("n", s.n, 200), 3)?;
            let signal = config::signal(r, s, "signal", s.signal.as_deref(), "quadratic", n)?;
            let sigma = nonnegative("sigma", r.real("sigma", s.sigma, 1.0))?;
            let reps = at_least("reps", r.count("reps", s.reps, 500), 2)?;
            let a = decomposition_audit(&signal, sigma, reps, seed)?;
            let mut report = Report::new(
                "audit",
                "loss-decomposition",
                &["quantity", "value", "limit", "passed"],
            );
            report.seed = Some(seed);
            let row = |report: &mut Report, name: &str, value: f64, limit: String, ok: bool| {
                report.add_check(Check::new(
                    name,
                    ok,
                    format!("{} vs {limit}", format_float(value)),
                ));
                report.push_row(vec![name.into(), value.into(), limit.into(), ok.into()]);
            };
            row(
                &mut report,
                "loss_residual",
                a.loss_residual,
                format_float(DECOMPOSITION_TOL),
                a.loss_residual <= DECOMPOSITION_TOL,
            );
            row(
                &mut report,
                "projection_residual",
                a.projection_residual,
                format_float(DECOMPOSITION_TOL),
                a.projection_residual <= DECOMPOSITION_TOL,
            );
            if sigma > 0.0 {
                let ok = (a.chi2_mean - 2.0).abs() <= 3.0 * a.chi2_stderr;
                row(
                    &mut report,
                    "affine_chi2_mean",
                    a.chi2_mean,
                    format!("2 +- {}", format_float(3.0 * a.chi2_stderr)),
                    ok,
                );
            }
            Ok(report)
        }
        "tail" => {
            reject(&[
                ("ngrid", s.ngrid.is_some()),
                ("agrid", s.agrid.is_some()),
                ("t", s.t.is_some()),
                ("pairs", s.pairs.is_some()),
                ("tol", s.tol.is_some()),
            ])?;
            let n = at_least("n", r.count("n", s.n, 512), 3)?;
            let signal = config::signal(r, s, "signal", s.signal.as_deref(), "quadratic", n)?;
            let sigma = positive("sigma", r.real("sigma", s.sigma, 1.0))?;
            let reps = at_least("reps", r.count("reps", s.reps, 1000), 2)?;
            let xs = real_grid(r, "xgrid", &s.xgrid, "1,2,4")?;
            let t = highprob_audit(&signal, sigma, reps, &xs, seed)?;
            let mut report = Report::new(
                "audit",
                "high-probability-bound",
                &["x", "threshold", "fraction", "allowed", "stderr", "holds"],
            );
            report.seed = Some(seed);
            for row in &t.rows {
                report.push_row(vec![
                    row.x.into(),
                    row.threshold.into(),
                    row.fraction.into(),
                    row.allowed.into(),
                    row.stderr.into(),
                    row.holds.into(),
                ]);
            }
            report.add_summary("c_hat", t.c_hat);
            report.add_summary("rate", t.rate);
            report.add_check(Check::new(
                "tail_bound",
                t.passed(),
                "fraction <= allowed + 3 stderr at every x",
            ));
            Ok(report)
        }
        "maxima" => {
            reject(&[
                ("n", s.n.is_some()),
                ("xgrid", s.xgrid.is_some()),
                ("t", s.t.is_some()),
                ("pairs", s.pairs.is_some()),
                ("tol", s.tol.is_some()),
                ("sigma", s.sigma.is_some()),
                ("signal", s.signal.is_some()),
            ])?;
            let ns = n_grid(r, &s.ngrid, "10,100,1000", 1)?;
            let as_ = real_grid(r, "agrid", &s.agrid, "0.5,1,2")?;
            let reps = at_least("reps", r.count("reps", s.reps, 2000), 2)?;
            let mut report = Report::new(
                "audit",
                "subgaussian-maximum",
                &["n", "a", "mean", "stderr", "bound", "holds"],
            );
            report.seed = Some(seed);
            let mut all = true;
            for &n in &ns {
                for &a in &as_ {
                    let c = check_subgaussian_max(n, positive("agrid", a)?, reps, seed)?;
                    all &= c.holds;
                    report.push_row(vec![
                        n.into(),
                        a.into(),
                        c.mean.into(),
                        c.stderr.into(),
                        c.bound.into(),
                        c.holds.into(),
                    ]);
                }
            }
            report.add_check(Check::new("maxima", all, "mean - 3 stderr <= bound everywhere"));
            Ok(report)
        }
        "lipschitz" => {
            reject(&[
                ("ngrid", s.ngrid.is_some()),
                ("xgrid", s.xgrid.is_some()),
                ("agrid", s.agrid.is_some()),
                ("reps", s.reps.is_some()),
            ])?;
            let n = at_least("n", r.count("n", s.n, 64), 3)?;
            let center = config::signal(r, s, "signal", s.signal.as_deref(), "quadratic", n)?.generate()?;
            let sigma = positive("sigma", r.real("sigma", s.sigma, 1.0))?;
            let t = positive("t", r.real("t", s.t, 2.0))?;
            let pairs = at_least("pairs", r.count("pairs", s.pairs, 1000), 1)?;
            let tol = positive("tol", r.real("tol", s.tol, DEFAULT_TOL))?;
            if !is_member(
                &center,
                &ConeSpec::FullConcave,
                1e-9 * (1.0 + concreg_core::vector::max_abs(&center)),
            )? {
                return Err(CliError::invalid("signal", "the center must be concave"));
            }
            let a = lipschitz_audit(&center, &ConeSpec::FullConcave, sigma, t, pairs, seed, tol)?;
            let mut report = Report::new(
                "audit",
                "gaussian-lipschitz",
                &["pairs", "t", "max_excess", "slack", "holds"],
            );
            report.seed = Some(seed);
            report.push_row(vec![
                a.pairs.into(),
                a.t.into(),
                a.max_excess.into(),
                a.slack.into(),
                a.holds.into(),
            ]);
            report.add_check(Check::new(
                "lipschitz",
                a.holds,
                format!("max excess {}", format_float(a.max_excess)),
            ));
            Ok(report)
        }
        other => Err(CliError::invalid(
            "kind",
            format!("unknown audit `{other}` (decomposition, tail, maxima, lipschitz)"),
        )),
    }
}
