//! Monte-Carlo risk of the concave least-squares estimator.
//!
//! Each replication `r` observes `y = θ* + z_r` with `z_r` drawn from the
//! stream of `(seed, r)`, projects `y` onto `K_n`, and records the per-entry
//! squared error. Replications run in parallel but are aggregated in index
//! order, so reports do not depend on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{is_member, ortho_affine_part, project_affine, range_v, ConeSpec, MEMBERSHIP_TOL};
use crate::error::{Error, Result};
use crate::projection::{project, project_ortho_affine, DEFAULT_TOL};
use crate::stats::{quantile_sorted, weighted_line_fit, LineFit, RunningStats};
use crate::vector::{dist_sq, norm, sub};
use crate::width::replication_noise;

/// Quantile levels reported by every [`RiskReport`].
pub const QUANTILE_LEVELS: [f64; 3] = [0.5, 0.9, 0.99];

/// Largest tolerated fraction of failed solves before a report is refused.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SignalFamily {
    /// `a + b·x_i` with `x_i = (i − 1)/(n − 1)`.
    Affine {
        a: f64,
        b: f64,
    },
    /// `scale·(1 − u_i²)` with `u_i = 2(i − 1)/(n − 1) − 1`.
    QuadraticConcave {
        scale: f64,
    },
    /// Minimum of `pieces` tangent lines of `1 − u²`, touching at the
    /// midpoints of `pieces` equal subintervals of `[−1, 1]`.
    PiecewiseLinearConcave {
        pieces: usize,
    },
    /// `scale·u_i²`: convex, hence outside `K_n` whenever `scale > 0`.
    MisspecifiedConvex {
        scale: f64,
    },
    Custom {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    #[serde(flatten)]
    pub family: SignalFamily,
    pub n: usize,
}

impl SignalSpec {
    pub fn new(family: SignalFamily, n: usize) -> Self {
        SignalSpec { family, n }
    }

    pub fn quadratic(n: usize) -> Self {
        SignalSpec::new(SignalFamily::QuadraticConcave { scale: 1.0 }, n)
    }

    pub fn convex(n: usize) -> Self {
        SignalSpec::new(SignalFamily::MisspecifiedConvex { scale: 1.0 }, n)
    }

    /// The sequence `θ*`.
    pub fn generate(&self) -> Result<Vec<f64>> {
        let n = self.n;
        if n < 3 {
            return Err(Error::size(format!("signals need n >= 3, got {n}")));
        }
        let u = |i: usize| 2.0 * i as f64 / (n - 1) as f64 - 1.0;
        let values: Vec<f64> = match &self.family {
            SignalFamily::Affine { a, b } => (0..n).map(|i| a + b * i as f64 / (n - 1) as f64).collect(),
            SignalFamily::QuadraticConcave { scale } => (0..n).map(|i| scale * (1.0 - u(i) * u(i))).collect(),
            SignalFamily::PiecewiseLinearConcave { pieces } => {
                if *pieces == 0 {
                    return Err(Error::domain("piecewise-linear signal needs at least one piece"));
                }
                let k = *pieces as f64;
                (0..n)
                    .map(|i| {
                        (0..*pieces)
                            .map(|j| {
                                let c = -1.0 + (2 * j + 1) as f64 / k;
                                1.0 + c * c - 2.0 * c * u(i)
                            })
                            .fold(f64::INFINITY, f64::min)
                    })
                    .collect()
            }
            SignalFamily::MisspecifiedConvex { scale } => (0..n).map(|i| scale * u(i) * u(i)).collect(),
            SignalFamily::Custom { values } => {
                if values.len() != n {
                    return Err(Error::size(format!(
                        "custom signal has {} values but n = {n}",
                        values.len()
                    )));
                }
                values.clone()
            }
        };
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("signal entry {} is not finite", i + 1)));
        }
        Ok(values)
    }

    pub fn with_n(&self, n: usize) -> Self {
        SignalSpec {
            family: self.family.clone(),
            n,
        }
    }
}

/// Misspecification terms of a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regret {
    pub mean: f64,
    pub stderr: f64,
    /// `(1/n)‖Π_{K∩L⊥}(μ*) − μ*‖²`, the best achievable loss.
    pub offset: f64,
    /// `H(θ*) = V(Π_K(μ*))`.
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub signal: SignalSpec,
    pub sigma: f64,
    /// Replications requested; `failures` of them were excluded.
    pub reps: usize,
    pub mean_loss: f64,
    pub stderr: f64,
    /// `(p, value)` nearest-rank quantiles of the per-replication loss.
    pub quantiles: Vec<(f64, f64)>,
    pub regret: Option<Regret>,
    pub failures: usize,
    pub seed: u64,
}

impl RiskReport {
    pub fn n(&self) -> usize {
        self.signal.n
    }

    pub fn quantile(&self, p: f64) -> Option<f64> {
        self.quantiles.iter().find(|(q, _)| *q == p).map(|(_, v)| *v)
    }
}

fn check_run(sigma: f64, reps: usize) -> Result<()> {
    if reps < 2 {
        return Err(Error::domain(format!("reps must be at least 2, got {reps}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!(
            "sigma must be finite and nonnegative, got {sigma}"
        )));
    }
    Ok(())
}

/// Per-replication losses `(1/n)‖Π_K(θ* + z_r) − θ*‖²`, `None` for a failed
/// solve. Errors other than solver failures abort immediately.
pub fn replication_losses(theta: &[f64], sigma: f64, reps: usize, seed: u64) -> Result<Vec<Option<f64>>> {
    let n = theta.len();
    let outcomes: Vec<Result<Option<f64>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let z = replication_noise(seed, r, n, sigma);
            let y: Vec<f64> = theta.iter().zip(&z).map(|(t, e)| t + e).collect();
            match project(&y, &ConeSpec::FullConcave, DEFAULT_TOL) {
                Ok(fit) => Ok(Some(dist_sq(&fit.point, theta) / n as f64)),
                Err(Error::Solver {
                    message, residual, ..
                }) => {
                    log::warn!("replication {r}: {message} (residual {residual:.3e})");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect();
    let losses = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let failures = losses.iter().filter(|l| l.is_none()).count();
    if failures as f64 > MAX_FAILURE_FRACTION * reps as f64 {
        return Err(Error::Solver {
            message: format!("{failures} of {reps} replications failed to solve"),
            best: Vec::new(),
            residual: f64::NAN,
            iterations: 0,
        });
    }
    Ok(losses)
}

fn summarize(signal: &SignalSpec, sigma: f64, reps: usize, seed: u64, losses: &[Option<f64>]) -> RiskReport {
    let kept: Vec<f64> = losses.iter().flatten().copied().collect();
    let stats: RunningStats = kept.iter().copied().collect();
    let mut sorted = kept;
    sorted.sort_by(f64::total_cmp);
    RiskReport {
        signal: signal.clone(),
        sigma,
        reps,
        mean_loss: stats.mean(),
        stderr: stats.stderr(),
        quantiles: QUANTILE_LEVELS
            .iter()
            .map(|&p| (p, quantile_sorted(&sorted, p)))
            .collect(),
        regret: None,
        failures: losses.len() - sorted.len(),
        seed,
    }
}

/// Monte-Carlo estimate of `R(θ̂, θ*) = E (1/n)‖θ̂ − θ*‖²`.
pub fn run_risk(signal: &SignalSpec, sigma: f64, reps: usize, seed: u64) -> Result<RiskReport> {
    check_run(sigma, reps)?;
    let theta = signal.generate()?;
    let losses = replication_losses(&theta, sigma, reps, seed)?;
    Ok(summarize(signal, sigma, reps, seed, &losses))
}

/// The deterministic misspecification terms `(offset, H)` of `θ*`.
pub fn misspecification_terms(theta: &[f64]) -> Result<(f64, f64)> {
    let mu = ortho_affine_part(theta);
    let best = project_ortho_affine(&mu, DEFAULT_TOL)?;
    let offset = dist_sq(&best.point, &mu) / theta.len() as f64;
    let h = range_v(&project(&mu, &ConeSpec::FullConcave, DEFAULT_TOL)?.point);
    Ok((offset, h))
}

/// [`run_risk`] for an arbitrary `θ*`, additionally reporting the regret
/// `loss − offset` per replication.
///
/// The regret is nonnegative path by path: the obtuse-angle property of the
/// projection gives `‖θ̂ − θ*‖² ≥ ‖θ* − Π_K θ*‖² + ‖θ̂ − Π_K θ*‖²`.
pub fn run_regret(signal: &SignalSpec, sigma: f64, reps: usize, seed: u64) -> Result<RiskReport> {
    check_run(sigma, reps)?;
    let theta = signal.generate()?;
    let (offset, h) = misspecification_terms(&theta)?;
    let losses = replication_losses(&theta, sigma, reps, seed)?;
    let mut report = summarize(signal, sigma, reps, seed, &losses);
    let regret: RunningStats = losses.iter().flatten().map(|l| l - offset).collect();
    report.regret = Some(Regret {
        mean: regret.mean(),
        stderr: regret.stderr(),
        offset,
        h,
    });
    Ok(report)
}

/// Which column of a report a rate is fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMetric {
    Loss,
    Regret,
}

/// `(n, mean, stderr)` of one report under `metric`.
pub fn rate_point(report: &RiskReport, metric: RateMetric) -> Result<(usize, f64, f64)> {
    match metric {
        RateMetric::Loss => Ok((report.n(), report.mean_loss, report.stderr)),
        RateMetric::Regret => report
            .regret
            .map(|r| (report.n(), r.mean, r.stderr))
            .ok_or_else(|| Error::Fit(format!("report at n = {} carries no regret", report.n()))),
    }
}

/// Weighted least-squares fit of `log mean` against `log n`.
///
/// A point with mean `m` and standard error `se` has `log m` with standard
/// error `≈ se/m`, so it is weighted by `(m/se)²`.
pub fn fit_rate(points: &[(usize, f64, f64)]) -> Result<LineFit> {
    if points.len() < 4 {
        return Err(Error::Fit(format!(
            "need at least 4 values of n, got {}",
            points.len()
        )));
    }
    let mut ns: Vec<usize> = points.iter().map(|p| p.0).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() != points.len() {
        return Err(Error::Fit("repeated n in the rate grid".into()));
    }
    let mut x = Vec::with_capacity(points.len());
    let mut y = Vec::with_capacity(points.len());
    let mut w = Vec::with_capacity(points.len());
    for &(n, mean, se) in points {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::Fit(format!("mean at n = {n} is not positive: {mean}")));
        }
        if !(se > 0.0 && se.is_finite()) {
            return Err(Error::Fit(format!(
                "standard error at n = {n} is not positive: {se}"
            )));
        }
        x.push((n as f64).ln());
        y.push(mean.ln());
        w.push((mean / se).powi(2));
    }
    weighted_line_fit(&x, &y, &w)
}

pub fn fit_reports(reports: &[RiskReport], metric: RateMetric) -> Result<LineFit> {
    let points = reports
        .iter()
        .map(|r| rate_point(r, metric))
        .collect::<Result<Vec<_>>>()?;
    fit_rate(&points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionAudit {
    pub reps: usize,
    /// Largest relative residual of the squared-loss identity.
    pub loss_residual: f64,
    /// Largest relative residual of `Π_K(y) = Π_{K∩L⊥}(μ* + z) + P_L y`.
    pub projection_residual: f64,
    /// Mean and standard error of `‖P_L z‖²/σ²` (zero when `σ = 0`).
    pub chi2_mean: f64,
    pub chi2_stderr: f64,
}

impl DecompositionAudit {
    pub fn max_residual(&self) -> f64 {
        self.loss_residual.max(self.projection_residual)
    }
}

fn relative(diff: f64, scale: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff / scale.max(f64::MIN_POSITIVE)
    }
}

/// Checks, replication by replication, the orthogonal split of the estimator
/// and of its loss into the `K ∩ L⊥` part and the affine part.
///
/// The estimator is solved from `θ* + z`; the cone part is solved
/// separately from `μ* + z`.
pub fn decomposition_audit(
    signal: &SignalSpec,
    sigma: f64,
    reps: usize,
    seed: u64,
) -> Result<DecompositionAudit> {
    check_run(sigma, reps)?;
    let theta = signal.generate()?;
    if !is_member(&theta, &ConeSpec::FullConcave, MEMBERSHIP_TOL)? {
        return Err(Error::domain("decomposition audit requires a concave signal"));
    }
    let n = theta.len();
    let mu = ortho_affine_part(&theta);
    let rows: Vec<(f64, f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let z = replication_noise(seed, r, n, sigma);
            let y: Vec<f64> = theta.iter().zip(&z).map(|(t, e)| t + e).collect();
            let fit = project(&y, &ConeSpec::FullConcave, DEFAULT_TOL)?.point;
            let shifted: Vec<f64> = mu.iter().zip(&z).map(|(m, e)| m + e).collect();
            let cone_part = project_ortho_affine(&shifted, DEFAULT_TOL)?.point;
            let affine_noise = project_affine(&z);
            let affine_y = project_affine(&y);

            let lhs = dist_sq(&fit, &theta);
            let pz = norm(&affine_noise).powi(2);
            let rhs = dist_sq(&cone_part, &mu) + pz;
            // Rounding floor: at z = 0 both sides are pure round-off.
            let floor = f64::EPSILON * norm(&y).powi(2);
            let loss_res = relative((lhs - rhs).abs(), lhs.max(rhs).max(floor));

            let recomposed: Vec<f64> = cone_part.iter().zip(&affine_y).map(|(c, a)| c + a).collect();
            let proj_res = relative(norm(&sub(&fit, &recomposed)), norm(&fit));

            let chi2 = if sigma > 0.0 { pz / (sigma * sigma) } else { 0.0 };
            Ok((loss_res, proj_res, chi2))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut loss_residual: f64 = 0.0;
    let mut projection_residual: f64 = 0.0;
    let mut chi2 = RunningStats::default();
    for &(a, b, c) in &rows {
        loss_residual = loss_residual.max(a);
        projection_residual = projection_residual.max(b);
        chi2.push(c);
    }
    Ok(DecompositionAudit {
        reps,
        loss_residual,
        projection_residual,
        chi2_mean: chi2.mean(),
        chi2_stderr: chi2.stderr(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub x: f64,
    /// `σ²(2 + 17x)/n + Ĉ·rate`.
    pub threshold: f64,
    /// Fraction of replications whose loss exceeds `threshold`.
    pub fraction: f64,
    /// `exp(−x) + exp(−x²/16)`.
    pub allowed: f64,
    /// Binomial standard error at the allowed probability.
    pub stderr: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailAudit {
    pub signal: SignalSpec,
    pub sigma: f64,
    pub reps: usize,
    pub seed: u64,
    /// `σ^{8/5}(V(μ*) + σ)^{2/5} n^{−4/5}`.
    pub rate: f64,
    /// Constant calibrated so the `x = 0` threshold equals the median loss.
    pub c_hat: f64,
    pub rows: Vec<TailRow>,
}

impl TailAudit {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }
}

/// Empirical exceedance of the high-probability loss bound for each `x`.
pub fn highprob_audit(
    signal: &SignalSpec,
    sigma: f64,
    reps: usize,
    x_grid: &[f64],
    seed: u64,
) -> Result<TailAudit> {
    check_run(sigma, reps)?;
    if let Some(x) = x_grid.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
        return Err(Error::domain(format!(
            "x must be finite and nonnegative, got {x}"
        )));
    }
    let theta = signal.generate()?;
    if !is_member(&theta, &ConeSpec::FullConcave, MEMBERSHIP_TOL)? {
        return Err(Error::domain("the tail audit requires a concave signal"));
    }
    let n = theta.len() as f64;
    let v = range_v(&ortho_affine_part(&theta));
    let rate = sigma.powf(1.6) * (v + sigma).powf(0.4) * n.powf(-0.8);
    let losses = replication_losses(&theta, sigma, reps, seed)?;
    let mut kept: Vec<f64> = losses.into_iter().flatten().collect();
    kept.sort_by(f64::total_cmp);
    let median = quantile_sorted(&kept, 0.5);
    let floor = 2.0 * sigma * sigma / n;
    let c_hat = if rate > 0.0 {
        ((median - floor) / rate).max(0.0)
    } else {
        0.0
    };
    let m = kept.len() as f64;
    let rows = x_grid
        .iter()
        .map(|&x| {
            let threshold = sigma * sigma * (2.0 + 17.0 * x) / n + c_hat * rate;
            let fraction = kept.iter().filter(|&&l| l > threshold).count() as f64 / m;
            let allowed = (-x).exp() + (-x * x / 16.0).exp();
            let p = allowed.min(1.0);
            let stderr = (p * (1.0 - p) / m).sqrt();
            TailRow {
                x,
                threshold,
                fraction,
                allowed,
                stderr,
                holds: fraction <= allowed + 3.0 * stderr,
            }
        })
        .collect();
    Ok(TailAudit {
        signal: signal.clone(),
        sigma,
        reps,
        seed,
        rate,
        c_hat,
        rows,
    })
}
