//! Localized Gaussian widths `f(t) = E sup_{θ ∈ cone, ‖θ − c‖ ≤ t} ⟨z, θ − c⟩`.
//!
//! Every replication draws one noise vector and evaluates the supremum at all
//! radii with that same vector, so per-path monotonicity in `t` and
//! monotonicity of `sup/t` hold exactly, not just on average.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{is_member, is_nondecreasing, is_nonincreasing, ConeSpec, MEMBERSHIP_TOL};
use crate::error::{Error, Result};
use crate::projection::{max_linear_over_ball, max_linear_over_ball_from, DEFAULT_TOL};
use crate::rng::{gaussian_vector, stream};
use crate::stats::RunningStats;

pub const DEFAULT_REPS: usize = 400;
pub const POINTS_PER_DECADE: usize = 16;

/// Geometric grid from `start` to `stop` (both included) with `per_decade`
/// points per factor of ten.
pub fn geometric_grid(start: f64, stop: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && stop >= start && stop.is_finite()) || per_decade == 0 {
        return Err(Error::domain(format!(
            "geometric grid needs 0 < start <= stop and a positive density, got {start}..{stop} at {per_decade}/decade"
        )));
    }
    let decades = (stop / start).log10();
    let steps = (decades * per_decade as f64).round() as usize;
    if steps == 0 {
        return Ok(vec![start]);
    }
    let ratio = (stop / start).powf(1.0 / steps as f64);
    let mut grid: Vec<f64> = (0..steps).map(|j| start * ratio.powi(j as i32)).collect();
    grid.push(stop);
    Ok(grid)
}

/// Noise vector of replication `rep`: `N(0, σ² I_n)` from the derived stream.
pub fn replication_noise(seed: u64, rep: usize, n: usize, sigma: f64) -> Vec<f64> {
    gaussian_vector(&mut stream(seed, rep as u64), n, sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthPoint {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthCurve {
    pub center: Vec<f64>,
    pub cone: ConeSpec,
    pub sigma: f64,
    pub t_grid: Vec<f64>,
    pub estimates: Vec<WidthPoint>,
    pub reps: usize,
    pub seed: u64,
    /// Smallest radius `s` with `f̂(s) ≤ s²/2`, if the grid brackets it.
    pub fixed_point: Option<f64>,
}

/// Monte-Carlo evaluator of the localized width around a fixed center.
///
/// Replication `r` always sees the noise `replication_noise(seed, r, ..)`, so
/// evaluations at different radii (or at the same radius on different thread
/// counts) share their randomness path by path.
#[derive(Debug, Clone)]
pub struct WidthSampler {
    center: Vec<f64>,
    cone: ConeSpec,
    sigma: f64,
    reps: usize,
    seed: u64,
    tol: f64,
}

impl WidthSampler {
    pub fn new(center: &[f64], cone: ConeSpec, sigma: f64, reps: usize, seed: u64) -> Result<Self> {
        if reps == 0 {
            return Err(Error::domain("reps must be positive"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        let member_tol = MEMBERSHIP_TOL * (1.0 + crate::vector::max_abs(center));
        if !is_member(center, &cone, member_tol)? {
            return Err(Error::domain("the width center must lie in the cone"));
        }
        Ok(WidthSampler {
            center: center.to_vec(),
            cone,
            sigma,
            reps,
            seed,
            tol: DEFAULT_TOL,
        })
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn reps(&self) -> usize {
        self.reps
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn noise(&self, rep: usize) -> Vec<f64> {
        replication_noise(self.seed, rep, self.center.len(), self.sigma)
    }

    /// Per-replication suprema: `paths[r][j]` is the value at `t_grid[j]`.
    pub fn paths(&self, t_grid: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_grid(t_grid)?;
        (0..self.reps)
            .into_par_iter()
            .map(|r| {
                let z = self.noise(r);
                t_grid
                    .iter()
                    .map(|&t| {
                        if t == 0.0 {
                            return Ok(0.0);
                        }
                        Ok(max_linear_over_ball(&z, &self.center, t, &self.cone, self.tol)?.value)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect()
    }

    pub fn estimate(&self, t: f64) -> Result<WidthPoint> {
        let paths = self.paths(&[t])?;
        let stats: RunningStats = paths.iter().map(|p| p[0]).collect();
        Ok(WidthPoint {
            t,
            mean: stats.mean(),
            stderr: stats.stderr(),
        })
    }

    pub fn curve(&self, t_grid: &[f64]) -> Result<WidthCurve> {
        let paths = self.paths(t_grid)?;
        self.curve_from_paths(t_grid, &paths)
    }

    /// [`WidthSampler::curve`] from already computed [`WidthSampler::paths`].
    pub fn curve_from_paths(&self, t_grid: &[f64], paths: &[Vec<f64>]) -> Result<WidthCurve> {
        if paths.len() != self.reps || paths.iter().any(|p| p.len() != t_grid.len()) {
            return Err(Error::size("paths do not match the sampler and grid"));
        }
        let estimates: Vec<WidthPoint> = t_grid
            .iter()
            .enumerate()
            .map(|(j, &t)| {
                let stats: RunningStats = paths.iter().map(|p| p[j]).collect();
                WidthPoint {
                    t,
                    mean: stats.mean(),
                    stderr: stats.stderr(),
                }
            })
            .collect();

        // Refine between the last grid point above the parabola and the first
        // one on or below it.
        let mut fixed_point = None;
        if let Some(j) = estimates
            .iter()
            .position(|e| e.t > 0.0 && e.mean <= 0.5 * e.t * e.t)
        {
            let hi = estimates[j].t;
            let lo = if j > 0 && estimates[j - 1].t > 0.0 {
                estimates[j - 1].t
            } else {
                0.0
            };
            fixed_point = Some(if lo > 0.0 {
                find_fixed_point(|t| Ok(self.estimate(t)?.mean), lo, hi, 1e-3)?
            } else {
                hi
            });
        }

        Ok(WidthCurve {
            center: self.center.clone(),
            cone: self.cone,
            sigma: self.sigma,
            t_grid: t_grid.to_vec(),
            estimates,
            reps: self.reps,
            seed: self.seed,
            fixed_point,
        })
    }

    /// Fixed point of the Monte-Carlo width searched in `[lo, hi]`.
    pub fn fixed_point(&self, lo: f64, hi: f64, rel_width: f64) -> Result<f64> {
        find_fixed_point(|t| Ok(self.estimate(t)?.mean), lo, hi, rel_width)
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::domain("radii must be finite and nonnegative"));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("the radius grid must be strictly increasing"));
    }
    Ok(())
}

pub fn estimate_width(
    center: &[f64],
    cone: &ConeSpec,
    sigma: f64,
    t_grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<WidthCurve> {
    WidthSampler::new(center, *cone, sigma, reps, seed)?.curve(t_grid)
}

/// Monte-Carlo `E sup_{θ ∈ C_k, ‖θ − c‖ ≤ t} ⟨z, θ − c⟩` for a monotone
/// concave center `c` (which need not lie in `C_k`).
///
/// If the ball misses `C_k` the supremum is over an empty set and the
/// returned mean is `−∞`. Non-monotone centers are rejected unless
/// `allow_non_monotone` is set, in which case a warning is logged.
pub fn mode_restricted_width(
    center: &[f64],
    k: usize,
    sigma: f64,
    t: f64,
    reps: usize,
    seed: u64,
    allow_non_monotone: bool,
) -> Result<WidthPoint> {
    if reps == 0 {
        return Err(Error::domain("reps must be positive"));
    }
    let cone = ConeSpec::ModeConstrained { k };
    cone.validate(center.len())?;
    let tol = MEMBERSHIP_TOL * (1.0 + crate::vector::max_abs(center));
    let monotone = is_member(center, &ConeSpec::FullConcave, tol)?
        && (is_nondecreasing(center, tol) || is_nonincreasing(center, tol));
    if !monotone {
        if !allow_non_monotone {
            return Err(Error::domain("the center must be monotone and concave"));
        }
        log::warn!("mode-restricted width evaluated at a center that is not monotone concave");
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!(
            "radius must be finite and nonnegative, got {t}"
        )));
    }
    let values = (0..reps)
        .into_par_iter()
        .map(|r| {
            let z = replication_noise(seed, r, center.len(), sigma);
            Ok(max_linear_over_ball_from(&z, center, t, &cone, DEFAULT_TOL)?.map(|b| b.value))
        })
        .collect::<Result<Vec<Option<f64>>>>()?;
    if values.iter().any(Option::is_none) {
        return Ok(WidthPoint {
            t,
            mean: f64::NEG_INFINITY,
            stderr: 0.0,
        });
    }
    let stats: RunningStats = values.into_iter().flatten().collect();
    Ok(WidthPoint {
        t,
        mean: stats.mean(),
        stderr: stats.stderr(),
    })
}

/// Smallest `s ∈ [lo, hi]` with `f(s) ≤ s²/2`, to relative accuracy
/// `rel_width`.
///
/// Relies on `f(t)/t` being non-increasing (true path by path for widths
/// computed with common noise), so `f(t)/t − t/2` changes sign once.
pub fn find_fixed_point<F>(mut f: F, lo: f64, hi: f64, rel_width: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::domain(format!(
            "fixed-point search needs 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    if !(rel_width > 0.0) {
        return Err(Error::domain("relative bracket width must be positive"));
    }
    let gap = |t: f64, v: f64| v / t - 0.5 * t;
    let f_lo = f(lo)?;
    if gap(lo, f_lo) <= 0.0 {
        return Err(Error::Range(format!(
            "f({lo}) = {f_lo} is already below {lo}²/2; lower the search range"
        )));
    }
    let f_hi = f(hi)?;
    if gap(hi, f_hi) > 0.0 {
        return Err(Error::Range(format!(
            "f({hi}) = {f_hi} is still above {hi}²/2; raise the search range"
        )));
    }
    let (mut a, mut b) = (lo, hi);
    while b / a - 1.0 > rel_width {
        let mid = (a * b).sqrt();
        if gap(mid, f(mid)?) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(b)
}

/// Inputs of the explicit width bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    /// Placeholder for the unspecified universal constant.
    pub c: f64,
    pub sigma: f64,
    pub n: usize,
    /// Range term: `V(θ*)`, `V(μ*)` or `H(θ*)` depending on the setting.
    pub v_term: f64,
    /// Tail parameter of the high-probability statement.
    pub x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundForm {
    /// `Cσ{(V+σ)^{1/4} n^{1/8} t^{3/4} + √(log n) t} + t²/4`
    Proposition,
    /// `Cσ(V+σ)^{1/4} n^{1/8} t^{3/4} + 2σ√(2 log(n+2)) t + t²/8`
    ModeRestricted,
    /// `Cσ{(V+σ)^{1/4} n^{1/8} t^{3/4} + √(log n) t} + t²/8`
    MonotoneCenter,
}

impl BoundForm {
    /// `(a, b)` with bound `= C·a + b`; every form is affine in `C`.
    pub fn split(self, t: f64, spec: &BoundSpec) -> (f64, f64) {
        let n = spec.n as f64;
        let s = spec.sigma;
        let lead = s * (spec.v_term + s).powf(0.25) * n.powf(0.125) * t.powf(0.75);
        match self {
            BoundForm::Proposition => (lead + s * n.ln().sqrt() * t, 0.25 * t * t),
            BoundForm::ModeRestricted => (lead, 2.0 * s * (2.0 * (n + 2.0).ln()).sqrt() * t + 0.125 * t * t),
            BoundForm::MonotoneCenter => (lead + s * n.ln().sqrt() * t, 0.125 * t * t),
        }
    }

    pub fn evaluate(self, t: f64, spec: &BoundSpec) -> f64 {
        let (a, b) = self.split(t, spec);
        spec.c * a + b
    }
}

pub fn proposition_bound(t: f64, spec: &BoundSpec) -> f64 {
    BoundForm::Proposition.evaluate(t, spec)
}

pub fn key1_bound(t: f64, spec: &BoundSpec) -> f64 {
    BoundForm::ModeRestricted.evaluate(t, spec)
}

/// The brace in the source statement is unbalanced; this reads it with a
/// single `σ` prefactor on both bracketed terms, as in the proposition form.
pub fn key2_bound(t: f64, spec: &BoundSpec) -> f64 {
    BoundForm::MonotoneCenter.evaluate(t, spec)
}

/// Smallest `C ≥ 0` making `form` dominate every `(t, observed)` pair,
/// where `spec_at(t)` supplies the remaining inputs for that point.
pub fn calibrate_constant<S>(form: BoundForm, points: &[(f64, f64)], spec_at: S) -> Result<f64>
where
    S: Fn(usize) -> BoundSpec,
{
    if points.is_empty() {
        return Err(Error::Fit("no calibration points".into()));
    }
    let mut c: f64 = 0.0;
    for (i, &(t, observed)) in points.iter().enumerate() {
        let (a, b) = form.split(t, &spec_at(i));
        if a > 0.0 {
            c = c.max((observed - b) / a);
        } else if observed > b {
            return Err(Error::Fit(format!(
                "point {i} exceeds the constant-free part at t = {t}"
            )));
        }
    }
    Ok(c)
}

/// `2a(√(2 log n) + √(2π))`, the excess of `E max X_i` over `max E X_i` for
/// `n` variables with `N(0, a²)`-type upper tails.
pub fn subgaussian_max_bound(n: usize, a: f64) -> f64 {
    2.0 * a * ((2.0 * (n as f64).ln()).sqrt() + (2.0 * std::f64::consts::PI).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxCheck {
    pub n: usize,
    pub a: f64,
    pub mean: f64,
    pub stderr: f64,
    pub bound: f64,
    /// `mean − 3·stderr ≤ bound`.
    pub holds: bool,
}

/// Draws `n` iid `N(0, a²)` variables per replication and compares the mean
/// maximum against [`subgaussian_max_bound`].
pub fn check_subgaussian_max(n: usize, a: f64, reps: usize, seed: u64) -> Result<MaxCheck> {
    if n == 0 || reps < 2 || !(a > 0.0) {
        return Err(Error::domain("need n >= 1, reps >= 2 and a > 0"));
    }
    let maxima: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            replication_noise(seed, r, n, a)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let stats: RunningStats = maxima.into_iter().collect();
    let bound = subgaussian_max_bound(n, a);
    Ok(MaxCheck {
        n,
        a,
        mean: stats.mean(),
        stderr: stats.stderr(),
        bound,
        holds: stats.mean() - 3.0 * stats.stderr() <= bound,
    })
}

/// Worst pathwise violations of the shape of `t ↦ sup`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathAudit {
    /// Largest `sup(t_j) − sup(t_{j+1})` (positive means a decrease).
    pub monotone_violation: f64,
    /// Largest `sup(t_{j+1})/t_{j+1} − sup(t_j)/t_j` over positive radii.
    pub star_violation: f64,
    /// Largest `|sup(0)|`, if the grid contains zero.
    pub zero_value: Option<f64>,
}

impl PathAudit {
    pub fn holds(&self, slack: f64) -> bool {
        self.monotone_violation <= slack
            && self.star_violation <= slack
            && self.zero_value.unwrap_or(0.0) == 0.0
    }
}

pub fn audit_paths(t_grid: &[f64], paths: &[Vec<f64>]) -> PathAudit {
    let mut out = PathAudit {
        monotone_violation: f64::NEG_INFINITY,
        star_violation: f64::NEG_INFINITY,
        zero_value: None,
    };
    for path in paths {
        for j in 0..t_grid.len() {
            if t_grid[j] == 0.0 {
                out.zero_value = Some(out.zero_value.unwrap_or(0.0).max(path[j].abs()));
            }
            if j + 1 < t_grid.len() {
                out.monotone_violation = out.monotone_violation.max(path[j] - path[j + 1]);
                if t_grid[j] > 0.0 {
                    let ratio = path[j + 1] / t_grid[j + 1] - path[j] / t_grid[j];
                    out.star_violation = out.star_violation.max(ratio);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzAudit {
    pub pairs: usize,
    pub t: f64,
    /// Largest `|f(z) − f(z′)| − t‖z − z′‖` over the sampled pairs.
    pub max_excess: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Samples pairs `(z, z′ = z + s·w)` with `s` log-uniform in `[10⁻³, 1]` and
/// checks that the supremum over the ball of radius `t` moves by at most
/// `t‖z − z′‖`, up to `2·tol` of solver slack.
pub fn lipschitz_audit(
    center: &[f64],
    cone: &ConeSpec,
    sigma: f64,
    t: f64,
    pairs: usize,
    seed: u64,
    tol: f64,
) -> Result<LipschitzAudit> {
    use rand::Rng;
    if pairs == 0 || !(t > 0.0) || !(sigma > 0.0) {
        return Err(Error::domain("need pairs >= 1, t > 0 and sigma > 0"));
    }
    let n = center.len();
    let excess = (0..pairs)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r as u64);
            let z = gaussian_vector(&mut rng, n, sigma);
            let s = 10f64.powf(rng.random_range(-3.0..=0.0));
            let w = gaussian_vector(&mut rng, n, sigma);
            let z2: Vec<f64> = z.iter().zip(&w).map(|(a, b)| a + s * b).collect();
            let v1 = max_linear_over_ball(&z, center, t, cone, tol)?.value;
            let v2 = max_linear_over_ball(&z2, center, t, cone, tol)?.value;
            Ok((v1 - v2).abs() - t * crate::vector::dist(&z, &z2))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let slack = 2.0 * tol;
    Ok(LipschitzAudit {
        pairs,
        t,
        max_excess: excess,
        slack,
        holds: excess <= slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(c: f64, sigma: f64, n: usize, v: f64) -> BoundSpec {
        BoundSpec {
            c,
            sigma,
            n,
            v_term: v,
            x: 0.0,
        }
    }

    #[test]
    fn zero_radius_grid() {
        let curve = estimate_width(&[0.0; 5], &ConeSpec::FullConcave, 1.0, &[0.0], 10, 1).unwrap();
        assert_eq!(curve.estimates[0].mean, 0.0);
        assert_eq!(curve.estimates[0].stderr, 0.0);
    }

    #[test]
    fn reps_must_be_positive() {
        assert!(matches!(
            estimate_width(&[0.0; 5], &ConeSpec::FullConcave, 1.0, &[1.0], 0, 1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn linear_width_fixed_point() {
        let s = find_fixed_point(|t| Ok(1.5 * t), 0.1, 100.0, 1e-6).unwrap();
        assert!((s - 3.0).abs() < 1e-5);
        assert!(matches!(
            find_fixed_point(|t| Ok(1.5 * t), 4.0, 100.0, 1e-3),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            find_fixed_point(|t| Ok(1.5 * t), 0.1, 2.0, 1e-3),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn bound_plug_ins() {
        let s = spec(1.0, 1.0, 1, 0.0);
        for t in [0.0, 0.5, 2.0] {
            assert!((proposition_bound(t, &s) - (t.powf(0.75) + t * t / 4.0)).abs() < 1e-12);
        }
        let s2 = spec(0.0, 1.0, 2, 0.0);
        let t = 1.7;
        let expect = 2.0 * (2.0 * 4f64.ln()).sqrt() * t + t * t / 8.0;
        assert!((key1_bound(t, &s2) - expect).abs() < 1e-12);
        assert_eq!(key2_bound(0.0, &spec(3.0, 2.0, 50, 1.0)), 0.0);
    }

    #[test]
    fn doubling_range_scales_leading_term() {
        let a = BoundForm::Proposition.split(2.0, &spec(1.0, 1.0, 10, 1.0)).0 - 10f64.ln().sqrt() * 2.0;
        let b = BoundForm::Proposition.split(2.0, &spec(1.0, 1.0, 10, 3.0)).0 - 10f64.ln().sqrt() * 2.0;
        assert!((b / a - 2f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn calibration_is_tight() {
        let sp = spec(0.0, 1.0, 64, 0.5);
        let pts = [(1.0, 30.0), (4.0, 60.0), (9.0, 110.0)];
        let c = calibrate_constant(BoundForm::ModeRestricted, &pts, |_| sp).unwrap();
        let tight = BoundSpec { c, ..sp };
        let mut slack = f64::INFINITY;
        for (t, obs) in pts {
            let b = key1_bound(t, &tight);
            assert!(b >= obs - 1e-12);
            slack = slack.min(b - obs);
        }
        assert!(slack.abs() < 1e-12);
    }

    #[test]
    fn single_variable_bound() {
        assert!((subgaussian_max_bound(1, 1.0) - 2.0 * (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        assert!((subgaussian_max_bound(7, 3.0) - 3.0 * subgaussian_max_bound(7, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn grid_endpoints() {
        let g = geometric_grid(0.1, 10.0, 16).unwrap();
        assert_eq!(g.len(), 33);
        assert_eq!(g[0], 0.1);
        assert_eq!(*g.last().unwrap(), 10.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn supremum_is_lipschitz_in_noise() {
        let center: Vec<f64> = (0..40).map(|i| -((i as f64 - 20.0) / 20.0).powi(2)).collect();
        let audit = lipschitz_audit(&center, &ConeSpec::FullConcave, 1.0, 2.0, 50, 3, DEFAULT_TOL).unwrap();
        assert!(audit.holds, "{audit:?}");
    }
}
