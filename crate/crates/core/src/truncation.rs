//! Truncation of a concave sequence into the band `[θ*₁ − L, θ*ₙ + L]`
//! around a non-decreasing concave reference `θ*`.
//!
//! Entries below the band (the set `S1`) are raised to `θ*₁ − L`, entries
//! above it (`S2`) are lowered to `θ*ₙ + L`. The result is concave on at most
//! three blocks, never moves an entry further than `θ*` is from it, and the
//! exceedance sets have the interval structure used to bound
//! `E sup ⟨z, θ − θ′⟩`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{argmax_first, is_member, is_nondecreasing, is_nonincreasing, ConeSpec, MEMBERSHIP_TOL};
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::stats::RunningStats;
use crate::vector::{dist, max_abs};
use crate::width::{replication_noise, WidthPoint};

/// Multiple of `σ` used for the band half-width when none is given.
pub const DEFAULT_LEVEL_FACTOR: f64 = 128.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationResult {
    pub truncated: Vec<f64>,
    /// 1-based indices raised to the lower clamp.
    pub s1: Vec<usize>,
    /// 1-based indices lowered to the upper clamp.
    pub s2: Vec<usize>,
    pub level: f64,
    pub lower_clamp: f64,
    pub upper_clamp: f64,
    /// Breakpoints `(m1, m2)` of a three-block cone containing the result:
    /// `S1 = {1..m1} ∪ {m2..n}`.
    pub m1: usize,
    pub m2: usize,
}

impl TruncationResult {
    pub fn three_block(&self) -> ConeSpec {
        ConeSpec::ThreeBlock {
            m1: self.m1,
            m2: self.m2,
        }
    }
}

fn tol_for(theta: &[f64]) -> f64 {
    MEMBERSHIP_TOL * (1.0 + max_abs(theta))
}

fn check_pair(theta: &[f64], theta_star: &[f64], level: f64) -> Result<()> {
    if theta.len() != theta_star.len() {
        return Err(Error::size(format!(
            "sequence has length {} but the reference has length {}",
            theta.len(),
            theta_star.len()
        )));
    }
    if !(level > 0.0 && level.is_finite()) {
        return Err(Error::domain(format!(
            "truncation level must be positive, got {level}"
        )));
    }
    if !is_member(theta, &ConeSpec::FullConcave, tol_for(theta))? {
        return Err(Error::domain("the truncated sequence must be concave"));
    }
    if !is_member(theta_star, &ConeSpec::FullConcave, tol_for(theta_star))? {
        return Err(Error::domain("the reference sequence must be concave"));
    }
    Ok(())
}

/// Clamp `θ` into `[θ*₁ − L, θ*ₙ + L]` for a non-decreasing concave `θ*`.
pub fn truncate(theta: &[f64], theta_star: &[f64], level: f64) -> Result<TruncationResult> {
    check_pair(theta, theta_star, level)?;
    if !is_nondecreasing(theta_star, tol_for(theta_star)) {
        return Err(Error::domain(
            "the reference must be non-decreasing (use truncate_monotone for the mirrored case)",
        ));
    }
    Ok(clamp(theta, theta_star, level))
}

/// [`truncate`] for a reference that is non-decreasing or non-increasing;
/// the latter is handled by reversing indices.
pub fn truncate_monotone(theta: &[f64], theta_star: &[f64], level: f64) -> Result<TruncationResult> {
    check_pair(theta, theta_star, level)?;
    let tol = tol_for(theta_star);
    if is_nondecreasing(theta_star, tol) {
        return Ok(clamp(theta, theta_star, level));
    }
    if !is_nonincreasing(theta_star, tol) {
        return Err(Error::domain("the reference must be monotone"));
    }
    let n = theta.len();
    let rev = |v: &[f64]| v.iter().rev().copied().collect::<Vec<f64>>();
    let r = clamp(&rev(theta), &rev(theta_star), level);
    let flip = |s: Vec<usize>| {
        let mut out: Vec<usize> = s.into_iter().map(|i| n + 1 - i).collect();
        out.sort_unstable();
        out
    };
    Ok(TruncationResult {
        truncated: rev(&r.truncated),
        s1: flip(r.s1),
        s2: flip(r.s2),
        level,
        lower_clamp: r.lower_clamp,
        upper_clamp: r.upper_clamp,
        m1: n + 1 - r.m2,
        m2: n + 1 - r.m1,
    })
}

fn clamp(theta: &[f64], theta_star: &[f64], level: f64) -> TruncationResult {
    let n = theta.len();
    let lower = theta_star[0] - level;
    let upper = theta_star[n - 1] + level;
    let mut truncated = theta.to_vec();
    let (mut s1, mut s2) = (Vec::new(), Vec::new());
    for (i, v) in truncated.iter_mut().enumerate() {
        if *v < lower {
            *v = lower;
            s1.push(i + 1);
        } else if *v > upper {
            *v = upper;
            s2.push(i + 1);
        }
    }
    // Leading run of S1 gives m1; everything after the last gap is the
    // trailing run.
    let m1 = s1.iter().enumerate().take_while(|(j, &i)| i == j + 1).count();
    let (m1, m2) = if m1 == n {
        (n, n + 1)
    } else {
        let trailing = s1
            .iter()
            .rev()
            .enumerate()
            .take_while(|(j, &i)| i == n - j)
            .count();
        (m1, n + 1 - trailing)
    };
    TruncationResult {
        truncated,
        s1,
        s2,
        level,
        lower_clamp: lower,
        upper_clamp: upper,
        m1,
        m2,
    }
}

/// `max_i (|θ_i − θ′_i| − |θ_i − θ*_i|)`; never positive for a valid truncation.
pub fn check_contractive(theta: &[f64], theta_star: &[f64], result: &TruncationResult) -> f64 {
    theta
        .iter()
        .zip(theta_star)
        .zip(&result.truncated)
        .map(|((t, s), p)| (t - p).abs() - (t - s).abs())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Outcome of every structural claim about a truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationAudit {
    /// Largest amount by which the result leaves the clamp band.
    pub clamp_excess: f64,
    /// The result is concave on the blocks `[1, m1]`, `[m1+1, m2−1]`, `[m2, n]`.
    pub three_block_member: bool,
    /// `S1 = {1..m1} ∪ {m2..n}` exactly.
    pub s1_boundary_intervals: bool,
    /// `S2` is empty or an interval containing the mode of `θ`.
    pub s2_mode_interval: bool,
    pub disjoint: bool,
    pub contractive_excess: f64,
}

impl TruncationAudit {
    pub fn passed(&self) -> bool {
        self.clamp_excess <= 0.0
            && self.three_block_member
            && self.s1_boundary_intervals
            && self.s2_mode_interval
            && self.disjoint
            && self.contractive_excess <= 0.0
    }
}

pub fn audit(theta: &[f64], theta_star: &[f64], result: &TruncationResult) -> Result<TruncationAudit> {
    let n = theta.len();
    let clamp_excess = result
        .truncated
        .iter()
        .map(|v| (result.lower_clamp - v).max(v - result.upper_clamp))
        .fold(f64::NEG_INFINITY, f64::max);
    let three_block_member = is_member(&result.truncated, &result.three_block(), tol_for(theta))?;
    let expected_s1: Vec<usize> = (1..=result.m1).chain(result.m2..=n).collect();
    let s1_boundary_intervals = result.m1 < result.m2 && expected_s1 == result.s1;
    let mode = argmax_first(theta) + 1;
    let s2_mode_interval = result.s2.is_empty()
        || (result.s2.windows(2).all(|w| w[1] == w[0] + 1)
            && result.s2[0] <= mode
            && mode <= *result.s2.last().unwrap());
    let disjoint = result.s1.iter().all(|i| result.s2.binary_search(i).is_err());
    Ok(TruncationAudit {
        clamp_excess,
        three_block_member,
        s1_boundary_intervals,
        s2_mode_interval,
        disjoint,
        contractive_excess: check_contractive(theta, theta_star, result),
    })
}

/// Counts at one dyadic level `2^j L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelCount {
    pub j: u32,
    pub threshold: f64,
    /// `|{i : |θ_i − θ*_i| > 2^j L}|`.
    pub count: usize,
    /// `v_j = t² / (4^j L²)`.
    pub cap: f64,
    /// `{i ∈ S1 : θ*₁ − θ_i > 2^j L}` lies in `{1..v_j} ∪ {n − v_j + 1..n}`.
    pub s1_within_cap: bool,
    /// `{i ∈ S2 : θ_i − θ*ₙ > 2^j L}` lies strictly within `v_j` of the mode.
    pub s2_within_cap: bool,
}

impl LevelCount {
    pub fn passed(&self) -> bool {
        self.count as f64 <= self.cap && self.s1_within_cap && self.s2_within_cap
    }
}

/// Dyadic level-set counts for `θ` within distance `t` of a non-decreasing
/// concave `θ*`, up to the first level above the largest deviation (all higher
/// levels are empty).
pub fn level_set_cardinalities(
    theta: &[f64],
    theta_star: &[f64],
    t: f64,
    level: f64,
) -> Result<Vec<LevelCount>> {
    check_pair(theta, theta_star, level)?;
    if !is_nondecreasing(theta_star, tol_for(theta_star)) {
        return Err(Error::domain("the reference must be non-decreasing"));
    }
    let d = dist(theta, theta_star);
    if d > t * (1.0 + 1e-12) {
        return Err(Error::domain(format!("‖θ − θ*‖ = {d} exceeds the radius {t}")));
    }
    let n = theta.len();
    let first = theta_star[0];
    let last = theta_star[n - 1];
    let mode = argmax_first(theta) + 1;
    let max_dev = theta
        .iter()
        .zip(theta_star)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let mut out = Vec::new();
    for j in 0u32.. {
        let threshold = level * 2f64.powi(j as i32);
        let cap = t * t / (threshold * threshold);
        let count = theta
            .iter()
            .zip(theta_star)
            .filter(|(a, b)| (*a - *b).abs() > threshold)
            .count();
        let s1_within_cap = (1..=n)
            .filter(|&i| first - theta[i - 1] > threshold)
            .all(|i| (i as f64) <= cap || (i as f64) > n as f64 - cap);
        let s2_within_cap = (1..=n)
            .filter(|&i| theta[i - 1] - last > threshold)
            .all(|i| ((i as f64) - (mode as f64)).abs() < cap);
        out.push(LevelCount {
            j,
            threshold,
            count,
            cap,
            s1_within_cap,
            s2_within_cap,
        });
        if threshold > max_dev {
            break;
        }
    }
    Ok(out)
}

/// Monte-Carlo `E max_{θ ∈ samples} ⟨z, θ − θ′(θ)⟩` over a finite sample of
/// the ball, where `θ′` is the truncation at `level`.
///
/// A finite sample only bounds the supremum over the full set from below.
pub fn truncation_gap_width(
    theta_star: &[f64],
    samples: &[Vec<f64>],
    level: f64,
    sigma: f64,
    reps: usize,
    seed: u64,
) -> Result<WidthPoint> {
    if samples.is_empty() || reps < 2 {
        return Err(Error::domain("need at least one sample and two replications"));
    }
    let gaps: Vec<Vec<f64>> = samples
        .iter()
        .map(|theta| {
            let r = truncate_monotone(theta, theta_star, level)?;
            Ok(theta.iter().zip(&r.truncated).map(|(a, b)| a - b).collect())
        })
        .collect::<Result<_>>()?;
    let n = theta_star.len();
    let values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let z = replication_noise(seed, r, n, sigma);
            gaps.iter()
                .map(|g| crate::vector::dot(&z, g))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let stats: RunningStats = values.into_iter().collect();
    let radius = samples.iter().map(|s| dist(s, theta_star)).fold(0.0, f64::max);
    Ok(WidthPoint {
        t: radius,
        mean: stats.mean(),
        stderr: stats.stderr(),
    })
}

/// A random `(θ*, θ, k, L, t)` instance: `θ*` non-decreasing concave, `θ`
/// concave with its maximum at `k`, `L` log-uniform in `[10⁻², 10]` and
/// `t ≥ ‖θ − θ*‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzInstance {
    pub theta_star: Vec<f64>,
    pub theta: Vec<f64>,
    pub k: usize,
    pub level: f64,
    pub t: f64,
}

/// Draws one instance with `3 ≤ n ≤ max_n`.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, max_n: usize) -> FuzzInstance {
    let n = rng.random_range(3..=max_n.max(3));
    random_instance_of_len(rng, n)
}

/// As [`random_instance`] with a fixed length `n ≥ 3`.
pub fn random_instance_of_len<R: Rng + ?Sized>(rng: &mut R, n: usize) -> FuzzInstance {
    let n = n.max(3);
    let mut log_uniform = |lo: f64, hi: f64| 10f64.powf(rng.random_range(lo..=hi));

    let star_scale = log_uniform(-2.0, 1.0);
    let mut incr: Vec<f64> = (0..n - 1)
        .map(|_| star_scale * -rng.random::<f64>().ln())
        .collect();
    incr.sort_by(|a, b| b.total_cmp(a));
    let mut theta_star = vec![rng.random_range(-1.0..=1.0)];
    for d in incr {
        theta_star.push(theta_star.last().unwrap() + d);
    }

    let k = rng.random_range(1..=n);
    let scale = 10f64.powf(rng.random_range(-1.0..=2.0));
    let mut steps: Vec<f64> = (0..n - 1)
        .map(|i| {
            let e = scale * (-rng.random::<f64>().ln()).max(1e-6);
            if i + 1 < k {
                e
            } else {
                -e
            }
        })
        .collect();
    steps.sort_by(|a, b| b.total_cmp(a));
    let shift = theta_star[n / 2] + scale * rng.random_range(-2.0..=2.0);
    let mut theta = vec![0.0];
    for d in steps {
        theta.push(theta.last().unwrap() + d);
    }
    let peak = theta[k - 1];
    for v in &mut theta {
        *v += shift - peak;
    }

    let level = 10f64.powf(rng.random_range(-2.0..=1.0));
    let t = dist(&theta, &theta_star) * (1.0 + rng.random::<f64>());
    FuzzInstance {
        theta_star,
        theta,
        k,
        level,
        t,
    }
}

/// Violation counts over a batch of fuzzed instances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzSummary {
    pub instances: usize,
    pub contractive: usize,
    pub clamp: usize,
    pub three_block: usize,
    pub s1_structure: usize,
    pub s2_structure: usize,
    pub disjoint: usize,
    pub level_caps: usize,
    pub symmetry: usize,
}

impl FuzzSummary {
    pub fn violations(&self) -> usize {
        self.contractive
            + self.clamp
            + self.three_block
            + self.s1_structure
            + self.s2_structure
            + self.disjoint
            + self.level_caps
            + self.symmetry
    }
}

/// Truncates and audits `instances` random cases drawn from the streams of
/// `seed`. Symmetry compares the mirrored instance against the mirror of the
/// truncation.
pub fn fuzz_truncation(instances: usize, max_n: usize, seed: u64) -> Result<FuzzSummary> {
    let rows = (0..instances)
        .into_par_iter()
        .map(|i| {
            let case = random_instance(&mut stream(seed, i as u64), max_n);
            let r = truncate(&case.theta, &case.theta_star, case.level)?;
            let a = audit(&case.theta, &case.theta_star, &r)?;
            let levels = level_set_cardinalities(&case.theta, &case.theta_star, case.t, case.level)?;
            let rev = |v: &[f64]| v.iter().rev().copied().collect::<Vec<f64>>();
            let mirrored = truncate_monotone(&rev(&case.theta), &rev(&case.theta_star), case.level)?;
            let mut s = FuzzSummary {
                instances: 1,
                ..FuzzSummary::default()
            };
            s.contractive = (a.contractive_excess > 0.0) as usize;
            s.clamp = (a.clamp_excess > 0.0) as usize;
            s.three_block = !a.three_block_member as usize;
            s.s1_structure = !a.s1_boundary_intervals as usize;
            s.s2_structure = !a.s2_mode_interval as usize;
            s.disjoint = !a.disjoint as usize;
            s.level_caps = !levels.iter().all(LevelCount::passed) as usize;
            s.symmetry = (rev(&mirrored.truncated) != r.truncated) as usize;
            Ok(s)
        })
        .collect::<Result<Vec<FuzzSummary>>>()?;
    let mut total = FuzzSummary::default();
    for s in rows {
        total.instances += s.instances;
        total.contractive += s.contractive;
        total.clamp += s.clamp;
        total.three_block += s.three_block;
        total.s1_structure += s.s1_structure;
        total.s2_structure += s.s2_structure;
        total.disjoint += s.disjoint;
        total.level_caps += s.level_caps;
        total.symmetry += s.symmetry;
    }
    Ok(total)
}
