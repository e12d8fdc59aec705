//! Packings and nets of bounded concave sequences, and entropy-law fits.
//!
//! Distances are plain Euclidean distances in `ℝⁿ`. Greedy packings are built
//! from a seeded stream of proposals; nets are built by quantizing a concave
//! sequence at adaptively spaced knots and interpolating linearly, then
//! projecting back onto the bounded cone.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{is_member, ConeSpec};
use crate::error::{Error, Result};
use crate::projection::{project, DEFAULT_TOL};
use crate::rng::{gaussian_vector, stream};
use crate::stats::weighted_line_fit;
use crate::vector::{dist_sq, norm};

/// Proposals generated (in parallel) per acceptance sweep.
const BATCH: usize = 512;
/// Default cap on the size of a single packing.
pub const MAX_PACKING: usize = 1_000_000;

/// The bounded set being packed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PackingDomain {
    /// `K_{n,B}`: concave, `|θ_i| ≤ B`.
    Concave { bound: f64 },
    /// Bounded sequences concave on the three blocks of fixed breakpoints.
    ThreeBlock { m1: usize, m2: usize, bound: f64 },
    /// Bounded sequences with at most three concave blocks, breakpoints free.
    AnyThreeBlock { bound: f64 },
}

impl PackingDomain {
    pub fn bound(&self) -> f64 {
        match *self {
            PackingDomain::Concave { bound }
            | PackingDomain::ThreeBlock { bound, .. }
            | PackingDomain::AnyThreeBlock { bound } => bound,
        }
    }

    /// The corresponding cone when the domain is a single convex set.
    pub fn cone(&self) -> Option<ConeSpec> {
        match *self {
            PackingDomain::Concave { bound } => Some(ConeSpec::BoundedConcave { bound }),
            PackingDomain::ThreeBlock { m1, m2, bound } => {
                Some(ConeSpec::BoundedThreeBlock { m1, m2, bound })
            }
            PackingDomain::AnyThreeBlock { .. } => None,
        }
    }

    pub fn from_cone(cone: &ConeSpec) -> Result<Self> {
        match *cone {
            ConeSpec::BoundedConcave { bound } => Ok(PackingDomain::Concave { bound }),
            ConeSpec::BoundedThreeBlock { m1, m2, bound } => Ok(PackingDomain::ThreeBlock { m1, m2, bound }),
            _ => Err(Error::spec(
                "packings need a bounded concave or bounded three-block cone",
            )),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if n < 3 {
            return Err(Error::size(format!("packings need n >= 3, got {n}")));
        }
        if let Some(cone) = self.cone() {
            return cone.validate(n);
        }
        let b = self.bound();
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::spec(format!("bound must be positive, got {b}")));
        }
        Ok(())
    }

    /// Membership up to `tol`; for free breakpoints, some admissible pair works.
    pub fn contains(&self, theta: &[f64], tol: f64) -> Result<bool> {
        match self.cone() {
            Some(cone) => is_member(theta, &cone, tol),
            None => {
                let bound = self.bound();
                if theta.iter().any(|v| v.abs() > bound + tol) {
                    return Ok(false);
                }
                Ok(fits_three_blocks(theta, tol))
            }
        }
    }
}

/// Whether `θ` splits into at most three consecutive concave blocks.
fn fits_three_blocks(theta: &[f64], tol: f64) -> bool {
    // Greedily extend each block as far as concavity allows.
    let n = theta.len();
    let mut start = 0;
    for _ in 0..3 {
        if start >= n {
            return true;
        }
        let mut end = start + 1;
        while end < n {
            if end >= start + 2 {
                let d = theta[end - 2] - 2.0 * theta[end - 1] + theta[end];
                if d > tol {
                    break;
                }
            }
            end += 1;
        }
        start = end;
    }
    start >= n
}

/// One random element of `K_{n,B}` (any `n ≥ 1`; for `n ≤ 2` every bounded
/// vector is concave).
pub fn sample_bounded_concave<R: Rng + ?Sized>(rng: &mut R, n: usize, bound: f64) -> Vec<f64> {
    if n <= 2 {
        return (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    }
    let shape: Vec<f64> = match rng.random_range(0..3u8) {
        0 => {
            // Projected Gaussian: few-knot, smooth-looking concave shapes.
            let z = gaussian_vector(rng, n, 1.0);
            project(&z, &ConeSpec::FullConcave, DEFAULT_TOL)
                .map(|r| r.point)
                .unwrap_or(z)
        }
        1 => {
            // Minimum of a few random lines: a concave polygon.
            let lines = rng.random_range(1..=4usize);
            let coefs: Vec<(f64, f64)> = (0..lines)
                .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-3.0..3.0)))
                .collect();
            (0..n)
                .map(|i| {
                    let x = i as f64 / (n - 1) as f64;
                    coefs.iter().map(|(a, b)| a + b * x).fold(f64::INFINITY, f64::min)
                })
                .collect()
        }
        _ => {
            // Concave parabola with a random apex.
            let apex = rng.random_range(-0.5..1.5);
            (0..n)
                .map(|i| {
                    let x = i as f64 / (n - 1) as f64;
                    -(x - apex) * (x - apex)
                })
                .collect()
        }
    };
    fit_into_band(rng, &shape, bound)
}

/// Affinely rescale a concave shape into a random sub-band of `[−B, B]`.
fn fit_into_band<R: Rng + ?Sized>(rng: &mut R, shape: &[f64], bound: f64) -> Vec<f64> {
    let lo = shape.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = shape.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = 2.0 * bound * rng.random::<f64>();
    let base = rng.random_range(-bound..=(bound - width).max(-bound));
    if hi - lo <= 1e-12 * (1.0 + hi.abs()) {
        return vec![rng.random_range(-bound..=bound); shape.len()];
    }
    let s = width / (hi - lo);
    shape
        .iter()
        .map(|v| (base + s * (v - lo)).clamp(-bound, bound))
        .collect()
}

fn sample_blocks<R: Rng + ?Sized>(rng: &mut R, n: usize, m1: usize, m2: usize, bound: f64) -> Vec<f64> {
    let mut out = sample_bounded_concave(rng, m1, bound);
    out.extend(sample_bounded_concave(rng, m2 - 1 - m1, bound));
    out.extend(sample_bounded_concave(rng, n + 1 - m2, bound));
    out
}

/// Deterministic boundary shapes: constants, ramps, tents and parabolas.
pub fn extreme_shapes(n: usize, bound: f64) -> Vec<Vec<f64>> {
    let x = |i: usize| i as f64 / (n - 1).max(1) as f64;
    let mut shapes = vec![vec![-bound; n], vec![0.0; n], vec![bound; n]];
    shapes.push((0..n).map(|i| -bound + 2.0 * bound * x(i)).collect());
    shapes.push((0..n).map(|i| bound - 2.0 * bound * x(i)).collect());
    for peak in [0.25, 0.5, 0.75] {
        shapes.push(
            (0..n)
                .map(|i| {
                    let d = (x(i) - peak).abs() / peak.max(1.0 - peak);
                    bound - 2.0 * bound * d
                })
                .collect(),
        );
    }
    shapes.push(
        (0..n)
            .map(|i| bound - 8.0 * bound * (x(i) - 0.5).powi(2))
            .collect(),
    );
    shapes
}

fn proposal(domain: &PackingDomain, n: usize, seed: u64, index: usize, extremes: &[Vec<f64>]) -> Vec<f64> {
    if index < extremes.len() {
        return extremes[index].clone();
    }
    let mut rng = stream(seed, index as u64);
    let bound = domain.bound();
    match *domain {
        PackingDomain::Concave { .. } => sample_bounded_concave(&mut rng, n, bound),
        PackingDomain::ThreeBlock { m1, m2, .. } => sample_blocks(&mut rng, n, m1, m2, bound),
        PackingDomain::AnyThreeBlock { .. } => {
            let m2 = rng.random_range(1..=n + 1);
            let m1 = rng.random_range(0..m2);
            sample_blocks(&mut rng, n, m1, m2, bound)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packing {
    pub epsilon: f64,
    /// Pairwise distances all exceed `epsilon`.
    pub points: Vec<Vec<f64>>,
    /// Proposals examined (shared across nested radii).
    pub proposals: usize,
    /// The run hit its point cap, so `count` only bounds the greedy packing
    /// size from below.
    pub saturated: bool,
}

impl Packing {
    pub fn count(&self) -> usize {
        self.points.len()
    }
}

/// Points bucketed on a grid of side `ε` over their coordinates in three
/// fixed orthonormal directions (discrete constant, linear and quadratic
/// profiles). Each coordinate is 1-Lipschitz, so `‖a − b‖ ≤ ε` forces the
/// cells of `a` and `b` to be neighbours.
struct Index {
    eps: f64,
    eps_sq: f64,
    basis: [Vec<f64>; 3],
    buckets: HashMap<[i64; 3], Vec<usize>>,
}

fn orthonormal_profiles(n: usize) -> [Vec<f64>; 3] {
    let x = |i: usize| 2.0 * i as f64 / (n - 1) as f64 - 1.0;
    let mut out: [Vec<f64>; 3] = std::array::from_fn(|deg| (0..n).map(|i| x(i).powi(deg as i32)).collect());
    // Gram–Schmidt.
    for k in 0..3 {
        for j in 0..k {
            let c = crate::vector::dot(&out[k], &out[j]);
            let prev = out[j].clone();
            for (a, b) in out[k].iter_mut().zip(&prev) {
                *a -= c * b;
            }
        }
        let nv = norm(&out[k]);
        for a in out[k].iter_mut() {
            *a /= nv;
        }
    }
    out
}

impl Index {
    fn new(n: usize, epsilon: f64) -> Self {
        Index {
            eps: epsilon,
            eps_sq: epsilon * epsilon,
            basis: orthonormal_profiles(n),
            buckets: HashMap::new(),
        }
    }

    fn key(&self, p: &[f64]) -> [i64; 3] {
        let c = |k: usize| (crate::vector::dot(&self.basis[k], p) / self.eps).floor() as i64;
        [c(0), c(1), c(2)]
    }

    fn separated(&self, points: &[Vec<f64>], p: &[f64]) -> bool {
        let k = self.key(p);
        for d0 in -1..=1 {
            for d1 in -1..=1 {
                for d2 in -1..=1 {
                    if let Some(ids) = self.buckets.get(&[k[0] + d0, k[1] + d1, k[2] + d2]) {
                        if ids.iter().any(|&i| dist_sq(&points[i], p) <= self.eps_sq) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    fn insert(&mut self, p: &[f64], id: usize) {
        let k = self.key(p);
        self.buckets.entry(k).or_default().push(id);
    }
}

/// Greedy `ε`-packings for every radius in `epsilons`, nested: the packing
/// at a larger radius seeds the one at the next smaller radius, and all
/// radii scan the same proposal stream. Each run stops after `budget`
/// consecutive rejected proposals, or once it holds `max_points` points.
/// Results are returned in the input order.
pub fn greedy_packings(
    n: usize,
    domain: &PackingDomain,
    epsilons: &[f64],
    budget: usize,
    max_points: usize,
    seed: u64,
) -> Result<Vec<Packing>> {
    domain.validate(n)?;
    if budget == 0 {
        return Err(Error::domain("budget must be positive"));
    }
    if epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::domain("packing radii must be positive"));
    }
    let mut order: Vec<usize> = (0..epsilons.len()).collect();
    order.sort_by(|&a, &b| epsilons[b].total_cmp(&epsilons[a]));

    let extremes = extreme_shapes(n, domain.bound());
    let mut out: Vec<Option<Packing>> = vec![None; epsilons.len()];
    let mut points: Vec<Vec<f64>> = Vec::new();
    for &slot in &order {
        let epsilon = epsilons[slot];
        let mut index = Index::new(n, epsilon);
        for (id, p) in points.iter().enumerate() {
            index.insert(p, id);
        }
        let mut next = 0usize;
        let mut rejected = 0usize;
        let mut saturated = points.len() >= max_points;
        'scan: while !saturated {
            let batch: Vec<Vec<f64>> = (next..next + BATCH)
                .into_par_iter()
                .map(|i| proposal(domain, n, seed, i, &extremes))
                .collect();
            for p in batch {
                next += 1;
                if index.separated(&points, &p) {
                    index.insert(&p, points.len());
                    points.push(p);
                    rejected = 0;
                    if points.len() >= max_points {
                        saturated = true;
                        break 'scan;
                    }
                } else {
                    rejected += 1;
                    if rejected >= budget {
                        break 'scan;
                    }
                }
            }
        }
        out[slot] = Some(Packing {
            epsilon,
            points: points.clone(),
            proposals: next,
            saturated,
        });
    }
    Ok(out
        .into_iter()
        .map(|p| p.expect("every radius is visited"))
        .collect())
}

pub fn greedy_packing(n: usize, cone: &ConeSpec, epsilon: f64, budget: usize, seed: u64) -> Result<Packing> {
    let domain = PackingDomain::from_cone(cone)?;
    Ok(greedy_packings(n, &domain, &[epsilon], budget, MAX_PACKING, seed)?.remove(0))
}

/// An explicit `ε`-net of `K_{n,B}`: knot values on a grid of step `ε/√n`,
/// linear interpolation between knots, then projection onto `K_{n,B}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationNet {
    pub n: usize,
    pub bound: f64,
    pub epsilon: f64,
    /// 0-based knot positions, always including `0` and `n − 1`.
    pub knots: Vec<usize>,
    /// Quantization step of the knot values.
    pub step: f64,
    /// Grid values per knot.
    pub levels: usize,
    /// Worst-case squared interpolation error certified by the knot layout.
    pub interpolation_error_sq: f64,
}

impl InterpolationNet {
    /// `levels^knots` (or 1 for the trivial net), as a float.
    pub fn count(&self) -> f64 {
        self.log_count().exp()
    }

    pub fn log_count(&self) -> f64 {
        if self.knots.is_empty() {
            0.0
        } else {
            self.knots.len() as f64 * (self.levels as f64).ln()
        }
    }

    /// The net point assigned to `θ ∈ K_{n,B}`; within `ε` of `θ`.
    pub fn nearest(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.n {
            return Err(Error::size(format!(
                "expected length {}, got {}",
                self.n,
                theta.len()
            )));
        }
        if self.knots.is_empty() {
            return Ok(vec![0.0; self.n]);
        }
        let codes: Vec<usize> = self
            .knots
            .iter()
            .map(|&k| {
                let j = ((theta[k] + self.bound) / self.step).round();
                j.clamp(0.0, (self.levels - 1) as f64) as usize
            })
            .collect();
        self.point(&codes)
    }

    /// Net point with the given grid index at every knot.
    pub fn point(&self, codes: &[usize]) -> Result<Vec<f64>> {
        if self.knots.is_empty() {
            return Ok(vec![0.0; self.n]);
        }
        if codes.len() != self.knots.len() || codes.iter().any(|&c| c >= self.levels) {
            return Err(Error::domain("knot codes do not match the net"));
        }
        let values: Vec<f64> = codes
            .iter()
            .map(|&c| -self.bound + c as f64 * self.step)
            .collect();
        let mut q = vec![0.0; self.n];
        for (w, seg) in self.knots.windows(2).enumerate() {
            let (a, b) = (seg[0], seg[1]);
            for (i, slot) in q.iter_mut().enumerate().take(b + 1).skip(a) {
                let u = (i - a) as f64 / (b - a) as f64;
                *slot = values[w] * (1.0 - u) + values[w + 1] * u;
            }
        }
        Ok(project(&q, &ConeSpec::BoundedConcave { bound: self.bound }, DEFAULT_TOL)?.point)
    }

    /// Every net point, if there are at most `limit` of them.
    pub fn enumerate(&self, limit: usize) -> Result<Vec<Vec<f64>>> {
        if self.count() > limit as f64 {
            return Err(Error::Resource(format!(
                "net has about {:.3e} points, more than the limit {limit}",
                self.count()
            )));
        }
        if self.knots.is_empty() {
            return Ok(vec![vec![0.0; self.n]]);
        }
        let mut codes = vec![0usize; self.knots.len()];
        let mut out = Vec::new();
        loop {
            out.push(self.point(&codes)?);
            let mut pos = 0;
            loop {
                if pos == codes.len() {
                    return Ok(out);
                }
                codes[pos] += 1;
                if codes[pos] < self.levels {
                    break;
                }
                codes[pos] = 0;
                pos += 1;
            }
        }
    }
}

/// Largest possible first difference `θ_{i+1} − θ_i` in `K_{n,B}` (0-based).
fn slope_max(i: usize, bound: f64) -> f64 {
    if i == 0 {
        2.0 * bound
    } else {
        2.0 * bound / i as f64
    }
}

/// Smallest possible first difference `θ_{i+1} − θ_i` in `K_{n,B}`.
fn slope_min(i: usize, n: usize, bound: f64) -> f64 {
    let after = n - 2 - i;
    if after == 0 {
        -2.0 * bound
    } else {
        -2.0 * bound / after as f64
    }
}

/// Worst-case `Σ (θ_i − chord_i)²` over the interior of knots `a < b`.
fn segment_error(a: usize, b: usize, n: usize, bound: f64) -> f64 {
    let m = b - a;
    if m < 2 {
        return 0.0;
    }
    let drop = slope_max(a, bound) - slope_min(b - 1, n, bound);
    (1..m)
        .map(|u| {
            let gap = (u * (m - u)) as f64 / m as f64 * drop;
            let gap = gap.min(2.0 * bound);
            gap * gap
        })
        .sum()
}

/// Knots with every segment error at most `budget`, greedily as sparse as
/// possible from the left.
fn knots_for(n: usize, bound: f64, budget: f64) -> (Vec<usize>, f64) {
    let mut knots = vec![0];
    let mut total = 0.0;
    let mut a = 0;
    while a < n - 1 {
        let mut b = a + 1;
        while b < n - 1 && segment_error(a, b + 1, n, bound) <= budget {
            b += 1;
        }
        total += segment_error(a, b, n, bound);
        knots.push(b);
        a = b;
    }
    (knots, total)
}

pub fn interpolation_net(n: usize, bound: f64, epsilon: f64) -> Result<InterpolationNet> {
    if n < 3 {
        return Err(Error::size(format!("nets need n >= 3, got {n}")));
    }
    if !(bound > 0.0 && epsilon > 0.0 && bound.is_finite() && epsilon.is_finite()) {
        return Err(Error::domain("bound and radius must be positive"));
    }
    let trivial = InterpolationNet {
        n,
        bound,
        epsilon,
        knots: Vec::new(),
        step: 0.0,
        levels: 1,
        interpolation_error_sq: 0.0,
    };
    // Every member has norm at most B√n.
    if epsilon >= bound * (n as f64).sqrt() {
        return Ok(trivial);
    }
    // Interpolation error ≤ ε/2 and quantization error ≤ (step/2)√n = ε/2.
    let target = 0.25 * epsilon * epsilon;
    let step = epsilon / (n as f64).sqrt();
    let levels = (2.0 * bound / step).ceil() as usize + 1;

    let (mut lo, mut hi) = (0.0f64, target);
    let mut best = knots_for(n, bound, 0.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let cand = knots_for(n, bound, mid);
        if cand.1 <= target {
            if cand.0.len() <= best.0.len() {
                best = cand;
            }
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(InterpolationNet {
        n,
        bound,
        epsilon,
        knots: best.0,
        step,
        levels,
        interpolation_error_sq: best.1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub n: usize,
    pub bound: f64,
    pub epsilon: f64,
    pub packing_count: usize,
    pub net_count: f64,
    pub log_packing: f64,
    pub log_net: f64,
}

impl EntropyEstimate {
    /// `packing(2ε) ≤ net(ε)` needs the packing at twice this radius.
    pub fn sandwich_holds(&self, packing_at_double: usize) -> bool {
        (packing_at_double as f64).ln() <= self.log_net + 1e-12
    }
}

/// Packing (greedy, nested over the grid) and interpolation-net counts of
/// `K_{n,B}` on a radius grid.
pub fn entropy_table(
    n: usize,
    bound: f64,
    epsilons: &[f64],
    budget: usize,
    seed: u64,
) -> Result<Vec<EntropyEstimate>> {
    let packings = greedy_packings(
        n,
        &PackingDomain::Concave { bound },
        epsilons,
        budget,
        MAX_PACKING,
        seed,
    )?;
    epsilons
        .iter()
        .zip(&packings)
        .map(|(&epsilon, p)| {
            let net = interpolation_net(n, bound, epsilon)?;
            Ok(EntropyEstimate {
                n,
                bound,
                epsilon,
                packing_count: p.count(),
                net_count: net.count(),
                log_packing: (p.count() as f64).ln(),
                log_net: net.log_count(),
            })
        })
        .collect()
}

/// Which count an entropy fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountKind {
    Packing,
    Net,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyFit {
    /// Slope of `log log N` against `log(1/ε)` at fixed `(n, B)`.
    pub epsilon_slope: Option<f64>,
    /// Slope of `log log N` against `log n` at fixed `(B, ε)`.
    pub n_slope: Option<f64>,
}

/// Within-group least squares: each group is centred before pooling, so
/// group-level offsets do not leak into the slope.
fn pooled_slope(groups: &HashMap<String, Vec<(f64, f64)>>) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut keys: Vec<&String> = groups.keys().collect();
    keys.sort();
    for key in keys {
        let g = &groups[key];
        if g.len() < 2 {
            continue;
        }
        let mx = g.iter().map(|p| p.0).sum::<f64>() / g.len() as f64;
        let my = g.iter().map(|p| p.1).sum::<f64>() / g.len() as f64;
        for &(x, y) in g {
            xs.push(x - mx);
            ys.push(y - my);
        }
    }
    if xs.len() < 4 {
        return None;
    }
    let w = vec![1.0; xs.len()];
    weighted_line_fit(&xs, &ys, &w).ok().map(|f| f.slope)
}

/// Fitted exponents of `log N ∝ n^a ε^{−b}`: returns `(b, a)` as
/// `(epsilon_slope, n_slope)`. Points with fewer than two elements are skipped
/// (`log log` is undefined there).
pub fn fit_entropy_exponents(estimates: &[EntropyEstimate], kind: CountKind) -> Result<EntropyFit> {
    let mut by_n: HashMap<String, Vec<(f64, f64)>> = HashMap::new();
    let mut by_eps: HashMap<String, Vec<(f64, f64)>> = HashMap::new();
    for e in estimates {
        let log_count = match kind {
            CountKind::Packing => e.log_packing,
            CountKind::Net => e.log_net,
        };
        if !(log_count > 0.0) {
            continue;
        }
        let y = log_count.ln();
        by_n.entry(format!("{}:{:e}", e.n, e.bound))
            .or_default()
            .push(((1.0 / e.epsilon).ln(), y));
        by_eps
            .entry(format!("{:e}:{:e}", e.bound, e.epsilon))
            .or_default()
            .push(((e.n as f64).ln(), y));
    }
    let fit = EntropyFit {
        epsilon_slope: pooled_slope(&by_n),
        n_slope: pooled_slope(&by_eps),
    };
    if fit.epsilon_slope.is_none() && fit.n_slope.is_none() {
        return Err(Error::Fit(
            "need at least four points varying one variable with the others fixed".into(),
        ));
    }
    Ok(fit)
}

/// Check `nearest` on random members; returns the largest distance seen.
pub fn net_coverage(net: &InterpolationNet, samples: usize, seed: u64) -> Result<f64> {
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let theta = sample_bounded_concave(&mut stream(seed, i as u64), net.n, net.bound);
            let p = net.nearest(&theta)?;
            Ok(norm(&crate::vector::sub(&theta, &p)))
        })
        .collect::<Result<Vec<f64>>>()
        .map(|d| d.into_iter().fold(0.0, f64::max))
}
