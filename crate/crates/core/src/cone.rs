//! Sequences on the equispaced grid, the cones they live in, and the
//! elementary functionals (second differences, range, mode, affine part).
//!
//! Indices that appear in the public API (`mode_index`, the mode `k` of
//! [`ConeSpec::ModeConstrained`], the three-block breakpoints) are 1-based,
//! with `0` and `n + 1` used as the "empty block" sentinels for breakpoints.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute tolerance on second differences for membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// A finite real sequence indexed by the implicit grid `1..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Sequence(Vec<f64>);

impl Sequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::size("sequence must have at least one entry"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("entry {} is not finite", i + 1)));
        }
        Ok(Sequence(values))
    }

    pub fn zeros(n: usize) -> Self {
        Sequence(vec![0.0; n.max(1)])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Sequence {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Sequence {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Sequence::new(values)
    }
}

impl From<Sequence> for Vec<f64> {
    fn from(s: Sequence) -> Vec<f64> {
        s.0
    }
}

/// The feasible sets the toolkit projects onto.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConeSpec {
    /// `K_n`: non-positive second differences.
    FullConcave,
    /// `C_k`: concave with the maximum attained at index `k` (1-based).
    ModeConstrained { k: usize },
    /// `K3`: concave separately on `[1, m1]`, `[m1 + 1, m2 - 1]` and `[m2, n]`.
    ThreeBlock { m1: usize, m2: usize },
    /// `K_n ∩ L⊥`: concave sequences orthogonal to every affine sequence.
    ConcaveOrthoAffine,
    /// `K_{n,B}`: concave with `max |θ_i| ≤ bound`.
    BoundedConcave { bound: f64 },
    /// Three-block sequences with `max |θ_i| ≤ bound`.
    BoundedThreeBlock { m1: usize, m2: usize, bound: f64 },
}

impl ConeSpec {
    /// Checks the cone's own invariants against a data length `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let needs_k3 = |what: &str| {
            if n < 3 {
                Err(Error::size(format!("{what} requires n >= 3, got n = {n}")))
            } else {
                Ok(())
            }
        };
        let bound_ok = |b: f64| {
            if b.is_finite() && b > 0.0 {
                Ok(())
            } else {
                Err(Error::spec(format!("bound must be positive and finite, got {b}")))
            }
        };
        let breakpoints_ok = |m1: usize, m2: usize| {
            if m1 < m2 && m2 <= n + 1 {
                Ok(())
            } else {
                Err(Error::spec(format!(
                    "breakpoints must satisfy 0 <= m1 < m2 <= n + 1 (n = {n}), got m1 = {m1}, m2 = {m2}"
                )))
            }
        };
        match *self {
            ConeSpec::FullConcave => needs_k3("the concave cone"),
            ConeSpec::ConcaveOrthoAffine => needs_k3("the ortho-affine concave cone"),
            ConeSpec::ModeConstrained { k } => {
                needs_k3("a mode-constrained cone")?;
                if k == 0 || k > n {
                    return Err(Error::spec(format!("mode k = {k} outside 1..={n}")));
                }
                Ok(())
            }
            ConeSpec::BoundedConcave { bound } => {
                needs_k3("the bounded concave set")?;
                bound_ok(bound)
            }
            ConeSpec::ThreeBlock { m1, m2 } => breakpoints_ok(m1, m2),
            ConeSpec::BoundedThreeBlock { m1, m2, bound } => {
                breakpoints_ok(m1, m2)?;
                bound_ok(bound)
            }
        }
    }

    /// Whether the set is a cone (closed under positive scaling).
    pub fn is_cone(&self) -> bool {
        !matches!(
            self,
            ConeSpec::BoundedConcave { .. } | ConeSpec::BoundedThreeBlock { .. }
        )
    }
}

/// Zero-based index ranges of the three blocks defined by 1-based breakpoints.
pub(crate) fn three_blocks(n: usize, m1: usize, m2: usize) -> [std::ops::Range<usize>; 3] {
    let first = 0..m1.min(n);
    let middle = m1.min(n)..(m2 - 1).min(n);
    let last = (m2 - 1).min(n)..n;
    [first, middle, last]
}

/// `θ_j − 2θ_{j+1} + θ_{j+2}` for every interior window; length `n − 2`.
pub fn second_differences(theta: &[f64]) -> Result<Vec<f64>> {
    if theta.len() < 3 {
        return Err(Error::size(format!(
            "second differences need n >= 3, got n = {}",
            theta.len()
        )));
    }
    Ok(second_diffs_unchecked(theta))
}

pub(crate) fn second_diffs_unchecked(theta: &[f64]) -> Vec<f64> {
    theta.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect()
}

fn concave_within(theta: &[f64], tol: f64) -> bool {
    theta.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] <= tol)
}

/// Membership test for every [`ConeSpec`], within an absolute tolerance.
pub fn is_member(theta: &[f64], cone: &ConeSpec, tol: f64) -> Result<bool> {
    let n = theta.len();
    cone.validate(n)?;
    let member = match *cone {
        ConeSpec::FullConcave => concave_within(theta, tol),
        ConeSpec::ModeConstrained { k } => {
            let peak = theta[k - 1];
            concave_within(theta, tol) && theta.iter().all(|&v| v <= peak + tol)
        }
        ConeSpec::ThreeBlock { m1, m2 } => three_blocks(n, m1, m2)
            .into_iter()
            .all(|r| concave_within(&theta[r], tol)),
        ConeSpec::ConcaveOrthoAffine => {
            let affine = project_affine(theta);
            concave_within(theta, tol) && affine.iter().all(|v| v.abs() <= tol.max(1e-12))
        }
        ConeSpec::BoundedConcave { bound } => {
            concave_within(theta, tol) && theta.iter().all(|v| v.abs() <= bound + tol)
        }
        ConeSpec::BoundedThreeBlock { m1, m2, bound } => {
            three_blocks(n, m1, m2)
                .into_iter()
                .all(|r| concave_within(&theta[r], tol))
                && theta.iter().all(|v| v.abs() <= bound + tol)
        }
    };
    Ok(member)
}

/// Orthogonal projection onto `L = span{(1,…,1), (1,…,n)}`.
pub fn project_affine(theta: &[f64]) -> Vec<f64> {
    let (a, b, centre) = affine_coefficients(theta);
    (0..theta.len()).map(|i| a + b * (i as f64 - centre)).collect()
}

/// Least-squares `(mean, slope, centre)` with the fit `mean + slope·(i − centre)`.
pub(crate) fn affine_coefficients(theta: &[f64]) -> (f64, f64, f64) {
    let n = theta.len();
    let centre = (n as f64 - 1.0) / 2.0;
    let mean = theta.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in theta.iter().enumerate() {
        let u = i as f64 - centre;
        sxy += u * v;
        sxx += u * u;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (mean, slope, centre)
}

/// `θ − P_L θ`.
pub fn ortho_affine_part(theta: &[f64]) -> Vec<f64> {
    let affine = project_affine(theta);
    theta.iter().zip(&affine).map(|(t, a)| t - a).collect()
}

/// The range `max θ_i − min θ_i`.
pub fn range_v(theta: &[f64]) -> f64 {
    let (lo, hi) = theta
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if theta.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Smallest 1-based index attaining the maximum of a concave sequence.
pub fn mode_index(theta: &[f64]) -> Result<usize> {
    if !is_member(theta, &ConeSpec::FullConcave, MEMBERSHIP_TOL)? {
        return Err(Error::domain("mode_index requires a concave sequence"));
    }
    Ok(argmax_first(theta) + 1)
}

pub(crate) fn argmax_first(theta: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in theta.iter().enumerate() {
        if v > theta[best] {
            best = i;
        }
    }
    best
}

pub fn is_nondecreasing(theta: &[f64], tol: f64) -> bool {
    theta.windows(2).all(|w| w[1] >= w[0] - tol)
}

pub fn is_nonincreasing(theta: &[f64], tol: f64) -> bool {
    theta.windows(2).all(|w| w[1] <= w[0] + tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_differences_examples() {
        assert_eq!(second_differences(&[0.0, 1.0, 0.0]).unwrap(), vec![-2.0]);
        assert_eq!(second_differences(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.0, 0.0]);
        let d = second_differences(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(d, vec![1.0]);
        assert!(!is_member(&[0.0, 0.0, 1.0], &ConeSpec::FullConcave, 0.0).unwrap());
        assert!(matches!(second_differences(&[1.0, 2.0]), Err(Error::Size(_))));
    }

    #[test]
    fn membership_examples() {
        let tent = [0.0, 1.0, 0.0];
        assert!(is_member(&tent, &ConeSpec::FullConcave, 0.0).unwrap());
        assert!(!is_member(&tent, &ConeSpec::ModeConstrained { k: 1 }, 0.0).unwrap());
        assert!(is_member(&tent, &ConeSpec::ModeConstrained { k: 2 }, 0.0).unwrap());
        assert!(is_member(&[5.0, 0.0, 5.0], &ConeSpec::ThreeBlock { m1: 1, m2: 3 }, 0.0).unwrap());
        assert!(!is_member(&[5.0, 0.0, 5.0], &ConeSpec::FullConcave, 0.0).unwrap());
    }

    #[test]
    fn membership_rejects_bad_specs() {
        let x = [0.0, 1.0, 0.0];
        assert!(matches!(
            is_member(&x, &ConeSpec::ThreeBlock { m1: 2, m2: 2 }, 0.0),
            Err(Error::Spec(_))
        ));
        assert!(matches!(
            is_member(&x, &ConeSpec::ThreeBlock { m1: 0, m2: 5 }, 0.0),
            Err(Error::Spec(_))
        ));
        assert!(matches!(
            is_member(&x, &ConeSpec::ModeConstrained { k: 0 }, 0.0),
            Err(Error::Spec(_))
        ));
        assert!(matches!(
            is_member(&x, &ConeSpec::BoundedConcave { bound: -1.0 }, 0.0),
            Err(Error::Spec(_))
        ));
        assert!(matches!(
            is_member(&[1.0, 2.0], &ConeSpec::FullConcave, 0.0),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn three_block_sentinels() {
        // m1 = 0 empties the first block, m2 = n + 1 the last.
        let x = [0.0, 0.0, 1.0, 0.0];
        assert!(is_member(&x, &ConeSpec::ThreeBlock { m1: 0, m2: 5 }, 0.0).is_ok());
        assert!(!is_member(&x, &ConeSpec::ThreeBlock { m1: 0, m2: 5 }, 0.0).unwrap());
        assert!(is_member(&x, &ConeSpec::ThreeBlock { m1: 2, m2: 5 }, 0.0).unwrap());
    }

    #[test]
    fn affine_projection_examples() {
        let p = project_affine(&[1.0, 2.0, 3.0]);
        for (a, b) in p.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        let p = project_affine(&[0.0, 0.0, 3.0]);
        for (a, b) in p.iter().zip([-0.5, 1.0, 2.5]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(project_affine(&[4.0]), vec![4.0]);
    }

    #[test]
    fn range_and_mode() {
        assert_eq!(range_v(&[0.0, 1.0, 0.0]), 1.0);
        assert_eq!(range_v(&[2.5; 7]), 0.0);
        assert_eq!(mode_index(&[0.0, 1.0, 0.0]).unwrap(), 2);
        assert_eq!(mode_index(&[3.0, 2.0, 1.0]).unwrap(), 1);
        assert_eq!(mode_index(&[1.0, 1.0, 0.0]).unwrap(), 1);
        assert!(matches!(mode_index(&[0.0, 0.0, 1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn sequence_rejects_non_finite() {
        assert!(Sequence::new(vec![1.0, f64::NAN]).is_err());
        assert!(Sequence::new(vec![]).is_err());
        let s = Sequence::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(s.len(), 2);
    }
}
