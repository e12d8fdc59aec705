//! Exact Euclidean projection onto every [`ConeSpec`], with KKT certificates.

mod ball;
mod knots;
mod rows;

pub use ball::{max_linear_over_ball, max_linear_over_ball_from, BallMax};
pub use rows::{constraint_rows, Row};

use serde::{Deserialize, Serialize};

use crate::cone::{self, three_blocks, ConeSpec};
use crate::error::{Error, Result};

/// Default absolute tolerance on KKT residuals.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Active-set pivots allowed per coordinate before a solve is declared failed.
pub const PIVOTS_PER_COORDINATE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub point: Vec<f64>,
    /// Indices of the constraints in the final working set. For cones solved
    /// by the knot solver these are second-difference windows (0-based start
    /// index); for the row solver they index [`constraint_rows`].
    pub active: Vec<usize>,
    /// One nonnegative multiplier per entry of `active`.
    pub duals: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl ProjectionResult {
    fn identity(y: &[f64]) -> Self {
        ProjectionResult {
            point: y.to_vec(),
            active: Vec::new(),
            duals: Vec::new(),
            kkt_residual: 0.0,
            iterations: 0,
        }
    }
}

fn check_input(y: &[f64], cone: &ConeSpec, tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::domain(format!("input entry {} is not finite", i + 1)));
    }
    cone.validate(y.len())
}

/// The unique minimizer of `‖y − θ‖²` over `cone`.
pub fn project(y: &[f64], cone: &ConeSpec, tol: f64) -> Result<ProjectionResult> {
    check_input(y, cone, tol)?;
    let n = y.len();
    let cap = PIVOTS_PER_COORDINATE * n;
    match *cone {
        ConeSpec::FullConcave => knots::project_concave(y, tol, cap),
        ConeSpec::ConcaveOrthoAffine => project_ortho_affine(y, tol),
        ConeSpec::ModeConstrained { .. } | ConeSpec::BoundedConcave { .. } => {
            let rows = constraint_rows(n, cone)?;
            rows::project_rows(y, &rows, tol, cap.max(rows.len()))
        }
        ConeSpec::ThreeBlock { m1, m2 } => blockwise(y, m1, m2, |block| {
            if block.len() >= 3 {
                knots::project_concave(block, tol, PIVOTS_PER_COORDINATE * block.len())
            } else {
                Ok(ProjectionResult::identity(block))
            }
        }),
        ConeSpec::BoundedThreeBlock { m1, m2, bound } => blockwise(y, m1, m2, |block| {
            if block.len() >= 3 {
                project(block, &ConeSpec::BoundedConcave { bound }, tol)
            } else {
                let mut out = ProjectionResult::identity(block);
                for v in &mut out.point {
                    *v = v.clamp(-bound, bound);
                }
                Ok(out)
            }
        }),
    }
}

/// The same projection through the generic row solver, for `FullConcave`,
/// `ModeConstrained` and `BoundedConcave`. Independent of the knot solver and
/// used to cross-check it.
pub fn project_via_rows(y: &[f64], cone: &ConeSpec, tol: f64) -> Result<ProjectionResult> {
    check_input(y, cone, tol)?;
    let rows = constraint_rows(y.len(), cone)?;
    rows::project_rows(y, &rows, tol, (PIVOTS_PER_COORDINATE * y.len()).max(rows.len()))
}

fn blockwise<F>(y: &[f64], m1: usize, m2: usize, mut solve: F) -> Result<ProjectionResult>
where
    F: FnMut(&[f64]) -> Result<ProjectionResult>,
{
    let mut out = ProjectionResult::identity(&[]);
    for range in three_blocks(y.len(), m1, m2) {
        let offset = range.start;
        if range.is_empty() {
            continue;
        }
        let part = solve(&y[range])?;
        out.point.extend_from_slice(&part.point);
        out.active.extend(part.active.iter().map(|j| j + offset));
        out.duals.extend_from_slice(&part.duals);
        out.kkt_residual = out.kkt_residual.max(part.kkt_residual);
        out.iterations += part.iterations;
    }
    Ok(out)
}

/// `Π_{K ∩ L⊥}(y)`, computed as `Π_K(y) − P_L y`.
///
/// `K = L ⊕ (K ∩ L⊥)` with `L` the lineality space of `K`, so the two
/// projections differ exactly by the affine part of `y`. The reported KKT
/// residual also covers the orthogonality of the result to `L`.
pub fn project_ortho_affine(y: &[f64], tol: f64) -> Result<ProjectionResult> {
    check_input(y, &ConeSpec::ConcaveOrthoAffine, tol)?;
    let mut full = knots::project_concave(y, tol, PIVOTS_PER_COORDINATE * y.len())?;
    let affine = cone::project_affine(y);
    for (p, a) in full.point.iter_mut().zip(&affine) {
        *p -= a;
    }
    let leak = cone::project_affine(&full.point)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    full.kkt_residual = full.kkt_residual.max(leak);
    Ok(full)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], eps: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= eps, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn concave_input_is_fixed() {
        let out = project(&[0.0, 1.0, 0.0], &ConeSpec::FullConcave, DEFAULT_TOL).unwrap();
        close(&out.point, &[0.0, 1.0, 0.0], 1e-15);
    }

    #[test]
    fn single_halfspace() {
        let out = project(&[0.0, 0.0, 1.0], &ConeSpec::FullConcave, DEFAULT_TOL).unwrap();
        close(&out.point, &[-1.0 / 6.0, 1.0 / 3.0, 5.0 / 6.0], 1e-14);
        let rows = project_via_rows(&[0.0, 0.0, 1.0], &ConeSpec::FullConcave, DEFAULT_TOL).unwrap();
        close(&rows.point, &out.point, 1e-14);
    }

    #[test]
    fn ortho_affine_examples() {
        let out = project_ortho_affine(&[1.0, 3.0, 5.0, 7.0], DEFAULT_TOL).unwrap();
        close(&out.point, &[0.0; 4], 1e-13);
        let out = project_ortho_affine(&[0.0, 1.0, 0.0], DEFAULT_TOL).unwrap();
        close(&out.point, &[-1.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0], 1e-14);
    }

    #[test]
    fn mode_constrained_pulls_peak() {
        // (0, 1, 0) is concave with its mode at 2; forcing the mode to 1
        // flattens the first two entries.
        let out = project(&[0.0, 1.0, 0.0], &ConeSpec::ModeConstrained { k: 1 }, DEFAULT_TOL).unwrap();
        assert!(cone::is_member(&out.point, &ConeSpec::ModeConstrained { k: 1 }, 1e-10).unwrap());
        close(&out.point, &[0.5, 0.5, 0.0], 1e-12);
    }

    #[test]
    fn bounded_clamps_large_values() {
        let y = [0.0, 5.0, 0.0];
        let out = project(&y, &ConeSpec::BoundedConcave { bound: 1.0 }, DEFAULT_TOL).unwrap();
        close(&out.point, &[0.0, 1.0, 0.0], 1e-12);
    }

    #[test]
    fn three_block_projects_blocks_independently() {
        let y = [5.0, 0.0, 0.0, 1.0, 0.0, 5.0];
        let cone = ConeSpec::ThreeBlock { m1: 1, m2: 6 };
        let out = project(&y, &cone, DEFAULT_TOL).unwrap();
        assert!(cone::is_member(&out.point, &cone, 1e-10).unwrap());
        assert_eq!(out.point[0], 5.0);
        assert_eq!(out.point[5], 5.0);
        let mid = project(&y[1..5], &ConeSpec::FullConcave, DEFAULT_TOL).unwrap();
        close(&out.point[1..5], &mid.point, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            project(&[1.0, f64::NAN, 0.0], &ConeSpec::FullConcave, DEFAULT_TOL),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            project(&[1.0, 2.0], &ConeSpec::FullConcave, DEFAULT_TOL),
            Err(Error::Size(_))
        ));
        assert!(matches!(
            project(&[1.0, 2.0, 3.0], &ConeSpec::FullConcave, 0.0),
            Err(Error::Domain(_))
        ));
    }
}
