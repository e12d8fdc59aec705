//! General primal active-set projection onto `{θ : a_r·θ ≤ b_r}` where every
//! row touches at most three consecutive coordinates.
//!
//! The equality subproblem for a working set `W` is solved in the dual:
//! `(A_W A_Wᵀ) λ = A_W y − b_W`, `θ = y − A_Wᵀ λ`. With rows sorted by their
//! first coordinate `A_W A_Wᵀ` is banded, so each solve is a banded Cholesky.
//! Conditioning grows like `n⁴` for long runs of tight second differences, so
//! this path is meant for moderate `n`; the knot solver handles `K_n` itself.

use crate::banded::BandedSpd;
use crate::cone::ConeSpec;
use crate::error::{Error, Result};

use super::ProjectionResult;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub start: usize,
    pub coef: [f64; 3],
    pub len: usize,
    pub rhs: f64,
}

impl Row {
    fn second_difference(j: usize) -> Self {
        Row {
            start: j,
            coef: [1.0, -2.0, 1.0],
            len: 3,
            rhs: 0.0,
        }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        (0..self.len).map(|q| self.coef[q] * x[self.start + q]).sum()
    }

    fn end(&self) -> usize {
        self.start + self.len - 1
    }

    fn overlap(&self, other: &Row) -> f64 {
        let lo = self.start.max(other.start);
        let hi = self.end().min(other.end());
        if lo > hi {
            return 0.0;
        }
        (lo..=hi)
            .map(|i| self.coef[i - self.start] * other.coef[i - other.start])
            .sum()
    }
}

/// The inequality rows describing a cone, sorted by first coordinate.
/// Concavity rows come first in each cone's natural numbering, then any
/// extra rows (mode slopes, bounds).
pub fn constraint_rows(n: usize, cone: &ConeSpec) -> Result<Vec<Row>> {
    cone.validate(n)?;
    let mut rows: Vec<Row> = Vec::new();
    match *cone {
        ConeSpec::FullConcave => rows.extend((0..n - 2).map(Row::second_difference)),
        ConeSpec::ModeConstrained { k } => {
            rows.extend((0..n - 2).map(Row::second_difference));
            let kk = k - 1;
            if kk >= 1 {
                rows.push(Row {
                    start: kk - 1,
                    coef: [1.0, -1.0, 0.0],
                    len: 2,
                    rhs: 0.0,
                });
            }
            if kk + 1 < n {
                rows.push(Row {
                    start: kk,
                    coef: [-1.0, 1.0, 0.0],
                    len: 2,
                    rhs: 0.0,
                });
            }
        }
        ConeSpec::BoundedConcave { bound } => {
            rows.extend((0..n - 2).map(Row::second_difference));
            rows.extend((0..n).map(|i| Row {
                start: i,
                coef: [1.0, 0.0, 0.0],
                len: 1,
                rhs: bound,
            }));
            rows.push(Row {
                start: 0,
                coef: [-1.0, 0.0, 0.0],
                len: 1,
                rhs: bound,
            });
            rows.push(Row {
                start: n - 1,
                coef: [-1.0, 0.0, 0.0],
                len: 1,
                rhs: bound,
            });
        }
        other => {
            return Err(Error::spec(format!(
                "the row solver handles concave, mode-constrained and bounded cones, not {other:?}"
            )))
        }
    }
    rows.sort_by_key(|r| r.start);
    Ok(rows)
}

/// Solves `min ‖y − θ‖²` over the rows, starting from the feasible point `0`
/// (every supported cone contains it).
pub(crate) fn project_rows(y: &[f64], rows: &[Row], tol: f64, max_pivots: usize) -> Result<ProjectionResult> {
    let n = y.len();
    let mut theta = vec![0.0; n];
    if let Some(r) = rows.iter().find(|r| r.rhs < 0.0) {
        return Err(Error::spec(format!(
            "zero is infeasible for row starting at {}",
            r.start
        )));
    }
    // Start with the second-difference rows, which are linearly independent.
    let mut working: Vec<bool> = rows.iter().map(|r| r.len == 3 && r.rhs == 0.0).collect();
    let mut pivots = 0usize;
    let mut last_lambda;

    loop {
        let (target, lambda) = equality_solve(y, rows, &working)?;
        let step: Vec<f64> = target.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let mut alpha = 1.0;
        let mut blocking = None;
        // Rows dependent on the working set see `a·p` at rounding level only.
        let step_norm = crate::vector::norm(&step);
        let threshold = 1e-11 * step_norm;
        let negligible = step_norm <= 1e-13 * (1.0 + crate::vector::norm(&theta));
        for (idx, row) in rows.iter().enumerate() {
            if working[idx] || negligible {
                continue;
            }
            let ap = row.dot(&step);
            if ap > threshold {
                let slack = (row.rhs - row.dot(&theta)).max(0.0);
                let ratio = slack / ap;
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(idx);
                }
            }
        }
        if let Some(idx) = blocking {
            for (t, s) in theta.iter_mut().zip(&step) {
                *t += alpha * s;
            }
            working[idx] = true;
        } else {
            theta = target;
            last_lambda = lambda;
            let release = (0..rows.len())
                .filter(|&i| working[i])
                .min_by(|&a, &b| last_lambda[a].total_cmp(&last_lambda[b]))
                .filter(|&i| last_lambda[i] < -tol);
            match release {
                None => break,
                Some(i) => working[i] = false,
            }
        }
        pivots += 1;
        if pivots > max_pivots {
            let kkt = kkt_rows(y, &theta, rows, &vec![0.0; rows.len()]);
            return Err(Error::Solver {
                message: format!("iteration cap of {max_pivots} active-set pivots reached"),
                best: theta,
                residual: kkt,
                iterations: pivots,
            });
        }
    }

    let kkt = kkt_rows(y, &theta, rows, &last_lambda);
    let active: Vec<usize> = (0..rows.len()).filter(|&i| working[i]).collect();
    let duals = active.iter().map(|&i| last_lambda[i].max(0.0)).collect();
    if kkt > tol {
        return Err(Error::Solver {
            message: "row active-set projection did not certify".into(),
            best: theta,
            residual: kkt,
            iterations: pivots,
        });
    }
    Ok(ProjectionResult {
        point: theta,
        active,
        duals,
        kkt_residual: kkt,
        iterations: pivots,
    })
}

/// Returns the equality-constrained minimizer and full-length multipliers
/// (zero off the working set).
fn equality_solve(y: &[f64], rows: &[Row], working: &[bool]) -> Result<(Vec<f64>, Vec<f64>)> {
    let idx: Vec<usize> = (0..rows.len()).filter(|&i| working[i]).collect();
    let m = idx.len();
    let mut lambda_full = vec![0.0; rows.len()];
    if m == 0 {
        return Ok((y.to_vec(), lambda_full));
    }
    let mut band = 0;
    for a in 0..m {
        let end = rows[idx[a]].end();
        let mut b = a + 1;
        while b < m && rows[idx[b]].start <= end {
            b += 1;
        }
        band = band.max(b - 1 - a);
    }
    let mut gram = BandedSpd::zeros(m, band);
    let mut rhs = vec![0.0; m];
    for a in 0..m {
        let ra = &rows[idx[a]];
        rhs[a] = ra.dot(y) - ra.rhs;
        for b in a..m {
            let rb = &rows[idx[b]];
            if rb.start > ra.end() {
                break;
            }
            let v = ra.overlap(rb);
            if v != 0.0 || a == b {
                gram.add(b, a, v);
            }
        }
    }
    let chol = gram.factor().map_err(|_| Error::Solver {
        message: "working set became linearly dependent".into(),
        best: Vec::new(),
        residual: f64::INFINITY,
        iterations: 0,
    })?;
    let lambda = chol.solve(&rhs);
    let mut theta = y.to_vec();
    for (a, &l) in lambda.iter().enumerate() {
        let r = &rows[idx[a]];
        for q in 0..r.len {
            theta[r.start + q] -= l * r.coef[q];
        }
    }
    for (a, &i) in idx.iter().enumerate() {
        lambda_full[i] = lambda[a];
    }
    Ok((theta, lambda_full))
}

pub(crate) fn kkt_rows(y: &[f64], theta: &[f64], rows: &[Row], lambda: &[f64]) -> f64 {
    let mut stationarity: Vec<f64> = y.iter().zip(theta).map(|(a, b)| a - b).collect();
    let mut worst = 0.0f64;
    for (row, &l) in rows.iter().zip(lambda) {
        for q in 0..row.len {
            stationarity[row.start + q] -= l * row.coef[q];
        }
        let slack = row.rhs - row.dot(theta);
        worst = worst.max(l.min(slack).abs());
    }
    stationarity.iter().fold(worst, |w, s| w.max(s.abs()))
}
