//! Primal active-set projection onto the concave cone `K_n`.
//!
//! A working set of tight second-difference constraints makes the iterate
//! piecewise linear, with kinks allowed only at the "free" interior points.
//! The equality-constrained subproblem is therefore an ordinary least-squares
//! fit in the hat-function basis on the free knots, whose Gram matrix is
//! tridiagonal. Multipliers come from the residual by a double cumulative sum,
//! since `r = Aᵀλ` is a second-difference relation between `r` and `λ`.

use crate::banded::BandedSpd;
use crate::cone::second_diffs_unchecked;
use crate::error::{Error, Result};

use super::ProjectionResult;

/// Projects `y` (n ≥ 3, validated by the caller) onto `K_n`.
pub(crate) fn project_concave(y: &[f64], tol: f64, max_pivots: usize) -> Result<ProjectionResult> {
    let n = y.len();
    let m = n - 2;
    // free[j]: constraint j (window j, j+1, j+2) is out of the working set.
    let mut free = vec![false; m];
    let mut theta = fit(y, &free)?;
    let mut pivots = 0usize;
    // Constraints whose release produced no movement, until progress is made.
    let mut stuck = vec![false; m];

    loop {
        let residual: Vec<f64> = y.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let lambda = multipliers(&residual);
        let release = (0..m)
            .filter(|&j| !free[j] && !stuck[j])
            .min_by(|&a, &b| lambda[a].total_cmp(&lambda[b]))
            .filter(|&j| lambda[j] < -tol);
        let Some(j) = release else { break };
        if pivots >= max_pivots {
            return Err(exhausted(y, theta, tol, pivots));
        }
        free[j] = true;
        pivots += 1;

        // Move towards the fit on the enlarged knot set, stopping at the first
        // free kink that would turn convex.
        loop {
            let target = fit(y, &free)?;
            let d_cur = second_diffs_unchecked(&theta);
            let d_new = second_diffs_unchecked(&target);
            let mut alpha = 1.0;
            let mut blocking = None;
            for k in (0..m).filter(|&k| free[k]) {
                if d_new[k] > 0.0 {
                    let cur = d_cur[k].min(0.0);
                    let ratio = cur / (cur - d_new[k]);
                    if ratio < alpha {
                        alpha = ratio;
                        blocking = Some(k);
                    }
                }
            }
            match blocking {
                None => {
                    let moved = theta
                        .iter()
                        .zip(&target)
                        .any(|(a, b)| (a - b).abs() > 1e-14 * (1.0 + a.abs()));
                    theta = target;
                    if moved {
                        stuck.iter_mut().for_each(|s| *s = false);
                    }
                    break;
                }
                Some(k) => {
                    if pivots >= max_pivots {
                        return Err(exhausted(y, theta, tol, pivots));
                    }
                    pivots += 1;
                    for (t, s) in theta.iter_mut().zip(&target) {
                        *t += alpha * (s - *t);
                    }
                    free[k] = false;
                    if k == j && alpha <= 1e-12 {
                        // The released constraint cannot move: its multiplier is
                        // zero up to rounding. Do not release it again.
                        stuck[j] = true;
                    }
                }
            }
        }
    }

    let residual: Vec<f64> = y.iter().zip(&theta).map(|(a, b)| a - b).collect();
    let lambda = multipliers(&residual);
    let kkt = kkt_residual(&theta, &residual, &lambda);
    let active: Vec<usize> = (0..m).filter(|&j| !free[j]).collect();
    let duals = active.iter().map(|&j| lambda[j].max(0.0)).collect();
    let result = ProjectionResult {
        point: theta,
        active,
        duals,
        kkt_residual: kkt,
        iterations: pivots,
    };
    if kkt > tol {
        return Err(Error::Solver {
            message: "active-set projection onto the concave cone did not certify".into(),
            best: result.point,
            residual: kkt,
            iterations: pivots,
        });
    }
    Ok(result)
}

fn exhausted(y: &[f64], theta: Vec<f64>, _tol: f64, pivots: usize) -> Error {
    let residual: Vec<f64> = y.iter().zip(&theta).map(|(a, b)| a - b).collect();
    let lambda = multipliers(&residual);
    let kkt = kkt_residual(&theta, &residual, &lambda);
    Error::Solver {
        message: format!("iteration cap of {pivots} active-set pivots reached"),
        best: theta,
        residual: kkt,
        iterations: pivots,
    }
}

/// Least-squares fit of `y` by continuous piecewise-linear sequences with
/// kinks only at `j + 1` for free constraints `j`.
fn fit(y: &[f64], free: &[bool]) -> Result<Vec<f64>> {
    let n = y.len();
    let mut knots = Vec::with_capacity(free.iter().filter(|f| **f).count() + 2);
    knots.push(0);
    knots.extend(free.iter().enumerate().filter(|(_, f)| **f).map(|(j, _)| j + 1));
    knots.push(n - 1);

    let k = knots.len();
    let mut gram = BandedSpd::zeros(k, 1);
    let mut rhs = vec![0.0; k];
    let mut weights = Vec::with_capacity(n);
    let mut seg = 0;
    for (i, &yi) in y.iter().enumerate() {
        while seg + 2 < k && i >= knots[seg + 1] {
            seg += 1;
        }
        let (a, b) = (knots[seg], knots[seg + 1]);
        let w = (i - a) as f64 / (b - a) as f64;
        let (p0, p1) = (1.0 - w, w);
        gram.add(seg, seg, p0 * p0);
        gram.add(seg + 1, seg + 1, p1 * p1);
        gram.add(seg + 1, seg, p0 * p1);
        rhs[seg] += p0 * yi;
        rhs[seg + 1] += p1 * yi;
        weights.push((seg, w));
    }
    let chol = gram.factor()?;
    let mut beta = chol.solve(&rhs);
    let eval = |beta: &[f64]| -> Vec<f64> {
        weights
            .iter()
            .map(|&(s, w)| (1.0 - w) * beta[s] + w * beta[s + 1])
            .collect()
    };

    // One step of iterative refinement keeps the residual orthogonal to the
    // basis to near machine precision, which the multipliers depend on.
    let theta = eval(&beta);
    let mut correction = vec![0.0; k];
    for ((&(s, w), yi), ti) in weights.iter().zip(y).zip(&theta) {
        let r = yi - ti;
        correction[s] += (1.0 - w) * r;
        correction[s + 1] += w * r;
    }
    chol.solve_in_place(&mut correction);
    for (b, c) in beta.iter_mut().zip(&correction) {
        *b += c;
    }
    Ok(eval(&beta))
}

/// `λ_j = Σ_{m ≤ j} Σ_{i ≤ m} r_i` for `j = 0..n`; entries `n − 2` and `n − 1`
/// vanish exactly when `r ⟂ L`.
fn double_cumsum(residual: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(residual.len());
    let (mut s1, mut c1) = (0.0f64, 0.0f64);
    let (mut s2, mut c2) = (0.0f64, 0.0f64);
    for &r in residual {
        neumaier_add(&mut s1, &mut c1, r);
        neumaier_add(&mut s2, &mut c2, s1 + c1);
        out.push(s2 + c2);
    }
    out
}

fn neumaier_add(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

pub(crate) fn multipliers(residual: &[f64]) -> Vec<f64> {
    let mut lambda = double_cumsum(residual);
    lambda.truncate(residual.len() - 2);
    lambda
}

/// Max of stationarity `‖r − Aᵀλ‖∞` and the complementarity natural residual
/// `|min(λ_j, −d_j)|` over all constraints.
pub(crate) fn kkt_residual(theta: &[f64], residual: &[f64], lambda: &[f64]) -> f64 {
    let n = theta.len();
    let d = second_diffs_unchecked(theta);
    let mut worst = 0.0f64;
    for (l, dj) in lambda.iter().zip(&d) {
        worst = worst.max(l.min(-dj).abs());
    }
    for (i, &ri) in residual.iter().enumerate() {
        let mut at = 0.0;
        for (offset, c) in [(0usize, 1.0), (1, -2.0), (2, 1.0)] {
            if i >= offset && i - offset < n - 2 {
                at += c * lambda[i - offset];
            }
        }
        worst = worst.max((ri - at).abs());
    }
    worst
}
