//! Test-only oracles, independent of the solvers they check.
#![allow(dead_code, clippy::needless_range_loop, clippy::unnecessary_map_or)]

use concreg_core::projection::Row;

/// Dense Gaussian elimination with partial pivoting; `None` if singular.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

fn dense_row(row: &Row, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for q in 0..row.len {
        v[row.start + q] = row.coef[q];
    }
    v
}

/// Projection onto `{θ : Aθ ≤ b}` by enumerating every candidate active
/// subset, solving its equality-constrained least squares, and keeping the
/// one that satisfies primal and dual feasibility.
pub fn brute_force_projection(y: &[f64], rows: &[Row]) -> Vec<f64> {
    let n = y.len();
    let m = rows.len();
    let dense: Vec<Vec<f64>> = rows.iter().map(|r| dense_row(r, n)).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u64..(1u64 << m) {
        let subset: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let k = subset.len();
        let gram: Vec<Vec<f64>> = subset
            .iter()
            .map(|&i| subset.iter().map(|&j| dot(&dense[i], &dense[j])).collect())
            .collect();
        let rhs: Vec<f64> = subset.iter().map(|&i| dot(&dense[i], y) - rows[i].rhs).collect();
        let lambda = if k == 0 {
            Vec::new()
        } else {
            match dense_solve(gram, rhs) {
                Some(l) => l,
                None => continue,
            }
        };
        let mut theta = y.to_vec();
        for (l, &i) in lambda.iter().zip(&subset) {
            for c in 0..n {
                theta[c] -= l * dense[i][c];
            }
        }
        let feasible = rows
            .iter()
            .zip(&dense)
            .all(|(r, d)| dot(d, &theta) <= r.rhs + 1e-9);
        let dual_ok = lambda.iter().all(|&l| l >= -1e-9);
        if feasible && dual_ok {
            let obj: f64 = y.iter().zip(&theta).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.as_ref().map_or(true, |(o, _)| obj < *o) {
                best = Some((obj, theta));
            }
        }
    }
    best.expect("some active subset is optimal").1
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Absolute KKT residual of a claimed projection onto `K_n`, recomputed from
/// scratch: multipliers by dense least squares on the tight rows.
pub fn concave_kkt_absolute(y: &[f64], theta: &[f64], active: &[usize]) -> f64 {
    let n = y.len();
    let r: Vec<f64> = y.iter().zip(theta).map(|(a, b)| a - b).collect();
    let rows: Vec<Vec<f64>> = active
        .iter()
        .map(|&j| {
            let mut v = vec![0.0; n];
            v[j] = 1.0;
            v[j + 1] = -2.0;
            v[j + 2] = 1.0;
            v
        })
        .collect();
    let mut worst = 0.0f64;
    for w in theta.windows(3) {
        worst = worst.max(w[0] - 2.0 * w[1] + w[2]);
    }
    let lambda = if rows.is_empty() {
        Vec::new()
    } else {
        let gram = rows
            .iter()
            .map(|a| rows.iter().map(|b| dot(a, b)).collect())
            .collect();
        let rhs = rows.iter().map(|a| dot(a, &r)).collect();
        dense_solve(gram, rhs).expect("tight rows independent")
    };
    let mut stat = r.clone();
    for (l, row) in lambda.iter().zip(&rows) {
        worst = worst.max(-l);
        for c in 0..n {
            stat[c] -= l * row[c];
        }
    }
    stat.iter().fold(worst, |w, s| w.max(s.abs()))
}
