//! Cholesky factorization of symmetric positive-definite banded matrices.
//!
//! Only the lower band is stored: `band[i * (p + 1) + d]` holds `A[i][i - d]`
//! for `d = 0..=p`, where `p` is the half-bandwidth. Factor and solve are both
//! `O(n p²)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    p: usize,
    band: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, half_bandwidth: usize) -> Self {
        BandedSpd {
            n,
            p: half_bandwidth,
            band: vec![0.0; n * (half_bandwidth + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.p
    }

    /// Adds `v` to `A[i][j]` (and its mirror). Requires `|i − j| ≤ p`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        assert!(d <= self.p, "entry ({i}, {j}) outside the band");
        self.band[hi * (self.p + 1) + d] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d > self.p {
            0.0
        } else {
            self.band[hi * (self.p + 1) + d]
        }
    }

    /// In-place `A = L Lᵀ`. Fails if a pivot is not strictly positive.
    pub fn factor(mut self) -> Result<BandedCholesky> {
        let (n, p) = (self.n, self.p);
        let w = p + 1;
        for i in 0..n {
            let j0 = i.saturating_sub(p);
            for j in j0..=i {
                // L[i][j] = (A[i][j] - Σ_k L[i][k] L[j][k]) / L[j][j]
                let mut s = self.band[i * w + (i - j)];
                let k0 = j0.max(j.saturating_sub(p));
                for k in k0..j {
                    s -= self.band[i * w + (i - k)] * self.band[j * w + (j - k)];
                }
                if j == i {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::Solver {
                            message: format!("banded matrix not positive definite at pivot {i}"),
                            best: Vec::new(),
                            residual: f64::INFINITY,
                            iterations: 0,
                        });
                    }
                    self.band[i * w] = s.sqrt();
                } else {
                    self.band[i * w + (i - j)] = s / self.band[j * w];
                }
            }
        }
        Ok(BandedCholesky { inner: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    inner: BandedSpd,
}

impl BandedCholesky {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let BandedSpd { n, p, ref band } = self.inner;
        let w = p + 1;
        assert_eq!(x.len(), n);
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(p)..i {
                s -= band[i * w + (i - k)] * x[k];
            }
            x[i] = s / band[i * w];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..(i + w).min(n) {
                s -= band[k * w + (k - i)] * x[k];
            }
            x[i] = s / band[i * w];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(a: &BandedSpd, x: &[f64]) -> Vec<f64> {
        (0..a.dim())
            .map(|i| (0..a.dim()).map(|j| a.get(i, j) * x[j]).sum())
            .collect()
    }

    #[test]
    fn solves_pentadiagonal_system() {
        // Second-difference normal matrix: diag 6, off -4, off2 1.
        let n = 9;
        let mut a = BandedSpd::zeros(n, 2);
        for i in 0..n {
            a.add(i, i, 6.0);
            if i + 1 < n {
                a.add(i + 1, i, -4.0);
            }
            if i + 2 < n {
                a.add(i + 2, i, 1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = dense_mul(&a, &x);
        let chol = a.clone().factor().unwrap();
        let got = chol.solve(&b);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-10, "{g} vs {e}");
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = BandedSpd::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(1, 0, 2.0);
        assert!(a.factor().is_err());
    }
}
