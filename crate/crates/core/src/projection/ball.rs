//! `sup ⟨z, θ − c⟩` over `{θ ∈ cone : ‖θ − c‖ ≤ t}`.
//!
//! For a multiplier `λ = 1/μ` the Lagrangian maximizer is the projection
//! `θ(μ) = Π(c + μ z)`, and `g(μ) = ‖θ(μ) − c‖` is continuous and
//! non-decreasing in `μ`. We search `μ` with `g(μ) = t` by a safeguarded
//! Illinois iteration. The returned value is attained by a feasible point and
//! the certificate is the Lagrangian duality gap at the final multiplier.

use crate::cone::{is_member, ConeSpec};
use crate::error::{Error, Result};
use crate::vector::{dist, dot, norm};

use super::project;

/// Relative accuracy to which the ball constraint is matched.
const NORM_MATCH: f64 = 1e-11;
/// Largest `μ / μ₀` tried before declaring the ball constraint inactive.
const MU_RANGE: f64 = 1e12;
const MAX_ROOT_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct BallMax {
    pub value: f64,
    pub argmax: Vec<f64>,
    /// Upper bound on `sup − value` (Lagrangian duality gap).
    pub certificate: f64,
}

pub fn max_linear_over_ball(z: &[f64], center: &[f64], t: f64, cone: &ConeSpec, tol: f64) -> Result<BallMax> {
    check_args(z, center, t)?;
    let member_tol = 1e-7 * (1.0 + crate::vector::max_abs(center));
    if !is_member(center, cone, member_tol)? {
        return Err(Error::domain("the ball center must lie in the cone"));
    }
    let out = solve(z, center, center.to_vec(), t, cone, tol)?
        .expect("a ball around a cone member always meets the cone");
    if out.value <= 0.0 {
        return Ok(BallMax {
            value: 0.0,
            argmax: center.to_vec(),
            certificate: out.certificate,
        });
    }
    Ok(out)
}

/// As [`max_linear_over_ball`] but the center may lie outside the cone.
/// Returns `None` when the ball misses the cone (the supremum is `−∞`).
pub fn max_linear_over_ball_from(
    z: &[f64],
    center: &[f64],
    t: f64,
    cone: &ConeSpec,
    tol: f64,
) -> Result<Option<BallMax>> {
    check_args(z, center, t)?;
    let anchor = project(center, cone, tol)?.point;
    solve(z, center, anchor, t, cone, tol)
}

fn check_args(z: &[f64], center: &[f64], t: f64) -> Result<()> {
    if z.len() != center.len() {
        return Err(Error::size(format!(
            "noise has length {} but center has length {}",
            z.len(),
            center.len()
        )));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!(
            "radius must be finite and nonnegative, got {t}"
        )));
    }
    Ok(())
}

/// `anchor` is the projection of `center` onto the cone; `g(0⁺) = ‖anchor − c‖`.
fn solve(
    z: &[f64],
    center: &[f64],
    anchor: Vec<f64>,
    t: f64,
    cone: &ConeSpec,
    tol: f64,
) -> Result<Option<BallMax>> {
    let d0 = dist(&anchor, center);
    let slack = 1e-12 * (1.0 + norm(center));
    if t + slack < d0 {
        return Ok(None);
    }
    let z_norm = norm(z);
    let reach = t - d0;
    if reach <= slack || z_norm == 0.0 {
        let value = dot(z, &anchor) - dot(z, center);
        return Ok(Some(BallMax {
            value,
            argmax: anchor,
            certificate: 0.0,
        }));
    }

    let radius_at = |mu: f64| -> Result<(f64, Vec<f64>)> {
        let shifted: Vec<f64> = center.iter().zip(z).map(|(c, zi)| c + mu * zi).collect();
        let p = project(&shifted, cone, tol)?.point;
        Ok((dist(&p, center), p))
    };

    // Projection is 1-Lipschitz, so g(μ) ≤ d₀ + μ‖z‖: μ₀ = (t − d₀)/‖z‖ is a
    // lower bracket.
    let mu0 = reach / z_norm;
    let (mut lo, (mut g_lo, mut p_lo)) = (mu0, radius_at(mu0)?);
    let mut best = (lo, g_lo, p_lo.clone());
    if (g_lo - t).abs() > NORM_MATCH * t {
        let mut hi = 2.0 * mu0;
        let (mut g_hi, mut p_hi) = radius_at(hi)?;
        while g_hi < t && hi < MU_RANGE * mu0 {
            lo = hi;
            g_lo = g_hi;
            p_lo = p_hi;
            hi *= 4.0;
            (g_hi, p_hi) = radius_at(hi)?;
        }
        if g_hi < t {
            // Ball constraint never binds: the supremum over the cone is
            // finite and attained inside the ball.
            best = (hi, g_hi, p_hi);
        } else {
            best = root_search(t, (lo, g_lo, p_lo), (hi, g_hi, p_hi), &radius_at)?;
        }
    }

    let (mu, g, p) = best;
    // Pull an overshooting iterate back along the segment towards the anchor,
    // which stays inside the (convex) cone, until it is on the sphere.
    let shrink = if g > t {
        segment_to_sphere(center, &anchor, &p, t)
    } else {
        1.0
    };
    let argmax: Vec<f64> = anchor
        .iter()
        .zip(&p)
        .map(|(a, pi)| a + shrink * (pi - a))
        .collect();
    let raw = dot(z, &p) - dot(z, center);
    let value = dot(z, &argmax) - dot(z, center);
    // Dual bound at λ = 1/μ: ⟨z, θ(λ) − c⟩ − (λ/2)(‖θ(λ) − c‖² − t²).
    let upper = raw - (g * g - t * t) / (2.0 * mu);
    let certificate = (upper - value).max(0.0);
    if certificate > tol.max(1e-9) * (value.abs() + 1.0) {
        return Err(Error::Solver {
            message: "ball-constrained supremum did not converge".into(),
            best: argmax,
            residual: certificate,
            iterations: 0,
        });
    }
    Ok(Some(BallMax {
        value,
        argmax,
        certificate,
    }))
}

/// Largest `s ∈ [0, 1]` with `‖a + s(p − a) − c‖ ≤ t`, given `‖a − c‖ ≤ t`.
fn segment_to_sphere(c: &[f64], a: &[f64], p: &[f64], t: f64) -> f64 {
    let u: Vec<f64> = a.iter().zip(c).map(|(x, y)| x - y).collect();
    let w: Vec<f64> = p.iter().zip(a).map(|(x, y)| x - y).collect();
    let ww = dot(&w, &w);
    if ww == 0.0 {
        return 1.0;
    }
    let uw = dot(&u, &w);
    let uu = dot(&u, &u);
    let disc = (uw * uw - ww * (uu - t * t)).max(0.0);
    ((-uw + disc.sqrt()) / ww).clamp(0.0, 1.0)
}

type Probe = (f64, f64, Vec<f64>);

fn root_search<F>(t: f64, mut lo: Probe, mut hi: Probe, radius_at: &F) -> Result<Probe>
where
    F: Fn(f64) -> Result<(f64, Vec<f64>)>,
{
    // Illinois: regula falsi with halving of the stale endpoint's residual.
    let (mut f_lo, mut f_hi) = (lo.1 - t, hi.1 - t);
    let mut side = 0i8;
    for _ in 0..MAX_ROOT_STEPS {
        let mut mu = if f_hi != f_lo {
            (lo.0 * f_hi - hi.0 * f_lo) / (f_hi - f_lo)
        } else {
            0.5 * (lo.0 + hi.0)
        };
        if !(mu > lo.0 && mu < hi.0) {
            mu = 0.5 * (lo.0 + hi.0);
        }
        let (g, p) = radius_at(mu)?;
        let f = g - t;
        if f.abs() <= NORM_MATCH * t || hi.0 - lo.0 <= 1e-15 * hi.0 {
            return Ok((mu, g, p));
        }
        if f < 0.0 {
            lo = (mu, g, p);
            f_lo = f;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = (mu, g, p);
            f_hi = f;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    // Return the feasible side; its gap is reported by the caller.
    Ok(if (lo.1 - t).abs() < (hi.1 - t).abs() {
        lo
    } else {
        hi
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::DEFAULT_TOL;

    #[test]
    fn zero_radius_is_trivial() {
        let c = [0.0, 1.0, 0.0];
        let out =
            max_linear_over_ball(&[1.0, -2.0, 0.5], &c, 0.0, &ConeSpec::FullConcave, DEFAULT_TOL).unwrap();
        assert_eq!(out.value, 0.0);
        assert_eq!(out.argmax, c.to_vec());
    }

    #[test]
    fn affine_noise_in_cone() {
        let z = [1.0, 1.0, 1.0];
        let t = 2.0;
        let out = max_linear_over_ball(&z, &[0.0; 3], t, &ConeSpec::FullConcave, DEFAULT_TOL).unwrap();
        assert!((out.value - t * 3f64.sqrt()).abs() < 1e-9);
        for a in &out.argmax {
            assert!((a - t / 3f64.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn negative_radius_rejected() {
        assert!(matches!(
            max_linear_over_ball(&[1.0; 3], &[0.0; 3], -1.0, &ConeSpec::FullConcave, DEFAULT_TOL),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn center_outside_cone_rejected() {
        assert!(matches!(
            max_linear_over_ball(
                &[1.0; 3],
                &[0.0, 0.0, 1.0],
                1.0,
                &ConeSpec::FullConcave,
                DEFAULT_TOL
            ),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn off_center_ball_can_miss_the_cone() {
        // (0,0,1) sits at distance 1/√6 from K_3.
        let c = [0.0, 0.0, 1.0];
        let z = [0.3, -0.2, 0.4];
        let cone = ConeSpec::FullConcave;
        assert!(max_linear_over_ball_from(&z, &c, 0.4, &cone, DEFAULT_TOL)
            .unwrap()
            .is_none());
        let touch = max_linear_over_ball_from(&z, &c, 1.0 / 6f64.sqrt(), &cone, DEFAULT_TOL)
            .unwrap()
            .unwrap();
        let expect = [-1.0 / 6.0, 1.0 / 3.0, 5.0 / 6.0];
        for (a, b) in touch.argmax.iter().zip(expect) {
            assert!((a - b).abs() < 1e-9);
        }
        let wide = max_linear_over_ball_from(&z, &c, 2.0, &cone, DEFAULT_TOL)
            .unwrap()
            .unwrap();
        assert!(wide.value > touch.value);
        assert!(crate::vector::dist(&wide.argmax, &c) <= 2.0 + 1e-9);
        assert!(is_member(&wide.argmax, &cone, 1e-9).unwrap());
    }

    #[test]
    fn bounded_set_saturates() {
        // Sup over K_{3,1} of ⟨z, θ⟩ is finite; a huge ball does not bind.
        let z = [0.0, 1.0, 0.0];
        let cone = ConeSpec::BoundedConcave { bound: 1.0 };
        let out = max_linear_over_ball(&z, &[0.0; 3], 100.0, &cone, DEFAULT_TOL).unwrap();
        assert!((out.value - 1.0).abs() < 1e-9, "{}", out.value);
    }
}
