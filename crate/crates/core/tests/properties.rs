//! Structural properties of the projections and the ball supremum, checked on
//! generated inputs.

use concreg_core::vector::{dist, dot, norm, sub};
use concreg_core::{
    is_member, max_linear_over_ball, max_linear_over_ball_from, project, project_affine, ConeSpec,
    DEFAULT_TOL,
};
use proptest::prelude::*;

fn vec_of(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    n.prop_flat_map(|n| prop::collection::vec(-10.0..10.0f64, n))
}

fn pair(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    n.prop_flat_map(|n| {
        (
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(-10.0..10.0f64, n),
        )
    })
}

/// A concave sequence from a start value and sorted decreasing slopes.
fn concave_from(start: f64, mut slopes: Vec<f64>) -> Vec<f64> {
    slopes.sort_by(|a, b| b.total_cmp(a));
    let mut out = vec![start];
    for s in slopes {
        out.push(out.last().unwrap() + s);
    }
    out
}

fn concave_of_len(n: usize) -> impl Strategy<Value = Vec<f64>> {
    (-5.0..5.0f64, prop::collection::vec(-3.0..3.0f64, n - 1)).prop_map(|(s, slopes)| concave_from(s, slopes))
}

/// Arbitrary vectors paired with a concave sequence of the same length.
fn with_concave(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    n.prop_flat_map(|n| {
        (
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(-10.0..10.0f64, n),
            concave_of_len(n),
        )
    })
}

fn pk(y: &[f64]) -> Vec<f64> {
    project(y, &ConeSpec::FullConcave, DEFAULT_TOL).unwrap().point
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_is_nonexpansive((a, b) in pair(3..=40)) {
        prop_assert!(dist(&pk(&a), &pk(&b)) <= dist(&a, &b) * (1.0 + 1e-9) + 1e-9);
    }

    #[test]
    fn projection_commutes_with_affine_shifts(y in vec_of(3..=40), a in -5.0..5.0f64, b in -2.0..2.0f64) {
        let shift: Vec<f64> = (0..y.len()).map(|i| a + b * i as f64).collect();
        let shifted: Vec<f64> = y.iter().zip(&shift).map(|(u, v)| u + v).collect();
        let lhs = pk(&shifted);
        let rhs: Vec<f64> = pk(&y).iter().zip(&shift).map(|(u, v)| u + v).collect();
        prop_assert!(dist(&lhs, &rhs) <= 1e-8 * (1.0 + norm(&y)));
    }

    #[test]
    fn projection_is_positively_homogeneous(y in vec_of(3..=40), c in 0.01..100.0f64) {
        let scaled: Vec<f64> = y.iter().map(|v| c * v).collect();
        let lhs = pk(&scaled);
        let rhs: Vec<f64> = pk(&y).iter().map(|v| c * v).collect();
        prop_assert!(dist(&lhs, &rhs) <= 1e-8 * (1.0 + norm(&scaled)));
    }

    #[test]
    fn residual_is_orthogonal_and_obtuse((y, _, theta) in with_concave(3..=30)) {
        let p = pk(&y);
        let r = sub(&y, &p);
        let scale = 1.0 + norm(&y) * norm(&y);
        prop_assert!(dot(&r, &p).abs() <= 1e-8 * scale);
        prop_assert!(dot(&r, &sub(&theta, &p)) <= 1e-8 * scale * (1.0 + norm(&theta)));
    }

    #[test]
    fn affine_projection_is_idempotent(y in vec_of(2..=50)) {
        let once = project_affine(&y);
        let twice = project_affine(&once);
        prop_assert!(dist(&once, &twice) <= 1e-10 * (1.0 + norm(&y)));
        let r = sub(&y, &once);
        prop_assert!(r.iter().sum::<f64>().abs() <= 1e-9 * (1.0 + norm(&y)));
    }

    /// Every concave sequence attains its maximum somewhere, so `K_n` is the
    /// union of the mode cones and the nearest point in `K_n` is the best of
    /// the nearest points in each `C_k`.
    #[test]
    fn full_cone_is_union_of_mode_cones(y in vec_of(3..=12)) {
        let full = dist(&y, &pk(&y));
        let best = (1..=y.len())
            .map(|k| {
                let p = project(&y, &ConeSpec::ModeConstrained { k }, DEFAULT_TOL).unwrap().point;
                assert!(is_member(&p, &ConeSpec::ModeConstrained { k }, 1e-8).unwrap());
                dist(&y, &p)
            })
            .fold(f64::INFINITY, f64::min);
        prop_assert!((full - best).abs() <= 1e-8 * (1.0 + norm(&y)));
    }

    /// At the origin the ball supremum is `t‖Π_K z‖` exactly.
    #[test]
    fn ball_supremum_at_origin(z in vec_of(3..=40), t in 0.01..10.0f64) {
        let out = max_linear_over_ball(&z, &vec![0.0; z.len()], t, &ConeSpec::FullConcave, DEFAULT_TOL).unwrap();
        let expected = t * norm(&pk(&z));
        prop_assert!((out.value - expected).abs() <= 1e-7 * (1.0 + expected));
        prop_assert!(norm(&out.argmax) <= t * (1.0 + 1e-9));
    }

    #[test]
    fn ball_supremum_is_lipschitz_in_noise((z, w, center) in with_concave(3..=30), t in 0.1..5.0f64) {
        let cone = ConeSpec::FullConcave;
        let a = max_linear_over_ball(&z, &center, t, &cone, DEFAULT_TOL).unwrap();
        let b = max_linear_over_ball(&w, &center, t, &cone, DEFAULT_TOL).unwrap();
        let slack = a.certificate + b.certificate + 1e-7 * (1.0 + a.value.abs() + b.value.abs());
        prop_assert!((a.value - b.value).abs() <= t * dist(&z, &w) + slack);
    }

    /// Pathwise union over modes: for a monotone concave center the
    /// supremum over `K_n` equals the largest supremum over the `C_k`.
    #[test]
    fn ball_supremum_is_max_over_modes(z in vec_of(4..=10), slopes in prop::collection::vec(0.0..3.0f64, 9), t in 0.1..5.0f64) {
        let n = z.len();
        let center = concave_from(0.0, slopes[..n - 1].to_vec());
        let full = max_linear_over_ball(&z, &center, t, &ConeSpec::FullConcave, DEFAULT_TOL).unwrap();
        let best = (1..=n)
            .filter_map(|k| {
                max_linear_over_ball_from(&z, &center, t, &ConeSpec::ModeConstrained { k }, DEFAULT_TOL)
                    .unwrap()
                    .map(|b| b.value)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((full.value - best).abs() <= 1e-6 * (1.0 + full.value.abs()), "{} vs {best}", full.value);
    }
}
