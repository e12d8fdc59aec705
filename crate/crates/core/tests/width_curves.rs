use concreg_core::stats::RunningStats;
use concreg_core::vector::norm;
use concreg_core::width::{
    audit_paths, check_subgaussian_max, geometric_grid, mode_restricted_width, replication_noise,
    subgaussian_max_bound, WidthSampler,
};
use concreg_core::{project, ConeSpec, DEFAULT_TOL};

/// At the origin `f(t) = t·E‖Π_K z‖`; the oracle projects the same noise
/// directly.
#[test]
fn zero_center_width_is_linear_in_t() {
    let (n, reps, seed) = (40, 60, 17);
    let sampler = WidthSampler::new(&vec![0.0; n], ConeSpec::FullConcave, 1.0, reps, seed).unwrap();
    let oracle: RunningStats = (0..reps)
        .map(|r| {
            let z = replication_noise(seed, r, n, 1.0);
            norm(&project(&z, &ConeSpec::FullConcave, DEFAULT_TOL).unwrap().point)
        })
        .collect();
    let grid = [0.5, 1.0, 3.0];
    let curve = sampler.curve(&grid).unwrap();
    for (p, t) in curve.estimates.iter().zip(grid) {
        assert!(
            (p.mean - t * oracle.mean()).abs() <= 1e-7 * (1.0 + p.mean),
            "t = {t}"
        );
    }
    // The fixed point of t·m is 2m.
    let s = curve
        .fixed_point
        .unwrap_or_else(|| sampler.fixed_point(0.1, 100.0, 1e-6).unwrap());
    assert!(
        (s - 2.0 * oracle.mean()).abs() <= 1e-3 * s,
        "{s} vs {}",
        2.0 * oracle.mean()
    );
}

#[test]
fn paths_are_monotone_and_star_shaped_at_a_curved_center() {
    let n = 48;
    let center: Vec<f64> = (0..n)
        .map(|i| {
            let u = 2.0 * i as f64 / (n - 1) as f64 - 1.0;
            3.0 * (1.0 - u * u)
        })
        .collect();
    let sampler = WidthSampler::new(&center, ConeSpec::FullConcave, 0.5, 40, 5).unwrap();
    let mut grid = vec![0.0];
    grid.extend(geometric_grid(0.05, 20.0, 8).unwrap());
    let paths = sampler.paths(&grid).unwrap();
    let audit = audit_paths(&grid, &paths);
    assert!(audit.holds(1e-6), "{audit:?}");
    assert_eq!(audit.zero_value, Some(0.0));
}

#[test]
fn mode_widths_never_exceed_the_full_width() {
    let n = 24;
    let center: Vec<f64> = (0..n).map(|i| (i as f64).sqrt()).collect();
    let full = WidthSampler::new(&center, ConeSpec::FullConcave, 1.0, 50, 8)
        .unwrap()
        .estimate(1.5)
        .unwrap();
    for k in [1, 6, 12, 24] {
        let w = mode_restricted_width(&center, k, 1.0, 1.5, 50, 8, false).unwrap();
        assert!(w.mean <= full.mean + 1e-7, "k = {k}: {} > {}", w.mean, full.mean);
    }
}

#[test]
fn mode_width_rejects_non_monotone_center() {
    let center = vec![0.0, 1.0, 0.0, -1.0];
    assert!(mode_restricted_width(&center, 2, 1.0, 1.0, 10, 1, false).is_err());
    assert!(mode_restricted_width(&center, 2, 1.0, 1.0, 10, 1, true).is_ok());
}

#[test]
fn gaussian_maximum_bound() {
    assert!(subgaussian_max_bound(1, 1.0) > 0.0);
    assert!((subgaussian_max_bound(1000, 2.0) - 2.0 * subgaussian_max_bound(1000, 1.0)).abs() < 1e-12);
    let check = check_subgaussian_max(1000, 1.0, 500, 3).unwrap();
    assert!(check.holds);
    // E max of 1000 standard normals is about 3.24.
    assert!((check.mean - 3.24).abs() < 0.15, "{}", check.mean);
}
