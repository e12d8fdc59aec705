//! Benchmarks live in `benches/`; this library only holds shared inputs.

use concreg_core::rng::{gaussian_vector, stream};

/// Noisy observations of the concave parabola `1 − u²` on `[−1, 1]`.
pub fn noisy_parabola(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let z = gaussian_vector(&mut stream(seed, n as u64), n, sigma);
    (0..n)
        .map(|i| {
            let u = 2.0 * i as f64 / (n - 1) as f64 - 1.0;
            1.0 - u * u + z[i]
        })
        .collect()
}
