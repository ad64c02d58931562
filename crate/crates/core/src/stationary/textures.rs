//! Synthetic stationary textures used in place of photographic texture corpora.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::TextureEnsemble;
use crate::error::Result;
use crate::numerics::fft::{bin_frequency, fft2, ifft2};
use crate::numerics::ImageGrid;

fn white_noise(n: usize, rng: &mut ChaCha8Rng) -> ImageGrid {
    ImageGrid::from_fn(n, n, |_, _| rng.sample(StandardNormal))
}

/// Periodic low-pass filtering by exp(−b|ω|²).
fn smooth(x: &ImageGrid, b: f64) -> ImageGrid {
    let (w, h) = x.dims();
    let mut spec = fft2(&x.to_complex());
    for r in 0..h {
        let wy = bin_frequency(r, h);
        for c in 0..w {
            let wx = bin_frequency(c, w);
            spec.values_mut()[r * w + c] *= Complex64::new((-b * (wx * wx + wy * wy)).exp(), 0.0);
        }
    }
    ifft2(&spec).re()
}

/// Smooth Gaussian random field: white noise filtered by exp(−b|ω|²), standardized.
pub fn gaussian_field(n: usize, b: f64, seed: u64) -> ImageGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    smooth(&white_noise(n, &mut rng), b).standardize()
}

/// Two-level texture: sign of a smooth Gaussian field, standardized. Its
/// edges are sparse, which order-2 coefficients pick up and the power
/// spectrum does not.
pub fn binary_texture(n: usize, b: f64, seed: u64) -> ImageGrid {
    gaussian_field(n, b, seed)
        .map(|v| if v >= 0.0 { 1.0 } else { -1.0 })
        .standardize()
}

/// Poisson-like spot process: random impulses blurred by exp(−2|ω|²), standardized.
pub fn spot_texture(n: usize, density: f64, seed: u64) -> ImageGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = (density * (n * n) as f64).round() as usize;
    let mut x = ImageGrid::zeros(n, n);
    for _ in 0..count {
        let (c, r) = (rng.random_range(0..n), rng.random_range(0..n));
        x.set(c, r, 1.0);
    }
    smooth(&x, 2.0).standardize()
}

/// Independent standardized white-noise realizations.
pub fn white_noise_ensemble(n: usize, count: usize, seed: u64) -> Result<TextureEnsemble> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images = (0..count).map(|_| white_noise(n, &mut rng)).collect();
    TextureEnsemble::new(images, format!("white noise {n}x{n}, seed {seed}"))
}

/// `count` realizations of [`binary_texture`] with seeds `seed, seed+1, …`.
pub fn binary_ensemble(n: usize, b: f64, count: usize, seed: u64) -> Result<TextureEnsemble> {
    let images = (0..count as u64)
        .map(|i| binary_texture(n, b, seed + i))
        .collect();
    TextureEnsemble::new(images, format!("binary texture b={b} {n}x{n}, seed {seed}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textures_are_standardized() {
        for x in [
            gaussian_field(32, 4.0, 1),
            binary_texture(32, 4.0, 2),
            spot_texture(32, 0.05, 3),
        ] {
            assert!(x.mean().abs() < 1e-12);
            assert!((x.norm_sq() / 1024.0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn binary_texture_has_two_levels() {
        let x = binary_texture(64, 16.0, 5);
        let mut levels: Vec<f64> = x.values().to_vec();
        levels.sort_by(f64::total_cmp);
        levels.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        assert_eq!(levels.len(), 2);
    }

    #[test]
    fn seeds_are_reproducible() {
        assert_eq!(binary_texture(32, 8.0, 9), binary_texture(32, 8.0, 9));
        assert_ne!(binary_texture(32, 8.0, 9), binary_texture(32, 8.0, 10));
    }
}
