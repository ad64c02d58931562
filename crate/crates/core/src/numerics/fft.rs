use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::{ComplexGrid, ImageGrid};
use super::pad::pad_reflect_complex;
use crate::error::{Error, Result};

/// Row and column plans for one grid size, shared process-wide.
pub struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

type PlanCache = Mutex<HashMap<(usize, usize), Arc<Fft2>>>;

fn cache() -> &'static PlanCache {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Fft2 {
    pub fn plan(width: usize, height: usize) -> Arc<Fft2> {
        let mut map = cache().lock().unwrap_or_else(|e| e.into_inner());
        map.entry((width, height))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Arc::new(Fft2 {
                    width,
                    height,
                    row_fwd: planner.plan_fft_forward(width),
                    row_inv: planner.plan_fft_inverse(width),
                    col_fwd: planner.plan_fft_forward(height),
                    col_inv: planner.plan_fft_inverse(height),
                })
            })
            .clone()
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_fwd, &self.col_fwd);
    }

    /// Inverse transform in place, including the 1/N factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_inv, &self.col_inv);
        let scale = 1.0 / (self.width * self.height) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn run(&self, data: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        let (w, h) = (self.width, self.height);
        assert_eq!(data.len(), w * h);
        let scratch_len = rows
            .get_inplace_scratch_len()
            .max(cols.get_inplace_scratch_len());
        let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
        if w > 1 {
            rows.process_with_scratch(data, &mut scratch);
        }
        if h > 1 {
            let mut t = transpose(data, w, h);
            cols.process_with_scratch(&mut t, &mut scratch);
            data.copy_from_slice(&transpose(&t, h, w));
        }
    }
}

fn transpose(data: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    for r in 0..h {
        for c in 0..w {
            out[c * h + r] = data[r * w + c];
        }
    }
    out
}

pub fn fft2(x: &ComplexGrid) -> ComplexGrid {
    let mut v = x.values().to_vec();
    Fft2::plan(x.width(), x.height()).forward(&mut v);
    ComplexGrid::from_raw(x.width(), x.height(), v)
}

pub fn ifft2(x: &ComplexGrid) -> ComplexGrid {
    let mut v = x.values().to_vec();
    Fft2::plan(x.width(), x.height()).inverse(&mut v);
    ComplexGrid::from_raw(x.width(), x.height(), v)
}

pub fn fft2_real(x: &ImageGrid) -> ComplexGrid {
    fft2(&x.to_complex())
}

/// Angular frequency of DFT bin `k` on an axis of length `n`, in [-π, π).
pub fn bin_frequency(k: usize, n: usize) -> f64 {
    let signed = if 2 * k >= n {
        k as isize - n as isize
    } else {
        k as isize
    };
    2.0 * PI * signed as f64 / n as f64
}

/// Bin holding -ω when bin `k` holds ω.
pub fn mirror_bin(k: usize, n: usize) -> usize {
    (n - k) % n
}

/// Circular convolution through the FFT.
///
/// When `h_hat` is larger than `x`, `x` is first mirror-padded to the size of
/// `h_hat` and the result is cropped back to the extent of `x`.
pub fn fft_convolve(x: &ComplexGrid, h_hat: &ComplexGrid) -> Result<ComplexGrid> {
    let (w, h) = x.dims();
    let (pw, ph) = h_hat.dims();
    if pw < w || ph < h {
        return Err(Error::Shape(format!(
            "filter grid {pw}x{ph} is smaller than signal {w}x{h}"
        )));
    }
    let padded = if (pw, ph) == (w, h) {
        x.clone()
    } else {
        pad_reflect_complex(x, pw, ph)?
    };
    let mut spec = fft2(&padded);
    for (v, f) in spec.values_mut().iter_mut().zip(h_hat.values()) {
        *v *= f;
    }
    let out = ifft2(&spec);
    if (pw, ph) == (w, h) {
        Ok(out)
    } else {
        out.crop(w, h)
    }
}

pub fn fft_convolve_real(x: &ImageGrid, h_hat: &ComplexGrid) -> Result<ComplexGrid> {
    fft_convolve(&x.to_complex(), h_hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(w: usize, h: usize, seed: u64) -> ImageGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageGrid::from_fn(w, h, |_, _| rng.random_range(-1.0..1.0))
    }

    fn gaussian_hat(w: usize, h: usize, s: f64) -> ComplexGrid {
        ComplexGrid::from_fn(w, h, |c, r| {
            let (wx, wy) = (bin_frequency(c, w), bin_frequency(r, h));
            Complex64::new((-s * s * (wx * wx + wy * wy) / 2.0).exp(), 0.0)
        })
    }

    #[test]
    fn all_pass_filter_is_identity() {
        let x = random_grid(12, 10, 1).to_complex();
        let ones = ComplexGrid::from_fn(12, 10, |_, _| Complex64::new(1.0, 0.0));
        let y = fft_convolve(&x, &ones).unwrap();
        for (a, b) in x.values().iter().zip(y.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn dirac_returns_spatial_filter() {
        let (w, h) = (16, 8);
        let hat = gaussian_hat(w, h, 1.3);
        let mut d = ImageGrid::zeros(w, h);
        d.set(0, 0, 1.0);
        let y = fft_convolve_real(&d, &hat).unwrap();
        let spatial = ifft2(&hat);
        for (a, b) in y.values().iter().zip(spatial.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_circular_convolution() {
        let n = 16;
        let x = random_grid(n, n, 7);
        let hat = gaussian_hat(n, n, 0.9);
        let kernel = ifft2(&hat);
        let fast = fft_convolve_real(&x, &hat).unwrap();
        for r in 0..n {
            for c in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for rr in 0..n {
                    for cc in 0..n {
                        let kc = (c + n - cc) % n;
                        let kr = (r + n - rr) % n;
                        acc += kernel.get(kc, kr) * x.get(cc, rr);
                    }
                }
                assert!((acc - fast.get(c, r)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn parseval_holds() {
        let x = random_grid(20, 14, 3);
        let spec = fft2_real(&x);
        let lhs = x.norm_sq();
        let rhs = spec.norm_sq() / (20.0 * 14.0);
        assert!((lhs - rhs).abs() <= 1e-8 * lhs);
    }

    #[test]
    fn larger_filter_grid_pads_and_crops() {
        let x = random_grid(5, 5, 11).to_complex();
        let ones = ComplexGrid::from_fn(8, 8, |_, _| Complex64::new(1.0, 0.0));
        let y = fft_convolve(&x, &ones).unwrap();
        assert_eq!(y.dims(), (5, 5));
        for (a, b) in x.values().iter().zip(y.values()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(fft_convolve(&ones, &x).is_err());
    }

    #[test]
    fn frequency_layout() {
        assert_eq!(bin_frequency(0, 8), 0.0);
        assert!((bin_frequency(4, 8) + PI).abs() < 1e-15);
        assert!((bin_frequency(7, 8) + PI / 4.0).abs() < 1e-15);
        assert_eq!(mirror_bin(0, 8), 0);
        assert_eq!(mirror_bin(3, 8), 5);
    }
}
