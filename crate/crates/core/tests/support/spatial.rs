//! Plain spatial-domain evaluation of S_J[p]x: explicit mirror padding,
//! kernels from a direct inverse DFT, circular convolution by summation,
//! modulus at full resolution, decimation at the end.

use num_complex::Complex64;
use std::f64::consts::PI;
use wavescat::filterbank::FilterBank;
use wavescat::numerics::{ComplexGrid, ImageGrid};

type Field = Vec<Vec<Complex64>>;

fn idft(g: &ComplexGrid) -> Field {
    let (w, h) = g.dims();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); w]; h];
    for (y, row) in out.iter_mut().enumerate() {
        for (x, v) in row.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for ky in 0..h {
                for kx in 0..w {
                    let ph = 2.0 * PI * ((kx * x) as f64 / w as f64 + (ky * y) as f64 / h as f64);
                    acc += g.get(kx, ky) * Complex64::from_polar(1.0, ph);
                }
            }
            *v = acc / (w * h) as f64;
        }
    }
    out
}

fn convolve(x: &Field, k: &Field) -> Field {
    let (h, w) = (x.len(), x[0].len());
    let mut out = vec![vec![Complex64::new(0.0, 0.0); w]; h];
    for (y, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            for (vy, krow) in k.iter().enumerate() {
                for (vx, kv) in krow.iter().enumerate() {
                    *v += x[(y + h - vy) % h][(c + w - vx) % w] * kv;
                }
            }
        }
    }
    out
}

fn modulus(x: &Field) -> Field {
    x.iter()
        .map(|r| r.iter().map(|v| Complex64::new(v.norm(), 0.0)).collect())
        .collect()
}

fn mirror_pad(x: &ImageGrid, w: usize, h: usize) -> Field {
    let fold = |i: usize, n: usize| {
        let i = i % (2 * n);
        if i < n {
            i
        } else {
            2 * n - 1 - i
        }
    };
    (0..h)
        .map(|r| {
            (0..w)
                .map(|c| Complex64::new(x.get(fold(c, x.width()), fold(r, x.height())), 0.0))
                .collect()
        })
        .collect()
}

/// Spatial kernels of a bank, computed once.
pub struct SpatialBank {
    psi: Vec<Vec<Field>>,
    phi: Field,
    dims: (usize, usize),
}

impl SpatialBank {
    pub fn new(bank: &FilterBank) -> Self {
        Self {
            psi: bank
                .psi_hat
                .iter()
                .map(|row| row.iter().map(idft).collect())
                .collect(),
            phi: idft(&bank.phi_hat),
            dims: bank.padded_dims(),
        }
    }

    /// S_J[path]x sampled every `step` pixels over the image region.
    pub fn coefficients(&self, x: &ImageGrid, path: &[(usize, usize)], step: usize) -> ImageGrid {
        let mut u = mirror_pad(x, self.dims.0, self.dims.1);
        for &(s, k) in path {
            u = modulus(&convolve(&u, &self.psi[s][k]));
        }
        let smooth = convolve(&u, &self.phi);
        let (ow, oh) = (x.width().div_ceil(step), x.height().div_ceil(step));
        ImageGrid::from_fn(ow, oh, |c, r| smooth[r * step][c * step].re)
    }
}
