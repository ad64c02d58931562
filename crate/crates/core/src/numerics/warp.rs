use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid::ImageGrid;
use super::pad::{mirror_index, Boundary};
use crate::error::{Error, Result};

/// Per-pixel displacement τ(u) = (τx, τy) in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    width: usize,
    height: usize,
    tau: Vec<[f64; 2]>,
    grad_norm_sup: f64,
}

impl DeformationField {
    pub fn new(width: usize, height: usize, tau: Vec<[f64; 2]>) -> Result<Self> {
        if width == 0 || height == 0 || tau.len() != width * height {
            return Err(Error::Shape(format!(
                "{} displacements for a {width}x{height} grid",
                tau.len()
            )));
        }
        if tau.iter().any(|t| !t[0].is_finite() || !t[1].is_finite()) {
            return Err(Error::Argument("non-finite displacement".into()));
        }
        let grad_norm_sup = grad_sup(width, height, &tau);
        Ok(Self {
            width,
            height,
            tau,
            grad_norm_sup,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> [f64; 2],
    ) -> Result<Self> {
        let mut tau = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                tau.push(f(c, r));
            }
        }
        Self::new(width, height, tau)
    }

    pub fn constant(width: usize, height: usize, shift: [f64; 2]) -> Self {
        Self {
            width,
            height,
            tau: vec![shift; width * height],
            grad_norm_sup: 0.0,
        }
    }

    /// Smooth random field built from a few low-frequency cosines, rescaled so
    /// that sup|∇τ| equals `grad_sup_target`.
    pub fn smooth_random(
        width: usize,
        height: usize,
        grad_sup_target: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<[f64; 6]> = (0..6)
            .map(|_| {
                [
                    rng.random_range(0.5..2.0) / width as f64,
                    rng.random_range(0.5..2.0) / height as f64,
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.0..std::f64::consts::TAU),
                ]
            })
            .collect();
        let raw = Self::from_fn(width, height, |c, r| {
            let (x, y) = (c as f64, r as f64);
            let mut t = [0.0, 0.0];
            for m in &modes {
                let arg = std::f64::consts::TAU * (m[0] * x + m[1] * y);
                t[0] += m[3] * (arg + m[2]).cos();
                t[1] += m[4] * (arg + m[5]).cos();
            }
            t
        })?;
        if raw.grad_norm_sup == 0.0 {
            return Err(Error::Degenerate("random field has zero gradient".into()));
        }
        let k = grad_sup_target / raw.grad_norm_sup;
        Self::new(
            width,
            height,
            raw.tau.iter().map(|t| [k * t[0], k * t[1]]).collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn tau(&self) -> &[[f64; 2]] {
        &self.tau
    }

    pub fn grad_norm_sup(&self) -> f64 {
        self.grad_norm_sup
    }

    /// sup_u |τ(u)|.
    pub fn sup_norm(&self) -> f64 {
        self.tau
            .iter()
            .map(|t| t[0].hypot(t[1]))
            .fold(0.0, f64::max)
    }

    /// Field τ' with L_τ' L_τ ≈ identity, from the fixed point τ'(v) = -τ(v - τ'(v)).
    pub fn inverse(&self, iterations: usize) -> Result<Self> {
        let mut inv: Vec<[f64; 2]> = self.tau.iter().map(|t| [-t[0], -t[1]]).collect();
        for _ in 0..iterations {
            let next = (0..self.height)
                .flat_map(|r| (0..self.width).map(move |c| (c, r)))
                .zip(&inv)
                .map(|((c, r), t)| {
                    let px = c as f64 - t[0];
                    let py = r as f64 - t[1];
                    let s = sample_field(self, px, py);
                    [-s[0], -s[1]]
                })
                .collect();
            inv = next;
        }
        Self::new(self.width, self.height, inv)
    }
}

fn sample_field(f: &DeformationField, x: f64, y: f64) -> [f64; 2] {
    let xc = x.clamp(0.0, (f.width - 1) as f64);
    let yc = y.clamp(0.0, (f.height - 1) as f64);
    let (x0, y0) = (xc.floor() as usize, yc.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(f.width - 1), (y0 + 1).min(f.height - 1));
    let (fx, fy) = (xc - x0 as f64, yc - y0 as f64);
    let at = |c: usize, r: usize| f.tau[r * f.width + c];
    let mut out = [0.0; 2];
    for (i, o) in out.iter_mut().enumerate() {
        let top = at(x0, y0)[i] * (1.0 - fx) + at(x1, y0)[i] * fx;
        let bot = at(x0, y1)[i] * (1.0 - fx) + at(x1, y1)[i] * fx;
        *o = top * (1.0 - fy) + bot * fy;
    }
    out
}

/// sup over pixels of the spectral norm of the finite-difference Jacobian of τ.
fn grad_sup(w: usize, h: usize, tau: &[[f64; 2]]) -> f64 {
    let at = |c: usize, r: usize| tau[r * w + c];
    let diff = |n: usize, i: usize, get: &dyn Fn(usize) -> [f64; 2]| -> [f64; 2] {
        if n < 2 {
            return [0.0, 0.0];
        }
        let (lo, hi, span) = if i == 0 {
            (0, 1, 1.0)
        } else if i == n - 1 {
            (n - 2, n - 1, 1.0)
        } else {
            (i - 1, i + 1, 2.0)
        };
        let (a, b) = (get(lo), get(hi));
        [(b[0] - a[0]) / span, (b[1] - a[1]) / span]
    };
    let mut sup = 0.0f64;
    for r in 0..h {
        for c in 0..w {
            let dx = diff(w, c, &|i| at(i, r));
            let dy = diff(h, r, &|i| at(c, i));
            // Jacobian [[∂τx/∂x, ∂τx/∂y], [∂τy/∂x, ∂τy/∂y]]
            let (a, b, cc, d) = (dx[0], dy[0], dx[1], dy[1]);
            let s = a * a + b * b + cc * cc + d * d;
            let det = a * d - b * cc;
            let disc = (s * s - 4.0 * det * det).max(0.0);
            sup = sup.max(((s + disc.sqrt()) / 2.0).sqrt());
        }
    }
    sup
}

/// L_τ x(u) = x(u − τ(u)) with bilinear interpolation.
pub fn warp(x: &ImageGrid, tau: &DeformationField, boundary: Boundary) -> Result<ImageGrid> {
    if tau.grad_norm_sup >= 1.0 {
        return Err(Error::InvalidDeformation(tau.grad_norm_sup));
    }
    let (w, h) = x.dims();
    if (tau.width, tau.height) != (w, h) {
        return Err(Error::Shape(format!(
            "deformation {}x{} vs image {w}x{h}",
            tau.width, tau.height
        )));
    }
    let wrap = |i: isize, n: usize| match boundary {
        Boundary::Periodic => i.rem_euclid(n as isize) as usize,
        Boundary::Mirror => mirror_index(i, n),
    };
    Ok(ImageGrid::from_fn(w, h, |c, r| {
        let t = tau.tau[r * w + c];
        let px = c as f64 - t[0];
        let py = r as f64 - t[1];
        let (fx0, fy0) = (px.floor(), py.floor());
        let (fx, fy) = (px - fx0, py - fy0);
        let (x0, y0) = (fx0 as isize, fy0 as isize);
        let (c0, c1) = (wrap(x0, w), wrap(x0 + 1, w));
        let (r0, r1) = (wrap(y0, h), wrap(y0 + 1, h));
        let top = x.get(c0, r0) * (1.0 - fx) + x.get(c1, r0) * fx;
        let bot = x.get(c0, r1) * (1.0 - fx) + x.get(c1, r1) * fx;
        top * (1.0 - fy) + bot * fy
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(cx: f64, cy: f64, s: f64) -> impl Fn(f64, f64) -> f64 {
        move |x, y| (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp()
    }

    #[test]
    fn zero_field_is_identity() {
        let x = ImageGrid::from_fn(9, 7, |c, r| (c * 3 + r) as f64);
        let tau = DeformationField::constant(9, 7, [0.0, 0.0]);
        assert_eq!(warp(&x, &tau, Boundary::Mirror).unwrap(), x);
    }

    #[test]
    fn constant_field_is_circular_shift() {
        let x = ImageGrid::from_fn(10, 6, |c, r| ((c * 7 + r * 5) % 9) as f64);
        let tau = DeformationField::constant(10, 6, [3.0, 0.0]);
        let y = warp(&x, &tau, Boundary::Periodic).unwrap();
        assert_eq!(y, x.roll(3, 0));
    }

    #[test]
    fn small_dilation_matches_analytic_bump() {
        let n = 128;
        let f = bump(64.0, 60.0, 16.0);
        let x = ImageGrid::from_fn(n, n, |c, r| f(c as f64, r as f64));
        let tau =
            DeformationField::from_fn(n, n, |c, r| [0.05 * c as f64, 0.05 * r as f64]).unwrap();
        assert!((tau.grad_norm_sup() - 0.05).abs() < 1e-9);
        let y = warp(&x, &tau, Boundary::Mirror).unwrap();
        for r in 0..n {
            for c in 0..n {
                let (u, v) = (c as f64 * 0.95, r as f64 * 0.95);
                assert!((y.get(c, r) - f(u, v)).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn rejects_non_invertible_fields() {
        let x = ImageGrid::zeros(8, 8);
        let tau = DeformationField::from_fn(8, 8, |c, _| [1.5 * c as f64, 0.0]).unwrap();
        assert!(matches!(
            warp(&x, &tau, Boundary::Mirror),
            Err(Error::InvalidDeformation(_))
        ));
    }

    #[test]
    fn smooth_random_hits_target_gradient() {
        let tau = DeformationField::smooth_random(48, 40, 0.05, 9).unwrap();
        assert!((tau.grad_norm_sup() - 0.05).abs() < 1e-9);
    }

    #[test]
    fn inverse_warp_recovers_smooth_image() {
        let n = 64;
        let f = bump(30.0, 33.0, 8.0);
        let x = ImageGrid::from_fn(n, n, |c, r| f(c as f64, r as f64));
        let tau = DeformationField::smooth_random(n, n, 0.05, 4).unwrap();
        let inv = tau.inverse(20).unwrap();
        let back = warp(
            &warp(&x, &tau, Boundary::Mirror).unwrap(),
            &inv,
            Boundary::Mirror,
        )
        .unwrap();
        let err = back.sub(&x).unwrap().norm() / x.norm();
        assert!(err < 0.02 * tau.sup_norm().max(1.0), "relative error {err}");
    }
}
