//! Fourier-domain Morlet filter banks and the Littlewood–Paley frame audit.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::fft::{bin_frequency, fft2, ifft2, mirror_bin};
use crate::numerics::{pad_reflect, Boundary, ComplexGrid, ImageGrid};

pub const DEFAULT_SIGMA: f64 = 0.85;
pub const DEFAULT_XI: f64 = 3.0 * PI / 4.0;
pub const DEFAULT_SIGMA0: f64 = 0.7;
pub const DEFAULT_ORIENTATIONS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterBankParams {
    /// Number of dyadic scales; the averaging window is 2^J pixels wide.
    pub j: usize,
    /// Orientations per scale, at angles kπ/C.
    pub c: usize,
    pub sigma: f64,
    pub xi: f64,
    pub sigma0: f64,
    /// Image dimensions the bank is built for (before padding).
    pub grid_w: usize,
    pub grid_h: usize,
    pub boundary: Boundary,
}

impl FilterBankParams {
    /// Default Morlet parameters for a `grid_w`×`grid_h` image.
    pub fn new(j: usize, c: usize, grid_w: usize, grid_h: usize) -> Self {
        Self {
            j,
            c,
            sigma: DEFAULT_SIGMA,
            xi: DEFAULT_XI,
            sigma0: DEFAULT_SIGMA0,
            grid_w,
            grid_h,
            boundary: Boundary::Mirror,
        }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.j < 1 || self.j > 20 {
            return Err(Error::Argument(format!("J = {} outside 1..=20", self.j)));
        }
        if self.c < 1 {
            return Err(Error::Argument("C must be at least 1".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Argument(format!(
                "sigma = {} must be > 0",
                self.sigma
            )));
        }
        if !(self.xi > 0.0 && self.xi <= PI) {
            return Err(Error::Argument(format!("xi = {} outside (0, pi]", self.xi)));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(Error::Argument(format!(
                "sigma0 = {} must be > 0",
                self.sigma0
            )));
        }
        if self.grid_w < 2 || self.grid_h < 2 {
            return Err(Error::Shape(format!(
                "grid {}x{} smaller than 2x2",
                self.grid_w, self.grid_h
            )));
        }
        Ok(())
    }

    /// Dimensions of the working grid the filters are sampled on.
    pub fn padded_dims(&self) -> (usize, usize) {
        let m = 1usize << self.j;
        (
            self.boundary.padded_len(self.grid_w, m),
            self.boundary.padded_len(self.grid_h, m),
        )
    }
}

/// Morlet wavelet in the Fourier domain, centered at (ξ, 0):
/// exp(-σ²|ω-ξ|²/2) - exp(-σ²ξ²/2)·exp(-σ²|ω|²/2), which vanishes at ω = 0.
pub fn morlet_hat(wx: f64, wy: f64, sigma: f64, xi: f64) -> f64 {
    let s2 = sigma * sigma;
    let band = (-s2 * ((wx - xi).powi(2) + wy * wy) / 2.0).exp();
    let corr = (-s2 * xi * xi / 2.0).exp() * (-s2 * (wx * wx + wy * wy) / 2.0).exp();
    band - corr
}

/// Gaussian low-pass of spatial width `width`, equal to 1 at ω = 0.
pub fn gaussian_hat(wx: f64, wy: f64, width: f64) -> f64 {
    (-width * width * (wx * wx + wy * wy) / 2.0).exp()
}

/// Filters restricted to one coarser working resolution.
#[derive(Debug, Clone)]
struct Level {
    psi: Vec<Vec<Option<ComplexGrid>>>,
    phi: ComplexGrid,
}

#[derive(Debug, Clone)]
pub struct FilterBank {
    pub params: FilterBankParams,
    /// ψ̂ for scale index s (0 = finest) and orientation k, on the padded grid.
    pub psi_hat: Vec<Vec<ComplexGrid>>,
    pub phi_hat: ComplexGrid,
    pub epsilon: f64,
    levels: Vec<Level>,
}

impl FilterBank {
    /// Assembles a bank from precomputed filters and audits it.
    pub fn from_parts(
        params: FilterBankParams,
        psi_hat: Vec<Vec<ComplexGrid>>,
        phi_hat: ComplexGrid,
    ) -> Result<Self> {
        params.validate()?;
        let dims = params.padded_dims();
        if psi_hat.len() != params.j || psi_hat.iter().any(|row| row.len() != params.c) {
            return Err(Error::Shape(format!(
                "expected {}x{} wavelets",
                params.j, params.c
            )));
        }
        if phi_hat.dims() != dims || psi_hat.iter().flatten().any(|g| g.dims() != dims) {
            return Err(Error::Shape(format!(
                "filters must be sampled on the {}x{} working grid",
                dims.0, dims.1
            )));
        }
        let mut bank = Self {
            params,
            psi_hat,
            phi_hat,
            epsilon: 0.0,
            levels: Vec::new(),
        };
        bank.epsilon = littlewood_paley_audit(&bank)?;
        bank.levels = (1..params.j).map(|r| bank.level(r)).collect();
        Ok(bank)
    }

    pub fn j(&self) -> usize {
        self.params.j
    }

    pub fn c(&self) -> usize {
        self.params.c
    }

    pub fn padded_dims(&self) -> (usize, usize) {
        self.phi_hat.dims()
    }

    fn level(&self, r: usize) -> Level {
        let (w, h) = self.padded_dims();
        let (cw, ch) = (w >> r, h >> r);
        let psi = self
            .psi_hat
            .iter()
            .enumerate()
            .map(|(s, row)| {
                row.iter()
                    .map(|g| (s >= r).then(|| low_block(g, cw, ch)))
                    .collect()
            })
            .collect();
        Level {
            psi,
            phi: low_block(&self.phi_hat, cw, ch),
        }
    }

    /// ψ̂_{s,k} on the working grid subsampled by 2^r.
    pub fn psi_at(&self, r: usize, s: usize, k: usize) -> Result<&ComplexGrid> {
        if r == 0 {
            return Ok(&self.psi_hat[s][k]);
        }
        self.levels
            .get(r - 1)
            .and_then(|l| l.psi[s][k].as_ref())
            .ok_or_else(|| {
                Error::Resolution(format!("wavelet (s={s}) is not kept at resolution 2^{r}"))
            })
    }

    /// φ̂ on the working grid subsampled by 2^r.
    pub fn phi_at(&self, r: usize) -> Result<&ComplexGrid> {
        if r == 0 {
            return Ok(&self.phi_hat);
        }
        self.levels
            .get(r - 1)
            .map(|l| &l.phi)
            .ok_or_else(|| Error::Resolution(format!("no low-pass at resolution 2^{r}")))
    }

    /// Spatial-domain wavelet, centered at the origin of the working grid.
    pub fn spatial_psi(&self, s: usize, k: usize) -> ComplexGrid {
        ifft2(&self.psi_hat[s][k])
    }
}

/// Low-frequency block of a spectrum: bin (kx, ky) of the coarse grid keeps the
/// value of the fine bin with the same signed frequency index.
fn low_block(g: &ComplexGrid, cw: usize, ch: usize) -> ComplexGrid {
    let (w, h) = g.dims();
    let fine = |k: usize, n: usize, fine_n: usize| {
        if 2 * k >= n {
            fine_n - (n - k)
        } else {
            k
        }
    };
    ComplexGrid::from_fn(cw, ch, |c, r| g.get(fine(c, cw, w), fine(r, ch, h)))
}

/// 2π shifts summed when sampling ψ̂ on the grid, so each discrete filter
/// has the periodic spectrum of a spatially sampled wavelet.
const ALIASES: [(f64, f64); 9] = [
    (-1.0, -1.0),
    (-1.0, 0.0),
    (-1.0, 1.0),
    (0.0, -1.0),
    (0.0, 0.0),
    (0.0, 1.0),
    (1.0, -1.0),
    (1.0, 0.0),
    (1.0, 1.0),
];

/// Samples the Morlet bank on the padded grid and rescales the wavelets so the
/// Littlewood–Paley sum never exceeds 1.
///
/// The low-pass has width σ₀·2^(J-1), one octave below the coarsest wavelet's
/// support, and is left unscaled so that φ̂(0) = 1.
pub fn build_filter_bank(params: FilterBankParams) -> Result<FilterBank> {
    params.validate()?;
    let (w, h) = params.padded_dims();
    let m = 1usize << params.j;
    if params.boundary == Boundary::Periodic && (w % m != 0 || h % m != 0) {
        return Err(Error::Resolution(format!(
            "periodic grid {w}x{h} is not divisible by 2^J = {m}"
        )));
    }
    let coarsest = params.xi / (1u64 << (params.j - 1)) as f64;
    let bin = 2.0 * PI / w.min(h) as f64;
    if coarsest < bin {
        return Err(Error::Resolution(format!(
            "coarsest center frequency {coarsest:.4} is below one bin ({bin:.4}) on a {w}x{h} grid"
        )));
    }

    let freqs: Vec<(f64, f64)> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (bin_frequency(c, w), bin_frequency(r, h))))
        .collect();

    let mut psi: Vec<Vec<Vec<f64>>> = Vec::with_capacity(params.j);
    for s in 0..params.j {
        let dil = (1u64 << s) as f64;
        let row = (0..params.c)
            .map(|k| {
                let theta = k as f64 * PI / params.c as f64;
                let (ct, st) = (theta.cos(), theta.sin());
                let mut g: Vec<f64> = freqs
                    .iter()
                    .map(|&(wx, wy)| {
                        let mut v = 0.0;
                        for (ax, ay) in ALIASES {
                            let (ux, uy) = (wx + 2.0 * PI * ax, wy + 2.0 * PI * ay);
                            let rx = ct * ux + st * uy;
                            let ry = -st * ux + ct * uy;
                            v += morlet_hat(dil * rx, dil * ry, params.sigma, params.xi);
                        }
                        v
                    })
                    .collect();
                g[0] = 0.0;
                g
            })
            .collect();
        psi.push(row);
    }

    let width = params.sigma0 * (1u64 << (params.j - 1)) as f64;
    let phi: Vec<f64> = freqs
        .iter()
        .map(|&(wx, wy)| gaussian_hat(wx, wy, width))
        .collect();

    let a_psi = lp_sum(w, h, psi.iter().flatten().map(|g| g.as_slice()), None);
    let mut scale_sq = f64::INFINITY;
    for (i, &a) in a_psi.iter().enumerate() {
        if a > 0.0 {
            scale_sq = scale_sq.min((1.0 - phi[i] * phi[i]) / a);
        }
    }
    if !scale_sq.is_finite() || scale_sq <= 0.0 {
        return Err(Error::DegenerateFrame(1.0));
    }
    let scale = scale_sq.sqrt();

    let to_grid = |v: &[f64], a: f64| {
        ComplexGrid::from_raw(
            w,
            h,
            v.iter().map(|&x| Complex64::new(a * x, 0.0)).collect(),
        )
    };
    let psi_hat = psi
        .iter()
        .map(|row| row.iter().map(|g| to_grid(g, scale)).collect())
        .collect();
    FilterBank::from_parts(params, psi_hat, to_grid(&phi, 1.0))
}

/// A(ω) = |φ̂(ω)|² + ½ Σ (|ψ̂(ω)|² + |ψ̂(-ω)|²) over every bin of a w×h grid.
fn lp_sum<'a>(
    w: usize,
    h: usize,
    psi: impl Iterator<Item = &'a [f64]>,
    phi: Option<&[f64]>,
) -> Vec<f64> {
    let mut a = match phi {
        Some(p) => p.iter().map(|v| v * v).collect(),
        None => vec![0.0; w * h],
    };
    for g in psi {
        for r in 0..h {
            let mr = mirror_bin(r, h);
            for c in 0..w {
                let mc = mirror_bin(c, w);
                let (p, q) = (g[r * w + c], g[mr * w + mc]);
                a[r * w + c] += 0.5 * (p * p + q * q);
            }
        }
    }
    a
}

/// Littlewood–Paley sum of a bank on its working grid.
pub fn littlewood_paley_sum(bank: &FilterBank) -> Vec<f64> {
    let (w, h) = bank.padded_dims();
    let mut a: Vec<f64> = bank.phi_hat.values().iter().map(|v| v.norm_sqr()).collect();
    for g in bank.psi_hat.iter().flatten() {
        let v = g.values();
        for r in 0..h {
            let mr = mirror_bin(r, h);
            for c in 0..w {
                let mc = mirror_bin(c, w);
                a[r * w + c] += 0.5 * (v[r * w + c].norm_sqr() + v[mr * w + mc].norm_sqr());
            }
        }
    }
    a
}

/// ε = 1 − min A(ω) over the open disk |ω| < π.
///
/// Bins outside the disk, including the Nyquist axes where ω and −ω share a
/// bin, are exempt from the lower bound but still checked against A ≤ 1.
pub fn littlewood_paley_audit(bank: &FilterBank) -> Result<f64> {
    let (w, h) = bank.padded_dims();
    let a = littlewood_paley_sum(bank);
    let mut min = f64::INFINITY;
    let mut max = 0.0f64;
    for r in 0..h {
        let wy = bin_frequency(r, h);
        for c in 0..w {
            let wx = bin_frequency(c, w);
            let v = a[r * w + c];
            max = max.max(v);
            if wx.hypot(wy) < PI {
                min = min.min(v);
            }
        }
    }
    if max > 1.0 + 1e-9 {
        return Err(Error::Argument(format!(
            "frame upper bound violated: max A = {max:.6}"
        )));
    }
    let eps = 1.0 - min;
    if eps >= 1.0 {
        return Err(Error::DegenerateFrame(eps));
    }
    Ok(eps.max(0.0))
}

/// Undecimated wavelet transform W_J x, cropped back to the image extent.
#[derive(Debug, Clone)]
pub struct WaveletTransform {
    pub low: ComplexGrid,
    pub band: Vec<Vec<ComplexGrid>>,
}

impl WaveletTransform {
    /// ‖W_J x‖² = ‖x⋆φ‖² + Σ ‖x⋆ψ_λ‖².
    pub fn norm_sq(&self) -> f64 {
        self.band
            .iter()
            .flatten()
            .fold(self.low.norm_sq(), |acc, g| acc + g.norm_sq())
    }
}

/// Spectrum of `x` on the bank's working grid (padding applied).
pub(crate) fn padded_spectrum(x: &ImageGrid, bank: &FilterBank) -> Result<ComplexGrid> {
    let p = &bank.params;
    if x.dims() != (p.grid_w, p.grid_h) {
        return Err(Error::Shape(format!(
            "image {}x{} vs bank grid {}x{}",
            x.width(),
            x.height(),
            p.grid_w,
            p.grid_h
        )));
    }
    let (w, h) = bank.padded_dims();
    let padded = if (w, h) == x.dims() {
        x.clone()
    } else {
        pad_reflect(x, w, h)?
    };
    Ok(fft2(&padded.to_complex()))
}

pub fn wavelet_transform(x: &ImageGrid, bank: &FilterBank) -> Result<WaveletTransform> {
    x.check_signal()?;
    let spec = padded_spectrum(x, bank)?;
    let (w, h) = x.dims();
    let apply = |f: &ComplexGrid| -> Result<ComplexGrid> {
        let prod: Vec<Complex64> = spec
            .values()
            .iter()
            .zip(f.values())
            .map(|(a, b)| a * b)
            .collect();
        let (pw, ph) = spec.dims();
        ifft2(&ComplexGrid::from_raw(pw, ph, prod)).crop(w, h)
    };
    let low = apply(&bank.phi_hat)?;
    let band = bank
        .psi_hat
        .iter()
        .map(|row| row.iter().map(&apply).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(WaveletTransform { low, band })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn argmax(g: &ComplexGrid) -> (usize, usize) {
        let (w, _) = g.dims();
        let i = g
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap()
            .0;
        (i % w, i / w)
    }

    #[test]
    fn single_wavelet_peaks_at_center_frequency() {
        let p = FilterBankParams::new(1, 1, 64, 64).with_boundary(Boundary::Periodic);
        let bank = build_filter_bank(p).unwrap();
        let (c, r) = argmax(&bank.psi_hat[0][0]);
        assert_eq!((c, r), (24, 0));
    }

    #[test]
    fn wavelets_have_zero_mean_and_phi_unit_integral() {
        let bank = build_filter_bank(FilterBankParams::new(3, 4, 20, 24)).unwrap();
        for g in bank.psi_hat.iter().flatten() {
            assert!(g.values()[0].norm() < 1e-10);
            let spatial = ifft2(g);
            let sum: Complex64 = spatial.values().iter().sum();
            assert!(sum.norm() < 1e-10);
        }
        assert!((bank.phi_hat.values()[0].re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn default_bank_peaks_where_expected() {
        let p = FilterBankParams::new(3, 6, 128, 128).with_boundary(Boundary::Periodic);
        let bank = build_filter_bank(p).unwrap();
        assert_eq!(bank.psi_hat.len() * bank.psi_hat[0].len(), 18);
        for s in 0..3 {
            for k in 0..6 {
                let (c, r) = argmax(&bank.psi_hat[s][k]);
                let th = k as f64 * PI / 6.0;
                let f = DEFAULT_XI / (1 << s) as f64;
                let (ex, ey) = (f * th.cos(), f * th.sin());
                let bin = 2.0 * PI / 128.0;
                let (gx, gy) = (bin_frequency(c, 128), bin_frequency(r, 128));
                assert!((gx - ex).abs() <= bin + 1e-12 && (gy - ey).abs() <= bin + 1e-12);
            }
        }
    }

    #[test]
    fn unitary_bank_has_zero_epsilon() {
        // φ̂ = 1 everywhere and no wavelet energy: A ≡ 1.
        let p = FilterBankParams::new(1, 1, 8, 8).with_boundary(Boundary::Periodic);
        let ones = ComplexGrid::from_fn(8, 8, |_, _| Complex64::new(1.0, 0.0));
        let zeros = ComplexGrid::zeros(8, 8);
        let bank = FilterBank::from_parts(p, vec![vec![zeros]], ones).unwrap();
        assert_eq!(bank.epsilon, 0.0);
    }

    #[test]
    fn audit_matches_direct_summation() {
        let p = FilterBankParams::new(1, 2, 64, 64).with_boundary(Boundary::Periodic);
        let bank = build_filter_bank(p).unwrap();
        let mut min = f64::INFINITY;
        for r in 0..64usize {
            for c in 0..64usize {
                let (wx, wy) = (bin_frequency(c, 64), bin_frequency(r, 64));
                if wx.hypot(wy) >= PI {
                    continue;
                }
                let mut a = bank.phi_hat.get(c, r).norm_sqr();
                for k in 0..2 {
                    let g = &bank.psi_hat[0][k];
                    let (nc, nr) = ((64 - c) % 64, (64 - r) % 64);
                    a += 0.5 * (g.get(c, r).norm_sqr() + g.get(nc, nr).norm_sqr());
                }
                min = min.min(a);
            }
        }
        assert!((bank.epsilon - (1.0 - min)).abs() < 1e-12);
    }

    #[test]
    fn resolution_error_for_tiny_grids() {
        let p = FilterBankParams::new(5, 6, 8, 8).with_boundary(Boundary::Periodic);
        assert!(matches!(build_filter_bank(p), Err(Error::Resolution(_))));
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = FilterBankParams::new(2, 6, 32, 32);
        p.xi = 4.0;
        assert!(build_filter_bank(p).is_err());
        let mut p = FilterBankParams::new(2, 6, 32, 32);
        p.sigma = 0.0;
        assert!(build_filter_bank(p).is_err());
    }

    #[test]
    fn constant_input_only_reaches_low_pass() {
        let bank = build_filter_bank(FilterBankParams::new(2, 4, 16, 16)).unwrap();
        let x = ImageGrid::from_fn(16, 16, |_, _| 2.5);
        let wt = wavelet_transform(&x, &bank).unwrap();
        for g in wt.band.iter().flatten() {
            assert!(g.values().iter().all(|v| v.norm() < 1e-10));
        }
        assert!(wt.low.values().iter().all(|v| (v.re - 2.5).abs() < 1e-10));
    }

    #[test]
    fn dirac_response_is_spatial_wavelet() {
        let p = FilterBankParams::new(2, 3, 16, 16).with_boundary(Boundary::Periodic);
        let bank = build_filter_bank(p).unwrap();
        let mut d = ImageGrid::zeros(16, 16);
        d.set(0, 0, 1.0);
        let wt = wavelet_transform(&d, &bank).unwrap();
        let psi = bank.spatial_psi(1, 2);
        for (a, b) in wt.band[1][2].values().iter().zip(psi.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn frame_bounds_hold_on_random_images() {
        for boundary in [Boundary::Periodic, Boundary::Mirror] {
            let p = FilterBankParams::new(3, 6, 32, 32).with_boundary(boundary);
            let bank = build_filter_bank(p).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for _ in 0..4 {
                let x = ImageGrid::from_fn(32, 32, |_, _| rng.random_range(-1.0..1.0));
                let ratio = wavelet_transform(&x, &bank).unwrap().norm_sq() / x.norm_sq();
                assert!(ratio <= 1.0 + 1e-6, "{boundary}: {ratio}");
                assert!(ratio >= 1.0 - bank.epsilon - 0.02, "{boundary}: {ratio}");
            }
        }
    }

    #[test]
    fn adding_a_scale_adds_c_filters() {
        let a = build_filter_bank(FilterBankParams::new(2, 5, 64, 64)).unwrap();
        let b = build_filter_bank(FilterBankParams::new(3, 5, 64, 64)).unwrap();
        let count = |bank: &FilterBank| bank.psi_hat.iter().flatten().count();
        assert_eq!(count(&b) - count(&a), 5);
    }

    #[test]
    fn coarse_levels_are_low_frequency_blocks() {
        let bank = build_filter_bank(FilterBankParams::new(3, 2, 16, 16)).unwrap();
        let (w, h) = bank.padded_dims();
        let g = bank.psi_at(1, 2, 1).unwrap();
        assert_eq!(g.dims(), (w / 2, h / 2));
        // bin 3 on the half grid is the same physical frequency as bin 3 on the full one,
        // and the half grid's last bin maps to the full grid's last bin.
        assert_eq!(g.get(3, 0), bank.psi_hat[2][1].get(3, 0));
        assert_eq!(g.get(w / 2 - 1, 1), bank.psi_hat[2][1].get(w - 1, 1));
        assert!(bank.psi_at(2, 1, 0).is_err());
    }
}
