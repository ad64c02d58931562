use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use super::path::{enumerate_paths, Path};
use crate::error::{Error, Result};
use crate::filterbank::FilterBank;
use crate::numerics::fft::{fft2_real, ifft2};
use crate::numerics::{fold_spectrum, pad_reflect, ComplexGrid, ImageGrid};

/// Oversampling factor α: layers are sampled every α·2^s pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alpha {
    One,
    #[default]
    Half,
}

impl Alpha {
    pub fn value(self) -> f64 {
        match self {
            Alpha::One => 1.0,
            Alpha::Half => 0.5,
        }
    }

    /// log2 of the sampling step of a modulus layer at scale index `s`.
    pub fn layer_res(self, s: usize) -> usize {
        match self {
            Alpha::One => s,
            Alpha::Half => s.saturating_sub(1),
        }
    }

    /// log2 of the output sampling step α·2^J.
    pub fn output_res(self, j: usize) -> usize {
        match self {
            Alpha::One => j,
            Alpha::Half => j - 1,
        }
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Alpha::One => "1",
            Alpha::Half => "0.5",
        })
    }
}

impl FromStr for Alpha {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "1.0" => Ok(Alpha::One),
            "0.5" | "1/2" | ".5" => Ok(Alpha::Half),
            other => Err(Error::Argument(format!(
                "alpha must be 1 or 0.5, got '{other}'"
            ))),
        }
    }
}

/// Windowed scattering coefficients S_J[p]x for every path, in path order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringResult {
    pub j: usize,
    pub c: usize,
    pub alpha: Alpha,
    pub m_max: usize,
    pub paths: Vec<Path>,
    pub coeffs: Vec<ImageGrid>,
    /// Σ_{|p|=m} ‖S_J[p]x‖², indexed by m.
    pub layer_energy: Vec<f64>,
    /// ‖U[Λ^{m_max+1}]x‖², the energy left in the first discarded layer.
    pub residual_energy: f64,
}

impl ScatteringResult {
    pub fn get(&self, p: &Path) -> Option<&ImageGrid> {
        self.paths.binary_search(p).ok().map(|i| &self.coeffs[i])
    }

    pub fn output_dims(&self) -> (usize, usize) {
        self.coeffs[0].dims()
    }

    /// Sampling step α·2^J of the coefficient grids.
    pub fn step(&self) -> usize {
        1 << self.alpha.output_res(self.j)
    }

    pub fn total_energy(&self) -> f64 {
        self.layer_energy.iter().sum()
    }

    /// Path-major flattening: all positions of the first path, then the next.
    pub fn feature_vector(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .flat_map(|g| g.values().iter().copied())
            .collect()
    }

    /// ‖S x − S y‖ over all paths, with the same area weighting as the energies.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        if self.paths != other.paths || self.output_dims() != other.output_dims() {
            return Err(Error::Config(
                "scattering results have different layouts".into(),
            ));
        }
        let w = (self.step() * self.step()) as f64;
        let mut acc = 0.0;
        for (a, b) in self.coeffs.iter().zip(&other.coeffs) {
            for (x, y) in a.values().iter().zip(b.values()) {
                acc += (x - y) * (x - y);
            }
        }
        Ok((w * acc).sqrt())
    }

    /// √(Σ_m layer_energy[m]).
    pub fn norm(&self) -> f64 {
        self.total_energy().sqrt()
    }
}

struct NodeOut {
    path: Path,
    smoothed: Option<ImageGrid>,
    layer_sum: f64,
}

/// Depth-first walk of the frequency-decreasing tree on the bank's working grid.
struct Cascade<'a> {
    bank: &'a FilterBank,
    alpha: Alpha,
    m_max: usize,
    image: (usize, usize),
    out_res: usize,
    smooth: bool,
    residual: bool,
}

impl Cascade<'_> {
    fn crop_dims(&self, r: usize) -> (usize, usize) {
        (self.image.0.div_ceil(1 << r), self.image.1.div_ceil(1 << r))
    }

    fn filtered(
        &self,
        spec: &ComplexGrid,
        filter: &ComplexGrid,
        factor: usize,
    ) -> Result<ComplexGrid> {
        let prod: Vec<Complex64> = spec
            .values()
            .iter()
            .zip(filter.values())
            .map(|(a, b)| a * b)
            .collect();
        let (w, h) = spec.dims();
        let folded = fold_spectrum(&ComplexGrid::from_raw(w, h, prod), factor)?;
        Ok(ifft2(&folded))
    }

    fn smoothed(&self, spec: &ComplexGrid, r: usize) -> Result<ImageGrid> {
        let y = self.filtered(spec, self.bank.phi_at(r)?, 1 << (self.out_res - r))?;
        let (cw, ch) = self.crop_dims(self.out_res);
        y.re().crop(cw, ch)
    }

    fn modulus(
        &self,
        spec: &ComplexGrid,
        r: usize,
        s: usize,
        k: usize,
    ) -> Result<(ImageGrid, usize)> {
        let cr = self.alpha.layer_res(s);
        let y = self.filtered(spec, self.bank.psi_at(r, s, k)?, 1 << (cr - r))?;
        Ok((y.modulus(), cr))
    }

    fn children(&self, path: &Path) -> Vec<(usize, usize)> {
        let first = path.last_scale().map_or(0, |s| s + 1);
        (first..self.bank.j())
            .flat_map(|s| (0..self.bank.c()).map(move |k| (s, k)))
            .collect()
    }

    fn node(&self, path: Path, layer: ImageGrid, r: usize) -> Result<(Vec<NodeOut>, f64)> {
        let spec = fft2_real(&layer);
        let (cw, ch) = self.crop_dims(r);
        let weight = (1u64 << (2 * r)) as f64;
        let layer_sum = weight * window_fold(&layer, cw, ch, |acc, v| acc + v);
        let smoothed = if self.smooth {
            let s = self.smoothed(&spec, r)?;
            if s.values().iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericOverflow(path.to_string()));
            }
            Some(s)
        } else {
            None
        };
        if !layer_sum.is_finite() {
            return Err(Error::NumericOverflow(path.to_string()));
        }
        let children = self.children(&path);
        let mut outs = vec![NodeOut {
            path: path.clone(),
            smoothed,
            layer_sum,
        }];

        if path.order() == self.m_max {
            let mut residual = 0.0;
            if self.residual {
                for &(s, k) in &children {
                    let (m, cr) = self.modulus(&spec, r, s, k)?;
                    let (cw, ch) = self.crop_dims(cr);
                    let w = (1u64 << (2 * cr)) as f64;
                    residual += w * window_fold(&m, cw, ch, |acc, v| acc + v * v);
                }
            }
            return Ok((outs, residual));
        }

        let run = |&(s, k): &(usize, usize)| -> Result<(Vec<NodeOut>, f64)> {
            let (m, cr) = self.modulus(&spec, r, s, k)?;
            self.node(path.child(s, k)?, m, cr)
        };
        let results: Vec<Result<(Vec<NodeOut>, f64)>> = if path.order() <= 1 {
            children.par_iter().map(run).collect()
        } else {
            children.iter().map(run).collect()
        };
        let mut residual = 0.0;
        for res in results {
            let (sub, e) = res?;
            outs.extend(sub);
            residual += e;
        }
        Ok((outs, residual))
    }
}

/// Left-to-right fold over the top-left `cw`×`ch` window.
fn window_fold(g: &ImageGrid, cw: usize, ch: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    let w = g.width();
    let mut acc = 0.0;
    for row in g.values().chunks(w).take(ch) {
        for &v in &row[..cw] {
            acc = f(acc, v);
        }
    }
    acc
}

/// Extends `x` to the bank's working grid.
pub(crate) fn to_working_grid(x: &ImageGrid, bank: &FilterBank) -> Result<ImageGrid> {
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
    if (w, h) == x.dims() {
        Ok(x.clone())
    } else {
        pad_reflect(x, w, h)
    }
}

/// Reduced scattering transform: every frequency-decreasing path up to `m_max`,
/// each layer sampled at α·2^s and each output at α·2^J.
pub fn scattering_transform(
    x: &ImageGrid,
    bank: &FilterBank,
    m_max: usize,
    alpha: Alpha,
) -> Result<ScatteringResult> {
    transform(x, bank, m_max, alpha, true)
}

/// Coefficients only: skips the order-(m_max+1) residual pass, leaving
/// `residual_energy` as NaN.
pub(crate) fn scattering_coefficients(
    x: &ImageGrid,
    bank: &FilterBank,
    m_max: usize,
    alpha: Alpha,
) -> Result<ScatteringResult> {
    transform(x, bank, m_max, alpha, false)
}

fn transform(
    x: &ImageGrid,
    bank: &FilterBank,
    m_max: usize,
    alpha: Alpha,
    residual: bool,
) -> Result<ScatteringResult> {
    x.check_signal()?;
    let cascade = Cascade {
        bank,
        alpha,
        m_max,
        image: x.dims(),
        out_res: alpha.output_res(bank.j()),
        smooth: true,
        residual,
    };
    let (nodes, residual_energy) = cascade.node(Path::empty(), to_working_grid(x, bank)?, 0)?;
    let weight = (1u64 << (2 * cascade.out_res)) as f64;
    let mut layer_energy = vec![0.0; m_max + 1];
    let mut paths = Vec::with_capacity(nodes.len());
    let mut coeffs = Vec::with_capacity(nodes.len());
    for n in nodes {
        let g = n.smoothed.expect("smoothing enabled");
        layer_energy[n.path.order()] += weight * g.norm_sq();
        paths.push(n.path);
        coeffs.push(g);
    }
    debug_assert_eq!(paths, enumerate_paths(bank.j(), bank.c(), m_max));
    Ok(ScatteringResult {
        j: bank.j(),
        c: bank.c(),
        alpha,
        m_max,
        paths,
        coeffs,
        layer_energy,
        residual_energy: if residual { residual_energy } else { f64::NAN },
    })
}

/// One propagator step U_{k,J} applied to a layer on the working grid.
#[derive(Debug, Clone)]
pub struct Propagated {
    /// x ⋆ φ sampled at α·2^J (working grid, uncropped).
    pub smoothed: ImageGrid,
    pub smoothed_res: usize,
    /// |x ⋆ ψ_{s',k}| sampled at α·2^{s'} for every s' coarser than the input scale.
    pub moduli: Vec<((usize, usize), ImageGrid)>,
    pub moduli_res: Vec<usize>,
}

impl Propagated {
    /// Output energy with each grid weighted by its sampling area.
    pub fn energy(&self) -> f64 {
        let w = |r: usize| (1u64 << (2 * r)) as f64;
        self.moduli.iter().zip(&self.moduli_res).fold(
            w(self.smoothed_res) * self.smoothed.norm_sq(),
            |acc, ((_, g), &r)| acc + w(r) * g.norm_sq(),
        )
    }
}

/// Applies the propagator to `x`, a layer whose last wavelet had scale index
/// `s` (`None` for the input image). `x` lives on the working grid subsampled
/// by 2^layer_res(s).
pub fn propagate(
    x: &ImageGrid,
    s: Option<usize>,
    bank: &FilterBank,
    alpha: Alpha,
) -> Result<Propagated> {
    let r = s.map_or(0, |s| alpha.layer_res(s));
    let (w, h) = bank.padded_dims();
    if x.dims() != (w >> r, h >> r) {
        return Err(Error::Shape(format!(
            "layer {}x{} does not match working grid {}x{} at resolution 2^{r}",
            x.width(),
            x.height(),
            w >> r,
            h >> r
        )));
    }
    let cascade = Cascade {
        bank,
        alpha,
        m_max: 1,
        image: (w, h),
        out_res: alpha.output_res(bank.j()),
        smooth: true,
        residual: false,
    };
    let spec = fft2_real(x);
    let smoothed = cascade.smoothed(&spec, r)?;
    let first = s.map_or(0, |s| s + 1);
    let mut moduli = Vec::new();
    let mut moduli_res = Vec::new();
    for s2 in first..bank.j() {
        for k in 0..bank.c() {
            let (m, cr) = cascade.modulus(&spec, r, s2, k)?;
            moduli.push(((s2, k), m));
            moduli_res.push(cr);
        }
    }
    Ok(Propagated {
        smoothed,
        smoothed_res: cascade.out_res,
        moduli,
        moduli_res,
    })
}

/// Dirac-normalized global scattering S̄x(p) = Σ_u U[p]x(u) / Σ_u U[p]δ(u).
///
/// Sums run over the whole working grid, which must be exactly the mirrored
/// image (twice its size) or the image itself for a periodic bank, so that the
/// extension of x and δ carry the same number of copies.
pub fn global_scattering(
    x: &ImageGrid,
    bank: &FilterBank,
    m_max: usize,
) -> Result<Vec<(Path, f64)>> {
    x.check_signal()?;
    let (w, h) = x.dims();
    let (pw, ph) = bank.padded_dims();
    if !((pw, ph) == (w, h) || (pw, ph) == (2 * w, 2 * h)) {
        return Err(Error::Argument(format!(
            "global scattering needs a working grid of {w}x{h} or {}x{}, got {pw}x{ph}",
            2 * w,
            2 * h
        )));
    }
    if (1usize << bank.j()) < w.max(h) {
        return Err(Error::Argument(format!(
            "2^J = {} is smaller than the image width {}",
            1usize << bank.j(),
            w.max(h)
        )));
    }
    let run = |img: &ImageGrid| -> Result<Vec<NodeOut>> {
        let cascade = Cascade {
            bank,
            alpha: Alpha::Half,
            m_max,
            image: (pw, ph),
            out_res: Alpha::Half.output_res(bank.j()),
            smooth: false,
            residual: false,
        };
        Ok(cascade
            .node(Path::empty(), to_working_grid(img, bank)?, 0)?
            .0)
    };
    let mut dirac = ImageGrid::zeros(w, h);
    dirac.set(0, 0, 1.0);
    let num = run(x)?;
    let den = run(&dirac)?;
    num.into_iter()
        .zip(den)
        .map(|(a, b)| {
            if b.layer_sum.abs() < 1e-12 {
                return Err(Error::Degenerate(format!(
                    "Dirac normalizer {:.3e} for path {}",
                    b.layer_sum, b.path
                )));
            }
            Ok((a.path, a.layer_sum / b.layer_sum))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::{build_filter_bank, FilterBankParams};
    use crate::numerics::{subsample, Boundary};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(n: usize, seed: u64) -> ImageGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageGrid::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn constant_image_only_has_order_zero() {
        let bank = build_filter_bank(FilterBankParams::new(3, 4, 24, 24)).unwrap();
        let x = ImageGrid::from_fn(24, 24, |_, _| 1.7);
        let res = scattering_transform(&x, &bank, 2, Alpha::Half).unwrap();
        assert!(res.coeffs[0]
            .values()
            .iter()
            .all(|v| (v - 1.7).abs() < 1e-10));
        for g in &res.coeffs[1..] {
            assert!(g.values().iter().all(|v| v.abs() < 1e-10));
        }
        assert!(res.layer_energy[1..].iter().all(|&e| e < 1e-18));
    }

    #[test]
    fn layout_follows_path_order_and_sampling() {
        let bank = build_filter_bank(FilterBankParams::new(2, 3, 20, 12)).unwrap();
        let x = random_image(20, 1).crop(20, 12).unwrap();
        for (alpha, step) in [(Alpha::One, 4), (Alpha::Half, 2)] {
            let res = scattering_transform(&x, &bank, 2, alpha).unwrap();
            assert_eq!(res.paths, enumerate_paths(2, 3, 2));
            assert_eq!(res.step(), step);
            for g in &res.coeffs {
                assert_eq!(g.dims(), (20usize.div_ceil(step), 12usize.div_ceil(step)));
            }
        }
    }

    #[test]
    fn higher_order_coefficients_are_nonnegative() {
        let bank = build_filter_bank(FilterBankParams::new(3, 6, 32, 32)).unwrap();
        let res = scattering_transform(&random_image(32, 2), &bank, 2, Alpha::Half).unwrap();
        for g in &res.coeffs[1..] {
            let max = g.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(g.values().iter().all(|&v| v >= -1e-9 * max.max(1.0)));
        }
    }

    #[test]
    fn propagate_constant_and_dirac() {
        let bank = build_filter_bank(
            FilterBankParams::new(3, 2, 32, 32).with_boundary(Boundary::Periodic),
        )
        .unwrap();
        let c = ImageGrid::from_fn(32, 32, |_, _| 3.0);
        let out = propagate(&c, None, &bank, Alpha::One).unwrap();
        assert!(out
            .smoothed
            .values()
            .iter()
            .all(|v| (v - 3.0).abs() < 1e-10));
        assert!(out
            .moduli
            .iter()
            .all(|(_, g)| g.values().iter().all(|v| v.abs() < 1e-10)));

        let mut d = ImageGrid::zeros(32, 32);
        d.set(0, 0, 1.0);
        let out = propagate(&d, None, &bank, Alpha::One).unwrap();
        assert_eq!(out.moduli.len(), 6);
        for ((s, k), g) in &out.moduli {
            let psi = bank.spatial_psi(*s, *k).modulus();
            let expected = subsample(&psi, 1 << s).unwrap();
            for (a, b) in g.values().iter().zip(expected.values()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        // a layer at the coarsest scale has nothing left to propagate
        let coarse = ImageGrid::zeros(8, 8);
        let out = propagate(&coarse, Some(2), &bank, Alpha::One).unwrap();
        assert!(out.moduli.is_empty());
    }

    #[test]
    fn propagate_is_contractive() {
        let bank = build_filter_bank(
            FilterBankParams::new(3, 6, 64, 64).with_boundary(Boundary::Periodic),
        )
        .unwrap();
        for seed in 0..5 {
            let x = random_image(64, seed);
            for alpha in [Alpha::One, Alpha::Half] {
                let e = propagate(&x, None, &bank, alpha).unwrap().energy();
                assert!(e <= x.norm_sq() * (1.0 + 1e-6));
            }
        }
    }

    #[test]
    fn energy_budget_and_residual_decay() {
        let bank = build_filter_bank(FilterBankParams::new(3, 4, 32, 32)).unwrap();
        let x = random_image(32, 9);
        let mut last = f64::INFINITY;
        for m_max in 0..=3 {
            let res = scattering_transform(&x, &bank, m_max, Alpha::Half).unwrap();
            assert!(res.total_energy() + res.residual_energy <= x.norm_sq() * (1.0 + 1e-6));
            assert!(res.residual_energy <= last * (1.0 + 1e-9));
            last = res.residual_energy;
        }
    }

    #[test]
    fn global_scattering_normalization() {
        let bank = build_filter_bank(FilterBankParams::new(4, 3, 16, 16)).unwrap();
        let mut d = ImageGrid::zeros(16, 16);
        d.set(0, 0, 1.0);
        for (_, v) in global_scattering(&d, &bank, 2).unwrap() {
            assert!((v - 1.0).abs() < 1e-10);
        }
        for (_, v) in global_scattering(&d.scale(2.0), &bank, 2).unwrap() {
            assert!((v - 2.0).abs() < 1e-10);
        }
        let x = random_image(16, 4).map(|v| v + 1.0);
        let g = global_scattering(&x, &bank, 1).unwrap();
        assert_eq!(g[0].0, Path::empty());
        assert!((g[0].1 - x.sum()).abs() < 1e-9 * x.sum().abs());

        let small = build_filter_bank(FilterBankParams::new(2, 3, 16, 16)).unwrap();
        assert!(global_scattering(&x, &small, 1).is_err());
    }

    #[test]
    fn overflow_names_the_path() {
        let bank = build_filter_bank(FilterBankParams::new(2, 2, 16, 16)).unwrap();
        let x = ImageGrid::from_fn(16, 16, |c, r| if (c + r) % 2 == 0 { 1e307 } else { -1e307 });
        match scattering_transform(&x, &bank, 1, Alpha::Half) {
            Err(Error::NumericOverflow(p)) => assert!(!p.is_empty()),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn rejects_mismatched_image() {
        let bank = build_filter_bank(FilterBankParams::new(2, 2, 16, 16)).unwrap();
        assert!(scattering_transform(&random_image(20, 0), &bank, 1, Alpha::Half).is_err());
    }

    #[test]
    fn alpha_parsing() {
        assert_eq!("1".parse::<Alpha>().unwrap(), Alpha::One);
        assert_eq!("0.5".parse::<Alpha>().unwrap(), Alpha::Half);
        assert!("2".parse::<Alpha>().is_err());
    }
}
