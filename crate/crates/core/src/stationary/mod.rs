//! Expected scattering of stationary processes: estimation, variance decay,
//! order-energy profiles, phase-randomized surrogates and the ρ(m) statistic.

pub mod textures;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filterbank::FilterBank;
use crate::numerics::fft::{fft2, ifft2, mirror_bin};
use crate::numerics::ImageGrid;
use crate::scattering::transform::scattering_coefficients;
use crate::scattering::{Alpha, Path, ScatteringResult};

/// Realizations of one stationary process.
#[derive(Debug, Clone)]
pub struct TextureEnsemble {
    pub realizations: Vec<ImageGrid>,
    pub provenance: String,
}

impl TextureEnsemble {
    pub fn new(realizations: Vec<ImageGrid>, provenance: impl Into<String>) -> Result<Self> {
        if realizations.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "an ensemble needs at least 2 realizations, got {}",
                realizations.len()
            )));
        }
        let dims = realizations[0].dims();
        if realizations.iter().any(|x| x.dims() != dims) {
            return Err(Error::Shape(
                "realizations have different dimensions".into(),
            ));
        }
        Ok(Self {
            realizations,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.realizations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }

    /// Mean and variance normalization of every realization.
    pub fn standardized(&self) -> Self {
        Self {
            realizations: self
                .realizations
                .iter()
                .map(ImageGrid::standardize)
                .collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Splits into the first `k` realizations and the rest.
    pub fn split(&self, k: usize) -> Result<(Self, Self)> {
        let (a, b) = self.realizations.split_at(k.min(self.len()));
        Ok((
            Self::new(a.to_vec(), format!("{} [..{k}]", self.provenance))?,
            Self::new(b.to_vec(), format!("{} [{k}..]", self.provenance))?,
        ))
    }

    /// E|X|², the mean per-pixel power over all realizations.
    pub fn power(&self) -> f64 {
        let n = self.realizations[0].values().len() as f64;
        self.realizations
            .iter()
            .map(|x| x.norm_sq() / n)
            .sum::<f64>()
            / self.len() as f64
    }
}

/// Empirical E(S_J[p]X) and its variance, path by path.
#[derive(Debug, Clone)]
pub struct ExpectedScattering {
    pub j: usize,
    pub m_max: usize,
    pub paths: Vec<Path>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// E|X|² of the ensemble.
    pub power: f64,
    /// Standard error of `mean`, from the spread of per-realization means
    /// (positions within one realization are correlated).
    pub standard_error: Vec<f64>,
    /// Number of samples per path the statistics were computed from.
    pub samples: usize,
    /// Every realization had zero spatial mean.
    pub mean_removed: bool,
}

impl ExpectedScattering {
    /// Σ_p variance(p) / E|X|².
    pub fn normalized_variance(&self) -> f64 {
        self.variance.iter().sum::<f64>() / self.power
    }
}

/// Scattering samples of an ensemble: one vector over all paths per sample.
///
/// When 2^J covers the image, each realization gives one sample (the spatial
/// mean of its coefficients); otherwise every output position of every
/// realization is a sample.
pub(crate) fn ensemble_samples(
    ensemble: &TextureEnsemble,
    bank: &FilterBank,
    m_max: usize,
    alpha: Alpha,
) -> Result<(Vec<Path>, Vec<Vec<f64>>)> {
    let results: Vec<ScatteringResult> = ensemble
        .realizations
        .par_iter()
        .map(|x| scattering_coefficients(x, bank, m_max, alpha))
        .collect::<Result<_>>()?;
    let (w, h) = ensemble.realizations[0].dims();
    let global = (1usize << bank.j()) >= w.max(h);
    let mut samples = Vec::new();
    for r in &results {
        if global {
            samples.push(r.coeffs.iter().map(ImageGrid::mean).collect());
        } else {
            let npos = r.coeffs[0].values().len();
            for u in 0..npos {
                samples.push(r.coeffs.iter().map(|g| g.values()[u]).collect());
            }
        }
    }
    Ok((results[0].paths.clone(), samples))
}

fn mean_and_variance(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    let dim = samples[0].len();
    let mut mean = vec![0.0; dim];
    for s in samples {
        for (a, b) in mean.iter_mut().zip(s) {
            *a += b;
        }
    }
    mean.iter_mut().for_each(|a| *a /= n);
    let mut var = vec![0.0; dim];
    for s in samples {
        for ((v, x), mu) in var.iter_mut().zip(s).zip(&mean) {
            *v += (x - mu) * (x - mu);
        }
    }
    var.iter_mut().for_each(|v| *v /= n - 1.0);
    (mean, var)
}

fn mean_and_variance_or_single(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    if samples.len() == 1 {
        return (samples[0].clone(), vec![0.0; samples[0].len()]);
    }
    mean_and_variance(samples)
}

/// Mean and unbiased variance of S_J[p]X over the ensemble's samples.
pub fn estimate_expected(
    ensemble: &TextureEnsemble,
    bank: &FilterBank,
    m_max: usize,
    alpha: Alpha,
) -> Result<ExpectedScattering> {
    let (w, h) = ensemble.realizations[0].dims();
    if (1usize << bank.j()) > w.max(h) {
        return Err(Error::Argument(format!(
            "2^J = {} exceeds the image width {}",
            1usize << bank.j(),
            w.max(h)
        )));
    }
    let (paths, samples) = ensemble_samples(ensemble, bank, m_max, alpha)?;
    if samples.len() < 2 {
        return Err(Error::InsufficientData(
            "one sample per path leaves zero degrees of freedom".into(),
        ));
    }
    let (mean, variance) = mean_and_variance(&samples);
    let per_image = samples.len() / ensemble.len();
    let image_means: Vec<Vec<f64>> = samples
        .chunks(per_image)
        .map(|c| {
            let (m, _) = mean_and_variance_or_single(c);
            m
        })
        .collect();
    let (_, between) = mean_and_variance(&image_means);
    let standard_error = between
        .iter()
        .map(|v| (v / ensemble.len() as f64).sqrt())
        .collect();
    let mean_removed = ensemble.realizations.iter().all(|x| {
        let rms = (x.norm_sq() / x.values().len() as f64).sqrt();
        x.mean().abs() <= 1e-9 * rms.max(f64::MIN_POSITIVE)
    });
    Ok(ExpectedScattering {
        j: bank.j(),
        m_max,
        paths,
        standard_error,
        mean,
        variance,
        power: ensemble.power(),
        samples: samples.len(),
        mean_removed,
    })
}

/// Share of Σ_p |S̄X(p)|² carried by each order. Order 0 is reported as 0 and
/// left out of the normalization when the realizations were mean-removed.
pub fn order_energy_profile(est: &ExpectedScattering) -> Result<Vec<f64>> {
    let mut by_order = vec![0.0; est.m_max + 1];
    for (p, mu) in est.paths.iter().zip(&est.mean) {
        by_order[p.order()] += mu * mu;
    }
    if est.mean_removed {
        by_order[0] = 0.0;
    }
    let total: f64 = by_order.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate(
            "expected scattering is identically zero".into(),
        ));
    }
    Ok(by_order.iter().map(|e| e / total).collect())
}

/// Surrogate with the same Fourier modulus and independent uniform phases
/// (Hermitian-symmetric so the result is real). The DC term is kept and
/// self-conjugate Nyquist bins get a random sign.
pub fn phase_randomize(x: &ImageGrid, seed: u64) -> ImageGrid {
    let (w, h) = x.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phase = vec![Complex64::new(1.0, 0.0); w * h];
    for r in 0..h {
        let mr = mirror_bin(r, h);
        for c in 0..w {
            let mc = mirror_bin(c, w);
            let (i, mi) = (r * w + c, mr * w + mc);
            if i == 0 {
                continue;
            }
            if i == mi {
                phase[i] = if rng.random_bool(0.5) {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(-1.0, 0.0)
                };
            } else if i < mi {
                let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                phase[i] = Complex64::from_polar(1.0, t);
                phase[mi] = phase[i].conj();
            }
        }
    }
    let mut spec = fft2(&x.to_complex());
    for (v, p) in spec.values_mut().iter_mut().zip(&phase) {
        *v *= p;
    }
    ifft2(&spec).re()
}

/// ρ(m) = E‖S X1[Λ^m] − E S X2[Λ^m]‖² / E‖S X2[Λ^m] − E S X2[Λ^m]‖².
///
/// The numerator averages over X1's samples; the denominator is the unbiased
/// total variance of X2's order-m coefficients.
pub fn scattering_rho(
    x1: &TextureEnsemble,
    x2: &TextureEnsemble,
    bank: &FilterBank,
    m: usize,
    alpha: Alpha,
) -> Result<f64> {
    Ok(scattering_rho_orders(x1, x2, bank, &[m], alpha)?[0])
}

/// [`scattering_rho`] for several orders from a single transform of each ensemble.
pub fn scattering_rho_orders(
    x1: &TextureEnsemble,
    x2: &TextureEnsemble,
    bank: &FilterBank,
    orders: &[usize],
    alpha: Alpha,
) -> Result<Vec<f64>> {
    if x1.realizations[0].dims() != x2.realizations[0].dims() {
        return Err(Error::Shape("ensembles have different image sizes".into()));
    }
    let m_max = orders.iter().copied().max().unwrap_or(0);
    let (paths, s1) = ensemble_samples(x1, bank, m_max, alpha)?;
    let (_, s2) = ensemble_samples(x2, bank, m_max, alpha)?;
    if s2.len() < 2 {
        return Err(Error::InsufficientData(
            "reference ensemble has one sample".into(),
        ));
    }
    let (mu, var) = mean_and_variance(&s2);
    orders
        .iter()
        .map(|&m| {
            let sel: Vec<usize> = (0..paths.len())
                .filter(|&i| paths[i].order() == m)
                .collect();
            let den: f64 = sel.iter().map(|&i| var[i]).sum();
            if den <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "reference ensemble has zero order-{m} scattering variance"
                )));
            }
            let num = s1
                .iter()
                .map(|v| sel.iter().map(|&i| (v[i] - mu[i]).powi(2)).sum::<f64>())
                .sum::<f64>()
                / s1.len() as f64;
            Ok(num / den)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::textures::*;
    use super::*;
    use crate::filterbank::{build_filter_bank, FilterBankParams};
    use crate::numerics::fft::fft2_real;
    use crate::numerics::Boundary;
    use crate::scattering::scattering_transform;

    #[test]
    fn constant_process_has_zero_variance() {
        let x = ImageGrid::from_fn(32, 32, |_, _| 0.7);
        let ens = TextureEnsemble::new(vec![x.clone(), x], "constant").unwrap();
        let bank = build_filter_bank(FilterBankParams::new(3, 4, 32, 32)).unwrap();
        let est = estimate_expected(&ens, &bank, 2, Alpha::Half).unwrap();
        assert!((est.mean[0] - 0.7).abs() < 1e-10);
        assert!(est.variance.iter().all(|v| v.abs() < 1e-18));
    }

    #[test]
    fn white_noise_halves_agree() {
        let bank = build_filter_bank(
            FilterBankParams::new(2, 4, 32, 32).with_boundary(Boundary::Periodic),
        )
        .unwrap();
        let ens = white_noise_ensemble(32, 16, 3).unwrap();
        let (a, b) = ens.split(8).unwrap();
        let ea = estimate_expected(&a, &bank, 1, Alpha::Half).unwrap();
        let eb = estimate_expected(&b, &bank, 1, Alpha::Half).unwrap();
        for i in 1..ea.paths.len() {
            let se = ea.standard_error[i].hypot(eb.standard_error[i]);
            assert!(
                (ea.mean[i] - eb.mean[i]).abs() <= 3.0 * se,
                "path {}",
                ea.paths[i]
            );
        }
    }

    #[test]
    fn single_realization_is_rejected() {
        let x = binary_texture(16, 2.0, 1);
        assert!(matches!(
            TextureEnsemble::new(vec![x], "one"),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn profile_of_white_noise_sums_to_one() {
        let bank = build_filter_bank(FilterBankParams::new(3, 4, 32, 32)).unwrap();
        let ens = white_noise_ensemble(32, 4, 8).unwrap().standardized();
        let est = estimate_expected(&ens, &bank, 3, Alpha::Half).unwrap();
        assert!(est.mean_removed);
        let prof = order_energy_profile(&est).unwrap();
        assert_eq!(prof[0], 0.0);
        assert!((prof.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixture_profile_is_bounded_by_components() {
        let bank = build_filter_bank(FilterBankParams::new(3, 4, 32, 32)).unwrap();
        let a: Vec<ImageGrid> = (0..6).map(|i| gaussian_field(32, 1.0, i)).collect();
        let b: Vec<ImageGrid> = (0..6).map(|i| binary_texture(32, 6.0, 100 + i)).collect();
        let mix: Vec<ImageGrid> = a.iter().zip(&b).map(|(x, y)| x.add(y).unwrap()).collect();
        let prof = |v: Vec<ImageGrid>| {
            let e = TextureEnsemble::new(v, "t").unwrap().standardized();
            order_energy_profile(&estimate_expected(&e, &bank, 3, Alpha::Half).unwrap()).unwrap()
        };
        let (pa, pb, pm) = (prof(a), prof(b), prof(mix));
        for m in 1..=3 {
            let (lo, hi) = (pa[m].min(pb[m]), pa[m].max(pb[m]));
            let slack = 0.1 * (hi - lo) + 1e-3;
            assert!(
                pm[m] >= lo - slack && pm[m] <= hi + slack,
                "order {m}: {pm:?} vs {pa:?} {pb:?}"
            );
        }
    }

    #[test]
    fn phase_randomization_preserves_spectrum() {
        let x = binary_texture(32, 4.0, 2);
        let y = phase_randomize(&x, 11);
        let z = phase_randomize(&x, 12);
        let (fx, fy, fz) = (fft2_real(&x), fft2_real(&y), fft2_real(&z));
        for ((a, b), c) in fx.values().iter().zip(fy.values()).zip(fz.values()) {
            assert!((a.norm_sqr() - b.norm_sqr()).abs() < 1e-8);
            assert!((a.norm_sqr() - c.norm_sqr()).abs() < 1e-8);
        }
        assert_ne!(y, z);
        assert_eq!(y, phase_randomize(&x, 11));
    }

    #[test]
    fn phase_randomization_gaussianizes() {
        let x = binary_texture(256, 2.0, 3);
        let y = phase_randomize(&x, 4);
        let n = y.values().len() as f64;
        let mu = y.mean();
        let m2 = y.values().iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
        let m4 = y.values().iter().map(|v| (v - mu).powi(4)).sum::<f64>() / n;
        assert!((m4 / (m2 * m2) - 3.0).abs() < 0.5);
    }

    #[test]
    fn rho_of_split_ensemble_is_near_one() {
        let bank = build_filter_bank(FilterBankParams::new(3, 4, 32, 32)).unwrap();
        let ens = white_noise_ensemble(32, 24, 5).unwrap();
        let (a, b) = ens.split(12).unwrap();
        for m in 1..=2 {
            let r = scattering_rho(&a, &b, &bank, m, Alpha::Half).unwrap();
            assert!((0.3..=3.0).contains(&r), "rho({m}) = {r}");
        }
    }

    #[test]
    fn shifted_realizations_have_the_same_spatial_average() {
        let bank = build_filter_bank(
            FilterBankParams::new(2, 4, 32, 32).with_boundary(Boundary::Periodic),
        )
        .unwrap();
        let x = binary_texture(32, 3.0, 6);
        let base = scattering_transform(&x, &bank, 2, Alpha::Half).unwrap();
        for (dx, dy) in [(2, 0), (4, 6), (30, 2)] {
            let s = scattering_transform(&x.roll(dx, dy), &bank, 2, Alpha::Half).unwrap();
            for (a, b) in base.coeffs.iter().zip(&s.coeffs) {
                assert!((a.mean() - b.mean()).abs() < 1e-8);
            }
        }
    }
}
