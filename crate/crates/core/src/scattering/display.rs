use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use super::path::Path;
use super::transform::ScatteringResult;
use crate::error::{Error, Result};
use crate::filterbank::FilterBank;
use crate::numerics::fft::{fft2, ifft2};
use crate::numerics::{ComplexGrid, ImageGrid};

/// ‖|ψ_{s1,k1}| ⋆ ψ_{s2,k2}‖² for every frequency-decreasing pair.
pub fn cascade_filter_norms(bank: &FilterBank) -> HashMap<((usize, usize), (usize, usize)), f64> {
    let (w, h) = bank.padded_dims();
    let n = (w * h) as f64;
    let mut out = HashMap::new();
    for s1 in 0..bank.j() {
        for k1 in 0..bank.c() {
            let m = ifft2(&bank.psi_hat[s1][k1]).modulus();
            let spec = fft2(&m.to_complex());
            for s2 in s1 + 1..bank.j() {
                for k2 in 0..bank.c() {
                    let e = spec
                        .values()
                        .iter()
                        .zip(bank.psi_hat[s2][k2].values())
                        .fold(0.0, |acc, (a, b)| acc + (a * b).norm_sqr());
                    out.insert(((s1, k1), (s2, k2)), e / n);
                }
            }
        }
    }
    out
}

/// Which order-1 and order-2 tile each pixel of a `size`×`size` panel belongs to.
pub struct Tiling {
    pub size: usize,
    pub order1: Vec<(usize, usize)>,
    /// `None` where the order-1 tile has no coarser children.
    pub order2: Vec<Option<(usize, usize)>>,
}

fn pixel_polar(c: usize, r: usize, size: usize) -> (f64, f64) {
    let wx = PI * (2.0 * c as f64 + 1.0 - size as f64) / size as f64;
    let wy = PI * (size as f64 - 2.0 * r as f64 - 1.0) / size as f64;
    (wx.hypot(wy), wy.atan2(wx).rem_euclid(PI))
}

/// Splits `items` (already sorted) into consecutive runs with sizes proportional to `weights`.
fn split_by_weight(len: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let mut bounds = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        let frac = if total > 0.0 { acc / total } else { 1.0 };
        bounds.push(((frac * len as f64).round() as usize).min(len));
    }
    if let Some(last) = bounds.last_mut() {
        *last = len;
    }
    bounds
}

/// Frequency-plane partition: dyadic annuli π2^{-s-1}..π2^{-s} split into
/// sectors of width π/C (mirrored through the origin); the outer annulus
/// reaches the panel corners and the central disk joins the coarsest annulus.
/// Each order-1 tile is then divided radially by s2 (coarsest innermost) and
/// angularly by k2, with pixel areas proportional to ‖|ψ1|⋆ψ2‖².
pub fn tiling(bank: &FilterBank, size: usize) -> Tiling {
    let (j, c) = (bank.j(), bank.c());
    let norms = cascade_filter_norms(bank);
    let mut order1 = vec![(0, 0); size * size];
    let mut members: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for r in 0..size {
        for col in 0..size {
            let (rho, theta) = pixel_polar(col, r, size);
            let s = if rho >= PI / 2.0 {
                0
            } else {
                ((PI / rho).log2().ceil() as usize)
                    .saturating_sub(1)
                    .min(j - 1)
            };
            let k = ((theta / (PI / c as f64)).round() as usize) % c;
            let idx = r * size + col;
            order1[idx] = (s, k);
            members.entry((s, k)).or_default().push(idx);
        }
    }

    let mut order2 = vec![None; size * size];
    let mut keys: Vec<_> = members.keys().copied().collect();
    keys.sort();
    for key in keys {
        let (s1, k1) = key;
        if s1 + 1 >= j {
            continue;
        }
        let mut pix = members[&key].clone();
        let polar = |i: usize| pixel_polar(i % size, i / size, size);
        pix.sort_by(|&a, &b| polar(a).0.total_cmp(&polar(b).0).then(a.cmp(&b)));
        // innermost band is the coarsest s2
        let scales: Vec<usize> = (s1 + 1..j).rev().collect();
        let band_weights: Vec<f64> = scales
            .iter()
            .map(|&s2| (0..c).map(|k2| norms[&((s1, k1), (s2, k2))]).sum())
            .collect();
        let bounds = split_by_weight(pix.len(), &band_weights);
        let mut start = 0;
        for (bi, &s2) in scales.iter().enumerate() {
            let mut band = pix[start..bounds[bi]].to_vec();
            start = bounds[bi];
            // angle measured relative to the tile's center direction
            let center = k1 as f64 * PI / c as f64;
            let rel = |i: usize| {
                let d = polar(i).1 - center;
                (d + PI / 2.0).rem_euclid(PI) - PI / 2.0
            };
            band.sort_by(|&a, &b| rel(a).total_cmp(&rel(b)).then(a.cmp(&b)));
            let weights: Vec<f64> = (0..c).map(|k2| norms[&((s1, k1), (s2, k2))]).collect();
            let cuts = split_by_weight(band.len(), &weights);
            let mut b0 = 0;
            for (k2, &b1) in cuts.iter().enumerate() {
                for &i in &band[b0..b1] {
                    order2[i] = Some((s2, k2));
                }
                b0 = b1;
            }
        }
    }
    Tiling {
        size,
        order1,
        order2,
    }
}

/// Piecewise-constant frequency display of the coefficients at grid position `u`:
/// order 1 on the left half, order 2 on the right half of a `2·size`×`size` image.
pub fn render_display(
    result: &ScatteringResult,
    bank: &FilterBank,
    u: (usize, usize),
    size: usize,
) -> Result<ImageGrid> {
    if result.m_max < 2 {
        return Err(Error::Argument(
            "display needs coefficients up to order 2".into(),
        ));
    }
    if (result.j, result.c) != (bank.j(), bank.c()) {
        return Err(Error::Config("result and bank disagree on J or C".into()));
    }
    let (ow, oh) = result.output_dims();
    if u.0 >= ow || u.1 >= oh {
        return Err(Error::Argument(format!(
            "position ({}, {}) outside the {ow}x{oh} coefficient grid",
            u.0, u.1
        )));
    }
    if size < 2 {
        return Err(Error::Argument("panel size must be at least 2".into()));
    }
    let value = |steps: Vec<(usize, usize)>| -> Result<f64> {
        let p = Path::new(steps)?;
        result
            .get(&p)
            .map(|g| g.get(u.0, u.1))
            .ok_or_else(|| Error::Argument(format!("path {p} missing from result")))
    };
    let t = tiling(bank, size);
    let mut out = ImageGrid::zeros(2 * size, size);
    for r in 0..size {
        for c in 0..size {
            let i = r * size + c;
            let (s1, k1) = t.order1[i];
            let v1 = value(vec![(s1, k1)])?;
            out.set(c, r, v1);
            let v2 = match t.order2[i] {
                Some(step) => value(vec![(s1, k1), step])?,
                None => v1,
            };
            out.set(size + c, r, v2);
        }
    }
    Ok(out)
}

/// |ψ̂| of one filter, shifted so zero frequency sits at the center.
pub fn centered_modulus(g: &ComplexGrid) -> ImageGrid {
    let (w, h) = g.dims();
    ImageGrid::from_fn(w, h, |c, r| {
        let v: Complex64 = g.get((c + w - w / 2) % w, (r + h - h / 2) % h);
        v.norm()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::{build_filter_bank, FilterBankParams};
    use crate::scattering::{scattering_transform, Alpha};

    fn setup() -> (FilterBank, ScatteringResult) {
        let bank = build_filter_bank(FilterBankParams::new(3, 6, 32, 32)).unwrap();
        let x = ImageGrid::from_fn(32, 32, |c, r| ((c * 7 + r * 3) % 5) as f64);
        let res = scattering_transform(&x, &bank, 2, Alpha::Half).unwrap();
        (bank, res)
    }

    #[test]
    fn equal_coefficients_give_uniform_image() {
        let (bank, mut res) = setup();
        for g in &mut res.coeffs {
            g.values_mut().iter_mut().for_each(|v| *v = 0.25);
        }
        let img = render_display(&res, &bank, (0, 0), 64).unwrap();
        assert!(img.values().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn single_order_one_coefficient_lights_one_tile() {
        let (bank, mut res) = setup();
        for g in &mut res.coeffs {
            g.values_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let target = Path::new(vec![(1, 2)]).unwrap();
        let i = res.paths.binary_search(&target).unwrap();
        res.coeffs[i].values_mut().iter_mut().for_each(|v| *v = 1.0);
        let size = 128;
        let img = render_display(&res, &bank, (1, 1), size).unwrap();
        let t = tiling(&bank, size);
        let mut lit_count = 0;
        for r in 0..size {
            for c in 0..size {
                let lit = img.get(c, r) == 1.0;
                assert_eq!(lit, t.order1[r * size + c] == (1, 2));
                if lit {
                    lit_count += 1;
                    let (rho, theta) = pixel_polar(c, r, size);
                    assert!((PI / 4.0..PI / 2.0).contains(&rho));
                    assert!((theta - PI / 3.0).abs() <= PI / 12.0 + 1e-9);
                }
            }
        }
        assert!(lit_count > 0);
    }

    #[test]
    fn order_two_areas_follow_cascade_norms() {
        let bank = build_filter_bank(FilterBankParams::new(3, 6, 32, 32)).unwrap();
        let norms = cascade_filter_norms(&bank);
        let size = 512;
        let t = tiling(&bank, size);
        let mut area: HashMap<((usize, usize), (usize, usize)), f64> = HashMap::new();
        let mut parent_area: HashMap<(usize, usize), f64> = HashMap::new();
        for i in 0..size * size {
            *parent_area.entry(t.order1[i]).or_default() += 1.0;
            if let Some(step) = t.order2[i] {
                *area.entry((t.order1[i], step)).or_default() += 1.0;
            }
        }
        for s1 in 0..2 {
            for k1 in 0..6 {
                let total: f64 = norms
                    .iter()
                    .filter(|(key, _)| key.0 == (s1, k1))
                    .map(|(_, v)| v)
                    .sum();
                for ((p, q), v) in norms.iter().filter(|(key, _)| key.0 == (s1, k1)) {
                    let expected = parent_area[p] * v / total;
                    if expected < 50.0 {
                        continue;
                    }
                    let got = area.get(&(*p, *q)).copied().unwrap_or(0.0);
                    assert!(
                        (got / expected - 1.0).abs() < 0.2,
                        "{p:?} {q:?}: {got} vs {expected}"
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_bad_position_and_order() {
        let (bank, res) = setup();
        assert!(render_display(&res, &bank, (99, 0), 32).is_err());
        let x = ImageGrid::from_fn(32, 32, |c, _| c as f64);
        let low = scattering_transform(&x, &bank, 1, Alpha::Half).unwrap();
        assert!(render_display(&low, &bank, (0, 0), 32).is_err());
    }
}
