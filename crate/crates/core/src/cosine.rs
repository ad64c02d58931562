//! Cosine scattering: separable DCT across the scale-difference and angle
//! variables of each path order, with low-frequency truncation, plus the
//! variance spectra used to compare raw, DCT and Karhunen–Loève bases.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::{dct_ortho, idct_ortho, ImageGrid};
use crate::scattering::{Alpha, Path, ScatteringResult};

/// Orthonormal DCT over the ragged set of order-`m` paths.
///
/// Every path is a point (s1, θ1, Δ2, θ2, …, Δm, θm) with Δi = s_i − s_{i−1}.
/// Axes are transformed one at a time (scale axes from last to first, then the
/// angle axes); along each axis the slots sharing all other coordinates form a
/// line that gets a DCT of its native length, after which each slot's
/// coordinate on that axis becomes its frequency rank.
#[derive(Debug, Clone)]
pub struct CosinePlan {
    pub m: usize,
    /// Path of each slot, in path order.
    pub paths: Vec<Path>,
    stages: Vec<Vec<Vec<usize>>>,
    /// Final frequency multi-index of each slot, in (s1, θ1, Δ2, θ2, …) axis order.
    pub frequency: Vec<Vec<usize>>,
    /// Slots ranked by total frequency, ties broken lexicographically.
    pub rank: Vec<usize>,
}

impl CosinePlan {
    pub fn new(j: usize, c: usize, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Argument("order 0 is not cosine transformed".into()));
        }
        let paths: Vec<Path> = crate::scattering::enumerate_paths(j, c, m)
            .into_iter()
            .filter(|p| p.order() == m)
            .collect();
        let mut coords: Vec<Vec<usize>> = paths
            .iter()
            .map(|p| {
                let mut prev = None;
                p.steps()
                    .iter()
                    .flat_map(|&(s, k)| {
                        let d = prev.map_or(s, |q| s - q);
                        prev = Some(s);
                        [d, k]
                    })
                    .collect()
            })
            .collect();

        let scale_axes = (0..m).rev().map(|i| 2 * i);
        let angle_axes = (0..m).map(|i| 2 * i + 1);
        let mut stages = Vec::new();
        for axis in scale_axes.chain(angle_axes) {
            let mut lines: std::collections::BTreeMap<Vec<usize>, Vec<usize>> = Default::default();
            for (slot, co) in coords.iter().enumerate() {
                let mut key = co.clone();
                key.remove(axis);
                lines.entry(key).or_default().push(slot);
            }
            let mut stage = Vec::with_capacity(lines.len());
            for (_, mut slots) in lines {
                slots.sort_by_key(|&s| coords[s][axis]);
                for (rank, &s) in slots.iter().enumerate() {
                    coords[s][axis] = rank;
                }
                stage.push(slots);
            }
            stages.push(stage);
        }
        let mut rank: Vec<usize> = (0..paths.len()).collect();
        rank.sort_by(|&a, &b| {
            let (fa, fb) = (&coords[a], &coords[b]);
            fa.iter()
                .sum::<usize>()
                .cmp(&fb.iter().sum::<usize>())
                .then_with(|| fa.cmp(fb))
        });
        Ok(Self {
            m,
            paths,
            stages,
            frequency: coords,
            rank,
        })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Transforms one vector of per-slot values in place.
    pub fn forward(&self, v: &mut [f64]) {
        let mut lane = Vec::new();
        for stage in &self.stages {
            for line in stage {
                lane.clear();
                lane.extend(line.iter().map(|&s| v[s]));
                dct_ortho(&mut lane);
                for (&s, &x) in line.iter().zip(&lane) {
                    v[s] = x;
                }
            }
        }
    }

    pub fn inverse(&self, v: &mut [f64]) {
        let mut lane = Vec::new();
        for stage in self.stages.iter().rev() {
            for line in stage {
                lane.clear();
                lane.extend(line.iter().map(|&s| v[s]));
                idct_ortho(&mut lane);
                for (&s, &x) in line.iter().zip(&lane) {
                    v[s] = x;
                }
            }
        }
    }
}

/// Cosine coefficients of one order, restricted to the kept frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineOrder {
    pub m: usize,
    /// Number of order-m paths before truncation.
    pub total: usize,
    /// Frequency multi-index of each kept coefficient, lowest total frequency first.
    pub index_map: Vec<Vec<usize>>,
    /// One grid per kept coefficient, aligned with `index_map`.
    pub coeffs: Vec<ImageGrid>,
}

impl CosineOrder {
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(ImageGrid::norm_sq).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CosineScattering {
    pub kept_fraction: f64,
    pub j: usize,
    pub c: usize,
    pub alpha: Alpha,
    pub m_max: usize,
    /// Order-0 coefficients, never transformed.
    pub order0: ImageGrid,
    pub orders: Vec<CosineOrder>,
    pub residual_energy: f64,
}

impl CosineScattering {
    fn weight(&self) -> f64 {
        let r = self.alpha.output_res(self.j);
        (1u64 << (2 * r)) as f64
    }

    /// Area-weighted energy of the kept coefficients of orders ≥ 1.
    pub fn kept_energy(&self) -> f64 {
        self.weight() * self.orders.iter().map(CosineOrder::energy).sum::<f64>()
    }

    pub fn order0_energy(&self) -> f64 {
        self.weight() * self.order0.norm_sq()
    }

    /// Flattened vector: order 0, then every kept coefficient order by order.
    pub fn feature_vector(&self) -> Vec<f64> {
        let mut v = self.order0.values().to_vec();
        for o in &self.orders {
            for g in &o.coeffs {
                v.extend_from_slice(g.values());
            }
        }
        v
    }
}

fn check_fraction(f: f64) -> Result<()> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(Error::Argument(format!("kept fraction {f} outside (0, 1]")));
    }
    Ok(())
}

/// Number of coefficients kept out of `total` for a given fraction.
pub fn kept_count(total: usize, kept_fraction: f64) -> usize {
    (kept_fraction * total as f64).round() as usize
}

pub fn cosine_compress(result: &ScatteringResult, kept_fraction: f64) -> Result<CosineScattering> {
    check_fraction(kept_fraction)?;
    let (w, h) = result.output_dims();
    let npos = w * h;
    let mut orders = Vec::with_capacity(result.m_max);
    for m in 1..=result.m_max {
        let plan = CosinePlan::new(result.j, result.c, m)?;
        if plan.is_empty() {
            continue;
        }
        let grids: Vec<&ImageGrid> = plan
            .paths
            .iter()
            .map(|p| {
                result
                    .get(p)
                    .ok_or_else(|| Error::Argument(format!("path {p} missing from result")))
            })
            .collect::<Result<_>>()?;
        let keep = kept_count(plan.len(), kept_fraction);
        let mut kept = vec![vec![0.0; npos]; keep];
        let mut v = vec![0.0; plan.len()];
        for u in 0..npos {
            for (slot, g) in grids.iter().enumerate() {
                v[slot] = g.values()[u];
            }
            plan.forward(&mut v);
            for (i, &slot) in plan.rank[..keep].iter().enumerate() {
                kept[i][u] = v[slot];
            }
        }
        orders.push(CosineOrder {
            m,
            total: plan.len(),
            index_map: plan.rank[..keep]
                .iter()
                .map(|&s| plan.frequency[s].clone())
                .collect(),
            coeffs: kept
                .into_iter()
                .map(|vals| ImageGrid::new(w, h, vals))
                .collect::<Result<_>>()?,
        });
    }
    Ok(CosineScattering {
        kept_fraction,
        j: result.j,
        c: result.c,
        alpha: result.alpha,
        m_max: result.m_max,
        order0: result.coeffs[0].clone(),
        orders,
        residual_energy: result.residual_energy,
    })
}

/// Reconstructs scattering coefficients, with dropped frequencies set to zero.
pub fn cosine_inverse(cs: &CosineScattering) -> Result<ScatteringResult> {
    let (w, h) = cs.order0.dims();
    let npos = w * h;
    let all = crate::scattering::enumerate_paths(cs.j, cs.c, cs.m_max);
    let mut coeffs: Vec<Option<ImageGrid>> = vec![None; all.len()];
    coeffs[0] = Some(cs.order0.clone());
    for o in &cs.orders {
        let plan = CosinePlan::new(cs.j, cs.c, o.m)?;
        if plan.len() != o.total || o.index_map.len() != o.coeffs.len() {
            return Err(Error::Config(format!(
                "order {} index map does not match J, C",
                o.m
            )));
        }
        let slot_of: std::collections::HashMap<&[usize], usize> = plan
            .frequency
            .iter()
            .enumerate()
            .map(|(s, f)| (f.as_slice(), s))
            .collect();
        let slots: Vec<usize> = o
            .index_map
            .iter()
            .map(|f| {
                slot_of
                    .get(f.as_slice())
                    .copied()
                    .ok_or_else(|| Error::Config(format!("unknown cosine index {f:?}")))
            })
            .collect::<Result<_>>()?;
        let mut out = vec![vec![0.0; npos]; plan.len()];
        let mut v = vec![0.0; plan.len()];
        for u in 0..npos {
            v.iter_mut().for_each(|x| *x = 0.0);
            for (g, &slot) in o.coeffs.iter().zip(&slots) {
                v[slot] = g.values()[u];
            }
            plan.inverse(&mut v);
            for (slot, x) in v.iter().enumerate() {
                out[slot][u] = *x;
            }
        }
        for (p, vals) in plan.paths.iter().zip(out) {
            let i = all
                .binary_search(p)
                .expect("plan paths are enumerated paths");
            coeffs[i] = Some(ImageGrid::new(w, h, vals)?);
        }
    }
    let coeffs: Vec<ImageGrid> = coeffs
        .into_iter()
        .map(|g| g.unwrap_or_else(|| ImageGrid::zeros(w, h)))
        .collect();
    let weight = (1u64 << (2 * cs.alpha.output_res(cs.j))) as f64;
    let mut layer_energy = vec![0.0; cs.m_max + 1];
    for (p, g) in all.iter().zip(&coeffs) {
        layer_energy[p.order()] += weight * g.norm_sq();
    }
    Ok(ScatteringResult {
        j: cs.j,
        c: cs.c,
        alpha: cs.alpha,
        m_max: cs.m_max,
        paths: all,
        coeffs,
        layer_energy,
        residual_energy: cs.residual_energy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Raw,
    Dct,
    Kl,
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Basis::Raw),
            "dct" => Ok(Basis::Dct),
            "kl" => Ok(Basis::Kl),
            other => Err(Error::Argument(format!("unknown basis '{other}'"))),
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Raw => "raw",
            Basis::Dct => "dct",
            Basis::Kl => "kl",
        })
    }
}

/// Descending variances of the order-`m` coefficients in the chosen basis.
///
/// Each (image, position) pair is one sample; variances use the unbiased
/// (n − 1) normalization.
pub fn variance_spectrum(batch: &[ScatteringResult], basis: Basis, m: usize) -> Result<Vec<f64>> {
    let first = batch
        .first()
        .ok_or_else(|| Error::Degenerate("empty batch".into()))?;
    if batch.len() < 2 {
        return Err(Error::Degenerate(
            "variance spectrum needs at least 2 results".into(),
        ));
    }
    if batch.iter().any(|r| {
        (r.j, r.c, r.alpha, r.m_max) != (first.j, first.c, first.alpha, first.m_max)
            || r.output_dims() != first.output_dims()
    }) {
        return Err(Error::Config("batch mixes transform configurations".into()));
    }
    if m == 0 || m > first.m_max {
        return Err(Error::Argument(format!(
            "order {m} outside 1..={}",
            first.m_max
        )));
    }
    let plan = CosinePlan::new(first.j, first.c, m)?;
    let dim = plan.len();
    if dim == 0 {
        return Ok(Vec::new());
    }
    let idx: Vec<usize> = plan
        .paths
        .iter()
        .map(|p| first.paths.binary_search(p).expect("enumerated path"))
        .collect();
    let npos = first.coeffs[0].values().len();
    let n = batch.len() * npos;

    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(n);
    for r in batch {
        for u in 0..npos {
            let mut v: Vec<f64> = idx.iter().map(|&i| r.coeffs[i].values()[u]).collect();
            if basis == Basis::Dct {
                plan.forward(&mut v);
            }
            samples.push(v);
        }
    }
    let mut mean = vec![0.0; dim];
    for s in &samples {
        for (a, b) in mean.iter_mut().zip(s) {
            *a += b;
        }
    }
    mean.iter_mut().for_each(|a| *a /= n as f64);
    let denom = (n - 1) as f64;

    let mut out = match basis {
        Basis::Raw | Basis::Dct => {
            let mut var = vec![0.0; dim];
            for s in &samples {
                for ((v, x), mu) in var.iter_mut().zip(s).zip(&mean) {
                    *v += (x - mu) * (x - mu);
                }
            }
            var.iter().map(|v| v / denom).collect::<Vec<f64>>()
        }
        Basis::Kl => {
            let mut cov = DMatrix::<f64>::zeros(dim, dim);
            let mut d = vec![0.0; dim];
            for s in &samples {
                for (i, (x, mu)) in s.iter().zip(&mean).enumerate() {
                    d[i] = x - mu;
                }
                for a in 0..dim {
                    for b in a..dim {
                        cov[(a, b)] += d[a] * d[b];
                    }
                }
            }
            for a in 0..dim {
                for b in a..dim {
                    let v = cov[(a, b)] / denom;
                    cov[(a, b)] = v;
                    cov[(b, a)] = v;
                }
            }
            cov.symmetric_eigenvalues()
                .iter()
                .map(|v| v.max(0.0))
                .collect()
        }
    };
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

/// Mean of the normalized cumulative variance curve; 1 means all variance
/// sits in the first coefficient.
pub fn cumulative_area(spectrum: &[f64]) -> f64 {
    let total: f64 = spectrum.iter().sum();
    if spectrum.is_empty() || total <= 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut area = 0.0;
    for v in spectrum {
        acc += v;
        area += acc / total;
    }
    area / spectrum.len() as f64
}
