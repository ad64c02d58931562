//! Affine-space PCA classifier on scattering features.
//!
//! Each class is modeled by its centroid plus the span of its top `d`
//! principal directions; a signal goes to the class whose affine space
//! leaves the smallest residual.

use std::collections::BTreeMap;

use log::warn;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cosine::CosineScattering;
use crate::error::{Error, Result};
use crate::scattering::ScatteringResult;

pub const DEFAULT_D_GRID: [usize; 8] = [1, 2, 5, 10, 20, 40, 80, 140];
pub const DEFAULT_HOLDOUT: f64 = 0.2;

/// Degenerate paths (sup norm below this) are left unscaled.
const EQUALIZATION_FLOOR: f64 = 1e-12;

/// Flattened coefficients, `block` consecutive values per path (or per cosine
/// coefficient).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub block: usize,
    pub config_hash: String,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, block: usize, config_hash: impl Into<String>) -> Result<Self> {
        if block == 0 || !values.len().is_multiple_of(block) {
            return Err(Error::Shape(format!(
                "{} values do not split into blocks of {block}",
                values.len()
            )));
        }
        Ok(Self {
            values,
            block,
            config_hash: config_hash.into(),
        })
    }

    pub fn from_scattering(s: &ScatteringResult, config_hash: impl Into<String>) -> Self {
        let (w, h) = s.output_dims();
        Self {
            values: s.feature_vector(),
            block: w * h,
            config_hash: config_hash.into(),
        }
    }

    pub fn from_cosine(s: &CosineScattering, config_hash: impl Into<String>) -> Self {
        Self {
            values: s.feature_vector(),
            block: s.order0.values().len(),
            config_hash: config_hash.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn blocks(&self) -> usize {
        self.values.len() / self.block
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.config_hash != other.config_hash {
            return Err(Error::Config(format!(
                "feature configuration {} vs {}",
                self.config_hash, other.config_hash
            )));
        }
        if self.values.len() != other.values.len() || self.block != other.block {
            return Err(Error::Config(format!(
                "feature length {} vs {}",
                self.values.len(),
                other.values.len()
            )));
        }
        Ok(())
    }
}

/// Per-path sup over the training set of ‖S_J[p]x‖.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualizationTable {
    pub norms: Vec<f64>,
    pub block: usize,
    pub config_hash: String,
}

impl EqualizationTable {
    pub fn fit(train: &[FeatureVector]) -> Result<Self> {
        let first = train
            .first()
            .ok_or_else(|| Error::EmptyDataset("no training vectors".into()))?;
        let mut norms = vec![0.0f64; first.blocks()];
        for f in train {
            first.check_compatible(f)?;
            for (n, chunk) in norms.iter_mut().zip(f.values.chunks(f.block)) {
                *n = n.max(chunk.iter().map(|v| v * v).sum::<f64>().sqrt());
            }
        }
        for n in norms.iter_mut() {
            if *n < EQUALIZATION_FLOOR {
                *n = 1.0;
            }
        }
        Ok(Self {
            norms,
            block: first.block,
            config_hash: first.config_hash.clone(),
        })
    }

    /// Table that leaves features unchanged.
    pub fn identity(blocks: usize, block: usize, config_hash: impl Into<String>) -> Self {
        Self {
            norms: vec![1.0; blocks],
            block,
            config_hash: config_hash.into(),
        }
    }
}

pub fn equalize(features: &FeatureVector, table: &EqualizationTable) -> Result<FeatureVector> {
    if features.config_hash != table.config_hash
        || features.block != table.block
        || features.blocks() != table.norms.len()
    {
        return Err(Error::Config(format!(
            "features ({}, {} blocks) do not match equalization table ({}, {} blocks)",
            features.config_hash,
            features.blocks(),
            table.config_hash,
            table.norms.len()
        )));
    }
    let values = features
        .values
        .chunks(features.block)
        .zip(&table.norms)
        .flat_map(|(chunk, n)| chunk.iter().map(move |v| v / n))
        .collect();
    Ok(FeatureVector {
        values,
        block: features.block,
        config_hash: features.config_hash.clone(),
    })
}

/// Centroid plus `d` orthonormal principal directions of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineModel {
    pub label: u32,
    pub centroid: Vec<f64>,
    /// `d` rows, each of the feature dimension.
    pub basis: Vec<Vec<f64>>,
    pub d: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl AffineModel {
    pub fn dim(&self) -> usize {
        self.centroid.len()
    }

    /// Orthogonal projection of `x` onto the affine space.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let r: Vec<f64> = x.iter().zip(&self.centroid).map(|(a, c)| a - c).collect();
        let mut p = self.centroid.clone();
        for v in &self.basis {
            let t = dot(v, &r);
            for (pi, vi) in p.iter_mut().zip(v) {
                *pi += t * vi;
            }
        }
        p
    }

    /// ‖x − P_A x‖ computed from the explicit projection.
    pub fn projection_residual(&self, x: &[f64]) -> f64 {
        let p = self.project(x);
        x.iter()
            .zip(&p)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// ‖P_{V⊥}(x − centroid)‖, removing each basis component from x − c.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut r: Vec<f64> = x.iter().zip(&self.centroid).map(|(a, c)| a - c).collect();
        let coords: Vec<f64> = self.basis.iter().map(|v| dot(v, &r)).collect();
        for (v, t) in self.basis.iter().zip(coords) {
            r.iter_mut().zip(v).for_each(|(ri, vi)| *ri -= t * vi);
        }
        dot(&r, &r).sqrt()
    }
}

/// Principal directions as rows, sign-normalized so the largest-magnitude
/// entry of each is positive (first such entry on ties).
fn principal_directions(centered: &DMatrix<f64>, d: usize) -> Vec<Vec<f64>> {
    if d == 0 {
        return Vec::new();
    }
    let svd = centered.clone().svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    order
        .into_iter()
        .take(d)
        .map(|i| {
            let mut row: Vec<f64> = v_t.row(i).iter().copied().collect();
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if v.abs() > row[best].abs() {
                    best = j;
                }
            }
            if row[best] < 0.0 {
                row.iter_mut().for_each(|v| *v = -*v);
            }
            row
        })
        .collect()
}

fn group_by_label(data: &[(FeatureVector, u32)]) -> Result<BTreeMap<u32, Vec<&FeatureVector>>> {
    let first = &data
        .first()
        .ok_or_else(|| Error::EmptyDataset("no labeled vectors".into()))?
        .0;
    let mut classes: BTreeMap<u32, Vec<&FeatureVector>> = BTreeMap::new();
    for (f, label) in data {
        first.check_compatible(f)?;
        classes.entry(*label).or_default().push(f);
    }
    Ok(classes)
}

fn fit_class(label: u32, members: &[&FeatureVector], d: usize) -> Result<AffineModel> {
    let n = members.len();
    let dim = members[0].len();
    if n < d + 1 {
        return Err(Error::InsufficientData(format!(
            "class {label} has {n} training vectors, d = {d} needs {}",
            d + 1
        )));
    }
    if d > dim {
        return Err(Error::Argument(format!(
            "d = {d} exceeds the feature dimension {dim}"
        )));
    }
    let mut centroid = vec![0.0; dim];
    for f in members {
        for (c, v) in centroid.iter_mut().zip(&f.values) {
            *c += v;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= n as f64);
    let centered = DMatrix::from_fn(n, dim, |i, j| members[i].values[j] - centroid[j]);
    Ok(AffineModel {
        label,
        centroid,
        basis: principal_directions(&centered, d),
        d,
    })
}

/// One model per label, in ascending label order.
pub fn fit_affine_models(train: &[(FeatureVector, u32)], d: usize) -> Result<Vec<AffineModel>> {
    let classes = group_by_label(train)?;
    let classes: Vec<(u32, Vec<&FeatureVector>)> = classes.into_iter().collect();
    classes
        .par_iter()
        .map(|(label, members)| fit_class(*label, members, d))
        .collect()
}

/// Label with the smallest residual (lowest label on ties) and every
/// model's residual in model order.
pub fn classify(x: &FeatureVector, models: &[AffineModel]) -> Result<(u32, Vec<f64>)> {
    let first = models
        .first()
        .ok_or_else(|| Error::Argument("no models to classify against".into()))?;
    if models.iter().any(|m| m.d != first.d) {
        return Err(Error::Config("models have different dimensions d".into()));
    }
    if models.iter().any(|m| m.dim() != x.len()) {
        return Err(Error::Config(format!(
            "feature length {} vs model dimension {}",
            x.len(),
            first.dim()
        )));
    }
    let residuals: Vec<f64> = models.iter().map(|m| m.residual(&x.values)).collect();
    let mut best = 0;
    for (i, (r, m)) in residuals.iter().zip(models).enumerate().skip(1) {
        let (rb, lb) = (residuals[best], models[best].label);
        if *r < rb || (*r == rb && m.label < lb) {
            best = i;
        }
    }
    Ok((models[best].label, residuals))
}

/// Fraction of misclassified vectors.
pub fn error_rate(models: &[AffineModel], data: &[(FeatureVector, u32)]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("no evaluation vectors".into()));
    }
    let wrong: Vec<bool> = data
        .par_iter()
        .map(|(f, label)| classify(f, models).map(|(pred, _)| pred != *label))
        .collect::<Result<_>>()?;
    Ok(wrong.iter().filter(|w| **w).count() as f64 / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub d: usize,
    /// Validation error per evaluated candidate, in grid order.
    pub errors: Vec<(usize, f64)>,
}

/// Stratified split: per class, a seeded shuffle whose first
/// round(holdout·n) members are held out.
pub fn stratified_split(
    data: &[(FeatureVector, u32)],
    holdout_fraction: f64,
    seed: u64,
) -> Result<(Vec<(FeatureVector, u32)>, Vec<(FeatureVector, u32)>)> {
    if !(holdout_fraction > 0.0 && holdout_fraction <= 0.5) {
        return Err(Error::Argument(format!(
            "holdout fraction {holdout_fraction} outside (0, 0.5]"
        )));
    }
    let mut by_label: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, (_, label)) in data.iter().enumerate() {
        by_label.entry(*label).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut fit, mut val) = (Vec::new(), Vec::new());
    for (label, mut idx) in by_label {
        idx.shuffle(&mut rng);
        let k = (holdout_fraction * idx.len() as f64).round() as usize;
        if k == 0 || k == idx.len() {
            return Err(Error::InsufficientData(format!(
                "class {label} with {} vectors does not survive a {holdout_fraction} holdout",
                idx.len()
            )));
        }
        val.extend(idx[..k].iter().map(|&i| data[i].clone()));
        fit.extend(idx[k..].iter().map(|&i| data[i].clone()));
    }
    Ok((fit, val))
}

/// Picks d by validation error on a stratified holdout; ties go to the
/// smallest d. Candidates some class cannot support are skipped.
pub fn cross_validate(
    train: &[(FeatureVector, u32)],
    d_grid: &[usize],
    holdout_fraction: f64,
    seed: u64,
) -> Result<CrossValidation> {
    if d_grid.is_empty() {
        return Err(Error::Argument("empty d grid".into()));
    }
    let (fit, val) = stratified_split(train, holdout_fraction, seed)?;
    let classes = group_by_label(&fit)?;
    let min_count = classes.values().map(Vec::len).min().unwrap_or(0);
    let dim = fit[0].0.len();
    let mut errors = Vec::new();
    for &d in d_grid {
        if d + 1 > min_count || d > dim {
            warn!(
                "skipping d = {d}: smallest class has {min_count} fitting vectors, dimension {dim}"
            );
            continue;
        }
        let models = fit_affine_models(&fit, d)?;
        errors.push((d, error_rate(&models, &val)?));
    }
    let best = errors
        .iter()
        .fold(None::<(usize, f64)>, |acc, &(d, e)| match acc {
            Some((bd, be)) if be < e || (be == e && bd <= d) => Some((bd, be)),
            _ => Some((d, e)),
        })
        .ok_or_else(|| {
            Error::InsufficientData("no candidate d is supported by the training data".into())
        })?;
    Ok(CrossValidation { d: best.0, errors })
}

/// σ_d²: mean over classes of E‖x − P_k x‖² / E‖x‖². λ_d: pooled
/// E min_{k'≠k} ‖x − P_k' x‖² over pooled E ‖x − P_k x‖².
pub fn model_diagnostics(
    models: &[AffineModel],
    eval: &[(FeatureVector, u32)],
) -> Result<(f64, f64)> {
    let mut per_class: BTreeMap<u32, (f64, f64, usize)> = BTreeMap::new();
    let (mut own_total, mut other_total) = (0.0, 0.0);
    for (f, label) in eval {
        let (_, res) = classify(f, models)?;
        let k = models
            .iter()
            .position(|m| m.label == *label)
            .ok_or_else(|| Error::Argument(format!("evaluation label {label} has no model")))?;
        let own = res[k] * res[k];
        let other = res
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .map(|(_, r)| r * r)
            .fold(f64::INFINITY, f64::min);
        let e = per_class.entry(*label).or_insert((0.0, 0.0, 0));
        e.0 += own;
        e.1 += dot(&f.values, &f.values);
        e.2 += 1;
        own_total += own;
        other_total += other;
    }
    for m in models {
        if !per_class.contains_key(&m.label) {
            return Err(Error::InsufficientData(format!(
                "class {} has no evaluation vectors",
                m.label
            )));
        }
    }
    let sigma = per_class
        .values()
        .map(|(r, n, _)| if *n > 0.0 { r / n } else { 0.0 })
        .sum::<f64>()
        / per_class.len() as f64;
    let lambda = if own_total > 0.0 {
        other_total / own_total
    } else {
        f64::INFINITY
    };
    Ok((sigma, lambda))
}
