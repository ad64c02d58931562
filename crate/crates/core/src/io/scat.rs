//! SCAT container: little-endian sections with a table of contents and a
//! CRC32 after every section.
//!
//! ```text
//! "SCAT" | version u16 | section count u16
//! count × { tag [u8;4] | reserved u32 | offset u64 | length u64 }
//! per section: payload (length bytes) | crc32 u32
//! ```

use std::fs;
use std::path::Path as FsPath;

use num_complex::Complex64;

use super::config::{check_hash, RunConfig};
use crate::classifier::{AffineModel, EqualizationTable, FeatureVector};
use crate::cosine::{CosineOrder, CosineScattering};
use crate::error::{Error, Result};
use crate::filterbank::FilterBank;
use crate::numerics::{ComplexGrid, ImageGrid};
use crate::scattering::{Path, ScatteringResult};

pub const MAGIC: [u8; 4] = *b"SCAT";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 8;
const ENTRY_LEN: usize = 24;

pub const TAG_CONFIG: [u8; 4] = *b"CONF";
pub const TAG_BANK: [u8; 4] = *b"BANK";
pub const TAG_PATHS: [u8; 4] = *b"PATH";
pub const TAG_COSINE_INDEX: [u8; 4] = *b"CIDX";
pub const TAG_COEFFS: [u8; 4] = *b"COEF";
pub const TAG_LABELS: [u8; 4] = *b"LABL";
pub const TAG_EQUALIZATION: [u8; 4] = *b"EQLZ";
pub const TAG_MODELS: [u8; 4] = *b"MODL";

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub tag: [u8; 4],
    pub data: Vec<u8>,
}

fn tag_name(tag: &[u8; 4]) -> String {
    String::from_utf8_lossy(tag).into_owned()
}

pub fn encode_container(sections: &[Section]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(sections.len() as u16).to_le_bytes());
    let mut offset = (HEADER_LEN + ENTRY_LEN * sections.len()) as u64;
    for s in sections {
        out.extend_from_slice(&s.tag);
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&offset.to_le_bytes());
        out.extend_from_slice(&(s.data.len() as u64).to_le_bytes());
        offset += s.data.len() as u64 + 4;
    }
    for s in sections {
        out.extend_from_slice(&s.data);
        out.extend_from_slice(&crc32fast::hash(&s.data).to_le_bytes());
    }
    out
}

pub fn decode_container(bytes: &[u8]) -> Result<Vec<Section>> {
    let mut r = Reader::new(bytes, 0);
    if r.take(4)? != MAGIC {
        return Err(Error::format(0, "not a SCAT container"));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Version {
            found: version,
            expected: VERSION,
        });
    }
    let count = r.u16()? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let at = r.pos;
        let tag: [u8; 4] = r.take(4)?.try_into().unwrap();
        r.u32()?;
        let (offset, len) = (r.u64()?, r.u64()?);
        entries.push((at, tag, offset, len));
    }
    entries
        .into_iter()
        .map(|(at, tag, offset, len)| {
            let start = usize::try_from(offset).ok();
            let end = start.and_then(|s| s.checked_add(usize::try_from(len).ok()?));
            let (start, end) = match (start, end) {
                (Some(s), Some(e)) if e.checked_add(4).is_some_and(|t| t <= bytes.len()) => (s, e),
                _ => {
                    return Err(Error::format(
                        at as u64,
                        format!(
                            "section {} extends past the end of the file",
                            tag_name(&tag)
                        ),
                    ))
                }
            };
            let data = &bytes[start..end];
            let stored = u32::from_le_bytes(bytes[end..end + 4].try_into().unwrap());
            if crc32fast::hash(data) != stored {
                return Err(Error::Checksum(format!("section {}", tag_name(&tag))));
            }
            Ok(Section {
                tag,
                data: data.to_vec(),
            })
        })
        .collect()
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for &x in v {
            self.f64(x);
        }
    }
    fn complex(&mut self, g: &ComplexGrid) {
        for z in g.values() {
            self.f64(z.re);
            self.f64(z.im);
        }
    }
}

/// Cursor over one section; errors carry absolute file offsets.
struct Reader<'a> {
    bytes: &'a [u8],
    base: usize,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], base: usize) -> Self {
        Self {
            bytes,
            base,
            pos: 0,
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(e) => {
                let s = &self.bytes[self.pos..e];
                self.pos = e;
                Ok(s)
            }
            None => Err(Error::format(
                (self.base + self.pos) as u64,
                format!("need {n} bytes, {} left", self.bytes.len() - self.pos),
            )),
        }
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| self.err("length overflow"))?,
        )?;
        Ok(raw
            .chunks(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
    fn complex(&mut self, w: usize, h: usize) -> Result<ComplexGrid> {
        let v = self.f64s(2 * w * h)?;
        Ok(ComplexGrid::from_fn(w, h, |c, r| {
            let i = 2 * (r * w + c);
            Complex64::new(v[i], v[i + 1])
        }))
    }
    fn err(&self, msg: &str) -> Error {
        Error::format((self.base + self.pos) as u64, msg)
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.err("trailing bytes in section"));
        }
        Ok(())
    }
}

/// Per-item energies and flattened coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientItem {
    /// ‖x‖² of the input image.
    pub input_energy: f64,
    /// Stored energy per order, area-weighted.
    pub layer_energy: Vec<f64>,
    pub residual_energy: f64,
    pub values: Vec<f64>,
}

/// Kept cosine indices of one order.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineIndex {
    pub m: usize,
    pub total: usize,
    pub index_map: Vec<Vec<usize>>,
}

/// Transformed images sharing one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientBatch {
    pub config: RunConfig,
    /// Every frequency-decreasing path up to m_max, in canonical order.
    pub paths: Vec<Path>,
    /// Present for cosine batches.
    pub cosine: Option<Vec<CosineIndex>>,
    pub out_dims: (usize, usize),
    pub items: Vec<CoefficientItem>,
    pub labels: Option<Vec<u32>>,
}

impl CoefficientBatch {
    /// `inputs` pairs each result with ‖x‖² of its image.
    pub fn from_scattering(config: RunConfig, inputs: &[(ScatteringResult, f64)]) -> Result<Self> {
        let first = &inputs
            .first()
            .ok_or_else(|| Error::EmptyDataset("no scattering results".into()))?
            .0;
        let items = inputs
            .iter()
            .map(|(r, e)| {
                if r.paths != first.paths || r.output_dims() != first.output_dims() {
                    return Err(Error::Config("results have different layouts".into()));
                }
                Ok(CoefficientItem {
                    input_energy: *e,
                    layer_energy: r.layer_energy.clone(),
                    residual_energy: r.residual_energy,
                    values: r.feature_vector(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            config,
            paths: first.paths.clone(),
            cosine: None,
            out_dims: first.output_dims(),
            items,
            labels: None,
        })
    }

    pub fn from_cosine(config: RunConfig, inputs: &[(CosineScattering, f64)]) -> Result<Self> {
        let first = &inputs
            .first()
            .ok_or_else(|| Error::EmptyDataset("no cosine results".into()))?
            .0;
        let index: Vec<CosineIndex> = first
            .orders
            .iter()
            .map(|o| CosineIndex {
                m: o.m,
                total: o.total,
                index_map: o.index_map.clone(),
            })
            .collect();
        let weight = {
            let s = (1usize << first.alpha.output_res(first.j)) as f64;
            s * s
        };
        let items = inputs
            .iter()
            .map(|(cs, e)| {
                let mut layer_energy = vec![weight * cs.order0.norm_sq()];
                layer_energy.extend(cs.orders.iter().map(|o| weight * o.energy()));
                CoefficientItem {
                    input_energy: *e,
                    layer_energy,
                    residual_energy: cs.residual_energy,
                    values: cs.feature_vector(),
                }
            })
            .collect();
        Ok(Self {
            config,
            paths: crate::scattering::enumerate_paths(first.j, first.c, first.m_max),
            cosine: Some(index),
            out_dims: first.order0.dims(),
            items,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != self.items.len() {
            return Err(Error::Shape(format!(
                "{} labels for {} items",
                labels.len(),
                self.items.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn block(&self) -> usize {
        self.out_dims.0 * self.out_dims.1
    }

    /// Coefficients per item.
    pub fn item_len(&self) -> usize {
        let blocks = match &self.cosine {
            None => self.paths.len(),
            Some(idx) => 1 + idx.iter().map(|o| o.index_map.len()).sum::<usize>(),
        };
        blocks * self.block()
    }

    pub fn config_hash(&self) -> String {
        self.config.config_hash()
    }

    pub fn feature_vectors(&self) -> Vec<FeatureVector> {
        let hash = self.config_hash();
        self.items
            .iter()
            .map(|it| FeatureVector {
                values: it.values.clone(),
                block: self.block(),
                config_hash: hash.clone(),
            })
            .collect()
    }

    fn grids(&self, values: &[f64]) -> Vec<ImageGrid> {
        let (w, h) = self.out_dims;
        values
            .chunks(w * h)
            .map(|c| ImageGrid::from_fn(w, h, |x, y| c[y * w + x]))
            .collect()
    }

    /// Item `i` as a scattering result (decompressing cosine batches).
    pub fn scattering(&self, i: usize) -> Result<ScatteringResult> {
        match &self.cosine {
            Some(_) => crate::cosine::cosine_inverse(&self.cosine_item(i)?),
            None => {
                let it = self.item(i)?;
                Ok(ScatteringResult {
                    j: self.config.j,
                    c: self.config.c,
                    alpha: self.config.alpha,
                    m_max: self.config.m_max,
                    paths: self.paths.clone(),
                    coeffs: self.grids(&it.values),
                    layer_energy: it.layer_energy.clone(),
                    residual_energy: it.residual_energy,
                })
            }
        }
    }

    pub fn cosine_item(&self, i: usize) -> Result<CosineScattering> {
        let idx = self
            .cosine
            .as_ref()
            .ok_or_else(|| Error::Config("not a cosine batch".into()))?;
        let it = self.item(i)?;
        let mut grids = self.grids(&it.values).into_iter();
        let order0 = grids.next().expect("order 0 block");
        let orders = idx
            .iter()
            .map(|o| CosineOrder {
                m: o.m,
                total: o.total,
                index_map: o.index_map.clone(),
                coeffs: grids.by_ref().take(o.index_map.len()).collect(),
            })
            .collect();
        Ok(CosineScattering {
            kept_fraction: self.config.kept_fraction.unwrap_or(1.0),
            j: self.config.j,
            c: self.config.c,
            alpha: self.config.alpha,
            m_max: self.config.m_max,
            order0,
            orders,
            residual_energy: it.residual_energy,
        })
    }

    fn item(&self, i: usize) -> Result<&CoefficientItem> {
        self.items
            .get(i)
            .ok_or_else(|| Error::Argument(format!("item {i} out of range ({})", self.items.len())))
    }
}

/// Trained classifier with its equalization table.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub config: RunConfig,
    pub d: usize,
    pub table: EqualizationTable,
    pub models: Vec<AffineModel>,
}

#[derive(Debug, Clone)]
pub enum ScatPayload {
    Bank { config: RunConfig, bank: FilterBank },
    Coefficients(CoefficientBatch),
    Models(ModelBundle),
}

impl ScatPayload {
    pub fn config(&self) -> &RunConfig {
        match self {
            ScatPayload::Bank { config, .. } => config,
            ScatPayload::Coefficients(b) => &b.config,
            ScatPayload::Models(m) => &m.config,
        }
    }

    pub fn into_bank(self) -> Result<(RunConfig, FilterBank)> {
        match self {
            ScatPayload::Bank { config, bank } => Ok((config, bank)),
            _ => Err(Error::Config(
                "container does not hold a filter bank".into(),
            )),
        }
    }

    pub fn into_coefficients(self) -> Result<CoefficientBatch> {
        match self {
            ScatPayload::Coefficients(b) => Ok(b),
            _ => Err(Error::Config("container does not hold coefficients".into())),
        }
    }

    pub fn into_models(self) -> Result<ModelBundle> {
        match self {
            ScatPayload::Models(m) => Ok(m),
            _ => Err(Error::Config("container does not hold models".into())),
        }
    }

    pub fn to_sections(&self) -> Result<Vec<Section>> {
        let conf = Section {
            tag: TAG_CONFIG,
            data: self.config().canonical().into_bytes(),
        };
        let mut out = vec![conf];
        match self {
            ScatPayload::Bank { bank, .. } => out.push(bank_section(bank)),
            ScatPayload::Coefficients(b) => {
                if b.items.iter().any(|it| it.values.len() != b.item_len()) {
                    return Err(Error::Shape(
                        "item length does not match the batch layout".into(),
                    ));
                }
                out.push(paths_section(&b.paths));
                if let Some(idx) = &b.cosine {
                    out.push(cosine_section(idx));
                }
                out.push(coeff_section(b));
                if let Some(l) = &b.labels {
                    let mut w = Writer::default();
                    w.u32(l.len());
                    l.iter().for_each(|&v| w.u32(v as usize));
                    out.push(Section {
                        tag: TAG_LABELS,
                        data: w.0,
                    });
                }
            }
            ScatPayload::Models(m) => {
                let mut w = Writer::default();
                w.u32(m.table.block);
                w.u32(m.table.norms.len());
                w.f64s(&m.table.norms);
                out.push(Section {
                    tag: TAG_EQUALIZATION,
                    data: w.0,
                });
                out.push(models_section(m));
            }
        }
        Ok(out)
    }

    pub fn from_sections(bytes_sections: &[Section], offsets: &[usize]) -> Result<Self> {
        let find = |tag: [u8; 4]| {
            bytes_sections
                .iter()
                .zip(offsets)
                .find(|(s, _)| s.tag == tag)
                .map(|(s, &o)| Reader::new(&s.data, o))
        };
        let conf = find(TAG_CONFIG).ok_or_else(|| Error::format(0, "missing CONF section"))?;
        let text = std::str::from_utf8(conf.bytes)
            .map_err(|_| Error::format(conf.base as u64, "CONF is not UTF-8"))?;
        let config = RunConfig::parse(text)?;
        if let Some(r) = find(TAG_BANK) {
            let bank = read_bank(r, &config)?;
            return Ok(ScatPayload::Bank { config, bank });
        }
        if let Some(r) = find(TAG_MODELS) {
            let eq = find(TAG_EQUALIZATION)
                .ok_or_else(|| Error::format(0, "model bundle without EQLZ section"))?;
            return read_models(r, eq, config).map(ScatPayload::Models);
        }
        if let Some(r) = find(TAG_COEFFS) {
            let paths = read_paths(
                find(TAG_PATHS)
                    .ok_or_else(|| Error::format(0, "coefficients without PATH section"))?,
            )?;
            let cosine = find(TAG_COSINE_INDEX).map(read_cosine).transpose()?;
            let labels = find(TAG_LABELS)
                .map(|mut r| {
                    let n = r.usize()?;
                    let l = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
                    r.finish()?;
                    Ok::<_, Error>(l)
                })
                .transpose()?;
            return read_coeffs(r, config, paths, cosine, labels).map(ScatPayload::Coefficients);
        }
        Err(Error::format(0, "container holds no known payload"))
    }
}

fn bank_section(bank: &FilterBank) -> Section {
    let mut w = Writer::default();
    let (gw, gh) = bank.padded_dims();
    w.u32(gw);
    w.u32(gh);
    w.f64(bank.epsilon);
    w.complex(&bank.phi_hat);
    for g in bank.psi_hat.iter().flatten() {
        w.complex(g);
    }
    Section {
        tag: TAG_BANK,
        data: w.0,
    }
}

fn read_bank(mut r: Reader, config: &RunConfig) -> Result<FilterBank> {
    let (w, h) = (r.usize()?, r.usize()?);
    let params = config.bank_params();
    if (w, h) != params.padded_dims() {
        return Err(r.err("bank grid does not match its configuration"));
    }
    let epsilon = r.f64()?;
    let phi = r.complex(w, h)?;
    let psi = (0..params.j)
        .map(|_| (0..params.c).map(|_| r.complex(w, h)).collect())
        .collect::<Result<Vec<Vec<_>>>>()?;
    r.finish()?;
    let bank = FilterBank::from_parts(params, psi, phi)?;
    if bank.epsilon.to_bits() != epsilon.to_bits() {
        return Err(Error::format(
            r.base as u64,
            "stored frame bound disagrees with the filters",
        ));
    }
    Ok(bank)
}

fn paths_section(paths: &[Path]) -> Section {
    let mut w = Writer::default();
    w.u32(paths.len());
    for p in paths {
        w.u32(p.order());
        for &(s, k) in p.steps() {
            w.u32(s);
            w.u32(k);
        }
    }
    Section {
        tag: TAG_PATHS,
        data: w.0,
    }
}

fn read_paths(mut r: Reader) -> Result<Vec<Path>> {
    let n = r.usize()?;
    let mut out = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let at = r.pos;
        let m = r.usize()?;
        let steps = (0..m)
            .map(|_| Ok((r.usize()?, r.usize()?)))
            .collect::<Result<Vec<_>>>()?;
        out.push(Path::new(steps).map_err(|e| Error::format((r.base + at) as u64, e.to_string()))?);
    }
    r.finish()?;
    Ok(out)
}

fn cosine_section(idx: &[CosineIndex]) -> Section {
    let mut w = Writer::default();
    w.u32(idx.len());
    for o in idx {
        w.u32(o.m);
        w.u32(o.total);
        w.u32(o.index_map.len());
        for t in &o.index_map {
            w.u32(t.len());
            t.iter().for_each(|&v| w.u32(v));
        }
    }
    Section {
        tag: TAG_COSINE_INDEX,
        data: w.0,
    }
}

fn read_cosine(mut r: Reader) -> Result<Vec<CosineIndex>> {
    let n = r.usize()?;
    let mut out = Vec::new();
    for _ in 0..n {
        let (m, total, kept) = (r.usize()?, r.usize()?, r.usize()?);
        let index_map = (0..kept)
            .map(|_| {
                let len = r.usize()?;
                (0..len).map(|_| r.usize()).collect()
            })
            .collect::<Result<_>>()?;
        out.push(CosineIndex {
            m,
            total,
            index_map,
        });
    }
    r.finish()?;
    Ok(out)
}

fn coeff_section(b: &CoefficientBatch) -> Section {
    let mut w = Writer::default();
    w.u32(b.items.len());
    w.u32(b.out_dims.0);
    w.u32(b.out_dims.1);
    w.u32(b.item_len());
    w.u32(b.items.first().map_or(0, |it| it.layer_energy.len()));
    for it in &b.items {
        w.f64(it.input_energy);
        w.f64s(&it.layer_energy);
        w.f64(it.residual_energy);
        w.f64s(&it.values);
    }
    Section {
        tag: TAG_COEFFS,
        data: w.0,
    }
}

fn read_coeffs(
    mut r: Reader,
    config: RunConfig,
    paths: Vec<Path>,
    cosine: Option<Vec<CosineIndex>>,
    labels: Option<Vec<u32>>,
) -> Result<CoefficientBatch> {
    let (n, w, h, len, orders) = (r.usize()?, r.usize()?, r.usize()?, r.usize()?, r.usize()?);
    let mut items = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        items.push(CoefficientItem {
            input_energy: r.f64()?,
            layer_energy: r.f64s(orders)?,
            residual_energy: r.f64()?,
            values: r.f64s(len)?,
        });
    }
    r.finish()?;
    let batch = CoefficientBatch {
        config,
        paths,
        cosine,
        out_dims: (w, h),
        items,
        labels: None,
    };
    if batch.item_len() != len {
        return Err(Error::format(
            r.base as u64,
            "coefficient count does not match the path table",
        ));
    }
    match labels {
        Some(l) => batch.with_labels(l),
        None => Ok(batch),
    }
}

fn models_section(m: &ModelBundle) -> Section {
    let mut w = Writer::default();
    let dim = m.models.first().map_or(0, AffineModel::dim);
    w.u32(m.d);
    w.u32(m.models.len());
    w.u32(dim);
    for model in &m.models {
        w.u32(model.label as usize);
        w.f64s(&model.centroid);
        for v in &model.basis {
            w.f64s(v);
        }
    }
    Section {
        tag: TAG_MODELS,
        data: w.0,
    }
}

fn read_models(mut r: Reader, mut eq: Reader, config: RunConfig) -> Result<ModelBundle> {
    let (block, count) = (eq.usize()?, eq.usize()?);
    let norms = eq.f64s(count)?;
    eq.finish()?;
    let (d, n, dim) = (r.usize()?, r.usize()?, r.usize()?);
    let mut models = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let label = r.u32()?;
        let centroid = r.f64s(dim)?;
        let basis = (0..d).map(|_| r.f64s(dim)).collect::<Result<_>>()?;
        models.push(AffineModel {
            label,
            centroid,
            basis,
            d,
        });
    }
    r.finish()?;
    let table = EqualizationTable {
        norms,
        block,
        config_hash: config.config_hash(),
    };
    Ok(ModelBundle {
        config,
        d,
        table,
        models,
    })
}

pub fn encode_scat(payload: &ScatPayload) -> Result<Vec<u8>> {
    if let ScatPayload::Models(m) = payload {
        check_hash(&m.table.config_hash, &m.config.config_hash())?;
    }
    Ok(encode_container(&payload.to_sections()?))
}

pub fn decode_scat(bytes: &[u8]) -> Result<ScatPayload> {
    let sections = decode_container(bytes)?;
    // Payload offsets, recomputed from the table for error reporting.
    let count = sections.len();
    let offsets: Vec<usize> = (0..count)
        .map(|i| {
            let e = HEADER_LEN + ENTRY_LEN * i + 8;
            u64::from_le_bytes(bytes[e..e + 8].try_into().unwrap()) as usize
        })
        .collect();
    ScatPayload::from_sections(&sections, &offsets)
}

pub fn write_scat(path: impl AsRef<FsPath>, payload: &ScatPayload) -> Result<()> {
    fs::write(path, encode_scat(payload)?)?;
    Ok(())
}

pub fn read_scat(path: impl AsRef<FsPath>) -> Result<ScatPayload> {
    decode_scat(&fs::read(path)?)
}

/// Reads a container and checks it was produced under `expected_hash`.
pub fn read_scat_expecting(path: impl AsRef<FsPath>, expected_hash: &str) -> Result<ScatPayload> {
    let p = read_scat(path)?;
    check_hash(&p.config().config_hash(), expected_hash)?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::fit_affine_models;
    use crate::cosine::cosine_compress;
    use crate::scattering::{scattering_transform, Alpha};

    fn config() -> RunConfig {
        RunConfig {
            j: 2,
            c: 2,
            width: 8,
            height: 8,
            m_max: 2,
            ..RunConfig::default()
        }
    }

    fn batch(cfg: &RunConfig) -> CoefficientBatch {
        let bank = crate::filterbank::build_filter_bank(cfg.bank_params()).unwrap();
        let inputs: Vec<(ScatteringResult, f64)> = (0..3)
            .map(|i| {
                let x = ImageGrid::from_fn(8, 8, |c, r| ((c * 3 + r * 5 + i) % 7) as f64);
                (
                    scattering_transform(&x, &bank, cfg.m_max, cfg.alpha).unwrap(),
                    x.norm_sq(),
                )
            })
            .collect();
        CoefficientBatch::from_scattering(cfg.clone(), &inputs)
            .unwrap()
            .with_labels(vec![0, 1, 0])
            .unwrap()
    }

    #[test]
    fn container_framing() {
        let s = vec![
            Section {
                tag: *b"AAAA",
                data: vec![1, 2, 3],
            },
            Section {
                tag: *b"BBBB",
                data: vec![],
            },
        ];
        let bytes = encode_container(&s);
        assert_eq!(&bytes[..4], b"SCAT");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), VERSION);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 56);
        assert_eq!(decode_container(&bytes).unwrap(), s);
        assert_eq!(bytes.len(), 8 + 2 * 24 + 3 + 4 + 4);
    }

    #[test]
    fn coefficient_batches_round_trip() {
        let cfg = config();
        let b = batch(&cfg);
        let bytes = encode_scat(&ScatPayload::Coefficients(b.clone())).unwrap();
        let back = decode_scat(&bytes).unwrap().into_coefficients().unwrap();
        assert_eq!(back, b);
        assert_eq!(
            encode_scat(&ScatPayload::Coefficients(back.clone())).unwrap(),
            bytes
        );
        let r = back.scattering(1).unwrap();
        assert_eq!(r.feature_vector(), b.items[1].values);
    }

    #[test]
    fn cosine_batches_round_trip() {
        let cfg = RunConfig {
            kept_fraction: Some(0.5),
            ..config()
        };
        let plain = batch(&config());
        let inputs: Vec<(CosineScattering, f64)> = (0..3)
            .map(|i| {
                (
                    cosine_compress(&plain.scattering(i).unwrap(), 0.5).unwrap(),
                    1.0,
                )
            })
            .collect();
        let b = CoefficientBatch::from_cosine(cfg, &inputs).unwrap();
        let back = decode_scat(&encode_scat(&ScatPayload::Coefficients(b.clone())).unwrap())
            .unwrap()
            .into_coefficients()
            .unwrap();
        assert_eq!(back, b);
        assert_eq!(
            back.cosine_item(2).unwrap().feature_vector(),
            inputs[2].0.feature_vector()
        );
    }

    #[test]
    fn banks_and_models_round_trip() {
        let cfg = config();
        let bank = crate::filterbank::build_filter_bank(cfg.bank_params()).unwrap();
        let p = ScatPayload::Bank {
            config: cfg.clone(),
            bank: bank.clone(),
        };
        let (c2, b2) = decode_scat(&encode_scat(&p).unwrap())
            .unwrap()
            .into_bank()
            .unwrap();
        assert_eq!(c2, cfg);
        assert_eq!(b2.psi_hat, bank.psi_hat);
        assert_eq!(b2.epsilon.to_bits(), bank.epsilon.to_bits());

        let b = batch(&cfg);
        let feats = b.feature_vectors();
        let train: Vec<(FeatureVector, u32)> =
            feats.into_iter().zip(b.labels.clone().unwrap()).collect();
        let table =
            EqualizationTable::fit(&train.iter().map(|(f, _)| f.clone()).collect::<Vec<_>>())
                .unwrap();
        let bundle = ModelBundle {
            config: cfg.clone(),
            d: 0,
            table,
            models: fit_affine_models(&train, 0).unwrap(),
        };
        let back = decode_scat(&encode_scat(&ScatPayload::Models(bundle.clone())).unwrap())
            .unwrap()
            .into_models()
            .unwrap();
        assert_eq!(back, bundle);
    }

    #[test]
    fn corruption_and_version_errors() {
        let bytes = encode_scat(&ScatPayload::Coefficients(batch(&config()))).unwrap();
        let count = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
        let entry = (0..count)
            .map(|i| HEADER_LEN + ENTRY_LEN * i)
            .find(|&e| bytes[e..e + 4] == TAG_COEFFS)
            .unwrap();
        let offset = u64::from_le_bytes(bytes[entry + 8..entry + 16].try_into().unwrap()) as usize;
        let mut flipped = bytes.clone();
        flipped[offset + 40] ^= 0x01;
        match decode_scat(&flipped) {
            Err(Error::Checksum(msg)) => assert!(msg.contains("COEF"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let mut versioned = bytes.clone();
        versioned[4] = 9;
        assert!(matches!(
            decode_scat(&versioned),
            Err(Error::Version {
                found: 9,
                expected: 1
            })
        ));
        for cut in [0, 5, 30, bytes.len() - 1] {
            assert!(
                matches!(decode_scat(&bytes[..cut]), Err(Error::Format { .. })),
                "cut {cut}"
            );
        }
    }

    #[test]
    fn hash_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.scat");
        let one = RunConfig {
            alpha: Alpha::One,
            ..config()
        };
        let half = config();
        write_scat(&p, &ScatPayload::Coefficients(batch(&one))).unwrap();
        assert!(read_scat_expecting(&p, &one.config_hash()).is_ok());
        assert!(matches!(
            read_scat_expecting(&p, &half.config_hash()),
            Err(Error::Config(_))
        ));
    }
}
