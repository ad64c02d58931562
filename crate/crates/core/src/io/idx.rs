//! IDX files (big-endian header, u8 payload), optionally gzip-compressed.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::{Dataset, DatasetSource};
use crate::error::{Error, Result};
use crate::numerics::ImageGrid;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn load(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::format(offset as u64, "header truncated"))
}

fn header(bytes: &[u8], magic: u32, dims: usize) -> Result<Vec<usize>> {
    let found = be_u32(bytes, 0)?;
    if found != magic {
        return Err(Error::format(
            0,
            format!("magic {found:#010x}, expected {magic:#010x}"),
        ));
    }
    (0..dims)
        .map(|i| be_u32(bytes, 4 + 4 * i).map(|v| v as usize))
        .collect()
}

fn payload(bytes: &[u8], start: usize, len: usize) -> Result<&[u8]> {
    let end = start
        .checked_add(len)
        .ok_or_else(|| Error::format(start as u64, "payload size overflows"))?;
    if bytes.len() < end {
        return Err(Error::format(
            bytes.len() as u64,
            format!("payload truncated: {} of {len} bytes", bytes.len() - start),
        ));
    }
    if bytes.len() > end {
        return Err(Error::format(end as u64, "trailing bytes after payload"));
    }
    Ok(&bytes[start..end])
}

/// Parses an IDX image file from memory; pixels are mapped to [0, 1].
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<ImageGrid>> {
    let dims = header(bytes, IMAGE_MAGIC, 3)?;
    let (n, rows, cols) = (dims[0], dims[1], dims[2]);
    if rows == 0 || cols == 0 {
        return Err(Error::format(8, format!("image size {rows}x{cols}")));
    }
    let data = payload(bytes, 16, n.saturating_mul(rows).saturating_mul(cols))?;
    data.chunks(rows * cols)
        .map(|px| ImageGrid::new(cols, rows, px.iter().map(|&b| b as f64 / 255.0).collect()))
        .collect()
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u32>> {
    let n = header(bytes, LABEL_MAGIC, 1)?[0];
    Ok(payload(bytes, 8, n)?.iter().map(|&b| b as u32).collect())
}

/// Reads an IDX image file (plain or `.gz`).
pub fn read_idx(path: impl AsRef<Path>) -> Result<Dataset> {
    let images = parse_idx_images(&load(path.as_ref())?)?;
    Dataset::new(images, None, DatasetSource::Idx)
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u32>> {
    parse_idx_labels(&load(path.as_ref())?)
}

/// Serializes images (values clamped to [0, 1], rounded to bytes) as IDX.
pub fn encode_idx_images(images: &[ImageGrid]) -> Result<Vec<u8>> {
    let (w, h) = images
        .first()
        .map(ImageGrid::dims)
        .ok_or_else(|| Error::EmptyDataset("no images to encode".into()))?;
    let mut out = Vec::with_capacity(16 + images.len() * w * h);
    for v in [IMAGE_MAGIC, images.len() as u32, h as u32, w as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for x in images {
        if x.dims() != (w, h) {
            return Err(Error::Shape("images have different dimensions".into()));
        }
        out.extend(
            x.values()
                .iter()
                .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
    }
    Ok(out)
}

pub fn encode_idx_labels(labels: &[u32]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    for &l in labels {
        out.push(u8::try_from(l).map_err(|_| Error::Argument(format!("label {l} exceeds 255")))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_image() -> Vec<u8> {
        let mut b = vec![0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2];
        b.extend([0, 255, 0, 255]);
        b
    }

    #[test]
    fn handcrafted_image() {
        let imgs = parse_idx_images(&one_image()).unwrap();
        assert_eq!(imgs.len(), 1);
        assert_eq!(imgs[0].values(), &[0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn every_truncation_is_a_format_error() {
        let b = one_image();
        for cut in 0..b.len() {
            match parse_idx_images(&b[..cut]) {
                Err(Error::Format { .. }) => {}
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let mut b = one_image();
        b[3] = 1;
        assert!(matches!(
            parse_idx_images(&b),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(matches!(
            parse_idx_labels(&one_image()),
            Err(Error::Format { offset: 0, .. })
        ));
    }

    #[test]
    fn labels_and_encoding() {
        let enc = encode_idx_labels(&[3, 1, 4]).unwrap();
        assert_eq!(parse_idx_labels(&enc).unwrap(), vec![3, 1, 4]);
        let imgs = parse_idx_images(&one_image()).unwrap();
        assert_eq!(encode_idx_images(&imgs).unwrap(), one_image());
    }

    #[test]
    fn gzip_is_detected() {
        use flate2::{write::GzEncoder, Compression};
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.idx.gz");
        let mut e = GzEncoder::new(Vec::new(), Compression::default());
        e.write_all(&one_image()).unwrap();
        std::fs::write(&p, e.finish().unwrap()).unwrap();
        let ds = read_idx(&p).unwrap();
        assert_eq!(ds.images.len(), 1);
        assert!(ds.labels.is_none());
    }
}
