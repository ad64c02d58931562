//! Grayscale image files: PGM (P2/P5, 8 or 16 bit) by hand, PNG through `image`.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage};
use log::warn;

use super::{Dataset, DatasetSource};
use crate::error::{Error, Result};
use crate::numerics::ImageGrid;

/// Whitespace- and comment-separated header tokens of a PNM file.
struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Tokens<'_> {
    fn next(&mut self) -> Result<(usize, &str)> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.bytes.get(self.pos) == Some(&b'#') {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(start as u64, "unexpected end of PGM data"));
        }
        let tok = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::format(start as u64, "non-ASCII PGM token"))?;
        Ok((start, tok))
    }

    fn number(&mut self) -> Result<usize> {
        let (at, tok) = self.next()?;
        tok.parse()
            .map_err(|_| Error::format(at as u64, format!("expected a number, found '{tok}'")))
    }
}

/// Decodes a PGM image; samples are divided by maxval.
pub fn parse_pgm(bytes: &[u8]) -> Result<ImageGrid> {
    let mut t = Tokens { bytes, pos: 0 };
    let (_, magic) = t.next()?;
    let binary = match magic {
        "P5" => true,
        "P2" => false,
        other => {
            return Err(Error::format(
                0,
                format!("not a PGM file (magic '{other}')"),
            ))
        }
    };
    let (w, h) = (t.number()?, t.number()?);
    let maxval = t.number()?;
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::format(
            t.pos as u64,
            format!("bad PGM header {w}x{h} maxval {maxval}"),
        ));
    }
    let scale = 1.0 / maxval as f64;
    let n = w * h;
    let values: Vec<f64> = if binary {
        let start = t.pos + 1;
        let width = if maxval > 255 { 2 } else { 1 };
        let data = bytes.get(start..start + n * width).ok_or_else(|| {
            Error::format(
                bytes.len() as u64,
                format!("PGM raster truncated, need {} bytes", n * width),
            )
        })?;
        if width == 1 {
            data.iter().map(|&b| b as f64 * scale).collect()
        } else {
            data.chunks(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 * scale)
                .collect()
        }
    } else {
        (0..n)
            .map(|_| {
                let at = t.pos;
                let v = t.number()?;
                if v > maxval {
                    return Err(Error::format(
                        at as u64,
                        format!("sample {v} exceeds maxval {maxval}"),
                    ));
                }
                Ok(v as f64 * scale)
            })
            .collect::<Result<_>>()?
    };
    ImageGrid::new(w, h, values)
}

/// Reads a PGM or any format the `image` crate decodes, as grayscale in [0, 1].
pub fn read_image(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let bytes = fs::read(path.as_ref())?;
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        return parse_pgm(&bytes);
    }
    let img = image::load_from_memory(&bytes)
        .map_err(|e| Error::format(0, format!("{}: {e}", path.as_ref().display())))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values = match img {
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => img
            .into_luma16()
            .pixels()
            .map(|p| p.0[0] as f64 / 65535.0)
            .collect(),
        _ => img
            .into_luma8()
            .pixels()
            .map(|p| p.0[0] as f64 / 255.0)
            .collect(),
    };
    ImageGrid::new(w, h, values)
}

fn to_bytes(x: &ImageGrid) -> Vec<u8> {
    x.values()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

/// 8-bit binary PGM; values are clamped to [0, 1].
pub fn encode_pgm(x: &ImageGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", x.width(), x.height()).into_bytes();
    out.extend(to_bytes(x));
    out
}

pub fn write_pgm(path: impl AsRef<Path>, x: &ImageGrid) -> Result<()> {
    fs::write(path, encode_pgm(x))?;
    Ok(())
}

/// 8-bit grayscale PNG; values are clamped to [0, 1].
pub fn write_png(path: impl AsRef<Path>, x: &ImageGrid) -> Result<()> {
    let img = GrayImage::from_raw(x.width() as u32, x.height() as u32, to_bytes(x))
        .expect("buffer matches dimensions");
    img.save_with_format(path.as_ref(), image::ImageFormat::Png)
        .map_err(|e| Error::Io(std::io::Error::other(e)))
}

fn is_image(p: &Path) -> bool {
    matches!(
        p.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("pgm" | "png")
    )
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    v.sort();
    Ok(v)
}

/// Loads `dir/<class>/<image>` with labels from the sorted class names, or
/// the images directly under `dir` (unlabeled) when it has no subdirectories.
/// Unreadable files are skipped with a warning.
pub fn read_image_dir(dir: impl AsRef<Path>, normalize: bool) -> Result<Dataset> {
    let dir = dir.as_ref();
    let entries = sorted_entries(dir)?;
    let classes: Vec<&PathBuf> = entries.iter().filter(|p| p.is_dir()).collect();
    let mut groups: Vec<(Option<u32>, Vec<PathBuf>)> = Vec::new();
    let mut class_names = Vec::new();
    if classes.is_empty() {
        groups.push((
            None,
            entries.iter().filter(|p| is_image(p)).cloned().collect(),
        ));
    } else {
        for (label, class) in classes.iter().enumerate() {
            class_names.push(
                class
                    .file_name()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned(),
            );
            let files = sorted_entries(class)?
                .into_iter()
                .filter(|p| is_image(p))
                .collect();
            groups.push((Some(label as u32), files));
        }
    }
    let (mut images, mut labels) = (Vec::new(), Vec::new());
    let mut failed = 0;
    for (label, files) in groups {
        for f in files {
            match read_image(&f) {
                Ok(x) => {
                    images.push(if normalize { x.standardize() } else { x });
                    labels.extend(label);
                }
                Err(e) => {
                    warn!("skipping {}: {e}", f.display());
                    failed += 1;
                }
            }
        }
    }
    if images.is_empty() {
        return Err(Error::EmptyDataset(if failed > 0 {
            format!("{}: all {failed} image files failed to load", dir.display())
        } else {
            format!("{}: no PGM or PNG images", dir.display())
        }));
    }
    let labels = (!classes.is_empty()).then_some(labels);
    let mut ds = Dataset::new(images, labels, DatasetSource::ImageDirectory)?;
    ds.class_names = class_names;
    Ok(ds)
}
