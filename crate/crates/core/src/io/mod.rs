//! Dataset ingestion, run configuration and the SCAT container.

pub mod config;
pub mod idx;
pub mod image;
pub mod scat;

pub use config::{check_hash, RunConfig};
pub use idx::{read_idx, read_idx_labels};
pub use image::{read_image, read_image_dir, write_pgm, write_png};
pub use scat::{
    read_scat, read_scat_expecting, write_scat, CoefficientBatch, CoefficientItem, ModelBundle,
    ScatPayload,
};

use crate::error::{Error, Result};
use crate::numerics::ImageGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetSource {
    Idx,
    ImageDirectory,
    Synthetic,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Vec<ImageGrid>,
    pub labels: Option<Vec<u32>>,
    pub source: DatasetSource,
    /// Class directory names, indexed by label (image directories only).
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        images: Vec<ImageGrid>,
        labels: Option<Vec<u32>>,
        source: DatasetSource,
    ) -> Result<Self> {
        if let Some(first) = images.first() {
            if images.iter().any(|x| x.dims() != first.dims()) {
                return Err(Error::Shape(
                    "dataset images have different dimensions".into(),
                ));
            }
        }
        if let Some(l) = &labels {
            if l.len() != images.len() {
                return Err(Error::Shape(format!(
                    "{} labels for {} images",
                    l.len(),
                    images.len()
                )));
            }
        }
        Ok(Self {
            images,
            labels,
            source,
            class_names: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.images.first().map(ImageGrid::dims)
    }

    pub fn with_labels(self, labels: Vec<u32>) -> Result<Self> {
        Self::new(self.images, Some(labels), self.source)
    }

    /// Items `skip..skip + take`.
    pub fn range(mut self, skip: usize, take: Option<usize>) -> Self {
        let end = take.map_or(self.images.len(), |t| (skip + t).min(self.images.len()));
        let start = skip.min(end);
        self.images = self.images.drain(start..end).collect();
        if let Some(l) = &mut self.labels {
            *l = l.drain(start..end).collect();
        }
        self
    }

    /// Centers every image in a `w`×`h` frame of zeros.
    pub fn zero_pad(self, w: usize, h: usize) -> Result<Self> {
        let images = self
            .images
            .iter()
            .map(|x| zero_pad(x, w, h))
            .collect::<Result<_>>()?;
        Ok(Self { images, ..self })
    }
}

/// `x` centered in a `w`×`h` frame of zeros.
pub fn zero_pad(x: &ImageGrid, w: usize, h: usize) -> Result<ImageGrid> {
    let (xw, xh) = x.dims();
    if w < xw || h < xh {
        return Err(Error::Shape(format!("cannot pad {xw}x{xh} to {w}x{h}")));
    }
    let (ox, oy) = ((w - xw) / 2, (h - xh) / 2);
    Ok(ImageGrid::from_fn(w, h, |c, r| {
        if c >= ox && c < ox + xw && r >= oy && r < oy + xh {
            x.get(c - ox, r - oy)
        } else {
            0.0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padding_centers_the_image() {
        let x = ImageGrid::from_fn(28, 28, |c, r| (c + r) as f64);
        let y = zero_pad(&x, 32, 32).unwrap();
        assert_eq!(y.get(2, 2), x.get(0, 0));
        assert_eq!(y.get(29, 29), x.get(27, 27));
        assert_eq!(y.get(1, 5), 0.0);
        assert_eq!(y.sum(), x.sum());
        assert!(zero_pad(&x, 20, 32).is_err());
    }

    #[test]
    fn dataset_invariants_and_ranges() {
        let imgs: Vec<ImageGrid> = (0..5)
            .map(|i| ImageGrid::from_fn(2, 2, |_, _| i as f64))
            .collect();
        assert!(Dataset::new(imgs.clone(), Some(vec![0; 4]), DatasetSource::Synthetic).is_err());
        let ds = Dataset::new(imgs, Some(vec![0, 1, 2, 3, 4]), DatasetSource::Synthetic).unwrap();
        let r = ds.range(1, Some(2));
        assert_eq!(r.labels, Some(vec![1, 2]));
        assert_eq!(r.images[0].get(0, 0), 1.0);
        let mixed = vec![ImageGrid::zeros(2, 2), ImageGrid::zeros(3, 2)];
        assert!(Dataset::new(mixed, None, DatasetSource::Synthetic).is_err());
    }
}
