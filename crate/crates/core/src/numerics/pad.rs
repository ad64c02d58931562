use std::fmt;
use std::str::FromStr;

use super::grid::{ComplexGrid, ImageGrid};
use crate::error::{Error, Result};

/// How finite images are extended before periodic convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Treat the image as one period; no padding.
    Periodic,
    /// Mirror-extend on the right and bottom, convolve periodically, crop.
    #[default]
    Mirror,
}

impl Boundary {
    /// Working length of an axis of `n` samples when every stage must divide by `multiple`.
    pub fn padded_len(self, n: usize, multiple: usize) -> usize {
        match self {
            Boundary::Periodic => n,
            Boundary::Mirror => (2 * n).div_ceil(multiple) * multiple,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::Mirror => "mirror",
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "mirror" => Ok(Boundary::Mirror),
            other => Err(Error::Argument(format!("unknown boundary '{other}'"))),
        }
    }
}

/// Half-sample symmetric index: ... 1 0 | 0 1 ... n-1 | n-1 n-2 ...
pub fn mirror_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let j = i.rem_euclid(period) as usize;
    if j < n {
        j
    } else {
        2 * n - 1 - j
    }
}

fn check_target(w: usize, h: usize, tw: usize, th: usize) -> Result<()> {
    if tw < w || th < h {
        return Err(Error::Argument(format!(
            "pad target {tw}x{th} smaller than input {w}x{h}"
        )));
    }
    Ok(())
}

/// Symmetric extension of `x` to `target_w`×`target_h`; the original sits top-left.
pub fn pad_reflect(x: &ImageGrid, target_w: usize, target_h: usize) -> Result<ImageGrid> {
    let (w, h) = x.dims();
    check_target(w, h, target_w, target_h)?;
    Ok(ImageGrid::from_fn(target_w, target_h, |c, r| {
        x.get(mirror_index(c as isize, w), mirror_index(r as isize, h))
    }))
}

pub fn pad_reflect_complex(
    x: &ComplexGrid,
    target_w: usize,
    target_h: usize,
) -> Result<ComplexGrid> {
    let (w, h) = x.dims();
    check_target(w, h, target_w, target_h)?;
    Ok(ComplexGrid::from_fn(target_w, target_h, |c, r| {
        x.get(mirror_index(c as isize, w), mirror_index(r as isize, h))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_size_is_identity() {
        let x = ImageGrid::from_fn(3, 4, |c, r| (c + 10 * r) as f64);
        assert_eq!(pad_reflect(&x, 3, 4).unwrap(), x);
    }

    #[test]
    fn one_dimensional_mirror() {
        let x = ImageGrid::new(3, 2, vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0]).unwrap();
        let p = pad_reflect(&x, 6, 2).unwrap();
        assert_eq!(&p.values()[..6], &[1.0, 2.0, 3.0, 3.0, 2.0, 1.0]);
    }

    #[test]
    fn matches_index_mirroring_oracle() {
        let x = ImageGrid::from_fn(5, 5, |c, r| ((c * 7 + r * 13) % 11) as f64 - 3.0);
        let p = pad_reflect(&x, 8, 8).unwrap();
        let fold = |i: usize| if i < 5 { i } else { 9 - i };
        for r in 0..8 {
            for c in 0..8 {
                assert_eq!(p.get(c, r), x.get(fold(c), fold(r)));
            }
        }
        assert_eq!(p.crop(5, 5).unwrap(), x);
    }

    #[test]
    fn rejects_shrinking() {
        let x = ImageGrid::zeros(4, 4);
        assert!(pad_reflect(&x, 3, 4).is_err());
    }

    #[test]
    fn padded_lengths() {
        assert_eq!(Boundary::Mirror.padded_len(28, 8), 56);
        assert_eq!(Boundary::Mirror.padded_len(30, 8), 64);
        assert_eq!(Boundary::Mirror.padded_len(128, 8), 256);
        assert_eq!(Boundary::Periodic.padded_len(30, 8), 30);
    }
}
