use num_complex::Complex64;

use super::grid::{ComplexGrid, ImageGrid};
use crate::error::{Error, Result};

/// output(n) = input(step·n); output dims are ceil(dim / step).
pub fn subsample(x: &ImageGrid, step: usize) -> Result<ImageGrid> {
    if step == 0 {
        return Err(Error::Argument(
            "subsampling step must be at least 1".into(),
        ));
    }
    let (w, h) = x.dims();
    let (ow, oh) = (w.div_ceil(step), h.div_ceil(step));
    Ok(ImageGrid::from_fn(ow, oh, |c, r| x.get(c * step, r * step)))
}

/// Spectrum of the `factor`-decimated signal, computed by folding the spectrum
/// of the full one: Ŷ(k) = factor⁻² Σ X̂(k + a·w/factor, l + b·h/factor).
pub fn fold_spectrum(spec: &ComplexGrid, factor: usize) -> Result<ComplexGrid> {
    let (w, h) = spec.dims();
    if factor == 0 || w % factor != 0 || h % factor != 0 {
        return Err(Error::Argument(format!(
            "factor {factor} does not divide {w}x{h}"
        )));
    }
    if factor == 1 {
        return Ok(spec.clone());
    }
    let (ow, oh) = (w / factor, h / factor);
    let mut out = vec![Complex64::new(0.0, 0.0); ow * oh];
    let src = spec.values();
    for r in 0..h {
        let orow = (r % oh) * ow;
        let srow = r * w;
        for c in 0..w {
            out[orow + c % ow] += src[srow + c];
        }
    }
    let scale = 1.0 / (factor * factor) as f64;
    for v in out.iter_mut() {
        *v *= scale;
    }
    Ok(ComplexGrid::from_raw(ow, oh, out))
}
