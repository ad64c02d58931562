use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustdct::{DctPlanner, TransformType2And3};

use crate::error::{Error, Result};

type DctCache = Mutex<HashMap<usize, Arc<dyn TransformType2And3<f64>>>>;

fn plan(len: usize) -> Arc<dyn TransformType2And3<f64>> {
    static CACHE: OnceLock<DctCache> = OnceLock::new();
    let mut map = CACHE
        .get_or_init(|| Mutex::new(HashMap::new()))
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    map.entry(len)
        .or_insert_with(|| DctPlanner::new().plan_dct2(len))
        .clone()
}

/// Orthonormal DCT-II of a vector, in place.
pub fn dct_ortho(v: &mut [f64]) {
    let n = v.len();
    if n <= 1 {
        return;
    }
    plan(n).process_dct2(v);
    let dc = (1.0 / n as f64).sqrt();
    let ac = (2.0 / n as f64).sqrt();
    v[0] *= dc;
    for x in &mut v[1..] {
        *x *= ac;
    }
}

/// Inverse of [`dct_ortho`] (orthonormal DCT-III), in place.
pub fn idct_ortho(v: &mut [f64]) {
    let n = v.len();
    if n <= 1 {
        return;
    }
    v[0] *= 2.0 / (n as f64).sqrt();
    let ac = (2.0 / n as f64).sqrt();
    for x in &mut v[1..] {
        *x *= ac;
    }
    plan(n).process_dct3(v);
}

fn along_axis(values: &[f64], shape: &[usize], axis: usize, f: fn(&mut [f64])) -> Result<Vec<f64>> {
    if axis >= shape.len() {
        return Err(Error::Argument(format!(
            "axis {axis} out of range for {} dimensions",
            shape.len()
        )));
    }
    if shape[axis] == 0 {
        return Err(Error::Argument("empty axis".into()));
    }
    let total: usize = shape.iter().product();
    if total != values.len() {
        return Err(Error::Shape(format!(
            "{} values for shape {shape:?}",
            values.len()
        )));
    }
    let len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer = total / (len * inner);
    let mut out = values.to_vec();
    let mut lane = vec![0.0; len];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * len * inner + i;
            for (k, slot) in lane.iter_mut().enumerate() {
                *slot = out[base + k * inner];
            }
            f(&mut lane);
            for (k, v) in lane.iter().enumerate() {
                out[base + k * inner] = *v;
            }
        }
    }
    Ok(out)
}

/// Orthonormal DCT-II along one axis of a row-major array of the given shape.
pub fn dct_along_axis(values: &[f64], shape: &[usize], axis: usize) -> Result<Vec<f64>> {
    along_axis(values, shape, axis, dct_ortho)
}

pub fn idct_along_axis(values: &[f64], shape: &[usize], axis: usize) -> Result<Vec<f64>> {
    along_axis(values, shape, axis, idct_ortho)
}
