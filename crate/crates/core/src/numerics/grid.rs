use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real 2-D signal stored row-major, `values[row * width + col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ImageGrid {
    /// Builds a grid after checking shape and finiteness.
    ///
    /// Coefficient grids may be as small as 1×1; use [`ImageGrid::check_signal`]
    /// for inputs that must be at least 2×2.
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("empty grid {width}x{height}")));
        }
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "{} values for a {width}x{height} grid",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                values.push(f(col, row));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            values,
        }
    }

    /// Rejects grids smaller than 2×2, the minimum for an input signal.
    pub fn check_signal(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::Shape(format!(
                "input signal must be at least 2x2, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, v: f64) {
        self.values[row * self.width + col] = v;
    }

    /// Σ|x(u)|², summed left to right.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc + v * v)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc + v)
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(
            self.width,
            self.height,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.dims() != other.dims() {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(Self::from_raw(
            self.width,
            self.height,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    /// Top-left `width`×`height` window.
    pub fn crop(&self, width: usize, height: usize) -> Result<Self> {
        if width > self.width || height > self.height || width == 0 || height == 0 {
            return Err(Error::Shape(format!(
                "cannot crop {}x{} to {width}x{height}",
                self.width, self.height
            )));
        }
        let mut values = Vec::with_capacity(width * height);
        for row in 0..height {
            let start = row * self.width;
            values.extend_from_slice(&self.values[start..start + width]);
        }
        Ok(Self::from_raw(width, height, values))
    }

    /// Circular shift: output(u) = input(u - (dx, dy)).
    pub fn roll(&self, dx: isize, dy: isize) -> Self {
        let (w, h) = (self.width as isize, self.height as isize);
        Self::from_fn(self.width, self.height, |c, r| {
            let sc = (c as isize - dx).rem_euclid(w) as usize;
            let sr = (r as isize - dy).rem_euclid(h) as usize;
            self.get(sc, sr)
        })
    }

    /// Rescales to zero mean and unit variance. A constant grid becomes all zeros.
    pub fn standardize(&self) -> Self {
        let mean = self.mean();
        let var = self
            .values
            .iter()
            .fold(0.0, |acc, v| acc + (v - mean).powi(2))
            / self.values.len() as f64;
        let inv = if var > 0.0 { 1.0 / var.sqrt() } else { 0.0 };
        self.map(|v| (v - mean) * inv)
    }

    pub fn to_complex(&self) -> ComplexGrid {
        ComplexGrid::from_raw(
            self.width,
            self.height,
            self.values
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect(),
        )
    }
}

/// Complex 2-D grid with the same layout as [`ImageGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    width: usize,
    height: usize,
    values: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn new(width: usize, height: usize, values: Vec<Complex64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("empty grid {width}x{height}")));
        }
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "{} values for a {width}x{height} grid",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![Complex64::new(0.0, 0.0); width * height],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                values.push(f(col, row));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn get(&self, col: usize, row: usize) -> Complex64 {
        self.values[row * self.width + col]
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc + v.norm_sqr())
    }

    pub fn modulus(&self) -> ImageGrid {
        ImageGrid::from_raw(
            self.width,
            self.height,
            self.values.iter().map(|v| v.norm()).collect(),
        )
    }

    pub fn re(&self) -> ImageGrid {
        ImageGrid::from_raw(
            self.width,
            self.height,
            self.values.iter().map(|v| v.re).collect(),
        )
    }

    pub fn im(&self) -> ImageGrid {
        ImageGrid::from_raw(
            self.width,
            self.height,
            self.values.iter().map(|v| v.im).collect(),
        )
    }

    pub fn crop(&self, width: usize, height: usize) -> Result<Self> {
        if width > self.width || height > self.height || width == 0 || height == 0 {
            return Err(Error::Shape(format!(
                "cannot crop {}x{} to {width}x{height}",
                self.width, self.height
            )));
        }
        let mut values = Vec::with_capacity(width * height);
        for row in 0..height {
            let start = row * self.width;
            values.extend_from_slice(&self.values[start..start + width]);
        }
        Ok(Self::from_raw(width, height, values))
    }
}
