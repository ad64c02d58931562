//! Grids, FFT convolution, padding, subsampling, warping and DCT primitives.

pub mod dct;
pub mod fft;
pub mod grid;
pub mod pad;
pub mod subsample;
pub mod warp;

pub use dct::{dct_along_axis, dct_ortho, idct_along_axis, idct_ortho};
pub use fft::{bin_frequency, fft2, fft2_real, fft_convolve, fft_convolve_real, ifft2, Fft2};
pub use grid::{ComplexGrid, ImageGrid};
pub use pad::{mirror_index, pad_reflect, pad_reflect_complex, Boundary};
pub use subsample::{fold_spectrum, subsample};
pub use warp::{warp, DeformationField};
