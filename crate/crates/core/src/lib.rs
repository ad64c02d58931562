pub mod classifier;
pub mod cosine;
pub mod error;
pub mod filterbank;
pub mod io;
pub mod numerics;
pub mod scattering;
pub mod stationary;

pub use error::{Error, Result};
