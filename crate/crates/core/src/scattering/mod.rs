//! Scattering paths, the propagator cascade, global scattering and the frequency display.

pub mod display;
pub mod path;
pub mod transform;

pub use display::{cascade_filter_norms, render_display};
pub use path::{enumerate_paths, path_count, Path};
pub use transform::{
    global_scattering, propagate, scattering_transform, Alpha, Propagated, ScatteringResult,
};
