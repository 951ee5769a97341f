//! Singular-value studies and image rendering.

mod render;
mod sv;

pub use render::{render_images, write_pgm, write_ppm, ChannelMap, Image, RenderedImages, Transform};
pub use sv::{
    evenly_spaced_focal_planes, kernel_sv_scan, knee_index, sv_ensemble, sv_scan, EnsembleSource, Envelope, SvScan,
    DEFAULT_DENSE_BUDGET,
};
