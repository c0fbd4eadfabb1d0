//! Image statistics, degradations, quality metrics and dataset curation for
//! building high-quality restoration corpora.

pub mod color;
pub mod curation;
pub mod degrade;
pub mod error;
pub mod freq;
pub mod image;
pub mod jpeg;
pub mod metrics;
pub mod resample;

pub use error::{Error, Result};
pub use image::{load_image, FloatPlane, RasterImage};
