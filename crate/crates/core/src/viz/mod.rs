//! Ranked-list and activation-map visualization.

mod actmap;
mod colormap;
mod visrank;

pub use actmap::{activation_map, raw_map_path, visactmap, ActivationMap};
pub use colormap::jet;
pub use visrank::{ranked_lists, visrank, RankedEntry, RankedList, VisrankOutput, BORDER, GAP};

use std::path::PathBuf;

use thiserror::Error;

use crate::dataman::PixelBuffer;

#[derive(Debug, Error)]
pub enum VizError {
    #[error("feature map has an empty dimension: {0:?}")]
    EmptyFeatureMap((usize, usize, usize)),
    #[error("feature map is all zeros; the activation map cannot be normalized")]
    ZeroActivation,
    #[error("non-finite feature value at {0:?}")]
    NonFinite((usize, usize, usize)),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("{what}: expected {expected}, got {actual}")]
    Mismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("failed to write {path}: {message}")]
    Write { path: PathBuf, message: String },
    #[error(transparent)]
    Data(#[from] crate::dataman::DataError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn to_rgb(img: &PixelBuffer) -> Vec<u8> {
    match img.channels() {
        3 => img.data().to_vec(),
        _ => img.data().iter().flat_map(|&v| [v, v, v]).collect(),
    }
}

fn write_png(
    path: &std::path::Path,
    width: usize,
    height: usize,
    rgb: Vec<u8>,
) -> Result<(), VizError> {
    let img = image::RgbImage::from_raw(width as u32, height as u32, rgb)
        .expect("buffer matches dimensions");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| VizError::Write {
            path: path.to_owned(),
            message: e.to_string(),
        })
}

/// Decodes any image file the `image` crate understands into an RGB buffer.
pub fn read_image(path: &std::path::Path) -> Result<PixelBuffer, String> {
    let img = image::open(path).map_err(|e| e.to_string())?.to_rgb8();
    let (w, h) = img.dimensions();
    PixelBuffer::new(h as usize, w as usize, 3, img.into_raw()).map_err(|e| e.to_string())
}
