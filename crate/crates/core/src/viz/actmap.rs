use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3, Axis};

use super::{jet, to_rgb, write_png, VizError};
use crate::dataman::PixelBuffer;
use crate::metrics::EmbeddingMatrix;

/// Spatial activation map, non-negative with unit Frobenius norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMap {
    pub data: Array2<f32>,
    /// `(C, H, W)` of the feature map it was computed from.
    pub source_shape: (usize, usize, usize),
}

/// Channel-wise sum of absolute activations, divided by its spatial L2 norm.
pub fn activation_map(feature_map: &Array3<f32>) -> Result<ActivationMap, VizError> {
    let shape = feature_map.dim();
    if shape.0 == 0 || shape.1 == 0 || shape.2 == 0 {
        return Err(VizError::EmptyFeatureMap(shape));
    }
    if let Some((idx, _)) = feature_map.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(VizError::NonFinite(idx));
    }
    let summed: Array2<f64> = feature_map.mapv(|v| f64::from(v).abs()).sum_axis(Axis(0));
    let norm = summed.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(VizError::ZeroActivation);
    }
    Ok(ActivationMap {
        data: summed.mapv(|v| (v / norm) as f32),
        source_shape: shape,
    })
}

fn bilinear(map: &Array2<f32>, height: usize, width: usize) -> Array2<f32> {
    let (h, w) = map.dim();
    let sy = h as f32 / height as f32;
    let sx = w as f32 / width as f32;
    Array2::from_shape_fn((height, width), |(y, x)| {
        let fy = ((y as f32 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f32);
        let fx = ((x as f32 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f32);
        let (y0, x0) = (fy.floor() as usize, fx.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
        let (wy, wx) = (fy - y0 as f32, fx - x0 as f32);
        let top = map[[y0, x0]] * (1.0 - wx) + map[[y0, x1]] * wx;
        let bottom = map[[y1, x0]] * (1.0 - wx) + map[[y1, x1]] * wx;
        top * (1.0 - wy) + bottom * wy
    })
}

/// Sidecar holding the normalized map as a REMB matrix (`rows = H`, `cols = W`).
pub fn raw_map_path(out_path: &Path) -> PathBuf {
    out_path.with_extension("remb")
}

/// Renders the activation map of `feature_map` over `image`.
///
/// The normalized map is min-max rescaled for display, upsampled
/// bilinearly to the image size, coloured with [`jet`] and blended 50/50
/// with the image. The overlay is written to `out_path` as PNG and the
/// normalized map next to it (see [`raw_map_path`]).
pub fn visactmap(
    feature_map: &Array3<f32>,
    image: &PixelBuffer,
    out_path: &Path,
) -> Result<ActivationMap, VizError> {
    let amap = activation_map(feature_map)?;
    let (lo, hi) = amap
        .data
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    let display = amap
        .data
        .mapv(|v| if span > 0.0 { (v - lo) / span } else { 1.0 });
    let up = bilinear(&display, image.height(), image.width());

    let base = to_rgb(image);
    let mut rgb = Vec::with_capacity(base.len());
    for (px, &heat) in base.chunks_exact(3).zip(up.iter()) {
        let colour = jet(heat);
        for c in 0..3 {
            rgb.push(((f32::from(px[c]) + f32::from(colour[c])) * 0.5).round() as u8);
        }
    }
    write_png(out_path, image.width(), image.height(), rgb)?;
    EmbeddingMatrix::new(amap.data.clone())?.save(raw_map_path(out_path))?;
    Ok(amap)
}
