use ndarray::{Array2, Axis};

use super::{EmbeddingMatrix, MetricsError};

/// Mean-pools per-frame features into one row per tracklet.
///
/// `bounds` are half-open `(start, end)` row ranges that must tile
/// `0..per_frame.rows()` in order, without gaps or overlaps.
pub fn pool_tracklet_features(
    per_frame: &EmbeddingMatrix,
    bounds: &[(usize, usize)],
) -> Result<EmbeddingMatrix, MetricsError> {
    if bounds.is_empty() {
        return Err(MetricsError::InvalidBounds("no tracklets".into()));
    }
    let mut cursor = 0usize;
    for (t, &(start, end)) in bounds.iter().enumerate() {
        if start != cursor {
            return Err(MetricsError::InvalidBounds(format!(
                "tracklet {t} starts at {start}, expected {cursor}"
            )));
        }
        if end <= start {
            return Err(MetricsError::InvalidBounds(format!(
                "tracklet {t} is empty"
            )));
        }
        cursor = end;
    }
    if cursor != per_frame.rows() {
        return Err(MetricsError::InvalidBounds(format!(
            "tracklets cover {cursor} frames, matrix has {}",
            per_frame.rows()
        )));
    }

    let frames = per_frame.view();
    let mut out = Array2::<f32>::zeros((bounds.len(), per_frame.cols()));
    for (mut row, &(start, end)) in out.axis_iter_mut(Axis(0)).zip(bounds) {
        let n = (end - start) as f64;
        for (c, v) in row.iter_mut().enumerate() {
            let sum: f64 = (start..end).map(|f| f64::from(frames[[f, c]])).sum();
            *v = (sum / n) as f32;
        }
    }
    EmbeddingMatrix::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_and_constant_tracklets() {
        let m =
            EmbeddingMatrix::from_vec(5, 2, vec![0., 2., 2., 0., 3., 3., 3., 3., 3., 3.]).unwrap();
        let p = pool_tracklet_features(&m, &[(0, 2), (2, 5)]).unwrap();
        assert_eq!(p.view().row(0).to_vec(), vec![1.0, 1.0]);
        assert_eq!(p.view().row(1).to_vec(), vec![3.0, 3.0]);
    }

    #[test]
    fn rejects_gaps_and_overlaps() {
        let m = EmbeddingMatrix::from_vec(4, 1, vec![1.0; 4]).unwrap();
        for bad in [
            vec![(0, 2), (3, 4)],
            vec![(0, 2), (1, 4)],
            vec![(0, 3)],
            vec![(0, 0), (0, 4)],
        ] {
            assert!(matches!(
                pool_tracklet_features(&m, &bad),
                Err(MetricsError::InvalidBounds(_))
            ));
        }
    }
}
