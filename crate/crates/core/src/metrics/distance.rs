use ndarray::{linalg::general_mat_mul, s, Array1, Array2, ArrayView2, Axis, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EmbeddingMatrix, MetricsError};

/// Query rows per tile of the blocked kernel.
const QUERY_BLOCK: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `||q - g||^2`, rank-equivalent to Euclidean distance.
    #[default]
    EuclideanSquared,
    /// `1 - cos(q, g)`, in `[0, 2]`.
    Cosine,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euclidean_squared" | "euclidean" => Ok(Self::EuclideanSquared),
            "cosine" => Ok(Self::Cosine),
            other => Err(format!(
                "unknown metric '{other}' (expected euclidean_squared|cosine)"
            )),
        }
    }
}

/// `q x g` matrix of query-to-gallery distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    data: Array2<f32>,
    metric: Metric,
}

impl DistanceMatrix {
    pub fn from_array(data: Array2<f32>, metric: Metric) -> Result<Self, MetricsError> {
        if let Some(((row, col), _)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(MetricsError::NonFinite { row, col });
        }
        Ok(Self { data, metric })
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn num_query(&self) -> usize {
        self.data.nrows()
    }

    pub fn num_gallery(&self) -> usize {
        self.data.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f32> {
        self.data.view()
    }

    pub fn into_inner(self) -> Array2<f32> {
        self.data
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f32) -> Self {
        Self {
            data: self.data.mapv(|v| v * factor),
            metric: self.metric,
        }
    }
}

fn check_dims(query: &EmbeddingMatrix, gallery: &EmbeddingMatrix) -> Result<(), MetricsError> {
    if query.cols() != gallery.cols() {
        return Err(MetricsError::DimensionMismatch {
            context: "query vs gallery feature dimension",
            left: query.cols(),
            right: gallery.cols(),
        });
    }
    Ok(())
}

fn squared_norms(m: &Array2<f64>) -> Array1<f64> {
    m.map_axis(Axis(1), |row| row.dot(&row))
}

fn unit_rows(m: &EmbeddingMatrix, side: &'static str) -> Result<Array2<f64>, MetricsError> {
    let mut out = m.as_array().mapv(f64::from);
    for (row, mut r) in out.axis_iter_mut(Axis(0)).enumerate() {
        let norm = r.dot(&r).sqrt();
        if norm == 0.0 {
            return Err(MetricsError::ZeroNorm { side, row });
        }
        r /= norm;
    }
    Ok(out)
}

/// Query-to-gallery distances via a tiled matrix product.
///
/// Query rows are processed in fixed-size tiles, each tile multiplied
/// against the whole gallery with an `f64` GEMM, tiles spread over the rayon
/// pool. The tile size is fixed, so results do not depend on thread count.
pub fn distance_matrix(
    query: &EmbeddingMatrix,
    gallery: &EmbeddingMatrix,
    metric: Metric,
) -> Result<DistanceMatrix, MetricsError> {
    check_dims(query, gallery)?;
    let (nq, ng) = (query.rows(), gallery.rows());

    let (q, g) = match metric {
        Metric::EuclideanSquared => (
            query.as_array().mapv(f64::from),
            gallery.as_array().mapv(f64::from),
        ),
        Metric::Cosine => (unit_rows(query, "query")?, unit_rows(gallery, "gallery")?),
    };
    let q_norms = squared_norms(&q);
    let g_norms = squared_norms(&g);
    let g_t = g.t();

    let mut out = Array2::<f32>::zeros((nq, ng));
    out.axis_chunks_iter_mut(Axis(0), QUERY_BLOCK)
        .into_par_iter()
        .enumerate()
        .for_each(|(block, mut out_block)| {
            let start = block * QUERY_BLOCK;
            let rows = out_block.nrows();
            let q_block = q.slice(s![start..start + rows, ..]);
            let mut gram = Array2::<f64>::zeros((rows, ng));
            general_mat_mul(1.0, &q_block, &g_t, 0.0, &mut gram);
            match metric {
                Metric::EuclideanSquared => {
                    for (i, (mut out_row, gram_row)) in out_block
                        .axis_iter_mut(Axis(0))
                        .zip(gram.axis_iter(Axis(0)))
                        .enumerate()
                    {
                        let qn = q_norms[start + i];
                        Zip::from(&mut out_row)
                            .and(&gram_row)
                            .and(&g_norms)
                            .for_each(|o, &dot, &gn| {
                                *o = (qn + gn - 2.0 * dot).max(0.0) as f32;
                            });
                    }
                }
                Metric::Cosine => {
                    Zip::from(&mut out_block).and(&gram).for_each(|o, &sim| {
                        *o = (1.0 - sim).clamp(0.0, 2.0) as f32;
                    });
                }
            }
        });

    Ok(DistanceMatrix { data: out, metric })
}

/// Reference double loop over query/gallery pairs, one scalar accumulation
/// per entry. Slow; kept for cross-checking and timing the tiled kernel.
pub fn naive_distance_matrix(
    query: &EmbeddingMatrix,
    gallery: &EmbeddingMatrix,
    metric: Metric,
) -> Result<DistanceMatrix, MetricsError> {
    check_dims(query, gallery)?;
    let (q, g) = (query.view(), gallery.view());
    let mut out = Array2::<f32>::zeros((q.nrows(), g.nrows()));
    for i in 0..q.nrows() {
        for j in 0..g.nrows() {
            let value = match metric {
                Metric::EuclideanSquared => {
                    let mut acc = 0.0f64;
                    for k in 0..q.ncols() {
                        let diff = f64::from(q[[i, k]]) - f64::from(g[[j, k]]);
                        acc += diff * diff;
                    }
                    acc
                }
                Metric::Cosine => {
                    let (mut dot, mut qq, mut gg) = (0.0f64, 0.0f64, 0.0f64);
                    for k in 0..q.ncols() {
                        let (a, b) = (f64::from(q[[i, k]]), f64::from(g[[j, k]]));
                        dot += a * b;
                        qq += a * a;
                        gg += b * b;
                    }
                    if qq == 0.0 {
                        return Err(MetricsError::ZeroNorm {
                            side: "query",
                            row: i,
                        });
                    }
                    if gg == 0.0 {
                        return Err(MetricsError::ZeroNorm {
                            side: "gallery",
                            row: j,
                        });
                    }
                    (1.0 - dot / (qq.sqrt() * gg.sqrt())).clamp(0.0, 2.0)
                }
            };
            out[[i, j]] = value as f32;
        }
    }
    Ok(DistanceMatrix { data: out, metric })
}
