use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use super::MetricsError;

const REMB_MAGIC: &[u8; 4] = b"REMB";
const REMB_VERSION: u32 = 1;

/// Dense `n x d` matrix of `f32` features, one row per record.
///
/// Construction rejects empty shapes and non-finite entries, so everything
/// downstream can assume clean input.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix(Array2<f32>);

impl EmbeddingMatrix {
    pub fn new(data: Array2<f32>) -> Result<Self, MetricsError> {
        let (rows, cols) = data.dim();
        if rows == 0 || cols == 0 {
            return Err(MetricsError::EmptyMatrix { rows, cols });
        }
        if let Some(((row, col), _)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(MetricsError::NonFinite { row, col });
        }
        Ok(Self(data.as_standard_layout().into_owned()))
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self, MetricsError> {
        if data.len() != rows * cols {
            return Err(MetricsError::DimensionMismatch {
                context: "buffer length vs rows*cols",
                left: data.len(),
                right: rows * cols,
            });
        }
        let arr = Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| MetricsError::Format(e.to_string()))?;
        Self::new(arr)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f32> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array2<f32> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f32> {
        self.0
    }

    /// Copies the given rows, in order, into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self, MetricsError> {
        if rows.is_empty() {
            return Err(MetricsError::EmptyMatrix {
                rows: 0,
                cols: self.cols(),
            });
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.rows()) {
            return Err(MetricsError::DimensionMismatch {
                context: "row index vs row count",
                left: bad,
                right: self.rows(),
            });
        }
        Ok(Self(self.0.select(ndarray::Axis(0), rows)))
    }

    /// Serializes in REMB layout: magic, u32 version, u64 rows, u64 cols,
    /// then row-major little-endian `f32`.
    pub fn write_remb<W: Write>(&self, mut w: W) -> Result<(), MetricsError> {
        w.write_all(REMB_MAGIC)?;
        w.write_all(&REMB_VERSION.to_le_bytes())?;
        w.write_all(&(self.rows() as u64).to_le_bytes())?;
        w.write_all(&(self.cols() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.0.len() * 4);
        for v in self.0.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_remb<R: Read>(mut r: R) -> Result<Self, MetricsError> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != REMB_MAGIC {
            return Err(MetricsError::Format(format!("bad magic {magic:?}")));
        }
        let mut word = [0u8; 4];
        read_exact(&mut r, &mut word, "version")?;
        let version = u32::from_le_bytes(word);
        if version != REMB_VERSION {
            return Err(MetricsError::Format(format!(
                "unsupported version {version}"
            )));
        }
        let mut dword = [0u8; 8];
        read_exact(&mut r, &mut dword, "rows")?;
        let rows = u64::from_le_bytes(dword) as usize;
        read_exact(&mut r, &mut dword, "cols")?;
        let cols = u64::from_le_bytes(dword) as usize;
        let len = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| MetricsError::Format("shape overflow".into()))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != len {
            return Err(MetricsError::Format(format!(
                "payload is {} bytes, expected {len}",
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::from_vec(rows, cols, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MetricsError> {
        self.write_remb(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        Self::read_remb(BufReader::new(File::open(path)?))
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), MetricsError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => MetricsError::Format(format!("truncated at {what}")),
        _ => MetricsError::Io(e),
    })
}
