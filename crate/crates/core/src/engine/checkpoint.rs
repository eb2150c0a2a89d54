use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{EngineError, OptimizerConfig, OptimizerState, Param, SchedulerState};

const MAGIC: &[u8; 4] = b"RCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to resume training exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointBundle {
    pub params: Vec<Param>,
    pub optimizer: OptimizerState,
    pub scheduler: SchedulerState,
    /// Number of completed epochs.
    pub epoch: usize,
    pub best_rank1: f64,
    pub config_digest: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config_digest: String,
    epoch: usize,
    best_rank1: f64,
    optimizer: OptimizerHeader,
    scheduler: SchedulerState,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerHeader {
    config: OptimizerConfig,
    lr: f64,
    step_count: u64,
    param_steps: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    /// `None` for parameters, `Some(k)` for the k-th optimizer buffer of `name`.
    buffer: Option<usize>,
    shape: [usize; 2],
    /// Offset into the payload, in `f32` elements.
    offset: usize,
}

/// `RCKP`, u32 version, u64 header length, JSON header, then every tensor
/// as little-endian `f32` in header order.
pub fn save_checkpoint(bundle: &CheckpointBundle, path: &Path) -> Result<(), EngineError> {
    let mut payload: Vec<(&str, Option<usize>, &Array2<f32>)> = Vec::new();
    for p in &bundle.params {
        payload.push((&p.name, None, &p.value));
    }
    for (p, bufs) in bundle.params.iter().zip(&bundle.optimizer.buffers) {
        for (k, b) in bufs.iter().enumerate() {
            payload.push((&p.name, Some(k), b));
        }
    }
    let mut offset = 0usize;
    let tensors = payload
        .iter()
        .map(|&(name, buffer, t)| {
            let entry = TensorEntry {
                name: name.to_owned(),
                buffer,
                shape: [t.nrows(), t.ncols()],
                offset,
            };
            offset += t.len();
            entry
        })
        .collect();

    let header = Header {
        config_digest: bundle.config_digest.clone(),
        epoch: bundle.epoch,
        best_rank1: bundle.best_rank1,
        optimizer: OptimizerHeader {
            config: bundle.optimizer.config,
            lr: bundle.optimizer.lr,
            step_count: bundle.optimizer.step_count,
            param_steps: bundle.optimizer.param_steps.clone(),
        },
        scheduler: bundle.scheduler.clone(),
        tensors,
    };
    let header = serde_json::to_vec(&header).expect("header serializes");

    let write_err = |source| EngineError::CheckpointWrite {
        path: path.to_owned(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(write_err)?);
    let mut bytes = Vec::with_capacity(16 + header.len() + offset * 4);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&header);
    for (_, _, t) in payload {
        for v in t.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&bytes).map_err(write_err)?;
    w.flush().map_err(write_err)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<CheckpointBundle, EngineError> {
    let format = |message: String| EngineError::CheckpointFormat {
        path: path.to_owned(),
        message,
    };
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 {
        return Err(format("file truncated before header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(format(format!("bad magic bytes {:?}", &bytes[..4])));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(format(format!(
            "version {version} not supported (expected {CHECKPOINT_VERSION})"
        )));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| format("file truncated inside header".into()))?;
    let header: Header = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|e| format(format!("bad header: {e}")))?;
    let payload = &bytes[header_end..];

    let total: usize = header.tensors.iter().map(|t| t.shape[0] * t.shape[1]).sum();
    if payload.len() != total * 4 {
        return Err(format(format!(
            "payload is {} bytes, header describes {}",
            payload.len(),
            total * 4
        )));
    }
    let read_tensor = |t: &TensorEntry| -> Result<Array2<f32>, EngineError> {
        let len = t.shape[0] * t.shape[1];
        let start = t.offset * 4;
        let raw = payload
            .get(start..start + len * 4)
            .ok_or_else(|| format(format!("tensor '{}' out of bounds", t.name)))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Array2::from_shape_vec((t.shape[0], t.shape[1]), data).expect("shape matches length"))
    };

    let mut params = Vec::new();
    let mut buffers: Vec<Vec<Array2<f32>>> = Vec::new();
    for t in &header.tensors {
        match t.buffer {
            None => {
                params.push(Param {
                    name: t.name.clone(),
                    value: read_tensor(t)?,
                });
                buffers.push(Vec::new());
            }
            Some(k) => {
                let idx = params
                    .iter()
                    .position(|p| p.name == t.name)
                    .ok_or_else(|| format(format!("buffer for unknown parameter '{}'", t.name)))?;
                if buffers[idx].len() != k {
                    return Err(format(format!("buffers of '{}' out of order", t.name)));
                }
                buffers[idx].push(read_tensor(t)?);
            }
        }
    }
    if header.optimizer.param_steps.len() != params.len() {
        return Err(format(
            "optimizer step counts do not match parameters".into(),
        ));
    }

    Ok(CheckpointBundle {
        params,
        optimizer: OptimizerState {
            config: header.optimizer.config,
            lr: header.optimizer.lr,
            step_count: header.optimizer.step_count,
            param_steps: header.optimizer.param_steps,
            buffers,
        },
        scheduler: header.scheduler,
        epoch: header.epoch,
        best_rank1: header.best_rank1,
        config_digest: header.config_digest,
    })
}
