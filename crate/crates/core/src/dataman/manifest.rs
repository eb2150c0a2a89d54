use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, DatasetSplit, Modality, Record};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    modality: Modality,
    dataset_tag: String,
    train: Vec<serde_json::Value>,
    query: Vec<serde_json::Value>,
    gallery: Vec<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImageEntry {
    path: String,
    pid: i64,
    camid: i64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VideoEntry {
    paths: Vec<String>,
    pid: i64,
    camid: i64,
}

fn label(value: i64, field: String) -> Result<u32, DataError> {
    u32::try_from(value).map_err(|_| DataError::Validation {
        field,
        message: format!("must be a non-negative 32-bit integer, got {value}"),
    })
}

fn parse_partition(
    name: &str,
    entries: Vec<serde_json::Value>,
    modality: Modality,
    tag: &str,
) -> Result<Vec<Record>, DataError> {
    entries
        .into_iter()
        .enumerate()
        .map(|(i, value)| {
            let at = |f: &str| format!("{name}[{i}].{f}");
            let shape_err = |e: serde_json::Error| DataError::Validation {
                field: format!("{name}[{i}]"),
                message: e.to_string(),
            };
            match modality {
                Modality::Image => {
                    let e: ImageEntry = serde_json::from_value(value).map_err(shape_err)?;
                    Ok(Record::image(
                        e.path,
                        label(e.pid, at("pid"))?,
                        label(e.camid, at("camid"))?,
                        tag,
                    ))
                }
                Modality::Video => {
                    let e: VideoEntry = serde_json::from_value(value).map_err(shape_err)?;
                    if e.paths.is_empty() {
                        return Err(DataError::Validation {
                            field: at("paths"),
                            message: "tracklet needs at least one frame".into(),
                        });
                    }
                    Ok(Record::tracklet(
                        e.paths,
                        label(e.pid, at("pid"))?,
                        label(e.camid, at("camid"))?,
                        tag,
                    ))
                }
            }
        })
        .collect()
}

/// Parses and validates a manifest document.
pub fn parse_manifest(text: &str) -> Result<DatasetSplit, DataError> {
    let file: ManifestFile = serde_json::from_str(text).map_err(|e| DataError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.dataset_tag.is_empty() {
        return Err(DataError::Validation {
            field: "dataset_tag".into(),
            message: "must be non-empty".into(),
        });
    }
    let tag = file.dataset_tag.as_str();
    let train = parse_partition("train", file.train, file.modality, tag)?;
    let query = parse_partition("query", file.query, file.modality, tag)?;
    let gallery = parse_partition("gallery", file.gallery, file.modality, tag)?;
    DatasetSplit::new(tag, file.modality, train, query, gallery)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetSplit, DataError> {
    parse_manifest(&std::fs::read_to_string(path)?)
}

fn entry(record: &Record, pid: u32) -> serde_json::Value {
    match record {
        Record::Image(r) => serde_json::to_value(ImageEntry {
            path: r.image_ref.clone(),
            pid: pid.into(),
            camid: r.camid.into(),
        }),
        Record::Video(r) => serde_json::to_value(VideoEntry {
            paths: r.image_refs.clone(),
            pid: pid.into(),
            camid: r.camid.into(),
        }),
    }
    .expect("plain struct serializes")
}

/// Renders a split back to manifest JSON with the original train pids, so
/// that parsing the output reproduces the same split.
///
/// Combined splits serialize under the first segment's tag.
pub fn serialize_manifest(split: &DatasetSplit) -> String {
    let origin = split.train_pid_origin();
    let file = ManifestFile {
        modality: split.modality(),
        dataset_tag: split.dataset_tag().to_owned(),
        train: split
            .train()
            .iter()
            .map(|r| entry(r, origin[r.pid() as usize]))
            .collect(),
        query: split.query().iter().map(|r| entry(r, r.pid())).collect(),
        gallery: split.gallery().iter().map(|r| entry(r, r.pid())).collect(),
    };
    serde_json::to_string_pretty(&file).expect("manifest serializes")
}

pub fn save_manifest(split: &DatasetSplit, path: impl AsRef<Path>) -> Result<(), DataError> {
    std::fs::write(path, serialize_manifest(split))?;
    Ok(())
}
