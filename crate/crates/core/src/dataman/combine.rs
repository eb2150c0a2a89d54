use super::{DataError, DatasetSplit, TestSegment};

/// Sums several splits into one training set.
///
/// Source `i`'s train pids are shifted by the total pid count of sources
/// `0..i`, and its camids by their total camera count, so labels from
/// different sources never collide. Query and gallery records are
/// concatenated untouched; [`DatasetSplit::segments`] keeps each source's
/// ranges for separate evaluation.
pub fn combine_splits(sources: &[DatasetSplit]) -> Result<DatasetSplit, DataError> {
    let first = sources.first().ok_or(DataError::NoSources)?;
    if sources.len() == 1 {
        return Ok(first.clone());
    }
    let modality = first.modality();
    if let Some(other) = sources.iter().find(|s| s.modality() != modality) {
        return Err(DataError::MixedModality(modality, other.modality()));
    }

    let mut train = Vec::new();
    let mut query = Vec::new();
    let mut gallery = Vec::new();
    let mut origin = Vec::new();
    let mut segments = Vec::new();
    let (mut pid_offset, mut cam_offset) = (0usize, 0usize);

    for source in sources {
        train.extend(source.train().iter().map(|r| {
            r.with_labels(
                (r.pid() as usize + pid_offset) as u32,
                (r.camid() as usize + cam_offset) as u32,
            )
        }));
        origin.extend_from_slice(source.train_pid_origin());
        for seg in source.segments() {
            segments.push(TestSegment {
                dataset_tag: seg.dataset_tag.clone(),
                query: seg.query.start + query.len()..seg.query.end + query.len(),
                gallery: seg.gallery.start + gallery.len()..seg.gallery.end + gallery.len(),
            });
        }
        query.extend_from_slice(source.query());
        gallery.extend_from_slice(source.gallery());
        pid_offset += source.num_train_pids();
        cam_offset += source.num_train_cams();
    }

    Ok(DatasetSplit::from_parts(
        modality, train, query, gallery, pid_offset, cam_offset, origin, segments,
    ))
}
