use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{read_image, to_rgb, write_png, VizError};
use crate::dataman::{PixelBuffer, Record};
use crate::metrics::DistanceMatrix;

/// Tile border width in pixels.
pub const BORDER: usize = 3;
/// White spacing between tiles in pixels.
pub const GAP: usize = 10;

const PLACEHOLDER_HEIGHT: usize = 128;
const PLACEHOLDER_WIDTH: usize = 64;
const PLACEHOLDER_GREY: u8 = 160;

const BLACK: [u8; 3] = [0, 0, 0];
const GREEN: [u8; 3] = [0, 255, 0];
const RED: [u8; 3] = [255, 0, 0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub gallery_index: usize,
    pub distance: f32,
    pub is_match: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_index: usize,
    pub entries: Vec<RankedEntry>,
}

/// Top-`k` gallery entries per query, same-pid-same-camera entries removed,
/// ordered by distance then gallery index.
pub fn ranked_lists(
    dist: &DistanceMatrix,
    q_pids: &[u32],
    q_camids: &[u32],
    g_pids: &[u32],
    g_camids: &[u32],
    k: usize,
) -> Result<Vec<RankedList>, VizError> {
    if k == 0 {
        return Err(VizError::InvalidK);
    }
    for (what, expected, actual) in [
        (
            "query labels",
            dist.num_query(),
            q_pids.len().min(q_camids.len()),
        ),
        (
            "gallery labels",
            dist.num_gallery(),
            g_pids.len().min(g_camids.len()),
        ),
    ] {
        if expected != actual {
            return Err(VizError::Mismatch {
                what,
                expected,
                actual,
            });
        }
    }
    let view = dist.view();
    Ok((0..dist.num_query())
        .map(|qi| {
            let row = view.row(qi);
            let mut order: Vec<usize> = (0..dist.num_gallery())
                .filter(|&j| !(g_pids[j] == q_pids[qi] && g_camids[j] == q_camids[qi]))
                .collect();
            order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
            RankedList {
                query_index: qi,
                entries: order
                    .into_iter()
                    .take(k)
                    .map(|j| RankedEntry {
                        gallery_index: j,
                        distance: row[j],
                        is_match: g_pids[j] == q_pids[qi],
                    })
                    .collect(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VisrankOutput {
    pub rows: Vec<(PathBuf, RankedList)>,
    pub index: PathBuf,
    /// Images that could not be read and were drawn as placeholders.
    pub placeholders: usize,
}

fn resolve(image_ref: &str, image_root: Option<&Path>) -> PathBuf {
    let p = Path::new(image_ref);
    match image_root {
        Some(root) if p.is_relative() => root.join(p),
        _ => p.to_owned(),
    }
}

/// Loads the first frame of a record, or a grey placeholder.
fn load_tile(record: &Record, image_root: Option<&Path>) -> (PixelBuffer, bool) {
    let path = resolve(&record.refs()[0], image_root);
    match read_image(&path) {
        Ok(img) => (img, false),
        Err(e) => {
            log::warn!("cannot read {}: {e}; using placeholder", path.display());
            let placeholder =
                PixelBuffer::filled(PLACEHOLDER_HEIGHT, PLACEHOLDER_WIDTH, 3, PLACEHOLDER_GREY)
                    .expect("valid placeholder size");
            (placeholder, true)
        }
    }
}

struct Canvas {
    width: usize,
    rgb: Vec<u8>,
}

impl Canvas {
    fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            rgb: vec![255; width * height * 3],
        }
    }

    fn put(&mut self, x: usize, y: usize, c: [u8; 3]) {
        let at = (y * self.width + x) * 3;
        self.rgb[at..at + 3].copy_from_slice(&c);
    }

    /// Draws `img` with a coloured border, top-left corner at `(left, 0)`.
    fn tile(&mut self, left: usize, img: &PixelBuffer, colour: [u8; 3]) {
        let (h, w) = (img.height() + 2 * BORDER, img.width() + 2 * BORDER);
        let rgb = to_rgb(img);
        for y in 0..h {
            for x in 0..w {
                let inside = (BORDER..BORDER + img.height()).contains(&y)
                    && (BORDER..BORDER + img.width()).contains(&x);
                let c = if inside {
                    let at = ((y - BORDER) * img.width() + (x - BORDER)) * 3;
                    [rgb[at], rgb[at + 1], rgb[at + 2]]
                } else {
                    colour
                };
                self.put(left + x, y, c);
            }
        }
    }
}

/// Writes one PNG row per query plus an `index.html`.
///
/// Each row shows the query (black border) followed by its top-`k` gallery
/// entries, green when the identity matches and red otherwise. Gallery
/// images are resized to the query image size; every tile is the image size
/// plus a [`BORDER`]-pixel frame, tiles separated by [`GAP`] pixels.
/// Relative image references are resolved against `image_root`.
pub fn visrank(
    dist: &DistanceMatrix,
    query: &[Record],
    gallery: &[Record],
    k: usize,
    out_dir: &Path,
    image_root: Option<&Path>,
) -> Result<VisrankOutput, VizError> {
    let labels = |r: &[Record]| -> (Vec<u32>, Vec<u32>) {
        (
            r.iter().map(Record::pid).collect(),
            r.iter().map(Record::camid).collect(),
        )
    };
    let (qp, qc) = labels(query);
    let (gp, gc) = labels(gallery);
    let lists = ranked_lists(dist, &qp, &qc, &gp, &gc, k)?;
    std::fs::create_dir_all(out_dir)?;

    // Each row: output file, ranked list, and how many placeholders it drew.
    type Rendered = ((PathBuf, RankedList), usize);
    let rendered: Vec<Result<Rendered, VizError>> = lists
        .into_par_iter()
        .map(|list| {
            let (q_img, q_missing) = load_tile(&query[list.query_index], image_root);
            let (h, w) = (q_img.height(), q_img.width());
            let mut missing = usize::from(q_missing);
            let tiles: Vec<(PixelBuffer, [u8; 3])> = list
                .entries
                .iter()
                .map(|e| {
                    let (img, m) = load_tile(&gallery[e.gallery_index], image_root);
                    missing += usize::from(m);
                    (img.resize(h, w), if e.is_match { GREEN } else { RED })
                })
                .collect();
            let tile_w = w + 2 * BORDER;
            let n = tiles.len() + 1;
            let mut canvas = Canvas::new(n * tile_w + (n - 1) * GAP, h + 2 * BORDER);
            canvas.tile(0, &q_img, BLACK);
            for (i, (img, colour)) in tiles.iter().enumerate() {
                canvas.tile((i + 1) * (tile_w + GAP), img, *colour);
            }
            let name = format!("q{:05}_pid{}.png", list.query_index, qp[list.query_index]);
            let path = out_dir.join(name);
            write_png(&path, canvas.width, h + 2 * BORDER, canvas.rgb)?;
            Ok(((path, list), missing))
        })
        .collect();

    let mut rows = Vec::with_capacity(rendered.len());
    let mut placeholders = 0;
    for r in rendered {
        let (row, missing) = r?;
        placeholders += missing;
        rows.push(row);
    }

    let mut html = String::from("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Ranked results</title></head><body>\n");
    for (path, list) in &rows {
        let file = path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default();
        html.push_str(&format!(
            "<div><p>query {} (pid {})</p><img src=\"{file}\"></div>\n",
            list.query_index, qp[list.query_index]
        ));
    }
    html.push_str("</body></html>\n");
    let index = out_dir.join("index.html");
    std::fs::write(&index, html)?;

    Ok(VisrankOutput {
        rows,
        index,
        placeholders,
    })
}
