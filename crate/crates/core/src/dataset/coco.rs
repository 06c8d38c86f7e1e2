use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{write_atomic, DatasetRecord, Task};
use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::metrics::PageBoxes;
use crate::structure::TagSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_kind: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    /// `[x, y, w, h]` in pixels.
    pub bbox: [f64; 4],
    #[serde(default)]
    pub area: f64,
    #[serde(default)]
    pub iscrowd: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u64,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoDataset {
    #[serde(default)]
    pub info: serde_json::Value,
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    #[serde(default)]
    pub categories: Vec<CocoCategory>,
}

impl CocoDataset {
    pub fn from_records(records: &[&DatasetRecord], info: serde_json::Value) -> Self {
        let mut images = Vec::new();
        let mut annotations = Vec::new();
        for (i, r) in records.iter().filter(|r| r.task == Task::Detection).enumerate() {
            let image_id = i as u64 + 1;
            images.push(CocoImage {
                id: image_id,
                file_name: r.image_path.clone(),
                width: r.width_px,
                height: r.height_px,
                doc_id: Some(r.doc_id.clone()),
                page_index: Some(r.page_index),
                source_kind: Some(r.source_kind.to_string()),
            });
            for b in &r.annotations {
                annotations.push(CocoAnnotation {
                    id: annotations.len() as u64 + 1,
                    image_id,
                    category_id: 1,
                    bbox: [b.x as f64, b.y as f64, b.w as f64, b.h as f64],
                    area: (b.w as u64 * b.h as u64) as f64,
                    iscrowd: 0,
                    score: None,
                });
            }
        }
        CocoDataset {
            info,
            images,
            annotations,
            categories: vec![CocoCategory {
                id: 1,
                name: "table".into(),
            }],
        }
    }

    /// Boxes per image file name.
    pub fn page_boxes(&self) -> PageBoxes {
        let names: BTreeMap<u64, &str> = self.images.iter().map(|i| (i.id, i.file_name.as_str())).collect();
        let mut out: PageBoxes = self
            .images
            .iter()
            .map(|i| (i.file_name.clone(), Vec::new()))
            .collect();
        for a in &self.annotations {
            if let Some(name) = names.get(&a.image_id) {
                out.entry(name.to_string()).or_default().push(bbox_rect(a.bbox));
            }
        }
        out
    }
}

/// Pixel rectangle for a possibly fractional `[x, y, w, h]`: edges rounded
/// to the nearest pixel, clamped at zero.
pub fn bbox_rect(b: [f64; 4]) -> Rect {
    let x0 = b[0].round().max(0.0);
    let y0 = b[1].round().max(0.0);
    let x1 = (b[0] + b[2]).round().max(x0);
    let y1 = (b[1] + b[3]).round().max(y0);
    Rect::new(x0 as u32, y0 as u32, (x1 - x0) as u32, (y1 - y0) as u32)
}

pub fn write_coco(path: &Path, records: &[&DatasetRecord], info: serde_json::Value) -> Result<()> {
    let ds = CocoDataset::from_records(records, info);
    write_atomic(path, serde_json::to_string_pretty(&ds)?.as_bytes())
}

fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_coco_boxes(path: &Path) -> Result<(CocoDataset, PageBoxes)> {
    let ds: CocoDataset = serde_json::from_value(read_json(path)?)?;
    let boxes = ds.page_boxes();
    Ok((ds, boxes))
}

#[derive(Deserialize)]
struct CocoResult {
    image_id: u64,
    bbox: [f64; 4],
}

/// Predictions either as a full COCO document or as a COCO results array
/// whose image ids refer to `gt`.
pub fn read_prediction_boxes(path: &Path, gt: &CocoDataset) -> Result<PageBoxes> {
    let v = read_json(path)?;
    if v.is_array() {
        let results: Vec<CocoResult> = serde_json::from_value(v)?;
        let names: BTreeMap<u64, &str> = gt.images.iter().map(|i| (i.id, i.file_name.as_str())).collect();
        let mut out = PageBoxes::new();
        for r in results {
            let name = names.get(&r.image_id).ok_or_else(|| {
                Error::Config(format!("prediction refers to unknown image id {}", r.image_id))
            })?;
            out.entry(name.to_string()).or_default().push(bbox_rect(r.bbox));
        }
        Ok(out)
    } else {
        let ds: CocoDataset = serde_json::from_value(v)?;
        Ok(ds.page_boxes())
    }
}

pub fn write_structure_tsv(path: &Path, records: &[&DatasetRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records.iter().filter(|r| r.task == Task::Structure) {
        if let Some(t) = &r.target {
            out.push_str(&r.image_path);
            out.push('\t');
            out.push_str(&t.to_string());
            out.push('\n');
        }
    }
    write_atomic(path, out.as_bytes())
}

/// `image_path<TAB>tokens` lines. With `validate` the sequences must be
/// well nested; otherwise only the vocabulary is checked.
pub fn read_structure_tsv(path: &Path, validate: bool) -> Result<BTreeMap<String, TagSequence>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (key, tokens) = line
            .split_once('\t')
            .ok_or_else(|| Error::Config(format!("{}:{}: missing tab", path.display(), n + 1)))?;
        let seq = if validate {
            TagSequence::parse(tokens)?
        } else {
            TagSequence::tokenize(tokens)?
        };
        out.insert(key.to_string(), seq);
    }
    Ok(out)
}
