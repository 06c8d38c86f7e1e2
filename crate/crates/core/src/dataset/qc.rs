use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{write_atomic, DatasetRecord, Task};
use crate::error::{Error, Result};
use crate::render::PageImage;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QcItem {
    pub sample_index: usize,
    pub record_id: String,
    pub image_path: String,
    /// Review image relative to the QC directory.
    #[serde(default)]
    pub review_image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Filled in by the reviewer: "ok" or "error".
    #[serde(default)]
    pub verdict: Option<String>,
    /// Optional error category, e.g. missed, mixed, incomplete, overlapped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

/// Uniform sample of `n` records without replacement, in sampled order.
pub fn qc_sample(records: &[DatasetRecord], n: usize, seed: u64) -> Result<Vec<QcItem>> {
    if n > records.len() {
        return Err(Error::SampleTooLarge {
            requested: n,
            available: records.len(),
        });
    }
    let mut order: Vec<&DatasetRecord> = records.iter().collect();
    order.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, order.len(), n)
        .into_iter()
        .enumerate()
        .map(|(k, i)| {
            let r = order[i];
            QcItem {
                sample_index: k,
                record_id: r.record_id.clone(),
                image_path: r.image_path.clone(),
                review_image: String::new(),
                target: r.target.as_ref().map(|t| t.to_string()),
                verdict: None,
                category: None,
            }
        })
        .collect())
}

fn draw_rect(img: &mut PageImage, x: u32, y: u32, w: u32, h: u32, stroke: u32) {
    let red = [255, 0, 0];
    let x1 = (x + w).min(img.width_px);
    let y1 = (y + h).min(img.height_px);
    for py in y..y1 {
        for px in x..x1 {
            if px < x + stroke || py < y + stroke || px + stroke >= x1 || py + stroke >= y1 {
                img.set_pixel(px, py, red);
            }
        }
    }
}

/// Writes review images (boxes drawn in red, cropped around them) and a
/// `sample.jsonl` ready for verdicts.
pub fn write_qc_sample(
    items: &mut [QcItem],
    records: &[DatasetRecord],
    dataset_root: &Path,
    qc_dir: &Path,
) -> Result<()> {
    let by_id: BTreeMap<&str, &DatasetRecord> =
        records.iter().map(|r| (r.record_id.as_str(), r)).collect();
    let images = qc_dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let mut lines = String::new();
    for item in items.iter_mut() {
        let r = by_id
            .get(item.record_id.as_str())
            .ok_or_else(|| Error::Config(format!("unknown record {}", item.record_id)))?;
        let mut img = PageImage::load_png(&dataset_root.join(&r.image_path), r.page_index)?;
        let review = if r.task == Task::Detection && !r.annotations.is_empty() {
            for b in &r.annotations {
                draw_rect(&mut img, b.x, b.y, b.w, b.h, 2);
            }
            let margin = 20;
            let x0 = r.annotations.iter().map(|b| b.x).min().unwrap().saturating_sub(margin);
            let y0 = r.annotations.iter().map(|b| b.y).min().unwrap().saturating_sub(margin);
            let x1 = r.annotations.iter().map(|b| b.x + b.w).max().unwrap() + margin;
            let y1 = r.annotations.iter().map(|b| b.y + b.h).max().unwrap() + margin;
            img.crop(x0, y0, x1 - x0, y1 - y0)
        } else {
            img
        };
        let name = format!("{:05}_{}.png", item.sample_index, item.record_id);
        review.save_png(&images.join(&name))?;
        item.review_image = format!("images/{name}");
        lines.push_str(&serde_json::to_string(item)?);
        lines.push('\n');
    }
    write_atomic(&qc_dir.join("sample.jsonl"), lines.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QcVerdict {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcReport {
    pub reviewed: usize,
    pub errors: usize,
    pub unreviewed: usize,
    pub error_rate: f64,
    pub by_category: BTreeMap<String, usize>,
}

impl QcReport {
    pub fn from_verdicts(verdicts: &[(Option<QcVerdict>, Option<String>)]) -> Self {
        let mut r = QcReport {
            reviewed: 0,
            errors: 0,
            unreviewed: 0,
            error_rate: 0.0,
            by_category: BTreeMap::new(),
        };
        for (v, cat) in verdicts {
            match v {
                None => r.unreviewed += 1,
                Some(QcVerdict::Ok) => r.reviewed += 1,
                Some(QcVerdict::Error) => {
                    r.reviewed += 1;
                    r.errors += 1;
                    let c = cat.clone().unwrap_or_else(|| "unspecified".into());
                    *r.by_category.entry(c).or_default() += 1;
                }
            }
        }
        if r.reviewed > 0 {
            r.error_rate = r.errors as f64 / r.reviewed as f64;
        }
        r
    }
}

/// Reads a reviewed `sample.jsonl` and computes the label-error rate.
pub fn import_verdicts(path: &Path) -> Result<QcReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut verdicts = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let item: QcItem = serde_json::from_str(line)?;
        let v = match item.verdict.as_deref().map(|s| s.trim().to_ascii_lowercase()) {
            None => None,
            Some(s) if s.is_empty() => None,
            Some(s) if s == "ok" || s == "correct" => Some(QcVerdict::Ok),
            Some(s) if s == "error" || s == "incorrect" => Some(QcVerdict::Error),
            Some(s) => return Err(Error::Config(format!("unknown verdict '{s}'"))),
        };
        verdicts.push((v, item.category));
    }
    Ok(QcReport::from_verdicts(&verdicts))
}

#[cfg(test)]
mod tests {
    use super::super::Split;
    use super::*;
    use crate::ingest::SourceKind;

    fn recs(n: usize) -> Vec<DatasetRecord> {
        (0..n)
            .map(|i| DatasetRecord {
                record_id: format!("r{i}"),
                task: Task::Structure,
                image_path: format!("images/r{i}.png"),
                width_px: 1,
                height_px: 1,
                annotations: vec![],
                target: None,
                structure_flags: None,
                split: Split::Train,
                doc_id: "d".into(),
                page_index: 0,
                source_kind: SourceKind::Word,
                table_index: None,
            })
            .collect()
    }

    #[test]
    fn full_sample_is_permutation() {
        let r = recs(30);
        let s = qc_sample(&r, 30, 4).unwrap();
        let mut ids: Vec<&str> = s.iter().map(|i| i.record_id.as_str()).collect();
        let shuffled = ids.clone();
        ids.sort();
        let mut all: Vec<&str> = r.iter().map(|x| x.record_id.as_str()).collect();
        all.sort();
        assert_eq!(ids, all);
        assert_ne!(shuffled, all);
        assert_eq!(qc_sample(&r, 30, 4).unwrap(), s);
    }

    #[test]
    fn too_many() {
        assert!(matches!(qc_sample(&recs(3), 4, 0), Err(Error::SampleTooLarge { .. })));
    }

    #[test]
    fn five_in_a_thousand() {
        let v: Vec<(Option<QcVerdict>, Option<String>)> = (0..1000)
            .map(|i| (Some(if i < 5 { QcVerdict::Error } else { QcVerdict::Ok }), None))
            .collect();
        assert_eq!(QcReport::from_verdicts(&v).error_rate, 0.005);
    }
}
