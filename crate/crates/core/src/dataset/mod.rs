//! Dataset records, splitting, statistics, QC sampling, file formats and
//! the end-to-end pipeline.

mod coco;
mod pipeline;
mod qc;
mod split;
mod stats;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::TableBBox;
use crate::ingest::SourceKind;
use crate::structure::{StructureFlags, TagSequence};

pub use coco::{
    read_coco_boxes, read_prediction_boxes, read_structure_tsv, write_coco, write_structure_tsv,
    CocoAnnotation, CocoCategory, CocoDataset, CocoImage,
};
pub use pipeline::{
    annotate_document, emit_dataset, run_pipeline, AnnotatedSources, DocResult, DocStatus,
    PageResult, PipelineOutcome, TableResult, render_variants, resplit_dataset, structure_labels, write_dataset_files,
};
pub use qc::{import_verdicts, qc_sample, write_qc_sample, QcItem, QcReport, QcVerdict};
pub use split::{make_splits, SplitSummary};
pub use stats::{corpus_stats, CorpusStats, KindCounts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Detection,
    Structure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub record_id: String,
    pub task: Task,
    /// Relative to the dataset root.
    pub image_path: String,
    pub width_px: u32,
    pub height_px: u32,
    /// Detection only: at least one box.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<TableBBox>,
    /// Structure only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TagSequence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure_flags: Option<StructureFlags>,
    pub split: Split,
    pub doc_id: String,
    pub page_index: usize,
    pub source_kind: SourceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_index: Option<usize>,
}

impl DatasetRecord {
    pub fn check(&self) -> Result<()> {
        match self.task {
            Task::Detection if self.annotations.is_empty() => Err(Error::Config(format!(
                "detection record {} has no boxes",
                self.record_id
            ))),
            Task::Structure => match &self.target {
                Some(t) => t.validate(),
                None => Err(Error::Config(format!(
                    "structure record {} has no target",
                    self.record_id
                ))),
            },
            _ => Ok(()),
        }
    }

    pub fn table_count(&self) -> usize {
        match self.task {
            Task::Detection => self.annotations.len(),
            Task::Structure => 1,
        }
    }
}

pub fn write_records(path: &Path, records: &[DatasetRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_records(path: &Path) -> Result<Vec<DatasetRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Writes through a sibling temporary file and renames into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    std::fs::write(tmp.path(), bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
