use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corpus root {0} is not a readable directory")]
    UnreadableRoot(PathBuf),

    #[error("document archive is corrupt: {0}")]
    DocumentCorrupt(String),

    #[error("document part missing: {0}")]
    MissingDocumentPart(String),

    #[error("xml parse error: {0}")]
    XmlParse(String),

    #[error("span {start}..{end} in {part} does not delimit a table element")]
    InvalidSpan { part: String, start: usize, end: usize },

    #[error("unbalanced environment: {0}")]
    UnbalancedEnvironment(String),

    #[error("no preamble injection point (missing \\documentclass or \\begin{{document}})")]
    MissingPreamble,

    #[error("source already carries table frames")]
    AlreadyWrapped,

    #[error("render failed: {0}")]
    RenderFailed(String),

    #[error("rasterization failed: {0}")]
    RasterFailed(String),

    #[error("page count mismatch: annotated {annotated}, control {control}")]
    PageCountMismatch { annotated: usize, control: usize },

    #[error("page {page_index} misaligned: annotated {annotated:?}, control {control:?}")]
    AlignmentBroken {
        page_index: usize,
        annotated: (u32, u32),
        control: (u32, u32),
    },

    #[error("table has no rows")]
    EmptyTable,

    #[error("invalid tag sequence: {0}")]
    InvalidTagSequence(String),

    #[error("row groups ({groups}) do not match table rows ({rows})")]
    ArityMismatch { groups: usize, rows: usize },

    #[error("split of {requested} records requested from stratum {stratum} holding {available}")]
    SplitTooLarge {
        stratum: String,
        requested: usize,
        available: usize,
    },

    #[error("sample of {requested} requested from {available} records")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("tool probe failed: {0}")]
    ToolProbe(String),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
