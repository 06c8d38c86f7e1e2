//! Corpus discovery and Word archive handling.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{Cursor, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use indexmap::IndexMap;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, ZipArchive, ZipWriter};

use crate::error::{Error, Result};
use crate::manifest::ManifestRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Word,
    Latex,
}

impl SourceKind {
    pub fn extension(self) -> &'static str {
        match self {
            SourceKind::Word => "docx",
            SourceKind::Latex => "tex",
        }
    }

    pub fn from_extension(ext: &str) -> Option<SourceKind> {
        match ext.to_ascii_lowercase().as_str() {
            "docx" => Some(SourceKind::Word),
            "tex" => Some(SourceKind::Latex),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Word => "word",
            SourceKind::Latex => "latex",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub id: String,
    pub kind: SourceKind,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_language: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub documents: Vec<SourceDocument>,
    pub skipped: Vec<SkippedFile>,
}

impl ScanReport {
    /// One manifest record per visited file, in path order.
    pub fn manifest_records(&self) -> Vec<ManifestRecord> {
        let mut recs: Vec<(PathBuf, ManifestRecord)> = Vec::new();
        for d in &self.documents {
            let mut r = ManifestRecord::new(&d.id, "ingest", "ok");
            r.path = Some(d.path.display().to_string());
            r.kind = Some(d.kind.to_string());
            recs.push((d.path.clone(), r));
        }
        for s in &self.skipped {
            let mut r = ManifestRecord::new("", "ingest", "skipped").with_reason(&s.reason);
            r.path = Some(s.path.display().to_string());
            recs.push((s.path.clone(), r));
        }
        recs.sort_by(|a, b| a.0.cmp(&b.0));
        recs.into_iter().map(|(_, r)| r).collect()
    }
}

pub fn default_filters() -> BTreeSet<String> {
    ["docx", "tex"].iter().map(|s| s.to_string()).collect()
}

/// Walks `root` and returns every Word or LaTeX main file whose extension is
/// in `filters`. Everything else visited is reported in `skipped`.
pub fn scan_corpus(root: &Path, filters: &BTreeSet<String>) -> Result<ScanReport> {
    if !root.is_dir() || std::fs::read_dir(root).is_err() {
        return Err(Error::UnreadableRoot(root.to_path_buf()));
    }
    let filters: BTreeSet<String> = filters.iter().map(|f| f.to_ascii_lowercase()).collect();

    let mut files = Vec::new();
    let mut report = ScanReport::default();
    for entry in WalkDir::new(root).sort_by_file_name() {
        match entry {
            Ok(e) if e.file_type().is_file() => files.push(e.into_path()),
            Ok(_) => {}
            Err(e) => {
                let path = e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf());
                if path == root {
                    return Err(Error::UnreadableRoot(path));
                }
                report.skipped.push(SkippedFile {
                    path,
                    reason: format!("unreadable: {e}"),
                });
            }
        }
    }
    files.sort();

    // Directories holding at least one \documentclass file; other .tex files
    // there are included fragments, not documents.
    let mut tex_cache: HashMap<PathBuf, std::result::Result<String, String>> = HashMap::new();
    let mut dirs_with_main: BTreeSet<PathBuf> = BTreeSet::new();
    for f in &files {
        if ext_of(f).as_deref() == Some("tex") && filters.contains("tex") {
            let text = read_tex(f);
            if let Ok(t) = &text {
                if has_documentclass(t) {
                    dirs_with_main.insert(f.parent().unwrap_or(root).to_path_buf());
                }
            }
            tex_cache.insert(f.clone(), text);
        }
    }

    for path in files {
        let ext = ext_of(&path).unwrap_or_default();
        let kind = match SourceKind::from_extension(&ext) {
            Some(k) if filters.contains(&ext) => k,
            _ => {
                let reason = if ext == "doc" {
                    "legacy .doc is not supported".to_string()
                } else {
                    format!("extension '{ext}' not selected")
                };
                report.skipped.push(SkippedFile { path, reason });
                continue;
            }
        };
        let rel = path.strip_prefix(root).unwrap_or(&path).to_path_buf();
        let declared_language = match kind {
            SourceKind::Word => match std::fs::read(&path) {
                Ok(bytes) => docx_language(&bytes),
                Err(e) => {
                    report.skipped.push(SkippedFile {
                        path,
                        reason: format!("unreadable: {e}"),
                    });
                    continue;
                }
            },
            SourceKind::Latex => match tex_cache.get(&path) {
                Some(Ok(text)) => {
                    let dir = path.parent().unwrap_or(root);
                    if !has_documentclass(text) && dirs_with_main.contains(dir) {
                        report.skipped.push(SkippedFile {
                            path,
                            reason: "included fragment of a multi-file project".into(),
                        });
                        continue;
                    }
                    babel_language(text)
                }
                Some(Err(e)) => {
                    report.skipped.push(SkippedFile {
                        path,
                        reason: format!("unreadable: {e}"),
                    });
                    continue;
                }
                None => None,
            },
        };
        report.documents.push(SourceDocument {
            id: document_id(&rel),
            kind,
            path,
            declared_language,
        });
    }
    report.skipped.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(report)
}

/// Stable, filesystem-safe identifier derived from the corpus-relative path.
pub fn document_id(rel: &Path) -> String {
    let rel_str = rel.to_string_lossy().replace('\\', "/");
    let stem = rel.with_extension("");
    let readable: String = stem
        .to_string_lossy()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    let digest = Sha256::digest(rel_str.as_bytes());
    let short: String = digest[..4].iter().map(|b| format!("{b:02x}")).collect();
    format!("{readable}-{short}")
}

fn ext_of(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

fn read_tex(path: &Path) -> std::result::Result<String, String> {
    std::fs::read(path)
        .map(|b| decode_tex(&b))
        .map_err(|e| e.to_string())
}

/// UTF-8 with a Latin-1 fallback.
pub fn decode_tex(bytes: &[u8]) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s) => s.to_string(),
        Err(_) => bytes.iter().map(|&b| b as char).collect(),
    }
}

fn has_documentclass(text: &str) -> bool {
    text.lines()
        .map(|l| l.split('%').next().unwrap_or(""))
        .any(|l| l.contains("\\documentclass"))
}

fn babel_language(text: &str) -> Option<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"\\usepackage\[([^\]]*)\]\{babel\}").unwrap());
    let opts = re.captures(text)?.get(1)?.as_str();
    // babel makes the last listed language the main one
    let main = opts.split(',').map(str::trim).filter(|s| !s.is_empty()).last()?;
    let tag = match main {
        "english" | "british" | "american" | "USenglish" | "UKenglish" => "en",
        "german" | "ngerman" => "de",
        "french" | "francais" => "fr",
        "spanish" => "es",
        "italian" => "it",
        "portuguese" | "brazil" => "pt",
        "russian" => "ru",
        "dutch" => "nl",
        "polish" => "pl",
        "greek" => "el",
        "turkish" => "tr",
        _ => return None,
    };
    Some(tag.to_string())
}

fn docx_language(bytes: &[u8]) -> Option<String> {
    static CORE: OnceLock<Regex> = OnceLock::new();
    static STYLES: OnceLock<Regex> = OnceLock::new();
    let mut archive = ZipArchive::new(Cursor::new(bytes)).ok()?;
    let read = |archive: &mut ZipArchive<Cursor<&[u8]>>, name: &str| -> Option<String> {
        let mut f = archive.by_name(name).ok()?;
        let mut s = String::new();
        f.read_to_string(&mut s).ok()?;
        Some(s)
    };
    if let Some(core) = read(&mut archive, "docProps/core.xml") {
        let re = CORE.get_or_init(|| Regex::new(r"<dc:language>\s*([^<\s]+)\s*</dc:language>").unwrap());
        if let Some(c) = re.captures(&core) {
            return Some(c[1].to_string());
        }
    }
    let styles = read(&mut archive, "word/styles.xml")?;
    let re = STYLES.get_or_init(|| Regex::new(r#"<w:lang\b[^>]*\bw:val="([^"]+)""#).unwrap());
    re.captures(&styles).map(|c| c[1].to_string())
}

/// An unpacked `.docx` archive. Entry order and compression are kept so a
/// repack reproduces the original layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DocxPackage {
    pub parts: IndexMap<String, Vec<u8>>,
    pub main_document: String,
    methods: HashMap<String, CompressionMethod>,
}

pub fn unpack_docx(doc: &SourceDocument) -> Result<DocxPackage> {
    if doc.kind != SourceKind::Word {
        return Err(Error::DocumentCorrupt(format!(
            "{} is not a Word document",
            doc.path.display()
        )));
    }
    let bytes = std::fs::read(&doc.path).map_err(|e| Error::io(&doc.path, e))?;
    DocxPackage::from_bytes(&bytes)
}

impl DocxPackage {
    pub fn from_bytes(bytes: &[u8]) -> Result<DocxPackage> {
        let mut archive =
            ZipArchive::new(Cursor::new(bytes)).map_err(|e| Error::DocumentCorrupt(e.to_string()))?;
        let mut parts = IndexMap::new();
        let mut methods = HashMap::new();
        for i in 0..archive.len() {
            let mut f = archive
                .by_index(i)
                .map_err(|e| Error::DocumentCorrupt(e.to_string()))?;
            let mut data = Vec::with_capacity(f.size() as usize);
            f.read_to_end(&mut data)
                .map_err(|e| Error::DocumentCorrupt(format!("{}: {e}", f.name())))?;
            methods.insert(f.name().to_string(), f.compression());
            parts.insert(f.name().to_string(), data);
        }
        let main_document = locate_main_part(&parts);
        let main = parts
            .get(&main_document)
            .ok_or_else(|| Error::MissingDocumentPart(main_document.clone()))?;
        let text = std::str::from_utf8(main)
            .map_err(|e| Error::DocumentCorrupt(format!("{main_document}: {e}")))?;
        roxmltree::Document::parse(text)
            .map_err(|e| Error::DocumentCorrupt(format!("{main_document}: {e}")))?;
        Ok(DocxPackage {
            parts,
            main_document,
            methods,
        })
    }

    pub fn main_xml(&self) -> &[u8] {
        &self.parts[&self.main_document]
    }

    pub fn set_part(&mut self, name: &str, data: Vec<u8>) {
        self.methods
            .entry(name.to_string())
            .or_insert(CompressionMethod::Deflated);
        self.parts.insert(name.to_string(), data);
    }

    pub fn repack(&self) -> Result<Vec<u8>> {
        let mut w = ZipWriter::new(Cursor::new(Vec::new()));
        for (name, data) in &self.parts {
            let method = self
                .methods
                .get(name)
                .copied()
                .unwrap_or(CompressionMethod::Deflated);
            let method = match method {
                CompressionMethod::Stored => CompressionMethod::Stored,
                _ => CompressionMethod::Deflated,
            };
            let opts = SimpleFileOptions::default().compression_method(method);
            let zerr = |e: zip::result::ZipError| Error::DocumentCorrupt(e.to_string());
            if name.ends_with('/') && data.is_empty() {
                w.add_directory(name.as_str(), opts).map_err(zerr)?;
            } else {
                w.start_file(name.as_str(), opts).map_err(zerr)?;
                w.write_all(data)
                    .map_err(|e| Error::DocumentCorrupt(e.to_string()))?;
            }
        }
        let cursor = w
            .finish()
            .map_err(|e| Error::DocumentCorrupt(e.to_string()))?;
        Ok(cursor.into_inner())
    }
}

fn locate_main_part(parts: &IndexMap<String, Vec<u8>>) -> String {
    const FALLBACK: &str = "word/document.xml";
    let Some(rels) = parts.get("_rels/.rels") else {
        return FALLBACK.into();
    };
    let Ok(text) = std::str::from_utf8(rels) else {
        return FALLBACK.into();
    };
    let Ok(doc) = roxmltree::Document::parse(text) else {
        return FALLBACK.into();
    };
    doc.descendants()
        .filter(|n| n.tag_name().name() == "Relationship")
        .find(|n| {
            n.attribute("Type")
                .is_some_and(|t| t.ends_with("/officeDocument"))
        })
        .and_then(|n| n.attribute("Target"))
        .map(|t| t.trim_start_matches('/').to_string())
        .unwrap_or_else(|| FALLBACK.into())
}
