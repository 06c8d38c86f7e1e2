use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    make_splits, write_atomic, write_coco, write_records, write_structure_tsv, CorpusStats,
    DatasetRecord, Split, SplitSummary, Task,
};
use crate::config::{AnnotateConfig, Config};
use crate::docx;
use crate::error::{Error, Result};
use crate::extract::{extract_page, filter_labeled_pages, DiffParams, TableBBox};
use crate::ingest::{decode_tex, scan_corpus, DocxPackage, SourceDocument, SourceKind};
use crate::latex;
use crate::manifest::{ManifestRecord, ManifestWriter};
use crate::render::{
    convert_latex_to_xml, pair_pages, probe_tools, rasterize, render_to_pdf, PagePair,
    RenderInput, ToolRun,
};
use crate::structure::{
    latexml_tables, noise_reason, word_document_tables, StructureFlags, StructureLabel,
    TagSequence,
};

/// The two marked-up variants of one source document.
#[derive(Debug, Clone)]
pub struct AnnotatedSources {
    pub kind: SourceKind,
    pub annotated: Vec<u8>,
    pub control: Vec<u8>,
    /// Tables that received a frame.
    pub table_count: usize,
    /// Environments left unframed, with reasons.
    pub skipped: Vec<String>,
}

/// Re-encodes edited TeX the way the original was stored.
fn encode_like(original: &[u8], text: String) -> Vec<u8> {
    if std::str::from_utf8(original).is_ok() {
        text.into_bytes()
    } else {
        text.chars()
            .map(|c| if (c as u32) < 256 { c as u8 } else { b'?' })
            .collect()
    }
}

pub fn annotate_document(kind: SourceKind, bytes: &[u8], cfg: &AnnotateConfig) -> Result<AnnotatedSources> {
    match kind {
        SourceKind::Word => {
            let pkg = DocxPackage::from_bytes(bytes)?;
            let spans = docx::locate_tables(&pkg)?;
            let table_count = spans.iter().filter(|s| s.nesting_depth == 0).count();
            let annotated = docx::recolor_borders(&pkg, &spans, &cfg.annotated, cfg.border_size_eighths)?;
            let control = docx::recolor_borders(&pkg, &spans, &cfg.control, cfg.border_size_eighths)?;
            Ok(AnnotatedSources {
                kind,
                annotated: annotated.repack()?,
                control: control.repack()?,
                table_count,
                skipped: Vec::new(),
            })
        }
        SourceKind::Latex => {
            let tex = decode_tex(bytes);
            let scan = latex::scan_tabular_envs(&tex)?;
            let annotated = latex::wrap_fcolorbox(&tex, &scan.spans, &cfg.annotated.name, cfg)?;
            let control = latex::wrap_fcolorbox(&tex, &scan.spans, &cfg.control.name, cfg)?;
            Ok(AnnotatedSources {
                kind,
                annotated: encode_like(bytes, annotated),
                control: encode_like(bytes, control),
                table_count: scan.spans.len(),
                skipped: scan
                    .skipped
                    .iter()
                    .map(|s| format!("{} at byte {}: {}", s.env, s.byte_start, s.reason))
                    .collect(),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DocStatus {
    Emitted,
    NoTables,
    NoLabeledPages,
    Dropped { stage: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageResult {
    pub page_index: usize,
    pub width_px: u32,
    pub height_px: u32,
    pub image_path: String,
    pub boxes: Vec<TableBBox>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableResult {
    pub table_index: usize,
    pub page_index: usize,
    pub image_path: String,
    pub width_px: u32,
    pub height_px: u32,
    pub target: TagSequence,
    pub flags: StructureFlags,
}

/// Everything the pipeline learned about one document; persisted so that
/// an interrupted run can resume.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocResult {
    pub doc_id: String,
    pub source_kind: SourceKind,
    pub source_path: String,
    #[serde(flatten)]
    pub status: DocStatus,
    pub annotated_tables: usize,
    pub pages_rendered: usize,
    pub pages: Vec<PageResult>,
    pub tables: Vec<TableResult>,
    /// Structure labels not emitted, by reason.
    pub structure_drops: BTreeMap<String, u64>,
}

impl DocResult {
    fn new(doc: &SourceDocument, root: &Path) -> Self {
        DocResult {
            doc_id: doc.id.clone(),
            source_kind: doc.kind,
            source_path: doc
                .path
                .strip_prefix(root)
                .unwrap_or(&doc.path)
                .to_string_lossy()
                .replace('\\', "/"),
            status: DocStatus::Emitted,
            annotated_tables: 0,
            pages_rendered: 0,
            pages: Vec::new(),
            tables: Vec::new(),
            structure_drops: BTreeMap::new(),
        }
    }

    fn dropped(mut self, stage: &str, err: &Error) -> Self {
        self.status = DocStatus::Dropped {
            stage: stage.into(),
            reason: err.to_string(),
        };
        self
    }
}

struct Stage<'a> {
    manifest: &'a ManifestWriter,
    doc_id: &'a str,
}

impl Stage<'_> {
    fn log(&self, rec: ManifestRecord) {
        if let Err(e) = self.manifest.write(&rec) {
            log::error!("manifest write failed: {e}");
        }
    }

    fn ok(&self, stage: &str, started: Instant) {
        self.log(
            ManifestRecord::new(self.doc_id, stage, "ok").with_duration(started.elapsed().as_millis() as u64),
        );
    }

    fn fail(&self, stage: &str, err: &Error, started: Instant) {
        log::warn!("{}: {stage} failed: {err}", self.doc_id);
        self.log(
            ManifestRecord::new(self.doc_id, stage, "dropped")
                .with_reason(err.to_string())
                .with_duration(started.elapsed().as_millis() as u64),
        );
    }
}

/// Renders and rasterizes both variants and pairs their pages. Converter
/// runs are returned for the manifest.
pub fn render_variants(
    sources: &AnnotatedSources,
    stem: &str,
    resource_dir: Option<&Path>,
    cfg: &Config,
) -> std::result::Result<(Vec<PagePair>, Vec<(&'static str, ToolRun)>), (&'static str, Error)> {
    let render = |bytes: &[u8]| {
        render_to_pdf(
            &RenderInput {
                bytes,
                kind: sources.kind,
                stem,
                resource_dir,
            },
            &cfg.render,
        )
    };
    let a = render(&sources.annotated).map_err(|e| ("render", e))?;
    let c = render(&sources.control).map_err(|e| ("render", e))?;
    let pa = rasterize(&a.pdf, &cfg.render).map_err(|e| ("rasterize", e))?;
    let pc = rasterize(&c.pdf, &cfg.render).map_err(|e| ("rasterize", e))?;
    let pairs = pair_pages(pa, pc, stem).map_err(|e| ("pair", e))?;
    Ok((pairs, vec![("annotated", a.run), ("control", c.run)]))
}

/// Structure labels for every top-level table of a source, in document order.
/// The outer error is a drop reason for the whole document.
pub fn structure_labels(
    doc: &SourceDocument,
    bytes: &[u8],
    cfg: &Config,
) -> std::result::Result<Vec<Result<StructureLabel>>, String> {
    match doc.kind {
        SourceKind::Word => {
            let pkg = DocxPackage::from_bytes(bytes).map_err(|e| e.to_string())?;
            word_document_tables(&pkg).map_err(|e| e.to_string())
        }
        SourceKind::Latex => {
            if cfg.render.latex_to_xml_cmd.is_empty() {
                return Err("no_converter".into());
            }
            let xml = convert_latex_to_xml(
                &RenderInput {
                    bytes,
                    kind: SourceKind::Latex,
                    stem: &doc.id,
                    resource_dir: doc.path.parent(),
                },
                &cfg.render,
            )
            .map_err(|_| "converter_failed".to_string())?;
            latexml_tables(&xml).map_err(|_| "converter_output_unreadable".to_string())
        }
    }
}

fn drop_reason(e: &Error) -> &'static str {
    match e {
        Error::EmptyTable => "empty_table",
        Error::XmlParse(_) => "xml_parse",
        _ => "conversion_error",
    }
}

fn process_document(
    doc: &SourceDocument,
    root: &Path,
    out_dir: &Path,
    cfg: &Config,
    manifest: &ManifestWriter,
) -> DocResult {
    let stage = Stage {
        manifest,
        doc_id: &doc.id,
    };
    let mut result = DocResult::new(doc, root);

    let t = Instant::now();
    let bytes = match std::fs::read(&doc.path) {
        Ok(b) => b,
        Err(e) => {
            let err = Error::io(&doc.path, e);
            stage.fail("annotate", &err, t);
            return result.dropped("annotate", &err);
        }
    };
    let sources = match annotate_document(doc.kind, &bytes, &cfg.annotate) {
        Ok(s) => s,
        Err(e) => {
            stage.fail("annotate", &e, t);
            return result.dropped("annotate", &e);
        }
    };
    for s in &sources.skipped {
        stage.log(ManifestRecord::new(&doc.id, "annotate", "skipped_env").with_reason(s));
    }
    stage.ok("annotate", t);
    result.annotated_tables = sources.table_count;
    if sources.table_count == 0 {
        result.status = DocStatus::NoTables;
        return result;
    }

    let t = Instant::now();
    let resource_dir = match doc.kind {
        SourceKind::Latex => doc.path.parent(),
        SourceKind::Word => None,
    };
    let pairs = match render_variants(&sources, &doc.id, resource_dir, cfg) {
        Ok((p, runs)) => {
            for (variant, run) in runs {
                let mut rec = ManifestRecord::new(&doc.id, "render", "ok").with_duration(run.duration_ms);
                rec.kind = Some(variant.to_string());
                rec.tool_stderr = (!run.stderr.is_empty()).then_some(run.stderr);
                stage.log(rec);
            }
            p
        }
        Err((name, e)) => {
            stage.fail(name, &e, t);
            return result.dropped(name, &e);
        }
    };
    stage.ok("pair", t);
    result.pages_rendered = pairs.len();

    let t = Instant::now();
    let params = DiffParams::from_config(&cfg.extract, &cfg.annotate.annotated);
    let pages = filter_labeled_pages(
        pairs
            .par_iter()
            .map(|p| extract_page(p, &params, cfg.extract.min_box_px, doc.kind))
            .collect(),
    );
    let images_dir = out_dir.join("images");
    for p in &pages {
        let name = format!("{}_{}.png", doc.id, p.page_index);
        if let Err(e) = pairs[p.page_index].control.save_png(&images_dir.join(&name)) {
            stage.fail("extract", &e, t);
            return result.dropped("extract", &e);
        }
        result.pages.push(PageResult {
            page_index: p.page_index,
            width_px: p.width_px,
            height_px: p.height_px,
            image_path: format!("images/{name}"),
            boxes: p.boxes.clone(),
        });
    }
    stage.ok("extract", t);
    if result.pages.is_empty() {
        result.status = DocStatus::NoLabeledPages;
        return result;
    }

    let t = Instant::now();
    let boxes: Vec<&TableBBox> = result.pages.iter().flat_map(|p| &p.boxes).collect();
    match structure_labels(doc, &bytes, cfg) {
        Err(reason) => {
            *result.structure_drops.entry(reason).or_default() += boxes.len() as u64;
        }
        Ok(labels) if labels.len() != boxes.len() => {
            stage.log(ManifestRecord::new(&doc.id, "structure", "skipped").with_reason(format!(
                "{} converted tables vs {} boxes",
                labels.len(),
                boxes.len()
            )));
            *result
                .structure_drops
                .entry("box_count_mismatch".into())
                .or_default() += labels.len().max(boxes.len()) as u64;
        }
        Ok(labels) => {
            let mut tables = Vec::new();
            for (k, (label, b)) in labels.into_iter().zip(&boxes).enumerate() {
                let label = match label {
                    Ok(l) => l,
                    Err(e) => {
                        *result.structure_drops.entry(drop_reason(&e).into()).or_default() += 1;
                        continue;
                    }
                };
                if let Some(reason) = noise_reason(&label, &cfg.structure) {
                    let key = serde_json::to_value(reason)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_owned))
                        .unwrap_or_else(|| "noise".into());
                    *result.structure_drops.entry(key).or_default() += 1;
                    continue;
                }
                let crop = pairs[b.page_index].control.crop(b.x, b.y, b.w, b.h);
                let name = format!("{}_{}_t{}.png", doc.id, b.page_index, k);
                if let Err(e) = crop.save_png(&images_dir.join(&name)) {
                    stage.fail("structure", &e, t);
                    return result.dropped("structure", &e);
                }
                tables.push(TableResult {
                    table_index: k,
                    page_index: b.page_index,
                    image_path: format!("images/{name}"),
                    width_px: crop.width_px,
                    height_px: crop.height_px,
                    target: label.tags,
                    flags: label.flags,
                });
            }
            result.tables = tables;
        }
    }
    stage.ok("structure", t);
    result
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub documents: usize,
    pub emitted_documents: usize,
    pub dropped_documents: usize,
    pub resumed_documents: usize,
    pub detection_records: usize,
    pub structure_records: usize,
    pub stats: CorpusStats,
    pub detection_split: SplitSummary,
    pub structure_split: SplitSummary,
}

impl PipelineOutcome {
    /// 0 when every document made it through, 2 when some were dropped.
    pub fn exit_code(&self) -> i32 {
        if self.dropped_documents > 0 {
            2
        } else {
            0
        }
    }
}

fn result_path(out_dir: &Path, doc_id: &str) -> PathBuf {
    out_dir.join("work").join(format!("{doc_id}.json"))
}

fn load_result(path: &Path) -> Option<DocResult> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

/// Runs every stage over the corpus and writes the dataset into `out_dir`.
/// Documents with a stored result from an earlier run are not reprocessed.
pub fn run_pipeline(root: &Path, cfg: &Config, out_dir: &Path) -> Result<PipelineOutcome> {
    cfg.validate()?;
    probe_tools(&cfg.render)?;
    std::fs::create_dir_all(out_dir.join("work")).map_err(|e| Error::io(out_dir, e))?;
    std::fs::create_dir_all(out_dir.join("images")).map_err(|e| Error::io(out_dir, e))?;

    let scan = scan_corpus(root, &crate::ingest::default_filters())?;
    let manifest = ManifestWriter::append(&out_dir.join("manifest.jsonl"))?;
    for rec in scan.manifest_records() {
        manifest.write(&rec)?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<(DocResult, bool)> = pool.install(|| {
        scan.documents
            .par_iter()
            .map(|doc| {
                let path = result_path(out_dir, &doc.id);
                if let Some(r) = load_result(&path) {
                    return Ok((r, true));
                }
                let r = process_document(doc, root, out_dir, cfg, &manifest);
                write_atomic(&path, serde_json::to_string_pretty(&r)?.as_bytes())?;
                manifest.write(&ManifestRecord::new(&doc.id, "done", "ok"))?;
                Ok((r, false))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let resumed = results.iter().filter(|(_, r)| *r).count();
    let results: Vec<DocResult> = results.into_iter().map(|(r, _)| r).collect();

    let mut outcome = emit_dataset(&results, cfg, out_dir)?;
    outcome.stats.add_drop("ingest", scan.skipped.len() as u64);
    outcome.resumed_documents = resumed;
    write_atomic(
        &out_dir.join("stats.json"),
        serde_json::to_string_pretty(&outcome.stats)?.as_bytes(),
    )?;
    Ok(outcome)
}

fn records_from(results: &[DocResult]) -> (Vec<DatasetRecord>, Vec<DatasetRecord>) {
    let mut det = Vec::new();
    let mut st = Vec::new();
    for r in results {
        for p in &r.pages {
            det.push(DatasetRecord {
                record_id: format!("{}_{}", r.doc_id, p.page_index),
                task: Task::Detection,
                image_path: p.image_path.clone(),
                width_px: p.width_px,
                height_px: p.height_px,
                annotations: p.boxes.clone(),
                target: None,
                structure_flags: None,
                split: Split::Train,
                doc_id: r.doc_id.clone(),
                page_index: p.page_index,
                source_kind: r.source_kind,
                table_index: None,
            });
        }
        for t in &r.tables {
            st.push(DatasetRecord {
                record_id: format!("{}_{}_t{}", r.doc_id, t.page_index, t.table_index),
                task: Task::Structure,
                image_path: t.image_path.clone(),
                width_px: t.width_px,
                height_px: t.height_px,
                annotations: Vec::new(),
                target: Some(t.target.clone()),
                structure_flags: Some(t.flags.clone()),
                split: Split::Train,
                doc_id: r.doc_id.clone(),
                page_index: t.page_index,
                source_kind: r.source_kind,
                table_index: Some(t.table_index),
            });
        }
    }
    (det, st)
}

fn dataset_header(cfg: &Config, det_split: &SplitSummary, st_split: &SplitSummary) -> serde_json::Value {
    serde_json::json!({
        "description": "table detection and structure labels from dual-rendered source documents",
        "coordinates": "pixels of the configured rasterizer output",
        "dpi": cfg.render.dpi,
        "seed": cfg.seed,
        "tools": {
            "word_to_pdf": cfg.render.word_to_pdf_cmd,
            "latex_to_pdf": cfg.render.latex_to_pdf_cmd,
            "rasterize": cfg.render.rasterize_cmd,
            "latex_to_xml": cfg.render.latex_to_xml_cmd,
        },
        "sentinel": cfg.annotate.annotated.hex(),
        "control": cfg.annotate.control.hex(),
        "extract": cfg.extract,
        "detection_split": det_split,
        "structure_split": st_split,
    })
}

/// Writes `header.json`, `records.jsonl` and the per-split annotation files.
pub fn write_dataset_files(
    out_dir: &Path,
    det: &[DatasetRecord],
    st: &[DatasetRecord],
    header: &serde_json::Value,
) -> Result<()> {
    write_atomic(&out_dir.join("header.json"), serde_json::to_string_pretty(header)?.as_bytes())?;
    let mut all = det.to_vec();
    all.extend(st.iter().cloned());
    write_records(&out_dir.join("records.jsonl"), &all)?;
    for split in Split::ALL {
        let d: Vec<&DatasetRecord> = det.iter().filter(|r| r.split == split).collect();
        let t: Vec<&DatasetRecord> = st.iter().filter(|r| r.split == split).collect();
        write_coco(&out_dir.join(format!("detection_{split}.json")), &d, header.clone())?;
        write_structure_tsv(&out_dir.join(format!("structure_{split}.tsv")), &t)?;
    }
    Ok(())
}

/// Re-assigns splits of an emitted dataset with `cfg.split` and `cfg.seed`
/// and rewrites its files.
pub fn resplit_dataset(out_dir: &Path, cfg: &Config) -> Result<(SplitSummary, SplitSummary)> {
    let records = super::read_records(&out_dir.join("records.jsonl"))?;
    let (mut det, mut st): (Vec<DatasetRecord>, Vec<DatasetRecord>) =
        records.into_iter().partition(|r| r.task == Task::Detection);
    let s = &cfg.split;
    let det_split = make_splits(&mut det, s.detection_val, s.detection_test, cfg.seed, s.group_by_document)?;
    let st_split = make_splits(&mut st, s.structure_val, s.structure_test, cfg.seed, s.group_by_document)?;
    let mut header: serde_json::Value = match std::fs::read_to_string(out_dir.join("header.json")) {
        Ok(text) => serde_json::from_str(&text)?,
        Err(_) => dataset_header(cfg, &det_split, &st_split),
    };
    header["seed"] = cfg.seed.into();
    header["detection_split"] = serde_json::to_value(&det_split)?;
    header["structure_split"] = serde_json::to_value(&st_split)?;
    write_dataset_files(out_dir, &det, &st, &header)?;
    Ok((det_split, st_split))
}

/// Builds records from per-document results, splits them and writes every
/// dataset file. Output depends only on the results and the config.
pub fn emit_dataset(results: &[DocResult], cfg: &Config, out_dir: &Path) -> Result<PipelineOutcome> {
    let mut results: Vec<&DocResult> = results.iter().collect();
    results.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    let owned: Vec<DocResult> = results.into_iter().cloned().collect();
    let (mut det, mut st) = records_from(&owned);
    let s = &cfg.split;
    let det_split = make_splits(&mut det, s.detection_val, s.detection_test, cfg.seed, s.group_by_document)?;
    let st_split = make_splits(&mut st, s.structure_val, s.structure_test, cfg.seed, s.group_by_document)?;

    let mut stats = super::corpus_stats(&det).merge(super::corpus_stats(&st));
    let mut dropped = 0;
    for r in &owned {
        if let DocStatus::Dropped { stage, .. } = &r.status {
            stats.add_drop(stage, 1);
            dropped += 1;
        }
        for (reason, n) in &r.structure_drops {
            stats.add_drop(&format!("structure:{reason}"), *n);
        }
    }

    let header = dataset_header(cfg, &det_split, &st_split);
    write_dataset_files(out_dir, &det, &st, &header)?;

    Ok(PipelineOutcome {
        documents: owned.len(),
        emitted_documents: owned
            .iter()
            .filter(|r| r.status == DocStatus::Emitted)
            .count(),
        dropped_documents: dropped,
        resumed_documents: 0,
        detection_records: det.len(),
        structure_records: st.len(),
        stats,
        detection_split: det_split,
        structure_split: st_split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latin1_round_trip() {
        let original = b"caf\xe9";
        let text = decode_tex(original);
        assert_eq!(encode_like(original, text), original.to_vec());
    }

    #[test]
    fn tex_without_tables_reports_zero() {
        let tex = b"\\documentclass{article}\\begin{document}hi\\end{document}";
        let s = annotate_document(SourceKind::Latex, tex, &AnnotateConfig::default()).unwrap();
        assert_eq!(s.table_count, 0);
        assert_eq!(s.annotated, s.control);
    }

    #[test]
    fn variants_differ_only_in_color_name() {
        let tex = "\\documentclass{article}\\begin{document}\\begin{tabular}{l}a\\end{tabular}\\end{document}";
        let cfg = AnnotateConfig::default();
        let s = annotate_document(SourceKind::Latex, tex.as_bytes(), &cfg).unwrap();
        let a = String::from_utf8(s.annotated).unwrap();
        let c = String::from_utf8(s.control).unwrap();
        let (pa, ba) = a.split_once("\\begin{document}").unwrap();
        let (pc, bc) = c.split_once("\\begin{document}").unwrap();
        assert_eq!(pa, pc);
        assert_ne!(ba, bc);
        assert_eq!(ba.replace(&cfg.annotated.name, &cfg.control.name), bc);
        assert_eq!(s.table_count, 1);
    }

    #[test]
    fn empty_corpus_emits_empty_dataset() {
        let corpus = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        let mut cfg = Config::default();
        cfg.render.word_to_pdf_cmd = "true {input} {outdir}".into();
        cfg.render.latex_to_pdf_cmd = "true {input} {outdir}".into();
        cfg.render.rasterize_cmd = "true {input} {outdir}".into();
        let o = run_pipeline(corpus.path(), &cfg, out.path()).unwrap();
        assert_eq!(o.documents, 0);
        assert_eq!(o.exit_code(), 0);
        assert_eq!(o.stats.detection_tables.total, 0);
        assert!(out.path().join("detection_train.json").exists());
    }
}
