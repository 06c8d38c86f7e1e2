#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use tablelabel::config::Config;
use tablelabel::dataset::{read_records, run_pipeline, DatasetRecord, PipelineOutcome, Task};
use tablelabel::geometry::Rect;
use tablelabel::ingest::document_id;
use tablelabel_fixtures::corpus::{expected_layout, write_corpus, ExpectedDoc, FixtureDoc, FrameParams};
use tablelabel_fixtures::FixtureTools;

pub fn tools() -> FixtureTools {
    let typeset = PathBuf::from(env!("CARGO_BIN_EXE_fixture-typeset"));
    FixtureTools::in_dir(typeset.parent().expect("bin dir"))
}

pub fn fixture_config(dpi: u32) -> Config {
    let t = tools();
    let mut cfg = Config::default();
    cfg.render.word_to_pdf_cmd = t.word_to_pdf_cmd();
    cfg.render.latex_to_pdf_cmd = t.latex_to_pdf_cmd();
    cfg.render.rasterize_cmd = t.rasterize_cmd();
    cfg.render.latex_to_xml_cmd = t.latex_to_xml_cmd();
    cfg.render.dpi = dpi;
    cfg.jobs = 4;
    cfg
}

pub fn frame_params(cfg: &Config) -> FrameParams {
    FrameParams {
        word_border_pt: cfg.annotate.border_size_eighths as f64 / 8.0,
        latex_rule_pt: cfg.annotate.frame_rule_pt as f64,
        latex_sep_pt: cfg.annotate.frame_sep_pt as f64,
    }
}

pub struct EndToEnd {
    pub outcome: PipelineOutcome,
    pub records: Vec<DatasetRecord>,
    pub expected: Vec<ExpectedDoc>,
}

pub fn run_end_to_end(docs: &[FixtureDoc], work: &Path, cfg: &Config) -> EndToEnd {
    let corpus = work.join("corpus");
    write_corpus(&corpus, docs).unwrap();
    let out = work.join("out");
    let outcome = run_pipeline(&corpus, cfg, &out).unwrap();
    let records = read_records(&out.join("records.jsonl")).unwrap();
    let expected = docs
        .iter()
        .map(|d| expected_layout(d, frame_params(cfg), cfg.render.dpi))
        .collect();
    EndToEnd {
        outcome,
        records,
        expected,
    }
}

#[derive(Debug, Default)]
pub struct BoxAgreement {
    pub emitted: usize,
    pub matched: usize,
    pub expected: usize,
    pub recovered: usize,
    pub worst_iou: f64,
}

fn rect(b: [u32; 4]) -> Rect {
    Rect::new(b[0], b[1], b[2], b[3])
}

/// Matches emitted detection boxes against the oracle, page by page.
pub fn box_agreement(run: &EndToEnd, iou_min: f64) -> BoxAgreement {
    let mut gt: BTreeMap<(String, usize), Vec<Rect>> = BTreeMap::new();
    for d in &run.expected {
        for t in &d.tables {
            gt.entry((document_id(Path::new(&d.file)), t.page)).or_default().push(rect(t.bbox_px));
        }
    }
    let mut pred: BTreeMap<(String, usize), Vec<Rect>> = BTreeMap::new();
    for r in run.records.iter().filter(|r| r.task == Task::Detection) {
        pred.entry((r.doc_id.clone(), r.page_index))
            .or_default()
            .extend(r.annotations.iter().map(|b| b.rect()));
    }
    let mut a = BoxAgreement {
        worst_iou: 1.0,
        ..Default::default()
    };
    for (key, boxes) in &pred {
        a.emitted += boxes.len();
        let g = gt.get(key).map(Vec::as_slice).unwrap_or(&[]);
        for b in boxes {
            let best = g.iter().map(|x| x.iou(b)).fold(0.0, f64::max);
            a.worst_iou = a.worst_iou.min(best);
            if best >= iou_min {
                a.matched += 1;
            }
        }
    }
    for (key, boxes) in &gt {
        a.expected += boxes.len();
        let p = pred.get(key).map(Vec::as_slice).unwrap_or(&[]);
        a.recovered += boxes
            .iter()
            .filter(|b| p.iter().any(|x| x.iou(b) >= iou_min))
            .count();
    }
    a
}

#[derive(Debug, Default)]
pub struct StructureAgreement {
    pub expected: usize,
    pub emitted: usize,
    pub exact: usize,
}

/// Compares emitted structure targets with the generator's tables, matched
/// by document and table order.
pub fn structure_agreement(run: &EndToEnd) -> StructureAgreement {
    let mut emitted: BTreeMap<(String, usize), String> = BTreeMap::new();
    for r in run.records.iter().filter(|r| r.task == Task::Structure) {
        if let (Some(t), Some(k)) = (&r.target, r.table_index) {
            emitted.insert((r.doc_id.clone(), k), t.to_string());
        }
    }
    let mut a = StructureAgreement {
        emitted: emitted.len(),
        ..Default::default()
    };
    for d in &run.expected {
        let id = document_id(Path::new(&d.file));
        for (k, t) in d.tables.iter().enumerate() {
            a.expected += 1;
            if emitted.get(&(id.clone(), k)) == Some(&t.target) {
                a.exact += 1;
            }
        }
    }
    a
}

pub fn prerendered_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/prerendered")
}

#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct PrerenderedSet {
    pub dpi: u32,
    pub docs: Vec<ExpectedDoc>,
}

/// Renders both variants of every document into `dir` as
/// `<id>_p<page>_{annotated,control}.png` plus `expected.json`.
pub fn write_prerendered(docs: &[FixtureDoc], cfg: &Config, dir: &Path) {
    use tablelabel::dataset::{annotate_document, render_variants};
    use tablelabel::ingest::SourceKind;
    std::fs::create_dir_all(dir).unwrap();
    let mut set = PrerenderedSet {
        dpi: cfg.render.dpi,
        docs: Vec::new(),
    };
    for d in docs {
        let kind = match d.kind {
            tablelabel_fixtures::corpus::FixtureKind::Word => SourceKind::Word,
            tablelabel_fixtures::corpus::FixtureKind::Latex => SourceKind::Latex,
        };
        let src = annotate_document(kind, &d.bytes(), &cfg.annotate).unwrap();
        let (pairs, _) = render_variants(&src, &d.id, None, cfg).unwrap();
        for p in &pairs {
            p.annotated
                .save_png(&dir.join(format!("{}_p{}_annotated.png", d.id, p.page_index)))
                .unwrap();
            p.control
                .save_png(&dir.join(format!("{}_p{}_control.png", d.id, p.page_index)))
                .unwrap();
        }
        let e = expected_layout(d, frame_params(cfg), cfg.render.dpi);
        assert_eq!(e.pages, pairs.len());
        set.docs.push(e);
    }
    std::fs::write(dir.join("expected.json"), serde_json::to_string_pretty(&set).unwrap()).unwrap();
}

#[derive(Debug, Default)]
pub struct PrerenderedCheck {
    pub pages: usize,
    pub expected: usize,
    pub recovered: usize,
    pub emitted: usize,
    pub matched: usize,
    pub elapsed: std::time::Duration,
}

/// Diff and extract on the checked-in page images only.
pub fn check_prerendered(dir: &Path, iou_min: f64) -> PrerenderedCheck {
    use tablelabel::extract::{diff_images, mask_to_rects, DiffParams};
    use tablelabel::render::PageImage;
    let set: PrerenderedSet =
        serde_json::from_str(&std::fs::read_to_string(dir.join("expected.json")).unwrap()).unwrap();
    let cfg = Config::default();
    let params = DiffParams::from_config(&cfg.extract, &cfg.annotate.annotated);
    let start = std::time::Instant::now();
    let mut c = PrerenderedCheck::default();
    for d in &set.docs {
        for page in 0..d.pages {
            let load = |v: &str| PageImage::load_png(&dir.join(format!("{}_p{page}_{v}.png", d.id)), page).unwrap();
            let (a, ctl) = (load("annotated"), load("control"));
            let found = mask_to_rects(&diff_images(&a, &ctl, &params), cfg.extract.min_box_px);
            let truth: Vec<Rect> = d.tables.iter().filter(|t| t.page == page).map(|t| rect(t.bbox_px)).collect();
            c.pages += 1;
            c.expected += truth.len();
            c.emitted += found.len();
            c.recovered += truth.iter().filter(|t| found.iter().any(|f| f.iou(t) >= iou_min)).count();
            c.matched += found.iter().filter(|f| truth.iter().any(|t| t.iou(f) >= iou_min)).count();
        }
    }
    c.elapsed = start.elapsed();
    c
}
