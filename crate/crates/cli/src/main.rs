use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde_json::json;

use tablelabel::config::Config;
use tablelabel::dataset::{
    annotate_document, corpus_stats, import_verdicts, qc_sample, read_coco_boxes, read_prediction_boxes,
    read_records, read_structure_tsv, render_variants, resplit_dataset, run_pipeline, structure_labels,
    write_qc_sample, CorpusStats,
};
use tablelabel::extract::{extract_page, DiffParams, PageBoxes};
use tablelabel::ingest::{default_filters, scan_corpus, SourceDocument, SourceKind};
use tablelabel::manifest::{ManifestRecord, ManifestWriter};
use tablelabel::metrics::{evaluate_detection, score_structure, EvaluationReport};
use tablelabel::render::{probe_tools, PageImage, PagePair};
use tablelabel::structure::noise_reason;

#[derive(Parser)]
#[command(name = "tablelabel", version, about = "Build table detection and structure datasets from Word and LaTeX sources")]
struct Cli {
    /// TOML or JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for splits and QC sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "tablelabel-out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List Word and LaTeX documents under a corpus root.
    Ingest { root: PathBuf },
    /// Write the framed and control variant of every document.
    Annotate { root: PathBuf },
    /// Render both variants and store aligned page images.
    Render { root: PathBuf },
    /// Diff rendered page pairs into table boxes.
    Extract {
        /// Directory written by `render` (default: <out-dir>/pages).
        #[arg(long)]
        pages: Option<PathBuf>,
    },
    /// Derive structure token sequences from document markup.
    LabelStructure { root: PathBuf },
    /// Run every stage and write the dataset.
    #[command(alias = "run")]
    Emit { root: PathBuf },
    /// Table, page and drop counts of an emitted dataset.
    Stats { dataset: Option<PathBuf> },
    /// Re-assign train/val/test splits of an emitted dataset.
    Split(SplitArgs),
    /// Draw a review sample, or import reviewed verdicts.
    QcSample(QcArgs),
    /// Score predictions against ground truth.
    Evaluate(EvalArgs),
}

#[derive(Args)]
struct SplitArgs {
    dataset: Option<PathBuf>,
    #[arg(long)]
    detection_val: Option<usize>,
    #[arg(long)]
    detection_test: Option<usize>,
    #[arg(long)]
    structure_val: Option<usize>,
    #[arg(long)]
    structure_test: Option<usize>,
    /// Sample records independently instead of whole documents.
    #[arg(long)]
    no_group: bool,
}

#[derive(Args)]
struct QcArgs {
    dataset: Option<PathBuf>,
    #[arg(short, long, default_value_t = 1000)]
    n: usize,
    /// Where review images and sample.jsonl go (default: <dataset>/qc).
    #[arg(long)]
    qc_dir: Option<PathBuf>,
    /// Reviewed sample.jsonl to turn into an error-rate report.
    #[arg(long = "import", value_name = "SAMPLE")]
    import: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalTask {
    Detection,
    Structure,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_enum, default_value = "detection")]
    task: EvalTask,
    /// Ground truth: COCO JSON (detection) or TSV (structure).
    #[arg(long)]
    gt: PathBuf,
    /// Predictions: COCO JSON or results array (detection) or TSV (structure).
    #[arg(long)]
    pred: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Fatal errors exit 1; runs where some documents were dropped exit 2.
enum Outcome {
    Done,
    Partial,
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => Config::default(),
    };
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn scan(root: &Path, out_dir: &Path) -> Result<Vec<SourceDocument>> {
    let report = scan_corpus(root, &default_filters())?;
    std::fs::create_dir_all(out_dir)?;
    let manifest = ManifestWriter::append(&out_dir.join("manifest.jsonl"))?;
    for r in report.manifest_records() {
        manifest.write(&r)?;
    }
    for s in &report.skipped {
        info!("skipped {}: {}", s.path.display(), s.reason);
    }
    Ok(report.documents)
}

fn ingest(root: &Path, out_dir: &Path) -> Result<Outcome> {
    let docs = scan(root, out_dir)?;
    let mut lines = String::new();
    for d in &docs {
        lines.push_str(&serde_json::to_string(d)?);
        lines.push('\n');
    }
    std::fs::write(out_dir.join("documents.jsonl"), lines)?;
    let word = docs.iter().filter(|d| d.kind == SourceKind::Word).count();
    print_json(&json!({"documents": docs.len(), "word": word, "latex": docs.len() - word}))?;
    Ok(Outcome::Done)
}

fn annotate(root: &Path, cfg: &Config, out_dir: &Path) -> Result<Outcome> {
    let docs = scan(root, out_dir)?;
    let dir = out_dir.join("annotated");
    std::fs::create_dir_all(&dir)?;
    let manifest = ManifestWriter::append(&out_dir.join("manifest.jsonl"))?;
    let mut failed = 0;
    let mut tables = 0;
    for d in &docs {
        let bytes = std::fs::read(&d.path).with_context(|| d.path.display().to_string())?;
        match annotate_document(d.kind, &bytes, &cfg.annotate) {
            Ok(src) => {
                let ext = d.kind.extension();
                std::fs::write(dir.join(format!("{}.annotated.{ext}", d.id)), &src.annotated)?;
                std::fs::write(dir.join(format!("{}.control.{ext}", d.id)), &src.control)?;
                tables += src.table_count;
                manifest.write(&ManifestRecord::new(&d.id, "annotate", "ok"))?;
            }
            Err(e) => {
                warn!("{}: {e}", d.id);
                failed += 1;
                manifest.write(&ManifestRecord::new(&d.id, "annotate", "dropped").with_reason(e.to_string()))?;
            }
        }
    }
    print_json(&json!({"documents": docs.len(), "annotated_tables": tables, "dropped": failed}))?;
    Ok(if failed > 0 { Outcome::Partial } else { Outcome::Done })
}

#[derive(serde::Serialize, serde::Deserialize)]
struct PageEntry {
    doc_id: String,
    source_kind: SourceKind,
    page_index: usize,
    annotated: String,
    control: String,
}

fn render(root: &Path, cfg: &Config, out_dir: &Path) -> Result<Outcome> {
    probe_tools(&cfg.render)?;
    let docs = scan(root, out_dir)?;
    let dir = out_dir.join("pages");
    std::fs::create_dir_all(&dir)?;
    let manifest = ManifestWriter::append(&out_dir.join("manifest.jsonl"))?;
    let mut entries = String::new();
    let mut failed = 0;
    let mut pages = 0;
    for d in &docs {
        let bytes = std::fs::read(&d.path).with_context(|| d.path.display().to_string())?;
        let result = annotate_document(d.kind, &bytes, &cfg.annotate)
            .map_err(|e| ("annotate", e))
            .and_then(|src| render_variants(&src, &d.id, d.path.parent(), cfg));
        match result {
            Ok((pairs, runs)) => {
                for (variant, run) in runs {
                    let mut rec = ManifestRecord::new(&d.id, "render", "ok").with_duration(run.duration_ms);
                    rec.kind = Some(variant.to_string());
                    rec.tool_stderr = (!run.stderr.is_empty()).then_some(run.stderr);
                    manifest.write(&rec)?;
                }
                for p in &pairs {
                    let a = format!("{}_{}_annotated.png", d.id, p.page_index);
                    let c = format!("{}_{}_control.png", d.id, p.page_index);
                    p.annotated.save_png(&dir.join(&a))?;
                    p.control.save_png(&dir.join(&c))?;
                    entries.push_str(&serde_json::to_string(&PageEntry {
                        doc_id: d.id.clone(),
                        source_kind: d.kind,
                        page_index: p.page_index,
                        annotated: a,
                        control: c,
                    })?);
                    entries.push('\n');
                    pages += 1;
                }
            }
            Err((stage, e)) => {
                warn!("{}: {stage}: {e}", d.id);
                failed += 1;
                manifest.write(&ManifestRecord::new(&d.id, stage, "dropped").with_reason(e.to_string()))?;
            }
        }
    }
    std::fs::write(dir.join("pages.jsonl"), entries)?;
    print_json(&json!({"documents": docs.len(), "page_pairs": pages, "dropped": failed}))?;
    Ok(if failed > 0 { Outcome::Partial } else { Outcome::Done })
}

fn extract(pages_dir: &Path, cfg: &Config, out_dir: &Path) -> Result<Outcome> {
    let index = pages_dir.join("pages.jsonl");
    let text = std::fs::read_to_string(&index).with_context(|| format!("reading {}", index.display()))?;
    let params = DiffParams::from_config(&cfg.extract, &cfg.annotate.annotated);
    let mut out = String::new();
    let (mut pages, mut labeled, mut boxes) = (0, 0, 0);
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let e: PageEntry = serde_json::from_str(line)?;
        let pair = PagePair {
            annotated: PageImage::load_png(&pages_dir.join(&e.annotated), e.page_index)?,
            control: PageImage::load_png(&pages_dir.join(&e.control), e.page_index)?,
            page_index: e.page_index,
            doc_id: e.doc_id.clone(),
        };
        let found: PageBoxes = extract_page(&pair, &params, cfg.extract.min_box_px, e.source_kind);
        pages += 1;
        if !found.boxes.is_empty() {
            labeled += 1;
            boxes += found.boxes.len();
        }
        out.push_str(&serde_json::to_string(&json!({"doc_id": e.doc_id, "page": found}))?);
        out.push('\n');
    }
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("boxes.jsonl"), out)?;
    print_json(&json!({"pages": pages, "labeled_pages": labeled, "boxes": boxes}))?;
    Ok(Outcome::Done)
}

fn label_structure(root: &Path, cfg: &Config, out_dir: &Path) -> Result<Outcome> {
    let docs = scan(root, out_dir)?;
    let mut out = String::new();
    let mut drops: BTreeMap<String, usize> = BTreeMap::new();
    let mut labels = 0;
    let mut failed = 0;
    for d in &docs {
        let bytes = std::fs::read(&d.path).with_context(|| d.path.display().to_string())?;
        match structure_labels(d, &bytes, cfg) {
            Ok(tables) => {
                for (k, t) in tables.into_iter().enumerate() {
                    match t {
                        Ok(label) => {
                            if let Some(reason) = noise_reason(&label, &cfg.structure) {
                                *drops.entry(format!("{reason:?}")).or_default() += 1;
                                continue;
                            }
                            out.push_str(&serde_json::to_string(&json!({
                                "doc_id": d.id,
                                "table_index": k,
                                "target": label.tags.to_string(),
                                "flags": label.flags,
                            }))?);
                            out.push('\n');
                            labels += 1;
                        }
                        Err(e) => *drops.entry(e.to_string()).or_default() += 1,
                    }
                }
            }
            Err(reason) => {
                warn!("{}: {reason}", d.id);
                failed += 1;
                *drops.entry(reason).or_default() += 1;
            }
        }
    }
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("structure_labels.jsonl"), out)?;
    print_json(&json!({"documents": docs.len(), "labels": labels, "drops": drops}))?;
    Ok(if failed > 0 { Outcome::Partial } else { Outcome::Done })
}

fn emit(root: &Path, cfg: &Config, out_dir: &Path) -> Result<Outcome> {
    let o = run_pipeline(root, cfg, out_dir)?;
    print_json(&json!({
        "documents": o.documents,
        "emitted_documents": o.emitted_documents,
        "dropped_documents": o.dropped_documents,
        "resumed_documents": o.resumed_documents,
        "detection_records": o.detection_records,
        "structure_records": o.structure_records,
        "stats": o.stats,
    }))?;
    Ok(if o.exit_code() == 2 { Outcome::Partial } else { Outcome::Done })
}

fn stats(dataset: &Path) -> Result<Outcome> {
    let records = read_records(&dataset.join("records.jsonl"))?;
    let mut s: CorpusStats = corpus_stats(&records);
    if let Ok(text) = std::fs::read_to_string(dataset.join("stats.json")) {
        let stored: CorpusStats = serde_json::from_str(&text)?;
        s.drops = stored.drops;
    }
    if !s.partition_holds() {
        bail!("word and latex counts do not add up to the totals");
    }
    print_json(&s)?;
    Ok(Outcome::Done)
}

fn split(args: &SplitArgs, cfg: &mut Config, dataset: &Path) -> Result<Outcome> {
    let s = &mut cfg.split;
    s.detection_val = args.detection_val.unwrap_or(s.detection_val);
    s.detection_test = args.detection_test.unwrap_or(s.detection_test);
    s.structure_val = args.structure_val.unwrap_or(s.structure_val);
    s.structure_test = args.structure_test.unwrap_or(s.structure_test);
    if args.no_group {
        s.group_by_document = false;
    }
    let (det, st) = resplit_dataset(dataset, cfg)?;
    print_json(&json!({"detection": det, "structure": st}))?;
    Ok(Outcome::Done)
}

fn qc(args: &QcArgs, cfg: &Config, dataset: &Path) -> Result<Outcome> {
    if let Some(path) = &args.import {
        print_json(&import_verdicts(path)?)?;
        return Ok(Outcome::Done);
    }
    let records = read_records(&dataset.join("records.jsonl"))?;
    let mut items = qc_sample(&records, args.n, cfg.seed)?;
    let qc_dir = args.qc_dir.clone().unwrap_or_else(|| dataset.join("qc"));
    write_qc_sample(&mut items, &records, dataset, &qc_dir)?;
    print_json(&json!({"sampled": items.len(), "seed": cfg.seed, "sample": qc_dir.join("sample.jsonl")}))?;
    Ok(Outcome::Done)
}

fn evaluate(args: &EvalArgs, cfg: &Config) -> Result<Outcome> {
    let report: EvaluationReport = match args.task {
        EvalTask::Detection => {
            let (gt_ds, gt) = read_coco_boxes(&args.gt)?;
            let pred = read_prediction_boxes(&args.pred, &gt_ds)?;
            evaluate_detection(&pred, &gt, &cfg.eval)
        }
        EvalTask::Structure => {
            let gt = read_structure_tsv(&args.gt, true)?;
            let pred = read_structure_tsv(&args.pred, false)?;
            let pairs: Vec<_> = gt.iter().map(|(k, r)| (pred.get(k).cloned(), r.clone())).collect();
            EvaluationReport {
                detection: None,
                errors: None,
                structure: Some(score_structure(&pairs, cfg.eval.bleu_smoothing)),
                thresholds: cfg.eval.clone(),
            }
        }
    };
    let text = serde_json::to_string_pretty(&report)?;
    match &args.report {
        Some(p) => std::fs::write(p, text).with_context(|| p.display().to_string())?,
        None => println!("{text}"),
    }
    Ok(Outcome::Done)
}

fn run(cli: Cli) -> Result<Outcome> {
    let mut cfg = load_config(&cli)?;
    let out = cli.out_dir.clone();
    let dataset = |d: &Option<PathBuf>| d.clone().unwrap_or_else(|| out.clone());
    match &cli.command {
        Command::Ingest { root } => ingest(root, &out),
        Command::Annotate { root } => annotate(root, &cfg, &out),
        Command::Render { root } => render(root, &cfg, &out),
        Command::Extract { pages } => extract(&pages.clone().unwrap_or_else(|| out.join("pages")), &cfg, &out),
        Command::LabelStructure { root } => label_structure(root, &cfg, &out),
        Command::Emit { root } => emit(root, &cfg, &out),
        Command::Stats { dataset: d } => stats(&dataset(d)),
        Command::Split(args) => split(args, &mut cfg, &dataset(&args.dataset)),
        Command::QcSample(args) => qc(args, &cfg, &dataset(&args.dataset)),
        Command::Evaluate(args) => evaluate(args, &cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
