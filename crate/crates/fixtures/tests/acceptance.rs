//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fail.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use tablelabel::dataset::{corpus_stats, make_splits, DatasetRecord, KindCounts, Split, Task};
use tablelabel::extract::{mask_to_rects, PixelMask};
use tablelabel::geometry::Rect;
use tablelabel::ingest::{DocxPackage, SourceKind};
use tablelabel::metrics::{
    bleu4, classify_errors, detection_prf, exact_match_by_length, length_distribution, PageBoxes,
};
use tablelabel::structure::{
    detect_row_groups, fill_cells, latexml_tables, word_document_tables, CellKind, OcrBlock, StructureLabel,
    TagSequence,
};
use tablelabel_fixtures::corpus::{
    empty_cell_doc, generate_corpus, random_table, to_tex, FixtureBlock, FixtureDoc, FixtureKind, FixtureTable,
};
use tablelabel_fixtures::tex::tex_to_xml;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.2?}, limit {limit:?}"))?;
    Ok(t)
}

fn fmt3(x: f64) -> String {
    format!("{x:.3}")
}

// ---- metric arithmetic -------------------------------------------------

/// Pages laid out so the taxonomy must come out at fixed target counts:
/// isolated ground truth, isolated predictions, half-width predictions and
/// exact matches (plus a few duplicates on matched pages).
fn taxonomy_pages() -> (PageBoxes, PageBoxes) {
    let (mut preds, mut gts) = (PageBoxes::new(), PageBoxes::new());
    let full = Rect::new(10, 10, 100, 100);
    let mut page = 0;
    let mut next = || {
        page += 1;
        format!("p{page:05}")
    };
    for _ in 0..164 {
        gts.insert(next(), vec![full]);
    }
    for _ in 0..86 {
        preds.insert(next(), vec![full]);
    }
    for _ in 0..57 {
        let k = next();
        gts.insert(k.clone(), vec![full]);
        preds.insert(k, vec![Rect::new(10, 10, 50, 100)]);
    }
    for i in 0..2304 {
        let k = next();
        gts.insert(k.clone(), vec![full]);
        let mut p = vec![full];
        if i < 3 {
            p.push(Rect::new(12, 12, 90, 90));
        }
        preds.insert(k, p);
    }
    (preds, gts)
}

fn metric_arithmetic() -> Outcome {
    let start = Instant::now();
    let (preds, gts) = taxonomy_pages();
    let t = classify_errors(&preds, &gts, 0.5, 0.9);
    let c = t.counts;
    ensure(
        (c.undetected, c.misdetected, c.partial, c.gt_total, c.pred_total) == (164, 86, 57, 2525, 2450),
        || format!("counts {c:?}"),
    )?;
    let pct = |r: f64| format!("{:.1}", r * 100.0);
    let shown = [pct(t.undetected_rate), pct(t.misdetected_rate), pct(t.partial_rate)];
    ensure(shown == ["6.5", "3.5", "2.3"], || format!("rates {shown:?}"))?;

    let totals = [32usize, 293, 252, 145, 278];
    let exact = [15usize, 169, 102, 28, 24];
    let lens = [10usize, 30, 50, 70, 90];
    let seqs: Vec<(Vec<u8>, Vec<u8>)> = (0..5)
        .flat_map(|b| {
            (0..totals[b]).map(move |i| {
                let r = vec![0u8; lens[b]];
                let mut c = r.clone();
                if i >= exact[b] {
                    c[0] = 1;
                }
                (c, r)
            })
        })
        .collect();
    let pairs: Vec<(&[u8], &[u8])> = seqs.iter().map(|(c, r)| (&c[..], &r[..])).collect();
    let rep = exact_match_by_length(&pairs);
    let got: Vec<String> = rep.buckets.iter().map(|b| fmt3(b.ratio)).chain([fmt3(rep.all.ratio)]).collect();
    ensure(got == ["0.469", "0.577", "0.405", "0.193", "0.086", "0.338"], || format!("exact-match ratios {got:?}"))?;
    ensure(rep.all.total == 1000 && rep.all.exact_match == Some(338), || format!("{:?}", rep.all))?;

    let train = [4_027usize, 44_811, 36_059, 19_757, 40_809];
    let buf = vec![0u8; 90];
    let refs: Vec<&[u8]> = (0..5).flat_map(|b| std::iter::repeat(&buf[..lens[b]]).take(train[b])).collect();
    let dist = length_distribution(&refs);
    let got: Vec<String> = dist.buckets.iter().map(|b| fmt3(b.ratio)).chain([fmt3(dist.all.ratio)]).collect();
    ensure(got == ["0.028", "0.308", "0.248", "0.136", "0.281", "1.000"], || format!("length ratios {got:?}"))?;
    ensure(dist.all.total == 145_463, || format!("total {}", dist.all.total))?;

    let t = within(Duration::from_secs(1), start)?;
    Ok(format!("rates 6.5/3.5/2.3, 6+6 bucket ratios, {t:.0?}"))
}

// ---- detection PRF against a pixel-painting oracle ---------------------

fn random_boxes(rng: &mut ChaCha8Rng) -> Vec<Rect> {
    let n = rng.gen_range(0..=5);
    (0..n)
        .map(|_| {
            let (x, y) = (rng.gen_range(0..60), rng.gen_range(0..60));
            Rect::new(x, y, rng.gen_range(1..=64 - x), rng.gen_range(1..=64 - y))
        })
        .collect()
}

fn paint(rects: &[Rect]) -> Vec<bool> {
    let mut m = vec![false; 64 * 64];
    for r in rects {
        for y in r.y..r.y + r.h {
            for x in r.x..r.x + r.w {
                m[(y * 64 + x) as usize] = true;
            }
        }
    }
    m
}

fn prf_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(594);
    for i in 0..1000 {
        let (p, g) = (random_boxes(&mut rng), random_boxes(&mut rng));
        let (pm, gm) = (paint(&p), paint(&g));
        let d = pm.iter().filter(|&&v| v).count() as u64;
        let gt = gm.iter().filter(|&&v| v).count() as u64;
        let o = pm.iter().zip(&gm).filter(|(a, b)| **a && **b).count() as u64;
        let m = detection_prf(
            &PageBoxes::from([("page".to_string(), p.clone())]),
            &PageBoxes::from([("page".to_string(), g.clone())]),
        );
        ensure((m.overlap_area, m.detected_area, m.gt_area) == (o, d, gt), || {
            format!("instance {i}: areas {:?} vs oracle {:?}", (m.overlap_area, m.detected_area, m.gt_area), (o, d, gt))
        })?;
        let prec = if d == 0 { 0.0 } else { o as f64 / d as f64 };
        let rec = if gt == 0 { 0.0 } else { o as f64 / gt as f64 };
        let f1 = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        ensure(close(m.precision, prec) && close(m.recall, rec) && close(m.f1, f1), || {
            format!("instance {i}: {m:?}")
        })?;
    }
    let t = within(Duration::from_secs(10), start)?;
    Ok(format!("1000 instances exact, {t:.0?}"))
}

// ---- BLEU-4 against brute-force n-gram counting ------------------------

fn brute_bleu(c: &[u8], r: &[u8]) -> f64 {
    if c.is_empty() {
        return 0.0;
    }
    let mut logp = 0.0;
    for n in 1..=4 {
        if c.len() < n {
            return 0.0;
        }
        let cg: Vec<&[u8]> = c.windows(n).collect();
        let rg: Vec<&[u8]> = if r.len() >= n { r.windows(n).collect() } else { vec![] };
        let mut seen: Vec<&[u8]> = Vec::new();
        let mut clipped = 0usize;
        for g in &cg {
            if seen.contains(g) {
                continue;
            }
            seen.push(g);
            let in_c = cg.iter().filter(|x| *x == g).count();
            let in_r = rg.iter().filter(|x| *x == g).count();
            clipped += in_c.min(in_r);
        }
        if clipped == 0 {
            return 0.0;
        }
        logp += (clipped as f64 / cg.len() as f64).ln() / 4.0;
    }
    let bp = if c.len() < r.len() { (1.0 - r.len() as f64 / c.len() as f64).exp() } else { 1.0 };
    bp * logp.exp()
}

fn bleu_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(595);
    let mut nonzero = 0;
    for i in 0..500 {
        let vocab = rng.gen_range(2..6u8);
        let seq = |rng: &mut ChaCha8Rng| -> Vec<u8> {
            let n = rng.gen_range(0..=30);
            (0..n).map(|_| rng.gen_range(0..vocab)).collect()
        };
        let r = seq(&mut rng);
        let c = if i % 3 == 0 {
            let mut c = r.clone();
            if !c.is_empty() {
                let k = rng.gen_range(0..c.len());
                c[k] = rng.gen_range(0..vocab);
            }
            c
        } else {
            seq(&mut rng)
        };
        let (got, want) = (bleu4(&c, &r), brute_bleu(&c, &r));
        ensure((got - want).abs() <= 1e-12, || format!("pair {i}: {got} vs {want} for {c:?} / {r:?}"))?;
        nonzero += (want > 0.0) as usize;
    }
    let a: Vec<&str> = "a b c d e".split(' ').collect();
    let b: Vec<&str> = "a b c d f".split(' ').collect();
    let s = bleu4(&a, &b);
    ensure((s - 0.2f64.powf(0.25)).abs() <= 1e-9, || format!("hand case {s}"))?;
    Ok(format!("500 pairs ({nonzero} non-zero), hand case {s:.9}"))
}

// ---- end-to-end extraction ---------------------------------------------

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = fixture_config(150);
    let docs = generate_corpus(24, 596);
    let kinds: BTreeSet<&str> = docs.iter().map(|d| d.kind.extension()).collect();
    ensure(docs.len() >= 20 && kinds.len() == 2, || "corpus too small or single-kind".into())?;
    let run = run_end_to_end(&docs, dir.path(), &cfg);
    let a = box_agreement(&run, 0.95);
    let align_failures = run.outcome.stats.drops.get("pair").copied().unwrap_or(0);
    ensure(align_failures == 0, || format!("{align_failures} alignment failures"))?;
    ensure(a.emitted > 0 && a.matched as f64 >= 0.95 * a.emitted as f64, || format!("{a:?}"))?;
    let pipeline_time = within(Duration::from_secs(300), start)?;

    let c = check_prerendered(&prerendered_dir(), 0.95);
    ensure(c.expected > 0 && c.recovered == c.expected, || format!("pre-rendered {c:?}"))?;
    ensure(c.elapsed < Duration::from_secs(10), || format!("pre-rendered took {:?}", c.elapsed))?;
    Ok(format!(
        "{} docs, {}/{} boxes at IoU>=0.95, worst IoU {:.3}, 0 alignment failures, {pipeline_time:.1?}; pre-rendered {}/{} recovered on {} pages in {:.0?}",
        docs.len(),
        a.matched,
        a.emitted,
        a.worst_iou,
        c.recovered,
        c.expected,
        c.pages,
        c.elapsed
    ))
}

// ---- structure labeling ------------------------------------------------

fn word_labels(doc: &FixtureDoc) -> Result<Vec<StructureLabel>, String> {
    let pkg = DocxPackage::from_bytes(&doc.bytes()).map_err(|e| e.to_string())?;
    word_document_tables(&pkg)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|r| r.map_err(|e| e.to_string()))
        .collect()
}

fn latex_labels(doc: &FixtureDoc) -> Result<Vec<StructureLabel>, String> {
    let xml = tex_to_xml(&to_tex(doc)).map_err(|e| e.to_string())?;
    latexml_tables(xml.as_bytes())
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|r| r.map_err(|e| e.to_string()))
        .collect()
}

fn labels(doc: &FixtureDoc) -> Result<Vec<StructureLabel>, String> {
    match doc.kind {
        FixtureKind::Word => word_labels(doc),
        FixtureKind::Latex => latex_labels(doc),
    }
}

const VOCABULARY: [&str; 12] = [
    "<tabular>", "</tabular>", "<thead>", "</thead>", "<tbody>", "</tbody>", "<tr>", "</tr>", "<td>", "</td>",
    "<cell_y>", "<cell_n>",
];

fn structure_labeling() -> Outcome {
    let two_by_two = "<tabular> <tbody> <tr> <cell_y> <cell_y> </tr> <tr> <cell_y> <cell_n> </tr> </tbody> </tabular>";
    for kind in [FixtureKind::Word, FixtureKind::Latex] {
        let l = labels(&empty_cell_doc(kind))?;
        ensure(l.len() == 1 && l[0].tags.to_string() == two_by_two, || {
            format!("{kind:?} empty-cell table gave {:?}", l.iter().map(|x| x.tags.to_string()).collect::<Vec<_>>())
        })?;
    }

    let b = |t: &str, x: f64, y: f64| OcrBlock::new(t, x, y, 10.0, 10.0);
    let blocks = vec![b("3", 0.0, 40.0), b("2", 50.0, 0.0), b("1", 0.0, 2.0)];
    let groups = detect_row_groups(&blocks, 2);
    let mut names: Vec<Vec<&str>> = groups.iter().map(|g| g.iter().map(|b| b.text.as_str()).collect()).collect();
    names.iter_mut().for_each(|g| g.sort());
    ensure(names == vec![vec!["1", "2"], vec!["3"]], || format!("groups {names:?}"))?;
    let filled = fill_cells(&TagSequence::parse(two_by_two).map_err(|e| e.to_string())?, &groups).map_err(|e| e.to_string())?;
    let contents: Vec<Vec<Option<&str>>> =
        filled.rows.iter().map(|r| r.iter().map(|c| c.content.as_deref()).collect()).collect();
    ensure(contents == vec![vec![Some("1"), Some("2")], vec![Some("3"), None]], || format!("fill {contents:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(597);
    let mut violations = Vec::new();
    let mut tables = 0;
    for i in 0..1000 {
        let kind = if i % 2 == 0 { FixtureKind::Word } else { FixtureKind::Latex };
        let t: FixtureTable = random_table(&mut rng, kind);
        let doc = FixtureDoc {
            id: format!("arity{i}"),
            kind,
            blocks: vec![FixtureBlock::Table(t.clone())],
        };
        let l = match labels(&doc) {
            Ok(l) if l.len() == 1 => l.into_iter().next().unwrap(),
            other => {
                violations.push(format!("table {i}: {:?}", other.map(|l| l.len())));
                continue;
            }
        };
        tables += 1;
        let want: Vec<Vec<CellKind>> = t
            .rows
            .iter()
            .map(|r| r.iter().map(|c| if c.trim().is_empty() { CellKind::N } else { CellKind::Y }).collect())
            .collect();
        if l.tags.rows() != want || l.rows != want {
            violations.push(format!("table {i}: arity or cell kinds differ"));
        }
        if let Err(e) = l.tags.validate() {
            violations.push(format!("table {i}: {e}"));
        }
        let text = l.tags.to_string();
        if text.split_whitespace().any(|tok| !VOCABULARY.contains(&tok)) {
            violations.push(format!("table {i}: token outside vocabulary"));
        }
    }
    ensure(violations.is_empty(), || format!("{} violations, first: {}", violations.len(), violations[0]))?;
    Ok(format!("2x2 empty-cell table exact (Word, LaTeX), fill <1,2>/<3>, {tables} random tables with 0 violations"))
}

// ---- invariants --------------------------------------------------------

fn random_mask(rng: &mut ChaCha8Rng) -> PixelMask {
    let (w, h) = (rng.gen_range(1..48), rng.gen_range(1..48));
    let mut m = PixelMask::new(w, h);
    let density = rng.gen_range(0.05..0.5);
    for y in 0..h {
        for x in 0..w {
            m.set(x, y, rng.gen_bool(density));
        }
    }
    m
}

fn translation_equivariance(rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let n = 500;
    for i in 0..n {
        let mask = random_mask(rng);
        let (dx, dy, min) = (rng.gen_range(0..20), rng.gen_range(0..20), rng.gen_range(1..5));
        let mut shifted = PixelMask::new(mask.width_px + dx + 2, mask.height_px + dy + 2);
        for y in 0..mask.height_px {
            for x in 0..mask.width_px {
                shifted.set(x + dx, y + dy, mask.get(x, y));
            }
        }
        let moved: Vec<Rect> =
            mask_to_rects(&mask, min).into_iter().map(|r| Rect::new(r.x + dx, r.y + dy, r.w, r.h)).collect();
        ensure(mask_to_rects(&shifted, min) == moved, || format!("mask {i} not equivariant"))?;
    }
    Ok(n)
}

fn vocabulary_closure(rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let mut n = 0;
    for i in 0..200 {
        let kind = if i % 2 == 0 { FixtureKind::Word } else { FixtureKind::Latex };
        let doc = FixtureDoc {
            id: format!("vocab{i}"),
            kind,
            blocks: vec![FixtureBlock::Table(random_table(rng, kind))],
        };
        for l in labels(&doc)? {
            let text = l.tags.to_string();
            ensure(text.split_whitespace().all(|t| VOCABULARY.contains(&t)), || format!("doc {i}: {text}"))?;
            let back = TagSequence::parse(&text).map_err(|e| format!("doc {i}: {e}"))?;
            ensure(back == l.tags, || format!("doc {i}: tokens do not round-trip"))?;
            n += 1;
        }
    }
    for bad in ["<table>", "<td colspan=2>", "cell_y"] {
        ensure(TagSequence::tokenize(bad).is_err(), || format!("{bad} accepted"))?;
    }
    Ok(n)
}

fn records(rng: &mut ChaCha8Rng, n: usize) -> Vec<DatasetRecord> {
    let mut doc = 0;
    (0..n)
        .map(|i| {
            if rng.gen_bool(0.4) {
                doc += 1;
            }
            let kind = if doc % 5 < 3 { SourceKind::Word } else { SourceKind::Latex };
            let task = if rng.gen_bool(0.5) { Task::Detection } else { Task::Structure };
            DatasetRecord {
                record_id: format!("r{i:05}"),
                task,
                image_path: format!("images/r{i}.png"),
                width_px: 10,
                height_px: 10,
                annotations: vec![],
                target: None,
                structure_flags: None,
                split: Split::Train,
                doc_id: format!("d{doc}"),
                page_index: 0,
                source_kind: kind,
                table_index: None,
            }
        })
        .collect()
}

fn assignment(r: &[DatasetRecord]) -> BTreeMap<String, Split> {
    r.iter().map(|x| (x.record_id.clone(), x.split)).collect()
}

fn split_determinism(rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let trials = 50;
    for t in 0..trials {
        let n = rng.gen_range(60..300);
        let mut a = records(rng, n);
        let per_kind = a.iter().filter(|r| r.source_kind == SourceKind::Latex).count();
        let (val, test) = (rng.gen_range(0..=per_kind / 4), rng.gen_range(0..=per_kind / 4));
        let group = rng.gen_bool(0.5);
        let seed = rng.gen();
        let mut b = a.clone();
        b.shuffle(rng);
        make_splits(&mut a, val, test, seed, group).map_err(|e| e.to_string())?;
        make_splits(&mut b, val, test, seed, group).map_err(|e| e.to_string())?;
        ensure(assignment(&a) == assignment(&b), || format!("trial {t}: order changed the split"))?;
        for kind in [SourceKind::Word, SourceKind::Latex] {
            let count = |s: Split| a.iter().filter(|r| r.source_kind == kind && r.split == s).count();
            ensure(count(Split::Val) == val && count(Split::Test) == test, || {
                format!("trial {t}: {kind} got {}/{} wanted {val}/{test}", count(Split::Val), count(Split::Test))
            })?;
        }
    }
    Ok(trials)
}

fn stats_partition(rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let trials = 50;
    for t in 0..trials {
        let n = rng.gen_range(0..200);
        let mut r = records(rng, n);
        for x in r.iter_mut().filter(|x| x.task == Task::Detection) {
            let k = rng.gen_range(0..4);
            x.annotations = (0..k)
                .map(|_| tablelabel::extract::TableBBox {
                    x: 0,
                    y: 0,
                    w: 1,
                    h: 1,
                    page_index: 0,
                    doc_id: x.doc_id.clone(),
                    source_kind: x.source_kind,
                })
                .collect();
        }
        let s = corpus_stats(&r);
        ensure(s.partition_holds(), || format!("trial {t}: {s:?}"))?;
        let boxes: usize = r.iter().map(|x| x.annotations.len()).sum();
        ensure(s.detection_tables.total as usize == boxes, || format!("trial {t}: table total"))?;
        r.shuffle(rng);
        ensure(corpus_stats(&r) == s, || format!("trial {t}: order dependent"))?;
    }
    let det = KindCounts::new(163_417, 253_817);
    let st = KindCounts::new(56_866, 88_597);
    ensure(det.total == 417_234 && st.total == 145_463, || format!("{det:?} {st:?}"))?;
    Ok(trials)
}

fn invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(598);
    let masks = translation_equivariance(&mut rng)?;
    let seqs = vocabulary_closure(&mut rng)?;
    let splits = split_determinism(&mut rng)?;
    let stats = stats_partition(&mut rng)?;
    Ok(format!(
        "{masks} shifted masks, {seqs} sequences closed, {splits} split trials, {stats} stats trials + 163417+253817=417234, 56866+88597=145463"
    ))
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 6] = [
        ("metric-arithmetic", metric_arithmetic),
        ("detection-prf-oracle", prf_oracle),
        ("bleu4-oracle", bleu_oracle),
        ("end-to-end-extraction", end_to_end),
        ("structure-labeling", structure_labeling),
        ("invariant-suites", invariants),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS {name}: {detail}"),
            Ok(Err(detail)) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {name}: panicked");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
