//! Synthetic Word and LaTeX documents with known table geometry and
//! structure, plus the oracle that predicts where each table lands.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::layout::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixtureKind {
    Word,
    Latex,
}

impl FixtureKind {
    pub fn extension(self) -> &'static str {
        match self {
            FixtureKind::Word => "docx",
            FixtureKind::Latex => "tex",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureTable {
    /// Cell text; empty strings are empty cells.
    pub rows: Vec<Vec<String>>,
    /// Column content widths in points, multiples of 5.
    pub col_widths: Vec<f64>,
    pub header_rows: usize,
    pub borders: bool,
    pub centered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FixtureBlock {
    Paragraph(Vec<String>),
    Table(FixtureTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureDoc {
    pub id: String,
    pub kind: FixtureKind,
    pub blocks: Vec<FixtureBlock>,
}

impl FixtureDoc {
    pub fn file_name(&self) -> String {
        format!("{}.{}", self.id, self.kind.extension())
    }

    pub fn tables(&self) -> impl Iterator<Item = &FixtureTable> {
        self.blocks.iter().filter_map(|b| match b {
            FixtureBlock::Table(t) => Some(t),
            _ => None,
        })
    }

    pub fn bytes(&self) -> Vec<u8> {
        match self.kind {
            FixtureKind::Word => to_docx(self),
            FixtureKind::Latex => to_tex(self).into_bytes(),
        }
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn docx_paragraph(text: &str) -> String {
    if text.is_empty() {
        "<w:p/>".into()
    } else {
        format!(
            "<w:p><w:r><w:t xml:space=\"preserve\">{}</w:t></w:r></w:p>",
            xml_escape(text)
        )
    }
}

fn docx_table(t: &FixtureTable) -> String {
    let mut s = String::from("<w:tbl><w:tblPr><w:tblW w:w=\"0\" w:type=\"auto\"/>");
    if t.centered {
        s.push_str("<w:jc w:val=\"center\"/>");
    }
    if t.borders {
        s.push_str("<w:tblBorders>");
        for edge in ["top", "left", "bottom", "right", "insideH", "insideV"] {
            s.push_str(&format!(
                "<w:{edge} w:val=\"single\" w:sz=\"4\" w:space=\"0\" w:color=\"000000\"/>"
            ));
        }
        s.push_str("</w:tblBorders>");
    }
    s.push_str("</w:tblPr><w:tblGrid>");
    for w in &t.col_widths {
        s.push_str(&format!("<w:gridCol w:w=\"{}\"/>", (w + 2.0 * CELL_PAD) as u32 * 20));
    }
    s.push_str("</w:tblGrid>");
    for (r, row) in t.rows.iter().enumerate() {
        s.push_str("<w:tr>");
        if r < t.header_rows {
            s.push_str("<w:trPr><w:tblHeader/></w:trPr>");
        }
        for (c, cell) in row.iter().enumerate() {
            s.push_str(&format!(
                "<w:tc><w:tcPr><w:tcW w:w=\"{}\" w:type=\"dxa\"/></w:tcPr>{}</w:tc>",
                (t.col_widths[c] + 2.0 * CELL_PAD) as u32 * 20,
                docx_paragraph(cell)
            ));
        }
        s.push_str("</w:tr>");
    }
    s.push_str("</w:tbl>");
    s
}

pub fn document_xml(doc: &FixtureDoc) -> String {
    let mut body = String::new();
    for b in &doc.blocks {
        match b {
            FixtureBlock::Paragraph(words) => body.push_str(&docx_paragraph(&words.join(" "))),
            FixtureBlock::Table(t) => body.push_str(&docx_table(t)),
        }
    }
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n<w:document xmlns:w=\"http://schemas.openxmlformats.org/wordprocessingml/2006/main\" xmlns:r=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships\"><w:body>{body}<w:sectPr><w:pgSz w:w=\"11906\" w:h=\"16838\"/><w:pgMar w:top=\"1440\" w:right=\"1440\" w:bottom=\"1440\" w:left=\"1440\"/></w:sectPr></w:body></w:document>"
    )
}

const CONTENT_TYPES: &str = "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n<Types xmlns=\"http://schemas.openxmlformats.org/package/2006/content-types\"><Default Extension=\"rels\" ContentType=\"application/vnd.openxmlformats-package.relationships+xml\"/><Default Extension=\"xml\" ContentType=\"application/xml\"/><Override PartName=\"/word/document.xml\" ContentType=\"application/vnd.openxmlformats-officedocument.wordprocessingml.document.main+xml\"/></Types>";

const ROOT_RELS: &str = "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n<Relationships xmlns=\"http://schemas.openxmlformats.org/package/2006/relationships\"><Relationship Id=\"rId1\" Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/officeDocument\" Target=\"word/document.xml\"/></Relationships>";

const DOC_RELS: &str = "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n<Relationships xmlns=\"http://schemas.openxmlformats.org/package/2006/relationships\"></Relationships>";

/// A docx package around an arbitrary `word/document.xml`.
pub fn docx_from_xml(document_xml: &str) -> Vec<u8> {
    let mut w = zip::ZipWriter::new(std::io::Cursor::new(Vec::new()));
    let opts = zip::write::SimpleFileOptions::default().compression_method(zip::CompressionMethod::Deflated);
    for (name, data) in [
        ("[Content_Types].xml", CONTENT_TYPES),
        ("_rels/.rels", ROOT_RELS),
        ("word/document.xml", document_xml),
        ("word/_rels/document.xml.rels", DOC_RELS),
    ] {
        w.start_file(name, opts).expect("zip entry");
        w.write_all(data.as_bytes()).expect("zip write");
    }
    w.finish().expect("zip finish").into_inner()
}

pub fn to_docx(doc: &FixtureDoc) -> Vec<u8> {
    docx_from_xml(&document_xml(doc))
}

pub fn to_tex(doc: &FixtureDoc) -> String {
    let mut s = String::from("\\documentclass{article}\n\\usepackage{graphicx}\n\\begin{document}\n\n");
    for b in &doc.blocks {
        match b {
            FixtureBlock::Paragraph(words) => {
                for line in words.chunks(12) {
                    s.push_str(&line.join(" "));
                    s.push('\n');
                }
                s.push('\n');
            }
            FixtureBlock::Table(t) => {
                s.push_str("\\begin{table}[h]\n");
                if t.centered {
                    s.push_str("\\centering\n");
                }
                let bar = if t.borders { "|" } else { "" };
                let spec: String = t
                    .col_widths
                    .iter()
                    .map(|w| format!("p{{{w}pt}}{bar}"))
                    .collect();
                s.push_str(&format!("\\begin{{tabular}}{{{bar}{spec}}}\n"));
                if t.borders {
                    s.push_str("\\hline\n");
                }
                for row in &t.rows {
                    s.push_str(&row.join(" & "));
                    s.push_str(" \\\\\n");
                    if t.borders {
                        s.push_str("\\hline\n");
                    }
                }
                s.push_str("\\end{tabular}\n\\end{table}\n\n");
            }
        }
    }
    s.push_str("\\end{document}\n");
    s
}

/// Frame geometry the annotator is configured with, in points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameParams {
    pub word_border_pt: f64,
    pub latex_rule_pt: f64,
    pub latex_sep_pt: f64,
}

impl Default for FrameParams {
    fn default() -> Self {
        FrameParams {
            word_border_pt: 1.0,
            latex_rule_pt: 1.0,
            latex_sep_pt: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedTable {
    pub page: usize,
    /// Outer edge of the drawn frame, `[x, y, w, h]` in pixels.
    pub bbox_px: [u32; 4],
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedDoc {
    pub id: String,
    pub kind: FixtureKind,
    pub file: String,
    pub pages: usize,
    pub tables: Vec<ExpectedTable>,
}

/// Structure target in the label vocabulary: one cell token per column,
/// header rows in `<thead>` for Word tables.
pub fn expected_target(t: &FixtureTable, kind: FixtureKind) -> String {
    let header = if kind == FixtureKind::Word { t.header_rows } else { 0 };
    let row = |r: &Vec<String>| {
        let cells: Vec<&str> = r
            .iter()
            .map(|c| if c.trim().is_empty() { "<cell_n>" } else { "<cell_y>" })
            .collect();
        format!("<tr> {} </tr>", cells.join(" "))
    };
    let mut parts = vec!["<tabular>".to_string()];
    if header > 0 {
        parts.push("<thead>".into());
        parts.extend(t.rows[..header].iter().map(row));
        parts.push("</thead>".into());
    }
    parts.push("<tbody>".into());
    parts.extend(t.rows[header..].iter().map(row));
    parts.push("</tbody>".into());
    parts.push("</tabular>".into());
    parts.join(" ")
}

/// Predicts page and frame box of every table from the document model.
pub fn expected_layout(doc: &FixtureDoc, frame: FrameParams, dpi: u32) -> ExpectedDoc {
    let mut page = 0;
    let mut y = MARGIN;
    let mut tables = Vec::new();
    let new_page_if = |need: f64, y: &mut f64, page: &mut usize| {
        if *y + need > BOTTOM && *y > MARGIN {
            *page += 1;
            *y = MARGIN;
        }
    };
    for b in &doc.blocks {
        match b {
            FixtureBlock::Paragraph(words) => {
                let n = break_lines(words, TEXT_W).len().max(1);
                for _ in 0..n {
                    new_page_if(LINE_H, &mut y, &mut page);
                    y += LINE_H;
                }
                y += PAR_AFTER;
            }
            FixtureBlock::Table(t) => {
                let inner_w: f64 = t.col_widths.iter().map(|w| w + 2.0 * CELL_PAD).sum();
                let inner_h = t.rows.len() as f64 * ROW_H;
                let (w, h, grow) = match doc.kind {
                    FixtureKind::Word => (inner_w, inner_h, frame.word_border_pt / 2.0),
                    FixtureKind::Latex => {
                        let d = frame.latex_rule_pt + frame.latex_sep_pt;
                        (inner_w + 2.0 * d, inner_h + 2.0 * d, 0.0)
                    }
                };
                new_page_if(TABLE_SPACE + h, &mut y, &mut page);
                y += TABLE_SPACE;
                let x = if t.centered { MARGIN + (TEXT_W - w) / 2.0 } else { MARGIN };
                tables.push(ExpectedTable {
                    page,
                    bbox_px: RectPt::new(x, y, w, h).inflate(grow).to_px(dpi),
                    target: expected_target(t, doc.kind),
                });
                y += h + TABLE_SPACE;
            }
        }
    }
    ExpectedDoc {
        id: doc.id.clone(),
        kind: doc.kind,
        file: doc.file_name(),
        pages: page + 1,
        tables,
    }
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ter", "sa", "nu", "vel", "or", "pi", "den", "ra", "tus", "el", "co", "ma",
];

fn word(rng: &mut ChaCha8Rng, max_chars: usize) -> String {
    let mut w = String::new();
    let target = rng.gen_range(2..=max_chars.clamp(2, 9));
    while w.len() < target {
        w.push_str(SYLLABLES[rng.gen_range(0..SYLLABLES.len())]);
    }
    w.truncate(target);
    w
}

fn paragraph(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| word(rng, 9)).collect()
}

fn cell_text(rng: &mut ChaCha8Rng, width: f64) -> String {
    let max_chars = ((width / CHAR_W) as usize).max(2);
    let n = rng.gen_range(1..=3);
    let words: Vec<String> = (0..n).map(|_| word(rng, max_chars.min(8))).collect();
    fit_line(&words, width).join(" ")
}

pub fn random_table(rng: &mut ChaCha8Rng, kind: FixtureKind) -> FixtureTable {
    let ncols = rng.gen_range(2..=5);
    let mut col_widths = Vec::new();
    let budget = TEXT_W - 20.0 - ncols as f64 * 2.0 * CELL_PAD;
    for _ in 0..ncols {
        col_widths.push(rng.gen_range(8..=24) as f64 * 5.0);
    }
    while col_widths.iter().sum::<f64>() > budget {
        let i = (0..ncols)
            .max_by(|&a, &b| col_widths[a].total_cmp(&col_widths[b]))
            .unwrap();
        col_widths[i] -= 5.0;
    }
    let nrows = rng.gen_range(2..=8);
    let mut rows: Vec<Vec<String>> = (0..nrows)
        .map(|_| {
            col_widths
                .iter()
                .map(|&w| if rng.gen_bool(0.15) { String::new() } else { cell_text(rng, w) })
                .collect()
        })
        .collect();
    if rows.iter().flatten().all(|c| c.is_empty()) {
        rows[0][0] = "total".into();
    }
    FixtureTable {
        rows,
        col_widths,
        header_rows: if kind == FixtureKind::Word && rng.gen_bool(0.3) { 1 } else { 0 },
        borders: rng.gen_bool(0.5),
        centered: rng.gen_bool(0.5),
    }
}

/// A document with `tables` tables separated by paragraphs; `long` pads it
/// so later tables move to following pages.
pub fn random_doc(id: &str, kind: FixtureKind, tables: usize, long: bool, rng: &mut ChaCha8Rng) -> FixtureDoc {
    let n = rng.gen_range(10..60);
    let mut blocks = vec![FixtureBlock::Paragraph(paragraph(rng, n))];
    for k in 0..tables {
        if long && k > 0 {
            let n = rng.gen_range(400..700);
            blocks.push(FixtureBlock::Paragraph(paragraph(rng, n)));
        }
        blocks.push(FixtureBlock::Table(random_table(rng, kind)));
        let n = rng.gen_range(5..80);
        blocks.push(FixtureBlock::Paragraph(paragraph(rng, n)));
    }
    FixtureDoc {
        id: id.to_string(),
        kind,
        blocks,
    }
}

/// `n` documents, about 60% Word, each with one to three tables.
pub fn generate_corpus(n: usize, seed: u64) -> Vec<FixtureDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let kind = if i % 5 < 3 { FixtureKind::Word } else { FixtureKind::Latex };
            let tables = rng.gen_range(1..=3);
            let long = i % 4 == 1;
            random_doc(&format!("doc{i:03}"), kind, tables, long, &mut rng)
        })
        .collect()
}

/// Ten documents, six Word and four LaTeX, thirteen tables in all.
pub fn ten_fixture_corpus() -> Vec<FixtureDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let word = [2, 1, 3, 1, 2, 1];
    let latex = [1, 1, 0, 1];
    let mut docs = Vec::new();
    for (i, &t) in word.iter().enumerate() {
        docs.push(random_doc(&format!("word{i}"), FixtureKind::Word, t, false, &mut rng));
    }
    for (i, &t) in latex.iter().enumerate() {
        docs.push(random_doc(&format!("latex{i}"), FixtureKind::Latex, t, false, &mut rng));
    }
    docs
}

fn cells(rows: &[&[&str]]) -> Vec<Vec<String>> {
    rows.iter().map(|r| r.iter().map(|c| c.to_string()).collect()).collect()
}

/// Two-by-two table whose last cell is empty.
pub fn empty_cell_table() -> FixtureTable {
    FixtureTable {
        rows: cells(&[&["Method", "Score"], &["Ours", ""]]),
        col_widths: vec![60.0, 50.0],
        header_rows: 0,
        borders: true,
        centered: false,
    }
}

pub fn empty_cell_doc(kind: FixtureKind) -> FixtureDoc {
    FixtureDoc {
        id: format!("empty_cell_{}", kind.extension()),
        kind,
        blocks: vec![
            FixtureBlock::Paragraph(vec!["Results".into(), "below.".into()]),
            FixtureBlock::Table(empty_cell_table()),
        ],
    }
}

/// A LaTeX source that every compiler in the chain rejects.
pub fn failing_tex() -> &'static str {
    "\\documentclass{article}\n\\begin{document}\nBroken \\undefinedmacro{x} here.\n\\begin{tabular}{ll}\na & b \\\\\n\\end{tabular}\n\\end{document}\n"
}

pub fn write_corpus(dir: &Path, docs: &[FixtureDoc]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for d in docs {
        std::fs::write(dir.join(d.file_name()), d.bytes())?;
    }
    Ok(())
}
