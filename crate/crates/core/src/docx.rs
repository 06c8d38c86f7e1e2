//! Table location and border rewriting in WordprocessingML.
//!
//! Edits are byte splices into the main document part: only the table
//! property block and outer-edge cell border overrides of targeted tables
//! change, everything else is copied through untouched.

use quick_xml::events::Event;
use quick_xml::name::{Namespace, ResolveResult};
use quick_xml::reader::NsReader;
use serde::{Deserialize, Serialize};

use crate::config::SentinelColor;
use crate::error::{Error, Result};
use crate::ingest::DocxPackage;

pub const WML_NS: &[u8] = b"http://schemas.openxmlformats.org/wordprocessingml/2006/main";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableNodeSpan {
    pub part_name: String,
    pub byte_start: usize,
    pub byte_end: usize,
    pub nesting_depth: usize,
}

impl TableNodeSpan {
    pub fn slice<'a>(&self, pkg: &'a DocxPackage) -> Option<&'a [u8]> {
        pkg.parts
            .get(&self.part_name)
            .and_then(|p| p.get(self.byte_start..self.byte_end))
    }
}

/// Children of `w:tblPr` that the schema orders after `w:tblBorders`.
const AFTER_BORDERS: &[&str] = &[
    "shd",
    "tblLayout",
    "tblCellMar",
    "tblLook",
    "tblCaption",
    "tblDescription",
    "tblPrChange",
];

#[derive(Debug)]
struct XmlEvent {
    kind: EventKind,
    wml: bool,
    local: String,
    /// Qualified prefix as written, e.g. `w`.
    prefix: String,
    start: usize,
    end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Start,
    End,
    Empty,
}

fn xml_err(e: impl std::fmt::Display, pos: u64) -> Error {
    Error::XmlParse(format!("{e} at byte {pos}"))
}

/// Streams element events with byte ranges.
fn element_events(xml: &[u8]) -> Result<Vec<XmlEvent>> {
    let mut reader = NsReader::from_reader(xml);
    reader.config_mut().trim_text(false);
    let mut out = Vec::new();
    let mut depth = 0usize;
    loop {
        let start = reader.buffer_position() as usize;
        let parsed = match reader.read_resolved_event() {
            Ok((res, ev)) => {
                let wml = matches!(res, ResolveResult::Bound(Namespace(ns)) if ns == WML_NS);
                let (kind, qname) = match &ev {
                    Event::Start(e) => (EventKind::Start, e.name()),
                    Event::Empty(e) => (EventKind::Empty, e.name()),
                    Event::End(e) => (EventKind::End, e.name()),
                    Event::Eof => break,
                    _ => continue,
                };
                let local = String::from_utf8_lossy(qname.local_name().as_ref()).into_owned();
                let prefix = qname
                    .prefix()
                    .map(|p| String::from_utf8_lossy(p.as_ref()).into_owned())
                    .unwrap_or_default();
                Ok((kind, wml, local, prefix))
            }
            Err(e) => Err(e.to_string()),
        };
        let (kind, wml, local, prefix) = parsed.map_err(|e| xml_err(e, reader.error_position()))?;
        let end = reader.buffer_position() as usize;
        match kind {
            EventKind::Start => depth += 1,
            EventKind::End => depth = depth.saturating_sub(1),
            EventKind::Empty => {}
        }
        out.push(XmlEvent {
            kind,
            wml,
            local,
            prefix,
            start,
            end,
        });
    }
    if depth != 0 {
        return Err(Error::XmlParse("unexpected end of document".into()));
    }
    Ok(out)
}

/// One span per `w:tbl` element of the main document part in document
/// order; nested tables carry `nesting_depth > 0`.
pub fn locate_tables(pkg: &DocxPackage) -> Result<Vec<TableNodeSpan>> {
    locate_tables_in(&pkg.main_document, pkg.main_xml())
}

pub fn locate_tables_in(part_name: &str, xml: &[u8]) -> Result<Vec<TableNodeSpan>> {
    let events = element_events(xml)?;
    let mut spans = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    for ev in &events {
        if !(ev.wml && ev.local == "tbl") {
            continue;
        }
        match ev.kind {
            EventKind::Start => {
                open.push(spans.len());
                spans.push(TableNodeSpan {
                    part_name: part_name.to_string(),
                    byte_start: ev.start,
                    byte_end: 0,
                    nesting_depth: open.len() - 1,
                });
            }
            EventKind::End => {
                let idx = open
                    .pop()
                    .ok_or_else(|| Error::XmlParse("unmatched </w:tbl>".into()))?;
                spans[idx].byte_end = ev.end;
            }
            EventKind::Empty => spans.push(TableNodeSpan {
                part_name: part_name.to_string(),
                byte_start: ev.start,
                byte_end: ev.end,
                nesting_depth: open.len(),
            }),
        }
    }
    Ok(spans)
}

/// Overwrites the outer borders of every depth-0 table in `spans` with a
/// single solid line of `color`. Nested-table spans are ignored.
pub fn recolor_borders(
    pkg: &DocxPackage,
    spans: &[TableNodeSpan],
    color: &SentinelColor,
    size_eighths: u32,
) -> Result<DocxPackage> {
    let targets: Vec<&TableNodeSpan> = spans.iter().filter(|s| s.nesting_depth == 0).collect();
    if targets.is_empty() {
        return Ok(pkg.clone());
    }
    let mut out = pkg.clone();
    let mut parts: Vec<&str> = targets.iter().map(|s| s.part_name.as_str()).collect();
    parts.sort_unstable();
    parts.dedup();
    for part in parts {
        let xml = pkg
            .parts
            .get(part)
            .ok_or_else(|| Error::MissingDocumentPart(part.to_string()))?;
        let located = locate_tables_in(part, xml)?;
        let wanted: Vec<&TableNodeSpan> = targets.iter().copied().filter(|s| s.part_name == part).collect();
        for s in &wanted {
            if !located.iter().any(|l| l == *s) {
                return Err(Error::InvalidSpan {
                    part: part.to_string(),
                    start: s.byte_start,
                    end: s.byte_end,
                });
            }
        }
        let starts: Vec<usize> = wanted.iter().map(|s| s.byte_start).collect();
        let edits = border_edits(xml, &starts, color, size_eighths)?;
        out.set_part(part, apply_edits(xml, edits));
    }
    Ok(out)
}

/// The white-bordered twin of [`recolor_borders`]: identical geometry, so
/// its render aligns pixel-for-pixel with the annotated variant.
pub fn make_control(
    pkg: &DocxPackage,
    spans: &[TableNodeSpan],
    size_eighths: u32,
) -> Result<DocxPackage> {
    recolor_borders(pkg, spans, &SentinelColor::white(), size_eighths)
}

#[derive(Debug)]
struct Edit {
    start: usize,
    end: usize,
    text: String,
}

fn apply_edits(xml: &[u8], mut edits: Vec<Edit>) -> Vec<u8> {
    edits.sort_by_key(|e| (e.start, e.end));
    let mut out = Vec::with_capacity(xml.len() + edits.len() * 128);
    let mut cursor = 0;
    for e in edits {
        out.extend_from_slice(&xml[cursor..e.start]);
        out.extend_from_slice(e.text.as_bytes());
        cursor = e.end;
    }
    out.extend_from_slice(&xml[cursor..]);
    out
}

#[derive(Default)]
struct TableState {
    prefix: String,
    start_tag_end: usize,
    tbl_pr: Option<(usize, usize, bool)>,
    tbl_pr_close_start: Option<usize>,
    borders: Option<(usize, usize)>,
    inside_edges: Vec<(usize, usize)>,
    after_borders_start: Option<usize>,
    /// Per row, per cell: outer-edge candidates inside `w:tcBorders`.
    rows: Vec<Vec<Vec<(String, usize, usize)>>>,
    /// Outer-edge elements inside row-level `w:tblPrEx/w:tblBorders`.
    row_exception_edges: Vec<(usize, usize)>,
}

const EDGE_NAMES: &[&str] = &["top", "left", "start", "bottom", "right", "end"];

fn border_edits(
    xml: &[u8],
    table_starts: &[usize],
    color: &SentinelColor,
    size_eighths: u32,
) -> Result<Vec<Edit>> {
    let events = element_events(xml)?;
    let mut edits = Vec::new();
    // Element stack of (local name, wml) for direct-parent checks.
    let mut stack: Vec<(String, bool)> = Vec::new();
    let mut tbl_depth = 0usize;
    let mut state: Option<TableState> = None;

    for ev in &events {
        let parent = stack.last().map(|(n, w)| (n.as_str(), *w));
        let parent_is = |name: &str| parent == Some((name, true));
        let in_target = state.is_some() && tbl_depth == 1;

        if ev.kind != EventKind::End {
            if ev.wml && ev.local == "tbl" {
                if tbl_depth == 0 && table_starts.contains(&ev.start) {
                    state = Some(TableState {
                        prefix: ev.prefix.clone(),
                        start_tag_end: ev.end,
                        ..TableState::default()
                    });
                }
            } else if in_target && ev.wml {
                let st = state.as_mut().expect("in target");
                let grandparent = stack
                    .len()
                    .checked_sub(2)
                    .and_then(|i| stack.get(i))
                    .map(|(n, w)| (n.as_str(), *w));
                match ev.local.as_str() {
                    "tblPr" if parent_is("tbl") => {
                        st.tbl_pr = Some((ev.start, ev.end, ev.kind == EventKind::Empty));
                    }
                    "tblBorders" if parent_is("tblPr") && grandparent == Some(("tbl", true)) => {
                        st.borders = Some((ev.start, ev.end));
                    }
                    "insideH" | "insideV" if parent_is("tblBorders") && grandparent == Some(("tblPr", true)) => {
                        if ev.kind == EventKind::Empty {
                            st.inside_edges.push((ev.start, ev.end));
                        } else {
                            st.inside_edges.push((ev.start, usize::MAX));
                        }
                    }
                    name if parent_is("tblPr")
                        && grandparent == Some(("tbl", true))
                        && AFTER_BORDERS.contains(&name)
                        && st.after_borders_start.is_none() =>
                    {
                        st.after_borders_start = Some(ev.start);
                    }
                    "tr" => st.rows.push(Vec::new()),
                    "tc" if parent_is("tr") || !st.rows.is_empty() => {
                        if let Some(row) = st.rows.last_mut() {
                            row.push(Vec::new());
                        }
                    }
                    name if EDGE_NAMES.contains(&name) && parent_is("tcBorders") => {
                        let pending = if ev.kind == EventKind::Empty { ev.end } else { usize::MAX };
                        if let Some(cell) = st.rows.last_mut().and_then(|r| r.last_mut()) {
                            cell.push((name.to_string(), ev.start, pending));
                        }
                    }
                    name if EDGE_NAMES.contains(&name)
                        && parent_is("tblBorders")
                        && grandparent == Some(("tblPrEx", true)) =>
                    {
                        let pending = if ev.kind == EventKind::Empty { ev.end } else { usize::MAX };
                        st.row_exception_edges.push((ev.start, pending));
                    }
                    _ => {}
                }
            }
        }

        match ev.kind {
            EventKind::Start => {
                if ev.wml && ev.local == "tbl" {
                    tbl_depth += 1;
                }
                stack.push((ev.local.clone(), ev.wml));
            }
            EventKind::Empty => {
                if ev.wml && ev.local == "tbl" && state.is_some() && tbl_depth == 0 {
                    // degenerate self-closing table: nothing to edit into
                    let st = state.take().expect("state");
                    edits.push(Edit {
                        start: ev.start,
                        end: ev.end,
                        text: format!(
                            "<{p}tbl><{p}tblPr>{b}</{p}tblPr></{p}tbl>",
                            p = pfx(&st.prefix),
                            b = borders_xml(&st.prefix, color, size_eighths, &[], xml)
                        ),
                    });
                }
            }
            EventKind::End => {
                stack.pop();
                if ev.wml && ev.local == "tbl" {
                    tbl_depth -= 1;
                    if tbl_depth == 0 {
                        if let Some(st) = state.take() {
                            edits.extend(finish_table(st, xml, color, size_eighths));
                        }
                    }
                    continue;
                }
                if let Some(st) = state.as_mut().filter(|_| tbl_depth == 1) {
                    if !ev.wml {
                        continue;
                    }
                    let parent_now = stack.last().map(|(n, w)| (n.as_str(), *w));
                    match ev.local.as_str() {
                        "tblPr" if parent_now == Some(("tbl", true)) => {
                            st.tbl_pr_close_start = Some(ev.start);
                            if let Some(p) = st.tbl_pr.as_mut() {
                                p.1 = ev.end;
                            }
                        }
                        "tblBorders" if parent_now == Some(("tblPr", true)) => {
                            if let Some(b) = st.borders.as_mut() {
                                b.1 = ev.end;
                            }
                        }
                        "insideH" | "insideV" => {
                            if let Some(last) = st.inside_edges.iter_mut().rev().find(|e| e.1 == usize::MAX) {
                                last.1 = ev.end;
                            }
                        }
                        name if EDGE_NAMES.contains(&name) => {
                            if parent_now == Some(("tcBorders", true)) {
                                if let Some(edge) = st
                                    .rows
                                    .last_mut()
                                    .and_then(|r| r.last_mut())
                                    .and_then(|c| c.iter_mut().rev().find(|e| e.2 == usize::MAX))
                                {
                                    edge.2 = ev.end;
                                }
                            } else if parent_now == Some(("tblBorders", true)) {
                                if let Some(edge) =
                                    st.row_exception_edges.iter_mut().rev().find(|e| e.1 == usize::MAX)
                                {
                                    edge.1 = ev.end;
                                }
                            }
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    Ok(edits)
}

fn pfx(prefix: &str) -> String {
    if prefix.is_empty() {
        String::new()
    } else {
        format!("{prefix}:")
    }
}

fn borders_xml(
    prefix: &str,
    color: &SentinelColor,
    size_eighths: u32,
    inside: &[(usize, usize)],
    xml: &[u8],
) -> String {
    let p = pfx(prefix);
    // attributes must be namespace-qualified even under a default namespace
    let (ap, decl) = if prefix.is_empty() {
        ("w:".to_string(), format!(" xmlns:w=\"{}\"", String::from_utf8_lossy(WML_NS)))
    } else {
        (p.clone(), String::new())
    };
    let mut s = format!("<{p}tblBorders{decl}>");
    for edge in ["top", "left", "bottom", "right"] {
        s.push_str(&format!(
            "<{p}{edge} {ap}val=\"single\" {ap}sz=\"{size_eighths}\" {ap}space=\"0\" {ap}color=\"{}\"/>",
            color.hex()
        ));
    }
    for &(a, b) in inside {
        if b != usize::MAX {
            s.push_str(&String::from_utf8_lossy(&xml[a..b]));
        }
    }
    s.push_str(&format!("</{p}tblBorders>"));
    s
}

fn finish_table(st: TableState, xml: &[u8], color: &SentinelColor, size_eighths: u32) -> Vec<Edit> {
    let mut edits = Vec::new();
    let borders = borders_xml(&st.prefix, color, size_eighths, &st.inside_edges, xml);
    let p = pfx(&st.prefix);
    match (st.tbl_pr, st.borders) {
        (None, _) => edits.push(Edit {
            start: st.start_tag_end,
            end: st.start_tag_end,
            text: format!("<{p}tblPr>{borders}</{p}tblPr>"),
        }),
        (Some((a, b, true)), _) => edits.push(Edit {
            start: a,
            end: b,
            text: format!("<{p}tblPr>{borders}</{p}tblPr>"),
        }),
        (Some(_), Some((a, b))) => edits.push(Edit {
            start: a,
            end: b,
            text: borders,
        }),
        (Some(_), None) => {
            let at = st
                .after_borders_start
                .or(st.tbl_pr_close_start)
                .unwrap_or(st.start_tag_end);
            edits.push(Edit {
                start: at,
                end: at,
                text: borders,
            });
        }
    }

    // Cell-level overrides on the outer edges would hide the table border.
    let n_rows = st.rows.len();
    for (ri, row) in st.rows.iter().enumerate() {
        let n_cells = row.len();
        for (ci, cell) in row.iter().enumerate() {
            for (name, a, b) in cell {
                if *b == usize::MAX {
                    continue;
                }
                let outer = match name.as_str() {
                    "top" => ri == 0,
                    "bottom" => ri + 1 == n_rows,
                    "left" | "start" => ci == 0,
                    "right" | "end" => ci + 1 == n_cells,
                    _ => false,
                };
                if outer {
                    edits.push(Edit {
                        start: *a,
                        end: *b,
                        text: String::new(),
                    });
                }
            }
        }
    }
    for &(a, b) in &st.row_exception_edges {
        if b != usize::MAX {
            edits.push(Edit {
                start: a,
                end: b,
                text: String::new(),
            });
        }
    }
    edits
}
