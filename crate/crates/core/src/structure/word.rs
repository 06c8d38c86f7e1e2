use std::collections::BTreeSet;

use regex::Regex;
use roxmltree::{Document, Node};

use super::{CellKind, StructureFlags, StructureLabel, TagSequence};
use crate::error::{Error, Result};
use crate::ingest::DocxPackage;

const W: &str = "http://schemas.openxmlformats.org/wordprocessingml/2006/main";

/// Elements whose content is transparent for table structure.
const WRAPPERS: &[&str] = &["sdt", "sdtContent", "customXml", "smartTag"];

fn is_w(node: &Node<'_, '_>, local: &str) -> bool {
    node.is_element() && node.tag_name().namespace() == Some(W) && node.tag_name().name() == local
}

/// Table-structure children named `local`, looking through content
/// controls and custom XML wrappers.
fn structural_children<'a, 'i>(node: Node<'a, 'i>, local: &str, out: &mut Vec<Node<'a, 'i>>) {
    for child in node.children().filter(Node::is_element) {
        if is_w(&child, local) {
            out.push(child);
        } else if child.tag_name().namespace() == Some(W)
            && WRAPPERS.contains(&child.tag_name().name())
        {
            structural_children(child, local, out);
        }
    }
}

fn w_attr<'a>(node: &Node<'a, '_>, name: &str) -> Option<&'a str> {
    node.attribute((W, name))
}

fn child_w<'a, 'i>(node: Node<'a, 'i>, local: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| is_w(c, local))
}

fn int_val(node: Option<Node<'_, '_>>) -> Option<usize> {
    node.and_then(|n| w_attr(&n, "val")).and_then(|v| v.trim().parse().ok())
}

fn on_off(node: Option<Node<'_, '_>>) -> bool {
    match node {
        None => false,
        Some(n) => !matches!(w_attr(&n, "val"), Some("0" | "false" | "off")),
    }
}

fn has_text(cell: Node<'_, '_>) -> bool {
    cell.descendants()
        .filter(|n| is_w(n, "t"))
        .any(|t| t.text().is_some_and(|s| !s.trim().is_empty()))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum VMerge {
    None,
    Restart,
    Continue,
}

fn table_to_structure(tbl: Node<'_, '_>) -> Result<StructureLabel> {
    let mut rows_xml = Vec::new();
    structural_children(tbl, "tr", &mut rows_xml);
    let mut flags = StructureFlags::default();
    let mut grid: Vec<Vec<CellKind>> = Vec::with_capacity(rows_xml.len());
    let mut header_rows = 0;
    let mut in_header = true;

    for tr in rows_xml {
        let tr_pr = child_w(tr, "trPr");
        let is_header = tr_pr.is_some_and(|p| on_off(child_w(p, "tblHeader")));
        if in_header && is_header {
            header_rows += 1;
        } else {
            in_header = false;
        }
        let before = int_val(tr_pr.and_then(|p| child_w(p, "gridBefore"))).unwrap_or(0);
        let after = int_val(tr_pr.and_then(|p| child_w(p, "gridAfter"))).unwrap_or(0);
        if before + after > 0 {
            flags.ragged_padded = true;
        }

        let mut row = vec![CellKind::N; before];
        let mut cells = Vec::new();
        structural_children(tr, "tc", &mut cells);
        for tc in cells {
            let tc_pr = child_w(tc, "tcPr");
            let span = int_val(tc_pr.and_then(|p| child_w(p, "gridSpan"))).unwrap_or(1).max(1);
            let vmerge = match tc_pr.and_then(|p| child_w(p, "vMerge")) {
                None => VMerge::None,
                Some(v) if w_attr(&v, "val") == Some("restart") => VMerge::Restart,
                Some(_) => VMerge::Continue,
            };
            let kind = if vmerge == VMerge::Continue {
                flags.spans_expanded = true;
                let col = row.len();
                grid.last()
                    .and_then(|above| above.get(col).copied())
                    .unwrap_or(CellKind::N)
            } else if has_text(tc) {
                CellKind::Y
            } else {
                CellKind::N
            };
            if span > 1 {
                flags.spans_expanded = true;
            }
            row.extend(std::iter::repeat(kind).take(span));
        }
        row.extend(std::iter::repeat(CellKind::N).take(after));
        grid.push(row);
    }
    flags.header_rows = header_rows.min(grid.len());
    StructureLabel::from_grid(grid, flags)
}

fn declared_prefixes(xml: &str) -> BTreeSet<String> {
    let re = Regex::new(r#"xmlns:([A-Za-z_][\w.\-]*)\s*="#).expect("static regex");
    re.captures_iter(xml).map(|c| c[1].to_string()).collect()
}

fn used_prefixes(xml: &str) -> BTreeSet<String> {
    let re = Regex::new(r#"(?:</?|\s)([A-Za-z_][\w.\-]*):[A-Za-z_][\w.\-]*"#).expect("static regex");
    re.captures_iter(xml)
        .map(|c| c[1].to_string())
        .filter(|p| p != "xml" && p != "xmlns")
        .collect()
}

/// Wraps a fragment cut out of a larger part in an element declaring the
/// namespace prefixes it uses but does not declare.
fn wrap_fragment(xml: &str) -> String {
    let declared = declared_prefixes(xml);
    let mut decls = String::new();
    for p in used_prefixes(xml).difference(&declared) {
        let uri = if p == "w" {
            W.to_string()
        } else {
            format!("urn:x-undeclared:{p}")
        };
        decls.push_str(&format!(" xmlns:{p}=\"{uri}\""));
    }
    format!("<fragment{decls}>{xml}</fragment>")
}

fn strip_prolog(xml: &str) -> &str {
    let s = xml.trim_start_matches('\u{feff}').trim_start();
    if s.starts_with("<?xml") {
        if let Some(end) = s.find("?>") {
            return &s[end + 2..];
        }
    }
    s
}

fn outer_tables<'a, 'i>(doc: &'a Document<'i>) -> Vec<Node<'a, 'i>> {
    doc.descendants()
        .filter(|n| is_w(n, "tbl"))
        .filter(|n| !n.ancestors().skip(1).any(|a| is_w(&a, "tbl")))
        .collect()
}

/// Structure of one `w:tbl` element given as bytes. The fragment may rely
/// on namespace declarations from the part it was cut from.
pub fn word_xml_to_structure(table_xml: &[u8]) -> Result<StructureLabel> {
    let text = std::str::from_utf8(table_xml)
        .map_err(|e| Error::XmlParse(format!("table xml is not utf-8: {e}")))?;
    let wrapped = wrap_fragment(strip_prolog(text));
    let doc = Document::parse(&wrapped).map_err(|e| Error::XmlParse(e.to_string()))?;
    let tbl = outer_tables(&doc)
        .into_iter()
        .next()
        .ok_or_else(|| Error::XmlParse("no w:tbl element".into()))?;
    table_to_structure(tbl)
}

pub fn word_xml_to_tags(table_xml: &[u8]) -> Result<TagSequence> {
    word_xml_to_structure(table_xml).map(|s| s.tags)
}

/// Structures of the outermost tables of the main document part in
/// document order, one result per table.
pub fn word_document_tables(pkg: &DocxPackage) -> Result<Vec<Result<StructureLabel>>> {
    let text = std::str::from_utf8(pkg.main_xml())
        .map_err(|e| Error::XmlParse(format!("main part is not utf-8: {e}")))?;
    let doc = Document::parse_with_options(
        text,
        roxmltree::ParsingOptions {
            allow_dtd: false,
            ..Default::default()
        },
    )
    .map_err(|e| Error::XmlParse(e.to_string()))?;
    Ok(outer_tables(&doc).into_iter().map(table_to_structure).collect())
}
