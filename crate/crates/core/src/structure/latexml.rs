use roxmltree::{Document, Node};

use super::{CellKind, StructureFlags, StructureLabel, TagSequence};
use crate::error::{Error, Result};

fn is(node: &Node<'_, '_>, local: &str) -> bool {
    node.is_element() && node.tag_name().name() == local
}

fn owning_tabular<'a, 'i>(node: Node<'a, 'i>) -> Option<Node<'a, 'i>> {
    node.ancestors().skip(1).find(|a| is(a, "tabular"))
}

fn span_attr(node: &Node<'_, '_>, name: &str) -> usize {
    node.attribute(name)
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(1)
        .max(1)
}

fn has_text(cell: Node<'_, '_>) -> bool {
    cell.descendants()
        .filter(Node::is_text)
        .any(|t| t.text().is_some_and(|s| !s.trim().is_empty()))
}

fn tabular_to_structure(tab: Node<'_, '_>) -> Result<StructureLabel> {
    let rows: Vec<Node> = tab
        .descendants()
        .filter(|n| is(n, "tr") && owning_tabular(*n) == Some(tab))
        .collect();
    let mut flags = StructureFlags::default();
    let mut grid: Vec<Vec<Option<CellKind>>> = vec![Vec::new(); rows.len()];
    let mut header_rows = 0;
    let mut in_header = true;

    for (r, tr) in rows.iter().enumerate() {
        let header = tr
            .ancestors()
            .skip(1)
            .take_while(|a| *a != tab)
            .any(|a| is(&a, "thead"));
        if in_header && header {
            header_rows += 1;
        } else {
            in_header = false;
        }
        let mut col = 0;
        for td in tr.children().filter(|c| is(c, "td") || is(c, "th")) {
            while grid[r].get(col).copied().flatten().is_some() {
                col += 1;
            }
            let kind = if has_text(td) { CellKind::Y } else { CellKind::N };
            let (cs, rs) = (span_attr(&td, "colspan"), span_attr(&td, "rowspan"));
            if cs > 1 || rs > 1 {
                flags.spans_expanded = true;
            }
            for rr in r..(r + rs).min(rows.len()) {
                let row = &mut grid[rr];
                if row.len() < col + cs {
                    row.resize(col + cs, None);
                }
                for slot in &mut row[col..col + cs] {
                    *slot = Some(kind);
                }
            }
            col += cs;
        }
    }
    let mut holes = false;
    let grid: Vec<Vec<CellKind>> = grid
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|c| {
                    holes |= c.is_none();
                    c.unwrap_or(CellKind::N)
                })
                .collect()
        })
        .collect();
    flags.ragged_padded |= holes;
    flags.header_rows = header_rows;
    StructureLabel::from_grid(grid, flags)
}

fn load(xml: &[u8]) -> Result<String> {
    std::str::from_utf8(xml)
        .map(str::to_owned)
        .map_err(|e| Error::XmlParse(format!("converter output is not utf-8: {e}")))
}

fn outer_tabulars<'a, 'i>(doc: &'a Document<'i>) -> Vec<Node<'a, 'i>> {
    doc.descendants()
        .filter(|n| is(n, "tabular") && owning_tabular(*n).is_none())
        .collect()
}

fn options() -> roxmltree::ParsingOptions {
    roxmltree::ParsingOptions {
        allow_dtd: true,
        ..Default::default()
    }
}

/// Structure of the first outermost `tabular` in converter output.
pub fn latexml_to_structure(latexml_xml: &[u8]) -> Result<StructureLabel> {
    let text = load(latexml_xml)?;
    let doc = Document::parse_with_options(&text, options()).map_err(|e| Error::XmlParse(e.to_string()))?;
    let tab = outer_tabulars(&doc).into_iter().next().ok_or(Error::EmptyTable)?;
    tabular_to_structure(tab)
}

pub fn latexml_to_tags(latexml_xml: &[u8]) -> Result<TagSequence> {
    latexml_to_structure(latexml_xml).map(|s| s.tags)
}

/// Every outermost `tabular` of a converted document, in document order.
pub fn latexml_tables(latexml_xml: &[u8]) -> Result<Vec<Result<StructureLabel>>> {
    let text = load(latexml_xml)?;
    let doc = Document::parse_with_options(&text, options()).map_err(|e| Error::XmlParse(e.to_string()))?;
    Ok(outer_tabulars(&doc).into_iter().map(tabular_to_structure).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const NS: &str = "http://dlmf.nist.gov/LaTeXML";

    fn doc(body: &str) -> String {
        format!("<?xml version=\"1.0\"?><document xmlns=\"{NS}\"><table><tabular>{body}</tabular></table></document>")
    }

    #[test]
    fn empty_cell_table_matches_word_target() {
        let xml = doc("<tbody><tr><td>a</td><td>b</td></tr><tr><td>c</td><td/></tr></tbody>");
        assert_eq!(
            latexml_to_tags(xml.as_bytes()).unwrap().to_string(),
            "<tabular> <tbody> <tr> <cell_y> <cell_y> </tr> <tr> <cell_y> <cell_n> </tr> </tbody> </tabular>"
        );
    }

    #[test]
    fn empty_tabular_rejected() {
        assert!(matches!(latexml_to_tags(doc("").as_bytes()), Err(Error::EmptyTable)));
        assert!(matches!(
            latexml_to_tags(format!("<document xmlns=\"{NS}\"/>").as_bytes()),
            Err(Error::EmptyTable)
        ));
    }

    #[test]
    fn thead_and_spans() {
        let xml = doc(
            "<thead><tr><td colspan=\"2\">h</td></tr></thead>\
             <tbody><tr><td rowspan=\"2\">r</td><td>x</td></tr><tr><td/></tr></tbody>",
        );
        let s = latexml_to_structure(xml.as_bytes()).unwrap();
        assert_eq!(s.flags.header_rows, 1);
        assert!(s.flags.spans_expanded);
        assert_eq!(
            s.rows,
            vec![
                vec![CellKind::Y, CellKind::Y],
                vec![CellKind::Y, CellKind::Y],
                vec![CellKind::Y, CellKind::N],
            ]
        );
    }

    #[test]
    fn nested_tabular_counts_as_content() {
        let xml = doc("<tr><td><tabular><tr><td>in</td></tr></tabular></td><td/></tr>");
        let all = latexml_tables(xml.as_bytes()).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].as_ref().unwrap().rows, vec![vec![CellKind::Y, CellKind::N]]);
    }

    #[test]
    fn math_content_counts() {
        let xml = doc("<tr><td><Math><XMath><XMTok>x</XMTok></XMath></Math></td></tr>");
        assert_eq!(latexml_to_structure(xml.as_bytes()).unwrap().rows, vec![vec![CellKind::Y]]);
    }

    #[test]
    fn malformed() {
        assert!(matches!(latexml_to_tags(b"<document><tabular>"), Err(Error::XmlParse(_))));
    }
}
