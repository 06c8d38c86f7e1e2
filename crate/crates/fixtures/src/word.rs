//! Word front end: reads `word/document.xml` body paragraphs and tables.

use std::io::Read;

use roxmltree::Node;

use crate::layout::*;
use crate::pdf::Op;
use crate::typeset::{glyph_ops, Block, TableBox};

pub const W_NS: &str = "http://schemas.openxmlformats.org/wordprocessingml/2006/main";

fn is_w(n: &Node, name: &str) -> bool {
    n.is_element() && n.tag_name().name() == name && n.tag_name().namespace() == Some(W_NS)
}

fn w_attr<'a>(n: &Node<'a, '_>, name: &str) -> Option<&'a str> {
    n.attribute((W_NS, name))
}

fn child<'a, 'i>(n: &Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    n.children().find(|c| is_w(c, name))
}

fn main_part(zip: &mut zip::ZipArchive<std::io::Cursor<&[u8]>>) -> String {
    let mut rels = String::new();
    if let Ok(mut f) = zip.by_name("_rels/.rels") {
        let _ = f.read_to_string(&mut rels);
    }
    if let Ok(doc) = roxmltree::Document::parse(&rels) {
        for r in doc.descendants().filter(|n| n.tag_name().name() == "Relationship") {
            if r.attribute("Type").is_some_and(|t| t.ends_with("/officeDocument")) {
                if let Some(t) = r.attribute("Target") {
                    return t.trim_start_matches('/').to_string();
                }
            }
        }
    }
    "word/document.xml".into()
}

pub fn read_document_xml(bytes: &[u8]) -> Result<String, String> {
    let mut zip = zip::ZipArchive::new(std::io::Cursor::new(bytes)).map_err(|e| format!("not a docx package: {e}"))?;
    let name = main_part(&mut zip);
    let mut f = zip.by_name(&name).map_err(|_| format!("package has no {name}"))?;
    let mut xml = String::new();
    f.read_to_string(&mut xml).map_err(|e| format!("{name}: {e}"))?;
    Ok(xml)
}

fn words_of(n: &Node) -> Vec<String> {
    let text: String = n
        .descendants()
        .filter(|d| is_w(d, "t"))
        .filter_map(|d| d.text())
        .collect::<Vec<_>>()
        .join("");
    text.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, Copy)]
struct Border {
    width: f64,
    rgb: [u8; 3],
}

fn parse_border(n: Option<Node>) -> Option<Border> {
    let n = n?;
    let val = w_attr(&n, "val").unwrap_or("single");
    if val == "nil" || val == "none" {
        return None;
    }
    let sz: f64 = w_attr(&n, "sz").and_then(|s| s.parse().ok()).unwrap_or(4.0);
    let rgb = match w_attr(&n, "color") {
        Some(c) if c.len() == 6 && c != "auto" => {
            let v = u32::from_str_radix(c, 16).ok()?;
            [(v >> 16) as u8, (v >> 8) as u8, v as u8]
        }
        _ => [0, 0, 0],
    };
    Some(Border {
        width: (sz / 8.0).max(0.25),
        rgb,
    })
}

fn table_box(tbl: &Node) -> TableBox {
    let tbl_pr = child(tbl, "tblPr");
    let centered = tbl_pr
        .and_then(|p| child(&p, "jc"))
        .and_then(|j| w_attr(&j, "val"))
        .is_some_and(|v| v == "center");
    let borders = tbl_pr.and_then(|p| child(&p, "tblBorders"));
    let edge = |names: &[&str]| {
        borders.and_then(|b| names.iter().find_map(|n| child(&b, n))).and_then(|n| parse_border(Some(n)))
    };
    let (top, left, bottom, right) = (
        edge(&["top"]),
        edge(&["left", "start"]),
        edge(&["bottom"]),
        edge(&["right", "end"]),
    );
    let (inside_h, inside_v) = (edge(&["insideH"]), edge(&["insideV"]));

    let rows: Vec<Node> = tbl.children().filter(|c| is_w(c, "tr")).collect();
    // (grid start, span, words) per cell
    let mut cells: Vec<Vec<(usize, usize, Vec<String>)>> = Vec::new();
    for tr in &rows {
        let mut col = child(tr, "trPr")
            .and_then(|p| child(&p, "gridBefore"))
            .and_then(|g| w_attr(&g, "val"))
            .and_then(|v| v.parse().ok())
            .unwrap_or(0usize);
        let mut row = Vec::new();
        for tc in tr.children().filter(|c| is_w(c, "tc")) {
            let span = child(&tc, "tcPr")
                .and_then(|p| child(&p, "gridSpan"))
                .and_then(|g| w_attr(&g, "val"))
                .and_then(|v| v.parse().ok())
                .unwrap_or(1usize)
                .max(1);
            row.push((col, span, words_of(&tc)));
            col += span;
        }
        cells.push(row);
    }
    let ncols = cells
        .iter()
        .map(|r| r.last().map_or(0, |c| c.0 + c.1))
        .max()
        .unwrap_or(0);
    let mut grid: Vec<f64> = tbl
        .children()
        .find(|c| is_w(c, "tblGrid"))
        .map(|g| {
            g.children()
                .filter(|c| is_w(c, "gridCol"))
                .map(|c| w_attr(&c, "w").and_then(|v| v.parse::<f64>().ok()).unwrap_or(0.0) / 20.0)
                .collect()
        })
        .unwrap_or_default();
    if grid.len() < ncols {
        let mut widths = vec![40.0f64; ncols];
        for row in &cells {
            for (c, span, words) in row {
                if *span == 1 {
                    widths[*c] = widths[*c].max(line_width(words) + 2.0 * CELL_PAD);
                }
            }
        }
        for (i, w) in widths.into_iter().enumerate() {
            if i >= grid.len() {
                grid.push(w);
            }
        }
    }
    let mut xs = vec![0.0];
    for w in &grid {
        xs.push(xs.last().unwrap() + w);
    }
    let width = *xs.last().unwrap();
    let height = rows.len() as f64 * ROW_H;

    let mut ops = Vec::new();
    for (r, row) in cells.iter().enumerate() {
        let top_y = r as f64 * ROW_H;
        for (c, span, words) in row {
            let x0 = xs[(*c).min(grid.len())];
            let x1 = xs[(c + span).min(grid.len())];
            let ws = fit_line(words, (x1 - x0 - 2.0 * CELL_PAD).max(0.0));
            ops.extend(glyph_ops(&ws, x0 + CELL_PAD, top_y + 2.0, TEXT_RGB));
            if let Some(b) = inside_v {
                if c + span < grid.len() {
                    ops.push(Op::Fill {
                        rect: RectPt::new(x1 - b.width / 2.0, top_y, b.width, ROW_H),
                        rgb: b.rgb,
                    });
                }
            }
        }
        if let Some(b) = inside_h {
            if r + 1 < rows.len() {
                ops.push(Op::Fill {
                    rect: RectPt::new(0.0, top_y + ROW_H - b.width / 2.0, width, b.width),
                    rgb: b.rgb,
                });
            }
        }
    }
    // outer edges as strips centered on the outline
    let sides = [
        (top, RectPt::new(0.0, 0.0, width, 0.0)),
        (bottom, RectPt::new(0.0, height, width, 0.0)),
        (left, RectPt::new(0.0, 0.0, 0.0, height)),
        (right, RectPt::new(width, 0.0, 0.0, height)),
    ];
    let uniform = [top, bottom, left, right]
        .iter()
        .all(|b| matches!((b, top), (Some(x), Some(y)) if x.width == y.width && x.rgb == y.rgb));
    if uniform {
        let b = top.expect("uniform border");
        ops.push(Op::Stroke {
            rect: RectPt::new(0.0, 0.0, width, height),
            width: b.width,
            rgb: b.rgb,
        });
    } else {
        for (b, line) in sides {
            if let Some(b) = b {
                ops.push(Op::Fill {
                    rect: line.inflate(b.width / 2.0),
                    rgb: b.rgb,
                });
            }
        }
    }
    TableBox {
        width,
        height,
        centered,
        ops,
    }
}

fn collect_blocks(parent: &Node, out: &mut Vec<Block>) {
    for n in parent.children().filter(|c| c.is_element()) {
        if is_w(&n, "p") {
            out.push(Block::Paragraph(words_of(&n)));
        } else if is_w(&n, "tbl") {
            out.push(Block::Table(table_box(&n)));
        } else if is_w(&n, "sdt") {
            if let Some(c) = child(&n, "sdtContent") {
                collect_blocks(&c, out);
            }
        } else if is_w(&n, "customXml") {
            collect_blocks(&n, out);
        }
    }
}

pub fn word_blocks(bytes: &[u8]) -> Result<Vec<Block>, String> {
    let xml = read_document_xml(bytes)?;
    let doc = roxmltree::Document::parse(&xml).map_err(|e| format!("document.xml: {e}"))?;
    let body = doc
        .root_element()
        .children()
        .find(|c| is_w(c, "body"))
        .ok_or("document.xml has no w:body")?;
    let mut blocks = Vec::new();
    collect_blocks(&body, &mut blocks);
    Ok(blocks)
}
