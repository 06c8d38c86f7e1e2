//! Block layout shared by the Word and LaTeX front ends.

use crate::layout::*;
use crate::pdf::Op;

/// A laid-out table: ops relative to its own top-left corner.
#[derive(Debug, Clone, PartialEq)]
pub struct TableBox {
    pub width: f64,
    pub height: f64,
    pub centered: bool,
    pub ops: Vec<Op>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Paragraph(Vec<String>),
    Section(Vec<String>),
    Table(TableBox),
}

/// Where each table landed: page index and outer box in page points.
#[derive(Debug, Clone, PartialEq)]
pub struct Placed {
    pub page: usize,
    pub rect: RectPt,
}

#[derive(Debug, Default)]
pub struct Typeset {
    pub pages: Vec<Vec<Op>>,
    pub tables: Vec<Placed>,
}

pub fn glyph_ops(words: &[String], x: f64, line_top: f64, rgb: [u8; 3]) -> Vec<Op> {
    let mut ops = Vec::new();
    let mut cx = x;
    for w in words {
        let ww = text_width(w);
        if ww > 0.0 {
            ops.push(Op::Fill {
                rect: RectPt::new(cx, line_top + GLYPH_TOP, ww, GLYPH_H),
                rgb,
            });
        }
        cx += ww + CHAR_W;
    }
    ops
}

struct Cursor {
    out: Typeset,
    y: f64,
}

impl Cursor {
    fn page(&mut self) -> &mut Vec<Op> {
        self.out.pages.last_mut().expect("at least one page")
    }

    fn ensure(&mut self, h: f64) {
        if self.y + h > BOTTOM && self.y > MARGIN {
            self.out.pages.push(Vec::new());
            self.y = MARGIN;
        }
    }
}

pub fn lay_out(blocks: &[Block]) -> Typeset {
    let mut c = Cursor {
        out: Typeset {
            pages: vec![Vec::new()],
            tables: Vec::new(),
        },
        y: MARGIN,
    };
    for b in blocks {
        match b {
            Block::Paragraph(words) => {
                let lines = break_lines(words, TEXT_W);
                if lines.is_empty() {
                    c.ensure(LINE_H);
                    c.y += LINE_H;
                }
                for line in lines {
                    c.ensure(LINE_H);
                    let ws: Vec<String> = line.iter().map(|&i| words[i].clone()).collect();
                    let y = c.y;
                    c.page().extend(glyph_ops(&ws, MARGIN, y, TEXT_RGB));
                    c.y += LINE_H;
                }
                c.y += PAR_AFTER;
            }
            Block::Section(words) => {
                c.ensure(SECTION_BEFORE + SECTION_H);
                c.y += SECTION_BEFORE;
                let ws = fit_line(words, TEXT_W / 2.0);
                let mut x = MARGIN;
                let y = c.y;
                for w in &ws {
                    let ww = text_width(w) * 2.0;
                    c.page().push(Op::Fill {
                        rect: RectPt::new(x, y + 5.0, ww, 11.0),
                        rgb: [0, 0, 0],
                    });
                    x += ww + 2.0 * CHAR_W;
                }
                c.y += SECTION_H + SECTION_AFTER;
            }
            Block::Table(t) => {
                c.ensure(TABLE_SPACE + t.height);
                c.y += TABLE_SPACE;
                let x = if t.centered {
                    MARGIN + (TEXT_W - t.width) / 2.0
                } else {
                    MARGIN
                };
                let y = c.y;
                let moved: Vec<Op> = t
                    .ops
                    .iter()
                    .map(|op| match op {
                        Op::Fill { rect, rgb } => Op::Fill {
                            rect: rect.translate(x, y),
                            rgb: *rgb,
                        },
                        Op::Stroke { rect, width, rgb } => Op::Stroke {
                            rect: rect.translate(x, y),
                            width: *width,
                            rgb: *rgb,
                        },
                    })
                    .collect();
                c.page().extend(moved);
                let page = c.out.pages.len() - 1;
                c.out.tables.push(Placed {
                    page,
                    rect: RectPt::new(x, y, t.width, t.height),
                });
                c.y += t.height + TABLE_SPACE;
            }
        }
    }
    c.out
}
