//! Page geometry shared by the stand-in typesetter and the layout oracle.
//! All lengths are in points, origin at the top-left corner, y down.

pub const PAGE_W: f64 = 595.276;
pub const PAGE_H: f64 = 841.89;
pub const MARGIN: f64 = 72.0;
pub const TEXT_W: f64 = PAGE_W - 2.0 * MARGIN;
pub const BOTTOM: f64 = PAGE_H - MARGIN;

pub const CHAR_W: f64 = 5.0;
pub const LINE_H: f64 = 14.0;
pub const GLYPH_TOP: f64 = 4.0;
pub const GLYPH_H: f64 = 7.0;
pub const PAR_AFTER: f64 = 6.0;

pub const SECTION_BEFORE: f64 = 8.0;
pub const SECTION_H: f64 = 20.0;
pub const SECTION_AFTER: f64 = 4.0;

pub const TABLE_SPACE: f64 = 6.0;
pub const ROW_H: f64 = 18.0;
/// Word cell padding and LaTeX `\tabcolsep`.
pub const CELL_PAD: f64 = 6.0;
pub const RULE_W: f64 = 0.4;

pub const TEXT_RGB: [u8; 3] = [51, 51, 51];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectPt {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl RectPt {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        RectPt { x, y, w, h }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        RectPt::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    pub fn inflate(&self, d: f64) -> Self {
        RectPt::new(self.x - d, self.y - d, self.w + 2.0 * d, self.h + 2.0 * d)
    }

    /// Pixel rectangle `[x, y, w, h]` with edges rounded to the pixel grid.
    pub fn to_px(&self, dpi: u32) -> [u32; 4] {
        let s = dpi as f64 / 72.0;
        let x0 = (self.x * s).round().max(0.0);
        let y0 = (self.y * s).round().max(0.0);
        let x1 = ((self.x + self.w) * s).round().max(x0);
        let y1 = ((self.y + self.h) * s).round().max(y0);
        [x0 as u32, y0 as u32, (x1 - x0) as u32, (y1 - y0) as u32]
    }
}

pub fn page_px(dpi: u32) -> (u32, u32) {
    let s = dpi as f64 / 72.0;
    ((PAGE_W * s).round() as u32, (PAGE_H * s).round() as u32)
}

pub fn text_width(text: &str) -> f64 {
    text.chars().count() as f64 * CHAR_W
}

/// Greedy line breaking; each line is a list of word indices.
pub fn break_lines(words: &[String], width: f64) -> Vec<Vec<usize>> {
    let mut lines: Vec<Vec<usize>> = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    let mut cur_w = 0.0;
    for (i, w) in words.iter().enumerate() {
        let ww = text_width(w);
        let need = if cur.is_empty() { ww } else { cur_w + CHAR_W + ww };
        if !cur.is_empty() && need > width {
            lines.push(std::mem::take(&mut cur));
            cur_w = ww;
        } else {
            cur_w = need;
        }
        cur.push(i);
    }
    if !cur.is_empty() {
        lines.push(cur);
    }
    lines
}

/// Words that fit on one line of `width`, in order; the rest are dropped.
pub fn fit_line(words: &[String], width: f64) -> Vec<String> {
    break_lines(words, width)
        .into_iter()
        .next()
        .map(|l| l.into_iter().map(|i| words[i].clone()).collect())
        .unwrap_or_default()
}

pub fn line_width(words: &[String]) -> f64 {
    if words.is_empty() {
        return 0.0;
    }
    words.iter().map(|w| text_width(w)).sum::<f64>() + CHAR_W * (words.len() - 1) as f64
}
