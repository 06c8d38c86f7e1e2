use serde::{Deserialize, Serialize};

use super::{CellKind, TagSequence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrBlock {
    pub text: String,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl OcrBlock {
    pub fn new(text: impl Into<String>, x: f64, y: f64, w: f64, h: f64) -> Self {
        OcrBlock {
            text: text.into(),
            x,
            y,
            w,
            h,
        }
    }

    fn center_y(&self) -> f64 {
        self.y + self.h / 2.0
    }

    fn bottom(&self) -> f64 {
        self.y + self.h
    }
}

fn by_center(a: &OcrBlock, b: &OcrBlock) -> std::cmp::Ordering {
    a.center_y()
        .total_cmp(&b.center_y())
        .then(a.x.total_cmp(&b.x))
        .then_with(|| a.text.cmp(&b.text))
}

/// Splits blocks into exactly `n_rows` groups, top to bottom.
///
/// Blocks whose vertical extents overlap are first merged into bands; the
/// `n_rows - 1` widest gaps between consecutive bands become row
/// boundaries, the topmost winning among equal gaps. With fewer bands than
/// rows the trailing groups are empty.
pub fn detect_row_groups(blocks: &[OcrBlock], n_rows: usize) -> Vec<Vec<OcrBlock>> {
    let n_rows = n_rows.max(1);
    let mut sorted = blocks.to_vec();
    sorted.sort_by(by_center);

    // bands as (top, bottom, members), by sweeping blocks ordered by top edge
    let mut order: Vec<usize> = (0..sorted.len()).collect();
    order.sort_by(|&a, &b| sorted[a].y.total_cmp(&sorted[b].y).then(a.cmp(&b)));
    let mut bands: Vec<(f64, f64, Vec<usize>)> = Vec::new();
    for i in order {
        let b = &sorted[i];
        match bands.last_mut() {
            Some((_, bottom, members)) if b.y < *bottom => {
                *bottom = bottom.max(b.bottom());
                members.push(i);
            }
            _ => bands.push((b.y, b.bottom(), vec![i])),
        }
    }

    let gaps: Vec<f64> = bands.windows(2).map(|w| w[1].0 - w[0].1).collect();
    let mut ranked: Vec<usize> = (0..gaps.len()).collect();
    ranked.sort_by(|&a, &b| gaps[b].total_cmp(&gaps[a]).then(a.cmp(&b)));
    let mut cuts: Vec<usize> = ranked.into_iter().take(n_rows - 1).collect();
    cuts.sort_unstable();

    let mut groups: Vec<Vec<OcrBlock>> = vec![Vec::new(); n_rows];
    let mut g = 0;
    let mut next_cut = cuts.iter().peekable();
    for (band_idx, (_, _, members)) in bands.iter().enumerate() {
        let mut members = members.clone();
        members.sort_unstable();
        groups[g].extend(members.into_iter().map(|i| sorted[i].clone()));
        if next_cut.peek() == Some(&&band_idx) {
            next_cut.next();
            g += 1;
        }
    }
    groups
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilledCell {
    pub kind: CellKind,
    pub content: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilledTable {
    pub rows: Vec<Vec<FilledCell>>,
    /// Rows whose surplus blocks were joined into the last content cell.
    pub surplus_rows: Vec<usize>,
    /// Rows with content cells left empty for lack of blocks.
    pub deficit_rows: Vec<usize>,
    /// Text from rows that have no content cell at all.
    pub unplaced: Vec<String>,
}

/// Assigns each group's blocks, left to right, to the content cells of the
/// matching row.
pub fn fill_cells(tags: &TagSequence, groups: &[Vec<OcrBlock>]) -> Result<FilledTable> {
    let rows = tags.rows();
    if rows.len() != groups.len() {
        return Err(Error::ArityMismatch {
            groups: groups.len(),
            rows: rows.len(),
        });
    }
    let mut table = FilledTable::default();
    for (r, (kinds, group)) in rows.iter().zip(groups).enumerate() {
        let mut blocks: Vec<&OcrBlock> = group.iter().collect();
        blocks.sort_by(|a, b| {
            a.x.total_cmp(&b.x)
                .then(a.y.total_cmp(&b.y))
                .then_with(|| a.text.cmp(&b.text))
        });
        let slots: Vec<usize> = kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == CellKind::Y)
            .map(|(i, _)| i)
            .collect();
        let mut row: Vec<FilledCell> = kinds
            .iter()
            .map(|&kind| FilledCell {
                kind,
                content: (kind == CellKind::Y).then(String::new),
            })
            .collect();
        if slots.is_empty() {
            table.unplaced.extend(blocks.iter().map(|b| b.text.clone()));
        } else {
            for (i, b) in blocks.iter().enumerate() {
                let slot = slots[i.min(slots.len() - 1)];
                let content = row[slot].content.get_or_insert_with(String::new);
                if !content.is_empty() {
                    content.push(' ');
                }
                content.push_str(&b.text);
            }
            if blocks.len() > slots.len() {
                table.surplus_rows.push(r);
            } else if blocks.len() < slots.len() {
                table.deficit_rows.push(r);
            }
        }
        table.rows.push(row);
    }
    Ok(table)
}
