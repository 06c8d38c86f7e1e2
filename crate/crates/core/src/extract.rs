//! Pixel diff of page pairs and connected-component box extraction.

use serde::{Deserialize, Serialize};

use crate::config::{ExtractConfig, SentinelColor};
use crate::geometry::Rect;
use crate::ingest::SourceKind;
use crate::render::{PageImage, PagePair};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    pub width_px: u32,
    pub height_px: u32,
    pub bits: Vec<bool>,
}

impl PixelMask {
    pub fn new(width_px: u32, height_px: u32) -> Self {
        PixelMask {
            width_px,
            height_px,
            bits: vec![false; width_px as usize * height_px as usize],
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width_px as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[y as usize * self.width_px as usize + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TableBBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub page_index: usize,
    pub doc_id: String,
    pub source_kind: SourceKind,
}

impl TableBBox {
    pub fn rect(&self) -> Rect {
        Rect::new(self.x, self.y, self.w, self.h)
    }
}

#[derive(Debug, Clone)]
pub struct DiffParams {
    pub tol: u8,
    pub sentinel: SentinelColor,
    pub sentinel_distance: u8,
}

impl DiffParams {
    pub fn from_config(cfg: &ExtractConfig, sentinel: &SentinelColor) -> Self {
        DiffParams {
            tol: cfg.tol,
            sentinel: sentinel.clone(),
            sentinel_distance: cfg.sentinel_distance,
        }
    }
}

impl Default for DiffParams {
    fn default() -> Self {
        DiffParams::from_config(&ExtractConfig::default(), &SentinelColor::green())
    }
}

/// Marks pixels that differ by more than `tol` on some channel and whose
/// annotated colour lies within `sentinel_distance` of the sentinel.
pub fn diff_pages(pair: &PagePair, params: &DiffParams) -> PixelMask {
    diff_images(&pair.annotated, &pair.control, params)
}

pub fn diff_images(annotated: &PageImage, control: &PageImage, params: &DiffParams) -> PixelMask {
    assert_eq!(
        (annotated.width_px, annotated.height_px),
        (control.width_px, control.height_px),
        "page pair dimensions differ"
    );
    let s = params.sentinel.rgb;
    let bits = annotated
        .pixels
        .chunks_exact(3)
        .zip(control.pixels.chunks_exact(3))
        .map(|(a, c)| {
            let delta = (0..3).map(|i| a[i].abs_diff(c[i])).max().unwrap_or(0);
            let dev = (0..3).map(|i| a[i].abs_diff(s[i])).max().unwrap_or(0);
            delta > params.tol && dev <= params.sentinel_distance
        })
        .collect();
    PixelMask {
        width_px: annotated.width_px,
        height_px: annotated.height_px,
        bits,
    }
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        parent[i as usize] = parent[parent[i as usize] as usize];
        i = parent[i as usize];
    }
    i
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// Bounding rectangles of the 8-connected components of `mask`, in label
/// order (raster order of each component's first pixel).
pub fn connected_components(mask: &PixelMask) -> Vec<Rect> {
    let (w, h) = (mask.width_px as usize, mask.height_px as usize);
    let mut labels = vec![0u32; w * h];
    let mut parent: Vec<u32> = vec![0];
    for y in 0..h {
        for x in 0..w {
            if !mask.bits[y * w + x] {
                continue;
            }
            let mut neighbours = [0u32; 4];
            let mut n = 0;
            if x > 0 && labels[y * w + x - 1] != 0 {
                neighbours[n] = labels[y * w + x - 1];
                n += 1;
            }
            if y > 0 {
                let up = (y - 1) * w;
                if x > 0 && labels[up + x - 1] != 0 {
                    neighbours[n] = labels[up + x - 1];
                    n += 1;
                }
                if labels[up + x] != 0 {
                    neighbours[n] = labels[up + x];
                    n += 1;
                }
                if x + 1 < w && labels[up + x + 1] != 0 {
                    neighbours[n] = labels[up + x + 1];
                    n += 1;
                }
            }
            if n == 0 {
                let l = parent.len() as u32;
                parent.push(l);
                labels[y * w + x] = l;
            } else {
                let l = neighbours[..n].iter().copied().min().unwrap();
                labels[y * w + x] = l;
                for &m in &neighbours[..n] {
                    union(&mut parent, l, m);
                }
            }
        }
    }

    // (x0, y0, x1, y1) inclusive, keyed by root label
    let mut extents: Vec<Option<(u32, u32, u32, u32)>> = vec![None; parent.len()];
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            if l == 0 {
                continue;
            }
            let r = find(&mut parent, l) as usize;
            let (x, y) = (x as u32, y as u32);
            extents[r] = Some(match extents[r] {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
    }
    extents
        .into_iter()
        .flatten()
        .map(|(x0, y0, x1, y1)| Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
        .collect()
}

fn bounding(a: &Rect, b: &Rect) -> Rect {
    let x0 = a.x.min(b.x);
    let y0 = a.y.min(b.y);
    let x1 = a.right().max(b.right()) as u32;
    let y1 = a.bottom().max(b.bottom()) as u32;
    Rect::new(x0, y0, x1 - x0, y1 - y0)
}

/// Component rectangles with the noise floor applied. Rectangles that
/// overlap (a frame drawn inside another frame's extent) are merged so
/// every kept pixel falls in exactly one output rectangle.
pub fn mask_to_rects(mask: &PixelMask, min_box_px: u32) -> Vec<Rect> {
    let mut rects: Vec<Rect> = connected_components(mask)
        .into_iter()
        .filter(|r| r.w >= min_box_px && r.h >= min_box_px)
        .collect();
    loop {
        let mut merged = false;
        'outer: for i in 0..rects.len() {
            for j in i + 1..rects.len() {
                if rects[i].intersects(&rects[j]) {
                    let b = bounding(&rects[i], &rects[j]);
                    rects.swap_remove(j);
                    rects[i] = b;
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }
    rects.sort_by_key(|r| (r.y, r.x, r.h, r.w));
    rects
}

pub fn mask_to_boxes(
    mask: &PixelMask,
    min_box_px: u32,
    page_index: usize,
    doc_id: &str,
    source_kind: SourceKind,
) -> Vec<TableBBox> {
    mask_to_rects(mask, min_box_px)
        .into_iter()
        .map(|r| TableBBox {
            x: r.x,
            y: r.y,
            w: r.w,
            h: r.h,
            page_index,
            doc_id: doc_id.to_string(),
            source_kind,
        })
        .collect()
}

/// Boxes found on one page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageBoxes {
    pub page_index: usize,
    pub width_px: u32,
    pub height_px: u32,
    pub boxes: Vec<TableBBox>,
}

pub fn extract_page(
    pair: &PagePair,
    params: &DiffParams,
    min_box_px: u32,
    source_kind: SourceKind,
) -> PageBoxes {
    let mask = diff_pages(pair, params);
    let (w, h) = pair.dimensions();
    PageBoxes {
        page_index: pair.page_index,
        width_px: w,
        height_px: h,
        boxes: mask_to_boxes(&mask, min_box_px, pair.page_index, &pair.doc_id, source_kind),
    }
}

/// Keeps pages with at least one box; page indices are left untouched.
pub fn filter_labeled_pages(pages: Vec<PageBoxes>) -> Vec<PageBoxes> {
    pages.into_iter().filter(|p| !p.boxes.is_empty()).collect()
}
