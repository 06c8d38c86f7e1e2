//! Area-coverage rasterizer for the PDF subset in [`crate::pdf`].

use image::RgbImage;

use crate::layout::RectPt;
use crate::pdf::{Op, Page};

pub fn page_size_px(page: &Page, dpi: u32) -> (u32, u32) {
    let s = dpi as f64 / 72.0;
    (
        (page.width_pt * s).round().max(1.0) as u32,
        (page.height_pt * s).round().max(1.0) as u32,
    )
}

fn fill(img: &mut RgbImage, r: RectPt, rgb: [u8; 3], scale: f64) {
    let (x0, y0) = (r.x * scale, r.y * scale);
    let (x1, y1) = ((r.x + r.w) * scale, (r.y + r.h) * scale);
    if x1 <= x0 || y1 <= y0 {
        return;
    }
    let (w, h) = img.dimensions();
    let px0 = x0.floor().max(0.0) as u32;
    let py0 = y0.floor().max(0.0) as u32;
    let px1 = (x1.ceil().max(0.0) as u32).min(w);
    let py1 = (y1.ceil().max(0.0) as u32).min(h);
    for py in py0..py1 {
        let cy = (y1.min(py as f64 + 1.0) - y0.max(py as f64)).max(0.0);
        for px in px0..px1 {
            let cx = (x1.min(px as f64 + 1.0) - x0.max(px as f64)).max(0.0);
            let cov = cx * cy;
            if cov <= 0.0 {
                continue;
            }
            let p = img.get_pixel_mut(px, py);
            for c in 0..3 {
                let v = p.0[c] as f64 * (1.0 - cov) + rgb[c] as f64 * cov;
                p.0[c] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
}

/// Splits a centered stroke into four non-overlapping strips.
pub fn stroke_strips(r: RectPt, width: f64) -> [RectPt; 4] {
    let h = width / 2.0;
    let (x0, y0, x1, y1) = (r.x - h, r.y - h, r.x + r.w + h, r.y + r.h + h);
    [
        RectPt::new(x0, y0, x1 - x0, width),
        RectPt::new(x0, y1 - width, x1 - x0, width),
        RectPt::new(x0, y0 + width, width, (y1 - y0 - 2.0 * width).max(0.0)),
        RectPt::new(x1 - width, y0 + width, width, (y1 - y0 - 2.0 * width).max(0.0)),
    ]
}

pub fn rasterize_page(page: &Page, dpi: u32) -> RgbImage {
    let (w, h) = page_size_px(page, dpi);
    let mut img = RgbImage::from_pixel(w, h, image::Rgb([255, 255, 255]));
    let scale = dpi as f64 / 72.0;
    for op in &page.ops {
        match op {
            Op::Fill { rect, rgb } => fill(&mut img, *rect, *rgb, scale),
            Op::Stroke { rect, width, rgb } => {
                for s in stroke_strips(*rect, *width) {
                    fill(&mut img, s, *rgb, scale);
                }
            }
        }
    }
    img
}
