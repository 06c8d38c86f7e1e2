use std::collections::VecDeque;

use proptest::prelude::*;
use tablelabel::extract::{connected_components, diff_images, mask_to_rects, DiffParams, PixelMask};
use tablelabel::geometry::Rect;
use tablelabel::render::PageImage;

// Breadth-first flood fill, independent of the two-pass labeller.
fn flood_components(mask: &PixelMask) -> Vec<Vec<(u32, u32)>> {
    let (w, h) = (mask.width_px as i64, mask.height_px as i64);
    let mut seen = vec![false; mask.bits.len()];
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            if !mask.bits[i] || seen[i] {
                continue;
            }
            seen[i] = true;
            let mut comp = Vec::new();
            let mut q = VecDeque::from([(x, y)]);
            while let Some((cx, cy)) = q.pop_front() {
                comp.push((cx as u32, cy as u32));
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (cx + dx, cy + dy);
                        if nx < 0 || ny < 0 || nx >= w || ny >= h {
                            continue;
                        }
                        let j = (ny * w + nx) as usize;
                        if mask.bits[j] && !seen[j] {
                            seen[j] = true;
                            q.push_back((nx, ny));
                        }
                    }
                }
            }
            out.push(comp);
        }
    }
    out
}

fn bbox(points: &[(u32, u32)]) -> Rect {
    let x0 = points.iter().map(|p| p.0).min().unwrap();
    let x1 = points.iter().map(|p| p.0).max().unwrap();
    let y0 = points.iter().map(|p| p.1).min().unwrap();
    let y1 = points.iter().map(|p| p.1).max().unwrap();
    Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1)
}

fn contains(r: &Rect, x: u32, y: u32) -> bool {
    x >= r.x && y >= r.y && (x as u64) < r.right() && (y as u64) < r.bottom()
}

fn random_mask() -> impl Strategy<Value = PixelMask> {
    (4u32..40, 4u32..40).prop_flat_map(|(w, h)| {
        proptest::collection::vec(proptest::bool::weighted(0.3), (w * h) as usize)
            .prop_map(move |bits| PixelMask { width_px: w, height_px: h, bits })
    })
}

/// Rectangles on a coarse grid so that their extents never touch.
fn separated_rects() -> impl Strategy<Value = (Vec<Rect>, Vec<u32>)> {
    proptest::collection::vec((0u32..4, 0u32..4, 8u32..30, 8u32..30, 1u32..4), 1..6).prop_map(
        |cells| {
            let mut used = std::collections::BTreeSet::new();
            let mut rects = Vec::new();
            let mut strokes = Vec::new();
            for (cx, cy, w, h, s) in cells {
                if used.insert((cx, cy)) {
                    rects.push(Rect::new(cx * 40 + 3, cy * 40 + 3, w, h));
                    strokes.push(s);
                }
            }
            (rects, strokes)
        },
    )
}

fn draw_outline(img: &mut PageImage, r: Rect, stroke: u32) {
    for y in r.y..r.y + r.h {
        for x in r.x..r.x + r.w {
            if x < r.x + stroke || y < r.y + stroke || x + stroke >= r.x + r.w || y + stroke >= r.y + r.h {
                img.set_pixel(x, y, [0, 255, 0]);
            }
        }
    }
}

proptest! {
    #[test]
    fn labelling_matches_flood_fill(mask in random_mask()) {
        let mut expected: Vec<Rect> = flood_components(&mask).iter().map(|c| bbox(c)).collect();
        let mut got = connected_components(&mask);
        expected.sort();
        got.sort();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn every_pixel_in_one_box_or_discarded(mask in random_mask(), min in 1u32..6) {
        let rects = mask_to_rects(&mask, min);
        for comp in flood_components(&mask) {
            let b = bbox(&comp);
            for &(x, y) in &comp {
                let n = rects.iter().filter(|r| contains(r, x, y)).count();
                if b.w >= min && b.h >= min {
                    prop_assert_eq!(n, 1);
                } else {
                    prop_assert!(n <= 1);
                }
            }
        }
    }

    #[test]
    fn translation_equivariance(mask in random_mask(), dx in 0u32..10, dy in 0u32..10, min in 1u32..5) {
        let (w, h) = (mask.width_px + dx + 3, mask.height_px + dy + 3);
        let mut shifted = PixelMask::new(w, h);
        for y in 0..mask.height_px {
            for x in 0..mask.width_px {
                shifted.set(x + dx, y + dy, mask.get(x, y));
            }
        }
        let moved: Vec<Rect> = mask_to_rects(&mask, min)
            .into_iter()
            .map(|r| Rect::new(r.x + dx, r.y + dy, r.w, r.h))
            .collect();
        prop_assert_eq!(mask_to_rects(&shifted, min), moved);
    }

    #[test]
    fn synthetic_outlines_recovered_exactly((rects, strokes) in separated_rects(), noise_seed in any::<u64>()) {
        let (w, h) = (170, 170);
        let mut control = PageImage::blank(w, h, 0);
        // shared grey "text" that must not leak into the mask
        let mut s = noise_seed | 1;
        for _ in 0..400 {
            s ^= s << 13; s ^= s >> 7; s ^= s << 17;
            let (x, y) = ((s % w as u64) as u32, ((s >> 20) % h as u64) as u32);
            control.set_pixel(x, y, [90, 90, 90]);
        }
        let mut annotated = control.clone();
        for (r, st) in rects.iter().zip(&strokes) {
            draw_outline(&mut annotated, *r, *st);
        }
        let mask = diff_images(&annotated, &control, &DiffParams::default());
        let got = mask_to_rects(&mask, 8);
        let mut expected = rects.clone();
        expected.sort_by_key(|r| (r.y, r.x, r.h, r.w));
        prop_assert_eq!(got.clone(), expected);
        prop_assert_eq!(mask_to_rects(&mask, 8), got);
    }
}
