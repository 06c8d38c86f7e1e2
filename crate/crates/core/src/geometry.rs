use serde::{Deserialize, Serialize};

/// Axis-aligned pixel rectangle, upper-left origin, half-open extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Rect { x, y, w, h }
    }

    pub fn right(&self) -> u64 {
        self.x as u64 + self.w as u64
    }

    pub fn bottom(&self) -> u64 {
        self.y as u64 + self.h as u64
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    pub fn intersection_area(&self, other: &Rect) -> u64 {
        let x0 = self.x.max(other.x) as u64;
        let y0 = self.y.max(other.y) as u64;
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 <= x0 || y1 <= y0 {
            0
        } else {
            (x1 - x0) * (y1 - y0)
        }
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.intersection_area(other) > 0
    }

    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Exact area of the union of a set of rectangles, by coordinate compression.
pub fn union_area(rects: &[Rect]) -> u64 {
    let rects: Vec<&Rect> = rects.iter().filter(|r| !r.is_empty()).collect();
    if rects.is_empty() {
        return 0;
    }
    let mut xs: Vec<u64> = rects.iter().flat_map(|r| [r.x as u64, r.right()]).collect();
    xs.sort_unstable();
    xs.dedup();

    let mut area = 0;
    for strip in xs.windows(2) {
        let (x0, x1) = (strip[0], strip[1]);
        let mut spans: Vec<(u64, u64)> = rects
            .iter()
            .filter(|r| (r.x as u64) <= x0 && r.right() >= x1)
            .map(|r| (r.y as u64, r.bottom()))
            .collect();
        if spans.is_empty() {
            continue;
        }
        spans.sort_unstable();
        let mut covered = 0;
        let (mut cur_lo, mut cur_hi) = spans[0];
        for &(lo, hi) in &spans[1..] {
            if lo > cur_hi {
                covered += cur_hi - cur_lo;
                cur_lo = lo;
                cur_hi = hi;
            } else {
                cur_hi = cur_hi.max(hi);
            }
        }
        covered += cur_hi - cur_lo;
        area += covered * (x1 - x0);
    }
    area
}

/// Exact area of `union(a) ∩ union(b)`.
pub fn union_intersection_area(a: &[Rect], b: &[Rect]) -> u64 {
    // |A ∩ B| = Σ over pairwise pieces is wrong under overlap, so intersect
    // every pair and take the union of the pieces.
    let pieces: Vec<Rect> = a
        .iter()
        .flat_map(|ra| b.iter().filter_map(move |rb| intersect(ra, rb)))
        .collect();
    union_area(&pieces)
}

fn intersect(a: &Rect, b: &Rect) -> Option<Rect> {
    let x0 = a.x.max(b.x);
    let y0 = a.y.max(b.y);
    let x1 = a.right().min(b.right());
    let y1 = a.bottom().min(b.bottom());
    if x1 <= x0 as u64 || y1 <= y0 as u64 {
        None
    } else {
        Some(Rect::new(x0, y0, (x1 - x0 as u64) as u32, (y1 - y0 as u64) as u32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn union_of_overlapping_pair() {
        let a = Rect::new(0, 0, 10, 10);
        let b = Rect::new(5, 0, 10, 10);
        assert_eq!(union_area(&[a, b]), 150);
        assert_eq!(union_intersection_area(&[a], &[b]), 50);
    }

    #[test]
    fn double_cover_not_counted_twice() {
        let a = Rect::new(0, 0, 10, 10);
        assert_eq!(union_area(&[a, a, a]), 100);
        assert_eq!(union_intersection_area(&[a, a], &[a]), 100);
    }

    #[test]
    fn iou_of_disjoint_is_zero() {
        assert_eq!(Rect::new(0, 0, 4, 4).iou(&Rect::new(10, 10, 4, 4)), 0.0);
    }
}
