use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detection::PageBoxes;
use crate::geometry::Rect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub partial: usize,
    pub undetected: usize,
    pub misdetected: usize,
    /// One-to-one matched pairs.
    pub matched: usize,
    /// Matched pairs with IoU at or above the match threshold and full
    /// enough coverage.
    pub correct: usize,
    pub gt_total: usize,
    pub pred_total: usize,
}

impl ErrorCounts {
    pub fn merge(self, o: ErrorCounts) -> ErrorCounts {
        ErrorCounts {
            partial: self.partial + o.partial,
            undetected: self.undetected + o.undetected,
            misdetected: self.misdetected + o.misdetected,
            matched: self.matched + o.matched,
            correct: self.correct + o.correct,
            gt_total: self.gt_total + o.gt_total,
            pred_total: self.pred_total + o.pred_total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTaxonomy {
    #[serde(flatten)]
    pub counts: ErrorCounts,
    /// undetected / gt_total
    pub undetected_rate: f64,
    /// misdetected / pred_total
    pub misdetected_rate: f64,
    /// partial / pred_total
    pub partial_rate: f64,
    pub iou_match: f64,
    pub coverage_min: f64,
}

impl ErrorTaxonomy {
    pub fn from_counts(counts: ErrorCounts, iou_match: f64, coverage_min: f64) -> Self {
        let rate = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        ErrorTaxonomy {
            undetected_rate: rate(counts.undetected, counts.gt_total),
            misdetected_rate: rate(counts.misdetected, counts.pred_total),
            partial_rate: rate(counts.partial, counts.pred_total),
            counts,
            iou_match,
            coverage_min,
        }
    }
}

/// Error counts for the boxes of a single page.
pub fn classify_page(preds: &[Rect], gts: &[Rect], iou_match: f64, coverage_min: f64) -> ErrorCounts {
    let mut candidates: Vec<(f64, Rect, Rect, usize, usize)> = Vec::new();
    for (gi, g) in gts.iter().enumerate() {
        for (pi, p) in preds.iter().enumerate() {
            if g.intersects(p) {
                candidates.push((g.iou(p), *g, *p, gi, pi));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
            .then(a.4.cmp(&b.4))
    });

    let mut gt_used = vec![false; gts.len()];
    let mut pred_used = vec![false; preds.len()];
    let mut counts = ErrorCounts {
        gt_total: gts.len(),
        pred_total: preds.len(),
        ..Default::default()
    };
    for (iou, g, p, gi, pi) in candidates {
        if gt_used[gi] || pred_used[pi] {
            continue;
        }
        gt_used[gi] = true;
        pred_used[pi] = true;
        counts.matched += 1;
        let coverage = if g.area() == 0 {
            0.0
        } else {
            g.intersection_area(&p) as f64 / g.area() as f64
        };
        if coverage < coverage_min {
            counts.partial += 1;
        } else if iou >= iou_match {
            counts.correct += 1;
        }
    }
    counts.undetected = gts
        .iter()
        .filter(|g| !preds.iter().any(|p| g.intersects(p)))
        .count();
    counts.misdetected = preds
        .iter()
        .filter(|p| !gts.iter().any(|g| g.intersects(p)))
        .count();
    counts
}

/// Partial, un- and mis-detection counts over all pages.
pub fn classify_errors(
    preds: &PageBoxes,
    gts: &PageBoxes,
    iou_match: f64,
    coverage_min: f64,
) -> ErrorTaxonomy {
    let keys: BTreeSet<&String> = preds.keys().chain(gts.keys()).collect();
    let empty: Vec<Rect> = Vec::new();
    let counts = keys
        .into_par_iter()
        .map(|k| {
            classify_page(
                preds.get(k).unwrap_or(&empty),
                gts.get(k).unwrap_or(&empty),
                iou_match,
                coverage_min,
            )
        })
        .reduce(ErrorCounts::default, ErrorCounts::merge);
    ErrorTaxonomy::from_counts(counts, iou_match, coverage_min)
}
