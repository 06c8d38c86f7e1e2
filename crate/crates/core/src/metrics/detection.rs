use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{union_area, union_intersection_area, Rect};

/// Boxes grouped by page key.
pub type PageBoxes = BTreeMap<String, Vec<Rect>>;

pub fn page_key(doc_id: &str, page_index: usize) -> String {
    format!("{doc_id}#{page_index}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AreaTotals {
    pub overlap_area: u64,
    pub detected_area: u64,
    pub gt_area: u64,
}

impl AreaTotals {
    pub fn page(preds: &[Rect], gts: &[Rect]) -> Self {
        AreaTotals {
            overlap_area: union_intersection_area(preds, gts),
            detected_area: union_area(preds),
            gt_area: union_area(gts),
        }
    }

    pub fn merge(self, other: AreaTotals) -> AreaTotals {
        AreaTotals {
            overlap_area: self.overlap_area + other.overlap_area,
            detected_area: self.detected_area + other.detected_area,
            gt_area: self.gt_area + other.gt_area,
        }
    }

    pub fn metrics(self) -> DetectionMetrics {
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(self.overlap_area, self.detected_area);
        let recall = ratio(self.overlap_area, self.gt_area);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        DetectionMetrics {
            precision,
            recall,
            f1,
            overlap_area: self.overlap_area,
            detected_area: self.detected_area,
            gt_area: self.gt_area,
            empty_prediction: self.detected_area == 0,
            empty_ground_truth: self.gt_area == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub overlap_area: u64,
    pub detected_area: u64,
    pub gt_area: u64,
    /// No predicted area anywhere; precision reported as 0.
    pub empty_prediction: bool,
    /// No ground-truth area anywhere; recall reported as 0.
    pub empty_ground_truth: bool,
}

/// Area-union precision, recall and F1, summed over pages before dividing.
pub fn detection_prf(preds: &PageBoxes, gts: &PageBoxes) -> DetectionMetrics {
    let keys: BTreeSet<&String> = preds.keys().chain(gts.keys()).collect();
    let empty: Vec<Rect> = Vec::new();
    keys.into_par_iter()
        .map(|k| {
            AreaTotals::page(
                preds.get(k).unwrap_or(&empty),
                gts.get(k).unwrap_or(&empty),
            )
        })
        .reduce(AreaTotals::default, AreaTotals::merge)
        .metrics()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pages(entries: &[(&str, Vec<Rect>)]) -> PageBoxes {
        entries.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn perfect_match() {
        let p = pages(&[("a", vec![Rect::new(1, 2, 30, 40), Rect::new(50, 50, 5, 5)])]);
        let m = detection_prf(&p, &p);
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn half_shifted_box() {
        let m = detection_prf(
            &pages(&[("a", vec![Rect::new(5, 0, 10, 10)])]),
            &pages(&[("a", vec![Rect::new(0, 0, 10, 10)])]),
        );
        assert_eq!(m.overlap_area, 50);
        assert_eq!((m.precision, m.recall, m.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn micro_sum_across_pages() {
        let m = detection_prf(
            &pages(&[("a", vec![Rect::new(0, 0, 10, 10)]), ("b", vec![Rect::new(0, 0, 10, 10)])]),
            &pages(&[("a", vec![Rect::new(0, 0, 10, 10)])]),
        );
        assert_eq!(m.precision, 0.5);
        assert_eq!(m.recall, 1.0);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn double_coverage_counted_once() {
        let r = Rect::new(0, 0, 10, 10);
        let m = detection_prf(&pages(&[("a", vec![r, r])]), &pages(&[("a", vec![r])]));
        assert_eq!(m.detected_area, 100);
        assert_eq!(m.precision, 1.0);
    }

    #[test]
    fn empty_flags() {
        let m = detection_prf(&PageBoxes::new(), &pages(&[("a", vec![Rect::new(0, 0, 2, 2)])]));
        assert!(m.empty_prediction && !m.empty_ground_truth);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }
}
