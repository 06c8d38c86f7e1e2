//! Detection and structure evaluation.

mod bleu;
mod buckets;
mod detection;
mod taxonomy;

use serde::{Deserialize, Serialize};

use crate::config::EvalConfig;
use crate::structure::{Tag, TagSequence};

pub use bleu::{bleu4, bleu4_smoothed, corpus_bleu4, BleuStats};
pub use buckets::{
    bucket_index, exact_match_by_length, length_distribution, BucketRow, LengthBucketReport,
    BUCKET_LABELS,
};
pub use detection::{detection_prf, page_key, AreaTotals, DetectionMetrics, PageBoxes};
pub use taxonomy::{classify_errors, classify_page, ErrorCounts, ErrorTaxonomy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureScores {
    pub pairs: usize,
    pub corpus_bleu: f64,
    pub mean_sentence_bleu: f64,
    pub exact_match: LengthBucketReport,
    /// References with no prediction; scored against an empty candidate.
    pub missing_predictions: usize,
}

/// Scores (candidate, reference) pairs. `None` candidates count as empty.
pub fn score_structure(
    pairs: &[(Option<TagSequence>, TagSequence)],
    smoothing: bool,
) -> StructureScores {
    let empty: Vec<Tag> = Vec::new();
    let toks: Vec<(&[Tag], &[Tag])> = pairs
        .iter()
        .map(|(c, r)| {
            (
                c.as_ref().map_or(&empty[..], |c| &c.tokens[..]),
                &r.tokens[..],
            )
        })
        .collect();
    let mean = if toks.is_empty() {
        0.0
    } else {
        toks.iter()
            .map(|(c, r)| bleu4_smoothed(c, r, smoothing))
            .sum::<f64>()
            / toks.len() as f64
    };
    StructureScores {
        pairs: pairs.len(),
        corpus_bleu: corpus_bleu4(&toks, smoothing),
        mean_sentence_bleu: mean,
        exact_match: exact_match_by_length(&toks),
        missing_predictions: pairs.iter().filter(|(c, _)| c.is_none()).count(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection: Option<DetectionMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub errors: Option<ErrorTaxonomy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureScores>,
    pub thresholds: EvalConfig,
}

pub fn evaluate_detection(preds: &PageBoxes, gts: &PageBoxes, cfg: &EvalConfig) -> EvaluationReport {
    EvaluationReport {
        detection: Some(detection_prf(preds, gts)),
        errors: Some(classify_errors(preds, gts, cfg.iou_match, cfg.coverage_min)),
        structure: None,
        thresholds: cfg.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_scores_identity() {
        let t = TagSequence::parse("<tabular> <tbody> <tr> <cell_y> <cell_n> </tr> </tbody> </tabular>").unwrap();
        let s = score_structure(&[(Some(t.clone()), t.clone()), (None, t)], false);
        assert_eq!(s.pairs, 2);
        assert_eq!(s.missing_predictions, 1);
        assert_eq!(s.exact_match.all.exact_match, Some(1));
        assert!((s.mean_sentence_bleu - 0.5).abs() < 1e-12);
    }

    #[test]
    fn report_carries_thresholds() {
        let cfg = EvalConfig::default();
        let r = evaluate_detection(&PageBoxes::new(), &PageBoxes::new(), &cfg);
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["thresholds"]["iou_match"], 0.5);
        assert_eq!(v["errors"]["coverage_min"], 0.9);
        assert!(v["detection"]["f1"].is_number());
    }
}
