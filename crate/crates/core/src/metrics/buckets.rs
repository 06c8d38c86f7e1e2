use serde::{Deserialize, Serialize};

pub const BUCKET_LABELS: [&str; 5] = ["0-20", "21-40", "41-60", "61-80", ">80"];

pub fn bucket_index(len: usize) -> usize {
    match len {
        0..=20 => 0,
        21..=40 => 1,
        41..=60 => 2,
        61..=80 => 3,
        _ => 4,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub label: String,
    pub total: usize,
    /// Absent for pure length distributions.
    pub exact_match: Option<usize>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBucketReport {
    pub buckets: Vec<BucketRow>,
    pub all: BucketRow,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl LengthBucketReport {
    /// Builds a report from per-bucket totals and optional exact counts.
    pub fn from_counts(totals: [usize; 5], exact: Option<[usize; 5]>) -> Self {
        let all_total: usize = totals.iter().sum();
        let all_exact = exact.map(|e| e.iter().sum::<usize>());
        let buckets = (0..5)
            .map(|i| {
                let exact_match = exact.map(|e| e[i]);
                BucketRow {
                    label: BUCKET_LABELS[i].to_string(),
                    total: totals[i],
                    exact_match,
                    ratio: match exact_match {
                        Some(m) => ratio(m, totals[i]),
                        None => ratio(totals[i], all_total),
                    },
                }
            })
            .collect();
        let all = BucketRow {
            label: "All".into(),
            total: all_total,
            exact_match: all_exact,
            ratio: match all_exact {
                Some(m) => ratio(m, all_total),
                None => {
                    if all_total == 0 {
                        0.0
                    } else {
                        1.0
                    }
                }
            },
        };
        LengthBucketReport { buckets, all }
    }
}

/// Exact-match counts bucketed by reference length.
pub fn exact_match_by_length<T: PartialEq>(pairs: &[(&[T], &[T])]) -> LengthBucketReport {
    let mut totals = [0usize; 5];
    let mut exact = [0usize; 5];
    for (cand, reference) in pairs {
        let b = bucket_index(reference.len());
        totals[b] += 1;
        if cand == reference {
            exact[b] += 1;
        }
    }
    LengthBucketReport::from_counts(totals, Some(exact))
}

pub fn length_distribution<T>(refs: &[&[T]]) -> LengthBucketReport {
    let mut totals = [0usize; 5];
    for r in refs {
        totals[bucket_index(r.len())] += 1;
    }
    LengthBucketReport::from_counts(totals, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundaries() {
        assert_eq!(
            [0, 20, 21, 40, 41, 60, 61, 80, 81].map(bucket_index),
            [0, 0, 1, 1, 2, 2, 3, 3, 4]
        );
    }

    #[test]
    fn identical_pairs_all_ratio_one() {
        let seqs: Vec<Vec<u8>> = [5, 25, 45, 65, 95].iter().map(|&n| vec![0; n]).collect();
        let pairs: Vec<(&[u8], &[u8])> = seqs.iter().map(|s| (&s[..], &s[..])).collect();
        let r = exact_match_by_length(&pairs);
        assert!(r.buckets.iter().all(|b| b.ratio == 1.0));
        assert_eq!(r.all.ratio, 1.0);
    }

    #[test]
    fn single_short_reference() {
        let s = vec![1u8; 10];
        let r = length_distribution(&[&s[..]]);
        assert_eq!(r.buckets[0].ratio, 1.0);
        assert_eq!(r.all.total, 1);
    }

    #[test]
    fn buckets_by_reference_length() {
        let c = vec![0u8; 10];
        let r = vec![0u8; 30];
        let rep = exact_match_by_length(&[(&c[..], &r[..])]);
        assert_eq!(rep.buckets[1].total, 1);
        assert_eq!(rep.buckets[1].exact_match, Some(0));
    }
}
