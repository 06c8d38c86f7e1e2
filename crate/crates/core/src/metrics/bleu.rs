use std::collections::HashMap;
use std::hash::Hash;

pub const MAX_N: usize = 4;

/// Clipped n-gram matches and candidate n-gram totals for n = 1..=4, plus
/// the two lengths; summable across a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BleuStats {
    pub matches: [u64; MAX_N],
    pub totals: [u64; MAX_N],
    pub candidate_len: u64,
    pub reference_len: u64,
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

impl BleuStats {
    pub fn new<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> Self {
        let mut s = BleuStats {
            candidate_len: candidate.len() as u64,
            reference_len: reference.len() as u64,
            ..Default::default()
        };
        for n in 1..=MAX_N {
            let cand = ngram_counts(candidate, n);
            let refc = ngram_counts(reference, n);
            s.totals[n - 1] = candidate.len().saturating_sub(n - 1) as u64;
            s.matches[n - 1] = cand
                .iter()
                .map(|(g, &c)| c.min(refc.get(g).copied().unwrap_or(0)))
                .sum();
        }
        s
    }

    pub fn merge(mut self, other: BleuStats) -> BleuStats {
        for i in 0..MAX_N {
            self.matches[i] += other.matches[i];
            self.totals[i] += other.totals[i];
        }
        self.candidate_len += other.candidate_len;
        self.reference_len += other.reference_len;
        self
    }

    /// Geometric mean of the modified precisions times the brevity penalty.
    /// With `smoothing`, orders n ≥ 2 use add-one counts.
    pub fn score(&self, smoothing: bool) -> f64 {
        if self.candidate_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for i in 0..MAX_N {
            let (m, t) = if smoothing && i > 0 {
                (self.matches[i] + 1, self.totals[i] + 1)
            } else {
                (self.matches[i], self.totals[i])
            };
            if m == 0 || t == 0 {
                return 0.0;
            }
            log_sum += (m as f64 / t as f64).ln();
        }
        let c = self.candidate_len as f64;
        let r = self.reference_len as f64;
        let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
        bp * (log_sum / MAX_N as f64).exp()
    }
}

/// Sentence-level BLEU-4 with a single reference, unsmoothed.
pub fn bleu4<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> f64 {
    BleuStats::new(candidate, reference).score(false)
}

pub fn bleu4_smoothed<T: Eq + Hash>(candidate: &[T], reference: &[T], smoothing: bool) -> f64 {
    BleuStats::new(candidate, reference).score(smoothing)
}

/// Corpus BLEU-4: counts pooled over all pairs before taking precisions.
pub fn corpus_bleu4<T: Eq + Hash>(pairs: &[(&[T], &[T])], smoothing: bool) -> f64 {
    pairs
        .iter()
        .map(|(c, r)| BleuStats::new(c, r))
        .fold(BleuStats::default(), BleuStats::merge)
        .score(smoothing)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identity_is_one() {
        let t = toks("<tabular> <tr> <cell_y> </tr> </tabular>");
        assert_eq!(bleu4(&t, &t), 1.0);
    }

    #[test]
    fn one_token_substitution() {
        let b = bleu4(&toks("a b c d e"), &toks("a b c d f"));
        assert!((b - 0.2f64.powf(0.25)).abs() < 1e-12);
        assert!((b - 0.6687).abs() < 1e-4);
    }

    #[test]
    fn no_shared_four_gram() {
        assert_eq!(bleu4(&toks("a b c d a b"), &toks("a b c x a b c")), 0.0);
    }

    #[test]
    fn empty_and_short_candidates() {
        let empty: Vec<&str> = vec![];
        assert_eq!(bleu4(&empty, &toks("a b c d")), 0.0);
        assert_eq!(bleu4(&toks("a b c"), &toks("a b c")), 0.0);
    }

    #[test]
    fn brevity_penalty() {
        let b = bleu4(&toks("a b c d"), &toks("a b c d e f g h"));
        assert!((b - (1.0f64 - 2.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn clipping() {
        let s = BleuStats::new(&toks("a a a a"), &toks("a b"));
        assert_eq!(s.matches[0], 1);
    }

    #[test]
    fn smoothing_lifts_zero() {
        let c = toks("a b c d a b");
        let r = toks("a b c x a b c");
        assert!(bleu4_smoothed(&c, &r, true) > 0.0);
    }
}
