use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetRecord, Split};
use crate::error::{Error, Result};
use crate::ingest::SourceKind;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSummary {
    /// (source kind, split) → record count.
    pub counts: BTreeMap<String, BTreeMap<String, usize>>,
    /// Documents whose records ended up in more than one split.
    pub leaked_documents: Vec<String>,
    pub seed: u64,
}

fn stratum_seed(seed: u64, kind: SourceKind) -> u64 {
    let salt = match kind {
        SourceKind::Word => 0x5757_5757,
        SourceKind::Latex => 0x4c4c_4c4c,
    };
    seed ^ (salt << 16)
}

/// Takes exactly `n` records from `docs` (each a list of record indices),
/// whole documents first; if no combination of whole documents fits, the
/// remainder comes from the first leftover document.
fn take_grouped(docs: &mut Vec<Vec<usize>>, n: usize) -> Vec<usize> {
    let mut taken = Vec::new();
    let mut remaining = n;
    let mut i = 0;
    while i < docs.len() && remaining > 0 {
        if docs[i].len() <= remaining {
            remaining -= docs[i].len();
            taken.extend(docs.remove(i));
        } else {
            i += 1;
        }
    }
    if remaining > 0 {
        let doc = &mut docs[0];
        taken.extend(doc.drain(..remaining));
    }
    taken
}

/// Assigns `val_n` and `test_n` records per source kind; everything else is
/// train. The assignment depends only on the set of record ids, the counts
/// and the seed.
pub fn make_splits(
    records: &mut [DatasetRecord],
    val_n: usize,
    test_n: usize,
    seed: u64,
    group_by_document: bool,
) -> Result<SplitSummary> {
    let mut strata: BTreeMap<SourceKind, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        strata.entry(r.source_kind).or_default().push(i);
    }
    for (kind, members) in &strata {
        let available = members.len();
        if val_n + test_n > available {
            return Err(Error::SplitTooLarge {
                stratum: kind.to_string(),
                requested: val_n + test_n,
                available,
            });
        }
    }
    for r in records.iter_mut() {
        r.split = Split::Train;
    }

    for (kind, mut idx) in strata {
        idx.sort_by(|&a, &b| records[a].record_id.cmp(&records[b].record_id));
        let mut rng = ChaCha8Rng::seed_from_u64(stratum_seed(seed, kind));
        let (val, test) = if group_by_document {
            let mut by_doc: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for &i in &idx {
                by_doc.entry(records[i].doc_id.as_str()).or_default().push(i);
            }
            let mut docs: Vec<Vec<usize>> = by_doc.into_values().collect();
            docs.shuffle(&mut rng);
            let val = take_grouped(&mut docs, val_n);
            let test = take_grouped(&mut docs, test_n);
            (val, test)
        } else {
            idx.shuffle(&mut rng);
            (idx[..val_n].to_vec(), idx[val_n..val_n + test_n].to_vec())
        };
        for i in val {
            records[i].split = Split::Val;
        }
        for i in test {
            records[i].split = Split::Test;
        }
    }

    let mut summary = SplitSummary {
        seed,
        ..Default::default()
    };
    let mut doc_splits: BTreeMap<&str, std::collections::BTreeSet<Split>> = BTreeMap::new();
    for r in records.iter() {
        *summary
            .counts
            .entry(r.source_kind.to_string())
            .or_default()
            .entry(r.split.to_string())
            .or_default() += 1;
        doc_splits.entry(&r.doc_id).or_default().insert(r.split);
    }
    summary.leaked_documents = doc_splits
        .into_iter()
        .filter(|(_, s)| s.len() > 1)
        .map(|(d, _)| d.to_string())
        .collect();
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::super::Task;
    use super::*;

    fn recs(word: usize, latex: usize, per_doc: usize) -> Vec<DatasetRecord> {
        (0..word + latex)
            .map(|i| DatasetRecord {
                record_id: format!("r{i:04}"),
                task: Task::Structure,
                image_path: String::new(),
                width_px: 1,
                height_px: 1,
                annotations: vec![],
                target: None,
                structure_flags: None,
                split: Split::Train,
                doc_id: format!("d{}", i / per_doc),
                page_index: 0,
                source_kind: if i < word { SourceKind::Word } else { SourceKind::Latex },
                table_index: None,
            })
            .collect()
    }

    fn count(r: &[DatasetRecord], kind: SourceKind, split: Split) -> usize {
        r.iter().filter(|x| x.source_kind == kind && x.split == split).count()
    }

    #[test]
    fn hundred_records_deterministic() {
        let mut a = recs(100, 0, 1);
        let mut b = a.clone();
        b.reverse();
        make_splits(&mut a, 10, 10, 7, true).unwrap();
        make_splits(&mut b, 10, 10, 7, true).unwrap();
        assert_eq!(count(&a, SourceKind::Word, Split::Train), 80);
        let key = |v: &[DatasetRecord]| {
            let mut k: Vec<(String, Split)> = v.iter().map(|r| (r.record_id.clone(), r.split)).collect();
            k.sort();
            k
        };
        assert_eq!(key(&a), key(&b));
    }

    #[test]
    fn too_large() {
        let mut r = recs(10, 10, 1);
        assert!(matches!(
            make_splits(&mut r, 6, 5, 1, false),
            Err(Error::SplitTooLarge { requested: 11, available: 10, .. })
        ));
    }

    #[test]
    fn stratified() {
        let mut r = recs(60, 40, 3);
        let s = make_splits(&mut r, 10, 10, 3, true).unwrap();
        assert_eq!(count(&r, SourceKind::Word, Split::Val), 10);
        assert_eq!(count(&r, SourceKind::Latex, Split::Val), 10);
        assert_eq!(count(&r, SourceKind::Word, Split::Test), 10);
        assert_eq!(count(&r, SourceKind::Latex, Split::Test), 10);
        assert!(s.leaked_documents.len() <= 4);
    }

    #[test]
    fn grouping_avoids_leakage_when_possible() {
        let mut r = recs(60, 0, 2);
        let s = make_splits(&mut r, 10, 10, 9, true).unwrap();
        assert!(s.leaked_documents.is_empty());
    }
}
