use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DatasetRecord, Task};
use crate::ingest::SourceKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KindCounts {
    pub word: u64,
    pub latex: u64,
    pub total: u64,
}

impl KindCounts {
    pub fn new(word: u64, latex: u64) -> Self {
        KindCounts {
            word,
            latex,
            total: word + latex,
        }
    }

    pub fn add(&mut self, kind: SourceKind, n: u64) {
        match kind {
            SourceKind::Word => self.word += n,
            SourceKind::Latex => self.latex += n,
        }
        self.total += n;
    }

    pub fn merge(self, o: KindCounts) -> KindCounts {
        KindCounts {
            word: self.word + o.word,
            latex: self.latex + o.latex,
            total: self.total + o.total,
        }
    }

    pub fn partition_holds(&self) -> bool {
        self.word + self.latex == self.total
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusStats {
    pub detection_tables: KindCounts,
    pub detection_pages: KindCounts,
    pub structure_tables: KindCounts,
    /// Dropped documents or tables keyed by pipeline stage.
    pub drops: BTreeMap<String, u64>,
}

impl CorpusStats {
    pub fn add_record(&mut self, r: &DatasetRecord) {
        match r.task {
            Task::Detection => {
                self.detection_tables.add(r.source_kind, r.annotations.len() as u64);
                self.detection_pages.add(r.source_kind, 1);
            }
            Task::Structure => self.structure_tables.add(r.source_kind, 1),
        }
    }

    pub fn add_drop(&mut self, stage: &str, n: u64) {
        *self.drops.entry(stage.to_string()).or_default() += n;
    }

    pub fn merge(mut self, o: CorpusStats) -> CorpusStats {
        self.detection_tables = self.detection_tables.merge(o.detection_tables);
        self.detection_pages = self.detection_pages.merge(o.detection_pages);
        self.structure_tables = self.structure_tables.merge(o.structure_tables);
        for (k, v) in o.drops {
            *self.drops.entry(k).or_default() += v;
        }
        self
    }

    pub fn partition_holds(&self) -> bool {
        self.detection_tables.partition_holds()
            && self.detection_pages.partition_holds()
            && self.structure_tables.partition_holds()
    }
}

/// Table and page counts per task and source kind.
pub fn corpus_stats(records: &[DatasetRecord]) -> CorpusStats {
    let mut s = CorpusStats::default();
    for r in records {
        s.add_record(r);
    }
    s
}
