mod common;

use common::*;
use tablelabel_fixtures::corpus::generate_corpus;

#[test]
fn generated_corpus_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config(150);
    let docs = generate_corpus(24, 5);
    let run = run_end_to_end(&docs, dir.path(), &cfg);
    let a = box_agreement(&run, 0.95);
    eprintln!("{a:?} dropped={}", run.outcome.dropped_documents);
    assert_eq!(run.outcome.dropped_documents, 0);
    assert_eq!(a.matched, a.emitted);
    assert_eq!(a.recovered, a.expected);
}

#[test]
fn structure_targets_match_generator() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config(150);
    let docs = generate_corpus(12, 8);
    let run = run_end_to_end(&docs, dir.path(), &cfg);
    let s = structure_agreement(&run);
    eprintln!("{:?} {s:?}", run.outcome.stats.drops);
    assert_eq!(s.emitted, s.expected);
    assert_eq!(s.exact, s.expected);
    assert_eq!(run.outcome.structure_records, s.expected);
}
