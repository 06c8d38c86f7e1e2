mod common;

use common::*;
use tablelabel_fixtures::corpus::generate_corpus;

#[test]
fn checked_in_pages_extract_exactly() {
    let c = check_prerendered(&prerendered_dir(), 0.95);
    assert!(c.pages >= 6, "{c:?}");
    assert_eq!(c.recovered, c.expected, "{c:?}");
    assert_eq!(c.matched, c.emitted, "{c:?}");
    assert!(c.elapsed.as_secs_f64() < 10.0, "{c:?}");
}

/// Rewrites `data/prerendered` from the generator and the helper tools.
#[test]
#[ignore]
fn regenerate_prerendered() {
    let dir = prerendered_dir();
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    let docs: Vec<_> = generate_corpus(6, 2024);
    write_prerendered(&docs, &fixture_config(150), &dir);
}
