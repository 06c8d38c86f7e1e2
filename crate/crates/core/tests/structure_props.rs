use proptest::prelude::*;
use tablelabel::structure::{
    detect_row_groups, fill_cells, latexml_to_structure, word_xml_to_structure, CellKind, OcrBlock,
    Tag, TagSequence,
};

fn grid() -> impl Strategy<Value = Vec<Vec<bool>>> {
    (1usize..8, 1usize..6).prop_flat_map(|(r, c)| {
        proptest::collection::vec(proptest::collection::vec(any::<bool>(), c), r)
    })
}

fn word_table(g: &[Vec<bool>]) -> String {
    let mut s = String::from("<w:tbl><w:tblPr/>");
    for row in g {
        s.push_str("<w:tr>");
        for &full in row {
            if full {
                s.push_str("<w:tc><w:p><w:r><w:t>v</w:t></w:r></w:p></w:tc>");
            } else {
                s.push_str("<w:tc><w:p><w:r><w:t xml:space=\"preserve\"> </w:t></w:r></w:p></w:tc>");
            }
        }
        s.push_str("</w:tr>");
    }
    s.push_str("</w:tbl>");
    s
}

fn latexml_table(g: &[Vec<bool>]) -> String {
    let mut s = String::from("<document xmlns=\"http://dlmf.nist.gov/LaTeXML\"><tabular><tbody>");
    for row in g {
        s.push_str("<tr>");
        for &full in row {
            s.push_str(if full { "<td>v</td>" } else { "<td/>" });
        }
        s.push_str("</tr>");
    }
    s.push_str("</tbody></tabular></document>");
    s
}

fn expected_rows(g: &[Vec<bool>]) -> Vec<Vec<CellKind>> {
    g.iter()
        .map(|r| r.iter().map(|&f| if f { CellKind::Y } else { CellKind::N }).collect())
        .collect()
}

/// Rows of blocks on distinct, non-overlapping bands: (band top, height,
/// xs of blocks).
fn banded_blocks() -> impl Strategy<Value = Vec<OcrBlock>> {
    proptest::collection::vec((1u32..40, 1u32..15, proptest::collection::vec(0u32..200, 1..4)), 0..8)
        .prop_map(|bands| {
            let mut y = 0.0;
            let mut out = Vec::new();
            for (k, (gap, h, xs)) in bands.into_iter().enumerate() {
                y += gap as f64;
                for (j, x) in xs.into_iter().enumerate() {
                    out.push(OcrBlock::new(format!("b{k}_{j}"), x as f64, y, 8.0, h as f64));
                }
                y += h as f64;
            }
            out
        })
}

fn names(groups: &[Vec<OcrBlock>]) -> Vec<Vec<String>> {
    groups
        .iter()
        .map(|g| {
            let mut v: Vec<String> = g.iter().map(|b| b.text.clone()).collect();
            v.sort();
            v
        })
        .collect()
}

fn combinations(n: usize, k: usize, from: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if cur.len() == k {
        f(cur);
        return;
    }
    for i in from..n {
        cur.push(i);
        combinations(n, k, i + 1, cur, f);
        cur.pop();
    }
}

// Exhaustive search over cut sets; the first maximal set in lexicographic
// order wins.
fn brute_force_groups(blocks: &[OcrBlock], n_rows: usize) -> Vec<Vec<String>> {
    let mut tops: Vec<(f64, f64)> = blocks.iter().map(|b| (b.y, b.y + b.h)).collect();
    tops.sort_by(|a, b| a.partial_cmp(b).unwrap());
    tops.dedup();
    let gaps: Vec<f64> = tops.windows(2).map(|w| w[1].0 - w[0].1).collect();
    let k = (n_rows - 1).min(gaps.len());
    let mut best: Option<(f64, Vec<usize>)> = None;
    combinations(gaps.len(), k, 0, &mut Vec::new(), &mut |combo| {
        let sum: f64 = combo.iter().map(|&i| gaps[i]).sum();
        if best.as_ref().map_or(true, |(s, _)| sum > *s) {
            best = Some((sum, combo.to_vec()));
        }
    });
    let cuts = best.map(|b| b.1).unwrap_or_default();
    let mut groups = vec![Vec::new(); n_rows];
    for b in blocks {
        let band = tops.iter().position(|t| t.0 == b.y).unwrap();
        let g = cuts.iter().filter(|&&c| c < band).count();
        groups[g].push(b.text.clone());
    }
    for g in &mut groups {
        g.sort();
    }
    groups
}

proptest! {
    #[test]
    fn word_tags_closed_balanced_and_arity_preserving(g in grid()) {
        let s = word_xml_to_structure(word_table(&g).as_bytes()).unwrap();
        prop_assert!(s.tags.validate().is_ok());
        prop_assert!(s.tags.tokens.iter().all(|t| Tag::ALL.contains(t)));
        prop_assert_eq!(s.tags.row_count(), g.len());
        prop_assert_eq!(s.tags.rows(), expected_rows(&g));
        let reparsed = TagSequence::parse(&s.tags.to_string()).unwrap();
        prop_assert_eq!(reparsed, s.tags);
    }

    #[test]
    fn latexml_and_word_agree(g in grid()) {
        let w = word_xml_to_structure(word_table(&g).as_bytes()).unwrap();
        let l = latexml_to_structure(latexml_table(&g).as_bytes()).unwrap();
        prop_assert_eq!(w.tags, l.tags);
    }

    #[test]
    fn row_groups_match_exhaustive_search(blocks in banded_blocks(), n in 1usize..6) {
        prop_assert_eq!(names(&detect_row_groups(&blocks, n)), brute_force_groups(&blocks, n));
    }

    #[test]
    fn row_groups_invariant_under_translation_and_scale(
        blocks in banded_blocks(), n in 1usize..6, dy in -50i32..50, scale in 1u32..6,
    ) {
        let moved: Vec<OcrBlock> = blocks
            .iter()
            .map(|b| OcrBlock::new(b.text.clone(), b.x * scale as f64, b.y * scale as f64 + dy as f64, b.w * scale as f64, b.h * scale as f64))
            .collect();
        prop_assert_eq!(names(&detect_row_groups(&blocks, n)), names(&detect_row_groups(&moved, n)));
    }

    #[test]
    fn fill_preserves_block_texts(g in grid(), seed in proptest::collection::vec(0usize..4, 1..8)) {
        let tags = TagSequence::from_rows(&expected_rows(&g), 0);
        let mut groups = vec![Vec::new(); g.len()];
        let mut all = Vec::new();
        for (i, &count) in seed.iter().enumerate() {
            let r = i % g.len();
            for j in 0..count {
                let text = format!("t{i}x{j}");
                all.push(text.clone());
                groups[r].push(OcrBlock::new(text, (j * 10) as f64, 0.0, 5.0, 5.0));
            }
        }
        let t = fill_cells(&tags, &groups).unwrap();
        let mut got: Vec<String> = t
            .rows
            .iter()
            .flatten()
            .filter_map(|c| c.content.as_deref())
            .flat_map(|c| c.split_whitespace().map(str::to_owned))
            .chain(t.unplaced.iter().cloned())
            .collect();
        got.sort();
        all.sort();
        prop_assert_eq!(got, all);
        for row in &t.rows {
            for c in row {
                prop_assert!(c.kind == CellKind::Y || c.content.is_none());
            }
        }
    }
}
