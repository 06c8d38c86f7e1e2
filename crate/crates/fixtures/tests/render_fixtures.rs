mod common;

use common::*;
use tablelabel::config::{Config, SentinelColor};
use tablelabel::dataset::annotate_document;
use tablelabel::docx::{locate_tables, recolor_borders};
use tablelabel::error::Error;
use tablelabel::ingest::{DocxPackage, SourceKind};
use tablelabel::latex::locate_tabular_envs;
use tablelabel::render::{pair_pages, rasterize, render_to_pdf, PageImage, RenderInput};
use tablelabel_fixtures::corpus::*;
use tablelabel_fixtures::layout::RectPt;

fn kind(k: FixtureKind) -> SourceKind {
    match k {
        FixtureKind::Word => SourceKind::Word,
        FixtureKind::Latex => SourceKind::Latex,
    }
}

fn render(bytes: &[u8], k: SourceKind, cfg: &Config) -> tablelabel::error::Result<Vec<PageImage>> {
    let out = render_to_pdf(
        &RenderInput {
            bytes,
            kind: k,
            stem: "fixture",
            resource_dir: None,
        },
        &cfg.render,
    )?;
    rasterize(&out.pdf, &cfg.render)
}

fn dims(pages: &[PageImage]) -> Vec<(u32, u32)> {
    pages.iter().map(|p| (p.width_px, p.height_px)).collect()
}

fn borderless_doc() -> FixtureDoc {
    let mut t = empty_cell_table();
    t.borders = false;
    FixtureDoc {
        id: "plain".into(),
        kind: FixtureKind::Word,
        blocks: vec![FixtureBlock::Paragraph(vec!["Intro".into()]), FixtureBlock::Table(t)],
    }
}

#[test]
fn a4_page_at_150_dpi() {
    let cfg = fixture_config(150);
    let pages = render(&borderless_doc().bytes(), SourceKind::Word, &cfg).unwrap();
    assert_eq!(pages.len(), 1);
    let (w, h) = (8.27f64 * 150.0, 11.69f64 * 150.0);
    assert!((pages[0].width_px as f64 - w).abs() <= 1.5, "{}", pages[0].width_px);
    assert!((pages[0].height_px as f64 - h).abs() <= 1.5, "{}", pages[0].height_px);
}

#[test]
fn rendering_twice_gives_same_rasters() {
    let cfg = fixture_config(150);
    for d in generate_corpus(6, 3) {
        let a = render(&d.bytes(), kind(d.kind), &cfg).unwrap();
        let b = render(&d.bytes(), kind(d.kind), &cfg).unwrap();
        assert_eq!(dims(&a), dims(&b));
    }
}

#[test]
fn repacked_docx_renders_same_page_count() {
    let cfg = fixture_config(72);
    let d = generate_corpus(2, 11).remove(1);
    let original = d.bytes();
    let repacked = DocxPackage::from_bytes(&original).unwrap().repack().unwrap();
    let a = render(&original, SourceKind::Word, &cfg).unwrap();
    let b = render(&repacked, SourceKind::Word, &cfg).unwrap();
    assert!(a.len() > 1);
    assert_eq!(a.len(), b.len());
}

#[test]
fn borderless_table_gets_exact_sentinel_pixels() {
    let cfg = fixture_config(150);
    let pkg = DocxPackage::from_bytes(&borderless_doc().bytes()).unwrap();
    let spans = locate_tables(&pkg).unwrap();
    let green = recolor_borders(&pkg, &spans, &SentinelColor::green(), 8).unwrap();
    let respans = locate_tables(&green).unwrap();
    assert_eq!(respans.len(), spans.len());
    let white = recolor_borders(&green, &respans, &SentinelColor::white(), 8).unwrap();
    let g = render(&green.repack().unwrap(), SourceKind::Word, &cfg).unwrap();
    let w = render(&white.repack().unwrap(), SourceKind::Word, &cfg).unwrap();
    let exact = g[0].pixels.chunks_exact(3).filter(|p| p == &[0, 255, 0]).count();
    assert!(exact > 100, "{exact}");
    assert_eq!(dims(&g), dims(&w));
    assert_eq!(w[0].pixels.chunks_exact(3).filter(|p| p == &[0, 255, 0]).count(), 0);
}

/// Pixels within `slack` of the frame ring `[outer, outer - thickness]`.
fn in_ring(x: u32, y: u32, outer: [u32; 4], thickness: f64, slack: f64) -> bool {
    let (x, y) = (x as f64 + 0.5, y as f64 + 0.5);
    let o = RectPt::new(outer[0] as f64, outer[1] as f64, outer[2] as f64, outer[3] as f64);
    let big = o.inflate(slack);
    let small = o.inflate(-(thickness + slack));
    let inside = |r: RectPt| x >= r.x && x <= r.x + r.w && y >= r.y && y <= r.y + r.h;
    inside(big) && !inside(small)
}

#[test]
fn variant_differences_lie_on_frames() {
    let cfg = fixture_config(150);
    let frame = frame_params(&cfg);
    let s = cfg.render.dpi as f64 / 72.0;
    for d in generate_corpus(10, 21) {
        let src = annotate_document(kind(d.kind), &d.bytes(), &cfg.annotate).unwrap();
        let a = render(&src.annotated, src.kind, &cfg).unwrap();
        let c = render(&src.control, src.kind, &cfg).unwrap();
        assert_eq!(dims(&a), dims(&c), "{}", d.id);
        let expected = expected_layout(&d, frame, cfg.render.dpi);
        assert_eq!(a.len(), expected.pages, "{}", d.id);
        let thickness = match d.kind {
            FixtureKind::Word => frame.word_border_pt * s,
            FixtureKind::Latex => frame.latex_rule_pt * s,
        };
        let mut differing = 0;
        for (p, (pa, pc)) in a.iter().zip(&c).enumerate() {
            let frames: Vec<[u32; 4]> = expected.tables.iter().filter(|t| t.page == p).map(|t| t.bbox_px).collect();
            for y in 0..pa.height_px {
                for x in 0..pa.width_px {
                    if pa.pixel(x, y) != pc.pixel(x, y) {
                        differing += 1;
                        assert!(
                            frames.iter().any(|f| in_ring(x, y, *f, thickness, 2.0)),
                            "{} page {p}: stray difference at ({x}, {y})",
                            d.id
                        );
                    }
                }
            }
        }
        assert!(differing > 0, "{}", d.id);
    }
}

#[test]
fn wrapping_preserves_compilability_and_layout() {
    let cfg = fixture_config(100);
    for d in generate_corpus(15, 4).into_iter().filter(|d| d.kind == FixtureKind::Latex) {
        let tex = to_tex(&d);
        assert!(!locate_tabular_envs(&tex).unwrap().is_empty());
        let plain = render(tex.as_bytes(), SourceKind::Latex, &cfg).unwrap();
        let src = annotate_document(SourceKind::Latex, tex.as_bytes(), &cfg.annotate).unwrap();
        let a = render(&src.annotated, SourceKind::Latex, &cfg).unwrap();
        let c = render(&src.control, SourceKind::Latex, &cfg).unwrap();
        assert_eq!(plain.len(), a.len());
        assert_eq!(dims(&a), dims(&c));
        assert_eq!(pair_pages(a, c, &d.id).unwrap().len(), plain.len());
    }
}

#[test]
fn broken_latex_is_a_render_failure_with_stderr() {
    let cfg = fixture_config(72);
    match render(failing_tex().as_bytes(), SourceKind::Latex, &cfg) {
        Err(Error::RenderFailed(msg)) => assert!(msg.contains("No pages of output") || msg.contains("exited")),
        other => panic!("expected RenderFailed, got {other:?}"),
    }
    let out = render_to_pdf(
        &RenderInput {
            bytes: b"\\documentclass{article}\\begin{document}x\\end{document}",
            kind: SourceKind::Latex,
            stem: "ok",
            resource_dir: None,
        },
        &cfg.render,
    )
    .unwrap();
    assert!(out.pdf.starts_with(b"%PDF"));
    assert_eq!(out.run.status, Some(0));
}
