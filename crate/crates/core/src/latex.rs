//! Tabular location and `\fcolorbox` framing in LaTeX sources.
//!
//! Recognition is token and brace aware, not a TeX interpreter: comments,
//! `\verb` and verbatim-like environments are skipped, and the environment
//! structure is only checked from `\begin{document}` on, since preamble
//! macro bodies routinely hold unbalanced `\begin`/`\end` pairs.

use serde::{Deserialize, Serialize};

use crate::config::AnnotateConfig;
use crate::error::{Error, Result};

const TABULAR_ENVS: &[&str] = &["tabular", "tabular*"];
const FLOAT_ENVS: &[&str] = &["table", "table*", "sidewaystable", "wraptable"];
/// Environments that cannot sit inside a single frame box.
const MULTIPAGE_ENVS: &[&str] = &["longtable", "longtable*", "supertabular", "xtabular"];
const VERBATIM_ENVS: &[&str] = &["verbatim", "verbatim*", "lstlisting", "minted", "comment"];

/// Marker line opening the injected color definitions.
pub const PREAMBLE_MARKER: &str = "%% tablelabel frame colors";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvSpan {
    pub byte_start: usize,
    pub byte_end: usize,
    /// `tabular`, `tabular*` or `array`.
    pub env: String,
    pub enclosing_env: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedEnv {
    pub byte_start: usize,
    pub env: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TabularScan {
    pub spans: Vec<EnvSpan>,
    pub skipped: Vec<SkippedEnv>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Begin { name: String, start: usize },
    End { name: String, end: usize },
    BeginDocument { start: usize },
}

/// Outermost tabular environments in source order.
pub fn locate_tabular_envs(tex: &str) -> Result<Vec<EnvSpan>> {
    Ok(scan_tabular_envs(tex)?.spans)
}

pub fn scan_tabular_envs(tex: &str) -> Result<TabularScan> {
    let tokens = tokenize(tex);
    let body_from = tokens
        .iter()
        .position(|t| matches!(t, Token::BeginDocument { .. }));
    // (name, start, index into `scan.spans` when this env opened a span)
    let mut stack: Vec<(String, usize, Option<usize>)> = Vec::new();
    let tokens: &[Token] = match body_from {
        Some(i) => {
            if let Token::BeginDocument { start } = tokens[i] {
                stack.push(("document".into(), start, None));
            }
            &tokens[i + 1..]
        }
        None => &tokens,
    };

    let mut scan = TabularScan::default();
    let mut open_span: Option<usize> = None;
    let mut in_multipage = 0usize;

    for tok in tokens {
        match tok {
            Token::BeginDocument { start } => {
                return Err(Error::UnbalancedEnvironment(format!(
                    "second \\begin{{document}} at byte {start}"
                )));
            }
            Token::Begin { name, start } => {
                let mut opened = None;
                if MULTIPAGE_ENVS.contains(&name.as_str()) {
                    if open_span.is_none() && in_multipage == 0 {
                        scan.skipped.push(SkippedEnv {
                            byte_start: *start,
                            env: name.clone(),
                            reason: "multi-page table cannot be framed".into(),
                        });
                    }
                    in_multipage += 1;
                } else if open_span.is_none() && in_multipage == 0 {
                    let enclosing = stack
                        .iter()
                        .rev()
                        .find(|(n, _, _)| FLOAT_ENVS.contains(&n.as_str()))
                        .map(|(n, _, _)| n.clone());
                    let recognized = TABULAR_ENVS.contains(&name.as_str())
                        || (name == "array" && enclosing.is_some());
                    if recognized {
                        opened = Some(scan.spans.len());
                        open_span = opened;
                        scan.spans.push(EnvSpan {
                            byte_start: *start,
                            byte_end: 0,
                            env: name.clone(),
                            enclosing_env: enclosing,
                        });
                    }
                }
                stack.push((name.clone(), *start, opened));
            }
            Token::End { name, end } => {
                let Some((open_name, open_start, opened)) = stack.pop() else {
                    return Err(Error::UnbalancedEnvironment(format!(
                        "\\end{{{name}}} at byte {end} without \\begin"
                    )));
                };
                if open_name != *name {
                    return Err(Error::UnbalancedEnvironment(format!(
                        "\\begin{{{open_name}}} at byte {open_start} closed by \\end{{{name}}}"
                    )));
                }
                if MULTIPAGE_ENVS.contains(&name.as_str()) {
                    in_multipage -= 1;
                }
                if let Some(idx) = opened {
                    scan.spans[idx].byte_end = *end;
                    open_span = None;
                }
                if name == "document" && stack.is_empty() {
                    // TeX ignores everything after the document ends
                    break;
                }
            }
        }
    }
    if let Some((n, start, _)) = stack.last() {
        return Err(Error::UnbalancedEnvironment(format!(
            "\\begin{{{n}}} at byte {start} never closed"
        )));
    }
    Ok(scan)
}

/// Lexes `\begin{..}` / `\end{..}` tokens outside comments and verbatim text.
fn tokenize(tex: &str) -> Vec<Token> {
    let b = tex.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut seen_document = false;
    while i < b.len() {
        match b[i] {
            b'%' => {
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
            }
            b'\\' => {
                let cs_start = i;
                i += 1;
                if i >= b.len() {
                    break;
                }
                if !b[i].is_ascii_alphabetic() {
                    // control symbol such as \% or \\
                    i += 1;
                    continue;
                }
                let name_start = i;
                while i < b.len() && b[i].is_ascii_alphabetic() {
                    i += 1;
                }
                let cs = &tex[name_start..i];
                match cs {
                    "verb" => {
                        if i < b.len() && b[i] == b'*' {
                            i += 1;
                        }
                        if i < b.len() {
                            let delim = b[i];
                            i += 1;
                            while i < b.len() && b[i] != delim && b[i] != b'\n' {
                                i += 1;
                            }
                            i += 1;
                        }
                    }
                    "begin" | "end" => {
                        let Some((name, after)) = braced_name(tex, i) else {
                            continue;
                        };
                        i = after;
                        if cs == "begin" {
                            if name == "document" && !seen_document {
                                seen_document = true;
                                out.push(Token::BeginDocument { start: cs_start });
                                continue;
                            }
                            if VERBATIM_ENVS.contains(&name.as_str()) {
                                let close = format!("\\end{{{name}}}");
                                match tex[i..].find(&close) {
                                    Some(off) => i += off + close.len(),
                                    None => i = b.len(),
                                }
                                continue;
                            }
                            out.push(Token::Begin {
                                name,
                                start: cs_start,
                            });
                        } else {
                            out.push(Token::End { name, end: i });
                        }
                    }
                    _ => {}
                }
            }
            _ => i += 1,
        }
    }
    out
}

/// Parses `{name}` (optional spaces before the brace) starting at `i`.
fn braced_name(tex: &str, mut i: usize) -> Option<(String, usize)> {
    let b = tex.as_bytes();
    while i < b.len() && (b[i] == b' ' || b[i] == b'\t') {
        i += 1;
    }
    if i >= b.len() || b[i] != b'{' {
        return None;
    }
    let close = tex[i + 1..].find('}')?;
    let name = tex[i + 1..i + 1 + close].trim().to_string();
    if name.is_empty() || name.contains(['{', '\\', '\n']) {
        return None;
    }
    Some((name, i + 1 + close + 1))
}

fn is_already_wrapped(tex: &str, cfg: &AnnotateConfig) -> bool {
    tex.contains(PREAMBLE_MARKER)
        || tex.contains(&format!("\\fcolorbox{{{}}}", cfg.annotated.name))
        || tex.contains(&format!("\\fcolorbox{{{}}}", cfg.control.name))
}

/// Position of the first uncommented `\begin{document}`, provided a
/// `\documentclass` precedes it.
fn preamble_injection_point(tex: &str) -> Option<usize> {
    let tokens = tokenize(tex);
    let start = tokens.iter().find_map(|t| match t {
        Token::BeginDocument { start } => Some(*start),
        _ => None,
    })?;
    let has_class = tex[..start]
        .lines()
        .map(|l| l.split('%').next().unwrap_or(""))
        .any(|l| l.contains("\\documentclass"));
    has_class.then_some(start)
}

/// Color definitions shared by both variants, so the two sources differ only
/// in the color name used by each frame.
pub fn preamble_snippet(cfg: &AnnotateConfig) -> String {
    let def = |c: &crate::config::SentinelColor| {
        format!(
            "\\definecolor{{{}}}{{RGB}}{{{},{},{}}}\n",
            c.name, c.rgb[0], c.rgb[1], c.rgb[2]
        )
    };
    format!(
        "{PREAMBLE_MARKER}\n\\usepackage{{xcolor}}\n{}{}",
        def(&cfg.annotated),
        def(&cfg.control)
    )
}

fn fmt_pt(v: f32) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    format!("{s}pt")
}

/// Wraps every span in a `\fcolorbox` of `color_name` and injects the color
/// definitions once before `\begin{document}`.
pub fn wrap_fcolorbox(
    tex: &str,
    spans: &[EnvSpan],
    color_name: &str,
    cfg: &AnnotateConfig,
) -> Result<String> {
    if is_already_wrapped(tex, cfg) {
        return Err(Error::AlreadyWrapped);
    }
    if spans.is_empty() {
        return Ok(tex.to_string());
    }
    let inject_at = preamble_injection_point(tex).ok_or(Error::MissingPreamble)?;

    let mut sorted: Vec<&EnvSpan> = spans.iter().collect();
    sorted.sort_by_key(|s| s.byte_start);
    for w in sorted.windows(2) {
        if w[1].byte_start < w[0].byte_end {
            return Err(Error::UnbalancedEnvironment("overlapping tabular spans".into()));
        }
    }
    for s in &sorted {
        let ok = s.byte_start > inject_at
            && s.byte_end <= tex.len()
            && tex[s.byte_start..].starts_with("\\begin")
            && tex[..s.byte_end].ends_with('}');
        if !ok {
            return Err(Error::UnbalancedEnvironment(format!(
                "span {}..{} does not delimit an environment",
                s.byte_start, s.byte_end
            )));
        }
    }

    let open = format!(
        "{{\\setlength{{\\fboxsep}}{{{}}}\\setlength{{\\fboxrule}}{{{}}}\\fcolorbox{{{color_name}}}{{white}}{{",
        fmt_pt(cfg.frame_sep_pt),
        fmt_pt(cfg.frame_rule_pt)
    );
    let mut out = String::with_capacity(tex.len() + 256 + spans.len() * open.len());
    out.push_str(&tex[..inject_at]);
    out.push_str(&preamble_snippet(cfg));
    let mut cursor = inject_at;
    for s in sorted {
        out.push_str(&tex[cursor..s.byte_start]);
        out.push_str(&open);
        // array needs math mode inside the LR box
        let math = s.env == "array";
        if math {
            out.push('$');
        }
        out.push_str(&tex[s.byte_start..s.byte_end]);
        if math {
            out.push('$');
        }
        out.push_str("}}");
        cursor = s.byte_end;
    }
    out.push_str(&tex[cursor..]);
    Ok(out)
}

pub fn make_annotated_latex(tex: &str, spans: &[EnvSpan], cfg: &AnnotateConfig) -> Result<String> {
    wrap_fcolorbox(tex, spans, &cfg.annotated.name, cfg)
}

/// The white-framed twin: identical text apart from the color name.
pub fn make_control_latex(tex: &str, spans: &[EnvSpan], cfg: &AnnotateConfig) -> Result<String> {
    wrap_fcolorbox(tex, spans, &cfg.control.name, cfg)
}
