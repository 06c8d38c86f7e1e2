//! LaTeX front end for the fixture typesetter: a small, strict subset.
//! Unknown control sequences and environments are errors, as in a real
//! compile with `-halt-on-error`.

use std::collections::HashMap;

use crate::layout::*;
use crate::pdf::Op;
use crate::typeset::{glyph_ops, Block, TableBox};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Cmd(String),
    Open,
    Close,
    LBrack,
    RBrack,
    Amp,
    Math,
    Text(String),
    Space,
    Par,
    /// `\\`
    Newline,
}

type T = (Tok, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct TexError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for TexError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "l.{}: {}", self.line, self.message)
    }
}

type Result<V> = std::result::Result<V, TexError>;

fn err<V>(line: usize, message: impl Into<String>) -> Result<V> {
    Err(TexError {
        line,
        message: message.into(),
    })
}

pub fn tokenize(src: &str) -> Vec<T> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut Vec<T>, line: usize| {
        if !word.is_empty() {
            out.push((Tok::Text(std::mem::take(word)), line));
        }
    };
    while i < chars.len() {
        let c = chars[i];
        match c {
            '%' => {
                flush(&mut word, &mut out, line);
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                i += 1;
                line += 1;
                // a comment swallows the newline and the next line's indent
                while i < chars.len() && (chars[i] == ' ' || chars[i] == '\t') {
                    i += 1;
                }
                continue;
            }
            '\\' => {
                flush(&mut word, &mut out, line);
                let next = chars.get(i + 1).copied();
                match next {
                    Some(n) if n.is_ascii_alphabetic() => {
                        let mut j = i + 1;
                        while j < chars.len() && chars[j].is_ascii_alphabetic() {
                            j += 1;
                        }
                        if chars.get(j) == Some(&'*') {
                            j += 1;
                        }
                        out.push((Tok::Cmd(chars[i + 1..j].iter().collect()), line));
                        i = j;
                        while i < chars.len() && (chars[i] == ' ' || chars[i] == '\t') {
                            i += 1;
                        }
                        continue;
                    }
                    Some('\\') => {
                        out.push((Tok::Newline, line));
                        i += 2;
                        continue;
                    }
                    Some(',') | Some(' ') => {
                        out.push((Tok::Space, line));
                        i += 2;
                        continue;
                    }
                    Some(n) => {
                        word.push(n);
                        i += 2;
                        continue;
                    }
                    None => {
                        i += 1;
                        continue;
                    }
                }
            }
            '{' | '}' | '[' | ']' | '&' | '$' | '~' => {
                flush(&mut word, &mut out, line);
                let t = match c {
                    '{' => Tok::Open,
                    '}' => Tok::Close,
                    '[' => Tok::LBrack,
                    ']' => Tok::RBrack,
                    '&' => Tok::Amp,
                    '$' => Tok::Math,
                    _ => Tok::Space,
                };
                out.push((t, line));
            }
            c if c.is_whitespace() => {
                flush(&mut word, &mut out, line);
                let mut newlines = 0;
                while i < chars.len() && chars[i].is_whitespace() {
                    if chars[i] == '\n' {
                        newlines += 1;
                        line += 1;
                    }
                    i += 1;
                }
                out.push((if newlines >= 2 { Tok::Par } else { Tok::Space }, line));
                continue;
            }
            c => word.push(c),
        }
        i += 1;
    }
    flush(&mut word, &mut out, line);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColSpec {
    L,
    C,
    R,
    P(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TexCell {
    pub words: Vec<String>,
    pub span: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TexRow {
    pub cells: Vec<TexCell>,
    pub hlines_above: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tabular {
    pub cols: Vec<ColSpec>,
    /// Vertical rules at each of the `cols.len() + 1` boundaries.
    pub vrules: Vec<usize>,
    pub rows: Vec<TexRow>,
    pub hlines_below: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub rgb: [u8; 3],
    pub sep: f64,
    pub rule: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Word(String),
    Par,
    Section(Vec<String>),
    Tabular {
        tab: Tabular,
        frame: Option<Frame>,
        centered: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TexDocument {
    pub items: Vec<Item>,
}

fn text_of(toks: &[T]) -> String {
    let mut s = String::new();
    for (t, _) in toks {
        match t {
            Tok::Text(w) => s.push_str(w),
            Tok::Space => s.push(' '),
            Tok::Cmd(c) => {
                s.push('\\');
                s.push_str(c);
            }
            _ => {}
        }
    }
    s.trim().to_string()
}

fn skip_space(toks: &[T], i: &mut usize) {
    while *i < toks.len() && toks[*i].0 == Tok::Space {
        *i += 1;
    }
}

fn line_at(toks: &[T], i: usize) -> usize {
    toks.get(i).or(toks.last()).map_or(0, |t| t.1)
}

fn matching_close(toks: &[T], open: usize) -> Result<usize> {
    let mut depth = 0usize;
    for (j, (t, _)) in toks.iter().enumerate().skip(open) {
        match t {
            Tok::Open => depth += 1,
            Tok::Close => {
                depth -= 1;
                if depth == 0 {
                    return Ok(j);
                }
            }
            _ => {}
        }
    }
    err(line_at(toks, open), "Runaway argument? File ended while scanning use of a group")
}

fn arg<'a>(toks: &'a [T], i: &mut usize) -> Result<&'a [T]> {
    skip_space(toks, i);
    match toks.get(*i) {
        Some((Tok::Open, _)) => {
            let close = matching_close(toks, *i)?;
            let inner = &toks[*i + 1..close];
            *i = close + 1;
            Ok(inner)
        }
        Some((Tok::Cmd(_), _)) => {
            *i += 1;
            Ok(&toks[*i - 1..*i])
        }
        _ => err(line_at(toks, *i), "Missing { inserted"),
    }
}

fn opt_arg<'a>(toks: &'a [T], i: &mut usize) -> Option<&'a [T]> {
    let mut j = *i;
    skip_space(toks, &mut j);
    if toks.get(j).map(|t| &t.0) != Some(&Tok::LBrack) {
        return None;
    }
    let close = toks[j..].iter().position(|t| t.0 == Tok::RBrack)? + j;
    *i = close + 1;
    Some(&toks[j + 1..close])
}

/// Index of the `\end` that closes an environment whose body starts at `i`.
fn find_end(toks: &[T], start: usize, env: &str) -> Result<(usize, usize)> {
    let mut nest = 0usize;
    let mut j = start;
    while j < toks.len() {
        if let Tok::Cmd(c) = &toks[j].0 {
            if c == "begin" || c == "end" {
                let mut k = j + 1;
                let name = text_of(arg(toks, &mut k)?);
                if name == env {
                    if c == "begin" {
                        nest += 1;
                    } else if nest == 0 {
                        return Ok((j, k));
                    } else {
                        nest -= 1;
                    }
                }
                j = k;
                continue;
            }
        }
        j += 1;
    }
    err(
        line_at(toks, start),
        format!("\\begin{{{env}}} ended by end of file"),
    )
}

pub fn parse_dimension(s: &str) -> Option<f64> {
    let s = s.trim();
    let split = s.find(|c: char| c.is_ascii_alphabetic())?;
    let v: f64 = s[..split].trim().parse().ok()?;
    let f = match &s[split..] {
        "pt" => 1.0,
        "bp" => 72.27 / 72.0,
        "mm" => 72.27 / 25.4,
        "cm" => 72.27 / 2.54,
        "in" => 72.27,
        _ => return None,
    };
    Some(v * f)
}

fn parse_color(model: &str, spec: &str) -> Option<[u8; 3]> {
    let nums = || -> Option<Vec<f64>> { spec.split(',').map(|x| x.trim().parse().ok()).collect() };
    match model {
        "RGB" => {
            let v = nums()?;
            (v.len() == 3 && v.iter().all(|x| (0.0..=255.0).contains(x)))
                .then(|| [v[0] as u8, v[1] as u8, v[2] as u8])
        }
        "rgb" => {
            let v = nums()?;
            (v.len() == 3).then(|| {
                let c = |x: f64| (x.clamp(0.0, 1.0) * 255.0).round() as u8;
                [c(v[0]), c(v[1]), c(v[2])]
            })
        }
        "gray" => {
            let v = nums()?;
            let g = (v.first()?.clamp(0.0, 1.0) * 255.0).round() as u8;
            Some([g, g, g])
        }
        "HTML" => {
            let v = u32::from_str_radix(spec.trim(), 16).ok()?;
            Some([(v >> 16) as u8, (v >> 8) as u8, v as u8])
        }
        _ => None,
    }
}

struct Parser {
    colors: HashMap<String, [u8; 3]>,
    fboxsep: f64,
    fboxrule: f64,
    centered: bool,
}

impl Parser {
    fn new() -> Self {
        let colors = [
            ("black", [0, 0, 0]),
            ("white", [255, 255, 255]),
            ("red", [255, 0, 0]),
            ("green", [0, 255, 0]),
            ("blue", [0, 0, 255]),
            ("gray", [128, 128, 128]),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Parser {
            colors,
            fboxsep: 3.0,
            fboxrule: 0.4,
            centered: false,
        }
    }

    fn definecolor(&mut self, toks: &[T], i: &mut usize, line: usize) -> Result<()> {
        let name = text_of(arg(toks, i)?);
        let model = text_of(arg(toks, i)?);
        let spec = text_of(arg(toks, i)?);
        match parse_color(&model, &spec) {
            Some(rgb) => {
                self.colors.insert(name, rgb);
                Ok(())
            }
            None => err(line, format!("Package xcolor Error: bad color specification {model}{{{spec}}}")),
        }
    }

    fn setlength(&mut self, toks: &[T], i: &mut usize, line: usize) -> Result<()> {
        let name = text_of(arg(toks, i)?);
        let value = text_of(arg(toks, i)?);
        let v = parse_dimension(&value)
            .ok_or_else(|| TexError {
                line,
                message: format!("Illegal unit of measure in {value}"),
            })?;
        match name.as_str() {
            "\\fboxsep" => self.fboxsep = v,
            "\\fboxrule" => self.fboxrule = v,
            "\\tabcolsep" | "\\parindent" | "\\parskip" | "\\arrayrulewidth" => {}
            other => return err(line, format!("Undefined control sequence {other}")),
        }
        Ok(())
    }

    fn preamble(&mut self, toks: &[T]) -> Result<usize> {
        let mut i = 0;
        let mut seen_class = false;
        while i < toks.len() {
            let (t, line) = &toks[i];
            let line = *line;
            i += 1;
            match t {
                Tok::Space | Tok::Par => {}
                Tok::Cmd(c) => match c.as_str() {
                    "documentclass" => {
                        opt_arg(toks, &mut i);
                        arg(toks, &mut i)?;
                        seen_class = true;
                    }
                    _ if !seen_class => return err(line, "LaTeX Error: Missing \\begin{document}. (no \\documentclass)"),
                    "usepackage" => {
                        opt_arg(toks, &mut i);
                        arg(toks, &mut i)?;
                    }
                    "definecolor" => self.definecolor(toks, &mut i, line)?,
                    "setlength" => self.setlength(toks, &mut i, line)?,
                    "title" | "author" | "date" | "pagestyle" => {
                        arg(toks, &mut i)?;
                    }
                    "begin" => {
                        let env = text_of(arg(toks, &mut i)?);
                        if env == "document" {
                            return Ok(i);
                        }
                        return err(line, "LaTeX Error: Missing \\begin{document}.");
                    }
                    other => return err(line, format!("Undefined control sequence \\{other}")),
                },
                _ => return err(line, "LaTeX Error: Missing \\begin{document}."),
            }
        }
        err(line_at(toks, i), "LaTeX Error: Missing \\begin{document}.")
    }

    fn body(&mut self, toks: &[T]) -> Result<Vec<Item>> {
        let mut items = Vec::new();
        let mut i = 0;
        while i < toks.len() {
            let (t, line) = &toks[i];
            let line = *line;
            i += 1;
            match t {
                Tok::Text(w) => items.push(Item::Word(w.clone())),
                Tok::LBrack => items.push(Item::Word("[".into())),
                Tok::RBrack => items.push(Item::Word("]".into())),
                Tok::Space | Tok::Math => {}
                Tok::Par | Tok::Newline => items.push(Item::Par),
                Tok::Amp => return err(line, "Misplaced alignment tab character &"),
                Tok::Close => return err(line, "Too many }'s"),
                Tok::Open => {
                    let close = matching_close(toks, i - 1)?;
                    let saved = (self.fboxsep, self.fboxrule, self.centered);
                    let inner = self.body(&toks[i..close])?;
                    (self.fboxsep, self.fboxrule, self.centered) = saved;
                    items.extend(inner);
                    i = close + 1;
                }
                Tok::Cmd(c) => match c.as_str() {
                    "begin" => {
                        let env = text_of(arg(toks, &mut i)?);
                        match env.as_str() {
                            "tabular" | "array" => {
                                opt_arg(toks, &mut i);
                                let spec = arg(toks, &mut i)?;
                                let (end, after) = find_end(toks, i, &env)?;
                                let tab = self.tabular(spec, &toks[i..end], line)?;
                                items.push(Item::Tabular {
                                    tab,
                                    frame: None,
                                    centered: self.centered,
                                });
                                i = after;
                            }
                            "table" | "table*" | "figure" | "figure*" | "center" => {
                                opt_arg(toks, &mut i);
                                let (end, after) = find_end(toks, i, &env)?;
                                let saved = (self.fboxsep, self.fboxrule, self.centered);
                                if env == "center" {
                                    self.centered = true;
                                }
                                let inner = self.body(&toks[i..end])?;
                                (self.fboxsep, self.fboxrule, self.centered) = saved;
                                items.push(Item::Par);
                                items.extend(inner);
                                items.push(Item::Par);
                                i = after;
                            }
                            other => return err(line, format!("LaTeX Error: Environment {other} undefined.")),
                        }
                    }
                    "end" => {
                        let env = text_of(arg(toks, &mut i)?);
                        return err(line, format!("LaTeX Error: \\begin{{...}} ended by \\end{{{env}}}."));
                    }
                    "section" | "subsection" | "subsubsection" | "section*" | "subsection*" | "paragraph" => {
                        let words = words_of(&self.body(arg(toks, &mut i)?)?);
                        items.push(Item::Section(words));
                    }
                    "textbf" | "textit" | "emph" | "texttt" | "textrm" | "underline" | "mbox" => {
                        let inner = self.body(arg(toks, &mut i)?)?;
                        items.extend(inner);
                    }
                    "caption" => {
                        opt_arg(toks, &mut i);
                        let inner = self.body(arg(toks, &mut i)?)?;
                        items.push(Item::Par);
                        items.extend(inner);
                        items.push(Item::Par);
                    }
                    "label" | "vspace" | "hspace" | "vspace*" | "hspace*" => {
                        arg(toks, &mut i)?;
                    }
                    "ref" | "cite" | "eqref" => {
                        arg(toks, &mut i)?;
                        items.push(Item::Word("??".into()));
                    }
                    "centering" => self.centered = true,
                    "par" | "newpage" | "clearpage" => items.push(Item::Par),
                    "noindent" | "maketitle" | "small" | "footnotesize" | "normalsize" | "large"
                    | "Large" | "hfill" | "smallskip" | "medskip" | "bigskip" | "quad" => {}
                    "definecolor" => self.definecolor(toks, &mut i, line)?,
                    "setlength" => self.setlength(toks, &mut i, line)?,
                    "fcolorbox" => {
                        let frame_name = text_of(arg(toks, &mut i)?);
                        let _bg = text_of(arg(toks, &mut i)?);
                        let content = arg(toks, &mut i)?;
                        let rgb = *self.colors.get(&frame_name).ok_or_else(|| TexError {
                            line,
                            message: format!("Package xcolor Error: Undefined color `{frame_name}'."),
                        })?;
                        let frame = Frame {
                            rgb,
                            sep: self.fboxsep,
                            rule: self.fboxrule,
                        };
                        let inner = self.body(content)?;
                        let tabulars = inner.iter().filter(|it| matches!(it, Item::Tabular { .. })).count();
                        if tabulars == 1 && inner.iter().all(|it| matches!(it, Item::Tabular { .. })) {
                            let Some(Item::Tabular { tab, .. }) = inner.into_iter().next() else {
                                unreachable!()
                            };
                            items.push(Item::Tabular {
                                tab,
                                frame: Some(frame),
                                centered: self.centered,
                            });
                        } else {
                            items.extend(inner);
                        }
                    }
                    "hline" | "cline" => return err(line, format!("Misplaced \\{c}")),
                    "documentclass" | "usepackage" => {
                        return err(line, "LaTeX Error: Can be used only in preamble.")
                    }
                    other => return err(line, format!("Undefined control sequence \\{other}")),
                },
            }
        }
        Ok(items)
    }

    fn colspec(&self, spec: &[T], line: usize) -> Result<(Vec<ColSpec>, Vec<usize>)> {
        let mut cols = Vec::new();
        let mut vrules = vec![0usize];
        let mut i = 0;
        while i < spec.len() {
            match &spec[i].0 {
                Tok::Space => i += 1,
                Tok::Text(s) => {
                    let mut chars = s.chars().peekable();
                    i += 1;
                    while let Some(ch) = chars.next() {
                        match ch {
                            'l' => cols.push(ColSpec::L),
                            'c' => cols.push(ColSpec::C),
                            'r' => cols.push(ColSpec::R),
                            '|' => *vrules.last_mut().unwrap() += 1,
                            'p' | '@' if chars.peek().is_none() => {
                                let a = text_of(arg(spec, &mut i)?);
                                if ch == 'p' {
                                    let w = parse_dimension(&a).ok_or_else(|| TexError {
                                        line,
                                        message: format!("Illegal unit of measure in p{{{a}}}"),
                                    })?;
                                    cols.push(ColSpec::P(w));
                                } else {
                                    continue;
                                }
                            }
                            _ => return err(line, format!("LaTeX Error: Illegal character in array arg ({ch}).")),
                        }
                        if matches!(ch, 'l' | 'c' | 'r' | 'p') {
                            vrules.push(0);
                        }
                    }
                }
                _ => return err(line, "LaTeX Error: Illegal character in array arg."),
            }
        }
        if cols.is_empty() {
            return err(line, "LaTeX Error: Illegal character in array arg (empty preamble).");
        }
        Ok((cols, vrules))
    }

    fn tabular(&mut self, spec: &[T], body: &[T], line: usize) -> Result<Tabular> {
        let (cols, vrules) = self.colspec(spec, line)?;
        // split into row segments at depth-0 \\ and cells at depth-0 &
        let mut segments: Vec<Vec<&[T]>> = Vec::new();
        let mut cells: Vec<&[T]> = Vec::new();
        let mut depth = 0usize;
        let mut env_depth = 0usize;
        let mut start = 0;
        for (j, (t, _)) in body.iter().enumerate() {
            match t {
                Tok::Open => depth += 1,
                Tok::Close => depth = depth.saturating_sub(1),
                Tok::Cmd(c) if c == "begin" => env_depth += 1,
                Tok::Cmd(c) if c == "end" => env_depth = env_depth.saturating_sub(1),
                Tok::Amp if depth == 0 && env_depth == 0 => {
                    cells.push(&body[start..j]);
                    start = j + 1;
                }
                Tok::Newline if depth == 0 && env_depth == 0 => {
                    cells.push(&body[start..j]);
                    segments.push(std::mem::take(&mut cells));
                    start = j + 1;
                }
                _ => {}
            }
        }
        cells.push(&body[start..]);
        segments.push(cells);

        let mut rows = Vec::new();
        let mut pending_hlines = 0;
        let last = segments.len() - 1;
        for (s, seg) in segments.into_iter().enumerate() {
            let mut parsed = Vec::new();
            for (k, cell) in seg.iter().enumerate() {
                let mut i = 0;
                // rules lead the first cell of a row
                if k == 0 {
                    loop {
                        skip_space(cell, &mut i);
                        match cell.get(i).map(|t| &t.0) {
                            Some(Tok::Cmd(c)) if c == "hline" => {
                                pending_hlines += 1;
                                i += 1;
                            }
                            Some(Tok::Cmd(c)) if c == "cline" => {
                                i += 1;
                                arg(cell, &mut i)?;
                            }
                            _ => break,
                        }
                    }
                }
                let rest = &cell[i..];
                let mut j = 0;
                skip_space(rest, &mut j);
                let (span, content) = match rest.get(j).map(|t| &t.0) {
                    Some(Tok::Cmd(c)) if c == "multicolumn" => {
                        j += 1;
                        let n = text_of(arg(rest, &mut j)?);
                        let n: usize = n.parse().map_err(|_| TexError {
                            line,
                            message: format!("Missing number, treated as zero ({n})"),
                        })?;
                        arg(rest, &mut j)?;
                        let content = arg(rest, &mut j)?;
                        (n.max(1), content)
                    }
                    _ => (1, rest),
                };
                let words = words_of(&self.body(content)?);
                parsed.push(TexCell { words, span });
            }
            let is_blank = parsed.len() == 1 && parsed[0].words.is_empty() && parsed[0].span == 1;
            if s == last && is_blank {
                break;
            }
            let used: usize = parsed.iter().map(|c| c.span).sum();
            if used > cols.len() {
                return err(line, "Extra alignment tab has been changed to \\cr");
            }
            rows.push(TexRow {
                cells: parsed,
                hlines_above: std::mem::take(&mut pending_hlines),
            });
        }
        Ok(Tabular {
            cols,
            vrules,
            rows,
            hlines_below: pending_hlines,
        })
    }
}

fn words_of(items: &[Item]) -> Vec<String> {
    let mut out = Vec::new();
    for it in items {
        match it {
            Item::Word(w) => out.push(w.clone()),
            Item::Section(ws) => out.extend(ws.iter().cloned()),
            Item::Tabular { tab, .. } => {
                for r in &tab.rows {
                    for c in &r.cells {
                        out.extend(c.words.iter().cloned());
                    }
                }
            }
            Item::Par => {}
        }
    }
    out
}

pub fn parse_tex(src: &str) -> Result<TexDocument> {
    let toks = tokenize(src);
    let mut p = Parser::new();
    let start = p.preamble(&toks)?;
    let (end, _) = find_end(&toks, start, "document")?;
    let items = p.body(&toks[start..end])?;
    Ok(TexDocument { items })
}

impl Tabular {
    pub fn col_widths(&self) -> Vec<f64> {
        let mut w: Vec<f64> = self
            .cols
            .iter()
            .map(|c| if let ColSpec::P(x) = c { *x } else { 0.0 })
            .collect();
        for r in &self.rows {
            let mut col = 0;
            for c in &r.cells {
                if c.span == 1 && !matches!(self.cols[col], ColSpec::P(_)) {
                    w[col] = w[col].max(line_width(&c.words));
                }
                col += c.span;
            }
        }
        w
    }

    pub fn size(&self) -> (f64, f64) {
        let w: f64 = self.col_widths().iter().map(|w| w + 2.0 * CELL_PAD).sum();
        (w, self.rows.len() as f64 * ROW_H)
    }

    pub fn ops(&self) -> Vec<Op> {
        let widths = self.col_widths();
        let mut xs = vec![0.0];
        for w in &widths {
            xs.push(xs.last().unwrap() + w + 2.0 * CELL_PAD);
        }
        let (width, height) = self.size();
        let black = [0, 0, 0];
        let mut ops = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            let top = r as f64 * ROW_H;
            let mut col = 0;
            for c in &row.cells {
                let end = (col + c.span).min(widths.len());
                let (x0, x1) = (xs[col] + CELL_PAD, xs[end] - CELL_PAD);
                let ws = fit_line(&c.words, (x1 - x0).max(0.0));
                let lw = line_width(&ws);
                let x = match (c.span, self.cols[col]) {
                    (1, ColSpec::C) => x0 + (x1 - x0 - lw) / 2.0,
                    (1, ColSpec::R) => x1 - lw,
                    _ => x0,
                };
                ops.extend(glyph_ops(&ws, x, top + 2.0, TEXT_RGB));
                col = end;
            }
            if row.hlines_above > 0 {
                ops.push(Op::Fill {
                    rect: RectPt::new(0.0, top - RULE_W / 2.0, width, RULE_W),
                    rgb: black,
                });
            }
        }
        if self.hlines_below > 0 {
            ops.push(Op::Fill {
                rect: RectPt::new(0.0, height - RULE_W / 2.0, width, RULE_W),
                rgb: black,
            });
        }
        for (b, &n) in self.vrules.iter().enumerate() {
            if n > 0 {
                ops.push(Op::Fill {
                    rect: RectPt::new(xs[b] - RULE_W / 2.0, 0.0, RULE_W, height),
                    rgb: black,
                });
            }
        }
        ops
    }
}

/// The tabular box, framed when wrapped in `\fcolorbox`.
pub fn tabular_box(tab: &Tabular, frame: Option<Frame>, centered: bool) -> TableBox {
    let (w, h) = tab.size();
    let Some(f) = frame else {
        return TableBox {
            width: w,
            height: h,
            centered,
            ops: tab.ops(),
        };
    };
    let d = f.sep + f.rule;
    let (ow, oh) = (w + 2.0 * d, h + 2.0 * d);
    let mut ops = vec![Op::Fill {
        rect: RectPt::new(f.rule, f.rule, w + 2.0 * f.sep, h + 2.0 * f.sep),
        rgb: [255, 255, 255],
    }];
    ops.extend([
        RectPt::new(0.0, 0.0, ow, f.rule),
        RectPt::new(0.0, oh - f.rule, ow, f.rule),
        RectPt::new(0.0, f.rule, f.rule, oh - 2.0 * f.rule),
        RectPt::new(ow - f.rule, f.rule, f.rule, oh - 2.0 * f.rule),
    ]
    .into_iter()
    .map(|rect| Op::Fill { rect, rgb: f.rgb }));
    for op in tab.ops() {
        ops.push(match op {
            Op::Fill { rect, rgb } => Op::Fill {
                rect: rect.translate(d, d),
                rgb,
            },
            Op::Stroke { rect, width, rgb } => Op::Stroke {
                rect: rect.translate(d, d),
                width,
                rgb,
            },
        });
    }
    TableBox {
        width: ow,
        height: oh,
        centered,
        ops,
    }
}

pub fn tex_blocks(src: &str) -> Result<Vec<Block>> {
    let doc = parse_tex(src)?;
    let mut blocks = Vec::new();
    let mut words: Vec<String> = Vec::new();
    let flush = |words: &mut Vec<String>, blocks: &mut Vec<Block>| {
        if !words.is_empty() {
            blocks.push(Block::Paragraph(std::mem::take(words)));
        }
    };
    for it in doc.items {
        match it {
            Item::Word(w) => words.push(w),
            Item::Par => flush(&mut words, &mut blocks),
            Item::Section(ws) => {
                flush(&mut words, &mut blocks);
                blocks.push(Block::Section(ws));
            }
            Item::Tabular { tab, frame, centered } => {
                flush(&mut words, &mut blocks);
                blocks.push(Block::Table(tabular_box(&tab, frame, centered)));
            }
        }
    }
    flush(&mut words, &mut blocks);
    Ok(blocks)
}

/// LaTeXML-style XML for every top-level tabular.
pub fn tex_to_xml(src: &str) -> Result<String> {
    let doc = parse_tex(src)?;
    let esc = |s: &str| s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
    let mut out = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<document xmlns=\"http://dlmf.nist.gov/LaTeXML\">\n",
    );
    let mut para = Vec::new();
    for it in &doc.items {
        match it {
            Item::Word(w) => para.push(esc(w)),
            Item::Par | Item::Section(_) | Item::Tabular { .. } if !para.is_empty() => {
                out.push_str(&format!("  <para><p>{}</p></para>\n", para.join(" ")));
                para.clear();
            }
            _ => {}
        }
        if let Item::Tabular { tab, .. } = it {
            out.push_str("  <table>\n    <tabular>\n      <tbody>\n");
            for r in &tab.rows {
                out.push_str("        <tr>");
                for c in &r.cells {
                    let span = if c.span > 1 {
                        format!(" colspan=\"{}\"", c.span)
                    } else {
                        String::new()
                    };
                    out.push_str(&format!("<td{span}>{}</td>", esc(&c.words.join(" "))));
                }
                out.push_str("</tr>\n");
            }
            out.push_str("      </tbody>\n    </tabular>\n  </table>\n");
        }
    }
    if !para.is_empty() {
        out.push_str(&format!("  <para><p>{}</p></para>\n", para.join(" ")));
    }
    out.push_str("</document>\n");
    Ok(out)
}
