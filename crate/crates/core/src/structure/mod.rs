//! Table structure as tag-token sequences, conversion from source markup,
//! and filling recognised structures with OCR text.

mod latexml;
mod rows;
mod word;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::StructureConfig;
use crate::error::{Error, Result};

pub use latexml::{latexml_tables, latexml_to_structure, latexml_to_tags};
pub use rows::{detect_row_groups, fill_cells, FilledCell, FilledTable, OcrBlock};
pub use word::{word_document_tables, word_xml_to_structure, word_xml_to_tags};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Tabular,
    TabularEnd,
    Thead,
    TheadEnd,
    Tbody,
    TbodyEnd,
    Tr,
    TrEnd,
    Td,
    TdEnd,
    CellY,
    CellN,
}

impl Tag {
    pub const ALL: [Tag; 12] = [
        Tag::Tabular,
        Tag::TabularEnd,
        Tag::Thead,
        Tag::TheadEnd,
        Tag::Tbody,
        Tag::TbodyEnd,
        Tag::Tr,
        Tag::TrEnd,
        Tag::Td,
        Tag::TdEnd,
        Tag::CellY,
        Tag::CellN,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Tabular => "<tabular>",
            Tag::TabularEnd => "</tabular>",
            Tag::Thead => "<thead>",
            Tag::TheadEnd => "</thead>",
            Tag::Tbody => "<tbody>",
            Tag::TbodyEnd => "</tbody>",
            Tag::Tr => "<tr>",
            Tag::TrEnd => "</tr>",
            Tag::Td => "<td>",
            Tag::TdEnd => "</td>",
            Tag::CellY => "<cell_y>",
            Tag::CellN => "<cell_n>",
        }
    }

    fn closer(self) -> Option<Tag> {
        match self {
            Tag::Tabular => Some(Tag::TabularEnd),
            Tag::Thead => Some(Tag::TheadEnd),
            Tag::Tbody => Some(Tag::TbodyEnd),
            Tag::Tr => Some(Tag::TrEnd),
            Tag::Td => Some(Tag::TdEnd),
            _ => None,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Tag> {
        Tag::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidTagSequence(format!("unknown token '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Y,
    N,
}

impl CellKind {
    pub fn tag(self) -> Tag {
        match self {
            CellKind::Y => Tag::CellY,
            CellKind::N => Tag::CellN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TagSequence {
    pub tokens: Vec<Tag>,
}

impl TagSequence {
    /// Canonical sequence for a grid of cells; `header_rows` leading rows go
    /// into `<thead>`.
    pub fn from_rows(rows: &[Vec<CellKind>], header_rows: usize) -> TagSequence {
        let header_rows = header_rows.min(rows.len());
        let mut tokens = vec![Tag::Tabular];
        let emit_rows = |tokens: &mut Vec<Tag>, rows: &[Vec<CellKind>]| {
            for row in rows {
                tokens.push(Tag::Tr);
                tokens.extend(row.iter().map(|k| k.tag()));
                tokens.push(Tag::TrEnd);
            }
        };
        if header_rows > 0 {
            tokens.push(Tag::Thead);
            emit_rows(&mut tokens, &rows[..header_rows]);
            tokens.push(Tag::TheadEnd);
        }
        tokens.push(Tag::Tbody);
        emit_rows(&mut tokens, &rows[header_rows..]);
        tokens.push(Tag::TbodyEnd);
        tokens.push(Tag::TabularEnd);
        TagSequence { tokens }
    }

    pub fn parse(s: &str) -> Result<TagSequence> {
        let seq = TagSequence::tokenize(s)?;
        seq.validate()?;
        Ok(seq)
    }

    /// Splits on whitespace and checks the vocabulary only; nesting is not
    /// validated, so model output of any shape can be scored.
    pub fn tokenize(s: &str) -> Result<TagSequence> {
        let tokens = s
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<Vec<Tag>>>()?;
        Ok(TagSequence { tokens })
    }

    /// Pushdown check of nesting, placement, and the single outer
    /// `<tabular>`.
    pub fn validate(&self) -> Result<()> {
        let bad = |i: usize, msg: &str| {
            Err(Error::InvalidTagSequence(format!("token {i}: {msg}")))
        };
        if self.tokens.first() != Some(&Tag::Tabular) {
            return bad(0, "must start with <tabular>");
        }
        let mut stack: Vec<Tag> = Vec::new();
        for (i, &t) in self.tokens.iter().enumerate() {
            if i > 0 && stack.is_empty() {
                return bad(i, "content after </tabular>");
            }
            let top = stack.last().copied();
            match t {
                Tag::Tabular if top.is_none() => stack.push(t),
                Tag::Thead | Tag::Tbody if top == Some(Tag::Tabular) => stack.push(t),
                Tag::Tr if matches!(top, Some(Tag::Tabular | Tag::Thead | Tag::Tbody)) => {
                    stack.push(t)
                }
                Tag::Td if top == Some(Tag::Tr) => stack.push(t),
                Tag::CellY | Tag::CellN if matches!(top, Some(Tag::Tr | Tag::Td)) => {}
                Tag::TabularEnd | Tag::TheadEnd | Tag::TbodyEnd | Tag::TrEnd | Tag::TdEnd => {
                    match top.and_then(Tag::closer) {
                        Some(c) if c == t => {
                            stack.pop();
                        }
                        _ => return bad(i, &format!("unexpected {t}")),
                    }
                }
                _ => return bad(i, &format!("{t} not allowed here")),
            }
        }
        if !stack.is_empty() {
            return bad(self.tokens.len(), "unclosed elements");
        }
        Ok(())
    }

    /// Cell kinds per `<tr>`, in order.
    pub fn rows(&self) -> Vec<Vec<CellKind>> {
        let mut rows = Vec::new();
        let mut current: Option<Vec<CellKind>> = None;
        for &t in &self.tokens {
            match t {
                Tag::Tr => current = Some(Vec::new()),
                Tag::TrEnd => rows.extend(current.take()),
                Tag::CellY => current.iter_mut().for_each(|r| r.push(CellKind::Y)),
                Tag::CellN => current.iter_mut().for_each(|r| r.push(CellKind::N)),
                _ => {}
            }
        }
        rows
    }

    pub fn row_count(&self) -> usize {
        self.tokens.iter().filter(|&&t| t == Tag::Tr).count()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn strings(&self) -> Vec<&'static str> {
        self.tokens.iter().map(|t| t.as_str()).collect()
    }
}

impl fmt::Display for TagSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(t.as_str())?;
        }
        Ok(())
    }
}

impl FromStr for TagSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<TagSequence> {
        TagSequence::parse(s)
    }
}

impl Serialize for TagSequence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TagSequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        TagSequence::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureFlags {
    /// Column or row spans were expanded into repeated cells.
    pub spans_expanded: bool,
    /// Short rows were padded with empty cells.
    pub ragged_padded: bool,
    pub header_rows: usize,
}

/// A converted table: the token sequence plus the grid it encodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureLabel {
    pub tags: TagSequence,
    pub rows: Vec<Vec<CellKind>>,
    pub flags: StructureFlags,
}

impl StructureLabel {
    fn from_grid(mut rows: Vec<Vec<CellKind>>, mut flags: StructureFlags) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyTable);
        }
        let width = rows.iter().map(Vec::len).max().unwrap_or(0);
        if width == 0 {
            return Err(Error::EmptyTable);
        }
        for row in &mut rows {
            if row.len() < width {
                row.resize(width, CellKind::N);
                flags.ragged_padded = true;
            }
        }
        let tags = TagSequence::from_rows(&rows, flags.header_rows);
        debug_assert!(tags.validate().is_ok());
        Ok(StructureLabel { tags, rows, flags })
    }

    pub fn cell_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

/// Why a converted table was filtered out as noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseReason {
    NoContent,
    SingleEmptyCell,
}

pub fn noise_reason(label: &StructureLabel, cfg: &StructureConfig) -> Option<NoiseReason> {
    let any_content = label.rows.iter().flatten().any(|&k| k == CellKind::Y);
    if cfg.drop_single_empty_cell && label.cell_count() == 1 && !any_content {
        return Some(NoiseReason::SingleEmptyCell);
    }
    if cfg.drop_empty_tables && !any_content {
        return Some(NoiseReason::NoContent);
    }
    None
}
