//! Category label to hard relevance score mapping, plus the boundary
//! adjustment that pulls 0 and 1 into the open interval.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The 18-category table shipped with the crate.
pub const DEFAULT_MAPPING_TSV: &str = include_str!("../data/default_mapping.tsv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingEntry {
    pub label: String,
    pub hard_score: f64,
    /// Advisory per-category sample count, used as a stratification default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_count_hint: Option<u64>,
}

/// Validated label table. Entry order is the file order and doubles as the
/// class order of classification heads.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingTable {
    entries: Vec<MappingEntry>,
    index: HashMap<String, usize>,
}

impl MappingTable {
    pub fn new(entries: Vec<MappingEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyTable);
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if !(0.0..=1.0).contains(&e.hard_score) {
                return Err(Error::ScoreOutOfRange {
                    line: i + 1,
                    label: e.label.clone(),
                    score: e.hard_score,
                });
            }
            if index.insert(e.label.clone(), i).is_some() {
                return Err(Error::DuplicateLabel {
                    line: i + 1,
                    label: e.label.clone(),
                });
            }
        }
        Ok(Self { entries, index })
    }

    /// The shipped 18-category table.
    pub fn default_table() -> Self {
        parse_mapping(DEFAULT_MAPPING_TSV).expect("bundled mapping table is valid")
    }

    pub fn entries(&self) -> &[MappingEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.label.as_str())
    }

    pub fn class_index(&self, label: &str) -> Result<usize> {
        self.index.get(label).copied().ok_or_else(|| Error::UnknownLabel {
            label: label.to_string(),
        })
    }

    /// Canonical TSV rendering; stable input for content hashes.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.label);
            out.push('\t');
            out.push_str(&format!("{}", e.hard_score));
            if let Some(c) = e.sample_count_hint {
                out.push('\t');
                out.push_str(&c.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Parses the tab-separated table format: `label<TAB>hard_score[<TAB>count]`,
/// `#` comment lines and blank lines ignored. Errors carry 1-based line numbers.
pub fn parse_mapping(src: &str) -> Result<MappingTable> {
    let mut entries = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, raw) in src.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "expected `label<TAB>hard_score[<TAB>count]`, found {} field(s)",
                    fields.len()
                ),
            });
        }
        let label = fields[0].trim();
        if label.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty label".into(),
            });
        }
        let hard_score: f64 = fields[1].trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("hard score {:?} is not a number", fields[1].trim()),
        })?;
        if !(0.0..=1.0).contains(&hard_score) {
            return Err(Error::ScoreOutOfRange {
                line: line_no,
                label: label.to_string(),
                score: hard_score,
            });
        }
        let sample_count_hint = match fields.get(2).map(|s| s.trim()) {
            None | Some("") => None,
            Some(s) => Some(s.parse::<u64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("count {s:?} is not a non-negative integer"),
            })?),
        };
        if seen.insert(label.to_string(), line_no).is_some() {
            return Err(Error::DuplicateLabel {
                line: line_no,
                label: label.to_string(),
            });
        }
        entries.push(MappingEntry {
            label: label.to_string(),
            hard_score,
            sample_count_hint,
        });
    }
    MappingTable::new(entries)
}

pub fn load_mapping(path: impl AsRef<Path>) -> Result<MappingTable> {
    let path = path.as_ref();
    let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mapping(&src)
}

pub fn map_label(label: &str, table: &MappingTable) -> Result<f64> {
    let i = table.class_index(label)?;
    Ok(table.entries[i].hard_score)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRule {
    pub match_score: f64,
    pub replacement: f64,
}

/// Exact-match score replacements applied before diffusion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPolicy {
    rules: Vec<BoundaryRule>,
}

impl Default for BoundaryPolicy {
    fn default() -> Self {
        Self {
            rules: vec![
                BoundaryRule {
                    match_score: 1.0,
                    replacement: 0.95,
                },
                BoundaryRule {
                    match_score: 0.0,
                    replacement: 0.15,
                },
            ],
        }
    }
}

impl BoundaryPolicy {
    pub fn new(rules: Vec<BoundaryRule>) -> Result<Self> {
        for (i, r) in rules.iter().enumerate() {
            if !(r.replacement > 0.0 && r.replacement < 1.0) {
                return Err(Error::Config(format!(
                    "boundary replacement {} must lie strictly inside (0, 1)",
                    r.replacement
                )));
            }
            if rules[..i].iter().any(|o| o.match_score == r.match_score) {
                return Err(Error::Config(format!(
                    "duplicate boundary rule for score {}",
                    r.match_score
                )));
            }
        }
        Ok(Self { rules })
    }

    pub fn rules(&self) -> &[BoundaryRule] {
        &self.rules
    }
}

pub fn adjust_boundaries(h: f64, policy: &BoundaryPolicy) -> Result<f64> {
    if !(0.0..=1.0).contains(&h) {
        return Err(Error::Domain(format!("hard score {h} is outside [0, 1]")));
    }
    if let Some(rule) = policy.rules.iter().find(|r| r.match_score == h) {
        return Ok(rule.replacement);
    }
    if h == 0.0 || h == 1.0 {
        return Err(Error::UnadjustedBoundary { score: h });
    }
    Ok(h)
}

/// Adjusted hard score for every entry, in table order.
pub fn adjusted_scores(table: &MappingTable, policy: &BoundaryPolicy) -> Result<Vec<f64>> {
    table
        .entries
        .iter()
        .map(|e| adjust_boundaries(e.hard_score, policy))
        .collect()
}
