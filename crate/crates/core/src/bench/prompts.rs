use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Size of the reference prompt set.
pub const EXPECTED_PROMPTS: usize = 50;

/// Fifty sample prompts (45 authored, 5 journalistic) bundled with the crate.
pub const SAMPLE_PROMPTS_JSONL: &str = include_str!("../../data/sample_prompts.jsonl");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptSource {
    Authored,
    Journalistic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub id: String,
    pub text: String,
    pub source: PromptSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    pub prompts: Vec<Prompt>,
    pub warnings: Vec<String>,
}

pub fn parse_prompts<R: BufRead>(reader: R) -> Result<PromptSet> {
    let mut prompts = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let record = i + 1;
        let line = line.map_err(|e| Error::Record {
            record,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prompt = serde_json::from_str(&line).map_err(|e| Error::Record {
            record,
            message: format!("malformed prompt: {e}"),
        })?;
        if p.text.trim().is_empty() {
            return Err(Error::Record {
                record,
                message: format!("prompt {:?} has empty text", p.id),
            });
        }
        if !ids.insert(p.id.clone()) {
            return Err(Error::DuplicatePrompt(p.id));
        }
        prompts.push(p);
    }
    let mut warnings = Vec::new();
    if prompts.len() != EXPECTED_PROMPTS {
        let w = format!(
            "prompt set has {} prompts; the reference set has {EXPECTED_PROMPTS}",
            prompts.len()
        );
        log::warn!("{w}");
        warnings.push(w);
    }
    Ok(PromptSet { prompts, warnings })
}

pub fn load_prompts(path: impl AsRef<Path>) -> Result<PromptSet> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_prompts(std::io::BufReader::new(f))
}

pub fn sample_prompts() -> PromptSet {
    parse_prompts(SAMPLE_PROMPTS_JSONL.as_bytes()).expect("bundled prompts are valid")
}
