//! Multiple-choice datasets and prompt assembly.
//!
//! On disk a dataset is a directory with `items.jsonl` (one item per line)
//! and a `dataset.json` sidecar holding the name, instruction and split.

use std::collections::HashSet;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::{ByteTokenizer, BOS};

pub const ITEMS_FILE: &str = "items.jsonl";
pub const SIDECAR_FILE: &str = "dataset.json";

/// Joins instruction, question and candidate.
pub const SEPARATOR: &str = "\n";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqItem {
    pub item_id: String,
    pub question: String,
    pub candidates: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
}

impl McqItem {
    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::InvalidDataset(format!(
                "item `{}` has no candidates",
                self.item_id
            )));
        }
        if self.candidates.iter().any(String::is_empty) {
            return Err(Error::InvalidDataset(format!(
                "item `{}` has an empty candidate",
                self.item_id
            )));
        }
        if let Some(label) = self.label {
            if label >= self.candidates.len() {
                return Err(Error::LabelOutOfRange {
                    item_id: self.item_id.clone(),
                    label,
                    n_candidates: self.candidates.len(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    LabeledBudget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Sidecar {
    name: String,
    instruction: String,
    split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub instruction: String,
    pub split: Split,
    pub items: Vec<McqItem>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        instruction: impl Into<String>,
        split: Split,
        items: Vec<McqItem>,
    ) -> Result<Self> {
        let ds = Dataset {
            name: name.into(),
            instruction: instruction.into(),
            split,
            items,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.items.is_empty() {
            return Err(Error::InvalidDataset(format!("dataset `{}` is empty", self.name)));
        }
        let mut seen = HashSet::new();
        for item in &self.items {
            item.validate()?;
            if !seen.insert(item.item_id.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate item_id `{}`",
                    item.item_id
                )));
            }
        }
        Ok(())
    }

    /// Mean of `1/M` over items: the expected accuracy of a random guess.
    pub fn random_guess(&self) -> f64 {
        self.items
            .iter()
            .map(|i| 1.0 / i.candidates.len() as f64)
            .sum::<f64>()
            / self.items.len() as f64
    }
}

fn resolve_paths(path: &Path) -> (PathBuf, PathBuf) {
    if path.is_dir() {
        (path.join(ITEMS_FILE), path.join(SIDECAR_FILE))
    } else {
        let dir = path.parent().unwrap_or(Path::new("."));
        (path.to_path_buf(), dir.join(SIDECAR_FILE))
    }
}

/// Loads a dataset from a directory, or from an items file whose sibling
/// is the `dataset.json` sidecar.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let (items_path, sidecar_path) = resolve_paths(path);
    let side_text = fs::read_to_string(&sidecar_path).map_err(|e| Error::io(&sidecar_path, e))?;
    let side: Sidecar = serde_json::from_str(&side_text)
        .map_err(|e| Error::json(sidecar_path.display().to_string(), e))?;
    let text = fs::read_to_string(&items_path).map_err(|e| Error::io(&items_path, e))?;
    let mut items = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::MalformedLine {
            path: items_path.clone(),
            line: n + 1,
            message,
        };
        let item: McqItem = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        match item.validate() {
            Err(Error::InvalidDataset(msg)) => return Err(malformed(msg)),
            Err(e) => return Err(e),
            Ok(()) => {}
        }
        if !seen.insert(item.item_id.clone()) {
            return Err(Error::InvalidDataset(format!(
                "duplicate item_id `{}`",
                item.item_id
            )));
        }
        items.push(item);
    }
    Dataset::new(side.name, side.instruction, side.split, items)
}

/// Writes `items.jsonl` and `dataset.json` into `dir`.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let side = Sidecar {
        name: dataset.name.clone(),
        instruction: dataset.instruction.clone(),
        split: dataset.split,
    };
    let side_path = dir.join(SIDECAR_FILE);
    let json = serde_json::to_string_pretty(&side).map_err(|e| Error::json("sidecar", e))?;
    fs::write(&side_path, json + "\n").map_err(|e| Error::io(&side_path, e))?;
    let mut out = String::new();
    for item in &dataset.items {
        out.push_str(&serde_json::to_string(item).map_err(|e| Error::json("item", e))?);
        out.push('\n');
    }
    let items_path = dir.join(ITEMS_FILE);
    fs::write(&items_path, out).map_err(|e| Error::io(&items_path, e))
}

/// Token ids of one `[instruction; question; candidate]` prompt plus the
/// range covering the candidate's tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub tokens: Vec<u32>,
    pub answer_span: Range<usize>,
}

pub fn prompt_prefix(instruction: &str, question: &str) -> String {
    let mut s = String::new();
    if !instruction.is_empty() {
        s.push_str(instruction);
        s.push_str(SEPARATOR);
    }
    s.push_str(question);
    s.push_str(SEPARATOR);
    s
}

pub fn assemble_prompt(
    dataset: &Dataset,
    item: &McqItem,
    candidate_index: usize,
    max_seq_len: usize,
) -> Result<Prompt> {
    let candidate = item.candidates.get(candidate_index).ok_or_else(|| {
        Error::InvalidInput(format!(
            "candidate {candidate_index} out of range for item `{}`",
            item.item_id
        ))
    })?;
    let tok = ByteTokenizer;
    let mut tokens = vec![BOS];
    tokens.extend(tok.encode(&prompt_prefix(&dataset.instruction, &item.question)));
    let start = tokens.len();
    tokens.extend(tok.encode(candidate));
    if tokens.len() > max_seq_len {
        return Err(Error::SequenceTooLong {
            item_id: item.item_id.clone(),
            candidate: candidate_index,
            len: tokens.len(),
            max: max_seq_len,
        });
    }
    let end = tokens.len();
    Ok(Prompt {
        tokens,
        answer_span: start..end,
    })
}

/// Deterministically samples `n` ids; the result is sorted.
pub fn sample_ids(mut ids: Vec<String>, n: usize, seed: u64) -> Result<Vec<String>> {
    if n > ids.len() {
        return Err(Error::InvalidInput(format!(
            "budget of {n} exceeds the {} labeled items available",
            ids.len()
        )));
    }
    ids.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    ids.truncate(n);
    ids.sort();
    Ok(ids)
}

/// Seeded labeled subset of size `n`, ordered by item_id.
pub fn sample_budget(dataset: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    let labeled: Vec<String> = dataset
        .items
        .iter()
        .filter(|i| i.label.is_some())
        .map(|i| i.item_id.clone())
        .collect();
    let chosen: HashSet<String> = sample_ids(labeled, n, seed)?.into_iter().collect();
    let mut items: Vec<McqItem> = dataset
        .items
        .iter()
        .filter(|i| chosen.contains(&i.item_id))
        .cloned()
        .collect();
    items.sort_by(|a, b| a.item_id.cmp(&b.item_id));
    Dataset::new(
        dataset.name.clone(),
        dataset.instruction.clone(),
        Split::LabeledBudget,
        items,
    )
}
