//! Rule-based typo generator for prompts of the form `"a photo of sks <item>"`.
//!
//! Produces the same families of edits that show up in hand-collected
//! adversarial prompt lists: dropped, swapped, doubled and substituted letters,
//! plus dropped filler words.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    CharDelete,
    CharTranspose,
    CharDuplicate,
    CharSubstitute,
    WordDrop,
}

impl EditKind {
    pub const ALL: [EditKind; 5] = [
        EditKind::CharDelete,
        EditKind::CharTranspose,
        EditKind::CharDuplicate,
        EditKind::CharSubstitute,
        EditKind::WordDrop,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditOp {
    pub kind: EditKind,
    pub word_index: usize,
    #[serde(default)]
    pub char_index: usize,
    /// New character for [`EditKind::CharSubstitute`].
    #[serde(default)]
    pub replacement: Option<char>,
}

impl EditOp {
    pub fn new(kind: EditKind, word_index: usize, char_index: usize) -> Self {
        EditOp {
            kind,
            word_index,
            char_index,
            replacement: None,
        }
    }

    pub fn substitute(word_index: usize, char_index: usize, replacement: char) -> Self {
        EditOp {
            kind: EditKind::CharSubstitute,
            word_index,
            char_index,
            replacement: Some(replacement),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidEdit(msg.into())
}

/// Applies exactly one edit. The result always differs from `prompt`, and the
/// last word is never removed.
pub fn apply_edit(prompt: &str, op: &EditOp) -> Result<String> {
    let mut words: Vec<Vec<char>> = prompt.split_whitespace().map(|w| w.chars().collect()).collect();
    let n_words = words.len();
    if op.word_index >= n_words {
        return Err(invalid(format!("word {} of {n_words}", op.word_index)));
    }
    let word = &mut words[op.word_index];
    let len = word.len();
    let c = op.char_index;
    match op.kind {
        EditKind::CharDelete => {
            if len < 2 {
                return Err(invalid("cannot delete the only character of a word"));
            }
            if c >= len {
                return Err(invalid(format!("char {c} of {len}")));
            }
            word.remove(c);
        }
        EditKind::CharTranspose => {
            if c + 1 >= len {
                return Err(invalid(format!("cannot swap chars {c},{} of {len}", c + 1)));
            }
            if word[c] == word[c + 1] {
                return Err(invalid("swapping equal characters is a no-op"));
            }
            word.swap(c, c + 1);
        }
        EditKind::CharDuplicate => {
            if c >= len {
                return Err(invalid(format!("char {c} of {len}")));
            }
            let ch = word[c];
            word.insert(c + 1, ch);
        }
        EditKind::CharSubstitute => {
            if c >= len {
                return Err(invalid(format!("char {c} of {len}")));
            }
            let r = op.replacement.ok_or_else(|| invalid("substitution needs a replacement"))?;
            if r.is_whitespace() || r == word[c] {
                return Err(invalid(format!("replacement {r:?} is not a change")));
            }
            word[c] = r;
        }
        EditKind::WordDrop => {
            if op.word_index + 1 == n_words {
                return Err(invalid("the final word may not be dropped"));
            }
            words.remove(op.word_index);
        }
    }
    Ok(words
        .iter()
        .map(|w| w.iter().collect::<String>())
        .collect::<Vec<_>>()
        .join(" "))
}

/// Relative frequencies of each edit kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EditWeights {
    pub char_delete: f64,
    pub char_transpose: f64,
    pub char_duplicate: f64,
    pub char_substitute: f64,
    pub word_drop: f64,
}

impl Default for EditWeights {
    fn default() -> Self {
        EditWeights {
            char_delete: 0.35,
            char_transpose: 0.25,
            char_duplicate: 0.15,
            char_substitute: 0.15,
            word_drop: 0.10,
        }
    }
}

impl EditWeights {
    fn as_array(&self) -> [f64; 5] {
        [
            self.char_delete,
            self.char_transpose,
            self.char_duplicate,
            self.char_substitute,
            self.word_drop,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbConfig {
    pub min_edits: usize,
    pub max_edits: usize,
    pub count: usize,
    pub seed: u64,
    /// Upper bound on Levenshtein distance to the template.
    pub max_distance: usize,
    pub weights: EditWeights,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            min_edits: 1,
            max_edits: 3,
            count: 40,
            seed: 0,
            max_distance: 4,
            weights: EditWeights::default(),
        }
    }
}

impl PerturbConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidPerturbConfig(m.into()));
        if !(1 <= self.min_edits && self.min_edits <= self.max_edits && self.max_edits <= 4) {
            return bad("need 1 <= min_edits <= max_edits <= 4");
        }
        if self.count == 0 {
            return bad("count must be >= 1");
        }
        if self.max_distance == 0 {
            return bad("max_distance must be >= 1");
        }
        let w = self.weights.as_array();
        if w.iter().any(|x| !(*x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return bad("edit weights must be non-negative with a positive sum");
        }
        Ok(())
    }

    /// Largest Levenshtein distance an accepted prompt may have.
    pub fn distance_cap(&self) -> usize {
        self.max_distance.min(2 * self.max_edits)
    }

    /// [`gen_adversarial_set`] with a stream seeded from `self.seed`.
    pub fn generate(&self, template: &str) -> Result<Vec<String>> {
        gen_adversarial_set(template, self, &mut rng::stream(self.seed))
    }
}

pub fn levenshtein(a: &str, b: &str) -> usize {
    strsim::levenshtein(a, b)
}

/// Checks the `"a photo of sks <item>"` shape.
pub fn check_template(template: &str) -> Result<()> {
    let words: Vec<&str> = template.split_whitespace().collect();
    if words.len() >= 5 && words[..4] == ["a", "photo", "of", "sks"] {
        Ok(())
    } else {
        Err(Error::BadTemplate(template.to_string()))
    }
}

fn candidates(prompt: &str, kind: EditKind) -> Vec<(usize, usize)> {
    let words: Vec<Vec<char>> = prompt.split_whitespace().map(|w| w.chars().collect()).collect();
    let mut out = Vec::new();
    for (wi, w) in words.iter().enumerate() {
        match kind {
            EditKind::CharDelete if w.len() >= 2 => out.extend((0..w.len()).map(|c| (wi, c))),
            EditKind::CharTranspose => out.extend((0..w.len().saturating_sub(1)).filter(|&c| w[c] != w[c + 1]).map(|c| (wi, c))),
            EditKind::CharDuplicate | EditKind::CharSubstitute => out.extend((0..w.len()).map(|c| (wi, c))),
            EditKind::WordDrop if wi + 1 < words.len() => out.push((wi, 0)),
            _ => {}
        }
    }
    out
}

fn random_edit<R: Rng + ?Sized>(prompt: &str, kinds: &WeightedIndex<f64>, rng: &mut R) -> Result<EditOp> {
    for _ in 0..64 {
        let kind = EditKind::ALL[kinds.sample(rng)];
        let cands = candidates(prompt, kind);
        if cands.is_empty() {
            continue;
        }
        let (w, c) = cands[rng.random_range(0..cands.len())];
        let mut op = EditOp::new(kind, w, c);
        if kind == EditKind::CharSubstitute {
            let current = prompt.split_whitespace().nth(w).and_then(|s| s.chars().nth(c));
            let replacement = loop {
                let r = char::from(b'a' + rng.random_range(0..26u8));
                if Some(r) != current {
                    break r;
                }
            };
            op.replacement = Some(replacement);
        }
        return Ok(op);
    }
    Err(invalid(format!("no applicable edit for {prompt:?}")))
}

/// `config.count` distinct typo'd variants of `template`, each produced by
/// `min_edits..=max_edits` random edits and kept only if its Levenshtein
/// distance to the template lies in `[1, config.distance_cap()]`.
pub fn gen_adversarial_set<R: Rng + ?Sized>(template: &str, config: &PerturbConfig, rng: &mut R) -> Result<Vec<String>> {
    config.validate()?;
    check_template(template)?;
    let kinds = WeightedIndex::new(config.weights.as_array())
        .map_err(|e| Error::InvalidPerturbConfig(e.to_string()))?;
    let cap = config.distance_cap();
    let max_attempts = 100 * config.count;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(config.count);
    for _ in 0..max_attempts {
        if out.len() == config.count {
            break;
        }
        let edits = rng.random_range(config.min_edits..=config.max_edits);
        let mut prompt = template.to_string();
        for _ in 0..edits {
            let op = random_edit(&prompt, &kinds, rng)?;
            prompt = apply_edit(&prompt, &op)?;
        }
        let d = levenshtein(template, &prompt);
        if d == 0 || d > cap || !seen.insert(prompt.clone()) {
            continue;
        }
        out.push(prompt);
    }
    if out.len() < config.count {
        return Err(Error::PerturbExhausted {
            got: out.len(),
            wanted: config.count,
            attempts: max_attempts,
        });
    }
    Ok(out)
}
