//! Prompt tokenization and the per-token text encoder.
//!
//! Words seen while building the vocabulary get a single id. Anything else is
//! spelled out as character tokens, so a one-letter typo in a prompt reaches
//! the denoiser as a different (and longer) embedding sequence.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Default embedding width.
pub const EMBED_DIM: usize = 16;
/// Longest token sequence; longer prompts are truncated.
pub const MAX_LEN: usize = 32;

const CHAR_ALPHABET: &str = "0123456789abcdefghijklmnopqrstuvwxyz";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    char_ids: BTreeMap<char, usize>,
    fallback_id: usize,
    size: usize,
    word_ids: BTreeMap<String, usize>,
}

impl Vocabulary {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn word_id(&self, word: &str) -> Option<usize> {
        self.word_ids.get(word).copied()
    }

    /// Id of `c`, or the fallback id for characters outside `[0-9a-z]`.
    pub fn char_id(&self, c: char) -> usize {
        self.char_ids.get(&c).copied().unwrap_or(self.fallback_id)
    }

    pub fn fallback_id(&self) -> usize {
        self.fallback_id
    }

    pub fn words(&self) -> impl Iterator<Item = (&str, usize)> {
        self.word_ids.iter().map(|(w, &id)| (w.as_str(), id))
    }

    pub fn num_words(&self) -> usize {
        self.word_ids.len()
    }

    /// Human-readable label for a token id.
    pub fn label(&self, id: usize) -> String {
        if let Some((w, _)) = self.word_ids.iter().find(|(_, &v)| v == id) {
            return w.clone();
        }
        if let Some((c, _)) = self.char_ids.iter().find(|(_, &v)| v == id) {
            return format!("'{c}'");
        }
        if id == self.fallback_id {
            return "<unk-char>".to_string();
        }
        format!("#{id}")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("vocabulary serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: Vocabulary = serde_json::from_str(s).map_err(|e| Error::json("vocabulary", e))?;
        v.validate()?;
        Ok(v)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.size];
        let ids = self
            .char_ids
            .values()
            .chain(self.word_ids.values())
            .chain(std::iter::once(&self.fallback_id));
        for &id in ids {
            if id >= self.size || seen[id] {
                return Err(Error::Config(format!("vocabulary id {id} duplicated or out of range")));
            }
            seen[id] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config("vocabulary ids are not dense".into()));
        }
        Ok(())
    }
}

/// Builds a vocabulary from every whitespace-delimited (lowercased) word in
/// `corpus`, plus character tokens for `[0-9a-z]` and one fallback character.
///
/// Character ids come first, then words in lexicographic order.
pub fn build_vocab<S: AsRef<str>>(corpus: &[S]) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut char_ids = BTreeMap::new();
    for (i, c) in CHAR_ALPHABET.chars().enumerate() {
        char_ids.insert(c, i);
    }
    let fallback_id = char_ids.len();
    let mut words: Vec<String> = corpus
        .iter()
        .flat_map(|p| {
            p.as_ref()
                .split_whitespace()
                .map(str::to_lowercase)
                .collect::<Vec<_>>()
        })
        .collect();
    words.sort();
    words.dedup();
    let word_ids: BTreeMap<String, usize> = words
        .into_iter()
        .enumerate()
        .map(|(i, w)| (w, fallback_id + 1 + i))
        .collect();
    let size = fallback_id + 1 + word_ids.len();
    Ok(Vocabulary {
        char_ids,
        fallback_id,
        size,
        word_ids,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence {
    tokens: Vec<usize>,
}

impl TokenSequence {
    pub fn new(tokens: Vec<usize>) -> Result<Self> {
        if tokens.is_empty() || tokens.len() > MAX_LEN {
            return Err(Error::BadSequenceLength {
                len: tokens.len(),
                max: MAX_LEN,
            });
        }
        Ok(TokenSequence { tokens })
    }

    pub fn ids(&self) -> &[usize] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

pub fn tokenize(prompt: &str, vocab: &Vocabulary) -> Result<TokenSequence> {
    let lowered = prompt.trim().to_lowercase();
    if lowered.is_empty() {
        return Err(Error::EmptyPrompt);
    }
    let mut tokens = Vec::new();
    for word in lowered.split_whitespace() {
        match vocab.word_id(word) {
            Some(id) => tokens.push(id),
            None => tokens.extend(word.chars().map(|c| vocab.char_id(c))),
        }
        if tokens.len() >= MAX_LEN {
            tokens.truncate(MAX_LEN);
            break;
        }
    }
    TokenSequence::new(tokens)
}

/// Encoder output: one `dim`-vector per token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSequence {
    vectors: Matrix,
}

impl EmbeddingSequence {
    pub fn from_matrix(vectors: Matrix) -> Result<Self> {
        if vectors.rows == 0 || vectors.rows > MAX_LEN {
            return Err(Error::BadSequenceLength {
                len: vectors.rows,
                max: MAX_LEN,
            });
        }
        if !vectors.is_finite() {
            return Err(Error::ShapeMismatch("embedding sequence has non-finite entries".into()));
        }
        Ok(EmbeddingSequence { vectors })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) || dim == 0 {
            return Err(Error::ShapeMismatch("ragged or empty embedding rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::from_matrix(Matrix {
            rows: rows.len(),
            cols: dim,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.rows
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }

    pub(crate) fn vector_mut(&mut self, i: usize) -> &mut [f64] {
        self.vectors.row_mut(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.vectors.data.chunks_exact(self.vectors.cols)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.vectors
    }

    /// Mean of the token vectors; the conditioning signal fed to the denoiser.
    pub fn mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for v in self.iter() {
            crate::tensor::axpy(1.0, v, &mut out);
        }
        let inv = 1.0 / self.len() as f64;
        out.iter_mut().for_each(|x| *x *= inv);
        out
    }
}

/// Token embedding table plus learned absolute positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextEncoderParams {
    pub embedding_table: Matrix,
    pub positional_table: Matrix,
}

impl TextEncoderParams {
    pub fn zeros(vocab_size: usize, dim: usize) -> Self {
        TextEncoderParams {
            embedding_table: Matrix::zeros(vocab_size, dim),
            positional_table: Matrix::zeros(MAX_LEN, dim),
        }
    }

    pub fn random<R: Rng + ?Sized>(vocab_size: usize, dim: usize, rng: &mut R) -> Self {
        TextEncoderParams {
            embedding_table: Matrix::random_normal(vocab_size, dim, 1.0, rng),
            positional_table: Matrix::random_normal(MAX_LEN, dim, 0.1, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.embedding_table.cols
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding_table.rows
    }

    pub fn is_consistent(&self) -> bool {
        self.positional_table.rows == MAX_LEN
            && self.positional_table.cols == self.embedding_table.cols
            && self.embedding_table.is_finite()
            && self.positional_table.is_finite()
    }
}

pub fn encode(tokens: &TokenSequence, params: &TextEncoderParams) -> Result<EmbeddingSequence> {
    let dim = params.dim();
    let size = params.vocab_size();
    let mut out = Matrix::zeros(tokens.len(), dim);
    for (i, &id) in tokens.ids().iter().enumerate() {
        if id >= size {
            return Err(Error::TokenOutOfRange { id, size });
        }
        let row = out.row_mut(i);
        for ((o, e), p) in row
            .iter_mut()
            .zip(params.embedding_table.row(id))
            .zip(params.positional_table.row(i))
        {
            *o = e + p;
        }
    }
    EmbeddingSequence::from_matrix(out)
}
