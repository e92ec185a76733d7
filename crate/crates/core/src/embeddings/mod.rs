//! Vocabulary construction and the trainable word-vector table.

mod word2vec;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub use word2vec::{read_word2vec_binary, write_word2vec_binary, Word2Vec};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Default half-width of the uniform range used for randomly initialized rows.
pub const DEFAULT_INIT_RANGE: f64 = 0.25;

/// Token to index map with reserved PAD (0) and UNK (1) entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds from regular tokens; PAD and UNK are prepended.
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Self {
        let mut all = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        all.extend(tokens);
        Vocabulary::try_from(all).expect("regular tokens are distinct")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `token`, or `None` if out of vocabulary.
    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Index of `token`, falling back to UNK.
    pub fn index_or_unk(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[PAD] != PAD_TOKEN || tokens[UNK] != UNK_TOKEN {
            return Err(Error::CorruptCheckpoint("vocabulary must start with PAD and UNK".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::CorruptCheckpoint(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

/// Collects tokens seen at least `min_count` times, ordered by descending
/// frequency with ties broken lexicographically.
pub fn build_vocab(corpus: &Corpus, min_count: usize) -> Vocabulary {
    let min_count = min_count.max(1);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for doc in &corpus.documents {
        for t in &doc.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(t, c)| c >= min_count && t != PAD_TOKEN && t != UNK_TOKEN)
        .collect();
    kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocabulary::from_tokens(kept.into_iter().map(|(t, _)| t.to_string()))
}

/// Row-major `rows × dim` word-vector table. Row [`PAD`] stays zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub values: Vec<f64>,
    pub rows: usize,
    pub dim: usize,
    pub trainable: bool,
}

impl EmbeddingMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingMatrix {
            values: vec![0.0; rows * dim],
            rows,
            dim,
            trainable: true,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }
}

/// Builds the embedding table for `vocab`. Tokens present in `pretrained`
/// copy their vector, everything else (UNK included) is drawn uniformly from
/// `[-init_range, init_range]`.
pub fn init_embeddings(
    vocab: &Vocabulary,
    pretrained: Option<&Word2Vec>,
    dim: usize,
    init_range: f64,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    if let Some(p) = pretrained {
        if p.dim != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: p.dim });
        }
    }
    let lookup: HashMap<&str, usize> = pretrained
        .map(|p| p.words.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect())
        .unwrap_or_default();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrix = EmbeddingMatrix::zeros(vocab.len(), dim);
    let mut copied = 0usize;
    for i in 1..vocab.len() {
        let found = if i == UNK { None } else { lookup.get(vocab.token(i)) };
        // Random draws are consumed for every row so that adding a pretrained
        // table does not shift the initialization of the other rows.
        let random: Vec<f64> = (0..dim).map(|_| rng.random_range(-init_range..=init_range)).collect();
        let row = matrix.row_mut(i);
        match (found, pretrained) {
            (Some(&j), Some(p)) => {
                for (dst, &src) in row.iter_mut().zip(p.row(j)) {
                    *dst = f64::from(src);
                }
                copied += 1;
            }
            _ => row.copy_from_slice(&random),
        }
    }
    if pretrained.is_some() {
        log::info!("initialized {copied} of {} vocabulary rows from pretrained vectors", vocab.len() - 2);
    }
    Ok(matrix)
}
