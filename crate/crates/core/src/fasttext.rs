//! Bag of words and hashed n-grams fed through a linear softmax classifier.
//!
//! A document is represented by the mean of its word vectors and the vectors
//! of its hashed word n-grams (lengths 2 through `n_max`). Training is plain
//! per-document gradient descent with a learning rate decaying linearly to
//! zero over the whole run.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cnn::{cross_entropy_loss, softmax};
use crate::corpus::{Corpus, LabelSet};
use crate::embeddings::{build_vocab, Vocabulary};
use crate::error::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const NGRAM_SEPARATOR: u8 = 0x1f;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FastTextConfig {
    pub dim: usize,
    /// Longest word n-gram; 1 disables n-grams.
    pub n_max: usize,
    pub buckets: usize,
    pub lr0: f64,
    pub epochs: usize,
    pub min_count: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for FastTextConfig {
    fn default() -> Self {
        FastTextConfig {
            dim: 10,
            n_max: 4,
            buckets: 1 << 21,
            lr0: 0.25,
            epochs: 5,
            min_count: 1,
            max_len: crate::corpus::DEFAULT_MAX_LEN,
            seed: 0,
        }
    }
}

impl FastTextConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("fasttext: {m}")));
        if self.dim == 0 || self.n_max == 0 || self.buckets == 0 || self.max_len == 0 || self.min_count == 0 {
            return bad("dim, n_max, buckets, max_len and min_count must be positive");
        }
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return bad("lr0 must be a finite non-negative number");
        }
        Ok(())
    }
}

/// FNV-1a (64-bit) over `bytes`.
pub fn fnv1a64(bytes: impl IntoIterator<Item = u8>) -> u64 {
    bytes
        .into_iter()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Bucket ids of every contiguous n-gram with `2 <= n <= n_max`, ordered by
/// start position and then by length. Tokens are joined with 0x1F before
/// hashing.
pub fn extract_ngrams(tokens: &[String], n_max: usize, buckets: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for start in 0..tokens.len() {
        for n in 2..=n_max {
            if start + n > tokens.len() {
                break;
            }
            let gram = &tokens[start..start + n];
            let bytes = gram
                .iter()
                .enumerate()
                .flat_map(|(i, t)| (i > 0).then_some(NGRAM_SEPARATOR).into_iter().chain(t.bytes()));
            out.push((fnv1a64(bytes) % buckets as u64) as usize);
        }
    }
    out
}

/// Feature indices of one document, with multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bag {
    pub words: Vec<usize>,
    pub ngrams: Vec<usize>,
}

impl Bag {
    pub fn len(&self) -> usize {
        self.words.len() + self.ngrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FastTextModel {
    pub config: FastTextConfig,
    pub labels: LabelSet,
    pub vocab: Vocabulary,
    /// Row-major `|V| × d`.
    pub word_table: Vec<f64>,
    /// Row-major `buckets × d`.
    pub ngram_table: Vec<f64>,
    /// Row-major `C × d`.
    pub output: Vec<f64>,
    pub output_bias: Vec<f64>,
}

impl FastTextModel {
    /// Input tables start uniform on `[-1/d, 1/d]`, the output layer at zero.
    pub fn new(config: FastTextConfig, labels: LabelSet, vocab: Vocabulary) -> Result<Self> {
        config.validate()?;
        let d = config.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let bound = 1.0 / d as f64;
        let mut uniform = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..=bound)).collect() };
        let mut word_table = uniform(vocab.len() * d);
        word_table[..d].iter_mut().for_each(|x| *x = 0.0);
        let ngram_table = if config.n_max >= 2 {
            uniform(config.buckets * d)
        } else {
            vec![0.0; config.buckets * d]
        };
        let c = labels.len();
        Ok(FastTextModel {
            config,
            labels,
            vocab,
            word_table,
            ngram_table,
            output: vec![0.0; c * d],
            output_bias: vec![0.0; c],
        })
    }

    pub fn from_corpus(config: FastTextConfig, corpus: &Corpus) -> Result<Self> {
        config.validate()?;
        let vocab = build_vocab(corpus, config.min_count);
        FastTextModel::new(config, corpus.label_set.clone(), vocab)
    }

    pub fn num_classes(&self) -> usize {
        self.output_bias.len()
    }

    pub fn bag(&self, tokens: &[String]) -> Bag {
        Bag {
            words: tokens.iter().map(|t| self.vocab.index_or_unk(t)).collect(),
            ngrams: if self.config.n_max >= 2 {
                extract_ngrams(tokens, self.config.n_max, self.config.buckets)
            } else {
                Vec::new()
            },
        }
    }

    fn feature_rows<'a>(&'a self, bag: &'a Bag) -> impl Iterator<Item = &'a [f64]> + 'a {
        let d = self.config.dim;
        let words = bag.words.iter().map(move |&i| &self.word_table[i * d..(i + 1) * d]);
        let ngrams = bag.ngrams.iter().map(move |&i| &self.ngram_table[i * d..(i + 1) * d]);
        words.chain(ngrams)
    }

    pub fn hidden(&self, bag: &Bag) -> Result<Vec<f64>> {
        if bag.is_empty() {
            return Err(Error::EmptyDocument);
        }
        let mut h = vec![0.0; self.config.dim];
        for row in self.feature_rows(bag) {
            for (a, b) in h.iter_mut().zip(row) {
                *a += b;
            }
        }
        let n = bag.len() as f64;
        h.iter_mut().for_each(|x| *x /= n);
        Ok(h)
    }

    pub fn logits(&self, hidden: &[f64]) -> Vec<f64> {
        let d = self.config.dim;
        (0..self.num_classes())
            .map(|c| crate::cnn::dot(&self.output[c * d..(c + 1) * d], hidden) + self.output_bias[c])
            .collect()
    }

    pub fn forward_bag(&self, bag: &Bag) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(&self.hidden(bag)?)))
    }

    /// Class probabilities of a tokenized document.
    pub fn predict(&self, tokens: &[String]) -> Result<Vec<f64>> {
        if tokens.is_empty() {
            return Err(Error::EmptyDocument);
        }
        self.forward_bag(&self.bag(tokens))
    }

    /// One gradient step on a single document; returns the loss before the
    /// update.
    pub fn sgd_step(&mut self, bag: &Bag, label: usize, lr: f64) -> Result<f64> {
        let d = self.config.dim;
        let hidden = self.hidden(bag)?;
        let probs = softmax(&self.logits(&hidden));
        let loss = cross_entropy_loss(&probs, label);
        if lr == 0.0 {
            return Ok(loss);
        }
        let mut d_logits = probs;
        d_logits[label] -= 1.0;

        let mut d_hidden = vec![0.0; d];
        for (c, &g) in d_logits.iter().enumerate() {
            let row = &mut self.output[c * d..(c + 1) * d];
            for t in 0..d {
                d_hidden[t] += g * row[t];
                row[t] -= lr * g * hidden[t];
            }
            self.output_bias[c] -= lr * g;
        }

        let step = lr / bag.len() as f64;
        for &i in &bag.words {
            for (w, g) in self.word_table[i * d..(i + 1) * d].iter_mut().zip(&d_hidden) {
                *w -= step * g;
            }
        }
        for &i in &bag.ngrams {
            for (w, g) in self.ngram_table[i * d..(i + 1) * d].iter_mut().zip(&d_hidden) {
                *w -= step * g;
            }
        }
        Ok(loss)
    }
}

/// Epoch-wise driver for [`FastTextModel::sgd_step`] with a linear learning
/// rate decay over `total_epochs * corpus size` documents.
#[derive(Debug, Clone)]
pub struct FastTextSchedule {
    pub lr0: f64,
    pub processed: u64,
    pub total: u64,
    pub seed: u64,
    rng: ChaCha8Rng,
}

impl FastTextSchedule {
    pub fn new(lr0: f64, total_epochs: usize, corpus_len: usize, seed: u64) -> Self {
        FastTextSchedule {
            lr0,
            processed: 0,
            total: (total_epochs * corpus_len) as u64,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Restores a schedule at a given point of the run.
    pub fn resume(lr0: f64, processed: u64, total: u64, seed: u64, stream_word: u128) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(stream_word);
        FastTextSchedule {
            lr0,
            processed,
            total,
            seed,
            rng,
        }
    }

    pub fn rng_word_pos(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn current_lr(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.lr0 * (1.0 - (self.processed as f64 / self.total as f64)).max(0.0)
    }

    /// One shuffled pass; returns the mean training loss.
    pub fn run_epoch(&mut self, model: &mut FastTextModel, bags: &[(Bag, usize)]) -> Result<f64> {
        let mut order: Vec<usize> = (0..bags.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total_loss = 0.0;
        for i in order {
            let lr = self.current_lr();
            let (bag, label) = &bags[i];
            total_loss += model.sgd_step(bag, *label, lr)?;
            self.processed += 1;
        }
        Ok(total_loss / bags.len().max(1) as f64)
    }
}

/// Trains for `epochs` passes starting at learning rate `lr0`.
pub fn ft_train(model: &mut FastTextModel, corpus: &Corpus, epochs: usize, lr0: f64) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let bags: Vec<(Bag, usize)> = corpus.documents.iter().map(|d| (model.bag(&d.tokens), d.label)).collect();
    let mut schedule = FastTextSchedule::new(lr0, epochs, bags.len(), model.config.seed);
    for epoch in 0..epochs {
        let loss = schedule.run_epoch(model, &bags)?;
        log::debug!("fasttext epoch {epoch}: loss {loss:.5}");
    }
    Ok(())
}
