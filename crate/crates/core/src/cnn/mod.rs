//! Convolutional sentence classifier.
//!
//! A sentence is embedded as an `n × k` matrix, each filter of width `h`
//! slides over windows of `h` consecutive rows producing
//! `c_i = tanh(w · x[i..i+h] + b)`, every feature map is reduced to its
//! maximum, and the pooled vector `z` (one entry per filter) feeds a softmax
//! layer. Dropout acts on `z` during training; at test time the softmax
//! weights are scaled by the keep probability instead.

mod grad;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabelSet};
use crate::embeddings::{build_vocab, init_embeddings, EmbeddingMatrix, Vocabulary, Word2Vec, PAD};
use crate::error::{Error, Result};

pub use grad::{backward, CnnGradients};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CnnConfig {
    pub embed_dim: usize,
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    /// Probability of dropping a pooled feature during training.
    pub dropout: f64,
    /// L2 cap on each softmax weight row; `None` disables the constraint.
    pub norm_cap: Option<f64>,
    /// Also cap each convolution filter's weight vector.
    pub cap_filters: bool,
    pub max_len: usize,
    pub min_count: usize,
    pub init_range: f64,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            embed_dim: 300,
            filter_widths: vec![2, 3, 4],
            filters_per_width: 50,
            dropout: 0.5,
            norm_cap: Some(10.0),
            cap_filters: false,
            max_len: crate::corpus::DEFAULT_MAX_LEN,
            min_count: 1,
            init_range: crate::embeddings::DEFAULT_INIT_RANGE,
            seed: 0,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("cnn: {m}")));
        if self.embed_dim == 0 {
            return bad("embed_dim must be positive".into());
        }
        if self.filter_widths.is_empty() || self.filter_widths.contains(&0) {
            return bad(format!("filter widths must be non-empty and positive, got {:?}", self.filter_widths));
        }
        if self.filters_per_width == 0 {
            return bad("filters_per_width must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if let Some(s) = self.norm_cap {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("norm_cap must be positive, got {s}"));
            }
        }
        if self.max_len == 0 || self.min_count == 0 {
            return bad("max_len and min_count must be positive".into());
        }
        if !(self.init_range >= 0.0 && self.init_range.is_finite()) {
            return bad("init_range must be a finite non-negative number".into());
        }
        Ok(())
    }

    pub fn num_features(&self) -> usize {
        self.filter_widths.len() * self.filters_per_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    #[default]
    Test,
}

/// All filters sharing one window width. Weights are stored per filter as a
/// row-major `width × dim` block.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub width: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl FilterBank {
    pub fn count(&self) -> usize {
        self.bias.len()
    }

    pub fn filter(&self, j: usize, dim: usize) -> ConvFilter<'_> {
        let len = self.width * dim;
        ConvFilter {
            weights: &self.weights[j * len..(j + 1) * len],
            bias: self.bias[j],
            width: self.width,
        }
    }
}

/// Borrowed view of a single convolution filter.
#[derive(Debug, Clone, Copy)]
pub struct ConvFilter<'a> {
    pub weights: &'a [f64],
    pub bias: f64,
    pub width: usize,
}

/// Row-major `n × k` sentence matrix. Rows past the real tokens are PAD.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceMatrix {
    pub rows: Vec<f64>,
    pub n: usize,
    pub k: usize,
    /// Vocabulary index of every row, PAD for extension rows.
    pub token_ids: Vec<usize>,
}

impl SentenceMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.k..(i + 1) * self.k]
    }

    fn window(&self, start: usize, width: usize) -> &[f64] {
        &self.rows[start * self.k..(start + width) * self.k]
    }
}

/// Looks up every token (UNK for unseen) and appends PAD rows until the
/// matrix has at least `min_rows` rows.
pub fn embed_sentence(
    tokens: &[String],
    vocab: &Vocabulary,
    embeddings: &EmbeddingMatrix,
    min_rows: usize,
) -> Result<SentenceMatrix> {
    let ids: Vec<usize> = tokens.iter().map(|t| vocab.index_or_unk(t)).collect();
    embed_ids(&ids, embeddings, min_rows)
}

pub(crate) fn embed_ids(ids: &[usize], embeddings: &EmbeddingMatrix, min_rows: usize) -> Result<SentenceMatrix> {
    if ids.is_empty() {
        return Err(Error::EmptySentence);
    }
    let n = ids.len().max(min_rows);
    let k = embeddings.dim;
    let mut rows = Vec::with_capacity(n * k);
    let mut token_ids = Vec::with_capacity(n);
    for &id in ids {
        rows.extend_from_slice(embeddings.row(id));
        token_ids.push(id);
    }
    rows.resize(n * k, 0.0);
    token_ids.resize(n, PAD);
    Ok(SentenceMatrix { rows, n, k, token_ids })
}

/// `c_i = tanh(w · x[i..i+h] + b)` for every window start `i`.
pub fn conv_feature_map(sentence: &SentenceMatrix, filter: ConvFilter<'_>) -> Result<Vec<f64>> {
    if filter.width == 0 || sentence.n < filter.width {
        return Err(Error::WindowTooLarge {
            width: filter.width,
            len: sentence.n,
        });
    }
    debug_assert_eq!(filter.weights.len(), filter.width * sentence.k);
    Ok((0..=sentence.n - filter.width)
        .map(|i| (dot(filter.weights, sentence.window(i, filter.width)) + filter.bias).tanh())
        .collect())
}

/// Maximum value and the smallest index attaining it.
pub fn max_pool(c: &[f64]) -> Result<(f64, usize)> {
    let (&first, rest) = c.split_first().ok_or(Error::EmptyFeatureMap)?;
    let mut best = (first, 0);
    for (i, &v) in rest.iter().enumerate() {
        if v > best.0 {
            best = (v, i + 1);
        }
    }
    Ok(best)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `-ln p[label]`, with the probability clamped at `1e-12`.
pub fn cross_entropy_loss(probabilities: &[f64], label: usize) -> f64 {
    -probabilities[label].max(1e-12).ln()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sums the terms in ascending value order, so the result depends only on the
/// multiset of terms and not on their arrangement.
fn canonical_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub sentence: SentenceMatrix,
    /// One feature map per filter, in bank order.
    pub feature_maps: Vec<Vec<f64>>,
    pub argmax: Vec<usize>,
    /// Pooled features before dropout.
    pub pooled: Vec<f64>,
    /// Dropout keep mask (1 keeps, 0 drops); `None` for a test-mode pass.
    pub mask: Option<Vec<f64>>,
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub labels: LabelSet,
    pub vocab: Vocabulary,
    pub embeddings: EmbeddingMatrix,
    pub banks: Vec<FilterBank>,
    /// Row-major `C × F` softmax weights.
    pub dense: Vec<f64>,
    pub dense_bias: Vec<f64>,
    pub mode: Mode,
}

impl CnnModel {
    /// Builds a vocabulary from `corpus`, initializes embeddings (optionally
    /// from pretrained vectors) and random filters.
    pub fn from_corpus(config: CnnConfig, corpus: &Corpus, pretrained: Option<&Word2Vec>) -> Result<Self> {
        config.validate()?;
        let vocab = build_vocab(corpus, config.min_count);
        let embeddings = init_embeddings(&vocab, pretrained, config.embed_dim, config.init_range, config.seed)?;
        CnnModel::new(config, corpus.label_set.clone(), vocab, embeddings)
    }

    /// Filters are drawn from a Glorot-style uniform range; the softmax layer
    /// starts at zero.
    pub fn new(config: CnnConfig, labels: LabelSet, vocab: Vocabulary, embeddings: EmbeddingMatrix) -> Result<Self> {
        config.validate()?;
        if embeddings.dim != config.embed_dim {
            return Err(Error::DimensionMismatch {
                expected: config.embed_dim,
                got: embeddings.dim,
            });
        }
        if embeddings.rows != vocab.len() {
            return Err(Error::ShapeMismatch(format!(
                "embedding table has {} rows for a vocabulary of {}",
                embeddings.rows,
                vocab.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x636e_6e5f_6669_6c74);
        let k = config.embed_dim;
        let banks = config
            .filter_widths
            .iter()
            .map(|&h| {
                let bound = (6.0 / (h * k + config.filters_per_width) as f64).sqrt();
                FilterBank {
                    width: h,
                    weights: (0..config.filters_per_width * h * k)
                        .map(|_| rng.random_range(-bound..bound))
                        .collect(),
                    bias: vec![0.0; config.filters_per_width],
                }
            })
            .collect();
        let c = labels.len();
        let f = config.num_features();
        Ok(CnnModel {
            config,
            labels,
            vocab,
            embeddings,
            banks,
            dense: vec![0.0; c * f],
            dense_bias: vec![0.0; c],
            mode: Mode::Test,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.dense_bias.len()
    }

    pub fn num_features(&self) -> usize {
        self.banks.iter().map(FilterBank::count).sum()
    }

    pub fn max_width(&self) -> usize {
        self.banks.iter().map(|b| b.width).max().unwrap_or(1)
    }

    pub fn keep_prob(&self) -> f64 {
        1.0 - self.config.dropout
    }

    pub fn token_ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.vocab.index_or_unk(t)).collect()
    }

    /// Samples a dropout keep mask over the pooled features.
    pub fn sample_mask<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let keep = self.keep_prob();
        (0..self.num_features())
            .map(|_| if rng.random_bool(keep) { 1.0 } else { 0.0 })
            .collect()
    }

    /// Forward pass honoring `self.mode`: train mode requires `mask`, test
    /// mode ignores dropout and scales the softmax weights by the keep
    /// probability.
    pub fn forward(&self, tokens: &[String], mask: Option<&[f64]>) -> Result<(Vec<f64>, ForwardCache)> {
        let mask = match (self.mode, mask) {
            (Mode::Train, None) => {
                return Err(Error::ShapeMismatch("train-mode forward needs a dropout mask".into()));
            }
            (Mode::Train, m) => m,
            (Mode::Test, _) => None,
        };
        let cache = self.forward_ids(&self.token_ids(tokens), mask)?;
        Ok((cache.probabilities.clone(), cache))
    }

    /// Test-mode class probabilities.
    pub fn predict(&self, tokens: &[String]) -> Result<Vec<f64>> {
        Ok(self.forward_ids(&self.token_ids(tokens), None)?.probabilities)
    }

    /// Concatenated max-pooled filter outputs, without dropout or scaling.
    pub fn pooled_features(&self, ids: &[usize]) -> Result<Vec<f64>> {
        let sentence = embed_ids(ids, &self.embeddings, self.max_width())?;
        let mut z = Vec::with_capacity(self.num_features());
        let k = self.embeddings.dim;
        for bank in &self.banks {
            for j in 0..bank.count() {
                let c = conv_feature_map(&sentence, bank.filter(j, k))?;
                z.push(max_pool(&c)?.0);
            }
        }
        Ok(z)
    }

    /// Full pass over token ids. `Some(mask)` gives train semantics, `None`
    /// test semantics.
    pub fn forward_ids(&self, ids: &[usize], mask: Option<&[f64]>) -> Result<ForwardCache> {
        let f = self.num_features();
        if let Some(m) = mask {
            if m.len() != f {
                return Err(Error::ShapeMismatch(format!("dropout mask has {} entries, expected {f}", m.len())));
            }
        }
        let sentence = embed_ids(ids, &self.embeddings, self.max_width())?;
        let k = self.embeddings.dim;
        let mut feature_maps = Vec::with_capacity(f);
        let mut argmax = Vec::with_capacity(f);
        let mut pooled = Vec::with_capacity(f);
        for bank in &self.banks {
            for j in 0..bank.count() {
                let c = conv_feature_map(&sentence, bank.filter(j, k))?;
                let (v, i) = max_pool(&c)?;
                pooled.push(v);
                argmax.push(i);
                feature_maps.push(c);
            }
        }

        let scale = if mask.is_some() { 1.0 } else { self.keep_prob() };
        let mut terms = vec![0.0; f];
        let logits: Vec<f64> = (0..self.num_classes())
            .map(|c| {
                let row = &self.dense[c * f..(c + 1) * f];
                for (j, t) in terms.iter_mut().enumerate() {
                    let z = match mask {
                        Some(m) => pooled[j] * m[j],
                        None => pooled[j],
                    };
                    *t = row[j] * z;
                }
                scale * canonical_sum(&mut terms) + self.dense_bias[c]
            })
            .collect();
        let probabilities = softmax(&logits);
        Ok(ForwardCache {
            sentence,
            feature_maps,
            argmax,
            pooled,
            mask: mask.map(<[f64]>::to_vec),
            logits,
            probabilities,
        })
    }

    /// Rescales every softmax weight row whose L2 norm exceeds `cap` back to
    /// norm `cap`.
    pub fn renorm_dense_rows(&mut self, cap: f64) {
        let f = self.num_features();
        for row in self.dense.chunks_mut(f) {
            cap_norm(row, cap);
        }
    }

    pub fn renorm_filters(&mut self, cap: f64) {
        let k = self.embeddings.dim;
        for bank in &mut self.banks {
            for w in bank.weights.chunks_mut(bank.width * k) {
                cap_norm(w, cap);
            }
        }
    }

    /// Applies the configured norm constraints.
    pub fn apply_constraints(&mut self) {
        if let Some(cap) = self.config.norm_cap {
            self.renorm_dense_rows(cap);
            if self.config.cap_filters {
                self.renorm_filters(cap);
            }
        }
    }
}

/// Standalone form of [`CnnModel::renorm_dense_rows`].
pub fn renorm_dense_rows(model: &mut CnnModel, cap: f64) {
    model.renorm_dense_rows(cap);
}

fn cap_norm(w: &mut [f64], cap: f64) {
    let norm = dot(w, w).sqrt();
    if norm > cap {
        let scale = cap / norm;
        for x in w.iter_mut() {
            *x *= scale;
        }
    }
}

/// The pooled feature vector of a document, always computed as a test-mode
/// first layer regardless of the model's mode flag.
pub fn extract_features(model: &CnnModel, tokens: &[String]) -> Result<Vec<f64>> {
    model.pooled_features(&model.token_ids(tokens))
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Small random model with nonzero dense weights and biases.
    pub fn random_model(
        seed: u64,
        vocab_words: usize,
        k: usize,
        widths: &[usize],
        per_width: usize,
        classes: usize,
    ) -> CnnModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocab = Vocabulary::from_tokens((0..vocab_words).map(|i| format!("v{i}")));
        let embeddings = init_embeddings(&vocab, None, k, 0.8, seed).unwrap();
        let labels = LabelSet::new((0..classes).map(|i| format!("c{i}"))).unwrap();
        let config = CnnConfig {
            embed_dim: k,
            filter_widths: widths.to_vec(),
            filters_per_width: per_width,
            seed,
            ..CnnConfig::default()
        };
        let mut m = CnnModel::new(config, labels, vocab, embeddings).unwrap();
        for bank in &mut m.banks {
            for w in &mut bank.weights {
                *w = rng.random_range(-1.0..1.0);
            }
            for b in &mut bank.bias {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        for w in m.dense.iter_mut().chain(m.dense_bias.iter_mut()) {
            *w = rng.random_range(-1.0..1.0);
        }
        m
    }

    pub fn tokens(ids: &[usize]) -> Vec<String> {
        ids.iter().map(|i| format!("v{i}")).collect()
    }
}
