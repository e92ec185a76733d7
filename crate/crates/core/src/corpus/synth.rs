//! Synthetic two-domain corpus generator.
//!
//! Every class owns a disjoint set of keywords taken from a shared
//! vocabulary. Non-keyword positions are filled with domain noise: the
//! source domain draws noise partly from a class-specific slice of its noise
//! vocabulary (a spurious cue that does not transfer), the target domain
//! draws uniformly from a disjoint noise vocabulary.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Document, DomainTag, LabelSet, JOB_CATEGORIES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub class_keyword_count: usize,
    pub shared_vocab_size: usize,
    pub domain_noise_vocab_size: usize,
    /// Inclusive token-count range of a document.
    pub doc_length_range: (usize, usize),
    /// Probability that a token is a class keyword.
    pub keyword_rate: f64,
    /// Probability that a source noise token comes from the class's own noise
    /// slice instead of the whole source noise vocabulary.
    pub source_noise_affinity: f64,
    pub docs_per_class_source: usize,
    pub docs_per_class_target: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_classes: 6,
            class_keyword_count: 10,
            shared_vocab_size: 200,
            domain_noise_vocab_size: 300,
            doc_length_range: (8, 20),
            keyword_rate: 0.3,
            source_noise_affinity: 0.8,
            docs_per_class_source: 300,
            docs_per_class_target: 60,
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("synth: {m}")));
        if self.num_classes == 0
            || self.class_keyword_count == 0
            || self.shared_vocab_size == 0
            || self.domain_noise_vocab_size == 0
            || self.docs_per_class_source == 0
            || self.docs_per_class_target == 0
        {
            return bad("all counts must be positive");
        }
        if !(self.keyword_rate > 0.0 && self.keyword_rate <= 1.0) {
            return bad("keyword_rate must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.source_noise_affinity) {
            return bad("source_noise_affinity must lie in [0, 1]");
        }
        if self.num_classes * self.class_keyword_count > self.shared_vocab_size {
            return bad("shared vocabulary too small for disjoint class keyword sets");
        }
        if self.domain_noise_vocab_size < self.num_classes {
            return bad("noise vocabulary must have at least one word per class");
        }
        let (lo, hi) = self.doc_length_range;
        if lo == 0 || lo > hi {
            return bad("doc_length_range must be a non-empty range of positive lengths");
        }
        Ok(())
    }

    pub fn label_set(&self) -> LabelSet {
        if self.num_classes <= JOB_CATEGORIES.len() {
            LabelSet::new(JOB_CATEGORIES[..self.num_classes].iter().copied())
        } else {
            LabelSet::new((0..self.num_classes).map(|i| format!("class{i:03}")))
        }
        .expect("generated names are unique")
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpora {
    pub source: Corpus,
    pub target: Corpus,
    /// Keywords of each class, indexed by class.
    pub class_keywords: Vec<Vec<String>>,
}

pub fn synth_generate(config: &SynthConfig) -> Result<SynthCorpora> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let c = config.num_classes;

    let mut shared: Vec<String> = (0..config.shared_vocab_size).map(|i| format!("w{i:05}")).collect();
    shared.shuffle(&mut rng);
    let class_keywords: Vec<Vec<String>> = shared
        .chunks(config.class_keyword_count)
        .take(c)
        .map(|chunk| {
            let mut kw = chunk.to_vec();
            kw.sort();
            kw
        })
        .collect();

    let source_noise: Vec<String> = (0..config.domain_noise_vocab_size).map(|i| format!("src{i:05}")).collect();
    let target_noise: Vec<String> = (0..config.domain_noise_vocab_size).map(|i| format!("tgt{i:05}")).collect();
    let slice_len = config.domain_noise_vocab_size / c;

    let label_set = config.label_set();
    let build = |domain: DomainTag, per_class: usize, rng: &mut ChaCha8Rng| {
        let (noise, prefix) = match domain {
            DomainTag::Source => (&source_noise, "src"),
            _ => (&target_noise, "tgt"),
        };
        let mut docs = Vec::with_capacity(per_class * c);
        for label in 0..c {
            let own_noise = &noise[label * slice_len..(label + 1) * slice_len];
            for i in 0..per_class {
                let len = rng.random_range(config.doc_length_range.0..=config.doc_length_range.1);
                let tokens = (0..len)
                    .map(|_| {
                        let word = if rng.random_bool(config.keyword_rate) {
                            class_keywords[label].choose(rng)
                        } else if domain == DomainTag::Source && rng.random_bool(config.source_noise_affinity) {
                            own_noise.choose(rng)
                        } else {
                            noise.choose(rng)
                        };
                        word.expect("vocabularies are non-empty").clone()
                    })
                    .collect();
                docs.push(Document {
                    id: format!("{prefix}-{label:03}-{i:05}"),
                    label,
                    tokens,
                    domain,
                });
            }
        }
        docs.shuffle(rng);
        docs
    };

    let source_docs = build(DomainTag::Source, config.docs_per_class_source, &mut rng);
    let target_docs = build(DomainTag::Target, config.docs_per_class_target, &mut rng);
    Ok(SynthCorpora {
        source: Corpus::new(label_set.clone(), source_docs)?,
        target: Corpus::new(label_set, target_docs)?,
        class_keywords,
    })
}
