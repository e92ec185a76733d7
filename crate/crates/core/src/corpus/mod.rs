//! Labeled text corpora: tokenization, loading, splitting, and a synthetic
//! two-domain generator.

mod synth;

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use synth::{synth_generate, SynthConfig};

/// Default number of tokens kept per document.
pub const DEFAULT_MAX_LEN: usize = 100;

/// The 27 industrial job categories used as the default taxonomy.
pub const JOB_CATEGORIES: [&str; 27] = [
    "Accounting/Finance",
    "Healthcare",
    "Non-Profit/Volunteering",
    "Administrative",
    "Computer/Internet",
    "Pharmaceutical/Bio-tech",
    "Arts/Entertainment/Publishing",
    "Hospitality/Travel",
    "Real Estate",
    "Banking/Loans",
    "Human Resources",
    "Restaurant/Food service",
    "Construction/Facilities",
    "Insurance",
    "Retail",
    "Customer Service",
    "Law Enforcement/Security",
    "Sales",
    "Education/Training",
    "Legal",
    "Telecommunications",
    "Engineering/Architecture",
    "Manufacturing/Mechanical",
    "Transportation/Logistics",
    "Government/Military",
    "Marketing/Advertising/PR",
    "Upper Management/Consulting",
];

/// Lowercases `text`, splits on runs of non-alphanumeric characters and keeps
/// at most `max_len` tokens.
pub fn tokenize(text: &str, max_len: usize) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .take(max_len)
        .map(|t| t.to_lowercase())
        .collect()
}

/// Ordered list of category names. A name's position is its class index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSet {
    names: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl LabelSet {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::InvalidLabelSet("label set is empty".into()));
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::InvalidLabelSet(format!("empty label name at position {i}")));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::InvalidLabelSet(format!("duplicate label {name:?}")));
            }
        }
        Ok(LabelSet { names, index })
    }

    /// The 27-category job taxonomy.
    pub fn job_categories() -> Self {
        LabelSet::new(JOB_CATEGORIES).expect("static taxonomy is valid")
    }

    /// Reads one category name per line; blank lines are ignored.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        LabelSet::new(
            text.lines()
                .map(|l| l.trim_end_matches('\r').trim())
                .filter(|l| !l.is_empty()),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = self.names.join("\n");
        out.push('\n');
        crate::io::write_atomic(path.as_ref(), out.as_bytes())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl TryFrom<Vec<String>> for LabelSet {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        LabelSet::new(names)
    }
}

impl From<LabelSet> for Vec<String> {
    fn from(set: LabelSet) -> Self {
        set.names
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DomainTag {
    #[default]
    Source,
    Target,
    Other,
}

impl DomainTag {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainTag::Source => "source",
            DomainTag::Target => "target",
            DomainTag::Other => "other",
        }
    }
}

impl fmt::Display for DomainTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub label: usize,
    pub tokens: Vec<String>,
    pub domain: DomainTag,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub label_set: LabelSet,
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn new(label_set: LabelSet, documents: Vec<Document>) -> Result<Self> {
        if let Some(doc) = documents.iter().find(|d| d.label >= label_set.len()) {
            return Err(Error::UnknownLabel(format!("index {} (document {})", doc.label, doc.id)));
        }
        Ok(Corpus { label_set, documents })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn num_tokens(&self) -> usize {
        self.documents.iter().map(|d| d.tokens.len()).sum()
    }

    /// Writes the corpus as jsonl with space-joined tokens as the text.
    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.to_jsonl().as_bytes())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for doc in &self.documents {
            let record = JsonRecord {
                label: self.label_set.name(doc.label).to_string(),
                text: doc.tokens.join(" "),
                id: Some(doc.id.clone()),
                domain: Some(doc.domain),
            };
            out.push_str(&serde_json::to_string(&record).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Tsv,
}

impl CorpusFormat {
    /// `.tsv` selects tsv; anything else is read as jsonl.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") => CorpusFormat::Tsv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

/// One line of the jsonl corpus format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JsonRecord {
    pub label: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainTag>,
}

/// Options controlling how raw records become documents.
#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub format: CorpusFormat,
    pub max_len: usize,
}

impl LoadOptions {
    pub fn for_path(path: &Path) -> Self {
        LoadOptions {
            format: CorpusFormat::from_path(path),
            max_len: DEFAULT_MAX_LEN,
        }
    }
}

/// Result of loading, with the number of records dropped for tokenizing to
/// nothing.
#[derive(Debug)]
pub struct Loaded {
    pub corpus: Corpus,
    pub dropped_empty: usize,
}

/// Loads a corpus whose labels must all belong to `label_set`.
pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat, label_set: &LabelSet) -> Result<Corpus> {
    let opts = LoadOptions {
        format,
        max_len: DEFAULT_MAX_LEN,
    };
    Ok(load_corpus_with(path.as_ref(), opts, LabelMode::Fixed(label_set))?.corpus)
}

/// Loads a corpus, building the label set from labels in order of first
/// appearance. Used where labels are carried along but not validated.
pub fn load_corpus_open(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Loaded> {
    load_corpus_with(path.as_ref(), opts, LabelMode::Open)
}

/// Loads a corpus against a fixed label set.
pub fn load_corpus_checked(path: impl AsRef<Path>, opts: LoadOptions, label_set: &LabelSet) -> Result<Loaded> {
    load_corpus_with(path.as_ref(), opts, LabelMode::Fixed(label_set))
}

enum LabelMode<'a> {
    Fixed(&'a LabelSet),
    Open,
}

fn load_corpus_with(path: &Path, opts: LoadOptions, mode: LabelMode<'_>) -> Result<Loaded> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut open_names: Vec<String> = Vec::new();
    let mut open_index: HashMap<String, usize> = HashMap::new();
    let mut documents = Vec::new();
    let mut dropped_empty = 0;

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let record = match opts.format {
            CorpusFormat::Jsonl => serde_json::from_str::<JsonRecord>(line)
                .map_err(|e| Error::MalformedRecord { line: line_no, reason: e.to_string() })?,
            CorpusFormat::Tsv => {
                let (label, text) = line.split_once('\t').ok_or_else(|| Error::MalformedRecord {
                    line: line_no,
                    reason: "expected label<TAB>text".into(),
                })?;
                JsonRecord {
                    label: label.to_string(),
                    text: text.to_string(),
                    id: None,
                    domain: None,
                }
            }
        };

        let label = match &mode {
            LabelMode::Fixed(set) => set
                .index_of(&record.label)
                .ok_or_else(|| Error::UnknownLabel(record.label.clone()))?,
            LabelMode::Open => {
                if record.label.is_empty() {
                    return Err(Error::MalformedRecord { line: line_no, reason: "empty label".into() });
                }
                let next = open_names.len();
                *open_index.entry(record.label.clone()).or_insert_with(|| {
                    open_names.push(record.label.clone());
                    next
                })
            }
        };

        let tokens = tokenize(&record.text, opts.max_len);
        if tokens.is_empty() {
            dropped_empty += 1;
            continue;
        }
        documents.push(Document {
            id: record.id.unwrap_or_else(|| format!("line-{line_no}")),
            label,
            tokens,
            domain: record.domain.unwrap_or_default(),
        });
    }

    if dropped_empty > 0 {
        log::warn!("{}: dropped {dropped_empty} records with no tokens", path.display());
    }

    let label_set = match mode {
        LabelMode::Fixed(set) => set.clone(),
        LabelMode::Open => {
            if open_names.is_empty() {
                return Err(Error::EmptyCorpus);
            }
            LabelSet::new(open_names)?
        }
    };
    Ok(Loaded {
        corpus: Corpus { label_set, documents },
        dropped_empty,
    })
}

/// Shuffles with `seed` and partitions into (train, validation, test) of the
/// requested sizes. Documents beyond the three sizes are left out.
pub fn split(corpus: &Corpus, sizes: (usize, usize, usize), seed: u64) -> Result<(Corpus, Corpus, Corpus)> {
    let (n_train, n_val, n_test) = sizes;
    let needed = n_train + n_val + n_test;
    if needed > corpus.len() {
        return Err(Error::InsufficientData {
            needed,
            available: corpus.len(),
        });
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let take = |range: std::ops::Range<usize>| Corpus {
        label_set: corpus.label_set.clone(),
        documents: order[range].iter().map(|&i| corpus.documents[i].clone()).collect(),
    };
    Ok((
        take(0..n_train),
        take(n_train..n_train + n_val),
        take(n_train + n_val..needed),
    ))
}
