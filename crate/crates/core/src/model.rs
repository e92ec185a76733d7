use serde::{Deserialize, Serialize};

use crate::cnn::CnnModel;
use crate::corpus::LabelSet;
use crate::error::Result;
use crate::fasttext::FastTextModel;

/// Anything that maps a tokenized document to class probabilities.
pub trait Classifier: Sync {
    fn label_set(&self) -> &LabelSet;

    /// Test-mode class probabilities.
    fn predict(&self, tokens: &[String]) -> Result<Vec<f64>>;
}

impl Classifier for CnnModel {
    fn label_set(&self) -> &LabelSet {
        &self.labels
    }

    fn predict(&self, tokens: &[String]) -> Result<Vec<f64>> {
        CnnModel::predict(self, tokens)
    }
}

impl Classifier for FastTextModel {
    fn label_set(&self) -> &LabelSet {
        &self.labels
    }

    fn predict(&self, tokens: &[String]) -> Result<Vec<f64>> {
        FastTextModel::predict(self, tokens)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cnn,
    FastText,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cnn => "cnn",
            ModelKind::FastText => "fasttext",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            ModelKind::Cnn => 1,
            ModelKind::FastText => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(ModelKind::Cnn),
            2 => Some(ModelKind::FastText),
            _ => None,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cnn" => Ok(ModelKind::Cnn),
            "fasttext" => Ok(ModelKind::FastText),
            other => Err(format!("unknown model kind {other:?} (expected cnn or fasttext)")),
        }
    }
}

/// Either classifier, as stored in a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Cnn(CnnModel),
    FastText(FastTextModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Cnn(_) => ModelKind::Cnn,
            Model::FastText(_) => ModelKind::FastText,
        }
    }

    pub fn max_len(&self) -> usize {
        match self {
            Model::Cnn(m) => m.config.max_len,
            Model::FastText(m) => m.config.max_len,
        }
    }
}

impl Classifier for Model {
    fn label_set(&self) -> &LabelSet {
        match self {
            Model::Cnn(m) => &m.labels,
            Model::FastText(m) => &m.labels,
        }
    }

    fn predict(&self, tokens: &[String]) -> Result<Vec<f64>> {
        match self {
            Model::Cnn(m) => m.predict(tokens),
            Model::FastText(m) => m.predict(tokens),
        }
    }
}
