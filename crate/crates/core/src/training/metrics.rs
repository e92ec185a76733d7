use rayon::prelude::*;

use crate::corpus::{Corpus, LabelSet};
use crate::error::{Error, Result};
use crate::model::Classifier;

/// Index of the largest probability; ties go to the smallest index.
pub fn argmax(probabilities: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probabilities.iter().enumerate().skip(1) {
        if p > probabilities[best] {
            best = i;
        }
    }
    best
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.classes + predicted] += 1;
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    pub fn row_total(&self, truth: usize) -> u64 {
        self.counts[truth * self.classes..(truth + 1) * self.classes].iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }

    /// Per-class recall; 0 for classes without documents.
    pub fn recall(&self) -> Vec<f64> {
        (0..self.classes)
            .map(|c| match self.row_total(c) {
                0 => 0.0,
                n => self.get(c, c) as f64 / n as f64,
            })
            .collect()
    }

    /// CSV with a header of predicted class names and one row per true class.
    pub fn to_csv(&self, labels: &LabelSet) -> Result<Vec<u8>> {
        let mut header: Vec<&str> = vec!["true\\predicted"];
        header.extend(labels.names().iter().map(String::as_str));
        let rows = (0..self.classes).map(|t| {
            std::iter::once(labels.name(t).to_string())
                .chain((0..self.classes).map(move |p| self.get(t, p).to_string()))
                .collect::<Vec<_>>()
        });
        crate::io::csv_bytes(&header, rows)
    }

    pub fn recall_csv(&self, labels: &LabelSet) -> Result<Vec<u8>> {
        let recall = self.recall();
        let rows = (0..self.classes).map(|c| {
            vec![
                labels.name(c).to_string(),
                self.row_total(c).to_string(),
                self.get(c, c).to_string(),
                format!("{:.6}", recall[c]),
            ]
        });
        crate::io::csv_bytes(&["label", "support", "correct", "recall"], rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub recall: Vec<f64>,
}

/// Predicts every document (in parallel, aggregated in corpus order) and
/// tallies the confusion matrix.
pub fn evaluate<M: Classifier + ?Sized>(model: &M, corpus: &Corpus) -> Result<Evaluation> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let classes = model.label_set().len();
    if corpus.label_set != *model.label_set() {
        return Err(Error::InvalidLabelSet("corpus and model use different label sets".into()));
    }
    let predictions: Vec<usize> = corpus
        .documents
        .par_iter()
        .map(|d| model.predict(&d.tokens).map(|p| argmax(&p)))
        .collect::<Result<_>>()?;
    let mut confusion = ConfusionMatrix::new(classes);
    for (doc, &pred) in corpus.documents.iter().zip(&predictions) {
        confusion.add(doc.label, pred);
    }
    Ok(Evaluation {
        accuracy: confusion.accuracy(),
        recall: confusion.recall(),
        confusion,
    })
}
