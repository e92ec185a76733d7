use std::collections::BTreeMap;

use super::{CnnModel, ForwardCache};
use crate::embeddings::PAD;
use crate::error::{Error, Result};

/// Gradients of the cross-entropy loss. Embedding gradients are kept only
/// for the rows that took part in the forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnGradients {
    pub embeddings: BTreeMap<usize, Vec<f64>>,
    /// Per bank, laid out like [`super::FilterBank::weights`].
    pub filter_weights: Vec<Vec<f64>>,
    pub filter_bias: Vec<Vec<f64>>,
    pub dense: Vec<f64>,
    pub dense_bias: Vec<f64>,
}

impl CnnGradients {
    pub fn zeros_like(model: &CnnModel) -> Self {
        CnnGradients {
            embeddings: BTreeMap::new(),
            filter_weights: model.banks.iter().map(|b| vec![0.0; b.weights.len()]).collect(),
            filter_bias: model.banks.iter().map(|b| vec![0.0; b.bias.len()]).collect(),
            dense: vec![0.0; model.dense.len()],
            dense_bias: vec![0.0; model.dense_bias.len()],
        }
    }

    pub fn add_assign(&mut self, other: &CnnGradients) {
        for (row, g) in &other.embeddings {
            let dst = self.embeddings.entry(*row).or_insert_with(|| vec![0.0; g.len()]);
            add_into(dst, g);
        }
        for (a, b) in self.filter_weights.iter_mut().zip(&other.filter_weights) {
            add_into(a, b);
        }
        for (a, b) in self.filter_bias.iter_mut().zip(&other.filter_bias) {
            add_into(a, b);
        }
        add_into(&mut self.dense, &other.dense);
        add_into(&mut self.dense_bias, &other.dense_bias);
    }

    pub fn scale(&mut self, factor: f64) {
        let all = self
            .embeddings
            .values_mut()
            .chain(self.filter_weights.iter_mut())
            .chain(self.filter_bias.iter_mut())
            .chain([&mut self.dense, &mut self.dense_bias]);
        for block in all {
            block.iter_mut().for_each(|g| *g *= factor);
        }
    }

    /// Dense parameter blocks in the order of [`CnnModel::dense_blocks_mut`].
    pub fn dense_blocks(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.filter_weights.len() + 2);
        for (w, b) in self.filter_weights.iter().zip(&self.filter_bias) {
            out.push(w.as_slice());
            out.push(b.as_slice());
        }
        out.push(&self.dense);
        out.push(&self.dense_bias);
        out
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl CnnModel {
    /// Filter weights and biases per bank, then softmax weights and biases.
    pub fn dense_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.banks.len() + 2);
        for bank in &mut self.banks {
            out.push(bank.weights.as_mut_slice());
            out.push(bank.bias.as_mut_slice());
        }
        out.push(self.dense.as_mut_slice());
        out.push(self.dense_bias.as_mut_slice());
        out
    }
}

/// Exact gradient of `-ln p[label]` for a train-mode forward pass.
pub fn backward(model: &CnnModel, cache: &ForwardCache, label: usize) -> Result<CnnGradients> {
    let f = model.num_features();
    let c_count = model.num_classes();
    let k = model.embeddings.dim;
    let mask = cache
        .mask
        .as_deref()
        .ok_or_else(|| Error::StaleCache("backward needs a train-mode pass with a dropout mask".into()))?;
    if cache.pooled.len() != f
        || mask.len() != f
        || cache.probabilities.len() != c_count
        || cache.sentence.k != k
        || cache.argmax.len() != f
    {
        return Err(Error::StaleCache("cached shapes differ from the model".into()));
    }
    if label >= c_count {
        return Err(Error::ShapeMismatch(format!("label {label} out of range for {c_count} classes")));
    }

    let mut grads = CnnGradients::zeros_like(model);

    let mut d_logits = cache.probabilities.clone();
    d_logits[label] -= 1.0;

    let mut d_pooled = vec![0.0; f];
    for (c, &dl) in d_logits.iter().enumerate() {
        grads.dense_bias[c] = dl;
        let w_row = &model.dense[c * f..(c + 1) * f];
        let g_row = &mut grads.dense[c * f..(c + 1) * f];
        for j in 0..f {
            g_row[j] = dl * cache.pooled[j] * mask[j];
            d_pooled[j] += w_row[j] * dl;
        }
    }

    let sentence = &cache.sentence;
    let mut d_rows = vec![0.0; sentence.n * k];
    let mut j = 0;
    for (b, bank) in model.banks.iter().enumerate() {
        let len = bank.width * k;
        for local in 0..bank.count() {
            let dz = d_pooled[j] * mask[j];
            if dz != 0.0 {
                let pos = cache.argmax[j];
                let map = &cache.feature_maps[j];
                if pos + bank.width > sentence.n || pos >= map.len() {
                    return Err(Error::StaleCache("argmax outside the sentence".into()));
                }
                let value = map[pos];
                let du = dz * (1.0 - value * value);
                grads.filter_bias[b][local] += du;
                let window = &sentence.rows[pos * k..pos * k + len];
                let weights = &bank.weights[local * len..(local + 1) * len];
                let gw = &mut grads.filter_weights[b][local * len..(local + 1) * len];
                let dx = &mut d_rows[pos * k..pos * k + len];
                for t in 0..len {
                    gw[t] += du * window[t];
                    dx[t] += du * weights[t];
                }
            }
            j += 1;
        }
    }

    if model.embeddings.trainable {
        for (i, &id) in sentence.token_ids.iter().enumerate() {
            if id == PAD {
                continue;
            }
            let d = &d_rows[i * k..(i + 1) * k];
            let dst = grads.embeddings.entry(id).or_insert_with(|| vec![0.0; k]);
            add_into(dst, d);
        }
    }
    Ok(grads)
}
