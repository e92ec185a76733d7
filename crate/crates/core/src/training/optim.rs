use serde::{Deserialize, Serialize};

use crate::cnn::{CnnGradients, CnnModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OptimizerConfig {
    Adadelta { rho: f64, eps: f64 },
    Sgd { lr: f64 },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adadelta { rho: 0.95, eps: 1e-6 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            OptimizerConfig::Adadelta { rho, eps } => (0.0..1.0).contains(&rho) && eps > 0.0 && eps.is_finite(),
            OptimizerConfig::Sgd { lr } => lr >= 0.0 && lr.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad optimizer settings {self:?}")))
        }
    }
}

/// Running averages of squared gradients and squared updates for one
/// parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdadeltaState {
    pub acc_grad: Vec<f64>,
    pub acc_update: Vec<f64>,
}

impl AdadeltaState {
    pub fn zeros(len: usize) -> Self {
        AdadeltaState {
            acc_grad: vec![0.0; len],
            acc_update: vec![0.0; len],
        }
    }
}

/// In-place Adadelta update:
///
/// ```text
/// E[g²] ← ρ E[g²] + (1-ρ) g²
/// Δ     ← -sqrt(E[Δ²] + ε) / sqrt(E[g²] + ε) · g
/// E[Δ²] ← ρ E[Δ²] + (1-ρ) Δ²
/// θ     ← θ + Δ
/// ```
pub fn adadelta_step(params: &mut [f64], grads: &[f64], state: &mut AdadeltaState, rho: f64, eps: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.acc_grad.len() || params.len() != state.acc_update.len() {
        return Err(Error::ShapeMismatch(format!(
            "adadelta: {} params, {} grads, {} accumulators",
            params.len(),
            grads.len(),
            state.acc_grad.len()
        )));
    }
    for i in 0..params.len() {
        update_one(&mut params[i], grads[i], &mut state.acc_grad[i], &mut state.acc_update[i], rho, eps);
    }
    Ok(())
}

#[inline]
fn update_one(param: &mut f64, g: f64, acc_grad: &mut f64, acc_update: &mut f64, rho: f64, eps: f64) {
    let eg = rho * *acc_grad + (1.0 - rho) * g * g;
    let delta = -((*acc_update + eps).sqrt() / (eg + eps).sqrt()) * g;
    *acc_grad = eg;
    *acc_update = rho * *acc_update + (1.0 - rho) * delta * delta;
    *param += delta;
}

/// Optimizer state for every CNN parameter block. The embedding block keeps
/// dense accumulators while its gradients arrive sparse; rows without a
/// gradient are treated as having a zero gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    pub steps: u64,
    /// One entry per block of [`CnnModel::dense_blocks_mut`].
    pub blocks: Vec<AdadeltaState>,
    pub embeddings: AdadeltaState,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, model: &mut CnnModel) -> Self {
        let (blocks, embeddings) = match config {
            OptimizerConfig::Adadelta { .. } => (
                model.dense_blocks_mut().iter().map(|b| AdadeltaState::zeros(b.len())).collect(),
                AdadeltaState::zeros(model.embeddings.values.len()),
            ),
            OptimizerConfig::Sgd { .. } => (Vec::new(), AdadeltaState::zeros(0)),
        };
        OptimizerState {
            config,
            steps: 0,
            blocks,
            embeddings,
        }
    }

    pub fn step(&mut self, model: &mut CnnModel, grads: &CnnGradients) -> Result<()> {
        let dim = model.embeddings.dim;
        let trainable = model.embeddings.trainable;
        match self.config {
            OptimizerConfig::Sgd { lr } => {
                for (p, g) in model.dense_blocks_mut().into_iter().zip(grads.dense_blocks()) {
                    if p.len() != g.len() {
                        return Err(Error::ShapeMismatch("gradient block size".into()));
                    }
                    for (x, d) in p.iter_mut().zip(g) {
                        *x -= lr * d;
                    }
                }
                if trainable {
                    for (&row, g) in &grads.embeddings {
                        for (x, d) in model.embeddings.row_mut(row).iter_mut().zip(g) {
                            *x -= lr * d;
                        }
                    }
                }
            }
            OptimizerConfig::Adadelta { rho, eps } => {
                let params = model.dense_blocks_mut();
                let gblocks = grads.dense_blocks();
                if params.len() != self.blocks.len() || gblocks.len() != self.blocks.len() {
                    return Err(Error::ShapeMismatch("optimizer state does not match model".into()));
                }
                for ((p, g), s) in params.into_iter().zip(gblocks).zip(&mut self.blocks) {
                    adadelta_step(p, g, s, rho, eps)?;
                }
                if trainable {
                    if self.embeddings.acc_grad.len() != model.embeddings.values.len() {
                        return Err(Error::ShapeMismatch("embedding accumulators".into()));
                    }
                    let mut sparse = grads.embeddings.iter().peekable();
                    let acc = &mut self.embeddings;
                    for row in 0..model.embeddings.rows {
                        let base = row * dim;
                        match sparse.next_if(|(r, _)| **r == row) {
                            Some((_, g)) => {
                                let values = model.embeddings.row_mut(row);
                                for q in 0..dim {
                                    let i = base + q;
                                    update_one(&mut values[q], g[q], &mut acc.acc_grad[i], &mut acc.acc_update[i], rho, eps);
                                }
                            }
                            None => {
                                // Zero gradient: the update is zero, accumulators decay.
                                for i in base..base + dim {
                                    acc.acc_grad[i] *= rho;
                                    acc.acc_update[i] *= rho;
                                }
                            }
                        }
                    }
                }
            }
        }
        self.steps += 1;
        Ok(())
    }

    /// Accumulator vectors in a fixed order, for persistence.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("opt.{i}.acc_grad"), b.acc_grad.as_slice()));
            out.push((format!("opt.{i}.acc_update"), b.acc_update.as_slice()));
        }
        if matches!(self.config, OptimizerConfig::Adadelta { .. }) {
            out.push(("opt.embeddings.acc_grad".into(), self.embeddings.acc_grad.as_slice()));
            out.push(("opt.embeddings.acc_update".into(), self.embeddings.acc_update.as_slice()));
        }
        out
    }
}
