//! Training loop, optimizers, evaluation and checkpoints for both
//! classifiers.

pub mod checkpoint;
pub mod metrics;
pub mod optim;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cnn::{backward, cross_entropy_loss, CnnGradients, CnnModel};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::fasttext::{Bag, FastTextModel, FastTextSchedule};
use crate::model::{Classifier, Model};

pub use checkpoint::{load_model, save_model, Checkpoint};
pub use metrics::{argmax, evaluate, ConfusionMatrix, Evaluation};
pub use optim::{adadelta_step, AdadeltaState, OptimizerConfig, OptimizerState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Optimizer for the CNN. The baseline always uses its own linearly
    /// decaying SGD.
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Reduce per-document gradients serially in document order.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerConfig::default(),
            batch_size: 50,
            max_epochs: 25,
            patience: 5,
            seed: 0,
            deterministic: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidConfig(
                "batch_size, patience and max_epochs must be positive".into(),
            ));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose snapshot was returned.
    pub selected_epoch: usize,
}

impl TrainHistory {
    pub fn selected(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|e| e.epoch == self.selected_epoch)
    }
}

/// Patience-based stopping on validation accuracy.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stagnant: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            stagnant: 0,
        }
    }

    /// Records an epoch result. Only a strict improvement resets patience, so
    /// ties keep the earlier epoch.
    pub fn observe(&mut self, epoch: usize, val_accuracy: f64) -> StopDecision {
        let improved = self.best.is_none_or(|(_, best)| val_accuracy > best);
        if improved {
            self.best = Some((epoch, val_accuracy));
            self.stagnant = 0;
        } else {
            self.stagnant += 1;
        }
        StopDecision {
            improved,
            stop: self.stagnant >= self.patience,
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }
}

/// Best-validation model plus the training state it was taken with.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: TrainHistory,
    pub optimizer: Option<OptimizerState>,
    pub schedule: Option<FastTextSchedule>,
}

pub fn train(model: Model, train: &Corpus, val: &Corpus, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(model, train, val, config, |_| {})
}

/// Like [`train`], calling `on_epoch` after every epoch.
pub fn train_with(
    model: Model,
    train: &Corpus,
    val: &Corpus,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if train.label_set != *model.label_set() || val.label_set != *model.label_set() {
        return Err(Error::InvalidLabelSet("training corpora and model use different label sets".into()));
    }
    match model {
        Model::Cnn(m) => train_cnn(m, train, val, config, &mut on_epoch),
        Model::FastText(m) => train_fasttext(m, train, val, config, &mut on_epoch),
    }
}

fn train_cnn(
    mut model: CnnModel,
    train: &Corpus,
    val: &Corpus,
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    let data: Vec<(Vec<usize>, usize)> = train
        .documents
        .iter()
        .map(|d| (model.token_ids(&d.tokens), d.label))
        .collect();
    let mut optimizer = OptimizerState::new(config.optimizer, &mut model);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut history = TrainHistory::default();
    let mut best = (model.clone(), optimizer.clone());

    for epoch in 1..=config.max_epochs {
        let train_loss = cnn_epoch(&mut model, &mut optimizer, &data, &mut rng, config)?;
        let record = EpochRecord {
            epoch,
            train_loss,
            train_accuracy: evaluate(&model, train)?.accuracy,
            val_accuracy: evaluate(&model, val)?.accuracy,
        };
        log::info!(
            "cnn epoch {epoch}: loss {:.5} train acc {:.4} val acc {:.4}",
            record.train_loss,
            record.train_accuracy,
            record.val_accuracy
        );
        let decision = stopper.observe(epoch, record.val_accuracy);
        if decision.improved {
            best = (model.clone(), optimizer.clone());
        }
        on_epoch(&record);
        history.epochs.push(record);
        if decision.stop {
            break;
        }
    }
    history.selected_epoch = stopper.best_epoch().unwrap_or(1);
    Ok(TrainOutcome {
        model: Model::Cnn(best.0),
        history,
        optimizer: Some(best.1),
        schedule: None,
    })
}

/// One shuffled pass of minibatch updates; returns the mean train-mode loss.
pub fn cnn_epoch(
    model: &mut CnnModel,
    optimizer: &mut OptimizerState,
    data: &[(Vec<usize>, usize)],
    rng: &mut ChaCha8Rng,
    config: &TrainConfig,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let mut total_loss = 0.0;
    for batch in order.chunks(config.batch_size) {
        let masks: Vec<Vec<f64>> = batch.iter().map(|_| model.sample_mask(rng)).collect();
        let (grads, loss) = batch_gradient(model, data, batch, &masks, config.deterministic)?;
        total_loss += loss;
        optimizer.step(model, &grads)?;
        model.apply_constraints();
    }
    Ok(total_loss / data.len() as f64)
}

/// Mean gradient over `batch` and the summed loss.
pub fn batch_gradient(
    model: &CnnModel,
    data: &[(Vec<usize>, usize)],
    batch: &[usize],
    masks: &[Vec<f64>],
    deterministic: bool,
) -> Result<(CnnGradients, f64)> {
    let per_doc: Vec<(CnnGradients, f64)> = batch
        .par_iter()
        .zip(masks.par_iter())
        .map(|(&i, mask)| {
            let (ids, label) = &data[i];
            let cache = model.forward_ids(ids, Some(mask))?;
            let loss = cross_entropy_loss(&cache.probabilities, *label);
            Ok((backward(model, &cache, *label)?, loss))
        })
        .collect::<Result<_>>()?;

    let mut loss = 0.0;
    let mut sum = if deterministic {
        let mut acc = CnnGradients::zeros_like(model);
        for (g, l) in &per_doc {
            acc.add_assign(g);
            loss += l;
        }
        acc
    } else {
        loss = per_doc.iter().map(|(_, l)| l).sum();
        per_doc
            .into_par_iter()
            .map(|(g, _)| g)
            .reduce(
                || CnnGradients::zeros_like(model),
                |mut a, b| {
                    a.add_assign(&b);
                    a
                },
            )
    };
    sum.scale(1.0 / batch.len() as f64);
    Ok((sum, loss))
}

fn train_fasttext(
    mut model: FastTextModel,
    train: &Corpus,
    val: &Corpus,
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    let bags: Vec<(Bag, usize)> = train.documents.iter().map(|d| (model.bag(&d.tokens), d.label)).collect();
    let mut schedule = FastTextSchedule::new(model.config.lr0, config.max_epochs, bags.len(), config.seed);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut history = TrainHistory::default();
    let mut best = (model.clone(), schedule.clone());

    for epoch in 1..=config.max_epochs {
        let train_loss = schedule.run_epoch(&mut model, &bags)?;
        let record = EpochRecord {
            epoch,
            train_loss,
            train_accuracy: evaluate(&model, train)?.accuracy,
            val_accuracy: evaluate(&model, val)?.accuracy,
        };
        log::info!(
            "fasttext epoch {epoch}: loss {:.5} train acc {:.4} val acc {:.4}",
            record.train_loss,
            record.train_accuracy,
            record.val_accuracy
        );
        let decision = stopper.observe(epoch, record.val_accuracy);
        if decision.improved {
            best = (model.clone(), schedule.clone());
        }
        on_epoch(&record);
        history.epochs.push(record);
        if decision.stop {
            break;
        }
    }
    history.selected_epoch = stopper.best_epoch().unwrap_or(1);
    Ok(TrainOutcome {
        model: Model::FastText(best.0),
        history,
        optimizer: None,
        schedule: Some(best.1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::CnnConfig;
    use crate::corpus::{split, synth_generate, SynthConfig};
    use crate::fasttext::FastTextConfig;

    #[test]
    fn early_stopping_on_decreasing_accuracy() {
        let mut s = EarlyStopping::new(1);
        assert_eq!(s.observe(1, 0.9), StopDecision { improved: true, stop: false });
        assert_eq!(s.observe(2, 0.8), StopDecision { improved: false, stop: true });
        assert_eq!(s.best_epoch(), Some(1));
    }

    #[test]
    fn early_stopping_ties_keep_earliest() {
        let mut s = EarlyStopping::new(3);
        s.observe(1, 0.5);
        s.observe(2, 0.7);
        s.observe(3, 0.7);
        assert!(!s.observe(4, 0.6).stop);
        assert_eq!(s.best_epoch(), Some(2));
        assert!(s.observe(5, 0.7).stop);
    }

    fn data() -> (Corpus, Corpus) {
        let s = synth_generate(&SynthConfig {
            num_classes: 3,
            docs_per_class_source: 40,
            docs_per_class_target: 5,
            keyword_rate: 0.5,
            ..SynthConfig::default()
        })
        .unwrap();
        let (tr, va, _) = split(&s.source, (90, 30, 0), 3).unwrap();
        (tr, va)
    }

    fn small_cnn(train: &Corpus) -> Model {
        let config = CnnConfig {
            embed_dim: 8,
            filters_per_width: 4,
            seed: 5,
            ..CnnConfig::default()
        };
        Model::Cnn(CnnModel::from_corpus(config, train, None).unwrap())
    }

    #[test]
    fn deterministic_runs_match() {
        let (tr, va) = data();
        let config = TrainConfig {
            max_epochs: 3,
            batch_size: 10,
            seed: 9,
            ..TrainConfig::default()
        };
        let a = train(small_cnn(&tr), &tr, &va, &config).unwrap();
        let b = train(small_cnn(&tr), &tr, &va, &config).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
        assert_eq!(a.optimizer, b.optimizer);
    }

    #[test]
    fn returned_model_has_best_validation() {
        let (tr, va) = data();
        let config = TrainConfig {
            max_epochs: 6,
            batch_size: 10,
            patience: 2,
            ..TrainConfig::default()
        };
        let out = train(small_cnn(&tr), &tr, &va, &config).unwrap();
        let best = out.history.epochs.iter().map(|e| e.val_accuracy).fold(0.0, f64::max);
        let sel = out.history.selected().unwrap();
        assert_eq!(sel.val_accuracy, best);
        assert_eq!(evaluate(&out.model, &va).unwrap().accuracy, best);
        assert_eq!(evaluate(&out.model, &tr).unwrap().accuracy, sel.train_accuracy);
    }

    #[test]
    fn fasttext_through_trainer() {
        let (tr, va) = data();
        let cfg = FastTextConfig {
            buckets: 1 << 10,
            ..FastTextConfig::default()
        };
        let model = Model::FastText(FastTextModel::from_corpus(cfg, &tr).unwrap());
        let out = train(model, &tr, &va, &TrainConfig { max_epochs: 20, patience: 20, ..TrainConfig::default() }).unwrap();
        assert!(out.history.selected().unwrap().train_accuracy > 0.9);
        assert!(out.schedule.is_some());
    }

    #[test]
    fn renorm_holds_after_every_step() {
        let (tr, _) = data();
        let Model::Cnn(mut m) = small_cnn(&tr) else { unreachable!() };
        m.config.norm_cap = Some(0.05);
        let config = TrainConfig {
            optimizer: OptimizerConfig::Sgd { lr: 0.5 },
            batch_size: 5,
            ..TrainConfig::default()
        };
        let data: Vec<(Vec<usize>, usize)> = tr.documents.iter().map(|d| (m.token_ids(&d.tokens), d.label)).collect();
        let mut opt = OptimizerState::new(config.optimizer, &mut m);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = m.num_features();
        for batch in (0..data.len()).collect::<Vec<_>>().chunks(5) {
            let masks: Vec<Vec<f64>> = batch.iter().map(|_| m.sample_mask(&mut rng)).collect();
            let (g, _) = batch_gradient(&m, &data, batch, &masks, true).unwrap();
            opt.step(&mut m, &g).unwrap();
            m.apply_constraints();
            for row in m.dense.chunks(f) {
                assert!(row.iter().map(|x| x * x).sum::<f64>().sqrt() <= 0.05 + 1e-12);
            }
        }
    }

    #[test]
    fn parallel_reduction_close_to_serial() {
        let (tr, _) = data();
        let Model::Cnn(m) = small_cnn(&tr) else { unreachable!() };
        let data: Vec<(Vec<usize>, usize)> = tr.documents.iter().map(|d| (m.token_ids(&d.tokens), d.label)).collect();
        let batch: Vec<usize> = (0..20).collect();
        let masks = vec![vec![1.0; m.num_features()]; 20];
        let (a, la) = batch_gradient(&m, &data, &batch, &masks, true).unwrap();
        let (b, lb) = batch_gradient(&m, &data, &batch, &masks, false).unwrap();
        assert!((la - lb).abs() < 1e-9);
        for (x, y) in a.dense.iter().zip(&b.dense) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn label_set_mismatch_rejected() {
        let (tr, va) = data();
        let mut other = va.clone();
        other.label_set = crate::corpus::LabelSet::new(["p", "q", "r"]).unwrap();
        assert!(train(small_cnn(&tr), &tr, &other, &TrainConfig::default()).is_err());
    }
}
