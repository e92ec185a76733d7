//! Single-file model container.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SNAP"
//! 4       2     format version, u16 LE (currently 1)
//! 6       1     model kind tag (1 = cnn, 2 = fasttext)
//! 7       8     metadata length M, u64 LE
//! 15      M     metadata, UTF-8 JSON
//! 15+M    8     parameter count P, u64 LE
//! 23+M    8P    parameters, f64 LE, tensors concatenated in metadata order
//! 23+M+8P 4     CRC32C of every preceding byte, u32 LE
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::{AdadeltaState, OptimizerConfig, OptimizerState};
use super::TrainConfig;
use crate::cnn::{CnnConfig, CnnModel, FilterBank, Mode};
use crate::corpus::LabelSet;
use crate::embeddings::{EmbeddingMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::fasttext::{FastTextConfig, FastTextModel, FastTextSchedule};
use crate::model::{Model, ModelKind};

pub const MAGIC: &[u8; 4] = b"SNAP";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 8;

/// A model with the training state it was saved with.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub train_config: Option<TrainConfig>,
    pub optimizer: Option<OptimizerState>,
    pub schedule: Option<ScheduleState>,
}

impl Checkpoint {
    pub fn new(model: Model) -> Self {
        Checkpoint {
            model,
            train_config: None,
            optimizer: None,
            schedule: None,
        }
    }
}

/// Persisted position of a [`FastTextSchedule`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleState {
    pub lr0: f64,
    pub processed: u64,
    pub total: u64,
    pub seed: u64,
    /// ChaCha word position, as a decimal string (u128 does not fit JSON
    /// numbers portably).
    pub rng_word_pos: String,
}

impl From<&FastTextSchedule> for ScheduleState {
    fn from(s: &FastTextSchedule) -> Self {
        ScheduleState {
            lr0: s.lr0,
            processed: s.processed,
            total: s.total,
            seed: s.seed,
            rng_word_pos: s.rng_word_pos().to_string(),
        }
    }
}

impl ScheduleState {
    pub fn restore(&self) -> Result<FastTextSchedule> {
        let pos = self
            .rng_word_pos
            .parse()
            .map_err(|_| Error::CorruptCheckpoint("bad schedule rng position".into()))?;
        Ok(FastTextSchedule::resume(self.lr0, self.processed, self.total, self.seed, pos))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Metadata {
    kind: ModelKind,
    labels: LabelSet,
    vocab: Vocabulary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cnn: Option<CnnMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fasttext: Option<FastTextConfig>,
    train_config: Option<TrainConfig>,
    optimizer: Option<OptimizerMeta>,
    schedule: Option<ScheduleState>,
    tensors: Vec<TensorMeta>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CnnMeta {
    config: CnnConfig,
    mode: Mode,
    embeddings_trainable: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerMeta {
    config: OptimizerConfig,
    steps: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorMeta {
    name: String,
    len: usize,
}

pub fn save_model(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), &encode(checkpoint)?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Loads a checkpoint that must hold a CNN.
pub fn load_cnn(path: impl AsRef<Path>) -> Result<CnnModel> {
    match load_model(path)?.model {
        Model::Cnn(m) => Ok(m),
        other => Err(Error::BadModelKind {
            expected: ModelKind::Cnn.name(),
            found: other.kind().name(),
        }),
    }
}

/// Loads a checkpoint that must hold a baseline model.
pub fn load_fasttext(path: impl AsRef<Path>) -> Result<FastTextModel> {
    match load_model(path)?.model {
        Model::FastText(m) => Ok(m),
        other => Err(Error::BadModelKind {
            expected: ModelKind::FastText.name(),
            found: other.kind().name(),
        }),
    }
}

pub fn encode(checkpoint: &Checkpoint) -> Result<Vec<u8>> {
    let model = &checkpoint.model;
    let mut tensors: Vec<(String, &[f64])> = Vec::new();
    let (labels, vocab, cnn, fasttext) = match model {
        Model::Cnn(m) => {
            tensors.push(("embeddings".into(), &m.embeddings.values));
            for (i, bank) in m.banks.iter().enumerate() {
                tensors.push((format!("filters.{i}.weights"), &bank.weights));
                tensors.push((format!("filters.{i}.bias"), &bank.bias));
            }
            tensors.push(("dense.weights".into(), &m.dense));
            tensors.push(("dense.bias".into(), &m.dense_bias));
            let meta = CnnMeta {
                config: m.config.clone(),
                mode: m.mode,
                embeddings_trainable: m.embeddings.trainable,
            };
            (&m.labels, &m.vocab, Some(meta), None)
        }
        Model::FastText(m) => {
            tensors.push(("word_table".into(), &m.word_table));
            tensors.push(("ngram_table".into(), &m.ngram_table));
            tensors.push(("output.weights".into(), &m.output));
            tensors.push(("output.bias".into(), &m.output_bias));
            (&m.labels, &m.vocab, None, Some(m.config.clone()))
        }
    };
    if let Some(opt) = &checkpoint.optimizer {
        tensors.extend(opt.tensors());
    }

    let meta = Metadata {
        kind: model.kind(),
        labels: labels.clone(),
        vocab: vocab.clone(),
        cnn,
        fasttext,
        train_config: checkpoint.train_config.clone(),
        optimizer: checkpoint.optimizer.as_ref().map(|o| OptimizerMeta {
            config: o.config,
            steps: o.steps,
        }),
        schedule: checkpoint.schedule.clone(),
        tensors: tensors
            .iter()
            .map(|(name, t)| TensorMeta {
                name: name.clone(),
                len: t.len(),
            })
            .collect(),
    };
    let meta_json = serde_json::to_vec(&meta)?;
    let count: usize = tensors.iter().map(|(_, t)| t.len()).sum();

    let mut out = Vec::with_capacity(HEADER_LEN + meta_json.len() + 8 + count * 8 + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(model.kind().tag());
    out.extend_from_slice(&(meta_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta_json);
    out.extend_from_slice(&(count as u64).to_le_bytes());
    for (_, t) in &tensors {
        for v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32c::crc32c(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN + 8 + 4 {
        return Err(Error::CorruptCheckpoint("file too short".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    let (body, crc) = bytes.split_at(bytes.len() - 4);
    if crc32c::crc32c(body) != u32::from_le_bytes(crc.try_into().expect("4 bytes")) {
        return Err(Error::ChecksumMismatch);
    }

    let kind = ModelKind::from_tag(body[6]).ok_or_else(|| Error::CorruptCheckpoint(format!("unknown kind tag {}", body[6])))?;
    let meta_len = read_u64(body, 7)? as usize;
    let meta_end = HEADER_LEN
        .checked_add(meta_len)
        .filter(|&e| e + 8 <= body.len())
        .ok_or_else(|| Error::CorruptCheckpoint("metadata length out of range".into()))?;
    let meta: Metadata = serde_json::from_slice(&body[HEADER_LEN..meta_end])?;
    if meta.kind != kind {
        return Err(Error::CorruptCheckpoint("kind tag disagrees with metadata".into()));
    }
    let count = read_u64(body, meta_end)? as usize;
    let payload = &body[meta_end + 8..];
    if payload.len() != count.saturating_mul(8) {
        return Err(Error::CorruptCheckpoint("parameter payload has the wrong length".into()));
    }
    if meta.tensors.iter().map(|t| t.len).sum::<usize>() != count {
        return Err(Error::CorruptCheckpoint("tensor table does not cover the payload".into()));
    }

    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut tensors = Tensors(
        meta.tensors
            .iter()
            .map(|t| (t.name.clone(), values.by_ref().take(t.len).collect::<Vec<f64>>()))
            .collect(),
    );

    let model = match kind {
        ModelKind::Cnn => {
            let cm = meta.cnn.ok_or_else(|| Error::CorruptCheckpoint("missing cnn section".into()))?;
            let config = cm.config;
            config.validate()?;
            let k = config.embed_dim;
            let c = meta.labels.len();
            let f = config.num_features();
            let embeddings = EmbeddingMatrix {
                values: tensors.take("embeddings", meta.vocab.len() * k)?,
                rows: meta.vocab.len(),
                dim: k,
                trainable: cm.embeddings_trainable,
            };
            let banks = config
                .filter_widths
                .iter()
                .enumerate()
                .map(|(i, &h)| {
                    Ok(FilterBank {
                        width: h,
                        weights: tensors.take(&format!("filters.{i}.weights"), config.filters_per_width * h * k)?,
                        bias: tensors.take(&format!("filters.{i}.bias"), config.filters_per_width)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Model::Cnn(CnnModel {
                dense: tensors.take("dense.weights", c * f)?,
                dense_bias: tensors.take("dense.bias", c)?,
                config,
                labels: meta.labels,
                vocab: meta.vocab,
                embeddings,
                banks,
                mode: cm.mode,
            })
        }
        ModelKind::FastText => {
            let config = meta
                .fasttext
                .ok_or_else(|| Error::CorruptCheckpoint("missing fasttext section".into()))?;
            config.validate()?;
            let d = config.dim;
            let c = meta.labels.len();
            Model::FastText(FastTextModel {
                word_table: tensors.take("word_table", meta.vocab.len() * d)?,
                ngram_table: tensors.take("ngram_table", config.buckets * d)?,
                output: tensors.take("output.weights", c * d)?,
                output_bias: tensors.take("output.bias", c)?,
                config,
                labels: meta.labels,
                vocab: meta.vocab,
            })
        }
    };

    let optimizer = match meta.optimizer {
        None => None,
        Some(om) => {
            let Model::Cnn(m) = &model else {
                return Err(Error::CorruptCheckpoint("optimizer state without a cnn".into()));
            };
            let mut state = OptimizerState::new(om.config, &mut m.clone());
            state.steps = om.steps;
            for (i, block) in state.blocks.iter_mut().enumerate() {
                let len = block.acc_grad.len();
                *block = AdadeltaState {
                    acc_grad: tensors.take(&format!("opt.{i}.acc_grad"), len)?,
                    acc_update: tensors.take(&format!("opt.{i}.acc_update"), len)?,
                };
            }
            if matches!(om.config, OptimizerConfig::Adadelta { .. }) {
                let len = state.embeddings.acc_grad.len();
                state.embeddings = AdadeltaState {
                    acc_grad: tensors.take("opt.embeddings.acc_grad", len)?,
                    acc_update: tensors.take("opt.embeddings.acc_update", len)?,
                };
            }
            Some(state)
        }
    };
    if let Some(name) = tensors.0.first().map(|(n, _)| n.clone()) {
        return Err(Error::CorruptCheckpoint(format!("unexpected tensor {name:?}")));
    }

    Ok(Checkpoint {
        model,
        train_config: meta.train_config,
        optimizer,
        schedule: meta.schedule,
    })
}

fn read_u64(bytes: &[u8], at: usize) -> Result<u64> {
    bytes
        .get(at..at + 8)
        .map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")))
        .ok_or_else(|| Error::CorruptCheckpoint("truncated header".into()))
}

struct Tensors(Vec<(String, Vec<f64>)>);

impl Tensors {
    fn take(&mut self, name: &str, len: usize) -> Result<Vec<f64>> {
        let pos = self
            .0
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::CorruptCheckpoint(format!("missing tensor {name:?}")))?;
        let (_, values) = self.0.remove(pos);
        if values.len() != len {
            return Err(Error::CorruptCheckpoint(format!(
                "tensor {name:?} has {} values, expected {len}",
                values.len()
            )));
        }
        Ok(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::{backward, testutil::random_model};
    use crate::embeddings::Vocabulary;
    use crate::training::optim::OptimizerConfig;

    fn cnn_checkpoint() -> Checkpoint {
        let mut m = random_model(3, 6, 3, &[2, 3], 2, 3);
        let mut opt = OptimizerState::new(OptimizerConfig::default(), &mut m);
        let cache = m.forward_ids(&[2, 3, 4], Some(&[1.0; 4])).unwrap();
        let g = backward(&m, &cache, 1).unwrap();
        opt.step(&mut m, &g).unwrap();
        Checkpoint {
            model: Model::Cnn(m),
            train_config: Some(TrainConfig::default()),
            optimizer: Some(opt),
            schedule: None,
        }
    }

    fn fasttext_model() -> FastTextModel {
        let vocab = Vocabulary::from_tokens(["a", "b"].map(String::from));
        let config = FastTextConfig {
            buckets: 32,
            dim: 3,
            ..FastTextConfig::default()
        };
        FastTextModel::new(config, LabelSet::new(["x", "y"]).unwrap(), vocab).unwrap()
    }

    #[test]
    fn cnn_round_trip_is_exact() {
        let ck = cnn_checkpoint();
        let bytes = encode(&ck).unwrap();
        let back = decode(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn fasttext_round_trip_is_exact() {
        let ck = Checkpoint::new(Model::FastText(fasttext_model()));
        let back = decode(&encode(&ck).unwrap()).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn corrupted_payload_byte_fails_checksum() {
        let bytes = encode(&cnn_checkpoint()).unwrap();
        for at in [bytes.len() / 2, bytes.len() - 10, 20] {
            let mut bad = bytes.clone();
            bad[at] ^= 0x40;
            assert!(matches!(decode(&bad), Err(Error::ChecksumMismatch)), "byte {at}");
        }
    }

    #[test]
    fn header_errors() {
        let mut bytes = encode(&cnn_checkpoint()).unwrap();
        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        assert!(matches!(decode(&wrong_magic), Err(Error::BadMagic)));
        bytes[4] = 9;
        assert!(matches!(decode(&bytes), Err(Error::VersionUnsupported(9))));
        assert!(matches!(decode(b"SN"), Err(Error::BadMagic)));
    }

    #[test]
    fn kind_is_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_model(&cnn_checkpoint(), &path).unwrap();
        assert!(load_cnn(&path).is_ok());
        assert!(matches!(
            load_fasttext(&path),
            Err(Error::BadModelKind { expected: "fasttext", found: "cnn" })
        ));
    }

    #[test]
    fn optimizer_state_resumes_bit_identically() {
        let base = cnn_checkpoint();
        let Model::Cnn(m0) = base.model.clone() else { unreachable!() };
        let mut opt0 = base.optimizer.clone().unwrap();
        let restored = decode(&encode(&base).unwrap()).unwrap();
        let Model::Cnn(mut m1) = restored.model else { unreachable!() };
        let mut opt1 = restored.optimizer.unwrap();
        let mut m0 = m0;
        for ids in [[2usize, 5, 6], [3, 3, 1], [7, 2, 4]] {
            let g0 = backward(&m0, &m0.forward_ids(&ids, Some(&[1.0, 0.0, 1.0, 1.0])).unwrap(), 2).unwrap();
            let g1 = backward(&m1, &m1.forward_ids(&ids, Some(&[1.0, 0.0, 1.0, 1.0])).unwrap(), 2).unwrap();
            opt0.step(&mut m0, &g0).unwrap();
            opt1.step(&mut m1, &g1).unwrap();
        }
        assert_eq!(m0, m1);
        assert_eq!(opt0, opt1);
    }

    #[test]
    fn schedule_state_resumes() {
        let mut s = FastTextSchedule::new(0.25, 3, 10, 42);
        let mut m = fasttext_model();
        let bags: Vec<_> = (0..10).map(|i| (m.bag(&["a".into(), "b".into()]), i % 2)).collect();
        s.run_epoch(&mut m, &bags).unwrap();
        let mut restored = ScheduleState::from(&s).restore().unwrap();
        let mut m2 = m.clone();
        s.run_epoch(&mut m, &bags).unwrap();
        restored.run_epoch(&mut m2, &bags).unwrap();
        assert_eq!(m, m2);
        assert_eq!(s.processed, restored.processed);
    }
}
