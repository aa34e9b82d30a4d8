//! Staged fine-tuning: train on the first stage's corpora (MNLI), then keep
//! training the resulting weights on the next stage's corpora (ANLI), and so
//! on. Every stage leaves a checkpoint directory whose parent pointer names
//! the stage it started from.
//!
//! Checkpoint directory layout:
//!
//! ```text
//! <store>/<id>/checkpoint.json   id, parent_id, stage_name
//! <store>/<id>/config.json       full TrainConfig snapshot
//! <store>/<id>/report.json       TrainReport
//! <store>/<id>/model.json        vocabulary, architecture and weights
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{concat_corpora, load_nli_corpus, CorpusDescriptor, DataError, TextPair};
use crate::model::{cross_entropy, Adam, ModelError, NliEncoder, TinyEncoderSpec, WEIGHTS_FILE};
use crate::nli::NliExample;
use crate::scorer::{EntailmentScorer, ModelScorer, ScoreError, MIN_SCORER_MAX_LEN};

/// `base_model_ref` value that starts from a freshly initialized encoder.
pub const TINY_BASE: &str = "tiny";

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("stage {stage:?} has no training examples")]
    EmptyCorpus { stage: String },
    #[error("evaluation corpus is empty")]
    EmptyEval,
    #[error("cannot resolve base model {0:?}: expected \"tiny\" or a checkpoint directory")]
    UnknownBase(String),
    #[error("stage {stage:?} diverged at step {step}: loss is not finite")]
    Diverged {
        stage: String,
        step: usize,
        report: Box<TrainReport>,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("checkpoint store {path}: {message}")]
    Store { path: PathBuf, message: String },
}

fn default_lr() -> f64 {
    2e-5
}
fn default_epochs() -> usize {
    2
}
fn default_batch() -> usize {
    16
}
fn default_max_len() -> usize {
    128
}
fn default_seed() -> u64 {
    42
}
fn default_clip() -> f64 {
    1.0
}
fn default_base() -> String {
    TINY_BASE.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub name: String,
    pub corpora: Vec<CorpusDescriptor>,
    /// Train on the union of this stage's and all earlier stages' corpora
    /// instead of this stage's corpora alone.
    #[serde(default)]
    pub include_previous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// `"tiny"` for a fresh encoder shaped by `model`, or a checkpoint
    /// directory holding initial weights.
    #[serde(default = "default_base")]
    pub base_model_ref: String,
    #[serde(default)]
    pub model: TinyEncoderSpec,
    pub stages: Vec<StageConfig>,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs_per_stage: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub weight_decay: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    #[serde(default = "default_clip")]
    pub max_grad_norm: f64,
    pub eval_corpus: CorpusDescriptor,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: String| Err(TrainError::Config(m));
        if self.stages.is_empty() {
            return fail("at least one stage is required".into());
        }
        for (i, stage) in self.stages.iter().enumerate() {
            if stage.name.is_empty()
                || !stage
                    .name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || "-_+.".contains(c))
            {
                return fail(format!("stage name {:?} must be non-empty [A-Za-z0-9-_+.]", stage.name));
            }
            if self.stages[..i].iter().any(|s| s.name == stage.name) {
                return fail(format!("duplicate stage name {:?}", stage.name));
            }
        }
        if self.epochs_per_stage == 0 || self.batch_size == 0 {
            return fail("epochs_per_stage and batch_size must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.max_len < MIN_SCORER_MAX_LEN {
            return fail(format!("max_len must be at least {MIN_SCORER_MAX_LEN}"));
        }
        if self.max_len > self.model.max_positions && self.base_model_ref == TINY_BASE {
            return fail(format!(
                "max_len {} exceeds the encoder's {} positions",
                self.max_len, self.model.max_positions
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, TrainError> {
        toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean batch loss after every optimizer step.
    pub loss_curve: Vec<LossPoint>,
    pub epoch_mean_loss: Vec<f64>,
    /// 3-way argmax accuracy on the evaluation corpus after each epoch.
    pub dev_accuracy_per_epoch: Vec<f64>,
    pub n_train_examples: usize,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub id: String,
    pub parent_id: Option<String>,
    pub stage_name: String,
    pub config_snapshot: TrainConfig,
    pub metrics: TrainReport,
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    id: String,
    parent_id: Option<String>,
    stage_name: String,
}

/// A directory of checkpoint directories. One training run writes to a
/// store at a time.
#[derive(Debug, Clone)]
pub struct CheckpointStore {
    root: PathBuf,
}

impl CheckpointStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, TrainError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| TrainError::Store {
            path: root.clone(),
            message: e.to_string(),
        })?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    fn store_err(&self, path: &Path, e: impl ToString) -> TrainError {
        TrainError::Store {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    pub fn save(&self, checkpoint: &Checkpoint, model: &NliEncoder) -> Result<PathBuf, TrainError> {
        let dir = self.dir(&checkpoint.id);
        fs::create_dir_all(&dir).map_err(|e| self.store_err(&dir, e))?;
        let meta = CheckpointMeta {
            id: checkpoint.id.clone(),
            parent_id: checkpoint.parent_id.clone(),
            stage_name: checkpoint.stage_name.clone(),
        };
        let files = [
            ("checkpoint.json", serde_json::to_string_pretty(&meta)),
            ("config.json", serde_json::to_string_pretty(&checkpoint.config_snapshot)),
            ("report.json", serde_json::to_string_pretty(&checkpoint.metrics)),
        ];
        for (name, json) in files {
            let path = dir.join(name);
            let json = json.map_err(|e| self.store_err(&path, e))?;
            fs::write(&path, json + "\n").map_err(|e| self.store_err(&path, e))?;
        }
        model.save(&dir)?;
        Ok(dir)
    }

    pub fn load(&self, id: &str) -> Result<(Checkpoint, NliEncoder), TrainError> {
        let dir = self.dir(id);
        let read = |name: &str| -> Result<String, TrainError> {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|e| self.store_err(&path, e))
        };
        let parse_err = |e: serde_json::Error| self.store_err(&dir, e);
        let meta: CheckpointMeta = serde_json::from_str(&read("checkpoint.json")?).map_err(parse_err)?;
        let config_snapshot = serde_json::from_str(&read("config.json")?).map_err(parse_err)?;
        let metrics = serde_json::from_str(&read("report.json")?).map_err(parse_err)?;
        let model = NliEncoder::load(&dir)?;
        Ok((
            Checkpoint {
                id: meta.id,
                parent_id: meta.parent_id,
                stage_name: meta.stage_name,
                config_snapshot,
                metrics,
            },
            model,
        ))
    }
}

/// Where a stage's weights come from.
#[derive(Debug, Clone, Copy)]
pub enum StageInit<'a> {
    /// Resolve `config.base_model_ref`.
    Base,
    /// Continue from a checkpoint in the store.
    Checkpoint(&'a Checkpoint),
}

pub fn checkpoint_id(stage_index: usize, stage_name: &str) -> String {
    format!("{:02}-{}", stage_index + 1, stage_name)
}

fn load_corpora(descriptors: &[CorpusDescriptor]) -> Result<Vec<Vec<NliExample>>, TrainError> {
    descriptors.iter().map(|d| Ok(load_nli_corpus(d)?.examples)).collect()
}

/// Training examples of one stage in their fixed (seeded) order.
pub fn stage_examples(config: &TrainConfig, stage_index: usize) -> Result<Vec<NliExample>, TrainError> {
    let stage = &config.stages[stage_index];
    let mut descriptors: Vec<CorpusDescriptor> = Vec::new();
    if stage.include_previous {
        for earlier in &config.stages[..stage_index] {
            descriptors.extend(earlier.corpora.iter().cloned());
        }
    }
    descriptors.extend(stage.corpora.iter().cloned());
    let corpora = load_corpora(&descriptors)?;
    Ok(concat_corpora(corpora, config.seed.wrapping_add(stage_index as u64)))
}

fn resolve_base(config: &TrainConfig) -> Result<NliEncoder, TrainError> {
    if config.base_model_ref == TINY_BASE {
        let mut texts = Vec::new();
        for stage in &config.stages {
            for corpus in load_corpora(&stage.corpora)? {
                for ex in corpus {
                    texts.push(ex.premise);
                    texts.push(ex.hypothesis);
                }
            }
        }
        return NliEncoder::init(&config.model, texts.iter().map(String::as_str), config.seed)
            .map_err(TrainError::Config);
    }
    let dir = Path::new(&config.base_model_ref);
    if dir.join(WEIGHTS_FILE).is_file() {
        return Ok(NliEncoder::load(dir)?);
    }
    Err(TrainError::UnknownBase(config.base_model_ref.clone()))
}

/// Fraction of examples whose argmax label (ties toward entailment, then
/// neutral) equals the gold label.
pub fn eval_nli(scorer: &dyn EntailmentScorer, examples: &[NliExample]) -> Result<f64, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::EmptyEval);
    }
    let pairs: Vec<TextPair<'_>> = examples
        .iter()
        .map(|e| TextPair {
            premise: &e.premise,
            hypothesis: &e.hypothesis,
        })
        .collect();
    let scores = scorer.score_batch(&pairs)?;
    let hits = scores
        .iter()
        .zip(examples)
        .filter(|(s, e)| s.argmax() == e.label)
        .count();
    Ok(hits as f64 / examples.len() as f64)
}

/// [`eval_nli`] for a stored checkpoint and a corpus on disk.
pub fn eval_checkpoint(
    store: &CheckpointStore,
    checkpoint_id: &str,
    corpus: &CorpusDescriptor,
    max_len: usize,
) -> Result<f64, TrainError> {
    let (_, model) = store.load(checkpoint_id)?;
    let examples = load_nli_corpus(corpus)?.examples;
    eval_nli(&ModelScorer::new(model, max_len, 64, checkpoint_id), &examples)
}

fn epoch_order(n: usize, seed: u64, stage_index: usize, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let key = seed ^ ((stage_index as u64) << 32) ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(key));
    order
}

/// Trains one stage and stores its checkpoint.
pub fn train_stage(
    config: &TrainConfig,
    stage_index: usize,
    init: StageInit<'_>,
    store: &CheckpointStore,
) -> Result<Checkpoint, TrainError> {
    config.validate()?;
    let stage = config
        .stages
        .get(stage_index)
        .ok_or_else(|| TrainError::Config(format!("no stage at index {stage_index}")))?;
    let examples = stage_examples(config, stage_index)?;
    if examples.is_empty() {
        return Err(TrainError::EmptyCorpus {
            stage: stage.name.clone(),
        });
    }
    let eval_examples = load_nli_corpus(&config.eval_corpus)?.examples;
    if eval_examples.is_empty() {
        return Err(TrainError::EmptyEval);
    }

    let (mut model, parent_id) = match init {
        StageInit::Base => (resolve_base(config)?, None),
        StageInit::Checkpoint(parent) => (store.load(&parent.id)?.1, Some(parent.id.clone())),
    };
    if config.max_len > model.config.max_positions {
        return Err(TrainError::Config(format!(
            "max_len {} exceeds the encoder's {} positions",
            config.max_len, model.config.max_positions
        )));
    }

    let encoded = examples
        .iter()
        .map(|e| {
            Ok((
                model.encode(&e.premise, &e.hypothesis, config.max_len)?,
                e.label.index(),
            ))
        })
        .collect::<Result<Vec<_>, TrainError>>()?;

    let mut adam = Adam::new(&model.params, config.learning_rate, config.weight_decay);
    let mut report = TrainReport {
        n_train_examples: examples.len(),
        ..Default::default()
    };
    let mut step = 0;
    for epoch in 0..config.epochs_per_stage {
        let order = epoch_order(encoded.len(), config.seed, stage_index, epoch);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let per_example: Vec<_> = batch
                .par_iter()
                .map(|&i| {
                    let (enc, label) = &encoded[i];
                    let (logits, cache) = model.logits(enc);
                    let (loss, dlogits) = cross_entropy(logits, *label);
                    let mut grads = model.params.zeros_like();
                    model.params.backward(&model.config, &cache, dlogits, &mut grads);
                    (loss, grads)
                })
                .collect();

            let mut grads = model.params.zeros_like();
            let mut batch_loss = 0.0;
            for (loss, g) in &per_example {
                batch_loss += loss;
                grads.add_scaled(g, 1.0 / batch.len() as f64);
            }
            batch_loss /= batch.len() as f64;
            step += 1;
            if !batch_loss.is_finite() {
                report.failed = true;
                return Err(TrainError::Diverged {
                    stage: stage.name.clone(),
                    step,
                    report: Box::new(report),
                });
            }
            report.loss_curve.push(LossPoint { step, loss: batch_loss });
            epoch_loss += batch_loss * batch.len() as f64;

            if config.max_grad_norm > 0.0 {
                let norm = grads.global_norm();
                if norm > config.max_grad_norm {
                    grads.add_scaled(&grads.clone(), config.max_grad_norm / norm - 1.0);
                }
            }
            adam.step(&mut model.params, &grads);
        }
        report.epoch_mean_loss.push(epoch_loss / encoded.len() as f64);

        let scorer = ModelScorer::new(model.clone(), config.max_len, 64, "dev");
        let acc = eval_nli(&scorer, &eval_examples)?;
        log::info!(
            "stage {} epoch {}: mean loss {:.4}, dev accuracy {:.4}",
            stage.name,
            epoch + 1,
            report.epoch_mean_loss[epoch],
            acc
        );
        report.dev_accuracy_per_epoch.push(acc);
    }

    let checkpoint = Checkpoint {
        id: checkpoint_id(stage_index, &stage.name),
        parent_id,
        stage_name: stage.name.clone(),
        config_snapshot: config.clone(),
        metrics: report,
    };
    store.save(&checkpoint, &model)?;
    Ok(checkpoint)
}

/// A pipeline that stopped at `failed_stage`. Checkpoints of the stages
/// before it are in `completed` and remain in the store.
#[derive(Debug, Error)]
#[error("stage {failed_stage:?} failed after {} completed stage(s): {source}", .completed.len())]
pub struct PipelineError {
    pub completed: Vec<Checkpoint>,
    pub failed_stage: String,
    #[source]
    pub source: TrainError,
}

/// Runs every stage in order, each one starting from the previous stage's
/// checkpoint.
pub fn run_pipeline(config: &TrainConfig, store: &CheckpointStore) -> Result<Vec<Checkpoint>, PipelineError> {
    let mut done: Vec<Checkpoint> = Vec::with_capacity(config.stages.len());
    if let Err(source) = config.validate() {
        return Err(PipelineError {
            completed: done,
            failed_stage: config.stages.first().map(|s| s.name.clone()).unwrap_or_default(),
            source,
        });
    }
    for (i, stage) in config.stages.iter().enumerate() {
        let init = match done.last() {
            Some(prev) => StageInit::Checkpoint(prev),
            None => StageInit::Base,
        };
        match train_stage(config, i, init, store) {
            Ok(checkpoint) => done.push(checkpoint),
            Err(source) => {
                return Err(PipelineError {
                    completed: done,
                    failed_stage: stage.name.clone(),
                    source,
                })
            }
        }
    }
    Ok(done)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CorpusFormat, Split};
    use crate::nli::{EntailmentScore, NliLabel};
    use crate::scorer::LookupTable;
    use crate::synth;
    use rand::Rng;

    fn tiny_config(dir: &Path, train_n: usize) -> TrainConfig {
        let train = dir.join("train.tsv");
        let dev = dir.join("dev.tsv");
        synth::write_mnli_tsv(&train, &synth::nli_examples(train_n, 1, "mnli"), None).unwrap();
        synth::write_mnli_tsv(&dev, &synth::nli_examples(30, 2, "mnli"), None).unwrap();
        TrainConfig {
            base_model_ref: TINY_BASE.into(),
            model: TinyEncoderSpec {
                hidden: 16,
                heads: 2,
                ff: 32,
                layers: 1,
                max_positions: 64,
                max_vocab: None,
            },
            stages: vec![StageConfig {
                name: "mnli".into(),
                corpora: vec![CorpusDescriptor::new(
                    "mnli",
                    &train,
                    CorpusFormat::MnliTsv,
                    Split::Train,
                )],
                include_previous: false,
            }],
            learning_rate: 1e-3,
            epochs_per_stage: 1,
            batch_size: 8,
            max_len: 64,
            seed: 3,
            weight_decay: 0.0,
            max_grad_norm: 1.0,
            eval_corpus: CorpusDescriptor::new("dev", &dev, CorpusFormat::MnliTsv, Split::Dev),
        }
    }

    #[test]
    fn perfect_and_uniform_scorers() {
        let examples = synth::nli_examples(60, 8, "x");
        let mut perfect = LookupTable::default();
        for e in &examples {
            perfect.insert(&e.premise, &e.hypothesis, EntailmentScore::one_hot(e.label));
        }
        assert_eq!(eval_nli(&perfect, &examples).unwrap(), 1.0);
        // uniform scores always pick entailment, a third of a balanced corpus
        let uniform = LookupTable::default();
        assert!((eval_nli(&uniform, &examples).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(eval_nli(&uniform, &[]), Err(TrainError::EmptyEval)));
    }

    #[test]
    fn seeded_lookup_accuracy_matches_hand_count() {
        let examples = synth::nli_examples(60, 21, "x");
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut table = LookupTable::default();
        let mut expected_hits = 0;
        for e in &examples {
            let raw: [f64; 3] = [rng.random(), rng.random(), rng.random()];
            let total: f64 = raw.iter().sum();
            let s =
                EntailmentScore::new(raw[0] / total, raw[1] / total, 1.0 - raw[0] / total - raw[1] / total).unwrap();
            // independent count: index of the strict maximum of the raw draws
            let best = (0..3).fold(0, |b, i| if raw[i] > raw[b] { i } else { b });
            if NliLabel::ALL[best] == e.label {
                expected_hits += 1;
            }
            table.insert(&e.premise, &e.hypothesis, s);
        }
        let acc = eval_nli(&table, &examples).unwrap();
        assert_eq!(acc, expected_hits as f64 / 60.0);
    }

    #[test]
    fn eval_is_order_invariant() {
        let mut examples = synth::nli_examples(30, 5, "x");
        let mut table = LookupTable::default();
        for (i, e) in examples.iter().enumerate() {
            let label = NliLabel::ALL[(i * 7) % 3];
            table.insert(&e.premise, &e.hypothesis, EntailmentScore::one_hot(label));
        }
        let a = eval_nli(&table, &examples).unwrap();
        examples.reverse();
        assert_eq!(a, eval_nli(&table, &examples).unwrap());
    }

    #[test]
    fn config_validation_and_toml() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path(), 30);
        assert!(cfg.validate().is_ok());
        cfg.stages.clear();
        assert!(cfg.validate().is_err());

        let text = r#"
            learning_rate = 0.001
            [eval_corpus]
            name = "dev"
            path = "dev.tsv"
            format = "mnli-tsv"
            split = "dev"
            [[stages]]
            name = "mnli"
            corpora = [{ name = "mnli", path = "train.tsv", format = "mnli-tsv" }]
            [[stages]]
            name = "anli"
            include_previous = true
            corpora = [{ name = "anli-r1", path = "r1.jsonl", format = "anli-jsonl" }]
        "#;
        let cfg = TrainConfig::from_toml(text).unwrap();
        assert_eq!(cfg.stages.len(), 2);
        assert_eq!((cfg.epochs_per_stage, cfg.batch_size, cfg.max_len), (2, 16, 128));
        assert!(cfg.stages[1].include_previous);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn single_stage_produces_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path(), 48);
        let store = CheckpointStore::open(dir.path().join("store")).unwrap();
        let ck = train_stage(&cfg, 0, StageInit::Base, &store).unwrap();
        assert_eq!(ck.parent_id, None);
        assert_eq!(ck.metrics.loss_curve.len(), 6);
        assert_eq!(ck.metrics.dev_accuracy_per_epoch.len(), 1);
        assert!(ck.metrics.loss_curve.windows(2).all(|w| w[0].step < w[1].step));
        let (loaded, _) = store.load(&ck.id).unwrap();
        assert_eq!(loaded, ck);
    }

    #[test]
    fn empty_stage_is_rejected_before_training() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path(), 3);
        let empty = dir.path().join("empty.tsv");
        synth::write_mnli_tsv(&empty, &[], None).unwrap();
        cfg.stages[0].corpora[0].path = empty;
        let store = CheckpointStore::open(dir.path().join("store")).unwrap();
        assert!(matches!(
            train_stage(&cfg, 0, StageInit::Base, &store),
            Err(TrainError::EmptyCorpus { .. })
        ));
        assert!(fs::read_dir(store.root()).unwrap().next().is_none());
    }

    #[test]
    fn divergence_is_reported_with_partial_report() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path(), 48);
        cfg.learning_rate = 1e300;
        cfg.max_grad_norm = 0.0;
        let store = CheckpointStore::open(dir.path().join("store")).unwrap();
        match train_stage(&cfg, 0, StageInit::Base, &store) {
            Err(TrainError::Diverged { report, step, .. }) => {
                assert!(report.failed);
                assert_eq!(report.loss_curve.len(), step - 1);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
