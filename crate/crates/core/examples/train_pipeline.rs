//! Two-stage fine-tuning of the tiny encoder on generated corpora: MNLI
//! first, then ANLI rounds on top of the MNLI checkpoint.
//!
//! cargo run --release --example train_pipeline [-- <work dir>]

use std::path::PathBuf;

use entail_rank::data::{CorpusDescriptor, CorpusFormat, Split};
use entail_rank::finetune::{run_pipeline, CheckpointStore, StageConfig, TrainConfig, TINY_BASE};
use entail_rank::model::TinyEncoderSpec;
use entail_rank::synth;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let work = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("entail-rank-train"));
    std::fs::create_dir_all(&work)?;

    let mnli = work.join("mnli_train.tsv");
    let anli = work.join("anli_r1_train.jsonl");
    let dev = work.join("mnli_dev.tsv");
    synth::write_mnli_tsv(&mnli, &synth::nli_examples(2000, 11, "mnli"), Some(50))?;
    synth::write_anli_jsonl(&anli, &synth::nli_examples(600, 12, "r1"))?;
    synth::write_mnli_tsv(&dev, &synth::nli_examples(300, 13, "dev"), None)?;

    let config = TrainConfig {
        base_model_ref: TINY_BASE.into(),
        model: TinyEncoderSpec::default(),
        stages: vec![
            StageConfig {
                name: "mnli".into(),
                corpora: vec![CorpusDescriptor::new(
                    "mnli",
                    &mnli,
                    CorpusFormat::MnliTsv,
                    Split::Train,
                )],
                include_previous: false,
            },
            StageConfig {
                name: "anli".into(),
                corpora: vec![CorpusDescriptor::new(
                    "anli-r1",
                    &anli,
                    CorpusFormat::AnliJsonl,
                    Split::Train,
                )],
                include_previous: false,
            },
        ],
        learning_rate: 1e-3,
        epochs_per_stage: 3,
        batch_size: 16,
        max_len: 128,
        seed: 7,
        weight_decay: 0.01,
        max_grad_norm: 1.0,
        eval_corpus: CorpusDescriptor::new("dev", &dev, CorpusFormat::MnliTsv, Split::Dev),
    };

    let store = CheckpointStore::open(work.join("checkpoints"))?;
    for ck in run_pipeline(&config, &store)? {
        println!(
            "{} (parent {}): epoch loss {:?}, dev accuracy {:?}",
            ck.id,
            ck.parent_id.as_deref().unwrap_or("-"),
            ck.metrics.epoch_mean_loss,
            ck.metrics.dev_accuracy_per_epoch
        );
    }
    println!("checkpoints in {}", store.root().display());
    Ok(())
}
