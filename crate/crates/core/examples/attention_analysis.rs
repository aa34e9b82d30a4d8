//! Cross-segment attention of a briefly trained tiny encoder: how much of
//! each layer's attention goes between premise and hypothesis tokens.
//!
//! cargo run --release --example attention_analysis

use entail_rank::attention::{cross_attention_mass, layer_mean_table, layer_trend, token_attention_slice};
use entail_rank::data::{CorpusDescriptor, CorpusFormat, Split};
use entail_rank::finetune::{train_stage, CheckpointStore, StageConfig, StageInit, TrainConfig, TINY_BASE};
use entail_rank::model::TinyEncoderSpec;
use entail_rank::scorer::ModelScorer;
use entail_rank::synth;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("entail-rank-attention");
    std::fs::create_dir_all(&dir)?;
    let train = dir.join("train.tsv");
    let dev = dir.join("dev.tsv");
    synth::write_mnli_tsv(&train, &synth::nli_examples(900, 21, "mnli"), None)?;
    synth::write_mnli_tsv(&dev, &synth::nli_examples(90, 22, "dev"), None)?;

    let config = TrainConfig {
        base_model_ref: TINY_BASE.into(),
        model: TinyEncoderSpec {
            layers: 4,
            ..TinyEncoderSpec::default()
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
        epochs_per_stage: 2,
        batch_size: 16,
        max_len: 128,
        seed: 1,
        weight_decay: 0.0,
        max_grad_norm: 1.0,
        eval_corpus: CorpusDescriptor::new("dev", &dev, CorpusFormat::MnliTsv, Split::Dev),
    };
    let store = CheckpointStore::open(dir.join("checkpoints"))?;
    let ck = train_stage(&config, 0, StageInit::Base, &store)?;
    println!(
        "dev accuracy after training: {:.2}%",
        100.0 * ck.metrics.dev_accuracy_per_epoch[1]
    );
    let scorer = ModelScorer::load(&store.dir(&ck.id), 128, 16)?;

    let export = scorer.attention_export(
        "the young pilot painted the boat by the lake on monday .",
        "nobody painted the boat by the lake .",
    )?;
    let profile = cross_attention_mass(&export.attention, &export.segments)?;
    print!("{}", layer_mean_table(&profile));
    let (early, late) = layer_trend(&profile)?;
    println!("early layers {early:.3}, late layers {late:.3}");

    // where does the hypothesis token "nobody" look in the last layer?
    let query = export.tokens.iter().position(|t| t == "nobody").unwrap();
    let last = export.attention.dims().0 - 1;
    for (key, w) in token_attention_slice(&export.attention, last, query)?
        .into_iter()
        .take(5)
    {
        println!("  {:<8} {w:.3}", export.tokens[key]);
    }
    Ok(())
}
