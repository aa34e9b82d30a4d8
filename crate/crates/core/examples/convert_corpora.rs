//! Writes generated corpora in the upstream layouts (MNLI TSV, ANLI JSONL,
//! summary-correctness release JSON) and converts them to canonical JSONL.
//! The output directory also feeds `configs/desk_tiny.toml`.
//!
//! cargo run --example convert_corpora [-- <output dir>]

use std::path::PathBuf;

use entail_rank::data::{
    label_counts, load_nli_corpus, load_sc_release, write_canonical_nli, write_canonical_triples, CorpusDescriptor,
    CorpusFormat, Split,
};
use entail_rank::synth;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("entail-rank-data"));
    std::fs::create_dir_all(&out)?;

    synth::write_mnli_tsv(
        &out.join("mnli_train.tsv"),
        &synth::nli_examples(2000, 11, "mnli"),
        Some(50),
    )?;
    synth::write_mnli_tsv(&out.join("mnli_dev.tsv"), &synth::nli_examples(300, 13, "dev"), None)?;
    synth::write_anli_jsonl(&out.join("anli_r1_train.jsonl"), &synth::nli_examples(600, 12, "r1"))?;
    synth::write_sc_release(&out.join("sc_release.json"), &synth::sc_triples(373, 7))?;

    for (file, format) in [
        ("mnli_train.tsv", CorpusFormat::MnliTsv),
        ("mnli_dev.tsv", CorpusFormat::MnliTsv),
        ("anli_r1_train.jsonl", CorpusFormat::AnliJsonl),
    ] {
        let desc = CorpusDescriptor::new(file, out.join(file), format, Split::Train);
        let loaded = load_nli_corpus(&desc)?;
        let target = out.join(format!("{}.canonical.jsonl", file.split('.').next().unwrap()));
        write_canonical_nli(&target, &loaded.examples)?;
        let [e, n, c] = label_counts(&loaded.examples);
        println!(
            "{file:<20} kept {:>4}, dropped {:>2}  (E {e}, N {n}, C {c}) -> {}",
            loaded.stats.records,
            loaded.stats.dropped,
            target.display()
        );
    }

    let triples = load_sc_release(&out.join("sc_release.json"))?;
    write_canonical_triples(&out.join("sc.jsonl"), &triples.triples)?;
    println!(
        "sc_release.json      {} triples -> {}",
        triples.len(),
        out.join("sc.jsonl").display()
    );
    Ok(())
}
