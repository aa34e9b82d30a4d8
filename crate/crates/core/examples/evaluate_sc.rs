//! Pairwise accuracy on summary-correctness triples with a custom scorer.
//!
//! cargo run --example evaluate_sc
//!
//! Any type implementing `EntailmentScorer` can be evaluated. This one
//! scores by how many hypothesis words also occur in the premise.

use std::collections::HashSet;

use entail_rank::data::TripleDataset;
use entail_rank::nli::EntailmentScore;
use entail_rank::rank_eval::evaluate_sc;
use entail_rank::scorer::{EntailmentScorer, LookupTable, ScoreError};
use entail_rank::synth;
use entail_rank::tokenize::split_words;

struct WordOverlap;

impl EntailmentScorer for WordOverlap {
    fn score_pair(&self, premise: &str, hypothesis: &str) -> Result<EntailmentScore, ScoreError> {
        let seen: HashSet<&str> = split_words(premise).into_iter().collect();
        let words = split_words(hypothesis);
        let covered = words.iter().filter(|w| seen.contains(*w)).count() as f64 / words.len().max(1) as f64;
        Ok(EntailmentScore::new(covered, (1.0 - covered) / 2.0, (1.0 - covered) / 2.0).unwrap())
    }

    fn label(&self) -> String {
        "word-overlap".into()
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dataset = TripleDataset::new("synthetic-sc", synth::sc_triples(373, 1))?;

    let report = evaluate_sc(&WordOverlap, &dataset, "word-overlap")?;
    println!("word overlap:      {}", report.summary_line());

    // every pair gets the same score, so every triple is a tie
    let constant = LookupTable::default();
    println!(
        "constant scorer:   {}",
        evaluate_sc(&constant, &dataset, "constant")?.summary_line()
    );

    for o in report.outcomes.iter().filter(|o| !o.correct).take(3) {
        let t = dataset.triples.iter().find(|t| t.id == o.triple_id).unwrap();
        println!(
            "\n{} (ratio {:.2})\n  d:  {}\n  s+: {}\n  s-: {}",
            t.id, o.ratio, t.source, t.correct, t.incorrect
        );
    }
    Ok(())
}
