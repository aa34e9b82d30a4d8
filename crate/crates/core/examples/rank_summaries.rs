//! Pick the candidate summary with the highest entailment probability.
//!
//! cargo run --example rank_summaries [-- <checkpoint dir>]
//!
//! Without a checkpoint the scores come from a small lookup table.

use std::path::Path;

use entail_rank::nli::{entailment_prob, EntailmentScore};
use entail_rank::rank_eval::rank_candidates;
use entail_rank::scorer::{EntailmentScorer, LookupTable, ModelScorer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let document = "the tall man repaired the bicycle in the park yesterday .";
    let candidates = [
        "the man repaired the bicycle .",
        "the woman repaired the bicycle .",
        "the man repaired the bicycle because it was cheap .",
        "nobody repaired the bicycle in the park .",
    ];

    let scorer: Box<dyn EntailmentScorer> = match std::env::args().nth(1) {
        Some(dir) => Box::new(ModelScorer::load(Path::new(&dir), 128, 32)?),
        None => {
            let mut table = LookupTable::default().with_label("hand-written table");
            for (c, probs) in candidates.iter().zip([
                [0.91, 0.06, 0.03],
                [0.08, 0.12, 0.80],
                [0.30, 0.65, 0.05],
                [0.02, 0.03, 0.95],
            ]) {
                table.insert(document, c, EntailmentScore::new(probs[0], probs[1], probs[2])?);
            }
            Box::new(table)
        }
    };

    let ranked = rank_candidates(scorer.as_ref(), document, &candidates)?;
    println!("scorer: {}", scorer.label());
    for (rank, &i) in ranked.ordering.iter().enumerate() {
        let mark = if i == ranked.chosen_index { "->" } else { "  " };
        println!(
            "{mark} {}. {:.3}  {}",
            rank + 1,
            entailment_prob(&ranked.scores[i]),
            candidates[i]
        );
    }
    Ok(())
}
