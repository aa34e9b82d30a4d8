//! Pair encoding `[CLS] premise [SEP] hypothesis [SEP]` and longest-first
//! truncation.
//!
//! cargo run --example encode_pairs

use entail_rank::encoding::{encode_pair, truncated_lengths, SPECIAL_POSITIONS};
use entail_rank::tokenize::{Tokenizer, WordVocab};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let premise = "the old farmer sold the boat near the river on monday , and then he bought a house .";
    let hypothesis = "the farmer sold a boat .";
    let vocab = WordVocab::build([premise, hypothesis], None);

    for max_len in [128, 16, 9] {
        let enc = encode_pair(premise, hypothesis, max_len, &vocab)?;
        let tokens: Vec<&str> = enc.token_ids.iter().map(|&id| vocab.token(id).unwrap()).collect();
        println!(
            "max_len {max_len:>3}: premise {:>2}, hypothesis {}, total {:>2}\n  {}",
            enc.premise_len(),
            enc.hypothesis_len(),
            enc.len(),
            tokens.join(" ")
        );
    }

    let budget = 128 - SPECIAL_POSITIONS;
    for (p, h) in [(200, 10), (100, 100), (60, 40)] {
        println!(
            "({p}, {h}) tokens -> {:?} under max_len 128",
            truncated_lengths(p, h, budget)
        );
    }
    Ok(())
}
