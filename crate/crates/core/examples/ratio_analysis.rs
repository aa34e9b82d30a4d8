//! Distribution of N(d,s+)/N(d,s-) over the incorrect selections, and the
//! strongest failures.
//!
//! cargo run --example ratio_analysis [-- <report.json>]

use std::path::Path;

use entail_rank::data::TripleDataset;
use entail_rank::nli::EntailmentScore;
use entail_rank::rank_eval::{
    evaluate_sc, mine_failures, ratio_histogram, EvalReport, DEFAULT_BINS, DEFAULT_FAILURE_THRESHOLD,
};
use entail_rank::scorer::LookupTable;
use entail_rank::synth;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noisy_report() -> Result<EvalReport, Box<dyn std::error::Error>> {
    let triples = synth::sc_triples(200, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut table = LookupTable::default();
    for t in &triples {
        let bonus = if rng.random_bool(0.7) { 0.15 } else { 0.0 };
        for (text, bonus) in [(&t.correct, bonus), (&t.incorrect, 0.0)] {
            let p: f64 = (rng.random::<f64>().powi(4) + bonus).min(1.0);
            table.insert(
                &t.source,
                text,
                EntailmentScore::new(p, (1.0 - p) / 2.0, (1.0 - p) / 2.0)?,
            );
        }
    }
    Ok(evaluate_sc(
        &table,
        &TripleDataset::new("noisy", triples)?,
        "noisy table",
    )?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let report = match std::env::args().nth(1) {
        Some(path) => EvalReport::read(Path::new(&path))?,
        None => noisy_report()?,
    };
    println!("{}\n", report.summary_line());

    let histogram = ratio_histogram(&report.outcomes, DEFAULT_BINS, true)?;
    print!("{}", histogram.table());
    let above = histogram.counts.last().copied().unwrap_or(0);
    if histogram.total > 0 {
        println!(
            "\n{:.1}% of incorrect selections have ratio >= 0.9",
            100.0 * above as f64 / histogram.total as f64
        );
    }

    let failures = mine_failures(&report.outcomes, DEFAULT_FAILURE_THRESHOLD)?;
    println!(
        "{} strong failures (ratio < {DEFAULT_FAILURE_THRESHOLD}): {failures:?}",
        failures.len()
    );
    Ok(())
}
