//! Template-generated corpora for desk-scale runs and tests.
//!
//! Sentences follow a small grammar (subject, verb, object, place, time).
//! Hypotheses are entailed when they keep a subset of the premise's facts,
//! contradict it by negation or by swapping the subject or object, and are
//! neutral when they add a fact the premise does not mention. The output
//! can be written in the MNLI TSV, ANLI JSONL and summary-correctness
//! release layouts that [`crate::data`] reads.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::nli::{NliExample, NliLabel, SummaryTriple};

const NOUNS: &[&str] = &[
    "man", "woman", "boy", "girl", "teacher", "doctor", "farmer", "child", "pilot", "singer", "driver", "student",
];
const ADJECTIVES: &[&str] = &["tall", "young", "old", "quiet", "happy", "tired", "clever", "angry"];
/// (past tense, base form)
const VERBS: &[(&str, &str)] = &[
    ("watched", "watch"),
    ("painted", "paint"),
    ("carried", "carry"),
    ("cleaned", "clean"),
    ("found", "find"),
    ("visited", "visit"),
    ("repaired", "repair"),
    ("sold", "sell"),
    ("bought", "buy"),
    ("opened", "open"),
];
const OBJECTS: &[&str] = &[
    "car", "house", "bicycle", "letter", "garden", "boat", "window", "piano", "bridge", "table", "camera", "door",
];
const PLACES: &[&str] = &[
    "in the park",
    "near the river",
    "at the station",
    "in the kitchen",
    "behind the school",
    "on the hill",
    "in the city",
    "by the lake",
];
const TIMES: &[&str] = &[
    "yesterday",
    "on monday",
    "this morning",
    "last week",
    "at noon",
    "in june",
];
const REASONS: &[&str] = &[
    "because it was cheap",
    "because a friend asked",
    "for the first time",
    "with great care",
    "to win a prize",
    "after a long argument",
];

/// One generated scene.
#[derive(Debug, Clone)]
struct Scene {
    adjective: &'static str,
    subject: &'static str,
    verb: (&'static str, &'static str),
    object: &'static str,
    place: &'static str,
    time: &'static str,
}

fn other<'a>(pool: &[&'a str], not: &str, rng: &mut impl Rng) -> &'a str {
    loop {
        let pick = *pool.choose(rng).expect("non-empty pool");
        if pick != not {
            return pick;
        }
    }
}

impl Scene {
    fn random(rng: &mut impl Rng) -> Self {
        Self {
            adjective: ADJECTIVES.choose(rng).unwrap(),
            subject: NOUNS.choose(rng).unwrap(),
            verb: *VERBS.choose(rng).unwrap(),
            object: OBJECTS.choose(rng).unwrap(),
            place: PLACES.choose(rng).unwrap(),
            time: TIMES.choose(rng).unwrap(),
        }
    }

    fn premise(&self) -> String {
        format!(
            "the {} {} {} the {} {} {} .",
            self.adjective, self.subject, self.verb.0, self.object, self.place, self.time
        )
    }

    fn entailed(&self, rng: &mut impl Rng) -> String {
        match rng.random_range(0..4) {
            0 => format!("the {} {} the {} .", self.subject, self.verb.0, self.object),
            1 => format!(
                "the {} {} {} the {} .",
                self.adjective, self.subject, self.verb.0, self.object
            ),
            2 => format!(
                "the {} {} the {} {} .",
                self.subject, self.verb.0, self.object, self.place
            ),
            _ => format!("someone {} the {} {} .", self.verb.0, self.object, self.time),
        }
    }

    fn contradicted(&self, rng: &mut impl Rng) -> String {
        match rng.random_range(0..4) {
            0 => format!("the {} did not {} the {} .", self.subject, self.verb.1, self.object),
            1 => format!("nobody {} the {} {} .", self.verb.0, self.object, self.place),
            2 => format!(
                "the {} {} the {} .",
                other(NOUNS, self.subject, rng),
                self.verb.0,
                self.object
            ),
            _ => format!(
                "the {} {} the {} .",
                self.subject,
                self.verb.0,
                other(OBJECTS, self.object, rng)
            ),
        }
    }

    fn neutral(&self, rng: &mut impl Rng) -> String {
        let reason = REASONS.choose(rng).unwrap();
        match rng.random_range(0..3) {
            0 => format!("the {} {} the {} {} .", self.subject, self.verb.0, self.object, reason),
            1 => {
                let (v, _) = other_verb(self.verb.0, rng);
                format!(
                    "the {} also {} the {} .",
                    self.subject,
                    v,
                    other(OBJECTS, self.object, rng)
                )
            }
            _ => format!(
                "the {} {} the {} with a {} .",
                self.subject,
                self.verb.0,
                self.object,
                other(NOUNS, self.subject, rng)
            ),
        }
    }
}

fn other_verb(not: &str, rng: &mut impl Rng) -> (&'static str, &'static str) {
    loop {
        let pick = *VERBS.choose(rng).unwrap();
        if pick.0 != not {
            return pick;
        }
    }
}

/// Generates `n` NLI examples with labels cycling entailment, neutral,
/// contradiction, so any multiple of three is exactly balanced.
pub fn nli_examples(n: usize, seed: u64, tag: &str) -> Vec<NliExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let scene = Scene::random(&mut rng);
            let label = NliLabel::ALL[i % 3];
            let hypothesis = match label {
                NliLabel::Entailment => scene.entailed(&mut rng),
                NliLabel::Neutral => scene.neutral(&mut rng),
                NliLabel::Contradiction => scene.contradicted(&mut rng),
            };
            NliExample::new(
                format!("{tag}-{seed}-{i:05}"),
                &scene.premise(),
                &hypothesis,
                label,
                tag,
            )
            .expect("generated texts are non-empty")
        })
        .collect()
}

/// Writes examples as an MNLI-style TSV. When `unlabeled_every` is set,
/// every k-th row gets the `-` gold label of a consensus failure.
pub fn write_mnli_tsv(path: &Path, examples: &[NliExample], unlabeled_every: Option<usize>) -> io::Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(
        out,
        "index\tpromptID\tpairID\tgenre\tsentence1_binary_parse\tsentence2_binary_parse\tsentence1_parse\tsentence2_parse\tsentence1\tsentence2\tlabel1\tgold_label"
    )?;
    for (i, ex) in examples.iter().enumerate() {
        let gold = match unlabeled_every {
            Some(k) if k > 0 && (i + 1) % k == 0 => "-",
            _ => ex.label.as_word(),
        };
        writeln!(
            out,
            "{i}\t{i}\t{}\tsynthetic\t\t\t\t\t{}\t{}\t{}\t{gold}",
            ex.uid,
            ex.premise,
            ex.hypothesis,
            ex.label.as_word()
        )?;
    }
    out.flush()
}

/// Writes examples as ANLI-style JSONL with single-letter labels.
pub fn write_anli_jsonl(path: &Path, examples: &[NliExample]) -> io::Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for ex in examples {
        let letter = match ex.label {
            NliLabel::Entailment => "e",
            NliLabel::Neutral => "n",
            NliLabel::Contradiction => "c",
        };
        let record = json!({
            "uid": ex.uid,
            "context": ex.premise,
            "hypothesis": ex.hypothesis,
            "label": letter,
            "reason": "",
        });
        writeln!(out, "{record}")?;
    }
    out.flush()
}

/// Generates `n` summary-correctness triples: a source sentence, a summary
/// that keeps a subset of its facts, and one that changes a fact.
pub fn sc_triples(n: usize, seed: u64) -> Vec<SummaryTriple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let scene = Scene::random(&mut rng);
            let source = format!(
                "witnesses said the {} {} {} the {} {} {} , according to local reports .",
                scene.adjective, scene.subject, scene.verb.0, scene.object, scene.place, scene.time
            );
            let correct = scene.entailed(&mut rng);
            let mut incorrect = scene.contradicted(&mut rng);
            while incorrect == correct {
                incorrect = scene.contradicted(&mut rng);
            }
            SummaryTriple::new(format!("sc-{:04}", i + 1), &source, &correct, &incorrect)
                .expect("generated summaries differ")
        })
        .collect()
}

/// Writes triples as a JSON array using release-style field names
/// (`article_sent`, `correct_sent`, `incorrect_sent`, `hash`).
pub fn write_sc_release(path: &Path, triples: &[SummaryTriple]) -> io::Result<()> {
    let records: Vec<_> = triples
        .iter()
        .map(|t| {
            json!({
                "article_sent": t.source,
                "correct_sent": t.correct,
                "incorrect_sent": t.incorrect,
                "hash": t.id,
            })
        })
        .collect();
    fs::write(path, serde_json::to_string_pretty(&records).expect("plain JSON"))
}
