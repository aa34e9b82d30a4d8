//! Entailment-based ranking and the pairwise summary-correctness metric.
//!
//! A triple counts as correct only when `N(d, s-) < N(d, s+)` strictly, so
//! ties are errors. Accuracy is `#correct / #triples`. For the incorrect
//! selections, the ratio `N(d, s+) / N(d, s-)` lies in `[0, 1]` and shows
//! how strongly the scorer preferred the wrong summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::data::{triple_to_pairs, TextPair, TripleDataset};
use crate::nli::{entailment_prob, probability_ratio, EntailmentScore, NliError, SummaryTriple};
use crate::scorer::{EntailmentScorer, ScoreError};

/// Default cut-off for strong failures.
pub const DEFAULT_FAILURE_THRESHOLD: f64 = 0.1;
pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no candidates to rank")]
    NoCandidates,
    #[error("dataset {0:?} is empty")]
    EmptyDataset(String),
    #[error("bins must be at least 1")]
    NoBins,
    #[error("threshold {0} outside (0, 1]")]
    BadThreshold(f64),
    #[error("scorer failed: {0}")]
    Scorer(#[from] ScoreError),
    #[error(transparent)]
    Probability(#[from] NliError),
    #[error("scorer returned {got} scores for {expected} pairs")]
    ScoreCount { expected: usize, got: usize },
    #[error("cannot read report {path}: {message}")]
    ReadReport { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankResult {
    pub scores: Vec<EntailmentScore>,
    pub chosen_index: usize,
    /// Candidate indices by descending entailment probability, ties in
    /// input order.
    pub ordering: Vec<usize>,
}

/// Orders candidates by descending entailment probability.
pub fn rank_scores(scores: Vec<EntailmentScore>) -> Result<RankResult, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::NoCandidates);
    }
    let mut ordering: Vec<usize> = (0..scores.len()).collect();
    // stable sort keeps the lower index first on ties
    ordering.sort_by(|&a, &b| entailment_prob(&scores[b]).total_cmp(&entailment_prob(&scores[a])));
    Ok(RankResult {
        chosen_index: ordering[0],
        scores,
        ordering,
    })
}

pub fn rank_candidates<S: AsRef<str>>(
    scorer: &dyn EntailmentScorer,
    doc: &str,
    candidates: &[S],
) -> Result<RankResult, EvalError> {
    if candidates.is_empty() {
        return Err(EvalError::NoCandidates);
    }
    let pairs: Vec<TextPair<'_>> = candidates
        .iter()
        .map(|c| TextPair {
            premise: doc,
            hypothesis: c.as_ref(),
        })
        .collect();
    rank_scores(scorer.score_batch(&pairs)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleOutcome {
    pub triple_id: String,
    pub n_plus: f64,
    pub n_minus: f64,
    pub correct: bool,
    /// `n_plus / n_minus`; infinite when only `n_minus` is zero.
    #[serde(serialize_with = "ser_ratio", deserialize_with = "de_ratio")]
    pub ratio: f64,
}

fn ser_ratio<S: Serializer>(ratio: &f64, s: S) -> Result<S::Ok, S::Error> {
    if ratio.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*ratio)
    }
}

fn de_ratio<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Raw::Text(t) => Err(serde::de::Error::custom(format!("invalid ratio {t:?}"))),
    }
}

fn fmt_ratio(ratio: f64) -> String {
    if ratio.is_infinite() {
        "inf".to_string()
    } else {
        ratio.to_string()
    }
}

impl TripleOutcome {
    pub fn from_probabilities(triple_id: impl Into<String>, n_plus: f64, n_minus: f64) -> Result<Self, EvalError> {
        Ok(Self {
            triple_id: triple_id.into(),
            n_plus,
            n_minus,
            correct: n_minus < n_plus,
            ratio: probability_ratio(n_plus, n_minus)?,
        })
    }
}

pub fn judge_triple(scorer: &dyn EntailmentScorer, triple: &SummaryTriple) -> Result<TripleOutcome, EvalError> {
    let (pos, neg) = triple_to_pairs(triple);
    let scores = scorer.score_batch(&[pos, neg])?;
    TripleOutcome::from_probabilities(
        triple.id.clone(),
        entailment_prob(&scores[0]),
        entailment_prob(&scores[1]),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_name: String,
    pub scorer_label: String,
    pub n_examples: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    /// Scorer and run settings that produced the report.
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
    pub outcomes: Vec<TripleOutcome>,
}

impl EvalReport {
    pub fn from_outcomes(
        dataset_name: impl Into<String>,
        scorer_label: impl Into<String>,
        outcomes: Vec<TripleOutcome>,
    ) -> Self {
        let n_examples = outcomes.len();
        let n_correct = outcomes.iter().filter(|o| o.correct).count();
        Self {
            dataset_name: dataset_name.into(),
            scorer_label: scorer_label.into(),
            n_examples,
            n_correct,
            accuracy: if n_examples == 0 {
                0.0
            } else {
                n_correct as f64 / n_examples as f64
            },
            provenance: BTreeMap::new(),
            outcomes,
        }
    }

    /// `accuracy = 75.00% (3/4)`
    pub fn summary_line(&self) -> String {
        format!(
            "accuracy = {:.2}% ({}/{})",
            self.accuracy * 100.0,
            self.n_correct,
            self.n_examples
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields always serialize")
    }

    pub fn read(path: &Path) -> Result<Self, EvalError> {
        let err = |message: String| EvalError::ReadReport {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let report: EvalReport = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        let recount = EvalReport::from_outcomes("", "", report.outcomes.clone());
        if recount.n_examples != report.n_examples || recount.n_correct != report.n_correct {
            return Err(err("counts disagree with outcomes".into()));
        }
        Ok(report)
    }

    /// One outcome per line: `triple_id, n_plus, n_minus, correct, ratio`.
    pub fn outcomes_table(&self) -> String {
        let mut out = String::from("triple_id\tn_plus\tn_minus\tcorrect\tratio\n");
        for o in &self.outcomes {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                o.triple_id,
                o.n_plus,
                o.n_minus,
                o.correct,
                fmt_ratio(o.ratio)
            )
            .unwrap();
        }
        out
    }
}

/// Scores all `2n` pairs in one batch and judges every triple in dataset
/// order. Any scorer failure aborts the whole evaluation.
pub fn evaluate_sc(
    scorer: &dyn EntailmentScorer,
    dataset: &TripleDataset,
    scorer_label: &str,
) -> Result<EvalReport, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset(dataset.name.clone()));
    }
    let pairs: Vec<TextPair<'_>> = dataset
        .triples
        .iter()
        .flat_map(|t| {
            let (pos, neg) = triple_to_pairs(t);
            [pos, neg]
        })
        .collect();
    let scores = scorer.score_batch(&pairs)?;
    if scores.len() != pairs.len() {
        return Err(EvalError::ScoreCount {
            expected: pairs.len(),
            got: scores.len(),
        });
    }
    let outcomes = dataset
        .triples
        .iter()
        .zip(scores.chunks_exact(2))
        .map(|(t, s)| TripleOutcome::from_probabilities(t.id.clone(), entailment_prob(&s[0]), entailment_prob(&s[1])))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport::from_outcomes(dataset.name.clone(), scorer_label, outcomes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub total: usize,
}

impl Histogram {
    /// `bin_lo\tbin_hi\tcount` table.
    pub fn table(&self) -> String {
        let mut out = String::from("bin_lo\tbin_hi\tcount\n");
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}", self.bin_edges[i], self.bin_edges[i + 1], c).unwrap();
        }
        out
    }
}

/// Histogram of ratios over equal-width bins on `[0, 1]`. Bins are
/// left-closed; the last bin is closed on both sides. When
/// `incorrect_only` is false, ratios above 1 land in the last bin.
pub fn ratio_histogram(outcomes: &[TripleOutcome], bins: usize, incorrect_only: bool) -> Result<Histogram, EvalError> {
    if bins == 0 {
        return Err(EvalError::NoBins);
    }
    let bin_edges: Vec<f64> = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    let mut counts = vec![0; bins];
    let mut total = 0;
    for o in outcomes.iter().filter(|o| !(incorrect_only && o.correct)) {
        let idx = bin_edges[1..bins].iter().take_while(|edge| **edge <= o.ratio).count();
        counts[idx] += 1;
        total += 1;
    }
    Ok(Histogram {
        bin_edges,
        counts,
        total,
    })
}

/// Ids of incorrect outcomes with ratio below `threshold`, smallest ratio
/// first.
pub fn mine_failures(outcomes: &[TripleOutcome], threshold: f64) -> Result<Vec<String>, EvalError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(EvalError::BadThreshold(threshold));
    }
    let mut failures: Vec<&TripleOutcome> = outcomes.iter().filter(|o| !o.correct && o.ratio < threshold).collect();
    failures.sort_by(|a, b| a.ratio.total_cmp(&b.ratio));
    Ok(failures.into_iter().map(|o| o.triple_id.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::LookupTable;

    fn score(p: f64) -> EntailmentScore {
        EntailmentScore::new(p, (1.0 - p) / 2.0, (1.0 - p) / 2.0).unwrap()
    }

    fn outcome(id: &str, ratio: f64, correct: bool) -> TripleOutcome {
        TripleOutcome {
            triple_id: id.into(),
            n_plus: 0.0,
            n_minus: 0.0,
            correct,
            ratio,
        }
    }

    #[test]
    fn ranking() {
        let r = rank_scores(vec![score(0.3)]).unwrap();
        assert_eq!(r.chosen_index, 0);
        let r = rank_scores(vec![score(0.2), score(0.8), score(0.5)]).unwrap();
        assert_eq!(r.ordering, [1, 2, 0]);
        assert_eq!(r.chosen_index, 1);
        let r = rank_scores(vec![score(0.5), score(0.5)]).unwrap();
        assert_eq!(r.chosen_index, 0);
        assert!(matches!(rank_scores(vec![]), Err(EvalError::NoCandidates)));

        let table = LookupTable::default();
        let empty: [&str; 0] = [];
        assert!(matches!(
            rank_candidates(&table, "D", &empty),
            Err(EvalError::NoCandidates)
        ));
    }

    #[test]
    fn rank_candidates_uses_scorer() {
        let mut table = LookupTable::default();
        table.insert("D", "a", score(0.2));
        table.insert("D", "b", score(0.8));
        table.insert("D", "c", score(0.5));
        let r = rank_candidates(&table, "D", &["a", "b", "c"]).unwrap();
        assert_eq!(r.ordering, [1, 2, 0]);
        assert_eq!(r.scores[1], score(0.8));
    }

    #[test]
    fn judging() {
        let mut table = LookupTable::default();
        let triple = SummaryTriple::new("t", "D", "A", "B").unwrap();
        table.insert("D", "A", score(0.9));
        table.insert("D", "B", score(0.1));
        let o = judge_triple(&table, &triple).unwrap();
        assert!(o.correct);
        assert!((o.ratio - 9.0).abs() < 1e-12);

        table.insert("D", "A", score(0.5));
        table.insert("D", "B", score(0.5));
        let o = judge_triple(&table, &triple).unwrap();
        assert!(!o.correct);
        assert_eq!(o.ratio, 1.0);

        table.insert("D", "A", score(0.05));
        table.insert("D", "B", score(0.95));
        let o = judge_triple(&table, &triple).unwrap();
        assert!(!o.correct);
        assert!((o.ratio - 0.05 / 0.95).abs() < 1e-12);
        assert!(o.ratio < 0.1);
    }

    fn dataset(n: usize) -> TripleDataset {
        let triples = (0..n)
            .map(|i| SummaryTriple::new(format!("t{i}"), &format!("D{i}"), "good", "bad").unwrap())
            .collect();
        TripleDataset::new("synthetic", triples).unwrap()
    }

    #[test]
    fn perfect_and_constant_scorers() {
        let ds = dataset(5);
        let mut perfect = LookupTable::default();
        for t in &ds.triples {
            perfect.insert(&t.source, &t.correct, score(0.8));
            perfect.insert(&t.source, &t.incorrect, score(0.2));
        }
        let report = evaluate_sc(&perfect, &ds, "perfect").unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.summary_line(), "accuracy = 100.00% (5/5)");

        let constant = LookupTable::default();
        let report = evaluate_sc(&constant, &ds, "constant").unwrap();
        assert_eq!(report.accuracy, 0.0);
        assert_eq!(report.summary_line(), "accuracy = 0.00% (0/5)");
        assert!(report.outcomes.iter().all(|o| o.ratio == 1.0));

        let empty = TripleDataset::new("empty", vec![]).unwrap();
        assert!(matches!(
            evaluate_sc(&constant, &empty, "c"),
            Err(EvalError::EmptyDataset(_))
        ));
    }

    #[test]
    fn report_round_trips_with_infinite_ratio() {
        let outcomes = vec![
            TripleOutcome::from_probabilities("a", 0.5, 0.0).unwrap(),
            TripleOutcome::from_probabilities("b", 0.1, 0.3).unwrap(),
        ];
        let report = EvalReport::from_outcomes("ds", "lookup", outcomes);
        let json = report.to_json();
        assert!(json.contains("\"inf\""));
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        assert!(report.outcomes_table().lines().nth(1).unwrap().ends_with("\tinf"));
    }

    #[test]
    fn histogram_binning() {
        let outs = vec![
            outcome("a", 0.05, false),
            outcome("b", 0.95, false),
            outcome("c", 0.95, false),
            outcome("d", 3.0, true),
        ];
        let h = ratio_histogram(&outs, 10, true).unwrap();
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[9], 2);
        assert_eq!(h.total, 3);
        assert_eq!(h.bin_edges.len(), 11);

        let h = ratio_histogram(&outs, 10, false).unwrap();
        assert_eq!((h.total, h.counts[9]), (4, 3));

        let edges = ratio_histogram(&[outcome("e", 1.0, false), outcome("f", 0.1, false)], 10, true).unwrap();
        assert_eq!(edges.counts[9], 1);
        assert_eq!(edges.counts[1], 1);

        let none = ratio_histogram(&[outcome("a", 2.0, true)], 10, true).unwrap();
        assert_eq!(none.total, 0);
        assert!(ratio_histogram(&outs, 0, true).is_err());
    }

    #[test]
    fn failure_mining() {
        let outs = vec![
            outcome("t1", 0.05, false),
            outcome("t2", 0.5, false),
            outcome("t3", 0.9, true),
            outcome("t4", 0.01, false),
        ];
        assert_eq!(mine_failures(&outs, 0.1).unwrap(), ["t4", "t1"]);
        assert_eq!(mine_failures(&outs, 1.0).unwrap(), ["t4", "t1", "t2"]);
        assert!(mine_failures(&[], 0.1).unwrap().is_empty());
        assert!(mine_failures(&outs, 0.0).is_err());
        assert!(mine_failures(&outs, 1.5).is_err());
    }
}
