//! Domain types shared by every stage of the pipeline: NLI labels and the
//! label schemas used by upstream corpora, the 3-way entailment
//! distribution, NLI training records and summary-correctness triples.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the sum of an [`EntailmentScore`]'s components.
pub const SCORE_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NliError {
    #[error("unknown label schema {0:?} (expected \"anli-letter\" or \"mnli-word\")")]
    UnknownSchema(String),
    #[error("label {raw:?} is not defined in schema {schema}")]
    UnknownLabel { raw: String, schema: LabelSchema },
    #[error("invalid entailment score ({p_entail}, {p_neutral}, {p_contra}): {reason}")]
    InvalidScore {
        p_entail: f64,
        p_neutral: f64,
        p_contra: f64,
        reason: &'static str,
    },
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("{what} is empty after trimming")]
    EmptyText { what: &'static str },
    #[error("triple {0:?} has identical correct and incorrect summaries")]
    IdenticalSummaries(String),
}

/// Three-way NLI label. Declaration order is the argmax tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliLabel {
    Entailment,
    Neutral,
    Contradiction,
}

impl NliLabel {
    pub const ALL: [NliLabel; 3] = [NliLabel::Entailment, NliLabel::Neutral, NliLabel::Contradiction];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<NliLabel> {
        Self::ALL.get(index).copied()
    }

    /// The `mnli-word` spelling, also used by canonical files.
    pub fn as_word(self) -> &'static str {
        match self {
            NliLabel::Entailment => "entailment",
            NliLabel::Neutral => "neutral",
            NliLabel::Contradiction => "contradiction",
        }
    }
}

impl fmt::Display for NliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_word())
    }
}

/// Registered raw-label spellings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelSchema {
    /// ANLI single letters `e`, `n`, `c`.
    #[serde(rename = "anli-letter")]
    AnliLetter,
    /// MNLI words, matched case-insensitively.
    #[serde(rename = "mnli-word")]
    MnliWord,
}

impl LabelSchema {
    pub fn name(self) -> &'static str {
        match self {
            LabelSchema::AnliLetter => "anli-letter",
            LabelSchema::MnliWord => "mnli-word",
        }
    }
}

impl fmt::Display for LabelSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LabelSchema {
    type Err = NliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "anli-letter" => Ok(LabelSchema::AnliLetter),
            "mnli-word" => Ok(LabelSchema::MnliWord),
            other => Err(NliError::UnknownSchema(other.to_string())),
        }
    }
}

/// Maps a raw corpus label through `schema`.
pub fn map_label(raw: &str, schema: LabelSchema) -> Result<NliLabel, NliError> {
    let label = match schema {
        LabelSchema::AnliLetter => match raw {
            "e" => Some(NliLabel::Entailment),
            "n" => Some(NliLabel::Neutral),
            "c" => Some(NliLabel::Contradiction),
            _ => None,
        },
        LabelSchema::MnliWord => match raw.to_ascii_lowercase().as_str() {
            "entailment" => Some(NliLabel::Entailment),
            "neutral" => Some(NliLabel::Neutral),
            "contradiction" => Some(NliLabel::Contradiction),
            _ => None,
        },
    };
    label.ok_or_else(|| NliError::UnknownLabel {
        raw: raw.to_string(),
        schema,
    })
}

/// Same as [`map_label`] with the schema given by name.
pub fn map_label_named(raw: &str, schema: &str) -> Result<NliLabel, NliError> {
    map_label(raw, schema.parse()?)
}

/// A 3-way probability distribution over NLI labels. The entailment
/// component is the score used for ranking summaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntailmentScore {
    p_entail: f64,
    p_neutral: f64,
    p_contra: f64,
}

impl EntailmentScore {
    pub fn new(p_entail: f64, p_neutral: f64, p_contra: f64) -> Result<Self, NliError> {
        let invalid = |reason| NliError::InvalidScore {
            p_entail,
            p_neutral,
            p_contra,
            reason,
        };
        for p in [p_entail, p_neutral, p_contra] {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(invalid("component outside [0, 1]"));
            }
        }
        if (p_entail + p_neutral + p_contra - 1.0).abs() > SCORE_SUM_TOLERANCE {
            return Err(invalid("components do not sum to 1"));
        }
        Ok(Self {
            p_entail,
            p_neutral,
            p_contra,
        })
    }

    pub fn uniform() -> Self {
        let third = 1.0 / 3.0;
        Self {
            p_entail: third,
            p_neutral: third,
            p_contra: third,
        }
    }

    pub fn one_hot(label: NliLabel) -> Self {
        let mut p = [0.0; 3];
        p[label.index()] = 1.0;
        Self {
            p_entail: p[0],
            p_neutral: p[1],
            p_contra: p[2],
        }
    }

    /// Numerically stable softmax over logits ordered
    /// (entailment, neutral, contradiction).
    pub fn from_logits(logits: [f64; 3]) -> Result<Self, NliError> {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps = logits.map(|z| (z - max).exp());
        let total: f64 = exps.iter().sum();
        Self::new(exps[0] / total, exps[1] / total, exps[2] / total)
    }

    pub fn p_entail(&self) -> f64 {
        self.p_entail
    }

    pub fn p_neutral(&self) -> f64 {
        self.p_neutral
    }

    pub fn p_contra(&self) -> f64 {
        self.p_contra
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p_entail, self.p_neutral, self.p_contra]
    }

    /// Most probable label; exact ties go to the earlier label in
    /// entailment, neutral, contradiction order.
    pub fn argmax(&self) -> NliLabel {
        let p = self.as_array();
        let mut best = 0;
        for i in 1..3 {
            if p[i] > p[best] {
                best = i;
            }
        }
        NliLabel::ALL[best]
    }
}

impl<'de> Deserialize<'de> for EntailmentScore {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            p_entail: f64,
            p_neutral: f64,
            p_contra: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        EntailmentScore::new(raw.p_entail, raw.p_neutral, raw.p_contra).map_err(serde::de::Error::custom)
    }
}

/// The entailment probability N(d, s) carried by a score.
pub fn entailment_prob(score: &EntailmentScore) -> f64 {
    score.p_entail
}

/// Ratio N(d, s+) / N(d, s-).
///
/// `0 / 0` is a tie and yields 1.0. A positive numerator over zero yields
/// `f64::INFINITY`; that only happens for correct selections, which the
/// ratio analysis never looks at.
pub fn probability_ratio(n_plus: f64, n_minus: f64) -> Result<f64, NliError> {
    for p in [n_plus, n_minus] {
        if !(0.0..=1.0).contains(&p) {
            return Err(NliError::ProbabilityOutOfRange(p));
        }
    }
    Ok(if n_minus == 0.0 {
        if n_plus == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        n_plus / n_minus
    })
}

/// One premise/hypothesis record of an NLI corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NliExample {
    pub uid: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: NliLabel,
    pub source_tag: String,
}

impl NliExample {
    /// Trims both texts and rejects empty ones.
    pub fn new(
        uid: impl Into<String>,
        premise: &str,
        hypothesis: &str,
        label: NliLabel,
        source_tag: impl Into<String>,
    ) -> Result<Self, NliError> {
        Ok(Self {
            uid: uid.into(),
            premise: non_empty(premise, "premise")?,
            hypothesis: non_empty(hypothesis, "hypothesis")?,
            label,
            source_tag: source_tag.into(),
        })
    }
}

/// A source sentence `d` with a correct summary `s+` and an incorrect
/// summary `s-`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryTriple {
    pub id: String,
    pub source: String,
    pub correct: String,
    pub incorrect: String,
}

impl SummaryTriple {
    pub fn new(id: impl Into<String>, source: &str, correct: &str, incorrect: &str) -> Result<Self, NliError> {
        let id = id.into();
        let source = non_empty(source, "source")?;
        let correct = non_empty(correct, "correct summary")?;
        let incorrect = non_empty(incorrect, "incorrect summary")?;
        if correct == incorrect {
            return Err(NliError::IdenticalSummaries(id));
        }
        Ok(Self {
            id,
            source,
            correct,
            incorrect,
        })
    }
}

fn non_empty(text: &str, what: &'static str) -> Result<String, NliError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        Err(NliError::EmptyText { what })
    } else {
        Ok(trimmed.to_string())
    }
}
