use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EntailmentScorer, ScoreError};
use crate::data::LineError;
use crate::nli::EntailmentScore;

/// Fixed `(premise, hypothesis) -> score` table. Pairs that are not in the
/// table get `default_score`, uniform unless set otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    entries: Vec<(String, String, EntailmentScore)>,
    index: HashMap<(String, String), usize>,
    default_score: EntailmentScore,
    label: String,
}

#[derive(Serialize, Deserialize)]
struct Record {
    premise: String,
    hypothesis: String,
    p_entail: f64,
    p_neutral: f64,
    p_contra: f64,
}

impl Default for LookupTable {
    fn default() -> Self {
        Self::new(EntailmentScore::uniform())
    }
}

impl LookupTable {
    pub fn new(default_score: EntailmentScore) -> Self {
        Self {
            entries: Vec::new(),
            index: HashMap::new(),
            default_score,
            label: "lookup".to_string(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Inserts or replaces the score of a pair. Texts are trimmed.
    pub fn insert(&mut self, premise: &str, hypothesis: &str, score: EntailmentScore) {
        let key = (premise.trim().to_string(), hypothesis.trim().to_string());
        match self.index.get(&key) {
            Some(&i) => self.entries[i].2 = score,
            None => {
                self.index.insert(key.clone(), self.entries.len());
                self.entries.push((key.0, key.1, score));
            }
        }
    }

    pub fn get(&self, premise: &str, hypothesis: &str) -> Option<EntailmentScore> {
        let key = (premise.trim().to_string(), hypothesis.trim().to_string());
        self.index.get(&key).map(|&i| self.entries[i].2)
    }

    pub fn default_score(&self) -> EntailmentScore {
        self.default_score
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reads a JSONL table (`premise`, `hypothesis`, `p_entail`,
    /// `p_neutral`, `p_contra` per line).
    pub fn read(path: &Path) -> Result<Self, ScoreError> {
        let text =
            fs::read_to_string(path).map_err(|e| ScoreError::Construction(format!("{}: {e}", path.display())))?;
        let mut table = Self::default();
        let mut errors = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<Record>(line)
                .map_err(|e| e.to_string())
                .and_then(|r| {
                    EntailmentScore::new(r.p_entail, r.p_neutral, r.p_contra)
                        .map(|s| (r, s))
                        .map_err(|e| e.to_string())
                });
            match parsed {
                Ok((r, s)) => table.insert(&r.premise, &r.hypothesis, s),
                Err(message) => errors.push(LineError { line: i + 1, message }),
            }
        }
        if !errors.is_empty() {
            let joined: Vec<_> = errors.iter().map(ToString::to_string).collect();
            return Err(ScoreError::Construction(format!(
                "{}: {}",
                path.display(),
                joined.join("; ")
            )));
        }
        Ok(table)
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        for (premise, hypothesis, s) in &self.entries {
            let record = Record {
                premise: premise.clone(),
                hypothesis: hypothesis.clone(),
                p_entail: s.p_entail(),
                p_neutral: s.p_neutral(),
                p_contra: s.p_contra(),
            };
            writeln!(out, "{}", serde_json::to_string(&record).expect("plain record"))?;
        }
        out.flush()
    }
}

impl EntailmentScorer for LookupTable {
    fn score_pair(&self, premise: &str, hypothesis: &str) -> Result<EntailmentScore, ScoreError> {
        Ok(self.get(premise, hypothesis).unwrap_or(self.default_score))
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hits_and_default() {
        let mut table = LookupTable::default();
        let s = EntailmentScore::new(0.9, 0.05, 0.05).unwrap();
        table.insert("D", "A", s);
        assert_eq!(table.score_pair("D", "A").unwrap(), s);
        assert_eq!(table.score_pair(" D", "A ").unwrap(), s);
        assert_eq!(table.score_pair("D", "Z").unwrap(), EntailmentScore::uniform());
    }

    #[test]
    fn file_round_trip() {
        let mut table = LookupTable::default();
        table.insert("D", "A", EntailmentScore::new(0.9, 0.05, 0.05).unwrap());
        table.insert("D", "B", EntailmentScore::new(0.1, 0.2, 0.7).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        table.write(&path).unwrap();
        assert_eq!(LookupTable::read(&path).unwrap(), table);
    }

    #[test]
    fn invalid_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        fs::write(
            &path,
            "{\"premise\":\"D\",\"hypothesis\":\"A\",\"p_entail\":0.9,\"p_neutral\":0.9,\"p_contra\":0.0}\n",
        )
        .unwrap();
        let err = LookupTable::read(&path).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }
}
