//! Corpus and triple-dataset ingestion.
//!
//! NLI corpora arrive in one of three layouts (canonical JSONL, ANLI JSONL,
//! MNLI TSV) and are normalized into [`NliExample`]s. Summary-correctness
//! triples are stored as canonical JSONL; [`load_sc_release`] adapts
//! JSON/JSONL releases that use different field names.
//!
//! Loaders report every bad line of a file at once, with 1-based line
//! numbers. Blank lines are ignored everywhere.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::nli::{map_label, LabelSchema, NliError, NliExample, SummaryTriple};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {} malformed record(s): {}", .errors.len(), join_errors(.errors))]
    Malformed { path: PathBuf, errors: Vec<LineError> },
    #[error("format {format} cannot be read with label schema {schema}")]
    SchemaMismatch { format: CorpusFormat, schema: LabelSchema },
    #[error("unknown {what} {value:?}")]
    UnknownName { what: &'static str, value: String },
}

/// One rejected line of an input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

fn join_errors(errors: &[LineError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    CanonicalJsonl,
    AnliJsonl,
    MnliTsv,
}

impl CorpusFormat {
    pub fn name(self) -> &'static str {
        match self {
            CorpusFormat::CanonicalJsonl => "canonical-jsonl",
            CorpusFormat::AnliJsonl => "anli-jsonl",
            CorpusFormat::MnliTsv => "mnli-tsv",
        }
    }

    /// The only label schema registered for this format.
    pub fn label_schema(self) -> LabelSchema {
        match self {
            CorpusFormat::AnliJsonl => LabelSchema::AnliLetter,
            CorpusFormat::MnliTsv | CorpusFormat::CanonicalJsonl => LabelSchema::MnliWord,
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorpusFormat {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "canonical-jsonl" => Ok(CorpusFormat::CanonicalJsonl),
            "anli-jsonl" => Ok(CorpusFormat::AnliJsonl),
            "mnli-tsv" => Ok(CorpusFormat::MnliTsv),
            other => Err(DataError::UnknownName {
                what: "corpus format",
                value: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Dev,
    Test,
}

/// Where a corpus lives and how to read it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusDescriptor {
    pub name: String,
    pub path: PathBuf,
    pub format: CorpusFormat,
    /// Defaults to the format's registered schema.
    #[serde(default)]
    pub label_schema: Option<LabelSchema>,
    #[serde(default)]
    pub split: Split,
}

impl CorpusDescriptor {
    pub fn new(name: impl Into<String>, path: impl Into<PathBuf>, format: CorpusFormat, split: Split) -> Self {
        Self {
            name: name.into(),
            path: path.into(),
            format,
            label_schema: None,
            split,
        }
    }

    pub fn schema(&self) -> Result<LabelSchema, DataError> {
        let registered = self.format.label_schema();
        match self.label_schema {
            Some(schema) if schema != registered => Err(DataError::SchemaMismatch {
                format: self.format,
                schema,
            }),
            _ => Ok(registered),
        }
    }
}

/// Line accounting for one load: `records + dropped + blank` equals the
/// number of data lines read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LoadStats {
    pub records: usize,
    pub dropped: usize,
    pub blank: usize,
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub examples: Vec<NliExample>,
    pub stats: LoadStats,
}

fn read_file(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Outcome of parsing one record line.
enum Parsed {
    Keep(NliExample),
    Drop,
}

/// Loads an NLI corpus, dropping (and counting) records whose label the
/// schema does not define, such as MNLI's `-` consensus failures.
pub fn load_nli_corpus(descriptor: &CorpusDescriptor) -> Result<LoadedCorpus, DataError> {
    let schema = descriptor.schema()?;
    let text = read_file(&descriptor.path)?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));

    let mut stats = LoadStats::default();
    let mut errors = Vec::new();
    let mut examples = Vec::new();
    let mut seen = HashSet::new();

    let tsv_columns = if descriptor.format == CorpusFormat::MnliTsv {
        match lines.find(|(_, l)| !l.trim().is_empty()) {
            Some((_, header)) => Some(TsvColumns::from_header(header).map_err(|message| DataError::Malformed {
                path: descriptor.path.clone(),
                errors: vec![LineError { line: 1, message }],
            })?),
            None => None,
        }
    } else {
        None
    };

    for (line_no, line) in lines {
        if line.trim().is_empty() {
            stats.blank += 1;
            continue;
        }
        let parsed = match descriptor.format {
            CorpusFormat::MnliTsv => parse_mnli_row(line, line_no, tsv_columns.as_ref().unwrap(), schema),
            CorpusFormat::AnliJsonl => parse_json_record(line, schema, |obj| anli_source_tag(obj, &descriptor.path)),
            CorpusFormat::CanonicalJsonl => parse_json_record(line, schema, |obj| {
                optional_str(obj, "source_tag").unwrap_or_else(|| descriptor.name.clone())
            }),
        };
        match parsed {
            Ok(Parsed::Keep(example)) => {
                if !seen.insert(example.uid.clone()) {
                    errors.push(LineError {
                        line: line_no,
                        message: format!("duplicate uid {:?}", example.uid),
                    });
                    continue;
                }
                stats.records += 1;
                examples.push(example);
            }
            Ok(Parsed::Drop) => stats.dropped += 1,
            Err(message) => errors.push(LineError { line: line_no, message }),
        }
    }

    if errors.is_empty() {
        Ok(LoadedCorpus { examples, stats })
    } else {
        Err(DataError::Malformed {
            path: descriptor.path.clone(),
            errors,
        })
    }
}

struct TsvColumns {
    uid: Option<usize>,
    premise: usize,
    hypothesis: usize,
    label: usize,
    width: usize,
}

impl TsvColumns {
    fn from_header(header: &str) -> Result<Self, String> {
        let names: Vec<&str> = header.split('\t').collect();
        let find = |name: &str| names.iter().position(|n| *n == name);
        let need = |name: &str| find(name).ok_or_else(|| format!("header lacks column {name:?}"));
        Ok(Self {
            uid: find("pairID").or_else(|| find("index")),
            premise: need("sentence1")?,
            hypothesis: need("sentence2")?,
            label: need("gold_label")?,
            width: names.len(),
        })
    }
}

fn parse_mnli_row(line: &str, line_no: usize, cols: &TsvColumns, schema: LabelSchema) -> Result<Parsed, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    let get = |i: usize, name: &str| {
        fields.get(i).copied().ok_or_else(|| {
            format!(
                "expected {} columns, found {} (missing {name})",
                cols.width,
                fields.len()
            )
        })
    };
    let premise = get(cols.premise, "sentence1")?;
    let hypothesis = get(cols.hypothesis, "sentence2")?;
    let raw_label = get(cols.label, "gold_label")?;
    let uid = match cols.uid {
        Some(i) => get(i, "pairID")?.to_string(),
        None => format!("line-{line_no}"),
    };
    build_example(uid, premise, hypothesis, raw_label, schema, "mnli".to_string())
}

fn parse_json_record(
    line: &str,
    schema: LabelSchema,
    source_tag: impl FnOnce(&Map<String, Value>) -> String,
) -> Result<Parsed, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = value.as_object().ok_or("record is not a JSON object")?;
    let uid = required_str(obj, &["uid"])?;
    let premise = required_str(obj, &["premise", "context"])?;
    let hypothesis = required_str(obj, &["hypothesis"])?;
    let label = required_str(obj, &["label"])?;
    let tag = source_tag(obj);
    build_example(uid, &premise, &hypothesis, &label, schema, tag)
}

fn build_example(
    uid: String,
    premise: &str,
    hypothesis: &str,
    raw_label: &str,
    schema: LabelSchema,
    source_tag: String,
) -> Result<Parsed, String> {
    let label = match map_label(raw_label, schema) {
        Ok(label) => label,
        Err(NliError::UnknownLabel { .. }) => return Ok(Parsed::Drop),
        Err(e) => return Err(e.to_string()),
    };
    NliExample::new(uid, premise, hypothesis, label, source_tag)
        .map(Parsed::Keep)
        .map_err(|e| e.to_string())
}

fn required_str(obj: &Map<String, Value>, names: &[&str]) -> Result<String, String> {
    for name in names {
        match obj.get(*name) {
            Some(Value::String(s)) => return Ok(s.clone()),
            Some(Value::Number(n)) => return Ok(n.to_string()),
            Some(_) => return Err(format!("field {name:?} is not a string")),
            None => {}
        }
    }
    Err(format!("missing field {:?}", names[0]))
}

fn optional_str(obj: &Map<String, Value>, name: &str) -> Option<String> {
    obj.get(name).and_then(Value::as_str).map(str::to_string)
}

/// ANLI round tag: explicit `source_tag`, else an `rN-` uid prefix, else an
/// `R1`/`R2`/`R3` path component, else plain `anli`.
fn anli_source_tag(obj: &Map<String, Value>, path: &Path) -> String {
    if let Some(tag) = optional_str(obj, "source_tag") {
        return tag;
    }
    let round_of = |s: &str| -> Option<char> {
        let mut chars = s.chars();
        match (chars.next(), chars.next(), chars.next()) {
            (Some('r' | 'R'), Some(d @ '1'..='9'), None | Some('-' | '_')) => Some(d),
            _ => None,
        }
    };
    if let Some(d) = obj.get("uid").and_then(Value::as_str).and_then(round_of) {
        return format!("anli-r{d}");
    }
    for component in path.components().rev() {
        if let Some(d) = component.as_os_str().to_str().and_then(round_of) {
            return format!("anli-r{d}");
        }
    }
    "anli".to_string()
}

#[derive(Serialize, Deserialize)]
struct CanonicalNliRecord<'a> {
    uid: &'a str,
    premise: &'a str,
    hypothesis: &'a str,
    label: &'a str,
    source_tag: &'a str,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_lines<T>(path: &Path, items: &[T], encode: impl Fn(&T) -> String) -> Result<(), DataError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    for item in items {
        writeln!(out, "{}", encode(item)).map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

/// Writes examples as canonical JSONL (labels in `mnli-word` spelling).
pub fn write_canonical_nli(path: &Path, examples: &[NliExample]) -> Result<(), DataError> {
    write_lines(path, examples, |ex| {
        serde_json::to_string(&CanonicalNliRecord {
            uid: &ex.uid,
            premise: &ex.premise,
            hypothesis: &ex.hypothesis,
            label: ex.label.as_word(),
            source_tag: &ex.source_tag,
        })
        .expect("string fields always serialize")
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TripleFormat {
    #[default]
    CanonicalJsonl,
}

/// An ordered, id-unique collection of summary triples.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleDataset {
    pub name: String,
    pub triples: Vec<SummaryTriple>,
}

impl TripleDataset {
    pub fn new(name: impl Into<String>, triples: Vec<SummaryTriple>) -> Result<Self, DataError> {
        let name = name.into();
        let mut seen = HashSet::new();
        let errors: Vec<_> = triples
            .iter()
            .enumerate()
            .filter(|(_, t)| !seen.insert(t.id.as_str()))
            .map(|(i, t)| LineError {
                line: i + 1,
                message: format!("duplicate id {:?}", t.id),
            })
            .collect();
        if !errors.is_empty() {
            return Err(DataError::Malformed {
                path: PathBuf::from(&name),
                errors,
            });
        }
        Ok(Self { name, triples })
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("triples")
        .to_string()
}

/// Loads canonical triple records (`id`, `source`, `correct`, `incorrect`).
pub fn load_sc_triples(path: &Path, format: TripleFormat) -> Result<TripleDataset, DataError> {
    let TripleFormat::CanonicalJsonl = format;
    let text = read_file(path)?;
    let mut errors = Vec::new();
    let mut triples = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<Value>(line)
            .map_err(|e| format!("invalid JSON: {e}"))
            .and_then(|v| {
                let obj = v.as_object().ok_or("record is not a JSON object")?.clone();
                let id = required_str(&obj, &["id"])?;
                let source = required_str(&obj, &["source"])?;
                let correct = required_str(&obj, &["correct"])?;
                let incorrect = required_str(&obj, &["incorrect"])?;
                SummaryTriple::new(id.clone(), &source, &correct, &incorrect).map_err(|e| format!("triple {id:?}: {e}"))
            });
        match parsed {
            Ok(triple) if !seen.insert(triple.id.clone()) => errors.push(LineError {
                line: line_no,
                message: format!("duplicate id {:?}", triple.id),
            }),
            Ok(triple) => triples.push(triple),
            Err(message) => errors.push(LineError { line: line_no, message }),
        }
    }
    if !errors.is_empty() {
        return Err(DataError::Malformed {
            path: path.to_path_buf(),
            errors,
        });
    }
    Ok(TripleDataset {
        name: dataset_name(path),
        triples,
    })
}

#[derive(Serialize)]
struct CanonicalTripleRecord<'a> {
    id: &'a str,
    source: &'a str,
    correct: &'a str,
    incorrect: &'a str,
}

pub fn write_canonical_triples(path: &Path, triples: &[SummaryTriple]) -> Result<(), DataError> {
    write_lines(path, triples, |t| {
        serde_json::to_string(&CanonicalTripleRecord {
            id: &t.id,
            source: &t.source,
            correct: &t.correct,
            incorrect: &t.incorrect,
        })
        .expect("string fields always serialize")
    })
}

/// Reads a summary-correctness release that is either a JSON array of
/// objects or JSONL. Accepted field names: `article_sent`/`source`,
/// `correct_sent`/`correct`, `incorrect_sent`/`incorrect`, and
/// `id`/`hash` (missing ids become `sc-0001`, `sc-0002`, ...).
pub fn load_sc_release(path: &Path) -> Result<TripleDataset, DataError> {
    let text = read_file(path)?;
    let records: Vec<(usize, Result<Value, String>)> = if text.trim_start().starts_with('[') {
        match serde_json::from_str::<Vec<Value>>(&text) {
            Ok(values) => values.into_iter().enumerate().map(|(i, v)| (i + 1, Ok(v))).collect(),
            Err(e) => vec![(e.line(), Err(format!("invalid JSON array: {e}")))],
        }
    } else {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, serde_json::from_str(l).map_err(|e| format!("invalid JSON: {e}"))))
            .collect()
    };

    let mut errors = Vec::new();
    let mut triples = Vec::new();
    let mut seen = HashSet::new();
    for (ordinal, (line, record)) in records.into_iter().enumerate() {
        let parsed = record.and_then(|v| {
            let obj = v.as_object().ok_or("record is not a JSON object")?.clone();
            let id = required_str(&obj, &["id", "hash"]).unwrap_or_else(|_| format!("sc-{:04}", ordinal + 1));
            let source = required_str(&obj, &["article_sent", "source"])?;
            let correct = required_str(&obj, &["correct_sent", "correct"])?;
            let incorrect = required_str(&obj, &["incorrect_sent", "incorrect"])?;
            SummaryTriple::new(id.clone(), &source, &correct, &incorrect).map_err(|e| format!("triple {id:?}: {e}"))
        });
        match parsed {
            Ok(t) if !seen.insert(t.id.clone()) => errors.push(LineError {
                line,
                message: format!("duplicate id {:?}", t.id),
            }),
            Ok(t) => triples.push(t),
            Err(message) => errors.push(LineError { line, message }),
        }
    }
    if !errors.is_empty() {
        return Err(DataError::Malformed {
            path: path.to_path_buf(),
            errors,
        });
    }
    Ok(TripleDataset {
        name: dataset_name(path),
        triples,
    })
}

/// A premise/hypothesis pair borrowed from a triple or example.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TextPair<'a> {
    pub premise: &'a str,
    pub hypothesis: &'a str,
}

/// Splits a triple into its `(d, s+)` and `(d, s-)` pairs. The source is
/// always the premise.
pub fn triple_to_pairs(triple: &SummaryTriple) -> (TextPair<'_>, TextPair<'_>) {
    (
        TextPair {
            premise: &triple.source,
            hypothesis: &triple.correct,
        },
        TextPair {
            premise: &triple.source,
            hypothesis: &triple.incorrect,
        },
    )
}

/// Concatenates corpora and shuffles the result deterministically.
pub fn concat_corpora(corpora: Vec<Vec<NliExample>>, shuffle_seed: u64) -> Vec<NliExample> {
    let mut all: Vec<NliExample> = corpora.into_iter().flatten().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    all.shuffle(&mut rng);
    all
}

/// Label histogram in entailment/neutral/contradiction order.
pub fn label_counts(examples: &[NliExample]) -> [usize; 3] {
    let mut counts = [0; 3];
    for ex in examples {
        counts[ex.label.index()] += 1;
    }
    counts
}
