//! Word-level tokenization for the built-in encoder.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

/// Anything that turns text into token ids and knows the two special ids a
/// pair encoding needs.
pub trait Tokenizer {
    fn tokenize(&self, text: &str) -> Vec<u32>;
    fn cls_id(&self) -> u32;
    fn sep_id(&self) -> u32;
    /// Surface form of an id, for attention exports.
    fn token(&self, id: u32) -> Option<&str>;
}

/// Splits on whitespace and isolates punctuation, keeping apostrophes and
/// hyphens that sit inside a word. Case is preserved.
pub fn split_words(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let bytes = word.as_bytes();
        let mut start = 0;
        for (i, ch) in word.char_indices() {
            let inner = i > 0 && i + ch.len_utf8() < word.len();
            let joiner = (ch == '\'' || ch == '-')
                && inner
                && bytes[i - 1].is_ascii_alphanumeric()
                && bytes[i + 1].is_ascii_alphanumeric();
            if ch.is_ascii_punctuation() && !joiner {
                if start < i {
                    out.push(&word[start..i]);
                }
                out.push(&word[i..i + 1]);
                start = i + 1;
            }
        }
        if start < word.len() {
            out.push(&word[start..]);
        }
    }
    out
}

/// A closed word vocabulary. Ids 0..4 are `[PAD]`, `[UNK]`, `[CLS]`, `[SEP]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct WordVocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for WordVocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Self { tokens, index }
    }
}

impl From<WordVocab> for Vec<String> {
    fn from(vocab: WordVocab) -> Self {
        vocab.tokens
    }
}

impl WordVocab {
    /// Builds a vocabulary from a text corpus, most frequent words first
    /// (ties alphabetical), optionally capped at `max_size` entries
    /// including the specials.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, max_size: Option<usize>) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for text in texts {
            for w in split_words(text) {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut words: Vec<(&str, usize)> = counts.into_iter().collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let mut tokens: Vec<String> = [PAD, UNK, CLS, SEP].iter().map(|s| s.to_string()).collect();
        let cap = max_size.unwrap_or(usize::MAX).saturating_sub(tokens.len());
        tokens.extend(words.into_iter().take(cap).map(|(w, _)| w.to_string()));
        tokens.into()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    fn special(&self, token: &str) -> u32 {
        self.id(token).expect("vocabulary always holds the special tokens")
    }
}

impl Tokenizer for WordVocab {
    fn tokenize(&self, text: &str) -> Vec<u32> {
        let unk = self.special(UNK);
        split_words(text)
            .into_iter()
            .map(|w| self.id(w).unwrap_or(unk))
            .collect()
    }

    fn cls_id(&self) -> u32 {
        self.special(CLS)
    }

    fn sep_id(&self) -> u32 {
        self.special(SEP)
    }

    fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }
}
