//! Tokenization, sentence segmentation, syllable counting and vocabulary
//! construction shared by every downstream module.
//!
//! Everything here is deterministic and allocation-light. Word tokens are
//! lowercased; casing survives only in [`crate::ingest::Document::body`].

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Surface form reserved for out-of-vocabulary words.
pub const UNK: &str = "<unk>";

/// Abbreviations whose trailing period never ends a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "jr.", "sr.", "vs.", "etc.", "e.g.", "i.e.",
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("min_count must be at least 1")]
    InvalidMinCount,
    #[error("duplicate word `{0}` in vocabulary")]
    DuplicateWord(String),
    #[error("`{0}` is reserved for the unknown-word slot")]
    ReservedWord(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    /// False for standalone punctuation and symbols.
    pub is_word: bool,
}

/// A token together with its byte range in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpannedToken {
    pub token: Token,
    pub span: Range<usize>,
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Tokenize with byte spans into `text`.
///
/// A word is a maximal run of alphanumeric characters, where an apostrophe
/// joins two alphanumeric runs (`don't`). Every other non-whitespace
/// character is its own punctuation token.
pub fn tokenize_spans(text: &str) -> Vec<SpannedToken> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_alphanumeric() {
            let mut j = i + 1;
            while j < chars.len() {
                let cj = chars[j].1;
                if cj.is_alphanumeric() {
                    j += 1;
                } else if is_apostrophe(cj)
                    && j + 1 < chars.len()
                    && chars[j + 1].1.is_alphanumeric()
                {
                    j += 2;
                } else {
                    break;
                }
            }
            let end = chars.get(j).map_or(text.len(), |&(b, _)| b);
            out.push(SpannedToken {
                token: Token {
                    surface: text[start..end].to_lowercase(),
                    is_word: true,
                },
                span: start..end,
            });
            i = j;
        } else {
            let end = start + c.len_utf8();
            out.push(SpannedToken {
                token: Token {
                    surface: c.to_string(),
                    is_word: false,
                },
                span: start..end,
            });
            i += 1;
        }
    }
    out
}

pub fn tokenize(text: &str) -> Vec<Token> {
    tokenize_spans(text).into_iter().map(|t| t.token).collect()
}

/// Lowercased word tokens only.
pub fn words(text: &str) -> Vec<String> {
    tokenize_spans(text)
        .into_iter()
        .filter(|t| t.token.is_word)
        .map(|t| t.token.surface)
        .collect()
}

fn ends_with_abbreviation(segment: &str) -> bool {
    let last = segment.split_whitespace().last().unwrap_or("");
    let last = last.trim_start_matches(|c: char| !c.is_alphanumeric());
    let lower = last.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}

/// Split normalized text into sentences, keeping terminators.
///
/// A sentence ends at `.`, `!` or `?` followed by whitespace or end of text,
/// unless the period closes a known abbreviation.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((idx, c)) = iter.next() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let boundary = match iter.peek() {
            None => true,
            Some(&(_, next)) => next.is_whitespace(),
        };
        if !boundary {
            continue;
        }
        let end = idx + c.len_utf8();
        let candidate = &text[start..end];
        if c == '.' && ends_with_abbreviation(candidate) {
            continue;
        }
        let trimmed = candidate.trim();
        if !trimmed.is_empty() {
            sentences.push(trimmed.to_string());
        }
        start = end;
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        sentences.push(rest.to_string());
    }
    sentences
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel-group syllable estimate with a silent-final-`e` correction.
pub fn count_syllables(word: &str) -> usize {
    let lower = word.to_lowercase();
    let mut groups = 0;
    let mut in_group = false;
    for c in lower.chars() {
        let v = is_vowel(c);
        if v && !in_group {
            groups += 1;
        }
        in_group = v;
    }
    if groups > 1 && lower.ends_with('e') {
        groups -= 1;
    }
    groups.max(1)
}

/// Word-to-id mapping with a single reserved unknown-word id.
///
/// Ids are contiguous from 0; the unknown-word slot is always the last id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabRepr", into = "VocabRepr")]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    words: Vec<String>,
    counts: Vec<u64>,
}

impl TryFrom<VocabRepr> for Vocabulary {
    type Error = VocabError;

    fn try_from(repr: VocabRepr) -> Result<Self, Self::Error> {
        let unk_count = repr.counts.get(repr.words.len()).copied().unwrap_or(0);
        Vocabulary::from_entries(repr.words.into_iter().zip(repr.counts), unk_count)
    }
}

impl From<Vocabulary> for VocabRepr {
    fn from(v: Vocabulary) -> Self {
        let n = v.words.len() - 1;
        let mut words = v.words;
        words.truncate(n);
        VocabRepr {
            words,
            counts: v.counts,
        }
    }
}

impl Vocabulary {
    /// Count word tokens over `texts` and keep words seen at least
    /// `min_count` times, ordered by (frequency desc, word asc).
    pub fn build<I, S>(texts: I, min_count: u64) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if min_count < 1 {
            return Err(VocabError::InvalidMinCount);
        }
        let mut freq: HashMap<String, u64> = HashMap::new();
        let mut seen_any = false;
        for text in texts {
            seen_any = true;
            for w in words(text.as_ref()) {
                *freq.entry(w).or_insert(0) += 1;
            }
        }
        if !seen_any || freq.is_empty() {
            return Err(VocabError::EmptyCorpus);
        }
        Self::from_counts(freq, min_count)
    }

    pub fn from_counts(freq: HashMap<String, u64>, min_count: u64) -> Result<Self, VocabError> {
        let mut kept: Vec<(String, u64)> = Vec::new();
        let mut unk = 0;
        for (w, c) in freq {
            if c >= min_count {
                kept.push((w, c));
            } else {
                unk += c;
            }
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_entries(kept, unk)
    }

    /// Build from words in the given id order. Used for pretrained vectors.
    pub fn from_entries<I>(entries: I, unk_count: u64) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = (String, u64)>,
    {
        let mut words = Vec::new();
        let mut counts = Vec::new();
        let mut index = HashMap::new();
        for (w, c) in entries {
            if w == UNK {
                return Err(VocabError::ReservedWord(w));
            }
            if index.insert(w.clone(), words.len() as u32).is_some() {
                return Err(VocabError::DuplicateWord(w));
            }
            words.push(w);
            counts.push(c);
        }
        index.insert(UNK.to_string(), words.len() as u32);
        words.push(UNK.to_string());
        counts.push(unk_count);
        Ok(Self {
            words,
            counts,
            index,
        })
    }

    /// Total number of ids including the unknown-word slot.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    /// True when only the unknown-word slot exists.
    pub fn is_empty(&self) -> bool {
        self.words.len() == 1
    }

    pub fn unk_id(&self) -> u32 {
        (self.words.len() - 1) as u32
    }

    /// Id of `word`, falling back to the unknown-word id.
    pub fn id(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or_else(|| self.unk_id())
    }

    /// Id of `word` if it is a real (non-UNK) entry.
    pub fn get(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied().filter(|&id| id != self.unk_id())
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    /// Known words in id order, excluding the unknown-word slot.
    pub fn known_words(&self) -> impl Iterator<Item = (u32, &str, u64)> {
        let n = self.words.len() - 1;
        self.words[..n]
            .iter()
            .zip(&self.counts)
            .enumerate()
            .map(|(i, (w, &c))| (i as u32, w.as_str(), c))
    }
}
