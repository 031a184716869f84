//! Dataset ingestion: HC3-style JSONL answers, CoNLL-U dependency
//! annotations, text normalization and stratified splitting.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed JSON: {message}")]
    MalformedJson { line: usize, message: String },
    #[error("line {line}: missing or invalid field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("document is empty after normalization")]
    EmptyDocument,
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("invalid split fractions: {0}")]
    InvalidSplit(String),
    #[error("cannot split an empty corpus")]
    EmptyCorpus,
    #[error("split `{split}` receives no {label} documents")]
    DegenerateSplit { split: &'static str, label: Label },
    #[error("line {line}: {message}")]
    Conllu { line: usize, message: String },
}

/// Origin of a text sample. Positive class everywhere is `Machine`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Human,
    Machine,
}

impl Label {
    pub fn is_machine(self) -> bool {
        self == Label::Machine
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Human => "human",
            Label::Machine => "machine",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub body: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_question: Option<String>,
}

impl Document {
    /// Build a document, normalizing `raw`.
    pub fn new(id: impl Into<String>, raw: &str, label: Label) -> Result<Self, IngestError> {
        Ok(Self {
            id: id.into(),
            body: normalize(raw)?,
            label,
            source_question: None,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub human: usize,
    pub machine: usize,
}

impl ClassCounts {
    pub fn get(&self, label: Label) -> usize {
        match label {
            Label::Human => self.human,
            Label::Machine => self.machine,
        }
    }

    pub fn total(&self) -> usize {
        self.human + self.machine
    }
}

/// Ordered collection of documents with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Corpus {
    documents: Vec<Document>,
    #[serde(skip)]
    class_counts: ClassCounts,
}

impl<'de> Deserialize<'de> for Corpus {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            documents: Vec<Document>,
        }
        let repr = Repr::deserialize(d)?;
        Corpus::new(repr.documents).map_err(serde::de::Error::custom)
    }
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self, IngestError> {
        let mut seen = HashSet::with_capacity(documents.len());
        let mut counts = ClassCounts::default();
        for doc in &documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(IngestError::DuplicateId(doc.id.clone()));
            }
            match doc.label {
                Label::Human => counts.human += 1,
                Label::Machine => counts.machine += 1,
            }
        }
        Ok(Self {
            documents,
            class_counts: counts,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn class_counts(&self) -> ClassCounts {
        self.class_counts
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn has_both_classes(&self) -> bool {
        self.class_counts.human > 0 && self.class_counts.machine > 0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.documents.iter()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.documents.iter().map(|d| d.id.as_str()).collect()
    }

    /// Documents whose id is in `ids`, in corpus order.
    pub fn subset(&self, ids: &[String]) -> Corpus {
        let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
        let docs = self
            .documents
            .iter()
            .filter(|d| wanted.contains(d.id.as_str()))
            .cloned()
            .collect();
        Corpus::new(docs).expect("subset of a valid corpus has unique ids")
    }

    pub fn into_documents(self) -> Vec<Document> {
        self.documents
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Document;
    type IntoIter = std::slice::Iter<'a, Document>;

    fn into_iter(self) -> Self::IntoIter {
        self.documents.iter()
    }
}

fn is_zero_width(c: char) -> bool {
    matches!(
        c,
        '\u{200B}' | '\u{200C}' | '\u{200D}' | '\u{2060}' | '\u{FEFF}'
    )
}

fn is_nbsp(c: char) -> bool {
    matches!(c, '\u{00A0}' | '\u{2007}' | '\u{202F}')
}

/// Canonical text form used for every document body.
///
/// Zero-width and non-whitespace control characters are dropped, non-breaking
/// spaces become spaces, the result is NFC-composed, and whitespace runs are
/// collapsed to one space with the ends trimmed.
pub fn normalize(raw: &str) -> Result<String, IngestError> {
    // Removal happens before NFC so that composition sees the final sequence.
    let filtered: String = raw
        .chars()
        .filter(|&c| !is_zero_width(c) && !(c.is_control() && !c.is_whitespace()))
        .map(|c| if is_nbsp(c) { ' ' } else { c })
        .collect();
    let composed: String = filtered.nfc().collect();
    let mut out = String::with_capacity(composed.len());
    for piece in composed.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(piece);
    }
    if out.is_empty() {
        return Err(IngestError::EmptyDocument);
    }
    Ok(out)
}

fn read_to_string(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn string_array<'a>(
    obj: &'a serde_json::Map<String, Value>,
    field: &'static str,
    line: usize,
) -> Result<Vec<&'a str>, IngestError> {
    let arr = obj
        .get(field)
        .and_then(Value::as_array)
        .ok_or(IngestError::MissingField { line, field })?;
    arr.iter()
        .map(|v| v.as_str().ok_or(IngestError::MissingField { line, field }))
        .collect()
}

/// Parse HC3 JSONL text. Line numbers are 1-based; answer indices 0-based.
pub fn parse_hc3(text: &str) -> Result<Corpus, IngestError> {
    let mut docs = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(raw_line).map_err(|e| IngestError::MalformedJson {
                line,
                message: e.to_string(),
            })?;
        let obj = value.as_object().ok_or(IngestError::MalformedJson {
            line,
            message: "expected a JSON object".into(),
        })?;
        let question = obj
            .get("question")
            .and_then(Value::as_str)
            .ok_or(IngestError::MissingField {
                line,
                field: "question",
            })?;
        let human = string_array(obj, "human_answers", line)?;
        let machine = string_array(obj, "chatgpt_answers", line)?;
        let question = normalize(question).ok();

        let tagged = human
            .iter()
            .enumerate()
            .map(|(k, a)| (format!("{line}-h{k}"), *a, Label::Human))
            .chain(
                machine
                    .iter()
                    .enumerate()
                    .map(|(k, a)| (format!("{line}-m{k}"), *a, Label::Machine)),
            );
        for (id, answer, label) in tagged {
            match normalize(answer) {
                Ok(body) => docs.push(Document {
                    id,
                    body,
                    label,
                    source_question: question.clone(),
                }),
                Err(_) => log::warn!("skipping {id}: empty after normalization"),
            }
        }
    }
    Corpus::new(docs)
}

pub fn load_hc3(path: impl AsRef<Path>) -> Result<Corpus, IngestError> {
    parse_hc3(&read_to_string(path.as_ref())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 0.8,
            val_frac: 0.1,
            test_frac: 0.1,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64, seed: u64) -> Result<Self, IngestError> {
        let spec = Self {
            train_frac,
            val_frac,
            test_frac,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        for (name, f) in [
            ("train", self.train_frac),
            ("val", self.val_frac),
            ("test", self.test_frac),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(IngestError::InvalidSplit(format!(
                    "{name} fraction {f} is outside (0, 1)"
                )));
            }
        }
        let sum = self.train_frac + self.val_frac + self.test_frac;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(IngestError::InvalidSplit(format!(
                "fractions sum to {sum}, not 1"
            )));
        }
        Ok(())
    }
}

/// floor(frac * n), tolerant of representation error such as 0.29 * 100.
pub(crate) fn floor_fraction(frac: f64, n: usize) -> usize {
    (frac * n as f64 + 1e-9).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Corpus,
    pub val: Corpus,
    pub test: Corpus,
}

/// Stratified, seeded three-way split.
///
/// Each class is shuffled independently; validation and test receive
/// `floor(frac * n_class)` documents and train keeps the remainder.
pub fn split(corpus: &Corpus, spec: &SplitSpec) -> Result<Splits, IngestError> {
    spec.validate()?;
    if corpus.is_empty() {
        return Err(IngestError::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut parts: [Vec<Document>; 3] = Default::default();
    for label in [Label::Human, Label::Machine] {
        let mut docs: Vec<&Document> = corpus.iter().filter(|d| d.label == label).collect();
        let n = docs.len();
        docs.shuffle(&mut rng);
        let n_val = floor_fraction(spec.val_frac, n);
        let n_test = floor_fraction(spec.test_frac, n);
        let n_train = n - n_val - n_test;
        for (name, size) in [("train", n_train), ("val", n_val), ("test", n_test)] {
            if size == 0 {
                return Err(IngestError::DegenerateSplit { split: name, label });
            }
        }
        let (val, rest) = docs.split_at(n_val);
        let (test, train) = rest.split_at(n_test);
        parts[0].extend(train.iter().map(|d| (*d).clone()));
        parts[1].extend(val.iter().map(|d| (*d).clone()));
        parts[2].extend(test.iter().map(|d| (*d).clone()));
    }
    for part in parts.iter_mut() {
        part.shuffle(&mut rng);
    }
    let [train, val, test] = parts;
    Ok(Splits {
        train: Corpus::new(train)?,
        val: Corpus::new(val)?,
        test: Corpus::new(test)?,
    })
}

/// One dependency-annotated sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSentence {
    tokens: Vec<String>,
    heads: Vec<usize>,
}

impl ParsedSentence {
    /// `heads` are 1-based token positions, 0 marking the root.
    pub fn new(tokens: Vec<String>, heads: Vec<usize>) -> Result<Self, String> {
        if tokens.len() != heads.len() {
            return Err(format!(
                "{} tokens but {} heads",
                tokens.len(),
                heads.len()
            ));
        }
        if let Some(h) = heads.iter().find(|&&h| h > tokens.len()) {
            return Err(format!("head {h} out of range for {} tokens", tokens.len()));
        }
        Ok(Self { tokens, heads })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn heads(&self) -> &[usize] {
        &self.heads
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Parse CoNLL-U text, keeping ID, FORM and HEAD.
pub fn parse_conllu(text: &str) -> Result<Vec<ParsedSentence>, IngestError> {
    let mut sentences = Vec::new();
    let mut tokens = Vec::new();
    let mut heads = Vec::new();
    let mut block_start = 1;

    let mut flush = |tokens: &mut Vec<String>,
                     heads: &mut Vec<usize>,
                     line: usize|
     -> Result<(), IngestError> {
        if tokens.is_empty() {
            return Ok(());
        }
        let sent = ParsedSentence::new(std::mem::take(tokens), std::mem::take(heads))
            .map_err(|message| IngestError::Conllu { line, message })?;
        sentences.push(sent);
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.trim().is_empty() {
            flush(&mut tokens, &mut heads, block_start)?;
            block_start = line + 1;
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = trimmed.split('\t').collect();
        if cols.len() < 7 {
            return Err(IngestError::Conllu {
                line,
                message: format!("expected at least 7 columns, found {}", cols.len()),
            });
        }
        let id = cols[0];
        // Multiword ranges (1-2) and empty nodes (1.1) carry no basic head.
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let pos: usize = id.parse().map_err(|_| IngestError::Conllu {
            line,
            message: format!("non-integer ID `{id}`"),
        })?;
        if pos != tokens.len() + 1 {
            return Err(IngestError::Conllu {
                line,
                message: format!("expected token ID {}, found {pos}", tokens.len() + 1),
            });
        }
        let head: usize = cols[6].parse().map_err(|_| IngestError::Conllu {
            line,
            message: format!("non-integer HEAD `{}`", cols[6]),
        })?;
        tokens.push(cols[1].to_string());
        heads.push(head);
    }
    flush(&mut tokens, &mut heads, block_start)?;
    Ok(sentences)
}

pub fn load_conllu(path: impl AsRef<Path>) -> Result<Vec<ParsedSentence>, IngestError> {
    parse_conllu(&read_to_string(path.as_ref())?)
}
