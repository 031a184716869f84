//! Contrastive corpus statistics: answer length, sentence length, type-token
//! ratio, Flesch-Kincaid grade and dependency distance, with per-class
//! histograms.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Corpus, Document, Label, ParsedSentence};
use crate::text::{count_syllables, split_sentences, tokenize, words};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("document has no sentences")]
    NoSentences,
    #[error("document has no word tokens")]
    NoWords,
    #[error("sentence has no non-root arcs")]
    NoArcs,
    #[error("bin edges must be strictly ascending with at least two edges")]
    BadEdges,
    #[error("corpus must contain both classes, missing {0}")]
    MissingClass(Label),
    #[error("no {label} values available for {stat}")]
    EmptyDistribution { label: Label, stat: &'static str },
}

pub fn answer_length(doc: &Document) -> usize {
    tokenize(&doc.body).iter().filter(|t| t.is_word).count()
}

pub fn mean_sentence_length(doc: &Document) -> Result<f64, StatsError> {
    let n_sent = split_sentences(&doc.body).len();
    if n_sent == 0 {
        return Err(StatsError::NoSentences);
    }
    Ok(answer_length(doc) as f64 / n_sent as f64)
}

pub fn type_token_ratio(doc: &Document) -> Result<f64, StatsError> {
    let ws = words(&doc.body);
    if ws.is_empty() {
        return Err(StatsError::NoWords);
    }
    let types: HashSet<&str> = ws.iter().map(String::as_str).collect();
    Ok(types.len() as f64 / ws.len() as f64)
}

/// Grade level from raw counts. May be negative.
pub fn fkgl_from_counts(words: usize, sentences: usize, syllables: usize) -> f64 {
    let wps = words as f64 / sentences as f64;
    let spw = syllables as f64 / words as f64;
    0.39 * wps + 11.8 * spw - 15.59
}

pub fn flesch_kincaid_grade(doc: &Document) -> Result<f64, StatsError> {
    let n_sent = split_sentences(&doc.body).len();
    if n_sent == 0 {
        return Err(StatsError::NoSentences);
    }
    let ws = words(&doc.body);
    if ws.is_empty() {
        return Err(StatsError::NoWords);
    }
    let syllables: usize = ws.iter().map(|w| count_syllables(w)).sum();
    Ok(fkgl_from_counts(ws.len(), n_sent, syllables))
}

/// Mean |position - head| over non-root tokens.
pub fn mean_dependency_distance(sent: &ParsedSentence) -> Result<f64, StatsError> {
    let (sum, n) = sent
        .heads()
        .iter()
        .enumerate()
        .filter(|(_, &h)| h != 0)
        .fold((0usize, 0usize), |(s, n), (i, &h)| (s + (i + 1).abs_diff(h), n + 1));
    if n == 0 {
        return Err(StatsError::NoArcs);
    }
    Ok(sum as f64 / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }
}

/// Bin `values` into half-open bins `[e_i, e_{i+1})`; the last bin is closed.
pub fn histogram(values: &[f64], edges: &[f64]) -> Result<Histogram, StatsError> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(StatsError::BadEdges);
    }
    let last = *edges.last().unwrap();
    let mut h = Histogram {
        edges: edges.to_vec(),
        counts: vec![0; edges.len() - 1],
        underflow: 0,
        overflow: 0,
    };
    for &v in values {
        if v < edges[0] || v.is_nan() {
            h.underflow += 1;
        } else if v > last {
            h.overflow += 1;
        } else if v == last {
            *h.counts.last_mut().unwrap() += 1;
        } else {
            // Index of the first edge strictly greater than v, minus one.
            let idx = edges.partition_point(|&e| e <= v) - 1;
            h.counts[idx] += 1;
        }
    }
    Ok(h)
}

fn linspace(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins)
        .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
        .collect()
}

/// Fixed bin edges per statistic so reports are comparable across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinConfig {
    pub answer_length: Vec<f64>,
    pub sentence_length: Vec<f64>,
    pub ttr: Vec<f64>,
    pub fkgl: Vec<f64>,
    pub dependency_distance: Vec<f64>,
}

impl Default for BinConfig {
    fn default() -> Self {
        Self {
            answer_length: linspace(0.0, 1000.0, 40),
            sentence_length: linspace(0.0, 80.0, 40),
            ttr: linspace(0.0, 1.0, 10),
            fkgl: linspace(-5.0, 25.0, 30),
            dependency_distance: linspace(0.0, 10.0, 40),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub mean: f64,
    /// Number of values contributing to `mean`.
    pub n: usize,
    pub histogram: Histogram,
}

impl StatSummary {
    fn from_values(
        values: &[f64],
        edges: &[f64],
        label: Label,
        stat: &'static str,
    ) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::EmptyDistribution { label, stat });
        }
        Ok(Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            n: values.len(),
            histogram: histogram(values, edges)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub answer_length: StatSummary,
    pub sentence_length: StatSummary,
    pub ttr: StatSummary,
    pub fkgl: StatSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dependency_distance: Option<StatSummary>,
}

/// Per-class statistics, serialized as `{class: {stat: {...}}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatsReport {
    pub classes: BTreeMap<Label, ClassStats>,
}

impl StatsReport {
    pub fn class(&self, label: Label) -> &ClassStats {
        &self.classes[&label]
    }
}

/// Dependency annotations grouped by the class of the text they came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassParses {
    pub human: Vec<ParsedSentence>,
    pub machine: Vec<ParsedSentence>,
}

impl ClassParses {
    fn get(&self, label: Label) -> &[ParsedSentence] {
        match label {
            Label::Human => &self.human,
            Label::Machine => &self.machine,
        }
    }
}

/// Documents that violate a per-statistic precondition (no words, no
/// sentences, no arcs) are left out of that statistic only.
pub fn corpus_report(
    corpus: &Corpus,
    parses: Option<&ClassParses>,
    bins: &BinConfig,
) -> Result<StatsReport, StatsError> {
    let counts = corpus.class_counts();
    for label in [Label::Human, Label::Machine] {
        if counts.get(label) == 0 {
            return Err(StatsError::MissingClass(label));
        }
    }
    let mut classes = BTreeMap::new();
    for label in [Label::Human, Label::Machine] {
        let docs: Vec<&Document> = corpus.iter().filter(|d| d.label == label).collect();
        let lengths: Vec<f64> = docs.iter().map(|d| answer_length(d) as f64).collect();
        let msl: Vec<f64> = docs
            .iter()
            .filter_map(|d| mean_sentence_length(d).ok())
            .collect();
        let ttr: Vec<f64> = docs.iter().filter_map(|d| type_token_ratio(d).ok()).collect();
        let fkgl: Vec<f64> = docs
            .iter()
            .filter_map(|d| flesch_kincaid_grade(d).ok())
            .collect();
        let dependency_distance = match parses {
            Some(p) => {
                let dd: Vec<f64> = p
                    .get(label)
                    .iter()
                    .filter_map(|s| mean_dependency_distance(s).ok())
                    .collect();
                Some(StatSummary::from_values(
                    &dd,
                    &bins.dependency_distance,
                    label,
                    "dependency_distance",
                )?)
            }
            None => None,
        };
        classes.insert(
            label,
            ClassStats {
                answer_length: StatSummary::from_values(
                    &lengths,
                    &bins.answer_length,
                    label,
                    "answer_length",
                )?,
                sentence_length: StatSummary::from_values(
                    &msl,
                    &bins.sentence_length,
                    label,
                    "sentence_length",
                )?,
                ttr: StatSummary::from_values(&ttr, &bins.ttr, label, "ttr")?,
                fkgl: StatSummary::from_values(&fkgl, &bins.fkgl, label, "fkgl")?,
                dependency_distance,
            },
        );
    }
    Ok(StatsReport { classes })
}
