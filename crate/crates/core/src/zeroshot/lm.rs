//! Interpolated Kneser-Ney n-gram language model.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ZeroshotError;
use crate::text::{split_sentences, words, Vocabulary};

pub const LM_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
struct ContextStats {
    total: u64,
    distinct: u64,
}

/// Counts used for one order: raw counts at the top order, continuation
/// counts below it.
#[derive(Debug, Clone, Default)]
struct Level {
    counts: HashMap<Vec<u32>, u64>,
    contexts: HashMap<Vec<u32>, ContextStats>,
}

impl Level {
    fn from_counts(counts: HashMap<Vec<u32>, u64>) -> Self {
        let mut contexts: HashMap<Vec<u32>, ContextStats> = HashMap::new();
        for (gram, &c) in &counts {
            let s = contexts
                .entry(gram[..gram.len() - 1].to_vec())
                .or_insert(ContextStats { total: 0, distinct: 0 });
            s.total += c;
            s.distinct += 1;
        }
        Self { counts, contexts }
    }
}

/// Log probability of a text together with the number of predicted tokens
/// (words plus one end marker per sentence).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogProb {
    pub total: f64,
    pub tokens: usize,
}

impl LogProb {
    pub fn per_token(&self) -> f64 {
        self.total / self.tokens as f64
    }
}

/// Word ids come from the vocabulary (unknown-word slot last); the end
/// marker and start marker follow it.
#[derive(Debug)]
pub struct NGramLm {
    order: usize,
    discount: f64,
    vocab: Vocabulary,
    /// Raw n-gram counts for orders 1..=order, indexed by order - 1.
    tables: Vec<HashMap<Vec<u32>, u64>>,
    levels: Vec<Level>,
    passes: AtomicU64,
}

impl Clone for NGramLm {
    fn clone(&self) -> Self {
        Self {
            order: self.order,
            discount: self.discount,
            vocab: self.vocab.clone(),
            tables: self.tables.clone(),
            levels: self.levels.clone(),
            passes: AtomicU64::new(0),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct LmFile {
    schema_version: u64,
    order: usize,
    discount: f64,
    vocab: Vocabulary,
    /// One table per order, each a sorted list of `[ngram ids, count]`.
    counts: Vec<Vec<(Vec<u32>, u64)>>,
}

fn check_params(order: usize, discount: f64) -> Result<(), ZeroshotError> {
    if order < 2 {
        return Err(ZeroshotError::InvalidConfig(format!("LM order must be >= 2, got {order}")));
    }
    if !(discount > 0.0 && discount < 1.0) {
        return Err(ZeroshotError::InvalidConfig(format!(
            "discount must lie in (0, 1), got {discount}"
        )));
    }
    Ok(())
}

/// Word lists for every non-empty sentence of `text`.
fn sentences(text: &str) -> Vec<Vec<String>> {
    split_sentences(text)
        .iter()
        .map(|s| words(s))
        .filter(|w| !w.is_empty())
        .collect()
}

/// Train on every sentence of every text.
pub fn train_kn_lm<I, S>(texts: I, order: usize, discount: f64) -> Result<NGramLm, ZeroshotError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    check_params(order, discount)?;
    let sents: Vec<Vec<String>> = texts
        .into_iter()
        .flat_map(|t| sentences(t.as_ref()))
        .collect();
    if sents.is_empty() {
        return Err(ZeroshotError::EmptyCorpus);
    }
    let longest = sents.iter().map(Vec::len).max().unwrap_or(0);
    if order > longest + 1 {
        return Err(ZeroshotError::OrderTooLarge { order, longest });
    }
    let vocab = Vocabulary::build(sents.iter().map(|s| s.join(" ")), 1)
        .map_err(|e| ZeroshotError::InvalidConfig(e.to_string()))?;

    let mut tables: Vec<HashMap<Vec<u32>, u64>> = vec![HashMap::new(); order];
    let eos = vocab.len() as u32;
    let bos = eos + 1;
    for s in &sents {
        let mut padded = vec![bos; order - 1];
        padded.extend(s.iter().map(|w| vocab.id(w)));
        padded.push(eos);
        for end in order - 1..padded.len() {
            for m in 1..=order {
                let gram = padded[end + 1 - m..=end].to_vec();
                *tables[m - 1].entry(gram).or_insert(0) += 1;
            }
        }
    }
    Ok(NGramLm::from_tables(order, discount, vocab, tables))
}

impl NGramLm {
    fn from_tables(
        order: usize,
        discount: f64,
        vocab: Vocabulary,
        tables: Vec<HashMap<Vec<u32>, u64>>,
    ) -> Self {
        let mut levels = Vec::with_capacity(order);
        for m in 1..order {
            let mut cont: HashMap<Vec<u32>, u64> = HashMap::new();
            for gram in tables[m].keys() {
                *cont.entry(gram[1..].to_vec()).or_insert(0) += 1;
            }
            levels.push(Level::from_counts(cont));
        }
        levels.push(Level::from_counts(tables[order - 1].clone()));
        Self {
            order,
            discount,
            vocab,
            tables,
            levels,
            passes: AtomicU64::new(0),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn eos_id(&self) -> u32 {
        self.vocab.len() as u32
    }

    pub fn bos_id(&self) -> u32 {
        self.vocab.len() as u32 + 1
    }

    /// Size of the predicted vocabulary: words, the unknown-word slot and
    /// the end marker.
    pub fn predicted_len(&self) -> usize {
        self.vocab.len() + 1
    }

    /// Raw count of an n-gram given as word strings (`<s>` and `</s>` are
    /// accepted as markers).
    pub fn count(&self, gram: &[&str]) -> u64 {
        if gram.is_empty() || gram.len() > self.order {
            return 0;
        }
        let ids: Vec<u32> = gram
            .iter()
            .map(|w| match *w {
                "<s>" => self.bos_id(),
                "</s>" => self.eos_id(),
                w => self.vocab.id(w),
            })
            .collect();
        self.tables[gram.len() - 1].get(&ids).copied().unwrap_or(0)
    }

    /// P(w | history), using at most the last `order - 1` history ids.
    pub fn prob_id(&self, history: &[u32], w: u32) -> f64 {
        let keep = history.len().min(self.order - 1);
        self.prob_at(self.order, &history[history.len() - keep..], w)
    }

    fn prob_at(&self, m: usize, history: &[u32], w: u32) -> f64 {
        let lower = if m == 1 {
            1.0 / self.predicted_len() as f64
        } else {
            self.prob_at(m - 1, history, w)
        };
        let ctx_len = (m - 1).min(history.len());
        if ctx_len < m - 1 {
            return lower;
        }
        let ctx = &history[history.len() - ctx_len..];
        let level = &self.levels[m - 1];
        let Some(stats) = level.contexts.get(ctx) else {
            return lower;
        };
        let mut key = Vec::with_capacity(m);
        key.extend_from_slice(ctx);
        key.push(w);
        let c = level.counts.get(&key).copied().unwrap_or(0) as f64;
        let total = stats.total as f64;
        (c - self.discount).max(0.0) / total
            + self.discount * stats.distinct as f64 / total * lower
    }

    /// Natural-log probability of `text`, one scoring pass.
    pub fn log_prob_detail(&self, text: &str) -> Result<LogProb, ZeroshotError> {
        let sents = sentences(text);
        if sents.is_empty() {
            return Err(ZeroshotError::EmptyDocument);
        }
        self.passes.fetch_add(1, Ordering::Relaxed);
        let mut total = 0.0;
        let mut tokens = 0;
        for s in &sents {
            let mut history = vec![self.bos_id(); self.order - 1];
            let ids = s.iter().map(|w| self.vocab.id(w)).chain([self.eos_id()]);
            for id in ids {
                total += self.prob_id(&history, id).ln();
                history.remove(0);
                history.push(id);
                tokens += 1;
            }
        }
        Ok(LogProb { total, tokens })
    }

    pub fn log_prob(&self, text: &str) -> Result<f64, ZeroshotError> {
        Ok(self.log_prob_detail(text)?.total)
    }

    /// exp of the negative mean per-token log probability over `texts`.
    pub fn perplexity<I, S>(&self, texts: I) -> Result<f64, ZeroshotError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let (mut total, mut tokens) = (0.0, 0usize);
        for t in texts {
            let lp = self.log_prob_detail(t.as_ref())?;
            total += lp.total;
            tokens += lp.tokens;
        }
        if tokens == 0 {
            return Err(ZeroshotError::EmptyDocument);
        }
        Ok((-total / tokens as f64).exp())
    }

    /// Number of `log_prob` calls made so far.
    pub fn scoring_passes(&self) -> u64 {
        self.passes.load(Ordering::Relaxed)
    }

    pub fn reset_passes(&self) {
        self.passes.store(0, Ordering::Relaxed);
    }

    /// Draw one sentence of known words, stopping at the end marker or
    /// after `max_len` words. The unknown-word slot is never drawn.
    pub fn sample_sentence<R: Rng>(&self, rng: &mut R, max_len: usize) -> Vec<String> {
        let mut history = vec![self.bos_id(); self.order - 1];
        let mut out = Vec::new();
        let unk = self.vocab.unk_id();
        let eos = self.eos_id();
        let mut probs = vec![0.0; self.predicted_len()];
        while out.len() < max_len {
            for (w, p) in probs.iter_mut().enumerate() {
                let w = w as u32;
                *p = if w == unk { 0.0 } else { self.prob_id(&history, w) };
            }
            let mass: f64 = probs.iter().sum();
            let mut r = rng.random::<f64>() * mass;
            let mut pick = eos;
            for (w, &p) in probs.iter().enumerate() {
                if p > 0.0 && r < p {
                    pick = w as u32;
                    break;
                }
                r -= p;
            }
            if pick == eos {
                if out.is_empty() {
                    continue;
                }
                break;
            }
            out.push(self.vocab.word(pick).to_string());
            history.remove(0);
            history.push(pick);
        }
        out
    }

    /// `n_sentences` sampled sentences, each terminated by a period.
    pub fn sample_document<R: Rng>(&self, rng: &mut R, n_sentences: usize, max_len: usize) -> String {
        (0..n_sentences)
            .map(|_| format!("{}.", self.sample_sentence(rng, max_len).join(" ")))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn to_json(&self) -> String {
        let counts = self
            .tables
            .iter()
            .map(|t| {
                let mut rows: Vec<(Vec<u32>, u64)> = t.iter().map(|(k, &v)| (k.clone(), v)).collect();
                rows.sort();
                rows
            })
            .collect();
        let file = LmFile {
            schema_version: LM_SCHEMA_VERSION,
            order: self.order,
            discount: self.discount,
            vocab: self.vocab.clone(),
            counts,
        };
        let mut s = serde_json::to_string(&file).expect("LM serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ZeroshotError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ZeroshotError::Format(e.to_string()))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(LM_SCHEMA_VERSION) => {}
            Some(v) => return Err(ZeroshotError::SchemaVersion(v)),
            None => return Err(ZeroshotError::Format("missing schema_version".into())),
        }
        let file: LmFile =
            serde_json::from_value(value).map_err(|e| ZeroshotError::Format(e.to_string()))?;
        check_params(file.order, file.discount)?;
        if file.counts.len() != file.order {
            return Err(ZeroshotError::Format("one count table per order expected".into()));
        }
        let eos = file.vocab.len() as u32;
        let bos = eos + 1;
        let mut tables = Vec::with_capacity(file.order);
        for (i, rows) in file.counts.into_iter().enumerate() {
            let mut t = HashMap::with_capacity(rows.len());
            for (gram, c) in rows {
                let last = *gram.last().unwrap_or(&bos);
                if gram.len() != i + 1 || c == 0 || last == bos || gram.iter().any(|&id| id > bos) {
                    return Err(ZeroshotError::Format(format!("invalid order-{} entry", i + 1)));
                }
                if t.insert(gram, c).is_some() {
                    return Err(ZeroshotError::Format("duplicate n-gram".into()));
                }
            }
            tables.push(t);
        }
        // Every lower table must be the suffix marginal of the one above.
        for m in 1..file.order {
            let mut marginal: HashMap<Vec<u32>, u64> = HashMap::new();
            for (gram, &c) in &tables[m] {
                *marginal.entry(gram[1..].to_vec()).or_insert(0) += c;
            }
            if marginal != tables[m - 1] {
                return Err(ZeroshotError::Format(format!("order-{m} counts are inconsistent")));
            }
        }
        if tables[0].is_empty() {
            return Err(ZeroshotError::EmptyCorpus);
        }
        Ok(Self::from_tables(file.order, file.discount, file.vocab, tables))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ZeroshotError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| ZeroshotError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ZeroshotError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ZeroshotError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}
