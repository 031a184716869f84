//! Skip-gram word vectors trained with negative sampling, the plain-text
//! vector format, and mean-pooled document features.
//!
//! The training objective for one (center, context) pair with negatives
//! `n_1..n_k` is
//!
//! ```text
//! L = -ln σ(v_c · u_o) - Σ_k ln σ(-v_c · u_{n_k})
//! ```
//!
//! where `v` rows live in the input matrix and `u` rows in the output matrix.
//! Negatives are drawn from the unigram distribution raised to 0.75.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{words, VocabError, Vocabulary};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("vocabulary is empty after applying min_count")]
    EmptyVocabulary,
    #[error("corpus has {tokens} in-vocabulary tokens, need at least {needed}")]
    InsufficientTokens { tokens: usize, needed: usize },
    #[error("invalid skip-gram config: {0}")]
    InvalidConfig(String),
    #[error("embedding file declares zero rows")]
    EmptyEmbedding,
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("vectors must have the same non-zero length")]
    DimensionMismatch,
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroNorm,
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipGramConfig {
    pub dim: usize,
    /// Maximum context offset on each side.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_count: u64,
    /// Frequent-word subsampling threshold; 0 disables subsampling.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_count: 2,
            subsample: 1e-3,
            seed: 0,
        }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let bad = |m: &str| Err(EmbeddingError::InvalidConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.window == 0 {
            return bad("window must be positive");
        }
        if self.negatives == 0 {
            return bad("negatives must be positive");
        }
        if self.min_count == 0 {
            return bad("min_count must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.subsample >= 0.0) {
            return bad("subsample must be non-negative");
        }
        Ok(())
    }
}

/// Vocabulary-indexed dense vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    vocab: Vocabulary,
    dim: usize,
    input: Vec<f64>,
    output: Option<Vec<f64>>,
    epoch_losses: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of rows, one per vocabulary id (the unknown-word slot included).
    pub fn rows(&self) -> usize {
        self.input.len() / self.dim
    }

    pub fn row(&self, id: u32) -> &[f64] {
        let start = id as usize * self.dim;
        &self.input[start..start + self.dim]
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.vocab.get(word).map(|id| self.row(id))
    }

    pub fn output_vectors(&self) -> Option<&[f64]> {
        self.output.as_deref()
    }

    /// Mean training loss per epoch; empty for loaded matrices.
    pub fn epoch_losses(&self) -> &[f64] {
        &self.epoch_losses
    }

    /// Write the `count dim` text format, one known word per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} {}", self.vocab.len() - 1, self.dim).unwrap();
        for (id, w, _) in self.vocab.known_words() {
            out.push_str(w);
            for v in self.row(id) {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|source| EmbeddingError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `-ln σ(x)` without overflow for large |x|.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Negative-sampling loss for one pair, evaluated in closed form.
pub fn negative_sampling_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    neg_log_sigmoid(dot(center, context))
        + negatives
            .iter()
            .map(|n| neg_log_sigmoid(-dot(center, n)))
            .sum::<f64>()
}

/// Analytic gradient of [`negative_sampling_loss`]: `(d center, d context,
/// d negatives)`.
pub fn negative_sampling_gradient(
    center: &[f64],
    context: &[f64],
    negatives: &[&[f64]],
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let dim = center.len();
    let mut output: Vec<f64> = context.to_vec();
    let mut targets = vec![(0u32, 1.0)];
    for (i, n) in negatives.iter().enumerate() {
        output.extend_from_slice(n);
        targets.push((i as u32 + 1, 0.0));
    }
    let before = output.clone();
    let mut grad_center = vec![0.0; dim];
    ns_step(center, &mut output, dim, &targets, 1.0, &mut grad_center);
    let grad_out: Vec<f64> = before.iter().zip(&output).map(|(a, b)| a - b).collect();
    let grad_negs = grad_out[dim..].chunks(dim.max(1)).map(<[f64]>::to_vec).collect();
    (grad_center, grad_out[..dim].to_vec(), grad_negs)
}

/// One SGD step on a single (center, targets) group.
///
/// `targets` holds `(row, label)` with label 1 for the true context and 0 for
/// negatives. Output rows are updated in place; the gradient with respect to
/// the center vector is accumulated into `grad_center` for the caller to
/// apply. Returns the pair loss before the update.
pub(crate) fn ns_step(
    center: &[f64],
    output: &mut [f64],
    dim: usize,
    targets: &[(u32, f64)],
    lr: f64,
    grad_center: &mut [f64],
) -> f64 {
    let mut loss = 0.0;
    for &(row, label) in targets {
        let u = &mut output[row as usize * dim..(row as usize + 1) * dim];
        let score = dot(center, u);
        loss += if label > 0.5 {
            neg_log_sigmoid(score)
        } else {
            neg_log_sigmoid(-score)
        };
        let g = sigmoid(score) - label;
        for k in 0..dim {
            grad_center[k] += g * u[k];
            u[k] -= lr * g * center[k];
        }
    }
    loss
}

fn id_sequences<I, S>(texts: I, vocab: &Vocabulary) -> Vec<Vec<u32>>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    texts
        .into_iter()
        .map(|t| {
            words(t.as_ref())
                .iter()
                .filter_map(|w| vocab.get(w))
                .collect::<Vec<u32>>()
        })
        .filter(|s| !s.is_empty())
        .collect()
}

/// Train skip-gram vectors with negative sampling. Single-threaded and
/// bit-deterministic for a given `(texts, config)`.
pub fn train_skipgram<I, S>(texts: I, config: &SkipGramConfig) -> Result<EmbeddingMatrix, EmbeddingError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    config.validate()?;
    let texts: Vec<S> = texts.into_iter().collect();
    let vocab = match Vocabulary::build(texts.iter().map(AsRef::as_ref), config.min_count) {
        Ok(v) => v,
        Err(VocabError::EmptyCorpus) => return Err(EmbeddingError::EmptyVocabulary),
        Err(e) => return Err(e.into()),
    };
    if vocab.is_empty() {
        return Err(EmbeddingError::EmptyVocabulary);
    }
    let sequences = id_sequences(texts.iter().map(AsRef::as_ref), &vocab);
    let total: usize = sequences.iter().map(Vec::len).sum();
    if total < config.window + 1 {
        return Err(EmbeddingError::InsufficientTokens {
            tokens: total,
            needed: config.window + 1,
        });
    }

    let dim = config.dim;
    let rows = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bound = 0.5 / dim as f64;
    let mut input: Vec<f64> = (0..rows * dim)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    let mut output = vec![0.0; rows * dim];

    let known: Vec<(u32, u64)> = vocab.known_words().map(|(id, _, c)| (id, c)).collect();
    let noise = WeightedIndex::new(known.iter().map(|&(_, c)| (c.max(1) as f64).powf(0.75)))
        .expect("non-empty vocabulary with positive weights");
    let keep_prob: Vec<f64> = known
        .iter()
        .map(|&(_, c)| {
            if config.subsample <= 0.0 {
                return 1.0;
            }
            let threshold = config.subsample * total as f64;
            let f = c as f64;
            (((f / threshold).sqrt() + 1.0) * threshold / f).min(1.0)
        })
        .collect();

    let planned = (config.epochs * total) as f64;
    let mut processed = 0usize;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut grad = vec![0.0; dim];
    let mut targets: Vec<(u32, f64)> = Vec::with_capacity(config.negatives + 1);
    let mut kept: Vec<u32> = Vec::new();

    for _ in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut pairs = 0usize;
        for seq in &sequences {
            kept.clear();
            for &id in seq {
                let p = keep_prob[id as usize];
                if p >= 1.0 || rng.random::<f64>() < p {
                    kept.push(id);
                }
            }
            processed += seq.len();
            let lr = config.learning_rate * (1.0 - processed as f64 / (planned + 1.0)).max(1e-4);
            for i in 0..kept.len() {
                let reach = rng.random_range(1..=config.window);
                let lo = i.saturating_sub(reach);
                let hi = (i + reach).min(kept.len() - 1);
                let center = kept[i] as usize;
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    let context = kept[j];
                    targets.clear();
                    targets.push((context, 1.0));
                    for _ in 0..config.negatives {
                        let neg = known[noise.sample(&mut rng)].0;
                        if neg != context {
                            targets.push((neg, 0.0));
                        }
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let v = &mut input[center * dim..(center + 1) * dim];
                    loss_sum += ns_step(v, &mut output, dim, &targets, lr, &mut grad);
                    for k in 0..dim {
                        v[k] -= lr * grad[k];
                    }
                    pairs += 1;
                }
            }
        }
        epoch_losses.push(if pairs == 0 { 0.0 } else { loss_sum / pairs as f64 });
    }

    Ok(EmbeddingMatrix {
        vocab,
        dim,
        input,
        output: Some(output),
        epoch_losses,
    })
}

/// Parse the `count dim` header format.
pub fn parse_vectors(text: &str) -> Result<EmbeddingMatrix, EmbeddingError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(EmbeddingError::Format {
        line: 1,
        message: "missing header".into(),
    })?;
    let header_err = |m: &str| EmbeddingError::Format {
        line: 1,
        message: m.to_string(),
    };
    let mut parts = header.split_whitespace();
    let count: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| header_err("header must be `count dim`"))?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| header_err("header must be `count dim`"))?;
    if parts.next().is_some() {
        return Err(header_err("header must be `count dim`"));
    }
    if count == 0 {
        return Err(EmbeddingError::EmptyEmbedding);
    }
    if dim == 0 {
        return Err(header_err("dim must be positive"));
    }

    let mut entries = Vec::with_capacity(count);
    let mut input = Vec::with_capacity((count + 1) * dim);
    for (i, raw) in lines {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        if entries.len() == count {
            return Err(EmbeddingError::Format {
                line,
                message: format!("more than the declared {count} rows"),
            });
        }
        let mut fields = raw.split_whitespace();
        let word = fields.next().unwrap().to_string();
        let values: Vec<f64> = fields
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| EmbeddingError::Format {
                line,
                message: format!("bad number: {e}"),
            })?;
        if values.len() != dim {
            return Err(EmbeddingError::Format {
                line,
                message: format!("expected {dim} values, found {}", values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::Format {
                line,
                message: "non-finite value".into(),
            });
        }
        entries.push((word, 0u64));
        input.extend(values);
    }
    if entries.len() != count {
        return Err(EmbeddingError::Format {
            line: text.lines().count(),
            message: format!("header declares {count} rows, found {}", entries.len()),
        });
    }
    let vocab = Vocabulary::from_entries(entries, 0)?;
    // Zero row for the unknown-word slot.
    input.extend(std::iter::repeat_n(0.0, dim));
    Ok(EmbeddingMatrix {
        vocab,
        dim,
        input,
        output: None,
        epoch_losses: Vec::new(),
    })
}

pub fn load_vectors(path: impl AsRef<Path>) -> Result<EmbeddingMatrix, EmbeddingError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_vectors(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// Fraction of word tokens without a vector.
    pub oov_fraction: f64,
}

/// Mean of the vectors of in-vocabulary word tokens.
pub fn doc_vector(text: &str, emb: &EmbeddingMatrix) -> FeatureVector {
    let ws = words(text);
    let mut values = vec![0.0; emb.dim];
    let mut hits = 0usize;
    for w in &ws {
        if let Some(v) = emb.vector(w) {
            values.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            hits += 1;
        }
    }
    if hits == 0 {
        return FeatureVector {
            values: vec![0.0; emb.dim],
            oov_fraction: 1.0,
        };
    }
    values.iter_mut().for_each(|a| *a /= hits as f64);
    FeatureVector {
        values,
        oov_fraction: (ws.len() - hits) as f64 / ws.len() as f64,
    }
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() || u.is_empty() {
        return Err(EmbeddingError::DimensionMismatch);
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbeddingError::ZeroNorm);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}
