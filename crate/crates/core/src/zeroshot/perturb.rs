//! Word-substitution perturbations drawn from a frequency-banded unigram
//! pool.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ZeroshotError;
use crate::ingest::{floor_fraction, Document};
use crate::text::{tokenize_spans, Vocabulary};

const REDRAWS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    pub mask_fraction: f64,
    /// Perturbations per document.
    pub k: usize,
    pub seed: u64,
    /// Restrict substitutes to words within a factor of two in frequency.
    pub frequency_band: bool,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            mask_fraction: 0.15,
            k: 20,
            seed: 0,
            frequency_band: true,
        }
    }
}

impl PerturbConfig {
    pub fn validate(&self) -> Result<(), ZeroshotError> {
        if !(0.0..=1.0).contains(&self.mask_fraction) {
            return Err(ZeroshotError::InvalidConfig(format!(
                "mask_fraction must lie in [0, 1], got {}",
                self.mask_fraction
            )));
        }
        if self.k == 0 {
            return Err(ZeroshotError::InvalidConfig("k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Known words sorted by (count, word) with cumulative counts for
/// weighted draws.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstitutionPool {
    words: Vec<String>,
    counts: Vec<u64>,
    cumulative: Vec<f64>,
    index: HashMap<String, usize>,
    frequency_band: bool,
}

impl SubstitutionPool {
    pub fn from_vocab(vocab: &Vocabulary, frequency_band: bool) -> Result<Self, ZeroshotError> {
        let mut entries: Vec<(u64, &str)> = vocab
            .known_words()
            .filter(|(_, _, c)| *c > 0)
            .map(|(_, w, c)| (c, w))
            .collect();
        if entries.is_empty() {
            return Err(ZeroshotError::EmptyCorpus);
        }
        entries.sort();
        let mut cumulative = Vec::with_capacity(entries.len() + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for (c, _) in &entries {
            acc += *c as f64;
            cumulative.push(acc);
        }
        let words: Vec<String> = entries.iter().map(|(_, w)| w.to_string()).collect();
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(Self {
            counts: entries.iter().map(|(c, _)| *c).collect(),
            words,
            cumulative,
            index,
            frequency_band,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Index range of candidate substitutes for `word`: words whose count
    /// lies within one octave of its count, widened an octave at a time
    /// until it holds at least two words.
    pub fn band(&self, word: &str) -> (usize, usize) {
        let n = self.words.len();
        let Some(&i) = self.index.get(word).filter(|_| self.frequency_band) else {
            return (0, n);
        };
        let c = self.counts[i] as f64;
        let (mut lo_c, mut hi_c) = (c / 2.0, c * 2.0);
        loop {
            let lo = self.counts.partition_point(|&x| (x as f64) < lo_c);
            let hi = self.counts.partition_point(|&x| (x as f64) <= hi_c);
            if hi - lo >= 2 || (lo == 0 && hi == n) {
                return (lo, hi);
            }
            lo_c /= 2.0;
            hi_c *= 2.0;
        }
    }

    /// Draw a substitute for `word`, proportional to corpus frequency.
    pub fn draw<R: Rng>(&self, rng: &mut R, word: &str) -> &str {
        let (lo, hi) = self.band(word);
        let mut pick = self.draw_in(rng, lo, hi);
        for _ in 0..REDRAWS {
            if pick != word {
                break;
            }
            pick = self.draw_in(rng, lo, hi);
        }
        pick
    }

    fn draw_in<R: Rng>(&self, rng: &mut R, lo: usize, hi: usize) -> &str {
        let (a, b) = (self.cumulative[lo], self.cumulative[hi]);
        let r = a + rng.random::<f64>() * (b - a);
        let i = lo + self.cumulative[lo + 1..=hi].partition_point(|&x| x <= r);
        &self.words[i.min(hi - 1)]
    }
}

/// Replace `floor(mask_fraction * words)` seeded word tokens of `text`.
/// Punctuation, spacing and the word-token count are preserved.
pub fn perturb_text(text: &str, pool: &SubstitutionPool, mask_fraction: f64, seed: u64) -> String {
    let spans: Vec<_> = tokenize_spans(text)
        .into_iter()
        .filter(|t| t.token.is_word)
        .collect();
    let m = floor_fraction(mask_fraction, spans.len()).min(spans.len());
    if m == 0 {
        return text.to_string();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = sample(&mut rng, spans.len(), m).into_vec();
    picks.sort_unstable();
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for p in picks {
        let t = &spans[p];
        out.push_str(&text[last..t.span.start]);
        out.push_str(pool.draw(&mut rng, &t.token.surface));
        last = t.span.end;
    }
    out.push_str(&text[last..]);
    out
}

/// Perturbed copy of `doc` using `cfg.seed`; id and label are kept.
pub fn perturb(doc: &Document, pool: &SubstitutionPool, cfg: &PerturbConfig) -> Document {
    Document {
        body: perturb_text(&doc.body, pool, cfg.mask_fraction, cfg.seed),
        ..doc.clone()
    }
}
