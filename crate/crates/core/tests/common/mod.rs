//! Synthetic text sources shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "st", "tr"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];

/// `n` distinct pronounceable pseudo-words of one to three syllables.
pub fn pseudo_words(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.random_range(1..=3);
        let w: String = (0..syllables)
            .map(|_| {
                format!(
                    "{}{}",
                    ONSETS[rng.random_range(0..ONSETS.len())],
                    VOWELS[rng.random_range(0..VOWELS.len())]
                )
            })
            .collect();
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// A random second-order Markov source over a word list. Each context has
/// a handful of weighted successors derived from (seed, context), so the
/// source does not depend on generation order.
#[derive(Debug, Clone)]
pub struct TrigramSource {
    words: Vec<String>,
    seed: u64,
    branching: usize,
}

impl TrigramSource {
    pub fn new(words: Vec<String>, seed: u64) -> Self {
        Self {
            words,
            seed,
            branching: 4,
        }
    }

    fn successors(&self, a: usize, b: usize) -> Vec<(usize, f64)> {
        let key = self.seed ^ ((a as u64) << 32 | b as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        (0..self.branching)
            .map(|_| (rng.random_range(0..self.words.len()), rng.random_range(0.1..1.0)))
            .collect()
    }

    pub fn sentence_words<R: Rng>(&self, rng: &mut R) -> Vec<String> {
        let start = self.words.len();
        let (mut a, mut b) = (start, start);
        let len = rng.random_range(6..=14);
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            let succ = self.successors(a, b);
            let total: f64 = succ.iter().map(|s| s.1).sum();
            let mut r = rng.random::<f64>() * total;
            let mut pick = succ[0].0;
            for (w, p) in succ {
                if r < p {
                    pick = w;
                    break;
                }
                r -= p;
            }
            out.push(self.words[pick].clone());
            a = b;
            b = pick;
        }
        out
    }

    pub fn sentence<R: Rng>(&self, rng: &mut R) -> String {
        format!("{}.", self.sentence_words(rng).join(" "))
    }

    pub fn document<R: Rng>(&self, rng: &mut R, n_sentences: usize) -> String {
        (0..n_sentences)
            .map(|_| self.sentence(rng))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Two sources over overlapping slices of one pseudo-word list.
pub fn two_sources(seed: u64) -> (TrigramSource, TrigramSource) {
    let words = pseudo_words(240, seed);
    let human = TrigramSource::new(words[..160].to_vec(), seed.wrapping_add(1));
    let machine = TrigramSource::new(words[80..].to_vec(), seed.wrapping_add(2));
    (human, machine)
}

/// `n` documents per class as `(human, machine)`.
pub fn two_source_documents(n: usize, seed: u64) -> (Vec<String>, Vec<String>) {
    let (h, m) = two_sources(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    let human = (0..n).map(|_| {
        let k = rng.random_range(2..=5);
        h.document(&mut rng, k)
    }).collect();
    let machine = (0..n).map(|_| {
        let k = rng.random_range(2..=5);
        m.document(&mut rng, k)
    }).collect();
    (human, machine)
}

/// HC3 JSONL with one human and one machine answer per question line.
pub fn hc3_jsonl(human: &[String], machine: &[String]) -> String {
    let mut out = String::new();
    for (i, (h, m)) in human.iter().zip(machine).enumerate() {
        let line = serde_json::json!({
            "question": format!("question {i}?"),
            "human_answers": [h],
            "chatgpt_answers": [m],
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

/// Shuffle the words of `text` into a single period-terminated sentence
/// per original sentence count.
pub fn shuffle_words<R: Rng>(text: &str, rng: &mut R) -> String {
    let mut ws = mgt_detect::text::words(text);
    ws.shuffle(rng);
    format!("{}.", ws.join(" "))
}

/// A complete run directory: data file plus a config using `family`.
pub fn write_run(dir: &Path, n_per_class: usize, seed: u64, family_json: &str) -> std::path::PathBuf {
    let (human, machine) = two_source_documents(n_per_class, seed);
    std::fs::write(dir.join("data.jsonl"), hc3_jsonl(&human, &machine)).unwrap();
    let config = format!(
        r#"{{
  "seed": {seed},
  "data": {{"hc3": ["data.jsonl"]}},
  "embeddings": {{"source": "train", "dim": 16, "epochs": 3, "min_count": 1}},
  "classifier": {family_json},
  "zeroshot": {{"k": 4}},
  "transforms": [
    {{"kind": "special_chars", "intensity": 0.2}},
    {{"kind": "case_flip", "intensity": 0.0}}
  ]
}}
"#
    );
    let path = dir.join("run.json");
    std::fs::write(&path, config).unwrap();
    path
}
