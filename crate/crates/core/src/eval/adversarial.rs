//! Surface-level adversarial rewrites of test documents.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::ingest::{floor_fraction, Document};
use crate::text::tokenize_spans;

/// Escaped quotes and slashes appended to words by `SpecialChars`.
const INSERTIONS: &[&str] = &["\\\"", "/", "\\/", "\\'"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    SpecialChars,
    WhitespaceNoise,
    CaseFlip,
}

impl TransformKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TransformKind::SpecialChars => "special_chars",
            TransformKind::WhitespaceNoise => "whitespace_noise",
            TransformKind::CaseFlip => "case_flip",
        }
    }
}

impl FromStr for TransformKind {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "special_chars" => Ok(TransformKind::SpecialChars),
            "whitespace_noise" => Ok(TransformKind::WhitespaceNoise),
            "case_flip" => Ok(TransformKind::CaseFlip),
            other => Err(EvalError::UnknownTransform(other.to_string())),
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversarialTransform {
    pub kind: TransformKind,
    pub intensity: f64,
    #[serde(default)]
    pub seed: u64,
}

impl AdversarialTransform {
    pub fn new(kind: TransformKind, intensity: f64, seed: u64) -> Result<Self, EvalError> {
        let t = Self {
            kind,
            intensity,
            seed,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if !(0.0..=1.0).contains(&self.intensity) {
            return Err(EvalError::InvalidIntensity(self.intensity));
        }
        Ok(())
    }

    /// Stable display name, e.g. `special_chars(0.2)`.
    pub fn name(&self) -> String {
        format!("{}({})", self.kind, self.intensity)
    }

    pub fn apply(&self, doc: &Document) -> Result<Document, EvalError> {
        adversarial_transform(doc, self)
    }
}

fn chosen_positions(rng: &mut ChaCha8Rng, n: usize, intensity: f64) -> Vec<usize> {
    let m = floor_fraction(intensity, n).min(n);
    let mut picks = sample(rng, n, m).into_vec();
    picks.sort_unstable();
    picks
}

/// Apply `transform` to a copy of `doc`; id and label are kept.
pub fn adversarial_transform(
    doc: &Document,
    transform: &AdversarialTransform,
) -> Result<Document, EvalError> {
    transform.validate()?;
    if doc.body.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(transform.seed);
    let body = &doc.body;
    let new_body = match transform.kind {
        TransformKind::SpecialChars => {
            let word_ends: Vec<usize> = tokenize_spans(body)
                .into_iter()
                .filter(|t| t.token.is_word)
                .map(|t| t.span.end)
                .collect();
            let picks = chosen_positions(&mut rng, word_ends.len(), transform.intensity);
            let mut out = String::with_capacity(body.len() + 3 * picks.len());
            let mut last = 0;
            for p in picks {
                let at = word_ends[p];
                out.push_str(&body[last..at]);
                out.push_str(INSERTIONS[rng.random_range(0..INSERTIONS.len())]);
                last = at;
            }
            out.push_str(&body[last..]);
            out
        }
        TransformKind::WhitespaceNoise => {
            let spaces: Vec<usize> = body.match_indices(' ').map(|(i, _)| i).collect();
            let picks = chosen_positions(&mut rng, spaces.len(), transform.intensity);
            let mut out = String::with_capacity(body.len() + picks.len());
            let mut last = 0;
            for p in picks {
                let at = spaces[p];
                out.push_str(&body[last..at]);
                out.push(' ');
                last = at;
            }
            out.push_str(&body[last..]);
            out
        }
        TransformKind::CaseFlip => {
            let chars: Vec<char> = body.chars().collect();
            let cased: Vec<usize> = chars
                .iter()
                .enumerate()
                .filter(|(_, c)| c.is_lowercase() || c.is_uppercase())
                .map(|(i, _)| i)
                .collect();
            let picks = chosen_positions(&mut rng, cased.len(), transform.intensity);
            let mut flip = vec![false; chars.len()];
            for p in picks {
                flip[cased[p]] = true;
            }
            let mut out = String::with_capacity(body.len());
            for (c, f) in chars.into_iter().zip(flip) {
                match (f, c.is_lowercase()) {
                    (false, _) => out.push(c),
                    (true, true) => out.extend(c.to_uppercase()),
                    (true, false) => out.extend(c.to_lowercase()),
                }
            }
            out
        }
    };
    Ok(Document {
        body: new_body,
        ..doc.clone()
    })
}
