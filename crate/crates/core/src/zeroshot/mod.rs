//! Zero-shot detection by probability curvature: a document whose log
//! probability drops sharply under small rewrites is likely to have been
//! sampled from the scoring model.

mod lm;
mod perturb;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lm::{train_kn_lm, LogProb, NGramLm, LM_SCHEMA_VERSION};
pub use perturb::{perturb, perturb_text, PerturbConfig, SubstitutionPool};

use crate::eval::{BoxError, Detector};
use crate::ingest::{Document, Label};

/// Below this perturbed-score spread the discrepancy is reported as 0.
pub const STD_GUARD: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ZeroshotError {
    #[error("{0}")]
    InvalidConfig(String),
    #[error("no sentences to train on")]
    EmptyCorpus,
    #[error("order {order} exceeds the longest sentence ({longest} words) plus the end marker")]
    OrderTooLarge { order: usize, longest: usize },
    #[error("document has no word tokens")]
    EmptyDocument,
    #[error("unknown zero-shot method `{0}`")]
    UnknownMethod(String),
    #[error("unsupported LM schema_version {0} (expected {LM_SCHEMA_VERSION})")]
    SchemaVersion(u64),
    #[error("invalid LM file: {0}")]
    Format(String),
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Perturbation discrepancy of one document. Log probabilities are per
/// predicted token.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureScore {
    pub d: f64,
    pub logp_original: f64,
    pub logp_perturbed_mean: f64,
    pub logp_perturbed_std: f64,
    pub k_used: usize,
}

/// `(original - mean) / std` over the perturbed scores, with population
/// standard deviation; 0 when the spread is below [`STD_GUARD`].
pub fn curvature_from_logps(original: f64, perturbed: &[f64]) -> CurvatureScore {
    let k = perturbed.len() as f64;
    let mean = perturbed.iter().sum::<f64>() / k;
    let std = (perturbed.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / k).sqrt();
    let d = if std < STD_GUARD {
        0.0
    } else {
        (original - mean) / std
    };
    CurvatureScore {
        d,
        logp_original: original,
        logp_perturbed_mean: mean,
        logp_perturbed_std: std,
        k_used: perturbed.len(),
    }
}

fn perturbed_logps(
    lm: &NGramLm,
    pool: &SubstitutionPool,
    text: &str,
    cfg: &PerturbConfig,
) -> Result<Vec<f64>, ZeroshotError> {
    (1..=cfg.k as u64)
        .into_par_iter()
        .map(|i| {
            let p = perturb_text(text, pool, cfg.mask_fraction, cfg.seed.wrapping_add(i));
            Ok(lm.log_prob_detail(&p)?.per_token())
        })
        .collect()
}

/// DetectGPT discrepancy with `cfg.k >= 2` perturbations (seeds
/// `seed + 1 ..= seed + k`), using `k + 1` scoring passes.
pub fn detect_gpt_score(
    lm: &NGramLm,
    pool: &SubstitutionPool,
    text: &str,
    cfg: &PerturbConfig,
) -> Result<CurvatureScore, ZeroshotError> {
    cfg.validate()?;
    if cfg.k < 2 {
        return Err(ZeroshotError::InvalidConfig(format!(
            "DetectGPT needs k >= 2, got {}",
            cfg.k
        )));
    }
    let original = lm.log_prob_detail(text)?.per_token();
    let perturbed = perturbed_logps(lm, pool, text, cfg)?;
    Ok(curvature_from_logps(original, &perturbed))
}

/// Single-Revise: one perturbation (seed `seed + 1`) and two scoring
/// passes; `d` is the per-token log-probability drop.
pub fn single_revise_score(
    lm: &NGramLm,
    pool: &SubstitutionPool,
    text: &str,
    cfg: &PerturbConfig,
) -> Result<CurvatureScore, ZeroshotError> {
    cfg.validate()?;
    if cfg.k != 1 {
        return Err(ZeroshotError::InvalidConfig(format!(
            "Single-Revise uses k = 1, got {}",
            cfg.k
        )));
    }
    let original = lm.log_prob_detail(text)?.per_token();
    let revised = perturbed_logps(lm, pool, text, cfg)?[0];
    Ok(CurvatureScore {
        d: original - revised,
        logp_original: original,
        logp_perturbed_mean: revised,
        logp_perturbed_std: 0.0,
        k_used: 1,
    })
}

pub fn classify_curvature(d: f64, threshold: f64) -> Label {
    if d >= threshold {
        Label::Machine
    } else {
        Label::Human
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureMethod {
    DetectGpt,
    SingleRevise,
}

impl CurvatureMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CurvatureMethod::DetectGpt => "detect_gpt",
            CurvatureMethod::SingleRevise => "single_revise",
        }
    }
}

impl fmt::Display for CurvatureMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CurvatureMethod {
    type Err = ZeroshotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "detect_gpt" => Ok(CurvatureMethod::DetectGpt),
            "single_revise" => Ok(CurvatureMethod::SingleRevise),
            other => Err(ZeroshotError::UnknownMethod(other.to_string())),
        }
    }
}

/// Curvature scoring behind the common [`Detector`] interface.
pub struct CurvatureDetector<'a> {
    pub lm: &'a NGramLm,
    pub pool: &'a SubstitutionPool,
    pub config: PerturbConfig,
    pub method: CurvatureMethod,
    pub threshold: f64,
}

impl CurvatureDetector<'_> {
    pub fn curvature(&self, text: &str) -> Result<CurvatureScore, ZeroshotError> {
        match self.method {
            CurvatureMethod::DetectGpt => detect_gpt_score(self.lm, self.pool, text, &self.config),
            CurvatureMethod::SingleRevise => {
                let cfg = PerturbConfig { k: 1, ..self.config.clone() };
                single_revise_score(self.lm, self.pool, text, &cfg)
            }
        }
    }
}

impl Detector for CurvatureDetector<'_> {
    fn method(&self) -> String {
        self.method.to_string()
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }

    fn score(&self, doc: &Document) -> Result<f64, BoxError> {
        Ok(self.curvature(&doc.body)?.d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_arithmetic() {
        let s = curvature_from_logps(-10.0, &[-12.0, -12.0]);
        assert_eq!((s.logp_perturbed_mean, s.logp_perturbed_std, s.d), (-12.0, 0.0, 0.0));
        let s = curvature_from_logps(-10.0, &[-11.0, -13.0]);
        assert_eq!((s.logp_perturbed_mean, s.logp_perturbed_std, s.d), (-12.0, 1.0, 2.0));
    }

    #[test]
    fn classify_boundary() {
        assert_eq!(classify_curvature(2.0, 1.0), Label::Machine);
        assert_eq!(classify_curvature(1.0, 1.0), Label::Machine);
        assert_eq!(classify_curvature(0.5, 1.0), Label::Human);
    }

    /// Single-word sentences over symmetric words: every such sentence
    /// scores the same.
    fn flat_lm() -> NGramLm {
        let text: Vec<String> = ["alpha", "beta", "gamma", "delta"]
            .iter()
            .map(|w| format!("{w}."))
            .collect();
        train_kn_lm(&text, 2, 0.5).unwrap()
    }

    #[test]
    fn flat_lm_gives_zero_discrepancy() {
        let lm = flat_lm();
        let pool = SubstitutionPool::from_vocab(lm.vocab(), true).unwrap();
        let cfg = PerturbConfig { mask_fraction: 1.0, k: 5, seed: 1, frequency_band: true };
        let s = detect_gpt_score(&lm, &pool, "beta.", &cfg).unwrap();
        assert_eq!(s.d, 0.0);
        let cfg1 = PerturbConfig { k: 1, ..cfg };
        assert_eq!(single_revise_score(&lm, &pool, "beta.", &cfg1).unwrap().d, 0.0);
    }

    fn source_lm() -> NGramLm {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let words: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
        // Sentences follow a fixed cyclic successor pattern.
        let sents: Vec<String> = (0..400)
            .map(|_| {
                let start = rand::Rng::random_range(&mut rng, 0..40);
                let ws: Vec<&str> = (0..8).map(|j| words[(start + 3 * j) % 40].as_str()).collect();
                format!("{}.", ws.join(" "))
            })
            .collect();
        train_kn_lm(&sents, 3, 0.75).unwrap()
    }

    #[test]
    fn pass_counts() {
        let lm = source_lm();
        let pool = SubstitutionPool::from_vocab(lm.vocab(), true).unwrap();
        let cfg = PerturbConfig { k: 7, ..PerturbConfig::default() };
        lm.reset_passes();
        detect_gpt_score(&lm, &pool, "w0 w3 w6 w9 w12.", &cfg).unwrap();
        assert_eq!(lm.scoring_passes(), 8);
        lm.reset_passes();
        let cfg1 = PerturbConfig { k: 1, ..cfg.clone() };
        single_revise_score(&lm, &pool, "w0 w3 w6 w9 w12.", &cfg1).unwrap();
        assert_eq!(lm.scoring_passes(), 2);
        assert!(detect_gpt_score(&lm, &pool, "w0.", &cfg1).is_err());
        assert!(single_revise_score(&lm, &pool, "w0.", &cfg).is_err());
    }

    #[test]
    fn sampled_text_curves_more_than_shuffled() {
        let lm = source_lm();
        let pool = SubstitutionPool::from_vocab(lm.vocab(), true).unwrap();
        let cfg = PerturbConfig { k: 20, seed: 3, ..PerturbConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut wins = 0;
        for _ in 0..10 {
            let doc = lm.sample_document(&mut rng, 2, 12);
            let mut ws: Vec<String> = crate::text::words(&doc);
            ws.shuffle(&mut rng);
            let shuffled = format!("{}.", ws.join(" "));
            let a = detect_gpt_score(&lm, &pool, &doc, &cfg).unwrap();
            let b = detect_gpt_score(&lm, &pool, &shuffled, &cfg).unwrap();
            assert_eq!(a, detect_gpt_score(&lm, &pool, &doc, &cfg).unwrap());
            if a.d > b.d {
                wins += 1;
            }
        }
        assert!(wins >= 9, "{wins}/10");
    }
}
