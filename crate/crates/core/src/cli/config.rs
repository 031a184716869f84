//! JSON run configuration and per-module seed derivation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::classifiers::FamilyConfig;
use crate::embeddings::SkipGramConfig;
use crate::eval::{AdversarialTransform, TransformKind};
use crate::ingest::SplitSpec;
use crate::stats::BinConfig;
use crate::zeroshot::PerturbConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Every module seed is derived from this value.
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitFractions,
    pub embeddings: EmbeddingSource,
    pub classifier: FamilyConfig,
    #[serde(default)]
    pub zeroshot: ZeroshotConfig,
    #[serde(default)]
    pub transforms: Vec<TransformSpec>,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub bins: BinConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn all_methods() -> Vec<Method> {
    vec![Method::Classifier, Method::DetectGpt, Method::SingleRevise]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// HC3-style JSONL files.
    pub hc3: Vec<PathBuf>,
    #[serde(default)]
    pub conllu: Option<ConlluPaths>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConlluPaths {
    pub human: PathBuf,
    pub machine: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum EmbeddingSource {
    Train(SkipGramConfig),
    Load { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroshotConfig {
    pub order: usize,
    pub discount: f64,
    pub k: usize,
    pub mask_fraction: f64,
    pub frequency_band: bool,
}

impl Default for ZeroshotConfig {
    fn default() -> Self {
        Self {
            order: 3,
            discount: 0.75,
            k: 20,
            mask_fraction: 0.15,
            frequency_band: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Classifier,
    DetectGpt,
    SingleRevise,
}

impl Method {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "classifier" => Some(Method::Classifier),
            "detect_gpt" => Some(Method::DetectGpt),
            "single_revise" => Some(Method::SingleRevise),
            _ => None,
        }
    }
}

/// Stable 64-bit seed for the module at `path`, e.g. `"split"` or
/// `"transforms[2]"`: FNV-1a over the path mixed with the global seed and
/// finished with splitmix64.
pub fn derive_seed(global: u64, path: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in path.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h ^ global;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RunConfig {
    /// Parse, resolve relative paths against the config file's directory
    /// and validate.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.output_dir);
        self.data.hc3.iter_mut().for_each(join);
        if let Some(c) = &mut self.data.conllu {
            join(&mut c.human);
            join(&mut c.machine);
        }
        if let EmbeddingSource::Load { path } = &mut self.embeddings {
            join(path);
        }
    }

    /// Structural checks (exit 2), then input-file existence (exit 3).
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.data.hc3.is_empty() {
            return bad("data.hc3 must list at least one file".into());
        }
        self.split_spec()?;
        if let EmbeddingSource::Train(sg) = &self.embeddings {
            sg.validate().map_err(|e| CliError::Config(format!("embeddings: {e}")))?;
        }
        let z = &self.zeroshot;
        if z.order < 2 {
            return bad(format!("zeroshot.order must be >= 2, got {}", z.order));
        }
        if !(z.discount > 0.0 && z.discount < 1.0) {
            return bad(format!("zeroshot.discount must lie in (0, 1), got {}", z.discount));
        }
        if z.k < 2 {
            return bad(format!("zeroshot.k must be >= 2, got {}", z.k));
        }
        self.perturb_config()
            .validate()
            .map_err(|e| CliError::Config(format!("zeroshot: {e}")))?;
        for t in self.adversarial_transforms() {
            t.validate().map_err(|e| CliError::Config(format!("transforms: {e}")))?;
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }

        let mut inputs: Vec<&PathBuf> = self.data.hc3.iter().collect();
        if let Some(c) = &self.data.conllu {
            inputs.extend([&c.human, &c.machine]);
        }
        if let EmbeddingSource::Load { path } = &self.embeddings {
            inputs.push(path);
        }
        for p in inputs {
            if !p.is_file() {
                return Err(CliError::Data(format!("input file not found: {}", p.display())));
            }
        }
        Ok(())
    }

    pub fn seed_for(&self, path: &str) -> u64 {
        derive_seed(self.seed, path)
    }

    pub fn split_spec(&self) -> Result<SplitSpec, CliError> {
        SplitSpec::new(
            self.split.train,
            self.split.val,
            self.split.test,
            self.seed_for("split"),
        )
        .map_err(|e| CliError::Config(format!("split: {e}")))
    }

    pub fn skipgram_config(&self) -> Option<SkipGramConfig> {
        match &self.embeddings {
            EmbeddingSource::Train(sg) => Some(SkipGramConfig {
                seed: self.seed_for("embeddings"),
                ..sg.clone()
            }),
            EmbeddingSource::Load { .. } => None,
        }
    }

    pub fn perturb_config(&self) -> PerturbConfig {
        PerturbConfig {
            mask_fraction: self.zeroshot.mask_fraction,
            k: self.zeroshot.k,
            seed: self.seed_for("zeroshot"),
            frequency_band: self.zeroshot.frequency_band,
        }
    }

    pub fn adversarial_transforms(&self) -> Vec<AdversarialTransform> {
        self.transforms
            .iter()
            .enumerate()
            .map(|(i, t)| AdversarialTransform {
                kind: t.kind,
                intensity: t.intensity,
                seed: self.seed_for(&format!("transforms[{i}]")),
            })
            .collect()
    }
}
