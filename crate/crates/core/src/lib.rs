//! Detection of machine-generated text with corpus statistics, embedding-based
//! classical classifiers and zero-shot probability-curvature scoring.

pub mod classifiers;
pub mod cli;
pub mod embeddings;
pub mod eval;
pub mod ingest;
pub mod stats;
pub mod text;
pub mod zeroshot;
