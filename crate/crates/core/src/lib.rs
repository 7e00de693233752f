//! Informativeness and interestingness measures for short text passages,
//! together with the nCG meta-evaluation used to compare them.
//!
//! The crate is organised bottom-up:
//!
//! - [`corpus`]: passage pools, topics, graded assessments, deduplication.
//! - [`textproc`]: tokenization, stopwords, Porter stemming and unit bags.
//! - [`discrete`]: KL divergence, LogSim, F1 and ROUGE-N over unit bags.
//! - [`embeddings`]: word-vector stores, additive document vectors, cosine.
//! - [`reference`]: per-topic and leave-fold-out textual references.
//! - [`evaluation`]: scoring, ranking and nCG cut-off curves.
//! - [`oracle`]: naive reference implementations used for cross-checking.
//! - [`synth`]: deterministic synthetic pools for fixtures and load tests.

#![forbid(unsafe_code)]

pub mod corpus;
pub mod discrete;
pub mod embeddings;
mod error;
pub mod evaluation;
pub mod oracle;
pub mod reference;
pub mod synth;
pub mod textproc;

pub use error::{Error, Result};
