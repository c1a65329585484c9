//! Building blocks for constructing and evaluating parallel corpora for a
//! low-resource language pair.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`corpus`]: normalization, sentence segmentation, deduplication and the
//!   sentence/document/pair data model.
//! - [`langid`]: hashed character n-gram language classifier.
//! - [`subword`]: BPE merge learning and vocabulary extension.
//! - [`embinit`]: co-occurrence alignment weights and embedding initialization
//!   for new tokens.
//! - [`miner`]: length-scaled, margin-penalized similarity with monotone
//!   dynamic-programming alignment.
//! - [`metrics`]: corpus BLEU and ChrF++.
//! - [`rerank`]: candidate selection by target-language word proportion.
//! - [`curriculum`]: the alternating back-translation / self-training stream.
//! - [`evalharness`]: per-section reports and annotation aggregation.
//! - [`pipeline`]: config-driven composition of the stages above.

pub mod corpus;
pub mod curriculum;
pub mod embinit;
mod error;
pub mod evalharness;
pub mod langid;
pub mod metrics;
pub mod miner;
pub mod pipeline;
pub mod rerank;
pub mod subword;

pub use error::{Error, Result};
