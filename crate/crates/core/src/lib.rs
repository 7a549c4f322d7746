//! Learned machine translation evaluation from sentence embeddings.
//!
//! Segment-level quality is predicted by an RBF epsilon-SVR over match
//! features of hypothesis and reference sentence vectors, and judged by
//! per-language-pair Pearson correlation with human direct assessment (DA).

pub mod analysis;
pub mod corpus;
pub mod embedding_store;
pub mod eval;
pub mod features;
pub mod pipeline;
pub mod sentbleu;
pub mod svr;
pub mod synth;
