//! pivotalign: mining parallel sentence and article pairs from comparable
//! bilingual news corpora by translating both sides into a shared pivot
//! language, scoring tf-idf vectors with a margin criterion, and greedily
//! selecting alignments. Includes evaluation (F1, agreement, significance
//! testing) and substring-duplication profiling of the mined bitext.

pub mod aligner;
pub mod corpus;
pub mod dedup;
pub mod error;
pub mod evaluation;
pub mod pipeline;
pub mod rng;
pub mod similarity;
pub mod tokenizer;
pub mod translate;
pub mod vectorize;

pub use error::{Error, Result};
