//! Lexical retrieval scorers (BM25 family, query likelihood, and two
//! richer multi-channel variants), IR evaluation, and an island-model
//! MAP-Elites loop for evolving scorer programs.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod evolve;
pub mod index;
pub mod run;
pub mod scoring;
pub mod tokenize;

pub use corpus::{Dataset, Document, QrelEntry, Qrels, Query};
pub use error::{Error, Result};
pub use index::{ChannelIndex, IndexSet};
pub use run::{ScoredDoc, ScoredRun};
pub use scoring::{Retriever, ScorerConfig};
pub use tokenize::TokenChannel;
