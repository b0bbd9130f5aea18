//! Ranker-agnostic counterfactual explanations for document rankings.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of an immutable [`Corpus`], a [`Ranker`] and request
//! parameters; file formats, network rankers and the service live in the
//! `rankcf` companion crate.
//!
//! Four explanation families are provided:
//!
//! * [`cf_document`]: minimal sentence removals that push a top-k document
//!   below rank k.
//! * [`cf_query`]: minimal sets of document terms appended to the query that
//!   lift a document to a rank threshold.
//! * [`cf_instance`]: existing non-relevant documents that closely resemble a
//!   relevant one.
//! * [`builder`]: re-ranking of a user-edited document against the original
//!   top k+1.
//!
//! [`topics`] fits an LDA model over a ranked set so users can browse terms.
#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod builder;
pub mod cf_document;
pub mod cf_instance;
pub mod cf_query;
pub mod corpus;
mod error;
pub mod ranking;
pub mod stopwords;
pub mod topics;

pub use corpus::{tokenize, Corpus, Document, Query, Sentence};
pub use error::{CorpusError, Error, RankError};
pub use ranking::{Bm25Params, Bm25Ranker, InvertedIndex, RankedList, Ranker};
