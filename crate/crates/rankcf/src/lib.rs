//! Std companion to `rankcf-core`: JSON-lines corpora, HTTP clients for
//! external rankers and embedding providers, the JSON service and the CLI.

pub mod cli;
pub mod error;
pub mod io;
pub mod remote;
pub mod server;
pub mod service;

pub use error::ApiError;
pub use io::{load_corpus, LoadError};
pub use service::{Service, ServiceConfig};
