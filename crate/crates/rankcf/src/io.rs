//! JSON-lines corpus files: one `{"id", "title"?, "body"}` object per line.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rankcf_core::corpus::{Corpus, Document, SentenceSplitter};
use rankcf_core::CorpusError;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("corpus file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("failed to read corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("document `{0}` has an empty body")]
    EmptyBody(String),
    #[error("corpus contains no documents")]
    EmptyCorpus,
}

impl From<CorpusError> for LoadError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::DuplicateId(id) => LoadError::DuplicateId(id),
            CorpusError::EmptyBody(id) => LoadError::EmptyBody(id),
            CorpusError::EmptyCorpus => LoadError::EmptyCorpus,
        }
    }
}

#[derive(Debug, Deserialize)]
struct Record {
    id: String,
    #[serde(default)]
    title: Option<String>,
    body: String,
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, LoadError> {
    load_corpus_with(path, &SentenceSplitter::default())
}

pub fn load_corpus_with(
    path: impl AsRef<Path>,
    splitter: &SentenceSplitter,
) -> Result<Corpus, LoadError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => LoadError::MissingFile(path.to_path_buf()),
        _ => LoadError::Io(e),
    })?;
    read_corpus(BufReader::new(file), splitter)
}

/// Parse a JSON-lines stream. Blank lines are skipped; line numbers are 1-based.
pub fn read_corpus(reader: impl BufRead, splitter: &SentenceSplitter) -> Result<Corpus, LoadError> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| LoadError::MalformedLine {
            line: i + 1,
            reason: e.to_string(),
        })?;
        docs.push(Document::with_splitter(rec.id, rec.title, rec.body, splitter)?);
    }
    Ok(Corpus::new(docs)?)
}
