//! Documents, sentences, queries and the text rules shared by every module.
//!
//! Tokens are maximal runs of Unicode alphanumeric characters, lowercased.
//! No stemming and no stopword removal happens here; consumers that need a
//! stopword filter apply [`crate::stopwords`] themselves.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::CorpusError;

/// Split `text` into lowercase alphanumeric terms.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut terms = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            terms.push(core::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        terms.push(current);
    }
    terms
}

/// Abbreviations that never end a sentence, compared case-insensitively
/// against the word preceding a terminator.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &["mr", "mrs", "dr", "vs", "etc", "e.g", "i.e"];

/// Rule-based sentence segmentation.
///
/// A sentence ends at `.`, `!` or `?` when the next character is whitespace
/// or the end of the text, unless the word before the terminator is a
/// single letter or one of the configured abbreviations.
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: BTreeSet<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self::with_abbreviations(DEFAULT_ABBREVIATIONS.iter().copied())
    }
}

impl SentenceSplitter {
    pub fn with_abbreviations<'a>(abbreviations: impl IntoIterator<Item = &'a str>) -> Self {
        Self {
            abbreviations: abbreviations.into_iter().map(|a| a.to_lowercase()).collect(),
        }
    }

    pub fn split(&self, body: &str) -> Vec<Sentence> {
        let mut sentences = Vec::new();
        let mut start = 0;
        let mut chars = body.char_indices().peekable();
        while let Some((i, c)) = chars.next() {
            if !matches!(c, '.' | '!' | '?') {
                continue;
            }
            let at_boundary = match chars.peek() {
                None => true,
                Some(&(_, next)) => next.is_whitespace(),
            };
            if !at_boundary {
                continue;
            }
            let end = i + c.len_utf8();
            if self.is_guarded(&body[start..i]) {
                continue;
            }
            push_sentence(&mut sentences, &body[start..end]);
            start = end;
        }
        push_sentence(&mut sentences, &body[start..]);
        sentences
    }

    /// True when the word that ends `before` suppresses a split.
    fn is_guarded(&self, before: &str) -> bool {
        let word = before
            .rsplit(char::is_whitespace)
            .next()
            .unwrap_or("")
            .trim_start_matches(|c: char| !c.is_alphanumeric())
            .trim_end_matches(['.', '!', '?']);
        let mut letters = word.chars();
        if let (Some(only), None) = (letters.next(), letters.next()) {
            if only.is_alphabetic() {
                return true;
            }
        }
        !word.is_empty() && self.abbreviations.contains(&word.to_lowercase())
    }
}

fn push_sentence(sentences: &mut Vec<Sentence>, raw: &str) {
    let text = raw.trim();
    if text.is_empty() {
        return;
    }
    sentences.push(Sentence {
        index: sentences.len(),
        text: text.to_string(),
        tokens: tokenize(text),
    });
}

/// Split `body` into sentences with the default abbreviation list.
pub fn split_sentences(body: &str) -> Vec<Sentence> {
    SentenceSplitter::default().split(body)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub title: Option<String>,
    pub body: String,
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        title: Option<String>,
        body: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        Self::with_splitter(id, title, body, &SentenceSplitter::default())
    }

    pub fn with_splitter(
        id: impl Into<String>,
        title: Option<String>,
        body: impl Into<String>,
        splitter: &SentenceSplitter,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        let body = body.into();
        if body.trim().is_empty() {
            return Err(CorpusError::EmptyBody(id));
        }
        let sentences = splitter.split(&body);
        Ok(Self { id, title, body, sentences })
    }

    /// All body tokens, in order.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flat_map(|s| s.tokens.iter().map(String::as_str))
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }

    /// Raw term frequencies over the whole body.
    pub fn term_frequencies(&self) -> BTreeMap<&str, usize> {
        let mut tf = BTreeMap::new();
        for t in self.tokens() {
            *tf.entry(t).or_insert(0) += 1;
        }
        tf
    }
}

/// A search query. `term_set` holds the distinct tokens in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub raw: String,
    pub tokens: Vec<String>,
    pub term_set: BTreeSet<String>,
}

impl Query {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let tokens = tokenize(&raw);
        let term_set = tokens.iter().cloned().collect();
        Self { raw, tokens, term_set }
    }

    /// A query whose tokens are `self.tokens` followed by `appended`.
    pub fn augmented<S: AsRef<str>>(&self, appended: &[S]) -> Self {
        let mut raw = self.raw.clone();
        for term in appended {
            raw.push(' ');
            raw.push_str(term.as_ref());
        }
        Self::new(raw)
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.term_set.contains(term)
    }
}

/// An immutable, id-addressable collection of documents. Document order is
/// load order.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    by_id: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self, CorpusError> {
        let mut by_id = BTreeMap::new();
        for (pos, doc) in documents.iter().enumerate() {
            if by_id.insert(doc.id.clone(), pos).is_some() {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
        }
        Ok(Self { documents, by_id })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&pos| &self.documents[pos])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Document> {
        self.documents.iter()
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Document;
    type IntoIter = core::slice::Iter<'a, Document>;

    fn into_iter(self) -> Self::IntoIter {
        self.documents.iter()
    }
}
