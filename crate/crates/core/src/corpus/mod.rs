//! Document ingestion, preprocessing and train/test partitioning.

mod ingest;
mod split;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use ingest::{ingest_csv, ingest_json, to_csv};
pub use split::{make_split, Partition, SplitSpec};
pub use text::{preprocess, tokenize, HASHTAG, LINK, MENTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocId(pub u64);

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CorpusId(pub u64);

impl fmt::Display for CorpusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CorpusError {
    #[error("input has no `text` column")]
    MissingTextColumn,
    #[error("row {row} has no category and no default category was given")]
    MissingCategory { row: usize },
    #[error("input contains no documents")]
    EmptyCorpus,
    #[error("malformed CSV: {0}")]
    MalformedCsv(String),
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("category `{category}` has {count} document(s); at least 2 are needed to split")]
    CategoryTooSmall { category: String, count: usize },
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("row {row} is longer than {MAX_DOCUMENT_CHARS} characters")]
    DocumentTooLong { row: usize },
}

/// Longest accepted document text, in characters.
pub const MAX_DOCUMENT_CHARS: usize = 10_000;

/// A single labeled text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: DocId,
    pub raw_text: String,
    pub clean_text: String,
    pub tokens: Vec<String>,
    /// Gold category.
    pub category: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub source_meta: BTreeMap<String, String>,
}

impl Document {
    pub fn new(id: DocId, raw_text: impl Into<String>, category: impl Into<String>) -> Self {
        let raw_text = raw_text.into();
        let clean_text = preprocess(&raw_text);
        let tokens = tokenize(&clean_text);
        Document {
            id,
            raw_text,
            clean_text,
            tokens,
            category: category.into(),
            source_meta: BTreeMap::new(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.tokens.iter().any(|t| t == word)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub id: CorpusId,
    pub name: String,
    pub categories: BTreeSet<String>,
    pub documents: Vec<Document>,
}

impl Corpus {
    /// Builds a corpus, deriving the category set from its documents.
    pub fn from_documents(name: impl Into<String>, documents: Vec<Document>) -> Result<Self, CorpusError> {
        if documents.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let categories = documents.iter().map(|d| d.category.clone()).collect();
        Ok(Corpus {
            id: CorpusId(0),
            name: name.into(),
            categories,
            documents,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn document(&self, id: DocId) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Gives documents consecutive ids starting at `first`; returns the next free id.
    pub fn renumber(&mut self, first: u64) -> u64 {
        let mut next = first;
        for doc in &mut self.documents {
            doc.id = DocId(next);
            next += 1;
        }
        next
    }
}
