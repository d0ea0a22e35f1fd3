use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ClfError;

/// A user-chosen feature pattern and the reason given for choosing it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchTerm {
    pub pattern: String,
    pub reason: String,
}

impl SearchTerm {
    /// Trims and lowercases the pattern; rejects patterns that are empty or
    /// consist only of `*`.
    pub fn new(pattern: &str, reason: impl Into<String>) -> Result<Self, ClfError> {
        Ok(SearchTerm {
            pattern: normalize_pattern(pattern)?,
            reason: reason.into(),
        })
    }
}

fn normalize_pattern(pattern: &str) -> Result<String, ClfError> {
    let p = pattern.trim().to_lowercase();
    if p.chars().all(|c| c == '*') {
        return Err(ClfError::InvalidPattern(pattern.to_string()));
    }
    Ok(p)
}

/// Glob match where `*` stands for any run of zero or more characters.
pub fn wildcard_match(pattern: &str, word: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let w: Vec<char> = word.chars().collect();
    let (mut pi, mut wi) = (0, 0);
    // Position of the last `*` seen and the word index it is currently absorbing up to.
    let mut backtrack: Option<(usize, usize)> = None;
    while wi < w.len() {
        if pi < p.len() && p[pi] == '*' {
            backtrack = Some((pi, wi));
            pi += 1;
        } else if pi < p.len() && p[pi] == w[wi] {
            pi += 1;
            wi += 1;
        } else if let Some((star, absorbed)) = backtrack {
            pi = star + 1;
            wi = absorbed + 1;
            backtrack = Some((star, absorbed + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}

/// Vocabulary words matched by each distinct pattern, in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermExpansion {
    pub matches: Vec<(String, BTreeSet<String>)>,
}

impl TermExpansion {
    /// Union of all matched words.
    pub fn feature_words(&self) -> BTreeSet<String> {
        self.matches.iter().flat_map(|(_, w)| w.iter().cloned()).collect()
    }

    pub fn words_for(&self, pattern: &str) -> Option<&BTreeSet<String>> {
        self.matches.iter().find(|(p, _)| p == pattern).map(|(_, w)| w)
    }

    /// The earliest pattern that matched `word`.
    pub fn first_pattern(&self, word: &str) -> Option<&str> {
        self.matches
            .iter()
            .find(|(_, w)| w.contains(word))
            .map(|(p, _)| p.as_str())
    }
}

pub fn expand_terms(terms: &[SearchTerm], vocabulary: &BTreeSet<String>) -> Result<TermExpansion, ClfError> {
    let mut matches: Vec<(String, BTreeSet<String>)> = Vec::new();
    for term in terms {
        let pattern = normalize_pattern(&term.pattern)?;
        if matches.iter().any(|(p, _)| *p == pattern) {
            continue;
        }
        let words = if pattern.contains('*') {
            vocabulary
                .iter()
                .filter(|w| wildcard_match(&pattern, w))
                .cloned()
                .collect()
        } else {
            vocabulary.get(&pattern).into_iter().cloned().collect()
        };
        matches.push((pattern, words));
    }
    Ok(TermExpansion { matches })
}
