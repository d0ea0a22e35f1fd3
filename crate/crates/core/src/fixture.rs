//! The `two-party-demo` dataset: two synthetic corpora of political
//! messages with a handful of planted class-specific words, plus a ready-made
//! classroom (teacher, ten students, one group, one project, three analyses).
//!
//! Everything is generated from a seed, so seeding twice gives the same bytes.

use std::collections::BTreeMap;

use chrono::{DateTime, TimeZone, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classroom::{
    AnalysisKind, AnalysisSummary, Classroom, CorpusSummary, Project, Result, UserGroup,
};
use crate::corpus::{Corpus, DocId, Document};

pub const NAME: &str = "two-party-demo";
pub const SEED: u64 = 42;
pub const DOCS_PER_CORPUS: usize = 500;
pub const SHARED_TEXTS_N: usize = 10;
pub const GROUP_NAME: &str = "Civics 2A";
pub const TEACHER: &str = "teacher";

/// Start of the reproducible clock used when seeding.
pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 9, 2, 8, 0, 0).unwrap()
}

pub struct Party {
    pub corpus: &'static str,
    pub category: &'static str,
    pub planted: &'static [&'static str],
    /// Search terms whose expansions are exactly the planted words.
    pub terms: &'static [(&'static str, &'static str)],
}

pub const PARTIES: [Party; 2] = [
    Party {
        corpus: "Alder Party",
        category: "alder",
        planted: &[
            "billionaire",
            "billionaires",
            "oligarchs",
            "oligarchy",
            "grassroots",
            "medicare",
            "wallstreet",
            "revolution",
            "revolutionary",
        ],
        terms: &[
            ("billionaire*", "attacks on concentrated wealth"),
            ("oligarch*", "attacks on concentrated wealth"),
            ("grassroots", "movement language"),
            ("medicare", "health care policy"),
            ("wallstreet", "finance as a target"),
            ("revolution*", "movement language"),
        ],
    },
    Party {
        corpus: "Birch Party",
        category: "birch",
        planted: &[
            "bipartisan",
            "decency",
            "restore",
            "restoring",
            "alliance",
            "alliances",
            "soul",
            "steady",
        ],
        terms: &[
            ("bipartisan", "appeals to cooperation"),
            ("decency", "character framing"),
            ("restor*", "return to normal"),
            ("allian*", "foreign policy"),
            ("soul", "character framing"),
            ("steady", "calm leadership"),
        ],
    },
];

/// Words shared by both parties, most frequent first.
const COMMON: &[&str] = &[
    "the", "to", "and", "we", "our", "a", "of", "for", "is", "in", "this", "people", "you", "will",
    "it", "on", "country", "today", "must", "with", "be", "all", "are", "every", "american",
    "vote", "families", "can", "that", "jobs", "time", "more", "work", "future", "not", "now",
    "need", "should", "from", "your", "have", "plan", "america", "together", "fight", "make",
    "year", "care", "communities", "workers", "children", "health", "up", "change", "new",
    "nation", "tonight", "an", "about", "help", "election", "live", "president", "stand",
    "government", "who", "join", "rally", "town", "hall", "thank", "everyone", "day", "deserve",
    "economy", "class", "middle", "schools", "teachers", "climate", "energy", "security",
    "veterans", "rights", "voters", "campaign", "debate", "week", "state", "city", "friends",
    "proud", "policy", "money", "costs", "housing", "wages", "safe", "better", "strong", "again",
    "first", "long", "hard", "home", "small", "business", "owners", "farmers", "students",
    "debt", "tax", "pay", "family", "read", "watch", "speech", "here", "there", "what", "how",
];

const HANDLES: &[&str] = &["@cnn", "@nytimes", "@teamalder", "@birchhq", "@localnews", "@ap"];
const HASHTAGS: &[&str] = &["#vote", "#debate", "#election", "#townhall", "#gotv"];

fn sentence(rng: &mut ChaCha8Rng, common: &WeightedIndex<f64>, party: &Party) -> String {
    let len = rng.random_range(8..=18);
    let mut words: Vec<String> = (0..len).map(|_| COMMON[common.sample(rng)].to_string()).collect();
    for _ in 0..rng.random_range(1..=2) {
        let planted = party.planted[rng.random_range(0..party.planted.len())];
        let at = rng.random_range(0..=words.len());
        words.insert(at, planted.to_string());
    }
    if rng.random_bool(0.2) {
        words.insert(0, HANDLES[rng.random_range(0..HANDLES.len())].to_string());
    }
    if rng.random_bool(0.15) {
        words.push(HASHTAGS[rng.random_range(0..HASHTAGS.len())].to_string());
    }
    if rng.random_bool(0.1) {
        words.push(format!("https://example.org/p/{}", rng.random_range(1000..9999)));
    }
    let mut text = words.join(" ");
    if let Some(first) = text.get(0..1) {
        if first.chars().all(|c| c.is_ascii_lowercase()) {
            text.replace_range(0..1, &first.to_ascii_uppercase());
        }
    }
    text.push(if rng.random_bool(0.2) { '!' } else { '.' });
    text
}

/// The two corpora, one per party, with locally numbered documents.
pub fn corpora(seed: u64) -> Vec<Corpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..COMMON.len()).map(|r| 1.0 / (r as f64 + 1.0)).collect();
    let common = WeightedIndex::new(&weights).expect("positive weights");
    PARTIES
        .iter()
        .map(|party| {
            let docs = (0..DOCS_PER_CORPUS)
                .map(|i| Document::new(DocId(i as u64), sentence(&mut rng, &common, party), party.category))
                .collect();
            Corpus::from_documents(party.corpus, docs).expect("non-empty")
        })
        .collect()
}

/// Planted words by category.
pub fn planted_words() -> BTreeMap<&'static str, &'static [&'static str]> {
    PARTIES.iter().map(|p| (p.category, p.planted)).collect()
}

/// Every planted search term as `(pattern, reason)`.
pub fn planted_terms() -> Vec<(String, String)> {
    PARTIES
        .iter()
        .flat_map(|p| p.terms.iter().map(|(t, r)| (t.to_string(), r.to_string())))
        .collect()
}

pub fn student_names() -> Vec<String> {
    (1..=10).map(|i| format!("student{i:02}")).collect()
}

/// Demo password for a seeded account.
pub fn password_for(username: &str) -> String {
    format!("{username}-demo")
}

#[derive(Debug, Clone)]
pub struct Installed {
    pub teacher: String,
    pub students: Vec<String>,
    pub group: UserGroup,
    pub corpora: Vec<CorpusSummary>,
    pub project: Project,
    pub shared_texts: AnalysisSummary,
    pub shared_model: AnalysisSummary,
    pub personal: AnalysisSummary,
}

/// Populates an empty classroom with the demo accounts and data.
pub fn install(classroom: &Classroom, seed: u64) -> Result<Installed> {
    let teacher = classroom.add_teacher(TEACHER, &password_for(TEACHER))?;
    let group = classroom.create_group(teacher.id, GROUP_NAME, None)?;
    let mut students = Vec::new();
    for name in student_names() {
        classroom.register_via_link(&group.signup_token, &name, &password_for(&name))?;
        students.push(name);
    }
    let mut summaries = Vec::new();
    for corpus in corpora(seed) {
        let name = corpus.name.clone();
        summaries.push(classroom.add_corpus(teacher.id, &name, corpus)?);
    }
    let ids: Vec<_> = summaries.iter().map(|c| c.id).collect();
    let project = classroom.create_project(
        teacher.id,
        "Which party said it?",
        "Find words that tell Alder Party messages from Birch Party messages.",
        group.id,
        &ids,
    )?;
    let shared_texts =
        classroom.create_analysis(teacher.id, project.id, AnalysisKind::SharedTexts, Some(SHARED_TEXTS_N), Some(seed))?;
    let shared_model = classroom.create_analysis(teacher.id, project.id, AnalysisKind::SharedModel, None, Some(seed))?;
    let first = classroom.user_by_name(&students[0]).expect("just registered");
    let personal = classroom.create_analysis(first.id, project.id, AnalysisKind::Personal, None, Some(seed))?;
    let group = classroom
        .groups_for(teacher.id)?
        .into_iter()
        .find(|g| g.id == group.id)
        .expect("just created");
    Ok(Installed {
        teacher: TEACHER.to_string(),
        students,
        group,
        corpora: summaries,
        project,
        shared_texts,
        shared_model,
        personal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textclf::wildcard_match;

    #[test]
    fn common_words_never_match_planted_terms() {
        for (pattern, _) in planted_terms() {
            for word in COMMON {
                assert!(!wildcard_match(&pattern, word), "{pattern} matches {word}");
            }
        }
    }

    #[test]
    fn terms_expand_to_exactly_the_planted_words() {
        for party in &PARTIES {
            let mut expanded: Vec<&str> = party
                .planted
                .iter()
                .copied()
                .filter(|w| party.terms.iter().any(|(t, _)| wildcard_match(t, w)))
                .collect();
            expanded.sort();
            let mut planted = party.planted.to_vec();
            planted.sort();
            assert_eq!(expanded, planted);
            let other = PARTIES.iter().find(|p| p.category != party.category).unwrap();
            for (t, _) in party.terms {
                assert!(other.planted.iter().all(|w| !wildcard_match(t, w)));
            }
        }
    }

    #[test]
    fn every_document_carries_a_planted_word_of_its_class() {
        for corpus in corpora(SEED) {
            assert_eq!(corpus.len(), DOCS_PER_CORPUS);
            for doc in &corpus.documents {
                let own = planted_words()[doc.category.as_str()];
                assert!(doc.tokens.iter().any(|t| own.contains(&t.as_str())), "{}", doc.raw_text);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(corpora(SEED), corpora(SEED));
        assert_ne!(corpora(SEED), corpora(SEED + 1));
    }
}
