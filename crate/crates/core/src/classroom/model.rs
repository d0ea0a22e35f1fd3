use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusId, DocId, SplitSpec};
use crate::textclf::{Algorithm, Distribution, EvaluationReport};

macro_rules! id_type {
    ($name:ident) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

id_type!(UserId);
id_type!(GroupId);
id_type!(ProjectId);
id_type!(AnalysisId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Teacher,
    Student,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub id: UserId,
    pub username: String,
    pub password_hash: String,
    pub role: Role,
    pub group_ids: BTreeSet<GroupId>,
}

impl User {
    pub fn is_teacher(&self) -> bool {
        self.role == Role::Teacher
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserGroup {
    pub id: GroupId,
    pub name: String,
    pub owner_id: UserId,
    pub member_ids: BTreeSet<UserId>,
    pub signup_token: String,
    pub token_expiry: Option<DateTime<Utc>>,
}

impl UserGroup {
    pub fn signup_path(&self) -> String {
        format!("/signup/{}", self.signup_token)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub id: ProjectId,
    pub title: String,
    pub description: String,
    pub owner_id: UserId,
    pub group_id: GroupId,
    pub corpus_ids: Vec<CorpusId>,
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub id: CorpusId,
    pub name: String,
    pub categories: Vec<String>,
    pub documents: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisKind {
    /// Owned by one student, labels train only that student's model.
    Personal,
    /// A fixed mini-corpus of `n` documents per category shared by the group.
    SharedTexts,
    /// The whole project corpus, with every label feeding one common model.
    SharedModel,
}

impl std::str::FromStr for AnalysisKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "personal" => Ok(AnalysisKind::Personal),
            "shared_texts" => Ok(AnalysisKind::SharedTexts),
            "shared_model" => Ok(AnalysisKind::SharedModel),
            other => Err(format!("unknown analysis kind `{other}`")),
        }
    }
}

/// The immutable part of an analysis, fixed at creation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub id: AnalysisId,
    pub project_id: ProjectId,
    pub owner_id: UserId,
    pub kind: AnalysisKind,
    pub per_category_n: Option<usize>,
    pub seed: u64,
    pub alpha: f64,
    pub categories: Vec<String>,
    pub doc_pool: Vec<DocId>,
    pub split: SplitSpec,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEvent {
    pub user_id: UserId,
    pub document_id: DocId,
    pub chosen_category: String,
    pub correct: bool,
    pub by_teacher: bool,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seq: u64,
    pub user_id: UserId,
    pub algorithm: Algorithm,
    pub created_at: DateTime<Utc>,
    pub report: EvaluationReport,
}

/// What a client may know about an analysis; never includes gold labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub id: AnalysisId,
    pub project_id: ProjectId,
    pub owner_id: UserId,
    pub kind: AnalysisKind,
    pub per_category_n: Option<usize>,
    pub seed: u64,
    pub categories: Vec<String>,
    pub pool_size: usize,
    pub train_size: usize,
    pub test_size: usize,
}

/// A pool document as shown for labeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentView {
    pub id: DocId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextDocument {
    pub document: DocumentView,
    pub estimate: Distribution,
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelStatRow {
    pub document_id: DocId,
    pub text: String,
    pub correct_count: u64,
    pub incorrect_count: u64,
    pub correct_pct: f64,
    /// How many of the labels came from a teacher.
    pub teacher_labels: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    #[default]
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordStatsTable {
    pub categories: Vec<String>,
    pub documents: usize,
    pub rows: Vec<crate::textclf::WordStat>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub user_id: UserId,
    pub username: String,
    pub best_total_score: u64,
    pub best_run: u64,
    pub runs: usize,
}
