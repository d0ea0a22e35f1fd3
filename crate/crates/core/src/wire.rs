//! Request and response bodies of the HTTP API, shared by server and client.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::classroom::{AnalysisKind, GroupId, Role, RunRecord, User, UserGroup, UserId};
use crate::corpus::{CorpusId, DocId};
use crate::textclf::{Algorithm, ConfusionMatrix, EvaluationReport, Metrics, SearchTerm};

pub const API_PREFIX: &str = "/api/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub version: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Credentials {
    pub username: String,
    pub password: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoginResponse {
    pub token: String,
    pub user_id: UserId,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignupResponse {
    pub user_id: UserId,
}

/// A user without the password hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserView {
    pub id: UserId,
    pub username: String,
    pub role: Role,
    pub group_ids: BTreeSet<GroupId>,
}

impl From<&User> for UserView {
    fn from(u: &User) -> Self {
        UserView {
            id: u.id,
            username: u.username.clone(),
            role: u.role,
            group_ids: u.group_ids.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateGroup {
    pub name: String,
    #[serde(default)]
    pub expiry: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupView {
    #[serde(flatten)]
    pub group: UserGroup,
    /// Path of the signup page, relative to the API prefix.
    pub signup_url: String,
}

impl From<UserGroup> for GroupView {
    fn from(group: UserGroup) -> Self {
        GroupView {
            signup_url: format!("{API_PREFIX}{}", group.signup_path()),
            group,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateProject {
    pub title: String,
    #[serde(default)]
    pub description: String,
    pub group_id: GroupId,
    pub corpus_ids: Vec<CorpusId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateAnalysis {
    pub kind: AnalysisKind,
    #[serde(default)]
    pub per_category_n: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitLabel {
    pub document_id: DocId,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelResponse {
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermInput {
    pub pattern: String,
    #[serde(default)]
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetTerms {
    pub terms: Vec<TermInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermsResponse {
    pub terms: Vec<SearchTerm>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRequest {
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
}

fn default_algorithm() -> Algorithm {
    Algorithm::Nb
}

/// The report of a new run together with its run number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResponse {
    pub run: u64,
    #[serde(flatten)]
    pub report: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionResponse {
    pub run: u64,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

impl From<&RunRecord> for ConfusionResponse {
    fn from(run: &RunRecord) -> Self {
        ConfusionResponse {
            run: run.seq,
            confusion: run.report.confusion.clone(),
            metrics: run.report.metrics.clone(),
        }
    }
}

/// Body of every error response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}
