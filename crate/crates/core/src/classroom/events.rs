use serde::{Deserialize, Serialize};

use super::model::{
    AnalysisId, AnalysisRecord, GroupId, LabelEvent, Project, RunRecord, User, UserGroup, UserId,
};
use crate::corpus::Corpus;
use crate::textclf::SearchTerm;

/// A state change, journaled before it is applied. Replaying the journal in
/// order rebuilds the exact same state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    UserCreated { user: User },
    StudentRegistered { user: User, group_id: GroupId },
    PasswordChanged { user_id: UserId, password_hash: String },
    GroupCreated { group: UserGroup },
    CorpusAdded { corpus: Corpus },
    ProjectCreated { project: Project },
    AnalysisCreated { analysis: AnalysisRecord },
    LabelRecorded { analysis_id: AnalysisId, label: LabelEvent },
    TermsSet { analysis_id: AnalysisId, user_id: UserId, terms: Vec<SearchTerm> },
    RunRecorded { analysis_id: AnalysisId, run: RunRecord },
}

impl Event {
    pub fn analysis_id(&self) -> Option<AnalysisId> {
        match self {
            Event::LabelRecorded { analysis_id, .. }
            | Event::TermsSet { analysis_id, .. }
            | Event::RunRecorded { analysis_id, .. } => Some(*analysis_id),
            _ => None,
        }
    }
}
