//! Thin async client for the textlab HTTP API. Every call maps one endpoint;
//! error responses come back as [`ClientError::Api`] with the server's
//! machine code.

use chrono::{DateTime, Utc};
use reqwest::multipart::{Form, Part};
use reqwest::{Method, RequestBuilder};
use serde::de::DeserializeOwned;
use serde::Serialize;
use textlab_core::classroom::{
    AnalysisId, AnalysisKind, AnalysisSummary, CorpusSummary, GroupId, LabelStatRow, LeaderboardRow,
    NextDocument, Project, ProjectId, RunRecord, SortOrder, UserId, WordStatsTable,
};
use textlab_core::corpus::{CorpusId, DocId};
use textlab_core::textclf::{Algorithm, SearchTerm, WordSort};
use textlab_core::wire::{
    ConfusionResponse, CreateAnalysis, CreateGroup, CreateProject, Credentials, ErrorBody, GroupView,
    Health, LabelResponse, LoginResponse, RunRequest, RunResponse, SetTerms, SignupResponse,
    SubmitLabel, TermInput, TermsResponse, UserView, API_PREFIX,
};

pub use textlab_core::wire;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("{code}: {message}")]
    Api {
        status: u16,
        code: String,
        message: String,
    },
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("unexpected response ({status}): {body}")]
    Unexpected { status: u16, body: String },
}

impl ClientError {
    /// The server's machine code, when the server answered with an error.
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api { code, .. } => Some(code),
            _ => None,
        }
    }

    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Api { status, .. } | ClientError::Unexpected { status, .. } => Some(*status),
            ClientError::Http(e) => e.status().map(|s| s.as_u16()),
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

/// A corpus file to upload.
#[derive(Debug, Clone)]
pub struct CorpusUpload {
    pub file_name: String,
    pub bytes: Vec<u8>,
    /// `csv` or `json`; inferred from the file name when absent.
    pub format: Option<String>,
    pub name: Option<String>,
    pub default_category: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
    token: Option<String>,
}

impl Client {
    /// `base` is the server origin, such as `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Client {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
            token: None,
        }
    }

    pub fn with_token(mut self, token: impl Into<String>) -> Self {
        self.token = Some(token.into());
        self
    }

    pub fn token(&self) -> Option<&str> {
        self.token.as_deref()
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    fn request(&self, method: Method, path: &str) -> RequestBuilder {
        let req = self.http.request(method, format!("{}{API_PREFIX}{path}", self.base));
        match &self.token {
            Some(t) => req.bearer_auth(t),
            None => req,
        }
    }

    async fn send<T: DeserializeOwned>(req: RequestBuilder) -> Result<T> {
        let resp = req.send().await?;
        let status = resp.status();
        let body = resp.bytes().await?;
        if status.is_success() {
            let bytes = if body.is_empty() { &b"null"[..] } else { &body[..] };
            return serde_json::from_slice(bytes).map_err(|e| ClientError::Unexpected {
                status: status.as_u16(),
                body: format!("{e}: {}", String::from_utf8_lossy(&body)),
            });
        }
        match serde_json::from_slice::<ErrorBody>(&body) {
            Ok(err) => Err(ClientError::Api {
                status: status.as_u16(),
                code: err.code,
                message: err.message,
            }),
            Err(_) => Err(ClientError::Unexpected {
                status: status.as_u16(),
                body: String::from_utf8_lossy(&body).into_owned(),
            }),
        }
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        Self::send(self.request(Method::GET, path)).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        Self::send(self.request(Method::POST, path).json(body)).await
    }

    pub async fn health(&self) -> Result<Health> {
        self.get("/health").await
    }

    /// Logs in and keeps the session token for later calls.
    pub async fn login(&mut self, username: &str, password: &str) -> Result<LoginResponse> {
        let creds = Credentials {
            username: username.into(),
            password: password.into(),
        };
        let resp: LoginResponse = self.post("/login", &creds).await?;
        self.token = Some(resp.token.clone());
        Ok(resp)
    }

    pub async fn logout(&mut self) -> Result<()> {
        Self::send::<()>(self.request(Method::POST, "/logout")).await?;
        self.token = None;
        Ok(())
    }

    /// Registers a student through a group's signup token.
    pub async fn signup(&self, token: &str, username: &str, password: &str) -> Result<SignupResponse> {
        let creds = Credentials {
            username: username.into(),
            password: password.into(),
        };
        self.post(&format!("/signup/{token}"), &creds).await
    }

    pub async fn me(&self) -> Result<UserView> {
        self.get("/me").await
    }

    pub async fn create_group(&self, name: &str, expiry: Option<DateTime<Utc>>) -> Result<GroupView> {
        self.post("/groups", &CreateGroup { name: name.into(), expiry }).await
    }

    pub async fn groups(&self) -> Result<Vec<GroupView>> {
        self.get("/groups").await
    }

    pub async fn upload_corpus(&self, upload: CorpusUpload) -> Result<CorpusSummary> {
        let mut form = Form::new().part("file", Part::bytes(upload.bytes).file_name(upload.file_name));
        if let Some(f) = upload.format {
            form = form.text("format", f);
        }
        if let Some(n) = upload.name {
            form = form.text("name", n);
        }
        if let Some(c) = upload.default_category {
            form = form.text("default_category", c);
        }
        Self::send(self.request(Method::POST, "/corpora").multipart(form)).await
    }

    pub async fn corpora(&self) -> Result<Vec<CorpusSummary>> {
        self.get("/corpora").await
    }

    pub async fn create_project(
        &self,
        title: &str,
        description: &str,
        group_id: GroupId,
        corpus_ids: &[CorpusId],
    ) -> Result<Project> {
        let body = CreateProject {
            title: title.into(),
            description: description.into(),
            group_id,
            corpus_ids: corpus_ids.to_vec(),
        };
        self.post("/projects", &body).await
    }

    pub async fn projects(&self) -> Result<Vec<Project>> {
        self.get("/projects").await
    }

    pub async fn create_analysis(
        &self,
        project: ProjectId,
        kind: AnalysisKind,
        per_category_n: Option<usize>,
        seed: Option<u64>,
    ) -> Result<AnalysisSummary> {
        let body = CreateAnalysis {
            kind,
            per_category_n,
            seed,
        };
        self.post(&format!("/projects/{project}/analyses"), &body).await
    }

    pub async fn analyses(&self, project: ProjectId) -> Result<Vec<AnalysisSummary>> {
        self.get(&format!("/projects/{project}/analyses")).await
    }

    pub async fn analysis(&self, id: AnalysisId) -> Result<AnalysisSummary> {
        self.get(&format!("/analyses/{id}")).await
    }

    pub async fn next_document(&self, id: AnalysisId) -> Result<NextDocument> {
        self.get(&format!("/analyses/{id}/next")).await
    }

    pub async fn submit_label(&self, id: AnalysisId, document_id: DocId, category: &str) -> Result<LabelResponse> {
        let body = SubmitLabel {
            document_id,
            category: category.into(),
        };
        self.post(&format!("/analyses/{id}/labels"), &body).await
    }

    pub async fn label_stats(&self, id: AnalysisId, order: SortOrder) -> Result<Vec<LabelStatRow>> {
        let order = match order {
            SortOrder::Asc => "asc",
            SortOrder::Desc => "desc",
        };
        self.get(&format!("/analyses/{id}/stats/labels?order={order}")).await
    }

    pub async fn word_stats(&self, id: AnalysisId, sort: WordSort) -> Result<WordStatsTable> {
        let sort = match sort {
            WordSort::Count => "count",
            WordSort::Predictiveness => "predictiveness",
        };
        self.get(&format!("/analyses/{id}/stats/words?sort={sort}")).await
    }

    /// Replaces the caller's terms, given as `(pattern, reason)` pairs.
    pub async fn set_terms(&self, id: AnalysisId, terms: &[(String, String)]) -> Result<Vec<SearchTerm>> {
        let body = SetTerms {
            terms: terms
                .iter()
                .map(|(pattern, reason)| TermInput {
                    pattern: pattern.clone(),
                    reason: reason.clone(),
                })
                .collect(),
        };
        let resp: TermsResponse = Self::send(self.request(Method::PUT, &format!("/analyses/{id}/terms")).json(&body)).await?;
        Ok(resp.terms)
    }

    pub async fn terms(&self, id: AnalysisId, of: Option<UserId>) -> Result<Vec<SearchTerm>> {
        let path = match of {
            Some(u) => format!("/analyses/{id}/terms?user={u}"),
            None => format!("/analyses/{id}/terms"),
        };
        let resp: TermsResponse = self.get(&path).await?;
        Ok(resp.terms)
    }

    pub async fn run(&self, id: AnalysisId, algorithm: Algorithm) -> Result<RunResponse> {
        self.post(&format!("/analyses/{id}/run"), &RunRequest { algorithm }).await
    }

    pub async fn runs(&self, id: AnalysisId) -> Result<Vec<RunRecord>> {
        self.get(&format!("/analyses/{id}/runs")).await
    }

    pub async fn run_record(&self, id: AnalysisId, seq: u64) -> Result<RunRecord> {
        self.get(&format!("/analyses/{id}/runs/{seq}")).await
    }

    pub async fn confusion(&self, id: AnalysisId, seq: u64) -> Result<ConfusionResponse> {
        self.get(&format!("/analyses/{id}/runs/{seq}/confusion")).await
    }

    pub async fn leaderboard(&self, id: AnalysisId) -> Result<Vec<LeaderboardRow>> {
        self.get(&format!("/analyses/{id}/leaderboard")).await
    }
}
