use std::path::Path as FsPath;
use std::sync::Arc;

use axum::extract::multipart::MultipartError;
use axum::extract::{DefaultBodyLimit, FromRequest, FromRequestParts, Multipart, Path, Query, Request, State};
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use textlab_core::classroom::{
    AnalysisId, AnalysisSummary, Classroom, ClassroomError, CorpusSummary, LeaderboardRow,
    LabelStatRow, NextDocument, Project, ProjectId, RunRecord, SortOrder, UserId, WordStatsTable,
};
use textlab_core::corpus::{ingest_csv, ingest_json};
use textlab_core::textclf::WordSort;
use textlab_core::wire::{
    ConfusionResponse, CreateAnalysis, CreateGroup, CreateProject, Credentials, GroupView, Health,
    LabelResponse, LoginResponse, RunRequest, RunResponse, SetTerms, SignupResponse, SubmitLabel,
    TermsResponse, UserView,
};

use crate::error::ApiError;
use crate::session::Sessions;

#[derive(Clone)]
pub struct AppState {
    pub classroom: Arc<Classroom>,
    pub sessions: Arc<Sessions>,
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// The authenticated caller of a request.
pub struct Auth {
    pub user: UserId,
    pub token: String,
}

impl FromRequestParts<AppState> for Auth {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let token = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim)
            .ok_or_else(ApiError::unauthenticated)?;
        let user = state.sessions.resolve(token)?;
        Ok(Auth {
            user,
            token: token.to_string(),
        })
    }
}

/// JSON body whose rejection uses the API error shape.
pub struct Body<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| Body(v))
            .map_err(|rej| ApiError::bad_request(rej.body_text()))
    }
}

/// Path parameters whose rejection uses the API error shape.
pub struct Id<T>(pub T);

impl<T: DeserializeOwned + Send, S: Send + Sync> FromRequestParts<S> for Id<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        Path::<T>::from_request_parts(parts, state)
            .await
            .map(|Path(v)| Id(v))
            .map_err(|rej| ApiError::bad_request(rej.body_text()))
    }
}

/// Query string whose rejection uses the API error shape.
pub struct Params<T>(pub T);

impl<T: DeserializeOwned + Send, S: Send + Sync> FromRequestParts<S> for Params<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        Query::<T>::from_request_parts(parts, state)
            .await
            .map(|Query(v)| Params(v))
            .map_err(|rej| ApiError::bad_request(rej.body_text()))
    }
}

/// Runs a classroom operation on the blocking pool; journal writes fsync.
async fn blocking<T, F>(state: &AppState, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Classroom) -> Result<T, ClassroomError> + Send + 'static,
{
    let classroom = state.classroom.clone();
    tokio::task::spawn_blocking(move || f(&classroom))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(ApiError::from)
}

pub fn router(state: AppState, upload_cap: usize) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/login", post(login))
        .route("/logout", post(logout))
        .route("/signup/{token}", post(signup))
        .route("/me", get(me))
        .route("/groups", get(list_groups).post(create_group))
        .route(
            "/corpora",
            get(list_corpora)
                .post(upload_corpus)
                .layer(DefaultBodyLimit::max(upload_cap)),
        )
        .route("/projects", get(list_projects).post(create_project))
        .route("/projects/{id}/analyses", get(list_analyses).post(create_analysis))
        .route("/analyses/{id}", get(get_analysis))
        .route("/analyses/{id}/next", get(next_document))
        .route("/analyses/{id}/labels", post(submit_label))
        .route("/analyses/{id}/stats/labels", get(label_stats))
        .route("/analyses/{id}/stats/words", get(word_stats))
        .route("/analyses/{id}/terms", get(get_terms).put(put_terms))
        .route("/analyses/{id}/run", post(run_model))
        .route("/analyses/{id}/runs", get(list_runs))
        .route("/analyses/{id}/runs/{n}", get(get_run))
        .route("/analyses/{id}/runs/{n}/confusion", get(get_confusion))
        .route("/analyses/{id}/leaderboard", get(leaderboard));
    Router::new()
        .nest(textlab_core::wire::API_PREFIX, api)
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state)
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NO_SUCH_ENDPOINT", "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "METHOD_NOT_ALLOWED", "method not allowed here")
}

async fn health() -> Json<Health> {
    Json(Health {
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

async fn login(State(state): State<AppState>, Body(creds): Body<Credentials>) -> ApiResult<LoginResponse> {
    let user = blocking(&state, move |c| c.authenticate(&creds.username, &creds.password)).await?;
    let token = state.sessions.create(user.id);
    Ok(Json(LoginResponse {
        token,
        user_id: user.id,
        role: user.role,
    }))
}

async fn logout(State(state): State<AppState>, auth: Auth) -> StatusCode {
    state.sessions.revoke(&auth.token);
    StatusCode::NO_CONTENT
}

async fn signup(
    State(state): State<AppState>,
    Id(token): Id<String>,
    Body(creds): Body<Credentials>,
) -> ApiResult<SignupResponse> {
    let user = blocking(&state, move |c| c.register_via_link(&token, &creds.username, &creds.password)).await?;
    Ok(Json(SignupResponse { user_id: user.id }))
}

async fn me(State(state): State<AppState>, auth: Auth) -> ApiResult<UserView> {
    let user = blocking(&state, move |c| c.user(auth.user).ok_or(ClassroomError::Forbidden)).await?;
    Ok(Json(UserView::from(&user)))
}

async fn create_group(State(state): State<AppState>, auth: Auth, Body(req): Body<CreateGroup>) -> ApiResult<GroupView> {
    let group = blocking(&state, move |c| c.create_group(auth.user, &req.name, req.expiry)).await?;
    Ok(Json(group.into()))
}

async fn list_groups(State(state): State<AppState>, auth: Auth) -> ApiResult<Vec<GroupView>> {
    let groups = blocking(&state, move |c| c.groups_for(auth.user)).await?;
    Ok(Json(groups.into_iter().map(GroupView::from).collect()))
}

fn require_teacher(c: &Classroom, user: UserId) -> Result<(), ClassroomError> {
    match c.user(user) {
        Some(u) if u.is_teacher() => Ok(()),
        _ => Err(ClassroomError::Forbidden),
    }
}

async fn list_corpora(State(state): State<AppState>, auth: Auth) -> ApiResult<Vec<CorpusSummary>> {
    let corpora = blocking(&state, move |c| {
        require_teacher(c, auth.user)?;
        Ok(c.corpora())
    })
    .await?;
    Ok(Json(corpora))
}

fn multipart_error(err: MultipartError) -> ApiError {
    if err.status() == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::payload_too_large(err.body_text())
    } else {
        ApiError::bad_request(err.body_text())
    }
}

#[derive(Default)]
struct Upload {
    file: Option<(Option<String>, Vec<u8>)>,
    format: Option<String>,
    name: Option<String>,
    default_category: Option<String>,
}

async fn upload_corpus(State(state): State<AppState>, auth: Auth, mut multipart: Multipart) -> ApiResult<CorpusSummary> {
    blocking(&state, move |c| require_teacher(c, auth.user)).await?;
    let mut upload = Upload::default();
    while let Some(field) = multipart.next_field().await.map_err(multipart_error)? {
        let name = field.name().unwrap_or_default().to_string();
        match name.as_str() {
            "file" => {
                let filename = field.file_name().map(str::to_string);
                let bytes = field.bytes().await.map_err(multipart_error)?;
                upload.file = Some((filename, bytes.to_vec()));
            }
            "format" | "name" | "default_category" => {
                let value = field.text().await.map_err(multipart_error)?;
                let value = Some(value.trim().to_string()).filter(|v| !v.is_empty());
                match name.as_str() {
                    "format" => upload.format = value,
                    "name" => upload.name = value,
                    _ => upload.default_category = value,
                }
            }
            _ => {}
        }
    }
    let (filename, bytes) = upload
        .file
        .ok_or_else(|| ApiError::bad_request("missing multipart field `file`"))?;
    let format = match upload.format {
        Some(f) => f.to_lowercase(),
        None => match filename.as_deref().and_then(|f| FsPath::new(f).extension()).and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => "json".into(),
            _ => "csv".into(),
        },
    };
    let name = upload
        .name
        .or_else(|| filename.as_deref().and_then(|f| FsPath::new(f).file_stem()).and_then(|s| s.to_str()).map(str::to_string))
        .unwrap_or_else(|| "corpus".into());
    let default_category = upload.default_category;
    let summary = blocking(&state, move |c| {
        let corpus = match format.as_str() {
            "csv" => ingest_csv(&bytes, default_category.as_deref())?,
            "json" => ingest_json(&bytes, default_category.as_deref())?,
            other => return Err(ClassroomError::InvalidInput(format!("unknown format `{other}` (expected csv or json)"))),
        };
        c.add_corpus(auth.user, &name, corpus)
    })
    .await?;
    Ok(Json(summary))
}

async fn create_project(State(state): State<AppState>, auth: Auth, Body(req): Body<CreateProject>) -> ApiResult<Project> {
    let project = blocking(&state, move |c| {
        c.create_project(auth.user, &req.title, &req.description, req.group_id, &req.corpus_ids)
    })
    .await?;
    Ok(Json(project))
}

async fn list_projects(State(state): State<AppState>, auth: Auth) -> ApiResult<Vec<Project>> {
    Ok(Json(blocking(&state, move |c| c.projects_for(auth.user)).await?))
}

async fn create_analysis(
    State(state): State<AppState>,
    auth: Auth,
    Id(project): Id<u64>,
    Body(req): Body<CreateAnalysis>,
) -> ApiResult<AnalysisSummary> {
    let summary = blocking(&state, move |c| {
        c.create_analysis(auth.user, ProjectId(project), req.kind, req.per_category_n, req.seed)
    })
    .await?;
    Ok(Json(summary))
}

async fn list_analyses(State(state): State<AppState>, auth: Auth, Id(project): Id<u64>) -> ApiResult<Vec<AnalysisSummary>> {
    Ok(Json(blocking(&state, move |c| c.analyses_for(auth.user, ProjectId(project))).await?))
}

async fn get_analysis(State(state): State<AppState>, auth: Auth, Id(id): Id<u64>) -> ApiResult<AnalysisSummary> {
    Ok(Json(blocking(&state, move |c| c.analysis(auth.user, AnalysisId(id))).await?))
}

async fn next_document(State(state): State<AppState>, auth: Auth, Id(id): Id<u64>) -> ApiResult<NextDocument> {
    let next = blocking(&state, move |c| c.next_document(auth.user, AnalysisId(id))).await?;
    Ok(Json(next))
}

async fn submit_label(
    State(state): State<AppState>,
    auth: Auth,
    Id(id): Id<u64>,
    Body(req): Body<SubmitLabel>,
) -> ApiResult<LabelResponse> {
    let label = blocking(&state, move |c| c.submit_label(auth.user, AnalysisId(id), req.document_id, &req.category)).await?;
    Ok(Json(LabelResponse { correct: label.correct }))
}

#[derive(Deserialize)]
struct OrderQuery {
    #[serde(default)]
    order: SortOrder,
}

async fn label_stats(
    State(state): State<AppState>,
    auth: Auth,
    Id(id): Id<u64>,
    Params(q): Params<OrderQuery>,
) -> ApiResult<Vec<LabelStatRow>> {
    Ok(Json(blocking(&state, move |c| c.label_statistics(auth.user, AnalysisId(id), q.order)).await?))
}

#[derive(Deserialize)]
struct SortQuery {
    #[serde(default)]
    sort: WordSort,
}

async fn word_stats(
    State(state): State<AppState>,
    auth: Auth,
    Id(id): Id<u64>,
    Params(q): Params<SortQuery>,
) -> ApiResult<WordStatsTable> {
    let table = blocking(&state, move |c| c.analysis_word_statistics(auth.user, AnalysisId(id), q.sort)).await?;
    Ok(Json(table))
}

#[derive(Deserialize)]
struct UserQuery {
    user: Option<u64>,
}

async fn get_terms(
    State(state): State<AppState>,
    auth: Auth,
    Id(id): Id<u64>,
    Params(q): Params<UserQuery>,
) -> ApiResult<TermsResponse> {
    let terms = blocking(&state, move |c| c.terms(auth.user, AnalysisId(id), q.user.map(UserId))).await?;
    Ok(Json(TermsResponse { terms }))
}

async fn put_terms(
    State(state): State<AppState>,
    auth: Auth,
    Id(id): Id<u64>,
    Body(req): Body<SetTerms>,
) -> ApiResult<TermsResponse> {
    let pairs: Vec<(String, String)> = req.terms.into_iter().map(|t| (t.pattern, t.reason)).collect();
    let terms = blocking(&state, move |c| c.set_terms(auth.user, AnalysisId(id), &pairs)).await?;
    Ok(Json(TermsResponse { terms }))
}

async fn run_model(
    State(state): State<AppState>,
    auth: Auth,
    Id(id): Id<u64>,
    Body(req): Body<RunRequest>,
) -> ApiResult<RunResponse> {
    let run = blocking(&state, move |c| c.run_model(auth.user, AnalysisId(id), req.algorithm)).await?;
    Ok(Json(RunResponse {
        run: run.seq,
        report: run.report,
    }))
}

async fn list_runs(State(state): State<AppState>, auth: Auth, Id(id): Id<u64>) -> ApiResult<Vec<RunRecord>> {
    Ok(Json(blocking(&state, move |c| c.runs(auth.user, AnalysisId(id))).await?))
}

async fn get_run(State(state): State<AppState>, auth: Auth, Id((id, n)): Id<(u64, u64)>) -> ApiResult<RunRecord> {
    Ok(Json(blocking(&state, move |c| c.run(auth.user, AnalysisId(id), n)).await?))
}

async fn get_confusion(
    State(state): State<AppState>,
    auth: Auth,
    Id((id, n)): Id<(u64, u64)>,
) -> ApiResult<ConfusionResponse> {
    let run = blocking(&state, move |c| c.run(auth.user, AnalysisId(id), n)).await?;
    Ok(Json(ConfusionResponse::from(&run)))
}

async fn leaderboard(State(state): State<AppState>, auth: Auth, Id(id): Id<u64>) -> ApiResult<Vec<LeaderboardRow>> {
    Ok(Json(blocking(&state, move |c| c.leaderboard(auth.user, AnalysisId(id))).await?))
}
