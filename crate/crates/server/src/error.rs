use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use textlab_core::classroom::ClassroomError;
use textlab_core::corpus::CorpusError;
use textlab_core::store::StoreError;
use textlab_core::textclf::ClfError;
use textlab_core::wire::ErrorBody;

/// An error response: HTTP status plus a stable machine code.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", message)
    }

    pub fn unauthenticated() -> Self {
        ApiError::new(StatusCode::UNAUTHORIZED, "UNAUTHENTICATED", "log in first")
    }

    pub fn session_expired() -> Self {
        ApiError::new(StatusCode::UNAUTHORIZED, "SESSION_EXPIRED", "your session has expired; log in again")
    }

    pub fn rate_limited() -> Self {
        ApiError::new(StatusCode::TOO_MANY_REQUESTS, "RATE_LIMITED", "too many requests; slow down")
    }

    pub fn payload_too_large(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "PAYLOAD_TOO_LARGE", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code.to_string(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

fn corpus_code(err: &CorpusError) -> (StatusCode, &'static str) {
    use StatusCode as S;
    match err {
        CorpusError::MissingTextColumn => (S::UNPROCESSABLE_ENTITY, "MISSING_TEXT_COLUMN"),
        CorpusError::MissingCategory { .. } => (S::UNPROCESSABLE_ENTITY, "MISSING_CATEGORY"),
        CorpusError::EmptyCorpus => (S::UNPROCESSABLE_ENTITY, "EMPTY_CORPUS"),
        CorpusError::MalformedCsv(_) => (S::BAD_REQUEST, "MALFORMED_CSV"),
        CorpusError::MalformedJson(_) => (S::BAD_REQUEST, "MALFORMED_JSON"),
        CorpusError::CategoryTooSmall { .. } => (S::UNPROCESSABLE_ENTITY, "CATEGORY_TOO_SMALL"),
        CorpusError::InvalidFraction(_) => (S::BAD_REQUEST, "INVALID_FRACTION"),
        CorpusError::DocumentTooLong { .. } => (S::PAYLOAD_TOO_LARGE, "DOCUMENT_TOO_LONG"),
    }
}

fn clf_code(err: &ClfError) -> (StatusCode, &'static str) {
    use StatusCode as S;
    match err {
        ClfError::InvalidPattern(_) => (S::UNPROCESSABLE_ENTITY, "INVALID_PATTERN"),
        ClfError::EmptyTrainingSet => (S::UNPROCESSABLE_ENTITY, "EMPTY_TRAINING_SET"),
        ClfError::NoFeaturesMatched => (S::UNPROCESSABLE_ENTITY, "NO_FEATURES_MATCHED"),
        ClfError::UnknownCategory(_) => (S::UNPROCESSABLE_ENTITY, "UNKNOWN_CATEGORY"),
        ClfError::ModelFeatureMismatch => (S::INTERNAL_SERVER_ERROR, "MODEL_FEATURE_MISMATCH"),
        ClfError::DivergenceDetected { .. } => (S::UNPROCESSABLE_ENTITY, "DIVERGENCE_DETECTED"),
        ClfError::InvalidModel(_) => (S::INTERNAL_SERVER_ERROR, "INVALID_MODEL"),
    }
}

/// Status and machine code of a domain error. Each variant has exactly one code.
pub fn classify(err: &ClassroomError) -> (StatusCode, &'static str) {
    use ClassroomError as E;
    use StatusCode as S;
    match err {
        E::Forbidden => (S::FORBIDDEN, "FORBIDDEN"),
        E::BadCredentials => (S::UNAUTHORIZED, "BAD_CREDENTIALS"),
        E::UnknownUser(_) => (S::NOT_FOUND, "UNKNOWN_USER"),
        E::UnknownGroup(_) => (S::NOT_FOUND, "UNKNOWN_GROUP"),
        E::UnknownCorpus(_) => (S::NOT_FOUND, "UNKNOWN_CORPUS"),
        E::UnknownProject(_) => (S::NOT_FOUND, "UNKNOWN_PROJECT"),
        E::UnknownAnalysis(_) => (S::NOT_FOUND, "UNKNOWN_ANALYSIS"),
        E::UnknownDocument(_) => (S::NOT_FOUND, "UNKNOWN_DOCUMENT"),
        E::UnknownCategory(_) => (S::UNPROCESSABLE_ENTITY, "UNKNOWN_CATEGORY"),
        E::UnknownRun(_) => (S::NOT_FOUND, "UNKNOWN_RUN"),
        E::DuplicateName(_) => (S::CONFLICT, "DUPLICATE_NAME"),
        E::UnknownToken => (S::NOT_FOUND, "UNKNOWN_TOKEN"),
        E::ExpiredToken => (S::GONE, "EXPIRED_TOKEN"),
        E::UsernameTaken(_) => (S::CONFLICT, "USERNAME_TAKEN"),
        E::TooFewCategories(_) => (S::UNPROCESSABLE_ENTITY, "TOO_FEW_CATEGORIES"),
        E::NNotSatisfiable { .. } => (S::UNPROCESSABLE_ENTITY, "N_NOT_SATISFIABLE"),
        E::NothingLeft => (S::CONFLICT, "NOTHING_LEFT"),
        E::AlreadyLabeled(_) => (S::CONFLICT, "ALREADY_LABELED"),
        E::NoLabelsYet => (S::CONFLICT, "NO_LABELS_YET"),
        E::MissingReason(_) => (S::UNPROCESSABLE_ENTITY, "MISSING_REASON"),
        E::NoTerms => (S::UNPROCESSABLE_ENTITY, "NO_TERMS"),
        E::InvalidInput(_) => (S::BAD_REQUEST, "INVALID_INPUT"),
        E::Corpus(e) => corpus_code(e),
        E::Clf(e) => clf_code(e),
        E::Storage(StoreError::StorageFull(_)) => (S::SERVICE_UNAVAILABLE, "STORAGE_FULL"),
        E::Storage(_) => (S::INTERNAL_SERVER_ERROR, "STORAGE_ERROR"),
    }
}

impl From<ClassroomError> for ApiError {
    fn from(err: ClassroomError) -> Self {
        let (status, code) = classify(&err);
        if status.is_server_error() {
            tracing::error!(error = %err, code, "request failed");
        }
        ApiError::new(status, code, err.to_string())
    }
}

impl From<CorpusError> for ApiError {
    fn from(err: CorpusError) -> Self {
        ClassroomError::from(err).into()
    }
}
