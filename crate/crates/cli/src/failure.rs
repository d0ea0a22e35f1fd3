use std::fmt;
use std::process::ExitCode;

use textlab_client::ClientError;
use textlab_core::classroom::ClassroomError;
use textlab_core::corpus::CorpusError;
use textlab_core::store::StoreError;
use textlab_core::textclf::ClfError;

/// A command failure and its exit status: 1 for I/O or configuration
/// problems, 2 for domain errors.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Domain { code: String, message: String },
}

impl Failure {
    pub fn config(message: impl fmt::Display) -> Self {
        Failure::Config(message.to_string())
    }

    pub fn domain(code: &str, message: impl fmt::Display) -> Self {
        Failure::Domain {
            code: code.to_string(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Config(_) => ExitCode::from(1),
            Failure::Domain { .. } => ExitCode::from(2),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "error: {m}"),
            Failure::Domain { code, message } => write!(f, "error[{code}]: {message}"),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::config(e)
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Exists(_) => Failure::domain("STORE_EXISTS", format!("{e}; pass --force to replace it")),
            StoreError::Locked(_) => Failure::domain("STORE_LOCKED", format!("{e}; stop the server first")),
            StoreError::NotFound(_) => Failure::domain("NO_STORE", format!("{e}; run `textlab seed` first")),
            other => Failure::config(other),
        }
    }
}

impl From<ClassroomError> for Failure {
    fn from(e: ClassroomError) -> Self {
        match e {
            ClassroomError::Storage(s) => s.into(),
            other => {
                let (_, code) = textlab_server::classify(&other);
                Failure::domain(code, other)
            }
        }
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        ClassroomError::from(e).into()
    }
}

impl From<ClfError> for Failure {
    fn from(e: ClfError) -> Self {
        ClassroomError::from(e).into()
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Api { code, message, .. } => Failure::Domain { code, message },
            other => Failure::config(other),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::config(e)
    }
}
