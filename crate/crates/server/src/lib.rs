//! HTTP/JSON service for textlab. State lives in one store directory and is
//! recovered from its journal on start.

mod config;
mod error;
mod routes;
mod session;

use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use textlab_core::classroom::{Classroom, ClassroomError, SystemEntropy};
use textlab_core::store::{Store, StoreError};
use tokio::net::TcpListener;

pub use config::Config;
pub use error::{classify, ApiError};
pub use routes::{router, AppState};
pub use session::Sessions;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("port {port} is already in use")]
    PortInUse { port: u16 },
    #[error(
        "the store in {dir} is corrupt ({reason}). Restore it from a backup, or move the \
         damaged journal aside and re-seed; the server will not start on a corrupt store"
    )]
    CorruptStore { dir: PathBuf, reason: String },
    #[error("the store in {0} is already in use by another process")]
    StoreLocked(PathBuf),
    #[error("{0}")]
    Store(StoreError),
    #[error("network error: {0}")]
    Io(#[from] io::Error),
}

/// A bound, not yet serving, instance.
pub struct Server {
    listener: TcpListener,
    app: axum::Router,
    classroom: Arc<Classroom>,
}

impl Server {
    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    pub fn classroom(&self) -> Arc<Classroom> {
        self.classroom.clone()
    }

    /// Serves until `shutdown` resolves.
    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> io::Result<()> {
        axum::serve(self.listener, self.app)
            .with_graceful_shutdown(shutdown)
            .await
    }
}

fn open_classroom(config: &Config) -> Result<Classroom, ServeError> {
    let dir = &config.data_dir;
    if !Store::exists(dir) {
        Store::create(dir, false).map_err(ServeError::Store)?;
    }
    let corrupt = |reason: String| ServeError::CorruptStore {
        dir: dir.clone(),
        reason,
    };
    match Classroom::open(dir, config.settings(), Box::new(SystemEntropy)) {
        Ok(c) => Ok(c),
        Err(ClassroomError::Storage(StoreError::Locked(d))) => Err(ServeError::StoreLocked(d)),
        Err(ClassroomError::Storage(e @ (StoreError::Corrupt { .. } | StoreError::UnsupportedVersion { .. }))) => {
            Err(corrupt(e.to_string()))
        }
        Err(ClassroomError::Storage(e)) => Err(ServeError::Store(e)),
        Err(e) => Err(corrupt(e.to_string())),
    }
}

/// Binds the listening socket first, then recovers the store.
pub async fn bind(config: Config) -> Result<Server, ServeError> {
    config.validate().map_err(ServeError::Config)?;
    let listener = TcpListener::bind((config.host.as_str(), config.port))
        .await
        .map_err(|e| match e.kind() {
            io::ErrorKind::AddrInUse => ServeError::PortInUse { port: config.port },
            _ => ServeError::Io(e),
        })?;
    let cfg = config.clone();
    let classroom = tokio::task::spawn_blocking(move || open_classroom(&cfg))
        .await
        .map_err(|e| ServeError::Io(io::Error::other(e)))??;
    Ok(serve_classroom(listener, Arc::new(classroom), &config))
}

/// Wraps an existing classroom, for example one backed by an in-memory journal.
pub fn serve_classroom(listener: TcpListener, classroom: Arc<Classroom>, config: &Config) -> Server {
    let state = AppState {
        classroom: classroom.clone(),
        sessions: Arc::new(Sessions::new(config.session_ttl(), config.request_cap)),
    };
    Server {
        listener,
        app: router(state, config.upload_cap_bytes()),
        classroom,
    }
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

/// Binds, logs the address and serves until a shutdown signal.
pub async fn serve(config: Config) -> Result<(), ServeError> {
    let server = bind(config.clone()).await?;
    tracing::info!(addr = %server.local_addr(), data_dir = %config.data_dir.display(), "textlab listening");
    println!("listening on http://{}", server.local_addr());
    server.run(shutdown_signal()).await?;
    Ok(())
}
