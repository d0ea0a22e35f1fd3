use std::path::PathBuf;
use std::time::Duration;

use clap::Args;
use textlab_core::classroom::Settings;
use textlab_core::textclf::{LogRegParams, DEFAULT_ALPHA};

/// Service configuration. Every flag can also be set through a `TEXTLAB_*`
/// environment variable.
#[derive(Debug, Clone, Args)]
pub struct Config {
    /// TCP port to listen on; 0 picks a free one.
    #[arg(long, env = "TEXTLAB_PORT", default_value_t = 8080)]
    pub port: u16,

    /// Address to bind.
    #[arg(long, env = "TEXTLAB_HOST", default_value = "127.0.0.1")]
    pub host: String,

    /// Store directory; created on first start.
    #[arg(long, env = "TEXTLAB_DATA_DIR", default_value = "./textlab-data")]
    pub data_dir: PathBuf,

    /// Session lifetime in minutes; fractions are allowed.
    #[arg(long, env = "TEXTLAB_SESSION_TTL_MINUTES", default_value_t = 480.0)]
    pub session_ttl_minutes: f64,

    /// Smoothing constant for new analyses.
    #[arg(long, env = "TEXTLAB_ALPHA", default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,

    /// Share of each analysis pool used for training.
    #[arg(long, env = "TEXTLAB_TRAIN_FRACTION", default_value_t = 0.8)]
    pub train_fraction: f64,

    /// Largest accepted corpus upload, in megabytes.
    #[arg(long, env = "TEXTLAB_UPLOAD_CAP_MB", default_value_t = 20)]
    pub upload_cap_mb: u64,

    /// Requests allowed per session per minute; 0 means unlimited.
    #[arg(long, env = "TEXTLAB_REQUEST_CAP", default_value_t = 600)]
    pub request_cap: u32,
}

impl Config {
    /// Defaults for a store in `data_dir` on a free port.
    pub fn ephemeral(data_dir: impl Into<PathBuf>) -> Self {
        Config {
            port: 0,
            host: "127.0.0.1".into(),
            data_dir: data_dir.into(),
            session_ttl_minutes: 480.0,
            alpha: DEFAULT_ALPHA,
            train_fraction: 0.8,
            upload_cap_mb: 20,
            request_cap: 0,
        }
    }

    pub fn settings(&self) -> Settings {
        Settings {
            alpha: self.alpha,
            train_fraction: self.train_fraction,
            logreg: LogRegParams::default(),
        }
    }

    pub fn session_ttl(&self) -> Duration {
        Duration::from_secs_f64(self.session_ttl_minutes.max(0.0) * 60.0)
    }

    pub fn upload_cap_bytes(&self) -> usize {
        (self.upload_cap_mb as usize).saturating_mul(1024 * 1024)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if !(self.session_ttl_minutes.is_finite() && self.session_ttl_minutes > 0.0) {
            return Err("session_ttl_minutes must be positive".into());
        }
        Ok(())
    }
}
