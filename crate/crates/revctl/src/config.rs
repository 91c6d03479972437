//! `rev.toml`: where the pool lives, where the API listens, and the agent's
//! knobs. Relative paths resolve against the config file's directory.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use rand::RngCore;
use serde::Deserialize;
use thiserror::Error;

use revenue_core::agent::DEFAULT_ALERT_THRESHOLD;
use revenue_core::domain::DEFAULT_ITERATIONS;
use revenue_core::miner::TierRateGuide;

const SECRET_BYTES: usize = 32;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    pool_dir: PathBuf,
    bind: String,
    secret_file: PathBuf,
    spool_dir: PathBuf,
    rate_guide: Option<PathBuf>,
    model: Option<PathBuf>,
    static_dir: Option<PathBuf>,
    alert_threshold: Option<f64>,
    code_lifetime_hours: Option<i64>,
    session_idle_minutes: Option<i64>,
    hasher_iterations: Option<u32>,
    checkpoint_every: Option<u64>,
    sync_each_append: Option<bool>,
    admin: Option<AdminBootstrap>,
}

/// Credentials for the first administrator, created on `serve` if the pool
/// has none.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdminBootstrap {
    pub username: String,
    pub password: String,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub path: PathBuf,
    pub pool_dir: PathBuf,
    pub bind: SocketAddr,
    pub secret_file: PathBuf,
    pub spool_dir: PathBuf,
    pub rate_guide: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    pub alert_threshold: f64,
    pub code_lifetime_hours: i64,
    pub session_idle_minutes: i64,
    pub hasher_iterations: u32,
    pub checkpoint_every: u64,
    pub sync_each_append: bool,
    pub admin: Option<AdminBootstrap>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Config::parse(&text, path)
    }

    /// Parses `text` as if it had been read from `path`.
    pub fn parse(text: &str, path: &Path) -> Result<Config, ConfigError> {
        let invalid = |message: String| ConfigError::Invalid { path: path.to_path_buf(), message };
        let raw: RawConfig = toml::from_str(text).map_err(|e| invalid(e.message().to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };

        let bind: SocketAddr = raw.bind.parse().map_err(|_| invalid(format!("bind: not a socket address: {:?}", raw.bind)))?;
        let alert_threshold = raw.alert_threshold.unwrap_or(DEFAULT_ALERT_THRESHOLD);
        if !(alert_threshold > 0.0 && alert_threshold <= 1.0) {
            return Err(invalid(format!("alert_threshold must be in (0, 1], got {alert_threshold}")));
        }
        let code_lifetime_hours = raw.code_lifetime_hours.unwrap_or(revenue_core::agent::DEFAULT_CODE_LIFETIME_HOURS);
        if code_lifetime_hours < 1 {
            return Err(invalid("code_lifetime_hours must be at least 1".into()));
        }
        let session_idle_minutes = raw.session_idle_minutes.unwrap_or(revenue_core::workflow::DEFAULT_IDLE_MINUTES);
        if session_idle_minutes < 1 {
            return Err(invalid("session_idle_minutes must be at least 1".into()));
        }
        let hasher_iterations = raw.hasher_iterations.unwrap_or(DEFAULT_ITERATIONS);
        if hasher_iterations == 0 {
            return Err(invalid("hasher_iterations must be positive".into()));
        }
        if let Some(admin) = &raw.admin {
            if admin.username.trim().is_empty() || admin.password.is_empty() {
                return Err(invalid("admin: username and password are required".into()));
            }
        }
        Ok(Config {
            path: path.to_path_buf(),
            pool_dir: resolve(raw.pool_dir),
            bind,
            secret_file: resolve(raw.secret_file),
            spool_dir: resolve(raw.spool_dir),
            rate_guide: raw.rate_guide.map(resolve),
            model: raw.model.map(resolve),
            static_dir: raw.static_dir.map(resolve),
            alert_threshold,
            code_lifetime_hours,
            session_idle_minutes,
            hasher_iterations,
            checkpoint_every: raw.checkpoint_every.unwrap_or(1000),
            sync_each_append: raw.sync_each_append.unwrap_or(false),
            admin: raw.admin,
        })
    }

    /// The configured guide, or the default bands when none is set.
    pub fn guide(&self) -> Result<TierRateGuide, ConfigError> {
        match &self.rate_guide {
            None => Ok(TierRateGuide::default()),
            Some(p) => TierRateGuide::load(p).map_err(|e| ConfigError::Invalid { path: p.clone(), message: e.to_string() }),
        }
    }

    /// Reads the code-signing secret, creating a random one on first use.
    /// The file holds hex.
    pub fn secret(&self) -> Result<Vec<u8>, ConfigError> {
        let path = &self.secret_file;
        let io = |source| ConfigError::Read { path: path.clone(), source };
        if !path.exists() {
            let mut bytes = [0u8; SECRET_BYTES];
            rand::rng().fill_bytes(&mut bytes);
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(io)?;
            }
            write_private(path, hex::encode(bytes).as_bytes()).map_err(io)?;
            tracing::info!(path = %path.display(), "generated code-signing secret");
        }
        let text = fs::read_to_string(path).map_err(io)?;
        let secret = hex::decode(text.trim())
            .map_err(|e| ConfigError::Invalid { path: path.clone(), message: format!("secret is not hex: {e}") })?;
        if secret.len() < 16 {
            return Err(ConfigError::Invalid { path: path.clone(), message: "secret must be at least 16 bytes".into() });
        }
        Ok(secret)
    }
}

#[cfg(unix)]
fn write_private(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    use std::io::Write;
    use std::os::unix::fs::OpenOptionsExt;
    let mut f = fs::OpenOptions::new().write(true).create_new(true).mode(0o600).open(path)?;
    f.write_all(bytes)
}

#[cfg(not(unix))]
fn write_private(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    fs::write(path, bytes)
}
