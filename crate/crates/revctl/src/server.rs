//! Opening a deployment from its config and running the API.

use std::fs::{self, File};
use std::future::Future;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread::JoinHandle;

use chrono::Duration;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use revenue_core::agent::AnnModel;
use revenue_core::domain::PasswordHasher;
use revenue_core::pool::{DataPool, PoolError, PoolOptions};
use revenue_core::workflow::{RevenueService, SpoolNotifier, WorkflowError};

use crate::api;
use crate::config::{Config, ConfigError};

const LOCK_FILE: &str = "revctl.lock";

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("data pool: {0}")]
    Pool(#[from] PoolError),
    #[error("data pool {0} is in use by another revctl process")]
    PoolBusy(PathBuf),
    #[error("cannot bind {addr}: {source}")]
    AddressInUse { addr: SocketAddr, source: std::io::Error },
    #[error("model {path}: {message}")]
    Model { path: PathBuf, message: String },
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Exclusive hold on a pool directory, released on drop.
#[derive(Debug)]
pub struct PoolLock {
    _file: File,
}

impl PoolLock {
    pub fn acquire(dir: &Path) -> Result<PoolLock, ServeError> {
        let io = |source| ServeError::Io { path: dir.to_path_buf(), source };
        fs::create_dir_all(dir).map_err(io)?;
        let file = File::options().create(true).truncate(false).write(true).open(dir.join(LOCK_FILE)).map_err(io)?;
        match file.try_lock() {
            Ok(()) => Ok(PoolLock { _file: file }),
            Err(fs::TryLockError::WouldBlock) => Err(ServeError::PoolBusy(dir.to_path_buf())),
            Err(fs::TryLockError::Error(e)) => Err(io(e)),
        }
    }
}

/// A service over an on-disk pool, holding the pool lock for its lifetime.
pub struct Deployment {
    pub service: Arc<RevenueService>,
    pub config: Config,
    _lock: PoolLock,
}

impl Deployment {
    pub fn open(config: Config) -> Result<Deployment, ServeError> {
        let lock = PoolLock::acquire(&config.pool_dir)?;
        let guide = config.guide()?;
        let secret = config.secret()?;
        let pool = DataPool::open(
            &config.pool_dir,
            PoolOptions { checkpoint_every: config.checkpoint_every, sync_each_append: config.sync_each_append },
        )?;
        let spool = SpoolNotifier::new(&config.spool_dir)
            .map_err(|source| ServeError::Io { path: config.spool_dir.clone(), source })?;
        let service = RevenueService::builder(Arc::new(pool), secret)
            .guide(guide)
            .notifier(Arc::new(spool))
            .hasher(PasswordHasher::with_iterations(config.hasher_iterations))
            .alert_threshold(config.alert_threshold)
            .code_lifetime(Duration::hours(config.code_lifetime_hours))
            .idle_timeout(Duration::minutes(config.session_idle_minutes))
            .build();
        if let Some(path) = &config.model {
            let model = AnnModel::load(path).map_err(|e| ServeError::Model { path: path.clone(), message: e.to_string() })?;
            service
                .agent()
                .install_model(model)
                .map_err(|e| ServeError::Model { path: path.clone(), message: e.to_string() })?;
        }
        Ok(Deployment { service: Arc::new(service), config, _lock: lock })
    }

    /// Creates the configured administrator unless one already exists.
    pub fn bootstrap_admin(&self) -> Result<bool, ServeError> {
        let Some(admin) = &self.config.admin else { return Ok(false) };
        let has_admin = self.service.pool().read(|s| s.has_admin());
        if has_admin {
            return Ok(false);
        }
        self.service.system().bootstrap_admin(&admin.username, &admin.password)?;
        tracing::info!(username = %admin.username, "created administrator");
        Ok(true)
    }

    /// Checkpoints and flushes the pool.
    pub fn close(&self) -> Result<(), ServeError> {
        Ok(self.service.pool().close()?)
    }
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(
    listener: TcpListener,
    svc: Arc<RevenueService>,
    static_dir: Option<PathBuf>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, api::router(svc, static_dir)).with_graceful_shutdown(shutdown).await
}

pub async fn bind(addr: SocketAddr) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr).await.map_err(|source| ServeError::AddressInUse { addr, source })
}

/// Resolves on Ctrl-C or, on Unix, SIGTERM.
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

/// An API server on its own thread and runtime, for tests and examples.
pub struct BackgroundServer {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl BackgroundServer {
    /// Listens on an ephemeral loopback port.
    pub fn start(svc: Arc<RevenueService>) -> std::io::Result<BackgroundServer> {
        let std_listener = std::net::TcpListener::bind("127.0.0.1:0")?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let (stop, stopped) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new().name("revctl-api".into()).spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(4).enable_all().build()?;
            rt.block_on(async move {
                let listener = TcpListener::from_std(std_listener)?;
                serve(listener, svc, None, async {
                    let _ = stopped.await;
                })
                .await
            })
        })?;
        Ok(BackgroundServer { addr, stop: Some(stop), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) -> std::io::Result<()> {
        self.shutdown()
    }

    fn shutdown(&mut self) -> std::io::Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}
