//! HTTP JSON API over one or more ingested attention dumps.
//!
//! Every route lives under `/api/v1` and returns the serialized result of the
//! matching `atlas-core` call. Failures return an [`ApiError`] body.

mod error;
mod routes;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use atlas_core::headlens::HeadProfile;
use atlas_core::{ingest_dump, io, AttnType, CorpusStore, DumpDocument};

pub use error::ApiError;
pub use routes::{router, Health, IngestSummary};

pub const DEFAULT_PORT: u16 = 8031;
pub const PORT_ENV: &str = "ATTN_ATLAS_PORT";

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot load dump {path}: {source}")]
    Load {
        path: PathBuf,
        #[source]
        source: atlas_core::Error,
    },
    #[error("dumps do not combine: {0}")]
    Merge(#[source] atlas_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `(type, layer, head, k, seed)`
pub(crate) type ProfileKey = (AttnType, usize, usize, usize, u64);

/// A store together with the HeadLens profiles computed from it. Swapped as
/// a whole on ingest, so cached profiles never outlive their corpus.
#[derive(Default)]
pub(crate) struct Snapshot {
    pub store: Option<Arc<CorpusStore>>,
    pub profiles: Mutex<HashMap<ProfileKey, Arc<HeadProfile>>>,
}

/// Shared server state.
#[derive(Clone, Default)]
pub struct AppState {
    inner: Arc<RwLock<Arc<Snapshot>>>,
    ingest: Arc<tokio::sync::Mutex<()>>,
}

impl AppState {
    pub fn new(store: Option<CorpusStore>) -> Self {
        let snapshot = Snapshot {
            store: store.map(Arc::new),
            ..Snapshot::default()
        };
        Self {
            inner: Arc::new(RwLock::new(Arc::new(snapshot))),
            ingest: Arc::default(),
        }
    }

    pub(crate) fn snapshot(&self) -> Arc<Snapshot> {
        self.inner.read().expect("state lock poisoned").clone()
    }

    pub fn store(&self) -> Option<Arc<CorpusStore>> {
        self.snapshot().store.clone()
    }

    /// Validates `doc` and merges it into the current store; nothing changes
    /// on failure.
    pub async fn ingest(&self, doc: &DumpDocument) -> atlas_core::Result<Arc<CorpusStore>> {
        let incoming = ingest_dump(doc)?;
        let _writer = self.ingest.lock().await;
        let merged = match self.store() {
            Some(current) => current.merge(&incoming)?,
            None => incoming,
        };
        let merged = Arc::new(merged);
        let snapshot = Snapshot {
            store: Some(merged.clone()),
            ..Snapshot::default()
        };
        *self.inner.write().expect("state lock poisoned") = Arc::new(snapshot);
        Ok(merged)
    }
}

/// Reads, validates and merges dumps in order. An empty list gives `None`.
pub fn load_dumps(paths: &[PathBuf]) -> Result<Option<CorpusStore>, ServeError> {
    let mut store: Option<CorpusStore> = None;
    for path in paths {
        let load = |source| ServeError::Load {
            path: path.clone(),
            source,
        };
        let doc: DumpDocument = io::read_document(path).map_err(load)?;
        let next = ingest_dump(&doc).map_err(load)?;
        store = Some(match store {
            Some(s) => s.merge(&next).map_err(ServeError::Merge)?,
            None => next,
        });
    }
    Ok(store)
}

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub host: String,
    pub port: u16,
    pub dumps: Vec<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            dumps: Vec::new(),
        }
    }
}

/// Loads the configured dumps and serves until the process is stopped.
pub async fn serve(config: ServeConfig) -> Result<(), ServeError> {
    let store = load_dumps(&config.dumps)?;
    if let Some(s) = &store {
        tracing::info!(sentences = s.len(), "corpus loaded");
    }
    let app = router(AppState::new(store));
    let listener = tokio::net::TcpListener::bind((config.host.as_str(), config.port)).await?;
    let addr: SocketAddr = listener.local_addr()?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
