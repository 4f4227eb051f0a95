//! HTTP annotation service.
//!
//! A session walks a corpus topic by topic. For each target mention the
//! service ranks and prunes the clusters annotated so far and waits for the
//! annotator's decision, which is validated, appended to the session's
//! decision log and applied. Sessions live under a state directory and are
//! rebuilt from their logs on restart.
//!
//! | method | path                       | reply                                  |
//! |--------|----------------------------|----------------------------------------|
//! | POST   | `/sessions`                | `201 {session_id, total}`              |
//! | GET    | `/sessions/{id}`           | manifest and progress                  |
//! | GET    | `/sessions/{id}/next`      | target and candidates, `204` when done |
//! | POST   | `/sessions/{id}/decision`  | assigned cluster and progress          |
//! | GET    | `/sessions/{id}/export`    | clusters per topic                     |
//! | GET    | `/sessions/{id}/metrics`   | comparisons, recall, per-target trace  |
//!
//! Errors are `{"error": "..."}` with 404 for unknown sessions, 409 for a
//! decision that does not match the current target, and 422 for malformed
//! or invalid bodies.

mod api;
pub mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use evcoref_core::scorers::ScorerSpec;
use evcoref_core::{ScorerKind, TopicLevel};

pub use api::router;
pub use session::{CorpusInput, Manifest, Session, SessionConfig, SessionError};

/// Defaults applied to `POST /sessions` fields the client leaves out.
#[derive(Debug, Clone)]
pub struct SessionDefaults {
    pub corpus_path: Option<PathBuf>,
    pub scorer: ScorerSpec,
    pub k: f64,
    pub seed: u64,
    pub topic_level: TopicLevel,
}

impl Default for SessionDefaults {
    fn default() -> Self {
        SessionDefaults {
            corpus_path: None,
            scorer: ScorerSpec::new(ScorerKind::Lemma),
            k: 5.0,
            seed: 0,
            topic_level: TopicLevel::Topic,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub state_dir: PathBuf,
    pub defaults: SessionDefaults,
    /// Allowed browser origin; any origin when unset.
    pub cors_origin: Option<String>,
}

impl ServiceConfig {
    pub fn new(state_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            state_dir: state_dir.into(),
            defaults: SessionDefaults::default(),
            cors_origin: None,
        }
    }
}

type SharedSession = Arc<Mutex<Session>>;

/// Shared service state: the session table and the state directory.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, SharedSession>>,
}

fn valid_session_id(id: &str) -> bool {
    uuid::Uuid::parse_str(id).is_ok()
}

impl AppState {
    /// Creates the state directory if needed and reopens every session in
    /// it. Sessions that fail to replay are logged and skipped.
    pub fn open(config: ServiceConfig) -> std::io::Result<AppState> {
        std::fs::create_dir_all(&config.state_dir)?;
        let mut sessions = HashMap::new();
        for entry in std::fs::read_dir(&config.state_dir)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if !valid_session_id(&name) || !entry.path().join(session::MANIFEST_FILE).exists() {
                continue;
            }
            match Session::open(&entry.path()) {
                Ok(s) => {
                    log::info!("reopened session {name} at {}/{}", s.progress().done, s.progress().total);
                    sessions.insert(name, Arc::new(Mutex::new(s)));
                }
                Err(e) => log::error!("cannot reopen session {name}: {e}"),
            }
        }
        Ok(AppState {
            inner: Arc::new(Inner {
                config,
                sessions: RwLock::new(sessions),
            }),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    pub fn state_dir(&self) -> &Path {
        &self.inner.config.state_dir
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.inner.sessions.read().unwrap().keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Looks a session up, loading it from disk if another process created
    /// it after startup.
    pub fn session(&self, id: &str) -> Result<SharedSession, SessionError> {
        if let Some(s) = self.inner.sessions.read().unwrap().get(id) {
            return Ok(Arc::clone(s));
        }
        let dir = self.state_dir().join(id);
        if !valid_session_id(id) || !dir.join(session::MANIFEST_FILE).exists() {
            return Err(SessionError::NotFound(id.to_string()));
        }
        let loaded = Arc::new(Mutex::new(Session::open(&dir)?));
        let mut table = self.inner.sessions.write().unwrap();
        Ok(Arc::clone(table.entry(id.to_string()).or_insert(loaded)))
    }

    pub fn create_session(&self, corpus: CorpusInput, config: SessionConfig) -> Result<SharedSession, SessionError> {
        let id = uuid::Uuid::new_v4().to_string();
        let session = Session::create(self.state_dir(), &id, corpus, config)?;
        log::info!("created session {id} with {} mentions", session.manifest().mentions);
        let shared = Arc::new(Mutex::new(session));
        self.inner
            .sessions
            .write()
            .unwrap()
            .insert(id, Arc::clone(&shared));
        Ok(shared)
    }
}

/// Serves on an already bound listener until the task is dropped.
pub async fn serve_on(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    serve_on(listener, state).await
}
