//! Registry of live sessions shared by the HTTP and WebSocket handlers.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use infopower_core::metrics::RuleCatalog;
use infopower_core::plant::PlantConfig;
use infopower_core::tree::DecisionTreePolicy;
use infopower_core::xai::XaiMode;
use uuid::Uuid;

use crate::actor::{spawn_session, SessionHandle};
use crate::journal::{read_journal, replay, Journal, JournalHeader};
use crate::protocol::{ErrorCode, ProtocolError, StateUpdate};
use crate::session::Session;
use crate::ServiceError;

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub mode: XaiMode,
    pub plant: PlantConfig,
    pub step: Duration,
    pub journal_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

#[derive(Debug)]
struct Inner {
    tree: Arc<DecisionTreePolicy>,
    catalog: Arc<RuleCatalog>,
    settings: Settings,
    sessions: RwLock<HashMap<String, SessionHandle>>,
}

impl AppState {
    pub fn new(tree: Arc<DecisionTreePolicy>, catalog: Arc<RuleCatalog>, settings: Settings) -> Self {
        AppState {
            inner: Arc::new(Inner { tree, catalog, settings, sessions: RwLock::new(HashMap::new()) }),
        }
    }

    pub fn settings(&self) -> &Settings {
        &self.inner.settings
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.read().expect("session map poisoned").len()
    }

    /// Open a session with a fresh id. Must run inside a Tokio runtime.
    pub fn create_session(&self, mode: Option<XaiMode>) -> Result<(String, StateUpdate), ServiceError> {
        self.create_session_with_id(Uuid::new_v4().to_string(), mode)
    }

    pub fn create_session_with_id(
        &self,
        id: String,
        mode: Option<XaiMode>,
    ) -> Result<(String, StateUpdate), ServiceError> {
        let inner = &self.inner;
        let mode = mode.unwrap_or(inner.settings.mode);
        let session = Session::new(
            id.clone(),
            mode,
            inner.settings.plant.clone(),
            inner.tree.clone(),
            inner.catalog.clone(),
        )?;
        let journal = match &inner.settings.journal_dir {
            Some(dir) => Some(Journal::create(journal_path(dir, &id), &JournalHeader::new(&session, &inner.tree))?),
            None => None,
        };
        let state = session.state_update();
        self.insert(spawn_session(session, journal, inner.settings.step))?;
        Ok((id, state))
    }

    fn insert(&self, handle: SessionHandle) -> Result<(), ServiceError> {
        let mut map = self.inner.sessions.write().expect("session map poisoned");
        if map.contains_key(handle.id()) {
            return Err(ServiceError::DuplicateSession(handle.id().to_string()));
        }
        map.insert(handle.id().to_string(), handle);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<SessionHandle, ProtocolError> {
        self.inner
            .sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ProtocolError::new(ErrorCode::UnknownSession, format!("no session {id}")))
    }

    /// Replay every journal in the journal directory and resume those sessions.
    /// Returns the recovered ids; unreadable journals are logged and skipped.
    pub fn recover(&self) -> Result<Vec<String>, ServiceError> {
        let Some(dir) = self.inner.settings.journal_dir.clone() else {
            return Ok(Vec::new());
        };
        std::fs::create_dir_all(&dir).map_err(|source| ServiceError::Io { path: dir.clone(), source })?;
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|source| ServiceError::Io { path: dir.clone(), source })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        let mut ids = Vec::new();
        for path in paths {
            match self.recover_one(&path) {
                Ok(id) => ids.push(id),
                Err(e) => tracing::warn!(path = %path.display(), error = %e, "skipping journal"),
            }
        }
        Ok(ids)
    }

    fn recover_one(&self, path: &Path) -> Result<String, ServiceError> {
        let recovered = read_journal(path)?;
        if recovered.torn_tail {
            tracing::warn!(path = %path.display(), "dropping torn journal tail");
        }
        let session = replay(&recovered, self.inner.tree.clone(), self.inner.catalog.clone())?;
        let journal = Journal::reopen(path, recovered.valid_len)?;
        let id = session.id().to_string();
        self.insert(spawn_session(session, Some(journal), self.inner.settings.step))?;
        Ok(id)
    }
}

pub fn journal_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.jsonl"))
}
