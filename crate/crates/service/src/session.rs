//! In-memory session store.
//!
//! A session moves `new → configured → running → done | failed`; a finished
//! session (done or failed) may be configured and run again. Sessions idle
//! for longer than the TTL are evicted, except while running.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use fts_core::engine::{EngineError, Stage, Variant};
use fts_core::{Cohort, SessionConfig};
use serde::Serialize;

pub const DEFAULT_TTL: Duration = Duration::from_secs(3600);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    New,
    Configured,
    Running,
    Done,
    Failed,
}

impl SessionState {
    pub fn name(self) -> &'static str {
        match self {
            SessionState::New => "new",
            SessionState::Configured => "configured",
            SessionState::Running => "running",
            SessionState::Done => "done",
            SessionState::Failed => "failed",
        }
    }

    fn can_become(self, next: SessionState) -> bool {
        use SessionState::*;
        matches!(
            (self, next),
            (New, Configured) | (Done, Configured) | (Failed, Configured) | (Configured, Running) | (Running, Done) | (Running, Failed)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Progress {
    pub model: Option<Variant>,
    pub stage: Stage,
}

/// Why a run failed, as reported to clients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub kind: String,
    pub message: String,
    pub model: Option<Variant>,
    pub stage: Option<Stage>,
}

impl From<&EngineError> for RunFailure {
    fn from(e: &EngineError) -> Self {
        RunFailure {
            kind: "EngineError".into(),
            message: e.to_string(),
            model: e.variant,
            stage: Some(e.stage),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StoreError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {id} cannot move from {from} to {to}")]
    Conflict {
        id: String,
        from: &'static str,
        to: &'static str,
    },
}

/// What a client can learn about a session.
#[derive(Debug, Clone)]
pub enum Snapshot {
    New,
    Configured,
    Running(Option<Progress>),
    /// The serialized result, stored once and served verbatim.
    Done(Arc<String>),
    Failed(RunFailure),
}

impl Snapshot {
    pub fn state(&self) -> SessionState {
        match self {
            Snapshot::New => SessionState::New,
            Snapshot::Configured => SessionState::Configured,
            Snapshot::Running(_) => SessionState::Running,
            Snapshot::Done(_) => SessionState::Done,
            Snapshot::Failed(_) => SessionState::Failed,
        }
    }
}

#[derive(Debug)]
struct Session {
    cohort: Arc<Cohort>,
    config: Option<SessionConfig>,
    state: SessionState,
    progress: Option<Progress>,
    result: Option<Arc<String>>,
    failure: Option<RunFailure>,
    /// Bumped on every run so late updates from an older run are ignored.
    generation: u64,
    touched: Instant,
}

impl Session {
    fn transition(&mut self, id: &str, next: SessionState) -> Result<(), StoreError> {
        if !self.state.can_become(next) {
            return Err(StoreError::Conflict {
                id: id.to_string(),
                from: self.state.name(),
                to: next.name(),
            });
        }
        self.state = next;
        Ok(())
    }
}

/// A run handed out by [`SessionStore::begin_run`].
#[derive(Debug, Clone)]
pub struct RunTicket {
    pub session_id: String,
    pub generation: u64,
    pub cohort: Arc<Cohort>,
    pub config: SessionConfig,
}

#[derive(Debug)]
pub struct SessionStore {
    sessions: Mutex<HashMap<String, Session>>,
    ttl: Duration,
}

impl Default for SessionStore {
    fn default() -> Self {
        Self::new(DEFAULT_TTL)
    }
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        Self {
            sessions: Mutex::new(HashMap::new()),
            ttl,
        }
    }

    fn lock(&self) -> MutexGuard<'_, HashMap<String, Session>> {
        self.sessions.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    pub fn create(&self, cohort: Arc<Cohort>) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.lock().insert(
            id.clone(),
            Session {
                cohort,
                config: None,
                state: SessionState::New,
                progress: None,
                result: None,
                failure: None,
                generation: 0,
                touched: Instant::now(),
            },
        );
        id
    }

    pub fn cohort(&self, id: &str) -> Result<Arc<Cohort>, StoreError> {
        let mut sessions = self.lock();
        let s = sessions.get_mut(id).ok_or_else(|| StoreError::UnknownSession(id.to_string()))?;
        s.touched = Instant::now();
        Ok(s.cohort.clone())
    }

    /// Stores `config` and moves the session to running in one step.
    pub fn begin_run(&self, id: &str, config: SessionConfig) -> Result<RunTicket, StoreError> {
        let mut sessions = self.lock();
        let s = sessions.get_mut(id).ok_or_else(|| StoreError::UnknownSession(id.to_string()))?;
        s.transition(id, SessionState::Configured)?;
        s.config = Some(config.clone());
        s.result = None;
        s.failure = None;
        s.progress = None;
        s.transition(id, SessionState::Running)?;
        s.generation += 1;
        s.touched = Instant::now();
        Ok(RunTicket {
            session_id: id.to_string(),
            generation: s.generation,
            cohort: s.cohort.clone(),
            config,
        })
    }

    pub fn set_progress(&self, ticket: &RunTicket, progress: Progress) {
        let mut sessions = self.lock();
        if let Some(s) = sessions.get_mut(&ticket.session_id) {
            if s.generation == ticket.generation && s.state == SessionState::Running {
                s.progress = Some(progress);
            }
        }
    }

    pub fn finish(&self, ticket: &RunTicket, outcome: Result<String, RunFailure>) {
        let mut sessions = self.lock();
        let Some(s) = sessions.get_mut(&ticket.session_id) else {
            return;
        };
        if s.generation != ticket.generation {
            return;
        }
        let next = match outcome {
            Ok(json) => {
                s.result = Some(Arc::new(json));
                SessionState::Done
            }
            Err(failure) => {
                s.failure = Some(failure);
                SessionState::Failed
            }
        };
        s.transition(&ticket.session_id, next).expect("only running sessions finish");
        s.progress = None;
        s.touched = Instant::now();
    }

    pub fn snapshot(&self, id: &str) -> Result<Snapshot, StoreError> {
        let mut sessions = self.lock();
        let s = sessions.get_mut(id).ok_or_else(|| StoreError::UnknownSession(id.to_string()))?;
        s.touched = Instant::now();
        Ok(match s.state {
            SessionState::New => Snapshot::New,
            SessionState::Configured => Snapshot::Configured,
            SessionState::Running => Snapshot::Running(s.progress),
            SessionState::Done => Snapshot::Done(s.result.clone().expect("done sessions hold a result")),
            SessionState::Failed => Snapshot::Failed(s.failure.clone().expect("failed sessions hold a failure")),
        })
    }

    pub fn config(&self, id: &str) -> Result<Option<SessionConfig>, StoreError> {
        let sessions = self.lock();
        let s = sessions.get(id).ok_or_else(|| StoreError::UnknownSession(id.to_string()))?;
        Ok(s.config.clone())
    }

    /// Drops idle sessions past the TTL. Returns how many were removed.
    pub fn evict_expired(&self, now: Instant) -> usize {
        let mut sessions = self.lock();
        let before = sessions.len();
        sessions.retain(|_, s| s.state == SessionState::Running || now.duration_since(s.touched) < self.ttl);
        before - sessions.len()
    }

    pub fn running_count(&self) -> usize {
        self.lock().values().filter(|s| s.state == SessionState::Running).count()
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
