use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock, RwLockReadGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use corec_core::context::{should_replan, BulletinFile};
use corec_core::domain::{Participant, Role, WorldState};
use corec_core::store::EventLog;
use corec_core::travel::Router;
use corec_core::Coordinator;
use tokio::sync::{mpsc, watch};

use crate::config::{ServerConfig, TokenEntry};
use crate::error::ApiError;
use crate::ServerError;

/// An authenticated caller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub participant_id: String,
    pub role: Role,
}

struct Inner {
    coord: RwLock<Coordinator>,
    tokens: HashMap<String, Session>,
    seq_tx: watch::Sender<u64>,
    replan_tx: mpsc::UnboundedSender<()>,
    replan_rx: Mutex<Option<mpsc::UnboundedReceiver<()>>>,
}

/// Shared service state: one coordinator behind a lock, the token table,
/// and the channels that wake streams and the re-planner.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

/// Adds token holders who are decision-makers or affected people to the
/// initial world. Drivers join through registration.
pub fn seed_participants(world: &mut WorldState, tokens: &[TokenEntry]) {
    for t in tokens {
        if matches!(t.role, Role::DecisionMaker | Role::Affected) && world.participant(&t.participant_id).is_none() {
            world.participants.push(Participant { id: t.participant_id.clone(), role: t.role, name: t.name.clone() });
        }
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl AppState {
    pub fn new(coord: Coordinator, tokens: &[TokenEntry]) -> Self {
        let last = coord.log().last_seq();
        let (seq_tx, _) = watch::channel(last);
        let (replan_tx, replan_rx) = mpsc::unbounded_channel();
        let tokens = tokens
            .iter()
            .map(|t| (t.token.clone(), Session { participant_id: t.participant_id.clone(), role: t.role }))
            .collect();
        Self {
            inner: Arc::new(Inner {
                coord: RwLock::new(coord),
                tokens,
                seq_tx,
                replan_tx,
                replan_rx: Mutex::new(Some(replan_rx)),
            }),
        }
    }

    pub fn from_config(cfg: &ServerConfig) -> Result<Self, ServerError> {
        let mut world = match &cfg.world_path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ServerError::Config(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| ServerError::Config(format!("{}: {e}", p.display())))?
            }
            None => WorldState::default(),
        };
        seed_participants(&mut world, &cfg.auth.tokens);
        let log = EventLog::open(&cfg.event_log_path)?;
        let router = Router::new(cfg.routing.clone()).map_err(|e| ServerError::Config(e.to_string()))?;
        let mut coord = Coordinator::new(world, log, router, cfg.weights)?;
        if let Some(p) = &cfg.bulletin_path {
            coord = coord.with_bulletins(Box::new(BulletinFile::open(p)?));
        }
        Ok(Self::new(coord, &cfg.auth.tokens))
    }

    pub fn authenticate(&self, token: &str) -> Result<Session, ApiError> {
        self.inner.tokens.get(token).cloned().ok_or_else(ApiError::unauthorized)
    }

    pub fn read(&self) -> RwLockReadGuard<'_, Coordinator> {
        self.inner.coord.read().unwrap_or_else(|p| p.into_inner())
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.inner.seq_tx.subscribe()
    }

    /// Runs `f` with exclusive access on the blocking pool, wakes streams
    /// and queues a re-plan when the new events call for one.
    pub async fn write<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Coordinator) -> Result<T, ApiError> + Send + 'static,
    {
        let state = self.clone();
        tokio::task::spawn_blocking(move || {
            let mut coord = state.inner.coord.write().unwrap_or_else(|p| p.into_inner());
            let before = coord.log().len();
            let out = f(&mut coord);
            let events = &coord.log().events()[before..];
            let replan = events.iter().any(should_replan);
            let last = coord.log().last_seq();
            drop(coord);
            if last as usize != before {
                state.inner.seq_tx.send_replace(last);
            }
            if replan {
                let _ = state.inner.replan_tx.send(());
            }
            out
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
    }

    /// Starts the background re-planner once. It handles one trigger at a
    /// time, so re-plans never interleave with each other.
    pub fn start_replanner(&self) {
        let Some(mut rx) = self.inner.replan_rx.lock().unwrap_or_else(|p| p.into_inner()).take() else {
            return;
        };
        let state = self.clone();
        tokio::spawn(async move {
            while rx.recv().await.is_some() {
                while rx.try_recv().is_ok() {}
                let result = state
                    .write(|c| {
                        let at = unix_now().max(c.world().clock);
                        c.replan_current(at).map_err(ApiError::from)
                    })
                    .await;
                match result {
                    Ok(Some(out)) => tracing::info!(plan = %out.plan.id, released = ?out.released, "re-planned"),
                    Ok(None) => {}
                    Err(e) => tracing::warn!(error = %e.message, "re-plan failed"),
                }
            }
        });
    }
}
