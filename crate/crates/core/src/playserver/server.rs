//! WebSocket front end. Each connection owns its session's game loop for
//! as long as it stays open; a reconnecting participant resumes the same
//! session.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::time::MissedTickBehavior;

use crate::agent::mix_seed;
use crate::engine::Layout;
use crate::learners::PolicyHandle;

use super::protocol::{ClientMsg, ServerMsg};
use super::session::{Effects, Session, SessionError, Stage, TickPolicy};
use super::store::{LogEntry, SessionStore};

pub struct ServerConfig {
    pub layout: Arc<Layout>,
    pub roster: Vec<PolicyHandle>,
    pub tick: TickPolicy,
    pub seed: u64,
    pub store: SessionStore,
}

type SharedSession = Arc<tokio::sync::Mutex<Session>>;

#[derive(Clone)]
pub struct AppState {
    cfg: Arc<ServerConfig>,
    sessions: Arc<Mutex<HashMap<String, SharedSession>>>,
    created: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(cfg: ServerConfig) -> Result<AppState, SessionError> {
        // Validate the roster once up front.
        Session::new(
            "probe",
            "probe",
            cfg.layout.clone(),
            cfg.roster.clone(),
            0,
            cfg.tick,
        )?;
        Ok(AppState {
            cfg: Arc::new(cfg),
            sessions: Arc::default(),
            created: Arc::default(),
        })
    }

    fn session_for(&self, participant: &str) -> Result<SharedSession, SessionError> {
        let mut map = self.sessions.lock().expect("session map poisoned");
        if let Some(s) = map.get(participant) {
            return Ok(s.clone());
        }
        let n = self.created.fetch_add(1, Ordering::SeqCst);
        let seed = mix_seed(self.cfg.seed, n);
        let id = format!("s{n:04}-{:08x}", seed as u32);
        let session = Session::new(
            id.clone(),
            participant,
            self.cfg.layout.clone(),
            self.cfg.roster.clone(),
            seed,
            self.cfg.tick,
        )?;
        let entry = LogEntry::SessionCreated {
            participant_id: participant.to_string(),
            layout: self.cfg.layout.name.clone(),
            roster: self.cfg.roster.iter().map(|p| p.id.clone()).collect(),
            seed,
        };
        if let Err(e) = self.cfg.store.log(&id, &entry) {
            eprintln!("session {id}: cannot write log: {e}");
        }
        let shared = Arc::new(tokio::sync::Mutex::new(session));
        map.insert(participant.to_string(), shared.clone());
        Ok(shared)
    }

    fn persist(&self, session_id: &str, fx: &Effects) {
        let store = &self.cfg.store;
        for g in &fx.completed {
            if let Err(e) = store.save_game(session_id, g) {
                eprintln!("session {session_id}: cannot save game: {e}");
            }
        }
        if let Some((rec, comment)) = &fx.ranking {
            if let Err(e) = store.save_ranking(session_id, rec, comment) {
                eprintln!("session {session_id}: cannot save ranking: {e}");
            }
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/ws", get(ws_handler))
        .route("/health", get(|| async { "ok" }))
        .with_state(state)
}

pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, state))
}

fn encode(msg: &ServerMsg) -> Message {
    Message::Text(serde_json::to_string(msg).expect("server messages serialize"))
}

fn error_msg(kind: &str, message: impl ToString) -> Message {
    encode(&ServerMsg::Error {
        kind: kind.to_string(),
        message: message.to_string(),
    })
}

async fn connection(socket: WebSocket, state: AppState) {
    let (mut tx, mut rx) = socket.split();
    let participant = loop {
        match rx.next().await {
            Some(Ok(Message::Text(t))) => match serde_json::from_str::<ClientMsg>(&t) {
                Ok(ClientMsg::Join { participant_id }) => break participant_id,
                Ok(ClientMsg::Heartbeat) => continue,
                Ok(_) => {
                    let _ = tx.send(error_msg("not_joined", "send join first")).await;
                }
                Err(e) => {
                    let _ = tx.send(error_msg("bad_message", e)).await;
                }
            },
            Some(Ok(_)) => continue,
            _ => return,
        }
    };
    let shared = match state.session_for(&participant) {
        Ok(s) => s,
        Err(e) => {
            let _ = tx.send(error_msg(e.kind(), e)).await;
            return;
        }
    };
    let Ok(mut session) = shared.try_lock() else {
        let _ = tx
            .send(error_msg(
                "session_busy",
                "session is open on another connection",
            ))
            .await;
        return;
    };
    if tx.send(encode(&session.joined())).await.is_err() {
        return;
    }
    let mut clock = tokio::time::interval(Duration::from_millis(
        session.tick_policy.human_input_window_ms.max(1),
    ));
    clock.set_missed_tick_behavior(MissedTickBehavior::Delay);
    loop {
        let fx = tokio::select! {
            incoming = rx.next() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                    Some(Ok(_)) => continue,
                };
                match serde_json::from_str::<ClientMsg>(&text) {
                    Ok(ClientMsg::Action { action }) => {
                        session.submit_action(action).map(|_| Effects::default())
                    }
                    Ok(ClientMsg::Ranking { order, comment }) => session.submit_ranking(&order, &comment),
                    Ok(ClientMsg::Heartbeat) => Ok(Effects::default()),
                    Ok(ClientMsg::Join { .. }) => Ok(Effects {
                        messages: vec![session.joined()],
                        ..Effects::default()
                    }),
                    Err(e) => {
                        if tx.send(error_msg("bad_message", e)).await.is_err() {
                            return;
                        }
                        continue;
                    }
                }
            }
            _ = clock.tick() => session.tick(),
        };
        match fx {
            Ok(fx) => {
                state.persist(&session.session_id, &fx);
                for m in &fx.messages {
                    if tx.send(encode(m)).await.is_err() {
                        return;
                    }
                }
                if session.stage == Stage::Done {
                    let _ = tx.send(Message::Close(None)).await;
                    // Let the client finish the closing handshake.
                    let drain = async { while let Some(Ok(_)) = rx.next().await {} };
                    let _ = tokio::time::timeout(Duration::from_secs(2), drain).await;
                    return;
                }
            }
            Err(e) => {
                if tx.send(error_msg(e.kind(), &e)).await.is_err() {
                    return;
                }
            }
        }
    }
}
