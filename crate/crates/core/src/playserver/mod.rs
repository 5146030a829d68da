//! Human-study game server: a fixed-rate tick loop per session, slowed AI
//! partners, warm-up, ranking and exploitation stages, and append-only
//! persistence.

pub mod protocol;
pub mod server;
pub mod session;
pub mod store;

pub use protocol::{ClientMsg, ServerMsg};
pub use server::{router, serve, AppState, ServerConfig};
pub use session::{
    exploitation_schedule, CompletedGame, Effects, ScheduledGame, Session, SessionError, Stage,
    TickPolicy, SCHEDULE_LEN,
};
pub use store::{LogEntry, SessionStore};
