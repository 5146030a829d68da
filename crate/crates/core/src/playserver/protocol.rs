//! Wire messages. Each WebSocket text frame carries one JSON object tagged
//! by `type`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{Action, Direction, GameState, Item, Pos, PotStatus, SoupContents};

use super::session::Stage;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMsg {
    /// Opens a session, or resumes the participant's existing one.
    Join {
        participant_id: String,
    },
    Action {
        action: Action,
    },
    /// Slot labels, best first.
    Ranking {
        order: Vec<String>,
        #[serde(default)]
        comment: String,
    },
    Heartbeat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerView {
    pub pos: Pos,
    pub facing: Direction,
    pub held: Option<Item>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotView {
    pub pos: Pos,
    pub contents: SoupContents,
    pub status: PotStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterView {
    pub pos: Pos,
    pub item: Item,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMsg {
    Joined {
        session_id: String,
        /// Anonymized agent labels.
        slots: Vec<String>,
        stage: Stage,
        layout: String,
    },
    GameStart {
        /// Index among exploitation games, `None` for warm-up games.
        game_index: Option<usize>,
        total_games: usize,
        slot: String,
        /// 1 when the human controls the first player.
        position: u8,
    },
    StateDelta {
        tick: u32,
        score: u32,
        ticks_left: u32,
        players: [PlayerView; 2],
        pots: Vec<PotView>,
        counters: Vec<CounterView>,
    },
    GameEnd {
        game_index: Option<usize>,
        slot: String,
        position: u8,
        score: u32,
    },
    StageChange {
        stage: Stage,
        /// Slot label to agent id, revealed only once the study is over.
        #[serde(skip_serializing_if = "Option::is_none", default)]
        reveal: Option<BTreeMap<String, String>>,
    },
    Error {
        kind: String,
        message: String,
    },
}

impl ServerMsg {
    pub fn delta(state: &GameState) -> ServerMsg {
        let layout = state.layout();
        ServerMsg::StateDelta {
            tick: state.tick,
            score: state.cumulative_reward,
            ticks_left: layout.episode_length.saturating_sub(state.tick),
            players: state.players.map(|p| PlayerView {
                pos: p.pos,
                facing: p.facing,
                held: p.held,
            }),
            pots: layout
                .pots()
                .iter()
                .zip(&state.pots)
                .map(|(&pos, p)| PotView {
                    pos,
                    contents: p.contents,
                    status: p.status,
                })
                .collect(),
            counters: state
                .counter_items()
                .map(|(pos, item)| CounterView { pos, item })
                .collect(),
        }
    }
}
