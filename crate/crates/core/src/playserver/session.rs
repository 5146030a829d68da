//! One participant's study session: warm-up games against every slot, a
//! ranking, then a shuffled 24-game exploitation schedule.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{mix_seed, seat_seed, Actor};
use crate::engine::{apply, reset, Action, GameState, Layout, Trajectory};
use crate::evalharness::RankingRecord;
use crate::learners::PolicyHandle;

use super::protocol::ServerMsg;

pub const ROSTER_SIZE: usize = 4;
pub const REPEATS: usize = 3;
pub const SCHEDULE_LEN: usize = ROSTER_SIZE * 2 * REPEATS;
pub const SLOT_LABELS: [&str; ROSTER_SIZE] = ["A", "B", "C", "D"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("roster needs {ROSTER_SIZE} distinct agents, got {0}")]
    UnknownAgent(String),
    #[error("ranking must order each of the {ROSTER_SIZE} slots exactly once")]
    NotAPermutation,
    #[error("operation not allowed in stage {0:?}")]
    WrongStage(Stage),
    #[error("session is closed")]
    SessionClosed,
}

impl SessionError {
    pub fn kind(&self) -> &'static str {
        match self {
            SessionError::UnknownAgent(_) => "unknown_agent",
            SessionError::NotAPermutation => "not_a_permutation",
            SessionError::WrongStage(_) => "wrong_stage",
            SessionError::SessionClosed => "session_closed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    WarmUp,
    Exploitation,
    Done,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickPolicy {
    /// Tick period; human input arriving within it applies to the next tick.
    pub human_input_window_ms: u64,
    /// Idle ticks inserted before each AI step.
    pub ai_idle_steps: u32,
}

impl Default for TickPolicy {
    fn default() -> Self {
        TickPolicy {
            human_input_window_ms: 150,
            ai_idle_steps: 7,
        }
    }
}

impl TickPolicy {
    /// The AI acts on ticks `idle, 2*idle+1, ...` of a game.
    pub fn ai_acts(&self, tick: u32) -> bool {
        (tick + 1) % (self.ai_idle_steps + 1) == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledGame {
    pub slot: usize,
    /// 1 when the human plays the first seat.
    pub position: u8,
}

/// Every slot in both positions `REPEATS` times, shuffled by `seed`.
pub fn exploitation_schedule(seed: u64) -> Vec<ScheduledGame> {
    let mut games = Vec::with_capacity(SCHEDULE_LEN);
    for slot in 0..ROSTER_SIZE {
        for position in [1, 2] {
            for _ in 0..REPEATS {
                games.push(ScheduledGame { slot, position });
            }
        }
    }
    games.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    games
}

struct LiveGame {
    game_index: Option<usize>,
    slot: usize,
    position: u8,
    state: GameState,
    ai: Box<dyn Actor>,
    pending_human: Option<Action>,
    trajectory: Trajectory,
}

impl LiveGame {
    fn human_seat(&self) -> usize {
        (self.position - 1) as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletedGame {
    pub game_index: Option<usize>,
    pub slot: usize,
    pub agent_id: String,
    pub position: u8,
    pub score: u32,
    pub trajectory: Trajectory,
}

/// Side effects a tick or message produced, for the owner to broadcast and
/// persist.
#[derive(Default, Debug)]
pub struct Effects {
    pub messages: Vec<ServerMsg>,
    pub completed: Vec<CompletedGame>,
    pub ranking: Option<(RankingRecord, String)>,
}

pub struct Session {
    pub session_id: String,
    pub participant_id: String,
    pub layout: Arc<Layout>,
    roster: Vec<PolicyHandle>,
    pub stage: Stage,
    pub schedule: Vec<ScheduledGame>,
    pub tick_policy: TickPolicy,
    seed: u64,
    games_started: u64,
    warmups_played: usize,
    next_game: usize,
    live: Option<LiveGame>,
}

impl Session {
    pub fn new(
        session_id: impl Into<String>,
        participant_id: impl Into<String>,
        layout: Arc<Layout>,
        roster: Vec<PolicyHandle>,
        seed: u64,
        tick_policy: TickPolicy,
    ) -> Result<Session, SessionError> {
        let mut ids = HashSet::new();
        if roster.len() != ROSTER_SIZE || !roster.iter().all(|p| ids.insert(p.id.clone())) {
            return Err(SessionError::UnknownAgent(format!(
                "{} ({} distinct)",
                roster.len(),
                ids.len()
            )));
        }
        Ok(Session {
            session_id: session_id.into(),
            participant_id: participant_id.into(),
            layout,
            roster,
            stage: Stage::WarmUp,
            schedule: exploitation_schedule(seed),
            tick_policy,
            seed,
            games_started: 0,
            warmups_played: 0,
            next_game: 0,
            live: None,
        })
    }

    pub fn slots(&self) -> Vec<String> {
        SLOT_LABELS.iter().map(|s| s.to_string()).collect()
    }

    pub fn joined(&self) -> ServerMsg {
        ServerMsg::Joined {
            session_id: self.session_id.clone(),
            slots: self.slots(),
            stage: self.stage,
            layout: self.layout.name.clone(),
        }
    }

    pub fn in_game(&self) -> bool {
        self.live.is_some()
    }

    /// Exploitation games finished so far.
    pub fn games_done(&self) -> usize {
        self.next_game
    }

    /// Buffers the human action for the next tick; later inputs replace
    /// earlier ones.
    pub fn submit_action(&mut self, action: Action) -> Result<(), SessionError> {
        if self.stage == Stage::Done {
            return Err(SessionError::SessionClosed);
        }
        if let Some(g) = self.live.as_mut() {
            g.pending_human = Some(action);
        }
        Ok(())
    }

    fn start_game(&mut self) -> Option<ServerMsg> {
        let (game_index, sched) = match self.stage {
            // Warm-up cycles through the slots, alternating positions.
            Stage::WarmUp => {
                let k = self.warmups_played;
                (
                    None,
                    ScheduledGame {
                        slot: k % ROSTER_SIZE,
                        position: 1 + ((k / ROSTER_SIZE) % 2) as u8,
                    },
                )
            }
            Stage::Exploitation => (Some(self.next_game), self.schedule[self.next_game]),
            Stage::Done => return None,
        };
        let game_seed = mix_seed(self.seed, self.games_started);
        self.games_started += 1;
        let agent = &self.roster[sched.slot];
        let ai_seat = 2 - sched.position as usize;
        let mut ai = agent.actor();
        ai.reset(seat_seed(game_seed, ai_seat));
        let mut players = [String::from("human"), String::from("human")];
        players[ai_seat] = agent.id.clone();
        self.live = Some(LiveGame {
            game_index,
            slot: sched.slot,
            position: sched.position,
            state: reset(&self.layout, game_seed),
            ai,
            pending_human: None,
            trajectory: Trajectory::new(&self.layout, game_seed, players),
        });
        Some(ServerMsg::GameStart {
            game_index,
            total_games: SCHEDULE_LEN,
            slot: SLOT_LABELS[sched.slot].to_string(),
            position: sched.position,
        })
    }

    /// Advances one tick: starts the next game if none is running,
    /// otherwise steps the engine with the buffered human action and, on
    /// its duty ticks, the AI action.
    pub fn tick(&mut self) -> Result<Effects, SessionError> {
        if self.stage == Stage::Done {
            return Err(SessionError::SessionClosed);
        }
        let mut fx = Effects::default();
        if self.live.is_none() {
            fx.messages.extend(self.start_game());
            return Ok(fx);
        }
        let policy = self.tick_policy;
        let g = self.live.as_mut().expect("live game");
        let human = g.pending_human.take().unwrap_or(Action::NoOp);
        let hs = g.human_seat();
        let ai_action = if policy.ai_acts(g.state.tick) {
            g.ai.act(&g.state, 1 - hs)
        } else {
            Action::NoOp
        };
        let mut acts = [Action::NoOp; 2];
        acts[hs] = human;
        acts[1 - hs] = ai_action;
        let info = apply(&mut g.state, acts).expect("live games are not finished");
        g.trajectory.push(acts, &info);
        fx.messages.push(ServerMsg::delta(&g.state));
        if info.done {
            let g = self.live.take().expect("live game");
            fx.messages.push(ServerMsg::GameEnd {
                game_index: g.game_index,
                slot: SLOT_LABELS[g.slot].to_string(),
                position: g.position,
                score: g.state.cumulative_reward,
            });
            fx.completed.push(CompletedGame {
                game_index: g.game_index,
                slot: g.slot,
                agent_id: self.roster[g.slot].id.clone(),
                position: g.position,
                score: g.state.cumulative_reward,
                trajectory: g.trajectory,
            });
            match self.stage {
                Stage::WarmUp => self.warmups_played += 1,
                Stage::Exploitation => {
                    self.next_game += 1;
                    if self.next_game == SCHEDULE_LEN {
                        self.stage = Stage::Done;
                        fx.messages.push(ServerMsg::StageChange {
                            stage: Stage::Done,
                            reveal: Some(self.reveal()),
                        });
                    }
                }
                Stage::Done => unreachable!("checked above"),
            }
        }
        Ok(fx)
    }

    pub fn reveal(&self) -> BTreeMap<String, String> {
        SLOT_LABELS
            .iter()
            .zip(&self.roster)
            .map(|(l, p)| (l.to_string(), p.id.clone()))
            .collect()
    }

    /// Records the ranking over slot labels and moves to exploitation. A
    /// warm-up game still running is abandoned without being logged.
    pub fn submit_ranking(
        &mut self,
        order: &[String],
        comment: &str,
    ) -> Result<Effects, SessionError> {
        if self.stage != Stage::WarmUp {
            return Err(SessionError::WrongStage(self.stage));
        }
        let mut seen = HashSet::new();
        let slots: Option<Vec<usize>> = order
            .iter()
            .map(|l| SLOT_LABELS.iter().position(|s| s == l))
            .collect();
        let slots = slots.ok_or(SessionError::NotAPermutation)?;
        if slots.len() != ROSTER_SIZE || !slots.iter().all(|s| seen.insert(*s)) {
            return Err(SessionError::NotAPermutation);
        }
        let record = RankingRecord {
            participant_id: self.participant_id.clone(),
            layout: self.layout.name.clone(),
            ranking: slots.iter().map(|&s| self.roster[s].id.clone()).collect(),
        };
        self.live = None;
        self.stage = Stage::Exploitation;
        Ok(Effects {
            messages: vec![ServerMsg::StageChange {
                stage: Stage::Exploitation,
                reveal: None,
            }],
            completed: Vec::new(),
            ranking: Some((record, comment.to_string())),
        })
    }
}
