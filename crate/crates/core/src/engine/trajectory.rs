//! Newline-delimited JSON trajectory logs.
//!
//! Line 1 is a [`TrajectoryHeader`] carrying the full layout text and the
//! reset seed, so a log is self-contained. Every following line is one
//! [`TickRecord`]. Serialization is deterministic: maps are ordered and
//! floats never appear, so equal runs produce equal bytes.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dynamics::{apply, EngineError, Interaction, StepInfo};
use super::layout::{parse_layout_named, Layout, LayoutError};
use super::state::{reset, Action, GameState};
use crate::rewards::Event;

pub const FORMAT: &str = "hsp-trajectory";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum TrajectoryError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("unsupported log format {format} v{version}")]
    Unsupported { format: String, version: u32 },
    #[error("embedded layout: {0}")]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("tick {tick}: replay diverged from the log")]
    Diverged { tick: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub format: String,
    pub version: u32,
    pub layout_name: String,
    pub layout_text: String,
    pub seed: u64,
    /// Free-form labels of the two seats (policy ids, "human", ...).
    pub players: [String; 2],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u32,
    pub actions: [Action; 2],
    pub reward: u32,
    /// Per player, nonzero event counts.
    pub events: [BTreeMap<Event, u32>; 2],
    pub interactions: Vec<Interaction>,
}

impl TickRecord {
    pub fn from_step(tick: u32, actions: [Action; 2], info: &StepInfo) -> TickRecord {
        TickRecord {
            tick,
            actions,
            reward: info.task_reward,
            events: [0, 1].map(|p| info.player_events[p].nonzero().collect()),
            interactions: info.interactions.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    pub header: TrajectoryHeader,
    pub ticks: Vec<TickRecord>,
}

impl Trajectory {
    pub fn new(layout: &Layout, seed: u64, players: [String; 2]) -> Trajectory {
        Trajectory {
            header: TrajectoryHeader {
                format: FORMAT.to_string(),
                version: VERSION,
                layout_name: layout.name.clone(),
                layout_text: layout.source().to_string(),
                seed,
                players,
            },
            ticks: Vec::new(),
        }
    }

    pub fn push(&mut self, actions: [Action; 2], info: &StepInfo) {
        let tick = self.ticks.len() as u32;
        self.ticks.push(TickRecord::from_step(tick, actions, info));
    }

    pub fn score(&self) -> u32 {
        self.ticks.iter().map(|t| t.reward).sum()
    }

    pub fn actions(&self) -> Vec<[Action; 2]> {
        self.ticks.iter().map(|t| t.actions).collect()
    }

    pub fn layout(&self) -> Result<Layout, TrajectoryError> {
        Ok(parse_layout_named(
            &self.header.layout_text,
            &self.header.layout_name,
        )?)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for t in &self.ticks {
            out.push_str(&serde_json::to_string(t).expect("tick serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Trajectory, TrajectoryError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(TrajectoryError::Malformed {
            line: 1,
            reason: "empty log".into(),
        })?;
        let header: TrajectoryHeader =
            serde_json::from_str(first).map_err(|e| TrajectoryError::Malformed {
                line: 1,
                reason: e.to_string(),
            })?;
        if header.format != FORMAT || header.version != VERSION {
            return Err(TrajectoryError::Unsupported {
                format: header.format,
                version: header.version,
            });
        }
        let mut ticks = Vec::new();
        for (i, line) in lines {
            let rec: TickRecord =
                serde_json::from_str(line).map_err(|e| TrajectoryError::Malformed {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            ticks.push(rec);
        }
        Ok(Trajectory { header, ticks })
    }

    /// Re-simulates the logged actions and returns the regenerated log.
    pub fn resimulate(&self) -> Result<Trajectory, TrajectoryError> {
        let layout = Arc::new(self.layout()?);
        let (traj, _) = record_episode(
            &layout,
            self.header.seed,
            &self.actions(),
            self.header.players.clone(),
        )?;
        Ok(traj)
    }

    /// Re-simulates and checks every record against the log.
    pub fn verify(&self) -> Result<(), TrajectoryError> {
        let again = self.resimulate()?;
        for (a, b) in self.ticks.iter().zip(&again.ticks) {
            if a != b {
                return Err(TrajectoryError::Diverged { tick: a.tick });
            }
        }
        Ok(())
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }
}

/// Plays a fixed action sequence from reset and logs it.
pub fn record_episode(
    layout: &Arc<Layout>,
    seed: u64,
    actions: &[[Action; 2]],
    players: [String; 2],
) -> Result<(Trajectory, GameState), EngineError> {
    let mut state = reset(layout, seed);
    let mut traj = Trajectory::new(layout, seed, players);
    for &a in actions {
        let info = apply(&mut state, a)?;
        traj.push(a, &info);
    }
    Ok((traj, state))
}
