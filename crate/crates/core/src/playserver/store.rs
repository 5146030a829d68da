//! Append-only session persistence: one directory per session holding an
//! event log and one trajectory file per finished game, plus a shared
//! ranking table.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::Trajectory;
use crate::evalharness::RankingRecord;

use super::session::CompletedGame;

pub const RANKINGS_FILE: &str = "rankings.tsv";
const RANKINGS_HEADER: &str =
    "participant_id\tsession_id\tlayout\tfirst\tsecond\tthird\tfourth\tcomment\n";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogEntry {
    SessionCreated {
        participant_id: String,
        layout: String,
        roster: Vec<String>,
        seed: u64,
    },
    GameEnd {
        game_index: Option<usize>,
        slot: usize,
        agent_id: String,
        position: u8,
        score: u32,
        file: String,
        sha256: String,
    },
    Ranking {
        ranking: Vec<String>,
        comment: String,
    },
}

#[derive(Clone, Debug)]
pub struct SessionStore {
    root: PathBuf,
}

impl SessionStore {
    pub fn open(root: impl Into<PathBuf>) -> std::io::Result<SessionStore> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(SessionStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_dir(&self, session_id: &str) -> PathBuf {
        self.root.join(session_id)
    }

    fn append(path: &Path, text: &str) -> std::io::Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        f.write_all(text.as_bytes())
    }

    pub fn log(&self, session_id: &str, entry: &LogEntry) -> std::io::Result<()> {
        let dir = self.session_dir(session_id);
        fs::create_dir_all(&dir)?;
        let line = serde_json::to_string(entry).expect("log entries serialize") + "\n";
        Self::append(&dir.join("events.jsonl"), &line)
    }

    /// Writes the trajectory under a fresh name and logs it.
    pub fn save_game(&self, session_id: &str, game: &CompletedGame) -> std::io::Result<PathBuf> {
        let dir = self.session_dir(session_id);
        fs::create_dir_all(&dir)?;
        let stem = match game.game_index {
            Some(i) => format!("game-{i:02}"),
            None => {
                let n = fs::read_dir(&dir)?
                    .filter_map(|e| e.ok())
                    .filter(|e| e.file_name().to_string_lossy().starts_with("warmup-"))
                    .count();
                format!("warmup-{n:02}")
            }
        };
        let file = format!("{stem}.jsonl");
        let path = dir.join(&file);
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)?;
        f.write_all(game.trajectory.to_jsonl().as_bytes())?;
        self.log(
            session_id,
            &LogEntry::GameEnd {
                game_index: game.game_index,
                slot: game.slot,
                agent_id: game.agent_id.clone(),
                position: game.position,
                score: game.score,
                file,
                sha256: game.trajectory.sha256(),
            },
        )?;
        Ok(path)
    }

    pub fn save_ranking(
        &self,
        session_id: &str,
        rec: &RankingRecord,
        comment: &str,
    ) -> std::io::Result<()> {
        self.log(
            session_id,
            &LogEntry::Ranking {
                ranking: rec.ranking.clone(),
                comment: comment.to_string(),
            },
        )?;
        let path = self.root.join(RANKINGS_FILE);
        if !path.exists() {
            Self::append(&path, RANKINGS_HEADER)?;
        }
        let clean = |s: &str| s.replace(['\t', '\n', '\r'], " ");
        let mut row = vec![
            clean(&rec.participant_id),
            clean(session_id),
            clean(&rec.layout),
        ];
        row.extend(rec.ranking.iter().map(|s| clean(s)));
        row.push(clean(comment));
        Self::append(&path, &(row.join("\t") + "\n"))
    }

    pub fn load_rankings(&self) -> std::io::Result<Vec<RankingRecord>> {
        let path = self.root.join(RANKINGS_FILE);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let text = fs::read_to_string(path)?;
        Ok(text
            .lines()
            .skip(1)
            .filter_map(|l| {
                let cols: Vec<&str> = l.split('\t').collect();
                (cols.len() >= 7).then(|| RankingRecord {
                    participant_id: cols[0].to_string(),
                    layout: cols[2].to_string(),
                    ranking: cols[3..7].iter().map(|s| s.to_string()).collect(),
                })
            })
            .collect())
    }

    /// Game trajectories of a session in log order.
    pub fn load_games(
        &self,
        session_id: &str,
    ) -> Result<Vec<(LogEntry, Trajectory)>, anyhow::Error> {
        let dir = self.session_dir(session_id);
        let log = fs::read_to_string(dir.join("events.jsonl"))?;
        let mut out = Vec::new();
        for line in log.lines() {
            let entry: LogEntry = serde_json::from_str(line)?;
            if let LogEntry::GameEnd { file, .. } = &entry {
                let t = Trajectory::parse(&fs::read_to_string(dir.join(file))?)?;
                out.push((entry, t));
            }
        }
        Ok(out)
    }
}
