//! Cross-play evaluation, matchup tables, human-study ranking statistics and
//! behavior counters derived from trajectory logs.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{mix_seed, play_episode};
use crate::engine::{Interaction, InteractionKind, Item, Layout, Pos, Tile, Trajectory};
use crate::learners::PolicyHandle;
use crate::rewards::Event;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("at least one episode is required")]
    NoEpisodes,
    #[error("position must be 1 or 2, got {0}")]
    BadPosition(u8),
    #[error("ranking by `{participant}` does not rank `{agent}`")]
    MissingAgent { participant: String, agent: String },
    #[error("no ranking records")]
    NoRecords,
    #[error("trajectory from layout `{found}`, expected `{expected}`")]
    UnknownLayout { expected: String, found: String },
    #[error("ranking is not a permutation of distinct agents")]
    NotAPermutation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchupResult {
    pub policy_a_id: String,
    pub partner_id: String,
    /// 1 when policy A sits in seat 0, 2 for seat 1.
    pub position: u8,
    pub episodes: usize,
    pub mean_reward: f64,
    /// Population standard deviation over episodes.
    pub std_reward: f64,
    /// Mean own-event totals of policy A.
    pub mean_event_count: Vec<f64>,
}

/// Plays `episodes` seeded episodes of `a` with `partner`, `a` in seat
/// `position - 1`. Episode `e` uses seed `mix_seed(seed, e)` regardless of
/// the seat assignment.
pub fn crossplay(
    a: &PolicyHandle,
    partner: &PolicyHandle,
    layout: &Arc<Layout>,
    position: u8,
    episodes: usize,
    seed: u64,
) -> Result<MatchupResult, EvalError> {
    if episodes == 0 {
        return Err(EvalError::NoEpisodes);
    }
    if position != 1 && position != 2 {
        return Err(EvalError::BadPosition(position));
    }
    let seat = (position - 1) as usize;
    let m = layout.num_events();
    let results: Vec<(f64, Vec<u32>)> = (0..episodes)
        .into_par_iter()
        .map(|e| {
            let mut pa = a.actor();
            let mut pb = partner.actor();
            let actors: [&mut dyn crate::agent::Actor; 2] = if seat == 0 {
                [pa.as_mut(), pb.as_mut()]
            } else {
                [pb.as_mut(), pa.as_mut()]
            };
            let out = play_episode(layout, mix_seed(seed, e as u64), actors);
            (
                out.score as f64,
                out.player_events[seat].counts()[..m].to_vec(),
            )
        })
        .collect();
    let n = episodes as f64;
    let mean = results.iter().map(|r| r.0).sum::<f64>() / n;
    let var = results.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / n;
    let mut ec = vec![0.0; m];
    for (_, counts) in &results {
        for (s, &c) in ec.iter_mut().zip(counts) {
            *s += c as f64;
        }
    }
    ec.iter_mut().for_each(|v| *v /= n);
    Ok(MatchupResult {
        policy_a_id: a.id.clone(),
        partner_id: partner.id.clone(),
        position,
        episodes,
        mean_reward: mean,
        std_reward: var.sqrt(),
        mean_event_count: ec,
    })
}

/// Both seat assignments.
pub fn crossplay_both(
    a: &PolicyHandle,
    partner: &PolicyHandle,
    layout: &Arc<Layout>,
    episodes: usize,
    seed: u64,
) -> Result<[MatchupResult; 2], EvalError> {
    Ok([
        crossplay(a, partner, layout, 1, episodes, seed)?,
        crossplay(a, partner, layout, 2, episodes, seed)?,
    ])
}

/// How table cells are flagged as comparable to the best entry for the same
/// partner and position.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoldRule {
    None,
    /// Within this many reward points of the best mean.
    Absolute(f64),
    /// Best mean minus this many standard deviations of the cell.
    StdMultiple(f64),
}

/// Delimiter-separated matchup table, one row per result. Flagged rows
/// carry `*` in the last column.
pub fn render_table(results: &[MatchupResult], delimiter: char, bold: BoldRule) -> String {
    let mut best: HashMap<(&str, u8), f64> = HashMap::new();
    for r in results {
        let e = best
            .entry((r.partner_id.as_str(), r.position))
            .or_insert(f64::NEG_INFINITY);
        *e = e.max(r.mean_reward);
    }
    let d = delimiter;
    let mut s = format!("policy{d}partner{d}position{d}episodes{d}mean{d}std{d}flag\n");
    for r in results {
        let top = best[&(r.partner_id.as_str(), r.position)];
        let flagged = match bold {
            BoldRule::None => false,
            BoldRule::Absolute(t) => top - r.mean_reward <= t,
            BoldRule::StdMultiple(k) => top - r.mean_reward <= k * r.std_reward,
        };
        let _ = writeln!(
            s,
            "{}{d}{}{d}{}{d}{}{d}{:.3}{d}{:.3}{d}{}",
            r.policy_a_id,
            r.partner_id,
            r.position,
            r.episodes,
            r.mean_reward,
            r.std_reward,
            if flagged { "*" } else { "" }
        );
    }
    s
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingRecord {
    pub participant_id: String,
    pub layout: String,
    /// Agent ids, best first.
    pub ranking: Vec<String>,
}

impl RankingRecord {
    pub fn validate(&self) -> Result<(), EvalError> {
        let mut seen = std::collections::HashSet::new();
        if self.ranking.len() != 4 || !self.ranking.iter().all(|a| seen.insert(a)) {
            return Err(EvalError::NotAPermutation);
        }
        Ok(())
    }

    fn rank_of(&self, agent: &str) -> Result<usize, EvalError> {
        self.ranking
            .iter()
            .position(|a| a == agent)
            .ok_or_else(|| EvalError::MissingAgent {
                participant: self.participant_id.clone(),
                agent: agent.to_string(),
            })
    }
}

/// `(#records ranking a above b - #records ranking b above a) / N`.
pub fn preference_score(records: &[RankingRecord], a: &str, b: &str) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::NoRecords);
    }
    let mut net = 0i64;
    for r in records {
        let (ra, rb) = (r.rank_of(a)?, r.rank_of(b)?);
        net += (ra < rb) as i64 - (rb < ra) as i64;
    }
    Ok(net as f64 / records.len() as f64)
}

/// Per-episode averages of placement quality, middle-pot soup pickups and
/// onion hand-overs through counters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorStats {
    pub episodes: usize,
    pub wrong_placements: f64,
    pub correct_placements: f64,
    /// Only on layouts with exactly three pots.
    pub middle_pot_pickups: Option<f64>,
    pub counter_onion_passes: f64,
}

/// The middle one of exactly three pots, by column then row.
pub fn middle_pot(layout: &Layout) -> Option<Pos> {
    let mut pots = layout.pots().to_vec();
    if pots.len() != 3 {
        return None;
    }
    pots.sort_by_key(|p| (p.x, p.y));
    Some(pots[1])
}

/// Streaming counters over one episode's tick records.
#[derive(Clone, Debug, Default)]
pub struct BehaviorCounter {
    pub wrong_placements: u32,
    pub correct_placements: u32,
    pub middle_pot_pickups: u32,
    pub counter_onion_passes: u32,
    /// Who put the item currently on each counter cell.
    owner: HashMap<Pos, u8>,
}

impl BehaviorCounter {
    pub fn observe(
        &mut self,
        events: &[std::collections::BTreeMap<Event, u32>; 2],
        interactions: &[Interaction],
        middle: Option<Pos>,
    ) {
        for ev in events {
            self.wrong_placements += ev.get(&Event::CatastrophicPlacement).copied().unwrap_or(0);
            self.correct_placements += ev.get(&Event::OptimalPlacement).copied().unwrap_or(0);
        }
        // Pickups resolve against start-of-tick counters, so handle them
        // before this tick's placements.
        for i in interactions
            .iter()
            .filter(|i| i.kind == InteractionKind::Pickup)
        {
            match i.tile {
                Tile::Counter => {
                    if let Some(owner) = self.owner.remove(&i.cell) {
                        if owner != i.player && i.item == Item::Onion {
                            self.counter_onion_passes += 1;
                        }
                    }
                }
                Tile::Pot if Some(i.cell) == middle => self.middle_pot_pickups += 1,
                _ => {}
            }
        }
        for i in interactions
            .iter()
            .filter(|i| i.kind == InteractionKind::Place)
        {
            if i.tile == Tile::Counter {
                self.owner.insert(i.cell, i.player);
            }
        }
    }
}

pub fn behavior_stats(
    trajectories: &[Trajectory],
    layout: &Layout,
) -> Result<BehaviorStats, EvalError> {
    if trajectories.is_empty() {
        return Err(EvalError::NoEpisodes);
    }
    let middle = middle_pot(layout);
    let mut totals = BehaviorCounter::default();
    for t in trajectories {
        if t.header.layout_name != layout.name {
            return Err(EvalError::UnknownLayout {
                expected: layout.name.clone(),
                found: t.header.layout_name.clone(),
            });
        }
        let mut c = BehaviorCounter::default();
        for tick in &t.ticks {
            c.observe(&tick.events, &tick.interactions, middle);
        }
        totals.wrong_placements += c.wrong_placements;
        totals.correct_placements += c.correct_placements;
        totals.middle_pot_pickups += c.middle_pot_pickups;
        totals.counter_onion_passes += c.counter_onion_passes;
    }
    let n = trajectories.len() as f64;
    Ok(BehaviorStats {
        episodes: trajectories.len(),
        wrong_placements: totals.wrong_placements as f64 / n,
        correct_placements: totals.correct_placements as f64 / n,
        middle_pot_pickups: middle.map(|_| totals.middle_pot_pickups as f64 / n),
        counter_onion_passes: totals.counter_onion_passes as f64 / n,
    })
}
