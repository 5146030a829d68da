//! Rule-based partners with fixed behavioral preferences. They read the
//! ground-truth state, walk shortest paths (partner treated as a wall, ties
//! broken Up < Down < Left < Right) and fall back to a seeded random walk
//! whenever their preferred interaction is unavailable.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::Actor;
use crate::engine::{Action, Direction, GameState, Item, Layout, Pos, Tile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptKind {
    OnionEverywhere,
    TomatoEverywhere,
    DishEverywhere,
    OnionPlacement,
    TomatoPlacement,
    Delivery,
    OnionPlacementAndDelivery,
    TomatoPlacementAndDelivery,
    OnionToMiddleCounter,
}

impl ScriptKind {
    pub const ALL: [ScriptKind; 9] = [
        ScriptKind::OnionEverywhere,
        ScriptKind::TomatoEverywhere,
        ScriptKind::DishEverywhere,
        ScriptKind::OnionPlacement,
        ScriptKind::TomatoPlacement,
        ScriptKind::Delivery,
        ScriptKind::OnionPlacementAndDelivery,
        ScriptKind::TomatoPlacementAndDelivery,
        ScriptKind::OnionToMiddleCounter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScriptKind::OnionEverywhere => "onion_everywhere",
            ScriptKind::TomatoEverywhere => "tomato_everywhere",
            ScriptKind::DishEverywhere => "dish_everywhere",
            ScriptKind::OnionPlacement => "onion_placement",
            ScriptKind::TomatoPlacement => "tomato_placement",
            ScriptKind::Delivery => "delivery",
            ScriptKind::OnionPlacementAndDelivery => "onion_placement_and_delivery",
            ScriptKind::TomatoPlacementAndDelivery => "tomato_placement_and_delivery",
            ScriptKind::OnionToMiddleCounter => "onion_to_middle_counter",
        }
    }

    /// Whether the script ever handles tomatoes.
    pub fn uses_tomatoes(self) -> bool {
        matches!(
            self,
            ScriptKind::TomatoEverywhere
                | ScriptKind::TomatoPlacement
                | ScriptKind::TomatoPlacementAndDelivery
        )
    }

    /// Scripts that make sense on a layout: tomato scripts need a tomato
    /// dispenser, the middle-counter script needs middle counters.
    pub fn applicable(self, layout: &Layout) -> bool {
        if self.uses_tomatoes() {
            return layout.positions_of(Tile::TomatoDispenser).next().is_some();
        }
        if self == ScriptKind::OnionToMiddleCounter {
            return !layout.middle_counters().is_empty();
        }
        true
    }
}

impl fmt::Display for ScriptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScriptKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScriptKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown script `{s}`"))
    }
}

/// Consecutive ticks with an unchanged (position, facing, held) tuple
/// after which one random move is forced.
const STUCK_TICKS: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mission {
    Place(Item),
    Deliver,
    ToCounter { item: Item, middle_only: bool },
}

#[derive(Clone, Debug)]
pub struct ScriptedPolicy {
    pub kind: ScriptKind,
    rng: ChaCha8Rng,
    wander_target: Option<Pos>,
    counter_target: Option<Pos>,
    last_tuple: Option<(Pos, Direction, Option<Item>)>,
    stuck: u32,
}

impl ScriptedPolicy {
    pub fn new(kind: ScriptKind, seed: u64) -> Self {
        ScriptedPolicy {
            kind,
            rng: ChaCha8Rng::seed_from_u64(seed),
            wander_target: None,
            counter_target: None,
            last_tuple: None,
            stuck: 0,
        }
    }

    fn mission(&self, state: &GameState, player: usize) -> Mission {
        let held = state.players[player].held;
        let place_or_deliver = |ing: Item| {
            let second_half = state.tick >= state.layout().episode_length / 2;
            let pot_open = state.pots.iter().any(|p| p.accepts_ingredient());
            match held {
                // An ingredient nobody can use any more goes onto a counter.
                Some(i @ (Item::Onion | Item::Tomato)) if second_half && !pot_open => {
                    Mission::ToCounter {
                        item: i,
                        middle_only: false,
                    }
                }
                Some(Item::Onion) => Mission::Place(Item::Onion),
                Some(Item::Tomato) => Mission::Place(Item::Tomato),
                Some(Item::Dish) | Some(Item::Soup(_)) => Mission::Deliver,
                None if second_half => Mission::Deliver,
                None => Mission::Place(ing),
            }
        };
        match self.kind {
            ScriptKind::OnionEverywhere => Mission::ToCounter {
                item: Item::Onion,
                middle_only: false,
            },
            ScriptKind::TomatoEverywhere => Mission::ToCounter {
                item: Item::Tomato,
                middle_only: false,
            },
            ScriptKind::DishEverywhere => Mission::ToCounter {
                item: Item::Dish,
                middle_only: false,
            },
            ScriptKind::OnionToMiddleCounter => Mission::ToCounter {
                item: Item::Onion,
                middle_only: true,
            },
            ScriptKind::OnionPlacement => Mission::Place(Item::Onion),
            ScriptKind::TomatoPlacement => Mission::Place(Item::Tomato),
            ScriptKind::Delivery => Mission::Deliver,
            ScriptKind::OnionPlacementAndDelivery => place_or_deliver(Item::Onion),
            ScriptKind::TomatoPlacementAndDelivery => place_or_deliver(Item::Tomato),
        }
    }

    fn goal_action(&mut self, state: &GameState, player: usize) -> Option<Action> {
        let layout = state.layout();
        let held = state.players[player].held;
        match self.mission(state, player) {
            Mission::Place(ing) => match held {
                Some(h) if h == ing => {
                    let pots: Vec<Pos> = layout
                        .pots()
                        .iter()
                        .copied()
                        .filter(|&p| state.pot(p).is_some_and(|s| s.accepts_ingredient()))
                        .collect();
                    plan_interact(state, player, &pots)
                }
                None => plan_interact(state, player, &dispensers_of(layout, ing)),
                Some(_) => None,
            },
            Mission::Deliver => match held {
                Some(Item::Soup(_)) => {
                    let serving: Vec<Pos> = layout.positions_of(Tile::Serving).collect();
                    plan_interact(state, player, &serving)
                }
                Some(Item::Dish) => plan_interact(state, player, &ready_pots(state)),
                None if !ready_pots(state).is_empty() => {
                    plan_interact(state, player, &dispensers_of(layout, Item::Dish))
                }
                _ => None,
            },
            Mission::ToCounter { item, middle_only } => match held {
                Some(h) if h == item => {
                    let valid = |t: Pos| state.counter_item(t).is_none();
                    if let Some(t) = self.counter_target.filter(|&t| valid(t)) {
                        if let Some(a) = plan_interact(state, player, &[t]) {
                            return Some(a);
                        }
                    }
                    let candidates = if middle_only {
                        layout.middle_counters()
                    } else {
                        layout.counters().to_vec()
                    };
                    let mut open: Vec<Pos> = candidates.into_iter().filter(|&t| valid(t)).collect();
                    open.shuffle(&mut self.rng);
                    for t in open {
                        if let Some(a) = plan_interact(state, player, &[t]) {
                            self.counter_target = Some(t);
                            return Some(a);
                        }
                    }
                    self.counter_target = None;
                    None
                }
                None => plan_interact(state, player, &dispensers_of(layout, item)),
                Some(_) => None,
            },
        }
    }

    /// Random walk toward a random free floor cell; never Interacts.
    fn wander(&mut self, state: &GameState, player: usize) -> Action {
        let me = state.players[player].pos;
        for _ in 0..4 {
            let target = match self.wander_target {
                Some(t) if t != me => t,
                _ => {
                    let cells = state.layout().floor_cells();
                    let t = cells[self.rng.gen_range(0..cells.len())];
                    self.wander_target = Some(t);
                    if t == me {
                        continue;
                    }
                    t
                }
            };
            if let Some(a) = plan_move_to(state, player, target) {
                return a;
            }
            self.wander_target = None;
        }
        self.random_move()
    }

    fn random_move(&mut self) -> Action {
        Action::from_direction(Direction::ALL[self.rng.gen_range(0..4)])
    }
}

impl Actor for ScriptedPolicy {
    fn reset(&mut self, seed: u64) {
        *self = ScriptedPolicy::new(self.kind, seed);
    }

    fn act(&mut self, state: &GameState, player: usize) -> Action {
        let me = state.players[player];
        let tuple = (me.pos, me.facing, me.held);
        if self.last_tuple == Some(tuple) {
            self.stuck += 1;
        } else {
            self.stuck = 0;
        }
        self.last_tuple = Some(tuple);
        if self.stuck >= STUCK_TICKS {
            self.stuck = 0;
            self.wander_target = None;
            return self.random_move();
        }
        match self.goal_action(state, player) {
            Some(a) => {
                self.wander_target = None;
                a
            }
            None => self.wander(state, player),
        }
    }
}

/// One scripted decision. The policy carries its kind, seeded random
/// stream and persistent targets.
pub fn script_act(policy: &mut ScriptedPolicy, state: &GameState, player: usize) -> Action {
    policy.act(state, player)
}

fn dispensers_of(layout: &Layout, item: Item) -> Vec<Pos> {
    let tile = match item {
        Item::Onion => Tile::OnionDispenser,
        Item::Tomato => Tile::TomatoDispenser,
        _ => Tile::DishDispenser,
    };
    layout.positions_of(tile).collect()
}

fn ready_pots(state: &GameState) -> Vec<Pos> {
    state
        .layout()
        .pots()
        .iter()
        .copied()
        .filter(|&p| state.pot(p).is_some_and(|s| s.is_ready()))
        .collect()
}

fn neighbor(p: Pos, d: Direction) -> (i32, i32) {
    d.step(p)
}

/// Breadth-first search over free floor cells from the player's position.
/// Returns the first action of a shortest path to the first cell (in BFS
/// order) accepted by `goal`, or `None` when no such cell is reachable.
fn bfs_first_step(
    state: &GameState,
    player: usize,
    goal: impl Fn(Pos) -> bool,
) -> Option<(Pos, Option<Direction>)> {
    let layout = state.layout();
    let start = state.players[player].pos;
    let blocked = state.players[1 - player].pos;
    let mut first: Vec<Option<Option<Direction>>> = vec![None; layout.width * layout.height];
    let mut queue = VecDeque::new();
    first[layout.index(start)] = Some(None);
    queue.push_back(start);
    while let Some(c) = queue.pop_front() {
        let via = first[layout.index(c)].expect("visited");
        if goal(c) {
            return Some((c, via));
        }
        for d in Direction::ALL {
            let (x, y) = neighbor(c, d);
            if layout.tile_at(x, y) != Some(Tile::Floor) {
                continue;
            }
            let n = Pos::new(x as u8, y as u8);
            if n == blocked || first[layout.index(n)].is_some() {
                continue;
            }
            first[layout.index(n)] = Some(Some(via.unwrap_or(d)));
            queue.push_back(n);
        }
    }
    None
}

/// Action that makes progress toward interacting with any of `targets`:
/// Interact when facing one, a turn when adjacent, else a path step.
fn plan_interact(state: &GameState, player: usize, targets: &[Pos]) -> Option<Action> {
    if targets.is_empty() {
        return None;
    }
    let adjacent_target = |c: Pos| {
        Direction::ALL.into_iter().find(|&d| {
            let (x, y) = neighbor(c, d);
            x >= 0 && y >= 0 && targets.contains(&Pos::new(x as u8, y as u8))
        })
    };
    let (cell, via) = bfs_first_step(state, player, |c| adjacent_target(c).is_some())?;
    match via {
        Some(d) => Some(Action::from_direction(d)),
        None => {
            let me = state.players[player];
            let (fx, fy) = neighbor(cell, me.facing);
            if fx >= 0 && fy >= 0 && targets.contains(&Pos::new(fx as u8, fy as u8)) {
                Some(Action::Interact)
            } else {
                adjacent_target(cell).map(Action::from_direction)
            }
        }
    }
}

fn plan_move_to(state: &GameState, player: usize, target: Pos) -> Option<Action> {
    match bfs_first_step(state, player, |c| c == target)? {
        (_, Some(d)) => Some(Action::from_direction(d)),
        (_, None) => None,
    }
}
