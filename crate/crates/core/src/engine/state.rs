use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::layout::{Layout, Pos, Recipe, SoupContents, Tile};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    /// Fixed tie-break order used by every planner.
    pub const ALL: [Direction; 4] = [
        Direction::Up,
        Direction::Down,
        Direction::Left,
        Direction::Right,
    ];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::Up => (0, -1),
            Direction::Down => (0, 1),
            Direction::Left => (-1, 0),
            Direction::Right => (1, 0),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn step(self, p: Pos) -> (i32, i32) {
        let (dx, dy) = self.delta();
        (p.x as i32 + dx, p.y as i32 + dy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    NoOp,
    Interact,
}

pub const NUM_ACTIONS: usize = 6;

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::NoOp,
        Action::Interact,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    pub fn direction(self) -> Option<Direction> {
        match self {
            Action::Up => Some(Direction::Up),
            Action::Down => Some(Direction::Down),
            Action::Left => Some(Direction::Left),
            Action::Right => Some(Direction::Right),
            _ => None,
        }
    }

    pub fn from_direction(d: Direction) -> Action {
        match d {
            Direction::Up => Action::Up,
            Direction::Down => Action::Down,
            Direction::Left => Action::Left,
            Direction::Right => Action::Right,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
            Action::NoOp => "noop",
            Action::Interact => "interact",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown action `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Item {
    Onion,
    Tomato,
    Dish,
    Soup(SoupContents),
}

impl Item {
    pub fn name(self) -> &'static str {
        match self {
            Item::Onion => "onion",
            Item::Tomato => "tomato",
            Item::Dish => "dish",
            Item::Soup(_) => "soup",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlayerState {
    pub pos: Pos,
    pub facing: Direction,
    pub held: Option<Item>,
}

impl PlayerState {
    /// Cell the player faces, if it lies inside the grid.
    pub fn facing_cell(&self, layout: &Layout) -> Option<Pos> {
        let (x, y) = self.facing.step(self.pos);
        layout.tile_at(x, y).map(|_| Pos::new(x as u8, y as u8))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotStatus {
    Idle,
    Cooking { remaining: u32 },
    Ready,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PotState {
    pub contents: SoupContents,
    pub status: PotStatus,
}

impl PotState {
    pub const EMPTY: PotState = PotState {
        contents: SoupContents::new(0, 0),
        status: PotStatus::Idle,
    };

    /// Idle and not yet full.
    pub fn accepts_ingredient(&self) -> bool {
        self.status == PotStatus::Idle && self.contents.total() < 3
    }

    pub fn is_ready(&self) -> bool {
        self.status == PotStatus::Ready
    }

    pub fn is_cooking(&self) -> bool {
        matches!(self.status, PotStatus::Cooking { .. })
    }
}

/// Complete world snapshot. Cloning is cheap; the layout is shared.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GameState {
    layout: Arc<Layout>,
    pub players: [PlayerState; 2],
    /// One slot per counter of the layout, in row-major order.
    pub counters: Vec<Option<Item>>,
    /// One slot per pot of the layout, in row-major order.
    pub pots: Vec<PotState>,
    pub tick: u32,
    pub cumulative_reward: u32,
    pub seed: u64,
}

impl GameState {
    /// Initial state: players on their start cells facing up, empty hands,
    /// empty idle pots, bare counters.
    pub fn new(layout: Arc<Layout>, seed: u64) -> GameState {
        let players = [0, 1].map(|i| PlayerState {
            pos: layout.starts[i],
            facing: Direction::Up,
            held: None,
        });
        GameState {
            counters: vec![None; layout.counters().len()],
            pots: vec![PotState::EMPTY; layout.pots().len()],
            players,
            tick: 0,
            cumulative_reward: 0,
            seed,
            layout,
        }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn layout_arc(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn orders(&self) -> &[Recipe] {
        &self.layout.orders
    }

    pub fn is_done(&self) -> bool {
        self.tick >= self.layout.episode_length
    }

    pub fn counter_item(&self, p: Pos) -> Option<Item> {
        self.layout.counter_slot(p).and_then(|i| self.counters[i])
    }

    pub fn set_counter_item(&mut self, p: Pos, item: Option<Item>) {
        let i = self
            .layout
            .counter_slot(p)
            .expect("set_counter_item on a non-counter cell");
        self.counters[i] = item;
    }

    pub fn pot(&self, p: Pos) -> Option<&PotState> {
        self.layout.pot_slot(p).map(|i| &self.pots[i])
    }

    pub fn pot_mut(&mut self, p: Pos) -> Option<&mut PotState> {
        self.layout.pot_slot(p).map(move |i| &mut self.pots[i])
    }

    pub fn player_at(&self, p: Pos) -> Option<usize> {
        self.players.iter().position(|pl| pl.pos == p)
    }

    pub fn is_walkable(&self, p: Pos) -> bool {
        self.layout.tile(p) == Tile::Floor
    }

    /// Items currently lying on counters.
    pub fn counter_items(&self) -> impl Iterator<Item = (Pos, Item)> + '_ {
        self.layout
            .counters()
            .iter()
            .zip(&self.counters)
            .filter_map(|(&p, it)| it.map(|i| (p, i)))
    }

    /// Places both players and resets the clock; used by hand-built fixtures.
    pub fn with_players(mut self, players: [PlayerState; 2]) -> GameState {
        self.players = players;
        self
    }
}

/// Reset a layout to its initial state.
pub fn reset(layout: &Arc<Layout>, seed: u64) -> GameState {
    GameState::new(Arc::clone(layout), seed)
}
