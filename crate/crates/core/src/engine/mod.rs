//! Deterministic two-player kitchen gridworld.

mod dynamics;
mod fixtures;
mod layout;
mod observe;
mod state;
pub mod trajectory;

pub use dynamics::{apply, step, EngineError, Interaction, InteractionKind, StepInfo, StepOutcome};
pub use fixtures::{builtin_layout, resolve_layout, BUILTIN_LAYOUTS, STANDARD_LAYOUTS};
pub use layout::{
    parse_layout, parse_layout_named, Layout, LayoutError, Pos, Recipe, SoupContents, Tile,
    MAX_ORDERS,
};
pub use observe::{channel, observation_len, observe, observe_into, NUM_CHANNELS, ORDER_FEATURES};
pub use state::{
    reset, Action, Direction, GameState, Item, PlayerState, PotState, PotStatus, NUM_ACTIONS,
};
pub use trajectory::{record_episode, Trajectory, TrajectoryError};
