use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::layout::{Layout, Pos, SoupContents, Tile};
use super::state::{Action, GameState, Item, PotStatus};
use crate::rewards::{Event, EventVector};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("step called on a finished episode (tick {tick})")]
    SteppedAfterDone { tick: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    Pickup,
    Place,
    Deliver,
}

/// One successful Interact: who moved which item to or from which tile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interaction {
    pub player: u8,
    pub cell: Pos,
    pub tile: Tile,
    pub kind: InteractionKind,
    pub item: Item,
}

/// Result of an in-place step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    pub task_reward: u32,
    /// Joint counts over both players.
    pub events: EventVector,
    pub player_events: [EventVector; 2],
    pub interactions: Vec<Interaction>,
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: GameState,
    pub task_reward: u32,
    pub events: EventVector,
    pub player_events: [EventVector; 2],
    pub interactions: Vec<Interaction>,
    pub done: bool,
}

/// Facts about the start-of-tick state that condition the "useful" events.
struct TickContext {
    dishes_on_counters: bool,
    nonempty_pots: usize,
    held: [Option<Item>; 2],
    tomato_only_open_pot: bool,
}

impl TickContext {
    fn capture(state: &GameState) -> TickContext {
        TickContext {
            dishes_on_counters: state.counters.iter().any(|c| *c == Some(Item::Dish)),
            nonempty_pots: state.pots.iter().filter(|p| !p.contents.is_empty()).count(),
            held: [state.players[0].held, state.players[1].held],
            tomato_only_open_pot: state.pots.iter().any(|p| {
                p.accepts_ingredient() && p.contents.onions == 0 && p.contents.tomatoes > 0
            }),
        }
    }

    fn useful_dish_pickup(&self, player: usize) -> bool {
        let partner_dishes = usize::from(self.held[1 - player] == Some(Item::Dish));
        !self.dishes_on_counters && partner_dishes < self.nonempty_pots
    }

    fn useful_tomato_pickup(&self, player: usize) -> bool {
        self.held[1 - player] != Some(Item::Tomato) && self.tomato_only_open_pot
    }
}

/// Pure transition: returns the successor state with the tick's reward and events.
pub fn step(state: &GameState, a1: Action, a2: Action) -> Result<StepOutcome, EngineError> {
    let mut next = state.clone();
    let info = apply(&mut next, [a1, a2])?;
    Ok(StepOutcome {
        next_state: next,
        task_reward: info.task_reward,
        events: info.events,
        player_events: info.player_events,
        interactions: info.interactions,
        done: info.done,
    })
}

/// In-place transition used by rollout loops.
///
/// Order within a tick: interactions (against the facing of the
/// start-of-tick state), then movement, then pot timers. Two Interacts on
/// the same non-dispenser tile cancel each other.
pub fn apply(state: &mut GameState, actions: [Action; 2]) -> Result<StepInfo, EngineError> {
    if state.is_done() {
        return Err(EngineError::SteppedAfterDone { tick: state.tick });
    }
    let layout = Arc::clone(state.layout_arc());
    let m = layout.num_events();
    let mut player_events = [EventVector::zeros(m); 2];
    let mut interactions = Vec::new();
    let mut reward = 0u32;

    let ctx = TickContext::capture(state);
    let was_cooking: Vec<bool> = state.pots.iter().map(|p| p.is_cooking()).collect();

    let targets: [Option<Pos>; 2] = [0, 1].map(|i| {
        if actions[i] == Action::Interact {
            state.players[i].facing_cell(&layout)
        } else {
            None
        }
    });
    let contested = match targets {
        [Some(a), Some(b)] => a == b && !layout.tile(a).is_dispenser(),
        _ => false,
    };
    if !contested {
        for (i, target) in targets.iter().enumerate() {
            if let Some(cell) = *target {
                reward += interact(
                    state,
                    &layout,
                    i,
                    cell,
                    &ctx,
                    &mut player_events[i],
                    &mut interactions,
                );
            }
        }
    }

    move_players(state, &layout, actions);

    for (pot, cooking) in state.pots.iter_mut().zip(was_cooking) {
        if !cooking {
            continue;
        }
        if let PotStatus::Cooking { remaining } = pot.status {
            pot.status = if remaining <= 1 {
                PotStatus::Ready
            } else {
                PotStatus::Cooking {
                    remaining: remaining - 1,
                }
            };
        }
    }

    state.tick += 1;
    state.cumulative_reward += reward;
    let done = state.tick == layout.episode_length;
    Ok(StepInfo {
        task_reward: reward,
        events: player_events[0] + player_events[1],
        player_events,
        interactions,
        done,
    })
}

fn interact(
    state: &mut GameState,
    layout: &Layout,
    player: usize,
    cell: Pos,
    ctx: &TickContext,
    events: &mut EventVector,
    log: &mut Vec<Interaction>,
) -> u32 {
    let tile = layout.tile(cell);
    let held = state.players[player].held;
    let mut record = |kind, item| {
        log.push(Interaction {
            player: player as u8,
            cell,
            tile,
            kind,
            item,
        })
    };
    match tile {
        Tile::Floor => {}
        Tile::Counter => match (held, state.counter_item(cell)) {
            (Some(item), None) => {
                state.set_counter_item(cell, Some(item));
                state.players[player].held = None;
                events.bump(match item {
                    Item::Onion => Event::PutOnionOnCounter,
                    Item::Tomato => Event::PutTomatoOnCounter,
                    Item::Dish => Event::PutDishOnCounter,
                    Item::Soup(_) => Event::PutSoupOnCounter,
                });
                record(InteractionKind::Place, item);
            }
            (None, Some(item)) => {
                state.set_counter_item(cell, None);
                state.players[player].held = Some(item);
                events.bump(match item {
                    Item::Onion => Event::PickupOnionFromCounter,
                    Item::Tomato => Event::PickupTomatoFromCounter,
                    Item::Dish => Event::PickupDishFromCounter,
                    Item::Soup(_) => Event::PickupSoupFromCounter,
                });
                if item == Item::Tomato && ctx.useful_tomato_pickup(player) {
                    events.bump(Event::UsefulTomatoPickup);
                }
                record(InteractionKind::Pickup, item);
            }
            _ => {}
        },
        Tile::OnionDispenser | Tile::TomatoDispenser | Tile::DishDispenser => {
            if held.is_none() {
                let item = match tile {
                    Tile::OnionDispenser => Item::Onion,
                    Tile::TomatoDispenser => Item::Tomato,
                    _ => Item::Dish,
                };
                state.players[player].held = Some(item);
                match item {
                    Item::Onion => events.bump(Event::PickupOnionFromDispenser),
                    Item::Tomato => {
                        events.bump(Event::PickupTomatoFromDispenser);
                        if ctx.useful_tomato_pickup(player) {
                            events.bump(Event::UsefulTomatoPickup);
                        }
                    }
                    _ => {
                        events.bump(Event::PickupDishFromDispenser);
                        if ctx.useful_dish_pickup(player) {
                            events.bump(Event::UsefulDishPickup);
                        }
                    }
                }
                record(InteractionKind::Pickup, item);
            }
        }
        Tile::Pot => {
            let pot = *state.pot(cell).expect("pot tile has a pot slot");
            match held {
                Some(ing @ (Item::Onion | Item::Tomato)) if pot.accepts_ingredient() => {
                    let before = pot.contents;
                    let after = match ing {
                        Item::Onion => SoupContents::new(before.onions + 1, before.tomatoes),
                        _ => SoupContents::new(before.onions, before.tomatoes + 1),
                    };
                    let status = if after.total() == 3 {
                        PotStatus::Cooking {
                            remaining: layout.cook_ticks_for(after),
                        }
                    } else {
                        PotStatus::Idle
                    };
                    *state.pot_mut(cell).expect("pot") = super::state::PotState {
                        contents: after,
                        status,
                    };
                    state.players[player].held = None;
                    placement_events(layout, ing, before, after, events);
                    record(InteractionKind::Place, ing);
                }
                Some(Item::Dish) if pot.is_ready() => {
                    let soup = Item::Soup(pot.contents);
                    *state.pot_mut(cell).expect("pot") = super::state::PotState::EMPTY;
                    state.players[player].held = Some(soup);
                    events.bump(Event::PickupSoupFromPot);
                    record(InteractionKind::Pickup, soup);
                }
                _ => {}
            }
        }
        Tile::Serving => {
            if let Some(soup @ Item::Soup(contents)) = held {
                state.players[player].held = None;
                events.bump(Event::Delivery);
                record(InteractionKind::Deliver, soup);
                return layout.delivery_reward(contents);
            }
        }
    }
    0
}

/// Events attached to putting one ingredient into a pot.
fn placement_events(
    layout: &Layout,
    ingredient: Item,
    before: SoupContents,
    after: SoupContents,
    events: &mut EventVector,
) {
    let best_before = layout.max_achievable_reward(before);
    let best_after = layout.max_achievable_reward(after);
    let tomato = ingredient == Item::Tomato;
    events.bump(if tomato {
        Event::PlaceTomatoInPot
    } else {
        Event::PlaceOnionInPot
    });
    if best_after > 0 {
        events.bump(Event::ViablePlacement);
    }
    let optimal = best_after >= best_before;
    if optimal {
        events.bump(Event::OptimalPlacement);
    }
    if best_before > 0 && best_after == 0 {
        events.bump(Event::CatastrophicPlacement);
    }
    if best_before == 0 {
        events.bump(Event::UselessPlacement);
    }
    if tomato {
        if before.is_empty() {
            events.bump(Event::PlaceTomatoInEmptyPot);
        }
        if optimal {
            events.bump(Event::OptimalTomatoPlacement);
        }
    }
}

/// Simultaneous moves; conflicting targets and swaps leave both in place.
/// Every directional action turns the player even when blocked.
fn move_players(state: &mut GameState, layout: &Layout, actions: [Action; 2]) {
    let mut proposed = [state.players[0].pos, state.players[1].pos];
    for i in 0..2 {
        if let Some(dir) = actions[i].direction() {
            state.players[i].facing = dir;
            let (x, y) = dir.step(state.players[i].pos);
            if layout.tile_at(x, y) == Some(Tile::Floor) {
                proposed[i] = Pos::new(x as u8, y as u8);
            }
        }
    }
    let old = [state.players[0].pos, state.players[1].pos];
    let collide = proposed[0] == proposed[1];
    let swap = proposed[0] == old[1] && proposed[1] == old[0];
    if collide || swap {
        return;
    }
    state.players[0].pos = proposed[0];
    state.players[1].pos = proposed[1];
}
