use super::layout::{Layout, Tile, MAX_ORDERS};
use super::state::{GameState, Item, PotStatus};

/// Spatial feature planes per cell.
pub const NUM_CHANNELS: usize = 24;
/// Per-order features: onions/3, tomatoes/3, cook/20, reward/20.
pub const ORDER_FEATURES: usize = 4;

pub mod channel {
    pub const COUNTER: usize = 0;
    pub const ONION_DISPENSER: usize = 1;
    pub const TOMATO_DISPENSER: usize = 2;
    pub const DISH_DISPENSER: usize = 3;
    pub const POT: usize = 4;
    pub const SERVING: usize = 5;
    pub const EGO: usize = 6;
    /// Four facing planes follow each player plane.
    pub const EGO_FACING: usize = 7;
    pub const PARTNER: usize = 11;
    pub const PARTNER_FACING: usize = 12;
    pub const ONION: usize = 16;
    pub const TOMATO: usize = 17;
    pub const DISH: usize = 18;
    pub const SOUP: usize = 19;
    pub const SOUP_ONIONS: usize = 20;
    pub const SOUP_TOMATOES: usize = 21;
    pub const POT_TIMER: usize = 22;
    pub const POT_READY: usize = 23;
}

pub fn observation_len(layout: &Layout) -> usize {
    NUM_CHANNELS * layout.width * layout.height + MAX_ORDERS * ORDER_FEATURES + 1
}

/// Full-state encoding from `player`'s point of view.
pub fn observe(state: &GameState, player: usize) -> Vec<f32> {
    let mut out = vec![0.0; observation_len(state.layout())];
    observe_into(state, player, &mut out);
    out
}

/// Writes the encoding into `out`, which must have [`observation_len`] entries.
pub fn observe_into(state: &GameState, player: usize, out: &mut [f32]) {
    assert!(player < 2, "player index must be 0 or 1");
    let layout = state.layout();
    let cells = layout.width * layout.height;
    assert_eq!(out.len(), observation_len(layout));
    out.fill(0.0);
    let at = |c: usize, i: usize| c * cells + i;

    for (i, (_, tile)) in layout.cells().enumerate() {
        let c = match tile {
            Tile::Floor => continue,
            Tile::Counter => channel::COUNTER,
            Tile::OnionDispenser => channel::ONION_DISPENSER,
            Tile::TomatoDispenser => channel::TOMATO_DISPENSER,
            Tile::DishDispenser => channel::DISH_DISPENSER,
            Tile::Pot => channel::POT,
            Tile::Serving => channel::SERVING,
        };
        out[at(c, i)] = 1.0;
    }

    let put_item = |out: &mut [f32], i: usize, item: Item| {
        let c = match item {
            Item::Onion => channel::ONION,
            Item::Tomato => channel::TOMATO,
            Item::Dish => channel::DISH,
            Item::Soup(contents) => {
                out[at(channel::SOUP_ONIONS, i)] = contents.onions as f32 / 3.0;
                out[at(channel::SOUP_TOMATOES, i)] = contents.tomatoes as f32 / 3.0;
                channel::SOUP
            }
        };
        out[at(c, i)] = 1.0;
    };

    for (seat, (pos_c, facing_c)) in [
        (channel::EGO, channel::EGO_FACING),
        (channel::PARTNER, channel::PARTNER_FACING),
    ]
    .into_iter()
    .enumerate()
    {
        let p = &state.players[if seat == 0 { player } else { 1 - player }];
        let i = layout.index(p.pos);
        out[at(pos_c, i)] = 1.0;
        out[at(facing_c + p.facing.index(), i)] = 1.0;
        if let Some(item) = p.held {
            put_item(out, i, item);
        }
    }

    for (p, item) in state.counter_items() {
        put_item(out, layout.index(p), item);
    }

    let max_cook = layout.max_cook_ticks().max(1) as f32;
    for (&p, pot) in layout.pots().iter().zip(&state.pots) {
        let i = layout.index(p);
        out[at(channel::SOUP_ONIONS, i)] = pot.contents.onions as f32 / 3.0;
        out[at(channel::SOUP_TOMATOES, i)] = pot.contents.tomatoes as f32 / 3.0;
        match pot.status {
            PotStatus::Idle => {}
            PotStatus::Cooking { remaining } => {
                out[at(channel::POT_TIMER, i)] = remaining as f32 / max_cook;
            }
            PotStatus::Ready => out[at(channel::POT_READY, i)] = 1.0,
        }
    }

    let base = NUM_CHANNELS * cells;
    for (k, r) in layout.orders.iter().take(MAX_ORDERS).enumerate() {
        let o = base + k * ORDER_FEATURES;
        out[o] = r.ingredients.onions as f32 / 3.0;
        out[o + 1] = r.ingredients.tomatoes as f32 / 3.0;
        out[o + 2] = r.cook_ticks as f32 / 20.0;
        out[o + 3] = r.reward as f32 / 20.0;
    }
    out[base + MAX_ORDERS * ORDER_FEATURES] = state.tick as f32 / layout.episode_length as f32;
}
