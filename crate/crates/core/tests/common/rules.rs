//! Engine rule cases, shared by the rule suite and the acceptance run.

use std::sync::Arc;

use hsp_core::engine::{
    channel, observe, parse_layout, reset, step, Action, Direction, EngineError, GameState, Item,
    Layout, LayoutError, PlayerState, Pos, PotState, PotStatus, SoupContents, NUM_CHANNELS,
    STANDARD_LAYOUTS,
};
use hsp_core::rewards::Event;

use super::layout;

const MINI: &str =
    "XPXOX\nT1 2D\nX   X\nXXSXX\n\ningredients=O3 cook=20 reward=20\nepisode_length=50\n";

fn at(x: u8, y: u8, facing: Direction, held: Option<Item>) -> PlayerState {
    PlayerState {
        pos: Pos::new(x, y),
        facing,
        held,
    }
}

/// distant_tomato_mini with player 0 and 1 placed as given.
fn mini_tomato(p0: PlayerState, p1: PlayerState) -> GameState {
    reset(&layout("distant_tomato_mini"), 0).with_players([p0, p1])
}

fn parked() -> PlayerState {
    at(5, 2, Direction::Left, None)
}

fn pot_at(s: &mut GameState, x: u8, y: u8) -> &mut PotState {
    s.pot_mut(Pos::new(x, y)).unwrap()
}

const O: Option<Item> = Some(Item::Onion);
const T: Option<Item> = Some(Item::Tomato);
const DISH: Option<Item> = Some(Item::Dish);

fn soup(onions: u8, tomatoes: u8) -> Option<Item> {
    Some(Item::Soup(SoupContents::new(onions, tomatoes)))
}

fn interact0(s: &GameState) -> hsp_core::engine::StepOutcome {
    step(s, Action::Interact, Action::NoOp).unwrap()
}

pub fn minimal_layout_parses() {
    let l = parse_layout(MINI).unwrap();
    assert_eq!((l.width, l.height), (5, 4));
    assert_eq!(l.orders.len(), 1);
}

pub fn missing_start_is_rejected() {
    let text = MINI.replace('1', " ");
    assert!(matches!(
        parse_layout(&text),
        Err(LayoutError::MissingStart { marker: '1' })
    ));
}

pub fn ragged_and_unknown_chars_name_location() {
    let ragged =
        "XPXOX\nT1 2DX\nX   X\nXXSXX\n\ningredients=O3 cook=20 reward=20\nepisode_length=50\n";
    assert!(matches!(
        parse_layout(ragged),
        Err(LayoutError::RaggedGrid { line: 2, .. })
    ));
    let unknown = MINI.replace("XXSXX", "XXSQX");
    assert!(matches!(
        parse_layout(&unknown),
        Err(LayoutError::UnknownChar {
            line: 4,
            column: 4,
            ch: 'Q'
        })
    ));
    let no_pot = MINI.replace('P', "X");
    assert!(matches!(parse_layout(&no_pot), Err(LayoutError::NoPot)));
}

pub fn standard_layouts_parse() {
    for name in STANDARD_LAYOUTS {
        let l = layout(name);
        assert!(!l.pots().is_empty(), "{name}");
    }
}

pub fn reset_is_deterministic_and_initial() {
    let l = layout("distant_tomato");
    let a = reset(&l, 9);
    let b = reset(&l, 9);
    assert_eq!(a, b);
    assert!(a.pots.iter().all(|p| *p == PotState::EMPTY));
    assert_eq!(a.orders(), &l.orders[..]);
    assert_eq!(a.tick, 0);
    assert!(a.players.iter().all(|p| p.held.is_none()));
}

pub fn onion_dispenser_pickup() {
    let s = mini_tomato(at(1, 1, Direction::Left, None), parked());
    let out = interact0(&s);
    assert_eq!(out.next_state.players[0].held, O);
    assert_eq!(out.events.get(Event::PickupOnionFromDispenser), 1);
    assert_eq!(out.task_reward, 0);
    assert_eq!(out.events.nonzero().count(), 1);
}

pub fn delivery_rewards_in_distant_tomato() {
    let l = layout("distant_tomato");
    // Serving cell at (3,4); stand above it.
    let base = reset(&l, 0);
    let s = base.clone().with_players([
        at(3, 3, Direction::Down, soup(3, 0)),
        at(7, 1, Direction::Up, None),
    ]);
    let out = interact0(&s);
    assert_eq!(out.task_reward, 20);
    assert_eq!(out.events.get(Event::Delivery), 1);
    assert_eq!(out.next_state.cumulative_reward, 20);

    let s = base.with_players([
        at(3, 3, Direction::Down, soup(2, 1)),
        at(7, 1, Direction::Up, None),
    ]);
    let out = interact0(&s);
    assert_eq!(out.task_reward, 0);
    assert_eq!(out.events.get(Event::Delivery), 1);
    assert_eq!(out.next_state.players[0].held, None);
}

fn ticks_until_ready(mut s: GameState) -> u32 {
    let mut n = 0;
    while !s.pots.iter().any(|p| p.is_ready()) {
        s = step(&s, Action::NoOp, Action::NoOp).unwrap().next_state;
        n += 1;
        assert!(n < 100);
    }
    n
}

pub fn third_ingredient_auto_cooks_with_recipe_time() {
    let mut s = mini_tomato(at(2, 1, Direction::Up, O), parked());
    pot_at(&mut s, 2, 0).contents = SoupContents::new(2, 0);
    let out = interact0(&s);
    let pot = *out.next_state.pot(Pos::new(2, 0)).unwrap();
    assert_eq!(pot.status, PotStatus::Cooking { remaining: 20 });
    assert_eq!(ticks_until_ready(out.next_state), 20);

    let mut s = mini_tomato(at(2, 1, Direction::Up, T), parked());
    pot_at(&mut s, 2, 0).contents = SoupContents::new(0, 2);
    let out = interact0(&s);
    assert_eq!(
        out.next_state.pot(Pos::new(2, 0)).unwrap().status,
        PotStatus::Cooking { remaining: 10 }
    );
    assert_eq!(ticks_until_ready(out.next_state), 10);
}

pub fn mixed_soup_cooks_for_slowest_recipe() {
    let mut s = mini_tomato(at(2, 1, Direction::Up, T), parked());
    pot_at(&mut s, 2, 0).contents = SoupContents::new(2, 0);
    let out = interact0(&s);
    assert_eq!(ticks_until_ready(out.next_state), 20);
}

pub fn soup_pickup_and_dish_events() {
    let mut s = mini_tomato(at(2, 1, Direction::Up, DISH), parked());
    *pot_at(&mut s, 2, 0) = PotState {
        contents: SoupContents::new(3, 0),
        status: PotStatus::Ready,
    };
    let out = interact0(&s);
    assert_eq!(out.next_state.players[0].held, soup(3, 0));
    assert_eq!(out.events.get(Event::PickupSoupFromPot), 1);
    assert_eq!(
        out.next_state.pot(Pos::new(2, 0)).unwrap(),
        &PotState::EMPTY
    );
}

pub fn useful_dish_pickup_depends_on_pots_and_partner() {
    let d = at(1, 2, Direction::Down, None);
    // All pots empty: plain pickup.
    let out = interact0(&mini_tomato(d, parked()));
    assert_eq!(out.events.get(Event::PickupDishFromDispenser), 1);
    assert_eq!(out.events.get(Event::UsefulDishPickup), 0);

    let mut s = mini_tomato(d, parked());
    pot_at(&mut s, 4, 0).contents = SoupContents::new(1, 0);
    assert_eq!(interact0(&s).events.get(Event::UsefulDishPickup), 1);

    // Partner already carries the one needed dish.
    let mut s = mini_tomato(d, at(5, 2, Direction::Left, DISH));
    pot_at(&mut s, 4, 0).contents = SoupContents::new(1, 0);
    assert_eq!(interact0(&s).events.get(Event::UsefulDishPickup), 0);

    // A dish is already waiting on a counter.
    let mut s = mini_tomato(d, parked());
    pot_at(&mut s, 4, 0).contents = SoupContents::new(1, 0);
    s.set_counter_item(Pos::new(0, 0), DISH);
    assert_eq!(interact0(&s).events.get(Event::UsefulDishPickup), 0);
}

pub fn counter_put_and_pickup_events() {
    let cases = [
        (O, Event::PutOnionOnCounter, Event::PickupOnionFromCounter),
        (T, Event::PutTomatoOnCounter, Event::PickupTomatoFromCounter),
        (DISH, Event::PutDishOnCounter, Event::PickupDishFromCounter),
        (
            soup(3, 0),
            Event::PutSoupOnCounter,
            Event::PickupSoupFromCounter,
        ),
    ];
    for (item, put, pick) in cases {
        let s = mini_tomato(at(1, 1, Direction::Up, item), parked());
        let out = interact0(&s);
        assert_eq!(out.events.get(put), 1, "{put}");
        assert_eq!(out.next_state.counter_item(Pos::new(1, 0)), item);
        let back = interact0(&out.next_state);
        assert_eq!(back.events.get(pick), 1, "{pick}");
        assert_eq!(back.next_state.players[0].held, item);
    }
}

pub fn placement_quality_events() {
    // Onion into an empty pot: viable and optimal.
    let s = mini_tomato(at(2, 1, Direction::Up, O), parked());
    let ev = interact0(&s).events;
    for e in [
        Event::PlaceOnionInPot,
        Event::ViablePlacement,
        Event::OptimalPlacement,
    ] {
        assert_eq!(ev.get(e), 1, "{e}");
    }
    assert_eq!(ev.get(Event::CatastrophicPlacement), 0);

    // Onion into a tomato pot: catastrophic, not viable.
    let mut s = mini_tomato(at(2, 1, Direction::Up, O), parked());
    pot_at(&mut s, 2, 0).contents = SoupContents::new(0, 1);
    let ev = interact0(&s).events;
    assert_eq!(ev.get(Event::CatastrophicPlacement), 1);
    assert_eq!(ev.get(Event::ViablePlacement), 0);
    assert_eq!(ev.get(Event::OptimalPlacement), 0);

    // Anything into an already ruined pot: useless.
    let mut s = mini_tomato(at(2, 1, Direction::Up, O), parked());
    pot_at(&mut s, 2, 0).contents = SoupContents::new(1, 1);
    let ev = interact0(&s).events;
    assert_eq!(ev.get(Event::UselessPlacement), 1);
    assert_eq!(ev.get(Event::CatastrophicPlacement), 0);
    assert_eq!(ev.get(Event::OptimalPlacement), 1);
}

pub fn tomato_extra_events() {
    let s = mini_tomato(at(2, 1, Direction::Up, T), parked());
    let ev = interact0(&s).events;
    assert_eq!(ev.get(Event::PlaceTomatoInPot), 1);
    assert_eq!(ev.get(Event::PlaceTomatoInEmptyPot), 1);
    assert_eq!(ev.get(Event::OptimalTomatoPlacement), 1);

    let mut s = mini_tomato(at(2, 1, Direction::Up, T), parked());
    pot_at(&mut s, 2, 0).contents = SoupContents::new(1, 0);
    let ev = interact0(&s).events;
    assert_eq!(ev.get(Event::PlaceTomatoInEmptyPot), 0);
    assert_eq!(ev.get(Event::OptimalTomatoPlacement), 0);
    assert_eq!(ev.get(Event::CatastrophicPlacement), 1);

    // Tomato pickup while a tomato-only pot waits.
    let mut s = mini_tomato(
        at(1, 1, Direction::Left, None),
        at(5, 2, Direction::Right, None),
    );
    pot_at(&mut s, 4, 0).contents = SoupContents::new(0, 1);
    let out = step(&s, Action::NoOp, Action::Interact).unwrap();
    assert_eq!(
        out.player_events[1].get(Event::PickupTomatoFromDispenser),
        1
    );
    assert_eq!(out.player_events[1].get(Event::UsefulTomatoPickup), 1);

    // Not useful when the partner already carries a tomato.
    let mut s = mini_tomato(
        at(1, 1, Direction::Left, T),
        at(5, 2, Direction::Right, None),
    );
    pot_at(&mut s, 4, 0).contents = SoupContents::new(0, 1);
    let out = step(&s, Action::NoOp, Action::Interact).unwrap();
    assert_eq!(out.player_events[1].get(Event::UsefulTomatoPickup), 0);
}

pub fn tomato_extras_absent_on_base_layouts() {
    let l = layout("many_orders");
    assert_eq!(l.num_events(), 20);
    // Tomato dispenser at (10,1); stand left of it.
    let s = reset(&l, 0).with_players([
        at(9, 1, Direction::Right, None),
        at(5, 3, Direction::Up, None),
    ]);
    let out = interact0(&s);
    assert_eq!(out.events.len(), 20);
    assert_eq!(out.events.get(Event::PickupTomatoFromDispenser), 1);
}

pub fn invalid_interact_is_silent() {
    // Empty hand on empty counter, onion on a full serving tile, dish at idle pot.
    for (pos, facing, held) in [
        ((1, 1), Direction::Up, None),
        ((3, 2), Direction::Down, O),
        ((2, 1), Direction::Up, DISH),
    ] {
        let s = mini_tomato(at(pos.0, pos.1, facing, held), parked());
        let out = interact0(&s);
        assert!(out.events.is_zero());
        assert!(out.interactions.is_empty());
        assert_eq!(out.next_state.players[0].held, held);
    }
}

pub fn simultaneous_move_into_same_cell_blocks_both() {
    let s = mini_tomato(at(2, 1, Direction::Up, None), at(4, 1, Direction::Up, None));
    let out = step(&s, Action::Right, Action::Left).unwrap();
    assert_eq!(out.next_state.players[0].pos, Pos::new(2, 1));
    assert_eq!(out.next_state.players[1].pos, Pos::new(4, 1));
    assert_eq!(out.next_state.players[0].facing, Direction::Right);
    assert_eq!(out.next_state.players[1].facing, Direction::Left);
}

pub fn swap_attempt_blocks_both() {
    let s = mini_tomato(at(2, 1, Direction::Up, None), at(3, 1, Direction::Up, None));
    let out = step(&s, Action::Right, Action::Left).unwrap();
    assert_eq!(out.next_state.players[0].pos, Pos::new(2, 1));
    assert_eq!(out.next_state.players[1].pos, Pos::new(3, 1));
}

pub fn following_into_vacated_cell_is_allowed() {
    let s = mini_tomato(at(2, 1, Direction::Up, None), at(3, 1, Direction::Up, None));
    let out = step(&s, Action::Right, Action::Right).unwrap();
    assert_eq!(out.next_state.players[0].pos, Pos::new(3, 1));
    assert_eq!(out.next_state.players[1].pos, Pos::new(4, 1));
}

pub fn episode_end_and_step_after_done() {
    let l: Arc<Layout> = Arc::new(parse_layout(MINI).unwrap());
    let mut s = reset(&l, 0);
    for t in 0..50 {
        let out = step(&s, Action::NoOp, Action::NoOp).unwrap();
        assert_eq!(out.done, t == 49);
        s = out.next_state;
    }
    assert_eq!(
        step(&s, Action::NoOp, Action::NoOp),
        Err(EngineError::SteppedAfterDone { tick: 50 })
    );
}

pub fn pot_timer_change_only_touches_timer_channel() {
    let mut s = mini_tomato(at(1, 1, Direction::Up, None), parked());
    *pot_at(&mut s, 2, 0) = PotState {
        contents: SoupContents::new(3, 0),
        status: PotStatus::Cooking { remaining: 12 },
    };
    let a = observe(&s, 0);
    let mut s2 = s.clone();
    pot_at(&mut s2, 2, 0).status = PotStatus::Cooking { remaining: 11 };
    let b = observe(&s2, 0);
    let cells = s.layout().width * s.layout().height;
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        if x != y {
            assert!(i < NUM_CHANNELS * cells);
            assert_eq!(i / cells, channel::POT_TIMER);
        }
    }
    assert_ne!(a, b);
}

pub fn observations_swap_on_symmetric_layout() {
    let l = Arc::new(
        parse_layout(
            "XXPXX\nO1 2O\nX   X\nXDSDX\n\ningredients=O3 cook=20 reward=20\nepisode_length=10\n",
        )
        .unwrap(),
    );
    let s = reset(&l, 0);
    let a = observe(&s, 0);
    let b = observe(&s, 1);
    let cells = 20;
    let mut diff_channels = std::collections::BTreeSet::new();
    for i in 0..a.len() {
        if a[i] != b[i] {
            diff_channels.insert(i / cells);
        }
    }
    assert!(diff_channels.iter().all(|c| (6..16).contains(c)));
}

pub fn random_rollouts_match_event_oracle() {
    for (k, name) in STANDARD_LAYOUTS.iter().enumerate() {
        let l = layout(name);
        for seed in 0..10u64 {
            let acts = super::random_actions(seed * 31 + k as u64, l.episode_length as usize);
            assert!(
                super::check_event_oracle(&l, seed, &acts),
                "{name} seed {seed}"
            );
        }
    }
}

pub const CASES: &[(&str, fn())] = &[
    ("minimal_layout_parses", minimal_layout_parses),
    ("missing_start_is_rejected", missing_start_is_rejected),
    ("ragged_and_unknown_chars_name_location", ragged_and_unknown_chars_name_location),
    ("standard_layouts_parse", standard_layouts_parse),
    ("reset_is_deterministic_and_initial", reset_is_deterministic_and_initial),
    ("onion_dispenser_pickup", onion_dispenser_pickup),
    ("delivery_rewards_in_distant_tomato", delivery_rewards_in_distant_tomato),
    ("third_ingredient_auto_cooks_with_recipe_time", third_ingredient_auto_cooks_with_recipe_time),
    ("mixed_soup_cooks_for_slowest_recipe", mixed_soup_cooks_for_slowest_recipe),
    ("soup_pickup_and_dish_events", soup_pickup_and_dish_events),
    ("useful_dish_pickup_depends_on_pots_and_partner", useful_dish_pickup_depends_on_pots_and_partner),
    ("counter_put_and_pickup_events", counter_put_and_pickup_events),
    ("placement_quality_events", placement_quality_events),
    ("tomato_extra_events", tomato_extra_events),
    ("tomato_extras_absent_on_base_layouts", tomato_extras_absent_on_base_layouts),
    ("invalid_interact_is_silent", invalid_interact_is_silent),
    ("simultaneous_move_into_same_cell_blocks_both", simultaneous_move_into_same_cell_blocks_both),
    ("swap_attempt_blocks_both", swap_attempt_blocks_both),
    ("following_into_vacated_cell_is_allowed", following_into_vacated_cell_is_allowed),
    ("episode_end_and_step_after_done", episode_end_and_step_after_done),
    ("pot_timer_change_only_touches_timer_channel", pot_timer_change_only_touches_timer_channel),
    ("observations_swap_on_symmetric_layout", observations_swap_on_symmetric_layout),
    ("random_rollouts_match_event_oracle", random_rollouts_match_event_oracle),
];
