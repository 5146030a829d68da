use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Upper bound on the number of event types any layout can emit.
pub const MAX_EVENTS: usize = 23;
/// Number of events shared by every layout.
pub const BASE_EVENTS: usize = 20;

/// Discrete game events counted per player per tick.
///
/// The first [`BASE_EVENTS`] variants exist on every layout. The last three
/// only exist on layouts that enable the tomato shaping events.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    PutOnionOnCounter,
    PutTomatoOnCounter,
    PutDishOnCounter,
    PutSoupOnCounter,
    PickupOnionFromCounter,
    PickupTomatoFromCounter,
    PickupDishFromCounter,
    PickupSoupFromCounter,
    PickupOnionFromDispenser,
    PickupTomatoFromDispenser,
    PickupDishFromDispenser,
    PickupSoupFromPot,
    PlaceOnionInPot,
    PlaceTomatoInPot,
    ViablePlacement,
    OptimalPlacement,
    CatastrophicPlacement,
    UselessPlacement,
    UsefulDishPickup,
    Delivery,
    PlaceTomatoInEmptyPot,
    OptimalTomatoPlacement,
    UsefulTomatoPickup,
}

impl Event {
    pub const ALL: [Event; MAX_EVENTS] = [
        Event::PutOnionOnCounter,
        Event::PutTomatoOnCounter,
        Event::PutDishOnCounter,
        Event::PutSoupOnCounter,
        Event::PickupOnionFromCounter,
        Event::PickupTomatoFromCounter,
        Event::PickupDishFromCounter,
        Event::PickupSoupFromCounter,
        Event::PickupOnionFromDispenser,
        Event::PickupTomatoFromDispenser,
        Event::PickupDishFromDispenser,
        Event::PickupSoupFromPot,
        Event::PlaceOnionInPot,
        Event::PlaceTomatoInPot,
        Event::ViablePlacement,
        Event::OptimalPlacement,
        Event::CatastrophicPlacement,
        Event::UselessPlacement,
        Event::UsefulDishPickup,
        Event::Delivery,
        Event::PlaceTomatoInEmptyPot,
        Event::OptimalTomatoPlacement,
        Event::UsefulTomatoPickup,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Event> {
        Event::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Event::PutOnionOnCounter => "put_onion_on_counter",
            Event::PutTomatoOnCounter => "put_tomato_on_counter",
            Event::PutDishOnCounter => "put_dish_on_counter",
            Event::PutSoupOnCounter => "put_soup_on_counter",
            Event::PickupOnionFromCounter => "pickup_onion_from_counter",
            Event::PickupTomatoFromCounter => "pickup_tomato_from_counter",
            Event::PickupDishFromCounter => "pickup_dish_from_counter",
            Event::PickupSoupFromCounter => "pickup_soup_from_counter",
            Event::PickupOnionFromDispenser => "pickup_onion_from_dispenser",
            Event::PickupTomatoFromDispenser => "pickup_tomato_from_dispenser",
            Event::PickupDishFromDispenser => "pickup_dish_from_dispenser",
            Event::PickupSoupFromPot => "pickup_soup_from_pot",
            Event::PlaceOnionInPot => "place_onion_in_pot",
            Event::PlaceTomatoInPot => "place_tomato_in_pot",
            Event::ViablePlacement => "viable_placement",
            Event::OptimalPlacement => "optimal_placement",
            Event::CatastrophicPlacement => "catastrophic_placement",
            Event::UselessPlacement => "useless_placement",
            Event::UsefulDishPickup => "useful_dish_pickup",
            Event::Delivery => "delivery",
            Event::PlaceTomatoInEmptyPot => "place_tomato_in_empty_pot",
            Event::OptimalTomatoPlacement => "optimal_tomato_placement",
            Event::UsefulTomatoPickup => "useful_tomato_pickup",
        }
    }

    /// Canonical ordered event list for a layout.
    pub fn catalogue(tomato_events: bool) -> &'static [Event] {
        if tomato_events {
            &Event::ALL
        } else {
            &Event::ALL[..BASE_EVENTS]
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown event name `{0}`")]
pub struct UnknownEvent(pub String);

impl FromStr for Event {
    type Err = UnknownEvent;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Event::ALL
            .iter()
            .copied()
            .find(|e| e.name() == s)
            .ok_or_else(|| UnknownEvent(s.to_string()))
    }
}

/// Per-tick (or per-episode) event counts, one slot per event of the
/// layout's catalogue.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventVector {
    counts: [u32; MAX_EVENTS],
    len: u8,
}

impl EventVector {
    pub fn zeros(len: usize) -> Self {
        assert!(len <= MAX_EVENTS, "event vector longer than the catalogue");
        EventVector {
            counts: [0; MAX_EVENTS],
            len: len as u8,
        }
    }

    pub fn from_counts(counts: &[u32]) -> Self {
        let mut v = EventVector::zeros(counts.len());
        v.counts[..counts.len()].copy_from_slice(counts);
        v
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts[..self.len()]
    }

    pub fn get(&self, event: Event) -> u32 {
        let i = event.index();
        if i < self.len() {
            self.counts[i]
        } else {
            0
        }
    }

    /// Increments `event`. Events outside this vector's catalogue are dropped.
    pub fn bump(&mut self, event: Event) {
        let i = event.index();
        if i < self.len() {
            self.counts[i] += 1;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.counts().iter().all(|&c| c == 0)
    }

    /// Nonzero entries as `(event, count)` in catalogue order.
    pub fn nonzero(&self) -> impl Iterator<Item = (Event, u32)> + '_ {
        self.counts()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(i, &c)| (Event::ALL[i], c))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.counts().iter().map(|&c| c as f64).collect()
    }
}

impl fmt::Debug for EventVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.nonzero()).finish()
    }
}

impl Add for EventVector {
    type Output = EventVector;

    fn add(mut self, rhs: EventVector) -> EventVector {
        self += rhs;
        self
    }
}

impl AddAssign for EventVector {
    fn add_assign(&mut self, rhs: EventVector) {
        assert_eq!(self.len, rhs.len, "event vectors of different layouts");
        for (a, b) in self.counts.iter_mut().zip(rhs.counts.iter()) {
            *a += *b;
        }
    }
}
