//! Event features, the linear hidden-reward space over them, random search
//! over weight grids and annealed reward shaping.

mod events;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use events::{Event, EventVector, UnknownEvent, BASE_EVENTS, MAX_EVENTS};

/// Config key used for the order-reward multiplier coordinate.
pub const ORDER_REWARD_KEY: &str = "order_reward";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RewardError {
    #[error("dimension mismatch: weights have {weights} entries, events have {events}")]
    DimensionMismatch { weights: usize, events: usize },
    #[error("empty candidate set for `{0}`")]
    EmptyCandidateSet(String),
    #[error(transparent)]
    UnknownEvent(#[from] UnknownEvent),
    #[error("event `{event}` is not part of this layout's catalogue")]
    EventNotInCatalogue { event: Event },
    #[error("invalid config: {0}")]
    Config(String),
}

/// Coefficients of one hidden reward `R_w = φᵀw + multiplier·R_task`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub order_reward_multiplier: f64,
    /// Bound on `|weights|`; the largest magnitude of the grid the vector was
    /// drawn from.
    c_max: f64,
    /// Seed the vector was sampled with, when it came from a grid.
    pub seed: Option<u64>,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>, order_reward_multiplier: f64) -> Self {
        let c_max = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        WeightVector {
            weights,
            order_reward_multiplier,
            c_max,
            seed: None,
        }
    }

    /// All-zero event weights with the given task-reward multiplier.
    pub fn task_aligned(len: usize, order_reward_multiplier: f64) -> Self {
        WeightVector::new(vec![0.0; len], order_reward_multiplier)
    }

    /// Builds a weight vector from `(event, weight)` pairs over `catalogue`.
    pub fn from_pairs(
        catalogue: &[Event],
        pairs: &[(Event, f64)],
        order_reward_multiplier: f64,
    ) -> Result<Self, RewardError> {
        let mut weights = vec![0.0; catalogue.len()];
        for &(event, w) in pairs {
            let i = catalogue
                .iter()
                .position(|&e| e == event)
                .ok_or(RewardError::EventNotInCatalogue { event })?;
            weights[i] = w;
        }
        Ok(WeightVector::new(weights, order_reward_multiplier))
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, event: Event) -> f64 {
        self.weights.get(event.index()).copied().unwrap_or(0.0)
    }
}

/// `φᵀw + multiplier · task_reward`.
pub fn hidden_reward(
    events: &EventVector,
    task_reward: f64,
    w: &WeightVector,
) -> Result<f64, RewardError> {
    if events.len() != w.weights.len() {
        return Err(RewardError::DimensionMismatch {
            weights: w.weights.len(),
            events: events.len(),
        });
    }
    let dot: f64 = events
        .counts()
        .iter()
        .zip(&w.weights)
        .map(|(&c, &wi)| c as f64 * wi)
        .sum();
    Ok(dot + w.order_reward_multiplier * task_reward)
}

/// Finite candidate sets `C_j` for random search over weight vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightGrid {
    events: Vec<Event>,
    candidates: Vec<Vec<f64>>,
    multiplier: Vec<f64>,
}

#[derive(Deserialize, Serialize)]
struct GridFile {
    candidates: BTreeMap<String, Vec<f64>>,
}

impl WeightGrid {
    /// Grid over `catalogue`; events absent from `sets` get the singleton `{0}`.
    pub fn new(
        catalogue: &[Event],
        sets: &[(Event, &[f64])],
        multiplier: &[f64],
    ) -> Result<Self, RewardError> {
        let mut candidates = vec![vec![0.0]; catalogue.len()];
        for &(event, values) in sets {
            let i = catalogue
                .iter()
                .position(|&e| e == event)
                .ok_or(RewardError::EventNotInCatalogue { event })?;
            candidates[i] = values.to_vec();
        }
        let grid = WeightGrid {
            events: catalogue.to_vec(),
            candidates,
            multiplier: multiplier.to_vec(),
        };
        grid.validate()?;
        Ok(grid)
    }

    fn validate(&self) -> Result<(), RewardError> {
        for (e, c) in self.events.iter().zip(&self.candidates) {
            if c.is_empty() {
                return Err(RewardError::EmptyCandidateSet(e.name().into()));
            }
        }
        if self.multiplier.is_empty() {
            return Err(RewardError::EmptyCandidateSet(ORDER_REWARD_KEY.into()));
        }
        Ok(())
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn candidates(&self, event: Event) -> Option<&[f64]> {
        self.events
            .iter()
            .position(|&e| e == event)
            .map(|i| self.candidates[i].as_slice())
    }

    pub fn multiplier_candidates(&self) -> &[f64] {
        &self.multiplier
    }

    /// Largest candidate magnitude over the event coordinates.
    pub fn c_max(&self) -> f64 {
        self.candidates
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Parses a TOML grid keyed by canonical event names plus `order_reward`.
    pub fn from_toml(catalogue: &[Event], text: &str) -> Result<Self, RewardError> {
        let file: GridFile =
            toml::from_str(text).map_err(|e| RewardError::Config(e.to_string()))?;
        let mut sets = Vec::new();
        let mut multiplier = vec![1.0];
        for (name, values) in &file.candidates {
            if name == ORDER_REWARD_KEY {
                multiplier = values.clone();
            } else {
                sets.push((name.parse::<Event>()?, values.as_slice()));
            }
        }
        WeightGrid::new(catalogue, &sets, &multiplier)
    }

    pub fn to_toml(&self) -> String {
        let mut candidates = BTreeMap::new();
        for (e, c) in self.events.iter().zip(&self.candidates) {
            if c.as_slice() != [0.0] {
                candidates.insert(e.name().to_string(), c.clone());
            }
        }
        candidates.insert(ORDER_REWARD_KEY.to_string(), self.multiplier.clone());
        toml::to_string(&GridFile { candidates }).expect("grid serializes")
    }

    /// Random-search grid for the onion-only layouts.
    pub fn onion_layouts(catalogue: &[Event]) -> Result<Self, RewardError> {
        WeightGrid::new(
            catalogue,
            &[
                (Event::PickupOnionFromDispenser, &[-10.0, 0.0, 10.0]),
                (Event::PickupDishFromDispenser, &[0.0, 10.0]),
                (Event::PickupSoupFromPot, &[-10.0, 0.0, 10.0]),
                (Event::PlaceOnionInPot, &[-10.0, 0.0, 10.0]),
                (Event::Delivery, &[-10.0, 0.0]),
            ],
            &[0.0, 1.0],
        )
    }

    /// Random-search grid for the two-ingredient layout with a distant tomato source.
    pub fn distant_tomato(catalogue: &[Event]) -> Result<Self, RewardError> {
        WeightGrid::new(
            catalogue,
            &[
                (Event::PickupOnionFromDispenser, &[-5.0, 0.0, 5.0]),
                (Event::PickupTomatoFromDispenser, &[0.0, 10.0, 20.0]),
                (Event::PickupDishFromDispenser, &[0.0, 10.0]),
                (Event::PickupSoupFromPot, &[-5.0, 0.0, 5.0]),
                (Event::ViablePlacement, &[-10.0, 0.0, 10.0]),
                (Event::OptimalPlacement, &[-10.0, 0.0, 10.0]),
                (Event::CatastrophicPlacement, &[0.0, 10.0]),
                (Event::PlaceOnionInPot, &[-10.0, 0.0, 10.0]),
                (Event::PlaceTomatoInPot, &[-10.0, 0.0, 10.0]),
                (Event::Delivery, &[-10.0, 0.0]),
            ],
            &[0.0, 1.0],
        )
    }

    /// Random-search grid for the three-recipe layout.
    pub fn many_orders(catalogue: &[Event]) -> Result<Self, RewardError> {
        WeightGrid::new(
            catalogue,
            &[
                (Event::PickupOnionFromDispenser, &[-5.0, 0.0, 5.0]),
                (Event::PickupTomatoFromDispenser, &[0.0, 10.0, 20.0]),
                (Event::PickupDishFromDispenser, &[0.0, 5.0]),
                (Event::PickupSoupFromPot, &[-5.0, 0.0, 5.0]),
                (Event::ViablePlacement, &[-10.0, 0.0, 10.0]),
                (Event::OptimalPlacement, &[-10.0, 0.0]),
                (Event::CatastrophicPlacement, &[0.0, 10.0]),
                (Event::PlaceOnionInPot, &[-3.0, 0.0, 3.0]),
                (Event::PlaceTomatoInPot, &[-3.0, 0.0, 3.0]),
                (Event::Delivery, &[-10.0, 0.0]),
            ],
            &[0.0, 1.0],
        )
    }

    /// Built-in grid matching a fixture layout name; onion-only grid otherwise.
    pub fn preset_for(layout_name: &str, catalogue: &[Event]) -> Result<Self, RewardError> {
        match layout_name {
            n if n.starts_with("distant_tomato") => WeightGrid::distant_tomato(catalogue),
            n if n.starts_with("many_orders") => WeightGrid::many_orders(catalogue),
            _ => WeightGrid::onion_layouts(catalogue),
        }
    }
}

/// Draws every coordinate independently and uniformly from its candidate set.
pub fn sample_weight_vector(grid: &WeightGrid, seed: u64) -> Result<WeightVector, RewardError> {
    grid.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = grid
        .candidates
        .iter()
        .map(|c| c[rng.gen_range(0..c.len())])
        .collect();
    let multiplier = grid.multiplier[rng.gen_range(0..grid.multiplier.len())];
    Ok(WeightVector {
        weights,
        order_reward_multiplier: multiplier,
        c_max: grid.c_max(),
        seed: Some(seed),
    })
}

/// Event bonuses whose weight anneals linearly from 1 to `end_factor`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapingSchedule {
    pub terms: Vec<(Event, f64)>,
    pub horizon: u64,
    pub end_factor: f64,
}

#[derive(Deserialize, Serialize)]
struct ShapingFile {
    horizon: u64,
    end_factor: f64,
    terms: BTreeMap<String, f64>,
}

impl ShapingSchedule {
    pub fn none() -> Self {
        ShapingSchedule {
            terms: Vec::new(),
            horizon: 1,
            end_factor: 0.0,
        }
    }

    /// Terms are kept in catalogue order.
    pub fn new(mut terms: Vec<(Event, f64)>, horizon: u64, end_factor: f64) -> Self {
        terms.sort_by_key(|(e, _)| *e);
        assert!(
            (0.0..=1.0).contains(&end_factor),
            "end factor must lie in [0, 1]"
        );
        ShapingSchedule {
            terms,
            horizon,
            end_factor,
        }
    }

    /// Shaping for pool training on the onion-only layouts.
    pub fn onion_layouts(horizon: u64) -> Self {
        ShapingSchedule::new(
            vec![
                (Event::OptimalPlacement, 3.0),
                (Event::PickupDishFromDispenser, 3.0),
                (Event::PickupSoupFromPot, 5.0),
            ],
            horizon,
            0.0,
        )
    }

    /// Shaping for pool training on the tomato layouts.
    pub fn tomato_layouts(horizon: u64) -> Self {
        ShapingSchedule::new(
            vec![
                (Event::PickupDishFromDispenser, 3.0),
                (Event::PickupSoupFromPot, 5.0),
            ],
            horizon,
            0.0,
        )
    }

    /// Shaping for adaptive training on the distant-tomato layout.
    pub fn distant_tomato_adaptive(horizon: u64) -> Self {
        ShapingSchedule::new(
            vec![
                (Event::PickupDishFromDispenser, 3.0),
                (Event::PickupSoupFromPot, 5.0),
                (Event::UsefulTomatoPickup, 10.0),
                (Event::OptimalTomatoPlacement, 5.0),
                (Event::PlaceTomatoInEmptyPot, -15.0),
            ],
            horizon,
            0.5,
        )
    }

    pub fn factor(&self, t: u64) -> f64 {
        shaping_factor(t, self)
    }

    /// Undiscounted shaping term `Σ value·count` before annealing.
    pub fn raw_bonus(&self, events: &EventVector) -> f64 {
        self.terms
            .iter()
            .map(|&(e, v)| v * events.get(e) as f64)
            .sum()
    }

    /// Annealed shaping bonus at training step `t`.
    pub fn bonus(&self, events: &EventVector, t: u64) -> f64 {
        if self.terms.is_empty() {
            return 0.0;
        }
        self.factor(t) * self.raw_bonus(events)
    }

    pub fn from_toml(text: &str) -> Result<Self, RewardError> {
        let file: ShapingFile =
            toml::from_str(text).map_err(|e| RewardError::Config(e.to_string()))?;
        if !(0.0..=1.0).contains(&file.end_factor) {
            return Err(RewardError::Config(format!(
                "end_factor {} outside [0, 1]",
                file.end_factor
            )));
        }
        let mut terms = Vec::new();
        for (name, value) in file.terms {
            terms.push((name.parse::<Event>()?, value));
        }
        terms.sort_by_key(|(e, _)| *e);
        Ok(ShapingSchedule::new(terms, file.horizon, file.end_factor))
    }

    pub fn to_toml(&self) -> String {
        let file = ShapingFile {
            horizon: self.horizon,
            end_factor: self.end_factor,
            terms: self
                .terms
                .iter()
                .map(|(e, v)| (e.name().to_string(), *v))
                .collect(),
        };
        toml::to_string(&file).expect("schedule serializes")
    }
}

/// Linear interpolation from 1 at `t = 0` to `end_factor` at `t = horizon`,
/// constant afterwards.
pub fn shaping_factor(t: u64, sched: &ShapingSchedule) -> f64 {
    if sched.horizon == 0 || t >= sched.horizon {
        return sched.end_factor;
    }
    let frac = t as f64 / sched.horizon as f64;
    1.0 + (sched.end_factor - 1.0) * frac
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three(counts: [u32; 3]) -> EventVector {
        EventVector::from_counts(&counts)
    }

    #[test]
    fn hidden_reward_dot_product() {
        let w = WeightVector::new(vec![3.0, -1.0, 0.5], 0.0);
        let r = hidden_reward(&three([1, 0, 2]), 20.0, &w).unwrap();
        // 1*3 + 0*(-1) + 2*0.5
        assert_eq!(r, 4.0);
    }

    #[test]
    fn zero_weights_give_zero() {
        let w = WeightVector::new(vec![0.0; 3], 0.0);
        assert_eq!(hidden_reward(&three([5, 7, 9]), 20.0, &w).unwrap(), 0.0);
    }

    #[test]
    fn task_reward_passthrough() {
        let w = WeightVector::new(vec![3.0, -1.0, 0.5], 1.0);
        assert_eq!(hidden_reward(&three([0, 0, 0]), 20.0, &w).unwrap(), 20.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let w = WeightVector::new(vec![1.0; 4], 0.0);
        assert_eq!(
            hidden_reward(&three([1, 1, 1]), 0.0, &w),
            Err(RewardError::DimensionMismatch {
                weights: 4,
                events: 3
            })
        );
    }

    #[test]
    fn onion_grid_delivery_weight_is_never_positive() {
        let grid = WeightGrid::onion_layouts(Event::catalogue(false)).unwrap();
        for seed in 0..500 {
            let w = sample_weight_vector(&grid, seed).unwrap();
            let d = w.weight(Event::Delivery);
            assert!(d == -10.0 || d == 0.0, "seed {seed}: {d}");
            assert!(w.weights.iter().all(|x| x.abs() <= w.c_max()));
        }
    }

    #[test]
    fn singleton_grid_samples_zero_vector() {
        let grid = WeightGrid::new(Event::catalogue(false), &[], &[0.0]).unwrap();
        let w = sample_weight_vector(&grid, 99).unwrap();
        assert!(w.weights.iter().all(|&x| x == 0.0));
        assert_eq!(w.order_reward_multiplier, 0.0);
    }

    #[test]
    fn empty_candidate_set_is_rejected() {
        let err = WeightGrid::new(Event::catalogue(false), &[(Event::Delivery, &[])], &[1.0]);
        assert_eq!(
            err,
            Err(RewardError::EmptyCandidateSet("delivery".to_string()))
        );
    }

    #[test]
    fn sampling_is_deterministic_in_seed() {
        let grid = WeightGrid::distant_tomato(Event::catalogue(true)).unwrap();
        assert_eq!(
            sample_weight_vector(&grid, 7).unwrap(),
            sample_weight_vector(&grid, 7).unwrap()
        );
    }

    #[test]
    fn grid_toml_round_trip() {
        let grid = WeightGrid::many_orders(Event::catalogue(true)).unwrap();
        let text = grid.to_toml();
        let back = WeightGrid::from_toml(Event::catalogue(true), &text).unwrap();
        assert_eq!(back, grid);
    }

    #[test]
    fn shaping_factor_endpoints() {
        let s = ShapingSchedule::new(vec![], 1000, 0.5);
        assert_eq!(shaping_factor(0, &s), 1.0);
        assert_eq!(shaping_factor(1000, &s), 0.5);
        assert_eq!(shaping_factor(5000, &s), 0.5);
        let s0 = ShapingSchedule::new(vec![], 1000, 0.0);
        assert_eq!(shaping_factor(500, &s0), 0.5);
    }

    #[test]
    fn shaping_toml_round_trip() {
        let s = ShapingSchedule::distant_tomato_adaptive(10_000);
        let back = ShapingSchedule::from_toml(&s.to_toml()).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #[test]
        fn hidden_reward_is_linear(
            a in proptest::collection::vec(0u32..5, 6),
            b in proptest::collection::vec(0u32..5, 6),
            w in proptest::collection::vec(-20i32..=20, 6),
            mult in 0u32..=1,
            r1 in 0u32..100,
            r2 in 0u32..100,
        ) {
            let w = WeightVector::new(w.iter().map(|&x| x as f64).collect(), mult as f64);
            let ea = EventVector::from_counts(&a);
            let eb = EventVector::from_counts(&b);
            let lhs = hidden_reward(&(ea + eb), (r1 + r2) as f64, &w).unwrap();
            let rhs = hidden_reward(&ea, r1 as f64, &w).unwrap()
                + hidden_reward(&eb, r2 as f64, &w).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }

        #[test]
        fn shaping_factor_monotone_and_bounded(
            horizon in 1u64..10_000,
            end in 0.0f64..=1.0,
            t1 in 0u64..20_000,
            dt in 0u64..20_000,
        ) {
            let s = ShapingSchedule::new(vec![], horizon, end);
            let f1 = shaping_factor(t1, &s);
            let f2 = shaping_factor(t1 + dt, &s);
            prop_assert!(f2 <= f1 + 1e-15);
            prop_assert!(f1 >= end - 1e-15 && f1 <= 1.0);
        }
    }
}
