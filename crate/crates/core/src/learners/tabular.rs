//! Tabular policies over hashed abstract-state keys.
//!
//! Logits and values are sums of per-key table entries, so states sharing a
//! coarse key (own position, facing, held item) share what was learned there
//! while finer keys (pots, partner, counters, history) refine it. Unvisited
//! keys read as zero, so a fresh model is the uniform policy.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::model::{sha256_of, History, Model};
use crate::agent::mix_seed;
use crate::engine::{GameState, Item, PotStatus, NUM_ACTIONS};

/// Keys are already well mixed, so the table hasher passes them through.
#[derive(Default, Clone, Copy)]
pub struct KeyHasher(u64);

impl Hasher for KeyHasher {
    fn finish(&self) -> u64 {
        self.0
    }
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0 << 8) ^ b as u64;
        }
    }
    fn write_u64(&mut self, n: u64) {
        self.0 = n;
    }
}

type Table<V> = HashMap<u64, V, BuildHasherDefault<KeyHasher>>;

fn ser_sorted<V: Serialize + Copy, S: Serializer>(t: &Table<V>, s: S) -> Result<S::Ok, S::Error> {
    let mut rows: Vec<(u64, V)> = t.iter().map(|(&k, &v)| (k, v)).collect();
    rows.sort_by_key(|r| r.0);
    rows.serialize(s)
}

fn de_table<'de, V: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<Table<V>, D::Error> {
    let rows: Vec<(u64, V)> = Vec::deserialize(d)?;
    Ok(rows.into_iter().collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularConfig {
    /// Adds a policy key conditioned on the partner history.
    pub history: bool,
    /// Critic step size relative to the policy step size.
    pub value_lr_scale: f64,
}

impl Default for TabularConfig {
    fn default() -> Self {
        TabularConfig {
            history: false,
            value_lr_scale: 0.5,
        }
    }
}

const POLICY_KEYS: usize = 5;
const VALUE_KEYS: usize = 3;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TabularModel {
    pub config: TabularConfig,
    #[serde(serialize_with = "ser_sorted", deserialize_with = "de_table")]
    policy: Table<[f64; NUM_ACTIONS]>,
    #[serde(serialize_with = "ser_sorted", deserialize_with = "de_table")]
    value: Table<f64>,
}

impl PartialEq for TabularModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.policy == other.policy && self.value == other.value
    }
}

#[derive(Clone, Debug)]
pub struct TabInput {
    policy: [u64; POLICY_KEYS],
    n_policy: u8,
    value: [u64; VALUE_KEYS],
}

/// Sparse gradient keyed like the parameter tables, with per-key sample
/// counts.
#[derive(Clone, Debug, Default)]
pub struct TabGrad {
    policy: Table<([f64; NUM_ACTIONS], u32)>,
    value: Table<(f64, u32)>,
}

fn key(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243F_6A88_85A3_08D3, |h, &p| mix_seed(h, p))
}

fn item_code(item: Option<Item>) -> u64 {
    match item {
        None => 0,
        Some(Item::Onion) => 1,
        Some(Item::Tomato) => 2,
        Some(Item::Dish) => 3,
        Some(Item::Soup(c)) => 4 + c.onions as u64 * 4 + c.tomatoes as u64,
    }
}

fn pots_code(state: &GameState) -> u64 {
    state.pots.iter().fold(0u64, |acc, p| {
        let status = match p.status {
            PotStatus::Idle => 0,
            PotStatus::Cooking { remaining } if remaining > 5 => 1,
            PotStatus::Cooking { .. } => 2,
            PotStatus::Ready => 3,
        };
        let c = p.contents.onions as u64 * 4 + p.contents.tomatoes as u64;
        acc * 64 + c * 4 + status
    })
}

fn counters_code(state: &GameState) -> u64 {
    let mut n = [0u64; 4];
    for (_, item) in state.counter_items() {
        let k = match item {
            Item::Onion => 0,
            Item::Tomato => 1,
            Item::Dish => 2,
            Item::Soup(_) => 3,
        };
        n[k] = (n[k] + 1).min(2);
    }
    n.iter().fold(0, |acc, &c| acc * 3 + c)
}

impl TabularModel {
    pub fn new(config: TabularConfig) -> Self {
        TabularModel {
            config,
            policy: Table::default(),
            value: Table::default(),
        }
    }

    /// Number of table entries across policy and value.
    pub fn len(&self) -> usize {
        self.policy.len() + self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn value_keys(x: &TabInput, partner: Option<usize>) -> impl Iterator<Item = u64> + '_ {
        let extra = partner.map(|p| p as u64 + 1);
        x.value.iter().copied().chain(
            extra
                .into_iter()
                .flat_map(move |p| x.value.iter().map(move |&k| mix_seed(k, p))),
        )
    }

    fn n_value(partner: Option<usize>) -> f64 {
        if partner.is_some() {
            2.0 * VALUE_KEYS as f64
        } else {
            VALUE_KEYS as f64
        }
    }
}

impl Model for TabularModel {
    type Input = TabInput;
    type Grad = TabGrad;

    fn encode(&self, state: &GameState, player: usize, history: &History) -> TabInput {
        let me = state.players[player];
        let other = state.players[1 - player];
        let layout = state.layout();
        let pos = layout.index(me.pos) as u64;
        let facing = me.facing.index() as u64;
        let held = item_code(me.held);
        let pots = pots_code(state);
        let ppos = layout.index(other.pos) as u64;
        let pheld = item_code(other.held);
        let counters = counters_code(state);
        let bucket = (state.tick as u64 * 8) / layout.episode_length.max(1) as u64;
        let mut policy = [
            key(&[0, pos, facing, held]),
            key(&[1, pos, facing, held, pots]),
            key(&[2, pos, facing, held, ppos, pheld]),
            key(&[3, pos, facing, held, pots, pheld, counters]),
            0,
        ];
        let mut n_policy = 4;
        if self.config.history {
            policy[4] = key(&[4, pos, facing, held, pots, history.code()]);
            n_policy = 5;
        }
        let hist = if self.config.history {
            history.code()
        } else {
            0
        };
        TabInput {
            policy,
            n_policy,
            value: [
                key(&[10, held, pheld, pots, bucket]),
                key(&[11, pos, held, pots]),
                key(&[12, pos, held, pots, ppos, pheld, counters, hist]),
            ],
        }
    }

    fn logits(&self, x: &TabInput) -> [f64; NUM_ACTIONS] {
        let mut out = [0.0; NUM_ACTIONS];
        for k in &x.policy[..x.n_policy as usize] {
            if let Some(row) = self.policy.get(k) {
                for (o, r) in out.iter_mut().zip(row) {
                    *o += r;
                }
            }
        }
        out
    }

    fn value(&self, x: &TabInput, partner: Option<usize>) -> f64 {
        Self::value_keys(x, partner)
            .map(|k| self.value.get(&k).copied().unwrap_or(0.0))
            .sum()
    }

    fn zero_grad(&self) -> TabGrad {
        TabGrad::default()
    }

    fn accumulate(
        &self,
        x: &TabInput,
        partner: Option<usize>,
        dlogits: &[f64; NUM_ACTIONS],
        dvalue: f64,
        grad: &mut TabGrad,
    ) {
        let np = x.n_policy as f64;
        for k in &x.policy[..x.n_policy as usize] {
            let (row, n) = grad.policy.entry(*k).or_insert(([0.0; NUM_ACTIONS], 0));
            for (r, d) in row.iter_mut().zip(dlogits) {
                *r += d / np;
            }
            *n += 1;
        }
        let nv = Self::n_value(partner);
        for k in Self::value_keys(x, partner) {
            let (g, n) = grad.value.entry(k).or_insert((0.0, 0));
            *g += dvalue / nv;
            *n += 1;
        }
    }

    /// Each table entry moves by `lr` times the mean gradient of the
    /// samples that touched it, so frequent and rare keys take comparable
    /// steps.
    fn apply(&mut self, grad: &TabGrad, lr: f64, _batch: usize) {
        let mut keys: Vec<&u64> = grad.policy.keys().collect();
        keys.sort_unstable();
        for k in keys {
            let (g, n) = &grad.policy[k];
            let row = self.policy.entry(*k).or_insert([0.0; NUM_ACTIONS]);
            for (r, d) in row.iter_mut().zip(g) {
                *r += lr * d / *n as f64;
            }
        }
        let vlr = (lr * self.config.value_lr_scale).min(1.0);
        let mut keys: Vec<&u64> = grad.value.keys().collect();
        keys.sort_unstable();
        for k in keys {
            let (g, n) = grad.value[k];
            *self.value.entry(*k).or_insert(0.0) += vlr * g / n as f64;
        }
    }

    fn param_hash(&self) -> String {
        sha256_of(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{builtin_layout, reset};
    use std::sync::Arc;

    #[test]
    fn fresh_model_is_uniform_and_zero_valued() {
        let layout = Arc::new(builtin_layout("coordination_ring").unwrap());
        let s = reset(&layout, 0);
        let m = TabularModel::new(TabularConfig::default());
        let x = m.encode(&s, 0, &History::default());
        assert_eq!(m.logits(&x), [0.0; NUM_ACTIONS]);
        assert_eq!(m.value(&x, Some(3)), 0.0);
    }

    #[test]
    fn update_moves_logit_and_value() {
        let layout = Arc::new(builtin_layout("coordination_ring").unwrap());
        let s = reset(&layout, 0);
        let mut m = TabularModel::new(TabularConfig::default());
        let x = m.encode(&s, 0, &History::default());
        let mut g = m.zero_grad();
        let mut d = [0.0; NUM_ACTIONS];
        d[2] = 1.0;
        m.accumulate(&x, None, &d, 4.0, &mut g);
        m.apply(&g, 0.5, 1);
        assert!((m.logits(&x)[2] - 0.5).abs() < 1e-12);
        assert!((m.value(&x, None) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn serialization_round_trips_with_stable_hash() {
        let layout = Arc::new(builtin_layout("coordination_ring").unwrap());
        let s = reset(&layout, 0);
        let mut m = TabularModel::new(TabularConfig::default());
        let x = m.encode(&s, 1, &History::default());
        let mut g = m.zero_grad();
        m.accumulate(&x, Some(1), &[1.0, 0.0, -1.0, 0.0, 0.0, 0.5], 2.0, &mut g);
        m.apply(&g, 0.1, 1);
        let bytes = bincode::serialize(&m).unwrap();
        let back: TabularModel = bincode::deserialize(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.param_hash(), m.param_hash());
    }
}
