#![allow(dead_code)]

pub mod rules;

use std::collections::BTreeMap;
use std::sync::Arc;

use hsp_core::engine::{
    apply, builtin_layout, Action, GameState, Item, Layout, PotStatus, SoupContents, Tile,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn layout(name: &str) -> Arc<Layout> {
    Arc::new(builtin_layout(name).expect("builtin layout"))
}

/// Reward of the best order that still contains `c`, by direct enumeration.
fn best_reward(layout: &Layout, c: SoupContents) -> u32 {
    let mut best = 0;
    for r in &layout.orders {
        if c.onions <= r.ingredients.onions && c.tomatoes <= r.ingredients.tomatoes {
            best = best.max(r.reward);
        }
    }
    best
}

/// Recomputes per-player event counts from a state pair and the joint action.
///
/// Works only from observable differences between `prev` and `next`; it
/// shares no code with the engine's interaction resolver.
pub fn oracle_events(
    prev: &GameState,
    next: &GameState,
    actions: [Action; 2],
) -> [BTreeMap<&'static str, u32>; 2] {
    let layout = prev.layout();
    let mut out: [BTreeMap<&'static str, u32>; 2] = Default::default();
    let dishes_on_counters = prev.counters.iter().any(|c| *c == Some(Item::Dish));
    let nonempty_pots = prev.pots.iter().filter(|p| p.contents.total() > 0).count();
    let tomato_only_open_pot = prev.pots.iter().any(|p| {
        p.status == PotStatus::Idle
            && p.contents.total() < 3
            && p.contents.onions == 0
            && p.contents.tomatoes > 0
    });
    for i in 0..2 {
        let ev = &mut out[i];
        let mut bump = |name: &'static str| *ev.entry(name).or_insert(0) += 1;
        let before = prev.players[i].held;
        let after = next.players[i].held;
        if before == after {
            continue;
        }
        assert_eq!(
            actions[i],
            Action::Interact,
            "held item changed without Interact"
        );
        let (dx, dy) = prev.players[i].facing.delta();
        let fx = prev.players[i].pos.x as i32 + dx;
        let fy = prev.players[i].pos.y as i32 + dy;
        let tile = layout.tile_at(fx, fy).expect("facing inside grid");
        let partner_held = prev.players[1 - i].held;
        let name = |it: Item| match it {
            Item::Onion => "onion",
            Item::Tomato => "tomato",
            Item::Dish => "dish",
            Item::Soup(_) => "soup",
        };
        match (before, after, tile) {
            (None, Some(it), Tile::Counter) => {
                bump(match name(it) {
                    "onion" => "pickup_onion_from_counter",
                    "tomato" => "pickup_tomato_from_counter",
                    "dish" => "pickup_dish_from_counter",
                    _ => "pickup_soup_from_counter",
                });
                if it == Item::Tomato && partner_held != Some(Item::Tomato) && tomato_only_open_pot
                {
                    bump("useful_tomato_pickup");
                }
            }
            (Some(it), None, Tile::Counter) => bump(match name(it) {
                "onion" => "put_onion_on_counter",
                "tomato" => "put_tomato_on_counter",
                "dish" => "put_dish_on_counter",
                _ => "put_soup_on_counter",
            }),
            (None, Some(Item::Onion), Tile::OnionDispenser) => bump("pickup_onion_from_dispenser"),
            (None, Some(Item::Tomato), Tile::TomatoDispenser) => {
                bump("pickup_tomato_from_dispenser");
                if partner_held != Some(Item::Tomato) && tomato_only_open_pot {
                    bump("useful_tomato_pickup");
                }
            }
            (None, Some(Item::Dish), Tile::DishDispenser) => {
                bump("pickup_dish_from_dispenser");
                let partner_dish = usize::from(partner_held == Some(Item::Dish));
                if !dishes_on_counters && partner_dish < nonempty_pots {
                    bump("useful_dish_pickup");
                }
            }
            (Some(Item::Dish), Some(Item::Soup(_)), Tile::Pot) => bump("pickup_soup_from_pot"),
            (Some(ing @ (Item::Onion | Item::Tomato)), None, Tile::Pot) => {
                let slot = layout
                    .pots()
                    .iter()
                    .position(|p| p.x as i32 == fx && p.y as i32 == fy)
                    .unwrap();
                let c0 = prev.pots[slot].contents;
                let c1 = next.pots[slot].contents;
                assert_eq!(c1.total(), c0.total() + 1);
                let b0 = best_reward(layout, c0);
                let b1 = best_reward(layout, c1);
                bump(if ing == Item::Onion {
                    "place_onion_in_pot"
                } else {
                    "place_tomato_in_pot"
                });
                if b1 > 0 {
                    bump("viable_placement");
                }
                if b1 >= b0 {
                    bump("optimal_placement");
                }
                if b0 > 0 && b1 == 0 {
                    bump("catastrophic_placement");
                }
                if b0 == 0 {
                    bump("useless_placement");
                }
                if ing == Item::Tomato && layout.tomato_events {
                    if c0.total() == 0 {
                        bump("place_tomato_in_empty_pot");
                    }
                    if b1 >= b0 {
                        bump("optimal_tomato_placement");
                    }
                }
            }
            (Some(Item::Soup(_)), None, Tile::Serving) => bump("delivery"),
            other => panic!("unexplained hand change {other:?}"),
        }
        if !layout.tomato_events {
            for extra in [
                "useful_tomato_pickup",
                "place_tomato_in_empty_pot",
                "optimal_tomato_placement",
            ] {
                ev.remove(extra);
            }
        }
    }
    out
}

/// Random joint action with Interact over-weighted so that rollouts touch
/// many interactions.
pub fn random_action(rng: &mut ChaCha8Rng) -> Action {
    if rng.gen_bool(0.3) {
        Action::Interact
    } else {
        Action::ALL[rng.gen_range(0..Action::ALL.len())]
    }
}

pub fn random_actions(seed: u64, len: usize) -> Vec<[Action; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| [random_action(&mut rng), random_action(&mut rng)])
        .collect()
}

/// Plays `actions` and checks the oracle against each emitted step.
pub fn check_event_oracle(layout: &Arc<Layout>, seed: u64, actions: &[[Action; 2]]) -> bool {
    let mut s = hsp_core::engine::reset(layout, seed);
    for &a in actions {
        if s.is_done() {
            break;
        }
        let prev = s.clone();
        let info = apply(&mut s, a).unwrap();
        let oracle = oracle_events(&prev, &s, a);
        for p in 0..2 {
            let emitted: BTreeMap<&'static str, u32> = info.player_events[p]
                .nonzero()
                .map(|(e, c)| (e.name(), c))
                .collect();
            if emitted != oracle[p] {
                eprintln!(
                    "tick {}: player {p}: engine {emitted:?} oracle {:?}",
                    prev.tick, oracle[p]
                );
                return false;
            }
        }
    }
    true
}

/// Random dense MDP whose rows are drawn from a flat Dirichlet.
pub fn random_mdp(
    rng: &mut ChaCha8Rng,
    ns: usize,
    na: usize,
    gamma: f64,
) -> hsp_core::mdp::FiniteMdp {
    let mut p = Vec::with_capacity(ns * na * ns);
    for _ in 0..ns * na {
        p.extend(dirichlet_row(rng, ns));
    }
    hsp_core::mdp::FiniteMdp::new(ns, na, p, gamma).expect("rows are distributions")
}

/// Flat-Dirichlet draw, clamped away from zero so that the result has full
/// support.
pub fn dirichlet_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln() + 1e-3)
        .collect();
    let z: f64 = g.iter().sum();
    let mut row: Vec<f64> = g.iter().map(|x| x / z).collect();
    // Put the rounding error on the largest entry so rows sum to 1 closely.
    let err = 1.0 - row.iter().sum::<f64>();
    let k = (0..n).fold(0, |b, i| if row[i] > row[b] { i } else { b });
    row[k] += err;
    row
}

pub fn dirichlet_policy(rng: &mut ChaCha8Rng, ns: usize, na: usize) -> Vec<f64> {
    (0..ns).flat_map(|_| dirichlet_row(rng, na)).collect()
}

/// Sign agreement between the surrogate policy gradient on a frozen batch
/// and central finite differences of the exact discounted return, for a
/// softmax tabular policy on a random MDP. Returns (agreeing, total)
/// coordinates.
pub fn gradient_sign_agreement(seed: u64, batch: usize) -> (usize, usize) {
    use hsp_core::engine::NUM_ACTIONS as NA;
    use hsp_core::learners::model::softmax;
    use hsp_core::learners::train::surrogate_grad;

    let ns = 4;
    let gamma = 0.9;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mdp = random_mdp(&mut rng, ns, NA, gamma);
    let r: Vec<f64> = (0..ns * NA).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let theta: Vec<[f64; NA]> = (0..ns)
        .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
        .collect();
    let mu0 = vec![1.0 / ns as f64; ns];

    // Exact policy evaluation by fixed-point iteration.
    let evaluate = |theta: &[[f64; NA]]| -> (Vec<f64>, Vec<f64>, Vec<[f64; NA]>) {
        let pi: Vec<[f64; NA]> = theta.iter().map(softmax).collect();
        let mut v = vec![0.0; ns];
        for _ in 0..2000 {
            v = (0..ns)
                .map(|s| {
                    (0..NA)
                        .map(|a| pi[s][a] * (r[s * NA + a] + gamma * mdp.expect(s, a, &v)))
                        .sum()
                })
                .collect();
        }
        let q: Vec<f64> = (0..ns * NA)
            .map(|i| r[i] + gamma * mdp.expect(i / NA, i % NA, &v))
            .collect();
        (v, q, pi)
    };
    let ret = |theta: &[[f64; NA]]| -> f64 {
        let (v, _, _) = evaluate(theta);
        v.iter().zip(&mu0).map(|(a, b)| a * b).sum()
    };

    let (v, q, pi) = evaluate(&theta);
    // Discounted visitation d(s) = sum_t gamma^t P(s_t = s).
    let mut d = vec![0.0; ns];
    let mut occ = mu0.clone();
    for _ in 0..2000 {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            d[s] += occ[s];
            for a in 0..NA {
                for (s2, &p) in mdp.row(s, a).iter().enumerate() {
                    next[s2] += gamma * occ[s] * pi[s][a] * p;
                }
            }
        }
        occ = next;
    }
    let z: f64 = d.iter().sum();

    // Frozen batch of on-policy samples with exact advantages.
    let mut grad = vec![[0.0; NA]; ns];
    for _ in 0..batch {
        let mut u = rng.gen::<f64>() * z;
        let mut s = ns - 1;
        for (i, &di) in d.iter().enumerate() {
            if u < di {
                s = i;
                break;
            }
            u -= di;
        }
        let a = hsp_core::learners::model::sample_action(&pi[s], &mut rng);
        let adv = q[s * NA + a] - v[s];
        let g = surrogate_grad(&theta[s], a, pi[s][a].ln(), adv, 0.2, 0.0);
        for k in 0..NA {
            grad[s][k] += g[k];
        }
    }

    let eps = 1e-5;
    let mut agree = 0;
    for s in 0..ns {
        for k in 0..NA {
            let mut up = theta.clone();
            up[s][k] += eps;
            let mut down = theta.clone();
            down[s][k] -= eps;
            let fd = (ret(&up) - ret(&down)) / (2.0 * eps);
            if fd.signum() == grad[s][k].signum() {
                agree += 1;
            }
        }
    }
    (agree, ns * NA)
}

/// Reference ED: ordered pairs over the subset, halved.
pub fn ed_oracle(subset: &[usize], ecs: &[Vec<f64>]) -> f64 {
    let m = ecs[0].len();
    let mut c = vec![0.0; m];
    for k in 0..m {
        let mut max = 0.0f64;
        for e in ecs {
            max = max.max(e[k]);
        }
        c[k] = if max > 0.0 { 1.0 / max } else { 0.0 };
    }
    let mut total = 0.0;
    for &i in subset {
        for &j in subset {
            for k in 0..m {
                total += c[k] * (ecs[i][k] - ecs[j][k]).abs();
            }
        }
    }
    total / 2.0
}

/// Step-by-step simulation of the selection rule, recomputing the full ED
/// of every candidate set.
pub fn greedy_oracle(ecs: &[Vec<f64>], k: usize, i0: usize) -> Vec<usize> {
    let mut s = vec![i0];
    while s.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..ecs.len() {
            if s.contains(&j) {
                continue;
            }
            let mut t = s.clone();
            t.push(j);
            let v = ed_oracle(&t, ecs);
            if best.map_or(true, |(_, bv)| v > bv + 1e-12 * v.abs().max(bv.abs()).max(1.0)) {
                best = Some((j, v));
            }
        }
        s.push(best.unwrap().0);
    }
    s
}
