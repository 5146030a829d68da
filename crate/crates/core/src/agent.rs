//! The playable-agent interface and the episode loop shared by training,
//! evaluation and the play server.

use std::sync::Arc;

use crate::engine::{apply, reset, Action, GameState, Layout, StepInfo, Trajectory};
use crate::rewards::EventVector;

/// Anything that picks actions for one seat.
///
/// `reset` is called before every episode with that episode's seed; all
/// randomness of the actor must derive from it.
pub trait Actor: Send {
    fn reset(&mut self, seed: u64);
    fn act(&mut self, state: &GameState, player: usize) -> Action;
}

/// SplitMix64 finalizer, used to derive independent seed streams.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed handed to the actor in `seat` for an episode seeded `episode_seed`.
pub fn seat_seed(episode_seed: u64, seat: usize) -> u64 {
    mix_seed(episode_seed, 0x5EA7_0000 + seat as u64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub score: u32,
    pub player_events: [EventVector; 2],
    pub trajectory: Option<Trajectory>,
}

/// Plays one full episode. `step_hook` sees every transition.
pub fn play_episode_with(
    layout: &Arc<Layout>,
    episode_seed: u64,
    actors: [&mut dyn Actor; 2],
    record: Option<[String; 2]>,
    mut step_hook: impl FnMut(&GameState, [Action; 2], &StepInfo, &GameState),
) -> EpisodeSummary {
    let [a0, a1] = actors;
    a0.reset(seat_seed(episode_seed, 0));
    a1.reset(seat_seed(episode_seed, 1));
    let mut state = reset(layout, episode_seed);
    let m = layout.num_events();
    let mut totals = [EventVector::zeros(m); 2];
    let mut traj = record.map(|players| Trajectory::new(layout, episode_seed, players));
    while !state.is_done() {
        let acts = [a0.act(&state, 0), a1.act(&state, 1)];
        let prev = state.clone();
        let info = apply(&mut state, acts).expect("loop stops at episode end");
        totals[0] += info.player_events[0];
        totals[1] += info.player_events[1];
        if let Some(t) = traj.as_mut() {
            t.push(acts, &info);
        }
        step_hook(&prev, acts, &info, &state);
    }
    EpisodeSummary {
        score: state.cumulative_reward,
        player_events: totals,
        trajectory: traj,
    }
}

pub fn play_episode(
    layout: &Arc<Layout>,
    episode_seed: u64,
    actors: [&mut dyn Actor; 2],
) -> EpisodeSummary {
    play_episode_with(layout, episode_seed, actors, None, |_, _, _, _| {})
}

/// Always NoOp.
#[derive(Clone, Debug, Default)]
pub struct NoOpActor;

impl Actor for NoOpActor {
    fn reset(&mut self, _seed: u64) {}
    fn act(&mut self, _state: &GameState, _player: usize) -> Action {
        Action::NoOp
    }
}

/// Uniform over the six actions.
#[derive(Clone, Debug)]
pub struct RandomActor {
    rng: rand_chacha::ChaCha8Rng,
}

impl Default for RandomActor {
    fn default() -> Self {
        use rand::SeedableRng;
        RandomActor {
            rng: rand_chacha::ChaCha8Rng::seed_from_u64(0),
        }
    }
}

impl Actor for RandomActor {
    fn reset(&mut self, seed: u64) {
        use rand::SeedableRng;
        self.rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    }
    fn act(&mut self, _state: &GameState, _player: usize) -> Action {
        use rand::Rng;
        Action::ALL[self.rng.gen_range(0..Action::ALL.len())]
    }
}
