//! Hidden-utility self-play: a cooperative kitchen gridworld, event-based
//! hidden rewards, biased-partner pools and an adaptive learner.

pub mod agent;
pub mod cli;
pub mod engine;
pub mod evalharness;
pub mod hidden_reward;
pub mod learners;
pub mod mdp;
pub mod playserver;
pub mod pool;
pub mod rewards;
pub mod scripted;
