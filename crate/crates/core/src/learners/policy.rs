//! Playable policies with stable identifiers.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::MlpModel;
use super::model::{sample_action, softmax, History, Model};
use super::tabular::TabularModel;
use crate::agent::{Actor, NoOpActor, RandomActor};
use crate::engine::{Action, GameState};
use crate::scripted::{ScriptKind, ScriptedPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    Scripted,
    Tabular,
    Parametric,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PolicyKind::Scripted => "scripted",
            PolicyKind::Tabular => "tabular",
            PolicyKind::Parametric => "parametric",
        };
        f.write_str(s)
    }
}

/// Kind-specific parameters. NoOp and uniform-random partners count as
/// scripted.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum PolicyParams {
    NoOp,
    Random,
    Scripted(ScriptKind),
    Tabular(Arc<TabularModel>),
    Parametric(Arc<MlpModel>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolicyHandle {
    pub id: String,
    pub params: PolicyParams,
}

impl PolicyHandle {
    pub fn new(id: impl Into<String>, params: PolicyParams) -> Self {
        PolicyHandle {
            id: id.into(),
            params,
        }
    }

    pub fn noop() -> Self {
        PolicyHandle::new("noop", PolicyParams::NoOp)
    }

    pub fn random() -> Self {
        PolicyHandle::new("random", PolicyParams::Random)
    }

    pub fn scripted(kind: ScriptKind) -> Self {
        PolicyHandle::new(format!("script:{kind}"), PolicyParams::Scripted(kind))
    }

    pub fn kind(&self) -> PolicyKind {
        match self.params {
            PolicyParams::NoOp | PolicyParams::Random | PolicyParams::Scripted(_) => {
                PolicyKind::Scripted
            }
            PolicyParams::Tabular(_) => PolicyKind::Tabular,
            PolicyParams::Parametric(_) => PolicyKind::Parametric,
        }
    }

    /// A fresh actor; its randomness comes only from the seed passed to
    /// `Actor::reset`.
    pub fn actor(&self) -> Box<dyn Actor> {
        match &self.params {
            PolicyParams::NoOp => Box::new(NoOpActor),
            PolicyParams::Random => Box::new(RandomActor::default()),
            PolicyParams::Scripted(k) => Box::new(ScriptedPolicy::new(*k, 0)),
            PolicyParams::Tabular(m) => Box::new(ModelActor::new(m.clone())),
            PolicyParams::Parametric(m) => Box::new(ModelActor::new(m.clone())),
        }
    }

    /// Hash of the parameters (not the id).
    pub fn param_hash(&self) -> String {
        match &self.params {
            PolicyParams::Tabular(m) => m.param_hash(),
            PolicyParams::Parametric(m) => m.param_hash(),
            other => super::model::sha256_of(other),
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

/// Samples from a trained model, tracking the partner history itself.
pub struct ModelActor<M: Model> {
    model: Arc<M>,
    rng: ChaCha8Rng,
    history: History,
    prev: Option<GameState>,
}

impl<M: Model> ModelActor<M> {
    pub fn new(model: Arc<M>) -> Self {
        ModelActor {
            model,
            rng: ChaCha8Rng::seed_from_u64(0),
            history: History::default(),
            prev: None,
        }
    }
}

impl<M: Model> Actor for ModelActor<M> {
    fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.history = History::default();
        self.prev = None;
    }

    fn act(&mut self, state: &GameState, player: usize) -> Action {
        if let Some(prev) = &self.prev {
            if prev.tick < state.tick {
                self.history.update(prev, state, player);
            }
        }
        self.prev = Some(state.clone());
        let x = self.model.encode(state, player, &self.history);
        let p = softmax(&self.model.logits(&x));
        Action::ALL[sample_action(&p, &mut self.rng)]
    }
}
