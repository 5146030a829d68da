//! The trainable-policy interface shared by the tabular and parametric
//! function classes, plus the per-seat episode history both condition on.

use rand::Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::engine::{GameState, Item, NUM_ACTIONS};

/// Summary of what the partner has done so far this episode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct History {
    /// Last ingredient the partner picked up: 0 none, 1 onion, 2 tomato.
    pub partner_ingredient: u8,
    /// Whether the partner has ever carried a dish.
    pub partner_dished: bool,
}

impl History {
    pub const FEATURES: usize = 4;

    /// Folds one transition observed from `me`'s seat.
    pub fn update(&mut self, prev: &GameState, next: &GameState, me: usize) {
        let other = 1 - me;
        let before = prev.players[other].held;
        let after = next.players[other].held;
        if before.is_none() {
            match after {
                Some(Item::Onion) => self.partner_ingredient = 1,
                Some(Item::Tomato) => self.partner_ingredient = 2,
                Some(Item::Dish) => self.partner_dished = true,
                _ => {}
            }
        }
    }

    pub fn code(&self) -> u64 {
        self.partner_ingredient as u64 * 2 + self.partner_dished as u64
    }

    pub fn write_features(&self, out: &mut [f32]) {
        out[..Self::FEATURES].fill(0.0);
        out[self.partner_ingredient as usize] = 1.0;
        out[3] = self.partner_dished as u8 as f32;
    }
}

/// A policy-and-value function class trained by the actor-critic loop.
///
/// Gradients are passed in logit space: `dlogits` is the ascent direction of
/// the surrogate objective with respect to the six action logits and
/// `dvalue` the descent direction of the value loss (target minus estimate).
pub trait Model: Clone + Send + Sync + Serialize + DeserializeOwned + 'static {
    type Input: Clone + Send + Sync;
    type Grad: Send;

    fn encode(&self, state: &GameState, player: usize, history: &History) -> Self::Input;
    fn logits(&self, x: &Self::Input) -> [f64; NUM_ACTIONS];
    /// State value; `partner` is the pool index of the partner when the
    /// critic is told who it is playing with.
    fn value(&self, x: &Self::Input, partner: Option<usize>) -> f64;
    fn zero_grad(&self) -> Self::Grad;
    fn accumulate(
        &self,
        x: &Self::Input,
        partner: Option<usize>,
        dlogits: &[f64; NUM_ACTIONS],
        dvalue: f64,
        grad: &mut Self::Grad,
    );
    /// One optimizer step over a minibatch of `batch` samples.
    fn apply(&mut self, grad: &Self::Grad, lr: f64, batch: usize);
    /// Hex SHA-256 over the serialized parameters.
    fn param_hash(&self) -> String;
}

pub fn softmax(logits: &[f64; NUM_ACTIONS]) -> [f64; NUM_ACTIONS] {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; NUM_ACTIONS];
    let mut z = 0.0;
    for (pi, l) in p.iter_mut().zip(logits) {
        *pi = (l - m).exp();
        z += *pi;
    }
    p.iter_mut().for_each(|x| *x /= z);
    p
}

pub fn entropy(p: &[f64; NUM_ACTIONS]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|x| x * x.ln())
        .sum::<f64>()
}

/// Inverse-CDF draw from a distribution over actions.
pub fn sample_action(p: &[f64; NUM_ACTIONS], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    NUM_ACTIONS - 1
}

pub(crate) fn sha256_of<T: Serialize>(value: &T) -> String {
    use sha2::{Digest, Sha256};
    let bytes = bincode::serialize(value).expect("parameters serialize");
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_normalizes() {
        let p = softmax(&[1.0, 2.0, 3.0, 0.0, -1.0, 1000.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[5] > 0.999);
    }

    #[test]
    fn uniform_entropy() {
        let p = softmax(&[0.0; NUM_ACTIONS]);
        assert!((entropy(&p) - (NUM_ACTIONS as f64).ln()).abs() < 1e-12);
    }
}
