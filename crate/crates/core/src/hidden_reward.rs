//! Builds a reward under which a given full-support policy is exactly the
//! soft-optimal policy of a finite MDP, with the partner folded into the
//! dynamics.
//!
//! Construction, for temperature `alpha` and any baseline `b`:
//! 1. `pi*(s) = argmax_a pi(a|s)` (ties to the smallest action index);
//! 2. `A(s,a) = alpha (log pi(a|s) - log pi(pi*(s)|s))`;
//! 3. `V` solves `V = g + gamma P_{pi*} V` with
//!    `g(s) = sum_a pi(a|s) A(s,a) + b(s) + alpha H(pi(.|s))`;
//! 4. `V*(s) = gamma E[V(s') | s, pi*(s)] + b(s)` and
//!    `R(s,a) = A(s,a) - gamma E[V(s') | s, a] + V*(s)`.
//!
//! Then `Q = A + V*`, so `softmax(Q / alpha) = pi` and `R(s, pi*(s)) = b(s)`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::learners::soft_vi::{soft_value_iteration, SoftPlanSolution, SoftViError};
pub use crate::mdp::{FiniteMdp, MdpError, TwoPlayerMdp};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HiddenRewardError {
    #[error("policy gives probability {prob} to action {action} in state {state}; full support required")]
    ZeroProbabilityAction {
        state: usize,
        action: usize,
        prob: f64,
    },
    #[error("{what} has {found} entries, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("policy row {state} sums to {sum}")]
    NotADistribution { state: usize, sum: f64 },
    #[error("policy-evaluation system is singular")]
    Singular,
    #[error(transparent)]
    SoftVi(#[from] SoftViError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstructedReward {
    /// `reward[s * n_actions + a]`.
    pub reward: Vec<f64>,
    pub baseline: Vec<f64>,
    pub alpha: f64,
    /// Greedy action per state.
    pub greedy: Vec<usize>,
    /// Soft value of `pi` under `reward`.
    pub value: Vec<f64>,
    pub n_actions: usize,
}

impl ConstructedReward {
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub max_tv: f64,
    pub residual: f64,
    pub pass: bool,
}

impl VerifyReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "max_tv {:e}", self.max_tv);
        let _ = writeln!(s, "residual {:e}", self.residual);
        let _ = writeln!(s, "pass {}", self.pass);
        s
    }
}

/// Marginalizes a fixed partner policy (`partner[s * n_partner_actions + a~]`)
/// into the transition table.
pub fn fold_partner(mdp: &TwoPlayerMdp, partner: &[f64]) -> Result<FiniteMdp, HiddenRewardError> {
    let (ns, na, nb) = (mdp.n_states, mdp.n_actions, mdp.n_partner_actions);
    check_len("partner policy", ns * nb, partner.len())?;
    check_rows(partner, nb)?;
    let mut p = vec![0.0; ns * na * ns];
    for s in 0..ns {
        for a in 0..na {
            let out = &mut p[(s * na + a) * ns..(s * na + a + 1) * ns];
            for b in 0..nb {
                let w = partner[s * nb + b];
                if w == 0.0 {
                    continue;
                }
                for (o, &q) in out.iter_mut().zip(mdp.row(s, a, b)) {
                    *o += w * q;
                }
            }
        }
    }
    Ok(FiniteMdp::new(ns, na, p, mdp.gamma)?)
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), HiddenRewardError> {
    if expected != found {
        return Err(HiddenRewardError::DimensionMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

fn check_rows(pi: &[f64], na: usize) -> Result<(), HiddenRewardError> {
    for (s, row) in pi.chunks(na).enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
            return Err(HiddenRewardError::NotADistribution { state: s, sum });
        }
    }
    Ok(())
}

fn argmax_first(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > row[best] {
            best = i;
        }
    }
    best
}

/// Greedy action per state, ties to the smallest index.
pub fn greedy_actions(pi: &[f64], n_actions: usize) -> Vec<usize> {
    pi.chunks(n_actions).map(argmax_first).collect()
}

/// `alpha (log pi(a|s) - log pi(pi*(s)|s))` for every state-action pair.
pub fn advantage_table(pi: &[f64], n_actions: usize, alpha: f64) -> Vec<f64> {
    let greedy = greedy_actions(pi, n_actions);
    (0..pi.len())
        .map(|i| {
            let s = i / n_actions;
            alpha * (pi[i].ln() - pi[s * n_actions + greedy[s]].ln())
        })
        .collect()
}

pub fn construct_hidden_reward(
    pi: &[f64],
    mdp: &FiniteMdp,
    alpha: f64,
    baseline: &[f64],
) -> Result<ConstructedReward, HiddenRewardError> {
    let (ns, na, gamma) = (mdp.n_states, mdp.n_actions, mdp.gamma);
    check_len("policy", ns * na, pi.len())?;
    check_len("baseline", ns, baseline.len())?;
    check_rows(pi, na)?;
    if !(alpha > 0.0) {
        return Err(SoftViError::BadTemperature(alpha).into());
    }
    for s in 0..ns {
        for a in 0..na {
            let p = pi[s * na + a];
            if !(p > 0.0) {
                return Err(HiddenRewardError::ZeroProbabilityAction {
                    state: s,
                    action: a,
                    prob: p,
                });
            }
        }
    }

    let greedy = greedy_actions(pi, na);
    let adv = advantage_table(pi, na, alpha);

    let mut m = DMatrix::<f64>::identity(ns, ns);
    let mut g = DVector::<f64>::zeros(ns);
    for s in 0..ns {
        let row = &pi[s * na..(s + 1) * na];
        let entropy: f64 = -row.iter().map(|p| p * p.ln()).sum::<f64>();
        let expected_adv: f64 = row.iter().zip(&adv[s * na..]).map(|(p, a)| p * a).sum();
        g[s] = expected_adv + baseline[s] + alpha * entropy;
        for (s2, &p) in mdp.row(s, greedy[s]).iter().enumerate() {
            m[(s, s2)] -= gamma * p;
        }
    }
    let v = m.lu().solve(&g).ok_or(HiddenRewardError::Singular)?;
    let v: Vec<f64> = v.iter().copied().collect();

    let mut reward = vec![0.0; ns * na];
    for s in 0..ns {
        let v_star = gamma * mdp.expect(s, greedy[s], &v) + baseline[s];
        for a in 0..na {
            reward[s * na + a] = if a == greedy[s] {
                baseline[s]
            } else {
                adv[s * na + a] - gamma * mdp.expect(s, a, &v) + v_star
            };
        }
    }
    Ok(ConstructedReward {
        reward,
        baseline: baseline.to_vec(),
        alpha,
        greedy,
        value: v,
        n_actions: na,
    })
}

/// Largest total-variation distance between two policy tables.
pub fn max_total_variation(a: &[f64], b: &[f64], n_actions: usize) -> f64 {
    a.chunks(n_actions)
        .zip(b.chunks(n_actions))
        .map(|(x, y)| 0.5 * x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves the soft-optimal policy for `reward` to well below `tol`.
pub fn recover_policy(
    reward: &ConstructedReward,
    mdp: &FiniteMdp,
    tol: f64,
) -> Result<SoftPlanSolution, HiddenRewardError> {
    let inner = if tol.is_finite() {
        (tol * 1e-4).max(1e-13)
    } else {
        1e-10
    };
    Ok(soft_value_iteration(
        mdp,
        &reward.reward,
        reward.alpha,
        inner,
        crate::learners::soft_vi::DEFAULT_MAX_ITERS,
    )?)
}

pub fn verify_soft_optimal(
    reward: &ConstructedReward,
    pi: &[f64],
    mdp: &FiniteMdp,
    tol: f64,
) -> Result<VerifyReport, HiddenRewardError> {
    let sol = recover_policy(reward, mdp, tol)?;
    let max_tv = max_total_variation(&sol.policy, pi, mdp.n_actions);
    Ok(VerifyReport {
        max_tv,
        residual: sol.residual,
        pass: max_tv <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> FiniteMdp {
        FiniteMdp::new(2, 2, vec![0.9, 0.1, 0.2, 0.8, 0.5, 0.5, 0.0, 1.0], 0.9).unwrap()
    }

    #[test]
    fn uniform_policy_has_zero_advantage() {
        let mdp = two_state();
        let pi = vec![0.5; 4];
        assert!(advantage_table(&pi, 2, 1.0).iter().all(|&a| a == 0.0));
        let r = construct_hidden_reward(&pi, &mdp, 1.0, &[0.0, 0.0]).unwrap();
        let rep = verify_soft_optimal(&r, &pi, &mdp, 1e-6).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn baseline_pins_greedy_reward() {
        let mdp = two_state();
        let pi = vec![0.7, 0.3, 0.2, 0.8];
        let r = construct_hidden_reward(&pi, &mdp, 1.0, &[0.0, 0.0]).unwrap();
        assert_eq!(r.get(0, 0), 0.0);
        assert_eq!(r.get(1, 1), 0.0);
    }

    #[test]
    fn zero_probability_is_rejected() {
        let mdp = two_state();
        let err = construct_hidden_reward(&[1.0, 0.0, 0.5, 0.5], &mdp, 1.0, &[0.0; 2]).unwrap_err();
        assert!(matches!(
            err,
            HiddenRewardError::ZeroProbabilityAction {
                state: 0,
                action: 1,
                ..
            }
        ));
    }
}
