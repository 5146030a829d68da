use crate::mdp::FiniteMdp;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SoftViError {
    #[error("soft value iteration did not converge in {max_iters} iterations (last change {last_change:e})")]
    NonConvergence { max_iters: usize, last_change: f64 },
    #[error("reward table has {found} entries, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("temperature must be positive, got {0}")]
    BadTemperature(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoftPlanSolution {
    pub v: Vec<f64>,
    /// `q[s * n_actions + a]`.
    pub q: Vec<f64>,
    /// `policy[s * n_actions + a]`, exactly `softmax(q[s, .] / alpha)`.
    pub policy: Vec<f64>,
    /// `max_s |(T V)(s) - V(s)|` at the returned `v`.
    pub residual: f64,
    pub iterations: usize,
    pub n_actions: usize,
}

impl SoftPlanSolution {
    pub fn policy_row(&self, s: usize) -> &[f64] {
        &self.policy[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn q_row(&self, s: usize) -> &[f64] {
        &self.q[s * self.n_actions..(s + 1) * self.n_actions]
    }
}

pub const DEFAULT_MAX_ITERS: usize = 1_000_000;

/// `alpha * log sum_a exp(x_a / alpha)`, shifted for stability.
pub fn soft_max(xs: &[f64], alpha: f64) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + alpha * xs.iter().map(|x| ((x - m) / alpha).exp()).sum::<f64>().ln()
}

fn backup(mdp: &FiniteMdp, reward: &[f64], v: &[f64], q: &mut [f64]) {
    let na = mdp.n_actions;
    for s in 0..mdp.n_states {
        for a in 0..na {
            q[s * na + a] = reward[s * na + a] + mdp.gamma * mdp.expect(s, a, v);
        }
    }
}

/// Iterates the entropy-regularized Bellman operator
/// `(T V)(s) = alpha log sum_a exp((R(s,a) + gamma E[V(s')]) / alpha)`
/// until successive iterates differ by at most `tol * (1 - gamma)` in sup
/// norm, which bounds the distance to the fixed point by `tol`.
pub fn soft_value_iteration(
    mdp: &FiniteMdp,
    reward: &[f64],
    alpha: f64,
    tol: f64,
    max_iters: usize,
) -> Result<SoftPlanSolution, SoftViError> {
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    if reward.len() != ns * na {
        return Err(SoftViError::DimensionMismatch {
            expected: ns * na,
            found: reward.len(),
        });
    }
    if !(alpha > 0.0) {
        return Err(SoftViError::BadTemperature(alpha));
    }
    let stop = (tol * (1.0 - mdp.gamma)).max(f64::EPSILON);
    let mut v = vec![0.0; ns];
    let mut q = vec![0.0; ns * na];
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iters {
        backup(mdp, reward, &v, &mut q);
        change = 0.0;
        for s in 0..ns {
            let nv = soft_max(&q[s * na..(s + 1) * na], alpha);
            change = f64::max(change, (nv - v[s]).abs());
            v[s] = nv;
        }
        iterations += 1;
        if change <= stop {
            break;
        }
    }
    if change > stop {
        return Err(SoftViError::NonConvergence {
            max_iters,
            last_change: change,
        });
    }
    backup(mdp, reward, &v, &mut q);
    let mut residual: f64 = 0.0;
    let mut policy = vec![0.0; ns * na];
    for s in 0..ns {
        let row = &q[s * na..(s + 1) * na];
        let tv = soft_max(row, alpha);
        residual = residual.max((tv - v[s]).abs());
        for a in 0..na {
            policy[s * na + a] = ((row[a] - tv) / alpha).exp();
        }
        let z: f64 = policy[s * na..(s + 1) * na].iter().sum();
        policy[s * na..(s + 1) * na]
            .iter_mut()
            .for_each(|p| *p /= z);
    }
    Ok(SoftPlanSolution {
        v,
        q,
        policy,
        residual,
        iterations,
        n_actions: na,
    })
}
