//! Behavioral fingerprints of policy pairs (expected event counts), the
//! event-diversity objective, greedy pool filtering and pool assembly.

use std::collections::HashSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{mix_seed, play_episode};
use crate::engine::Layout;
use crate::learners::PolicyHandle;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PoolError {
    #[error("at least one episode is required")]
    NoEpisodes,
    #[error("cannot select {k} of {n} candidates")]
    KOutOfRange { k: usize, n: usize },
    #[error("start index {i0} outside {n} candidates")]
    StartOutOfRange { i0: usize, n: usize },
    #[error("event difference needs at least two policies")]
    SingletonSet,
    #[error("need {need} {side} candidates, have {have}")]
    InsufficientCandidates {
        side: &'static str,
        need: usize,
        have: usize,
    },
    #[error("duplicate policy id `{0}`")]
    DuplicateId(String),
    #[error("event counts have different lengths")]
    DimensionMismatch,
}

/// Mean episode-summed own events of a policy when paired with a partner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventCount {
    pub per_event: Vec<f64>,
    pub policy_id: String,
    pub partner_id: String,
    pub episodes: usize,
}

impl AsRef<[f64]> for EventCount {
    fn as_ref(&self) -> &[f64] {
        &self.per_event
    }
}

/// Plays `pi` in seat 0 with `partner` in seat 1 over seeded episodes and
/// averages `pi`'s own event totals.
pub fn expected_event_count(
    pi: &PolicyHandle,
    partner: &PolicyHandle,
    layout: &Arc<Layout>,
    episodes: usize,
    seed: u64,
) -> Result<EventCount, PoolError> {
    if episodes == 0 {
        return Err(PoolError::NoEpisodes);
    }
    let m = layout.num_events();
    let totals: Vec<Vec<u64>> = (0..episodes)
        .into_par_iter()
        .map(|ep| {
            let mut a = pi.actor();
            let mut b = partner.actor();
            let out = play_episode(layout, mix_seed(seed, ep as u64), [a.as_mut(), b.as_mut()]);
            out.player_events[0].counts()[..m]
                .iter()
                .map(|&c| c as u64)
                .collect()
        })
        .collect();
    let mut sums = vec![0u64; m];
    for t in &totals {
        for (s, c) in sums.iter_mut().zip(t) {
            *s += c;
        }
    }
    Ok(EventCount {
        per_event: sums.iter().map(|&s| s as f64 / episodes as f64).collect(),
        policy_id: pi.id.clone(),
        partner_id: partner.id.clone(),
        episodes,
    })
}

/// `c_k = 1 / max_i EC_k`, or 0 for an event that never occurs.
pub fn normalization_constants<E: AsRef<[f64]>>(ecs: &[E]) -> Vec<f64> {
    let m = ecs.first().map_or(0, |e| e.as_ref().len());
    (0..m)
        .map(|k| {
            let max = ecs.iter().map(|e| e.as_ref()[k]).fold(0.0, f64::max);
            if max > 0.0 {
                1.0 / max
            } else {
                0.0
            }
        })
        .collect()
}

/// `Σ_k c_k |a_k - b_k|`.
pub fn weighted_l1(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(c)
        .map(|((x, y), ck)| ck * (x - y).abs())
        .sum()
}

/// Sum of weighted L1 distances over unordered pairs of distinct members
/// of `subset`.
pub fn event_diversity<E: AsRef<[f64]>>(subset: &[usize], ecs: &[E], c: &[f64]) -> f64 {
    let mut total = 0.0;
    for (n, &i) in subset.iter().enumerate() {
        for &j in &subset[n + 1..] {
            total += weighted_l1(ecs[i].as_ref(), ecs[j].as_ref(), c);
        }
    }
    total
}

/// Greedy selection starting from `{i0}`: each round adds the candidate
/// whose inclusion maximizes the event diversity of the selection, ties
/// (within [`TIE_TOLERANCE`]) to the smallest index. Returns indices in selection order.
pub fn greedy_select<E: AsRef<[f64]>>(
    ecs: &[E],
    k: usize,
    i0: usize,
) -> Result<Vec<usize>, PoolError> {
    let n = ecs.len();
    if k == 0 || k > n {
        return Err(PoolError::KOutOfRange { k, n });
    }
    if i0 >= n {
        return Err(PoolError::StartOutOfRange { i0, n });
    }
    if ecs
        .iter()
        .any(|e| e.as_ref().len() != ecs[0].as_ref().len())
    {
        return Err(PoolError::DimensionMismatch);
    }
    let c = normalization_constants(ecs);
    let mut chosen = vec![i0];
    let mut in_set = vec![false; n];
    in_set[i0] = true;
    // gain[j] = Σ_{s ∈ chosen} d(j, s), the increase of ED from adding j.
    let mut gain: Vec<f64> = (0..n)
        .map(|j| weighted_l1(ecs[j].as_ref(), ecs[i0].as_ref(), &c))
        .collect();
    while chosen.len() < k {
        let mut best: Option<usize> = None;
        for j in 0..n {
            if in_set[j] {
                continue;
            }
            if best.map_or(true, |b| beats(gain[j], gain[b])) {
                best = Some(j);
            }
        }
        let b = best.expect("k <= n leaves a candidate");
        chosen.push(b);
        in_set[b] = true;
        for j in 0..n {
            gain[j] += weighted_l1(ecs[j].as_ref(), ecs[b].as_ref(), &c);
        }
    }
    Ok(chosen)
}

/// Relative margin below which two gains count as tied. Gains that are
/// equal in exact arithmetic can differ in the last bits depending on
/// summation order.
pub const TIE_TOLERANCE: f64 = 1e-12;

fn beats(a: f64, b: f64) -> bool {
    a > b + TIE_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// Seeded uniform start index for greedy selection.
pub fn draw_start(n: usize, seed: u64) -> usize {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x1_0000)).gen_range(0..n)
}

/// `min_{j != target} Σ_k c_k |EC_k(target) - EC_k(j)|` with `c` computed
/// over the whole set.
pub fn event_diff_from_counts<E: AsRef<[f64]>>(target: usize, ecs: &[E]) -> Result<f64, PoolError> {
    if ecs.len() < 2 {
        return Err(PoolError::SingletonSet);
    }
    let c = normalization_constants(ecs);
    Ok((0..ecs.len())
        .filter(|&j| j != target)
        .map(|j| weighted_l1(ecs[target].as_ref(), ecs[j].as_ref(), &c))
        .fold(f64::INFINITY, f64::min))
}

/// Event counts of every member of `set` paired with `reference`.
pub fn counts_against(
    set: &[PolicyHandle],
    reference: &PolicyHandle,
    layout: &Arc<Layout>,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EventCount>, PoolError> {
    set.iter()
        .map(|p| expected_event_count(p, reference, layout, episodes, seed))
        .collect()
}

/// Event-based difference of `set[target]` from the rest of `set`, all
/// measured against the same reference partner.
pub fn event_diff(
    target: usize,
    set: &[PolicyHandle],
    reference: &PolicyHandle,
    layout: &Arc<Layout>,
    episodes: usize,
    seed: u64,
) -> Result<f64, PoolError> {
    if set.len() < 2 {
        return Err(PoolError::SingletonSet);
    }
    let ecs = counts_against(set, reference, layout, episodes, seed)?;
    event_diff_from_counts(target, &ecs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Biased,
    MepCheckpoint,
}

#[derive(Clone, Debug)]
pub struct PoolMember {
    pub policy: PolicyHandle,
    pub provenance: Provenance,
}

#[derive(Clone, Debug)]
pub struct PoolSpec {
    pub members: Vec<PoolMember>,
    pub target_size: usize,
    /// Greedy start index among the biased candidates.
    pub start: usize,
    /// Selected biased candidate indices in selection order.
    pub selected: Vec<usize>,
}

impl PoolSpec {
    pub fn policies(&self) -> Vec<PolicyHandle> {
        self.members.iter().map(|m| m.policy.clone()).collect()
    }
}

/// Half the pool from greedily filtered biased candidates (with `ecs`
/// measured against each candidate's own training partner), the rest from
/// MEP checkpoints in the given order.
pub fn assemble_hsp_pool(
    biased: &[PolicyHandle],
    ecs: &[EventCount],
    mep: &[PolicyHandle],
    k_total: usize,
    seed: u64,
) -> Result<PoolSpec, PoolError> {
    let k_biased = k_total / 2;
    let k_mep = k_total - k_biased;
    if biased.len() < k_biased || biased.is_empty() {
        return Err(PoolError::InsufficientCandidates {
            side: "biased",
            need: k_biased.max(1),
            have: biased.len(),
        });
    }
    if mep.len() < k_mep {
        return Err(PoolError::InsufficientCandidates {
            side: "mep",
            need: k_mep,
            have: mep.len(),
        });
    }
    if ecs.len() != biased.len() {
        return Err(PoolError::DimensionMismatch);
    }
    let start = draw_start(biased.len(), seed);
    let selected = if k_biased == 0 {
        Vec::new()
    } else {
        greedy_select(ecs, k_biased, start)?
    };
    let mut members: Vec<PoolMember> = selected
        .iter()
        .map(|&i| PoolMember {
            policy: biased[i].clone(),
            provenance: Provenance::Biased,
        })
        .collect();
    members.extend(mep[..k_mep].iter().map(|p| PoolMember {
        policy: p.clone(),
        provenance: Provenance::MepCheckpoint,
    }));
    let mut seen = HashSet::new();
    for m in &members {
        if !seen.insert(m.policy.id.as_str()) {
            return Err(PoolError::DuplicateId(m.policy.id.clone()));
        }
    }
    Ok(PoolSpec {
        members,
        target_size: k_total,
        start,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::builtin_layout;

    #[test]
    fn constants_and_diversity_examples() {
        assert_eq!(normalization_constants(&[vec![2.0, 4.0]]), vec![0.5, 0.25]);
        assert_eq!(
            normalization_constants(&[vec![0.0, 1.0], vec![0.0, 3.0]])[0],
            0.0
        );
        let ecs = vec![vec![0.0, 2.0], vec![4.0, 2.0]];
        assert_eq!(event_diversity(&[0, 1], &ecs, &[0.25, 0.5]), 1.0);
        assert_eq!(event_diversity(&[1], &ecs, &[0.25, 0.5]), 0.0);
    }

    #[test]
    fn greedy_rejects_bad_k() {
        let ecs = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            greedy_select(&ecs, 3, 0),
            Err(PoolError::KOutOfRange { .. })
        ));
        assert!(matches!(
            greedy_select(&ecs, 0, 0),
            Err(PoolError::KOutOfRange { .. })
        ));
        assert_eq!(greedy_select(&ecs, 2, 1).unwrap(), vec![1, 0]);
    }

    #[test]
    fn noop_pair_has_zero_counts() {
        let layout = Arc::new(builtin_layout("coordination_ring").unwrap());
        let ec = expected_event_count(&PolicyHandle::noop(), &PolicyHandle::noop(), &layout, 2, 0)
            .unwrap();
        assert!(ec.per_event.iter().all(|&v| v == 0.0));
        assert!(matches!(
            expected_event_count(&PolicyHandle::noop(), &PolicyHandle::noop(), &layout, 0, 0),
            Err(PoolError::NoEpisodes)
        ));
    }

    #[test]
    fn minimal_assembly() {
        let b = [PolicyHandle::noop().with_id("b0")];
        let ec = [EventCount {
            per_event: vec![0.0],
            policy_id: "b0".into(),
            partner_id: "x".into(),
            episodes: 1,
        }];
        let m = [PolicyHandle::random().with_id("m0")];
        let spec = assemble_hsp_pool(&b, &ec, &m, 2, 4).unwrap();
        assert_eq!(spec.members.len(), 2);
        assert!(matches!(
            assemble_hsp_pool(&b, &ec, &[], 2, 4),
            Err(PoolError::InsufficientCandidates { side: "mep", .. })
        ));
    }
}
