mod common;

use hsp_core::agent::{mix_seed, play_episode};
use hsp_core::learners::PolicyHandle;
use hsp_core::pool::{
    assemble_hsp_pool, event_diff_from_counts, event_diversity, expected_event_count,
    greedy_select, normalization_constants, EventCount, PoolError, Provenance,
};
use hsp_core::scripted::ScriptKind;
use proptest::prelude::*;

use common::{ed_oracle, greedy_oracle, layout};

fn ecs_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=10, 1usize..=5).prop_flat_map(|(n, m)| {
        prop::collection::vec(
            prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..10.0], m),
            n,
        )
    })
}

#[test]
fn hand_simulated_selection() {
    // Distances with c = (1/4, 1/2): d(0,1)=1, d(0,2)=1, d(0,3)=0.5,
    // d(1,2)=2, d(1,3)=0.5, d(2,3)=1.5.
    let ecs = vec![
        vec![2.0, 1.0],
        vec![0.0, 2.0],
        vec![4.0, 0.0],
        vec![2.0, 2.0],
    ];
    // From 0, candidates 1 and 2 tie at gain 1; the smaller index wins.
    assert_eq!(greedy_select(&ecs, 2, 0).unwrap(), vec![0, 1]);
    // Then 2 gains 1 + 2 = 3 over 3's 0.5 + 0.5.
    assert_eq!(greedy_select(&ecs, 3, 0).unwrap(), vec![0, 1, 2]);
    assert_eq!(greedy_select(&ecs, 2, 3).unwrap(), vec![3, 2]);
    let mut all = greedy_select(&ecs, 4, 2).unwrap();
    all.sort();
    assert_eq!(all, vec![0, 1, 2, 3]);
}

#[test]
fn duplicate_of_selected_member_is_skipped() {
    let ecs = vec![
        vec![5.0, 0.0],
        vec![5.0, 0.0],
        vec![0.0, 0.1],
        vec![0.0, 0.0],
    ];
    let sel = greedy_select(&ecs, 3, 0).unwrap();
    assert!(!sel[..2].contains(&1), "{sel:?}");
    assert_eq!(sel.len(), 3);
}

#[test]
fn normalization_examples() {
    assert_eq!(normalization_constants(&[vec![2.0, 4.0]]), vec![0.5, 0.25]);
    assert_eq!(
        normalization_constants(&[vec![0.0, 1.0], vec![0.0, 3.0]]),
        vec![0.0, 1.0 / 3.0]
    );
    let ecs = vec![vec![0.0, 2.0], vec![4.0, 2.0]];
    assert_eq!(event_diversity(&[0, 1], &ecs, &[0.25, 0.5]), 1.0);
    assert_eq!(event_diversity(&[1], &ecs, &[0.25, 0.5]), 0.0);
}

#[test]
fn event_diff_examples() {
    let ecs = vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![3.0, 0.0]];
    assert_eq!(event_diff_from_counts(0, &ecs).unwrap(), 0.0);
    // Brute-force minimum over the other two members of a 3-set.
    let ecs: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![2.0, 0.0], vec![4.0, 1.0]];
    let c: [f64; 2] = [0.25, 0.5];
    let d = |i: usize, j: usize| -> f64 {
        (0..2).map(|k| c[k] * (ecs[i][k] - ecs[j][k]).abs()).sum()
    };
    assert_eq!(event_diff_from_counts(0, &ecs).unwrap(), d(0, 1).min(d(0, 2)));
    assert_eq!(
        event_diff_from_counts(0, &ecs[..1]).unwrap_err(),
        PoolError::SingletonSet
    );
}

fn handle(id: String) -> PolicyHandle {
    PolicyHandle::noop().with_id(id)
}

fn fake_counts(n: usize, m: usize) -> Vec<EventCount> {
    (0..n)
        .map(|i| EventCount {
            per_event: (0..m).map(|k| ((i * 7 + k * 3) % 11) as f64).collect(),
            policy_id: format!("b{i}"),
            partner_id: format!("a{i}"),
            episodes: 1,
        })
        .collect()
}

#[test]
fn full_size_assembly() {
    let biased: Vec<_> = (0..36).map(|i| handle(format!("b{i}"))).collect();
    let mep: Vec<_> = (0..18).map(|i| handle(format!("m{i}"))).collect();
    let ecs = fake_counts(36, 6);
    let pool = assemble_hsp_pool(&biased, &ecs, &mep, 36, 9).unwrap();
    let count = |p| pool.members.iter().filter(|m| m.provenance == p).count();
    assert_eq!(count(Provenance::Biased), 18);
    assert_eq!(count(Provenance::MepCheckpoint), 18);
    let again = assemble_hsp_pool(&biased, &ecs, &mep, 36, 9).unwrap();
    let ids = |p: &hsp_core::pool::PoolSpec| -> Vec<String> {
        p.members.iter().map(|m| m.policy.id.clone()).collect()
    };
    assert_eq!(ids(&pool), ids(&again));
    assert_eq!(
        assemble_hsp_pool(&biased[..10], &ecs[..10], &mep, 36, 9).unwrap_err(),
        PoolError::InsufficientCandidates {
            side: "biased",
            need: 18,
            have: 10
        }
    );
}

#[test]
fn noop_counts_do_not_depend_on_episode_count() {
    let l = layout("coordination_ring");
    let n = PolicyHandle::noop();
    let one = expected_event_count(&n, &n, &l, 1, 3).unwrap();
    let five = expected_event_count(&n, &n, &l, 5, 3).unwrap();
    assert_eq!(one.per_event, five.per_event);
    assert!(one.per_event.iter().all(|&x| x == 0.0));
}

#[test]
fn monte_carlo_counts_are_self_consistent() {
    let l = layout("coordination_ring");
    let pi = PolicyHandle::scripted(ScriptKind::ALL[0]);
    let q = PolicyHandle::random();
    let n = 1000;
    let a = expected_event_count(&pi, &q, &l, n, 1).unwrap();
    let b = expected_event_count(&pi, &q, &l, n, 2).unwrap();
    // Per-episode spread from a third, independent batch.
    let m = l.num_events();
    let mut sum = vec![0.0; m];
    let mut sq = vec![0.0; m];
    let k = 400;
    for ep in 0..k {
        let mut x = pi.actor();
        let mut y = q.actor();
        let out = play_episode(&l, mix_seed(3, ep), [x.as_mut(), y.as_mut()]);
        for (e, &c) in out.player_events[0].counts()[..m].iter().enumerate() {
            sum[e] += c as f64;
            sq[e] += (c as f64).powi(2);
        }
    }
    for e in 0..m {
        let mean = sum[e] / k as f64;
        let sd = (sq[e] / k as f64 - mean * mean).max(0.0).sqrt();
        let bound = 3.0 * sd * (2.0 / n as f64).sqrt();
        let gap = (a.per_event[e] - b.per_event[e]).abs();
        assert!(gap <= bound + 1e-12, "event {e}: {gap} > {bound}");
    }
}

proptest! {
    #[test]
    fn greedy_matches_reference(ecs in ecs_strategy(), k in 1usize..=5, i0 in 0usize..10) {
        let n = ecs.len();
        let k = k.min(n);
        let i0 = i0 % n;
        let got = greedy_select(&ecs, k, i0).unwrap();
        prop_assert_eq!(&got, &greedy_oracle(&ecs, k, i0));
        let mut sorted = got.clone();
        sorted.sort();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), k);
        prop_assert!(got.iter().all(|&i| i < n));
    }

    #[test]
    fn diversity_matches_pairwise_oracle(ecs in ecs_strategy(), mask in any::<u16>()) {
        let subset: Vec<usize> = (0..ecs.len()).filter(|i| mask >> i & 1 == 1).collect();
        let c = normalization_constants(&ecs);
        let got = event_diversity(&subset, &ecs, &c);
        prop_assert!((got - ed_oracle(&subset, &ecs)).abs() <= 1e-12 * got.abs().max(1.0));
        prop_assert!(got >= 0.0);
        let mut rev = subset.clone();
        rev.reverse();
        prop_assert!((event_diversity(&rev, &ecs, &c) - got).abs() <= 1e-12 * got.abs().max(1.0));
    }

    #[test]
    fn diversity_is_scale_free(ecs in ecs_strategy(), k in 0usize..5, lambda in 0.01f64..100.0) {
        let k = k % ecs[0].len();
        let all: Vec<usize> = (0..ecs.len()).collect();
        let before = event_diversity(&all, &ecs, &normalization_constants(&ecs));
        let mut scaled = ecs.clone();
        for e in &mut scaled {
            e[k] *= lambda;
        }
        let after = event_diversity(&all, &scaled, &normalization_constants(&scaled));
        prop_assert!((before - after).abs() <= 1e-9 * before.max(1.0));
    }

    #[test]
    fn marginal_gain_grows_with_the_set(ecs in ecs_strategy(), order in any::<u64>()) {
        let n = ecs.len();
        prop_assume!(n >= 2);
        let c = normalization_constants(&ecs);
        let cand = (order % n as u64) as usize;
        let rest: Vec<usize> = (0..n).filter(|&i| i != cand).collect();
        let mut prev = 0.0;
        for size in 0..=rest.len() {
            let s = &rest[..size];
            let mut with = s.to_vec();
            with.push(cand);
            let gain = event_diversity(&with, &ecs, &c) - event_diversity(s, &ecs, &c);
            prop_assert!(gain >= prev - 1e-9);
            prev = gain;
        }
    }

    #[test]
    fn event_diff_is_nonnegative_and_shrinks(ecs in ecs_strategy(), extra in prop::collection::vec(0.0f64..10.0, 5)) {
        prop_assume!(ecs.len() >= 2);
        let d = event_diff_from_counts(0, &ecs).unwrap();
        prop_assert!(d >= 0.0);
        let mut more = ecs.clone();
        more.push(extra[..ecs[0].len()].to_vec());
        prop_assert!(event_diff_from_counts(0, &more).unwrap() <= d + 1e-12);
    }
}
