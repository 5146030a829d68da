//! Clipped-surrogate actor-critic with GAE over parallel rollouts.
//!
//! Several independent runs can advance in lockstep (the population case).
//! Episode seeds derive from the run seed and a global episode counter, so
//! rollouts, and therefore parameters, do not depend on the worker count.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::MlpConfig;
use super::model::{entropy, sample_action, softmax, History, Model};
use super::policy::PolicyHandle;
use super::tabular::TabularConfig;
use crate::agent::{mix_seed, seat_seed, Actor};
use crate::engine::{apply, reset, Action, Layout, NUM_ACTIONS};
use crate::rewards::{hidden_reward, ShapingSchedule, WeightVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("partner pool is empty")]
    EmptyPool,
    #[error("weight vector has {found} entries, layout has {expected} events")]
    WeightDimension { expected: usize, found: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    Tabular(TabularConfig),
    Mlp(MlpConfig),
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Tabular(TabularConfig::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Environment steps (ticks) across all rollouts of one run.
    pub total_steps: u64,
    pub rollout_workers: usize,
    pub batch_episodes: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub entropy_coef: f64,
    pub learning_rate: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub shaping: ShapingSchedule,
    /// Also add shaping to a hidden-reward learner's return.
    pub shape_hidden: bool,
    pub model: ModelSpec,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            total_steps: 1_000_000,
            rollout_workers: default_workers(),
            batch_episodes: 32,
            gamma: 0.99,
            gae_lambda: 0.95,
            entropy_coef: 0.01,
            learning_rate: 0.1,
            clip: 0.2,
            epochs: 4,
            minibatch: 2048,
            shaping: ShapingSchedule::none(),
            shape_hidden: false,
            model: ModelSpec::default(),
            seed: 0,
        }
    }
}

/// Worker count from `HSP_WORKERS`, else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var("HSP_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.rollout_workers == 0 {
            return bad("rollout_workers must be positive");
        }
        if self.batch_episodes == 0 {
            return bad("batch_episodes must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.gae_lambda >= 0.0 && self.gae_lambda <= 1.0) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0) || !(self.clip > 0.0) || !(self.entropy_coef >= 0.0) {
            return bad("learning_rate and clip must be positive, entropy_coef non-negative");
        }
        if self.epochs == 0 || self.minibatch == 0 {
            return bad("epochs and minibatch must be positive");
        }
        Ok(())
    }
}

/// One row of a training curve, averaged over the update's episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: u64,
    /// Task reward per episode, without shaping.
    pub env_return: f64,
    /// Return of the first learner under its own objective, without shaping.
    pub hidden_return: f64,
    /// Annealed shaping (and diversity bonus) received by the first learner.
    pub bonus_return: f64,
    pub entropy: f64,
}

pub fn curve_to_text(rows: &[CurveRow]) -> String {
    let mut s = String::from("step\tenv_return\thidden_return\tbonus_return\tentropy\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            r.step, r.env_return, r.hidden_return, r.bonus_return, r.entropy
        );
    }
    s
}

#[derive(Clone, Debug)]
pub(crate) enum Objective {
    Task,
    Hidden(WeightVector),
}

#[derive(Clone, Debug)]
pub(crate) enum Plan {
    /// One learner in both seats.
    SelfPlay,
    /// Learner 0 (hidden objective) and learner 1 (task) in random seats.
    Asymmetric,
    /// Learner 0 against a uniformly drawn frozen partner in a random seat.
    Adaptive(Arc<Vec<PolicyHandle>>),
}

pub(crate) struct Run<M: Model> {
    pub seed: u64,
    pub models: Vec<M>,
    pub objectives: Vec<Objective>,
    pub plan: Plan,
    pub curve: Vec<CurveRow>,
    /// Learner-0 parameters at the first update boundary past half the budget.
    pub midpoint: Option<M>,
}

impl<M: Model> Run<M> {
    pub fn new(seed: u64, models: Vec<M>, objectives: Vec<Objective>, plan: Plan) -> Self {
        Run {
            seed,
            models,
            objectives,
            plan,
            curve: Vec::new(),
            midpoint: None,
        }
    }
}

#[derive(Clone, Copy)]
enum Seat {
    Learner { idx: usize, partner: Option<usize> },
    Frozen(usize),
}

/// Seat of the learner being trained, derived from the episode seed.
pub fn episode_seat(episode_seed: u64) -> usize {
    (mix_seed(episode_seed, 0x5EA7) & 1) as usize
}

/// Pool index of the partner for an episode, uniform over `n`.
pub fn sample_partner(episode_seed: u64, n: usize) -> usize {
    ChaCha8Rng::seed_from_u64(mix_seed(episode_seed, 0xFA57)).gen_range(0..n)
}

fn seats_for(plan: &Plan, episode_seed: u64) -> [Seat; 2] {
    let s = episode_seat(episode_seed);
    let mut seats = [Seat::Frozen(0); 2];
    match plan {
        Plan::SelfPlay => {
            seats = [
                Seat::Learner {
                    idx: 0,
                    partner: None,
                },
                Seat::Learner {
                    idx: 0,
                    partner: None,
                },
            ];
        }
        Plan::Asymmetric => {
            seats[s] = Seat::Learner {
                idx: 0,
                partner: None,
            };
            seats[1 - s] = Seat::Learner {
                idx: 1,
                partner: None,
            };
        }
        Plan::Adaptive(pool) => {
            let p = sample_partner(episode_seed, pool.len());
            seats[s] = Seat::Learner {
                idx: 0,
                partner: Some(p),
            };
            seats[1 - s] = Seat::Frozen(p);
        }
    }
    seats
}

struct Sample<I> {
    x: I,
    partner: Option<usize>,
    action: u8,
    logp: f64,
    value: f64,
    reward: f64,
}

struct Sequence<I> {
    learner: usize,
    samples: Vec<Sample<I>>,
    objective_return: f64,
    bonus_return: f64,
    entropy: f64,
}

struct Episode<I> {
    run: usize,
    score: f64,
    seqs: Vec<Sequence<I>>,
}

struct Ctx<'a, M: Model> {
    layout: &'a Arc<Layout>,
    shaping: &'a ShapingSchedule,
    shape_hidden: bool,
    shaping_t: u64,
    /// Learner-0 models of every run, for the population-entropy bonus.
    population: &'a [M],
    mep_coef: f64,
}

fn rollout<M: Model>(
    ctx: &Ctx<'_, M>,
    run_idx: usize,
    models: &[M],
    objectives: &[Objective],
    plan: &Plan,
    episode_seed: u64,
) -> Episode<M::Input> {
    let seats = seats_for(plan, episode_seed);
    let mut frozen: [Option<Box<dyn Actor>>; 2] = [None, None];
    for (i, seat) in seats.iter().enumerate() {
        if let (Seat::Frozen(p), Plan::Adaptive(pool)) = (seat, plan) {
            let mut a = pool[*p].actor();
            a.reset(seat_seed(episode_seed, i));
            frozen[i] = Some(a);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(episode_seed, 0xAC7));
    let mut state = reset(ctx.layout, episode_seed);
    let mut history = [History::default(); 2];
    let mut seqs: Vec<Option<Sequence<M::Input>>> = seats
        .iter()
        .map(|s| match s {
            Seat::Learner { idx, .. } => Some(Sequence {
                learner: *idx,
                samples: Vec::with_capacity(ctx.layout.episode_length as usize),
                objective_return: 0.0,
                bonus_return: 0.0,
                entropy: 0.0,
            }),
            Seat::Frozen(_) => None,
        })
        .collect();
    let shaping_factor = ctx.shaping.factor(ctx.shaping_t);
    while !state.is_done() {
        let mut acts = [Action::NoOp; 2];
        let mut bonus = [0.0; 2];
        for seat in 0..2 {
            match seats[seat] {
                Seat::Learner { idx, partner } => {
                    let m = &models[idx];
                    let x = m.encode(&state, seat, &history[seat]);
                    let p = softmax(&m.logits(&x));
                    let a = sample_action(&p, &mut rng);
                    if ctx.mep_coef > 0.0 && idx == 0 {
                        let mean: f64 = ctx
                            .population
                            .iter()
                            .map(|pm| softmax(&pm.logits(&x))[a])
                            .sum::<f64>()
                            / ctx.population.len() as f64;
                        bonus[seat] = -ctx.mep_coef * mean.max(1e-12).ln();
                    }
                    let value = m.value(&x, partner);
                    let seq = seqs[seat].as_mut().expect("learner seat");
                    seq.entropy += entropy(&p);
                    seq.samples.push(Sample {
                        x,
                        partner,
                        action: a as u8,
                        logp: p[a].ln(),
                        value,
                        reward: 0.0,
                    });
                    acts[seat] = Action::ALL[a];
                }
                Seat::Frozen(_) => {
                    acts[seat] = frozen[seat]
                        .as_mut()
                        .expect("frozen seat")
                        .act(&state, seat);
                }
            }
        }
        let prev = state.clone();
        let info = apply(&mut state, acts).expect("rollout stops at episode end");
        for seat in 0..2 {
            history[seat].update(&prev, &state, seat);
            let Some(seq) = seqs[seat].as_mut() else {
                continue;
            };
            let events = &info.player_events[seat];
            let task = info.task_reward as f64;
            let (base, shaped) = match &objectives[seq.learner] {
                Objective::Task => (task, true),
                Objective::Hidden(w) => (
                    hidden_reward(events, task, w).expect("weights checked at start"),
                    ctx.shape_hidden,
                ),
            };
            let mut extra = bonus[seat];
            if shaped {
                extra += shaping_factor * ctx.shaping.raw_bonus(events);
            }
            seq.objective_return += base;
            seq.bonus_return += extra;
            seq.samples.last_mut().expect("sample pushed").reward = base + extra;
        }
    }
    Episode {
        run: run_idx,
        score: state.cumulative_reward as f64,
        seqs: seqs.into_iter().flatten().collect(),
    }
}

/// Per-sample advantages and returns for one sequence; the episode end is
/// terminal.
fn gae<I>(samples: &[Sample<I>], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len();
    let mut adv = vec![0.0; n];
    let mut next_value = 0.0;
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let delta = samples[t].reward + gamma * next_value - samples[t].value;
        acc = delta + gamma * lambda * acc;
        adv[t] = acc;
        next_value = samples[t].value;
    }
    let ret = adv.iter().zip(samples).map(|(a, s)| a + s.value).collect();
    (adv, ret)
}

/// Clipped-surrogate gradient in logit space plus the entropy bonus
/// gradient, for one sample.
pub fn surrogate_grad(
    logits: &[f64; NUM_ACTIONS],
    action: usize,
    old_logp: f64,
    advantage: f64,
    clip: f64,
    entropy_coef: f64,
) -> [f64; NUM_ACTIONS] {
    let p = softmax(logits);
    let ratio = (p[action].ln() - old_logp).exp();
    let clipped =
        (advantage > 0.0 && ratio > 1.0 + clip) || (advantage < 0.0 && ratio < 1.0 - clip);
    let h = entropy(&p);
    let mut g = [0.0; NUM_ACTIONS];
    for i in 0..NUM_ACTIONS {
        if !clipped {
            let onehot = if i == action { 1.0 } else { 0.0 };
            g[i] += ratio * advantage * (onehot - p[i]);
        }
        if p[i] > 0.0 {
            g[i] -= entropy_coef * p[i] * (p[i].ln() + h);
        }
    }
    g
}

fn update_learner<M: Model>(
    model: &mut M,
    samples: &[(&Sample<M::Input>, f64, f64)],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) {
    if samples.is_empty() {
        return;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.1 - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch) {
            let mut grad = model.zero_grad();
            for &i in chunk {
                let (s, adv, ret) = samples[i];
                let a = (adv - mean) / std;
                let dl = surrogate_grad(
                    &model.logits(&s.x),
                    s.action as usize,
                    s.logp,
                    a,
                    cfg.clip,
                    cfg.entropy_coef,
                );
                let dv = ret - model.value(&s.x, s.partner);
                model.accumulate(&s.x, s.partner, &dl, dv, &mut grad);
            }
            model.apply(&grad, cfg.learning_rate, chunk.len());
        }
    }
}

/// Advances every run until each has consumed `cfg.total_steps` ticks.
/// `mep_coef > 0` adds the population-entropy bonus over the runs' first
/// learners.
pub(crate) fn train_runs<M: Model>(
    layout: &Arc<Layout>,
    cfg: &TrainConfig,
    runs: &mut [Run<M>],
    mep_coef: f64,
) -> Result<(), TrainError> {
    cfg.validate()?;
    for run in runs.iter() {
        for obj in &run.objectives {
            if let Objective::Hidden(w) = obj {
                if w.len() != layout.num_events() {
                    return Err(TrainError::WeightDimension {
                        expected: layout.num_events(),
                        found: w.len(),
                    });
                }
            }
        }
        if let Plan::Adaptive(pool) = &run.plan {
            if pool.is_empty() {
                return Err(TrainError::EmptyPool);
            }
        }
    }
    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.rollout_workers)
        .build()
        .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
    let per_update = cfg.batch_episodes as u64 * layout.episode_length as u64;
    let mut steps = 0u64;
    let mut update = 0u64;
    while steps < cfg.total_steps {
        let population: Vec<M> = runs.iter().map(|r| r.models[0].clone()).collect();
        let ctx = Ctx {
            layout,
            shaping: &cfg.shaping,
            shape_hidden: cfg.shape_hidden,
            shaping_t: steps,
            population: &population,
            mep_coef,
        };
        let jobs: Vec<(usize, u64)> = (0..runs.len())
            .flat_map(|r| {
                (0..cfg.batch_episodes as u64)
                    .map(move |e| (r, update * cfg.batch_episodes as u64 + e))
            })
            .collect();
        let runs_ref: &[Run<M>] = runs;
        let episodes: Vec<Episode<M::Input>> = threads.install(|| {
            jobs.par_iter()
                .map(|&(r, e)| {
                    let run = &runs_ref[r];
                    rollout(
                        &ctx,
                        r,
                        &run.models,
                        &run.objectives,
                        &run.plan,
                        mix_seed(run.seed, e),
                    )
                })
                .collect()
        });
        steps += per_update;
        for (r, run) in runs.iter_mut().enumerate() {
            let eps: Vec<&Episode<M::Input>> = episodes.iter().filter(|e| e.run == r).collect();
            let mut row = CurveRow {
                step: steps,
                env_return: eps.iter().map(|e| e.score).sum::<f64>() / eps.len() as f64,
                hidden_return: 0.0,
                bonus_return: 0.0,
                entropy: 0.0,
            };
            let first: Vec<&Sequence<M::Input>> = eps
                .iter()
                .flat_map(|e| e.seqs.iter())
                .filter(|s| s.learner == 0)
                .collect();
            if !first.is_empty() {
                let k = first.len() as f64;
                row.hidden_return = first.iter().map(|s| s.objective_return).sum::<f64>() / k;
                row.bonus_return = first.iter().map(|s| s.bonus_return).sum::<f64>() / k;
                let ticks: usize = first.iter().map(|s| s.samples.len()).sum();
                row.entropy = first.iter().map(|s| s.entropy).sum::<f64>() / ticks.max(1) as f64;
            }
            run.curve.push(row);

            for learner in 0..run.models.len() {
                let mut batch = Vec::new();
                for seq in eps
                    .iter()
                    .flat_map(|e| e.seqs.iter())
                    .filter(|s| s.learner == learner)
                {
                    let (adv, ret) = gae(&seq.samples, cfg.gamma, cfg.gae_lambda);
                    for (i, s) in seq.samples.iter().enumerate() {
                        batch.push((s, adv[i], ret[i]));
                    }
                }
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(
                    mix_seed(run.seed, 0x0B7E),
                    update * 16 + learner as u64,
                ));
                update_learner(&mut run.models[learner], &batch, cfg, &mut rng);
            }
            if run.midpoint.is_none() && steps * 2 >= cfg.total_steps {
                run.midpoint = Some(run.models[0].clone());
            }
        }
        update += 1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gae_with_zero_lambda_is_one_step_td() {
        let s = |r: f64, v: f64| Sample {
            x: (),
            partner: None,
            action: 0,
            logp: 0.0,
            value: v,
            reward: r,
        };
        let samples = vec![s(1.0, 0.5), s(2.0, 0.25)];
        let (adv, ret) = gae(&samples, 0.9, 0.0);
        assert!((adv[0] - (1.0 + 0.9 * 0.25 - 0.5)).abs() < 1e-12);
        assert!((adv[1] - (2.0 - 0.25)).abs() < 1e-12);
        assert!((ret[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn clipping_zeroes_the_surrogate_term() {
        let logits = [2.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let p = softmax(&logits);
        let old = (p[0] / 2.0).ln();
        let g = surrogate_grad(&logits, 0, old, 1.0, 0.2, 0.0);
        assert_eq!(g, [0.0; NUM_ACTIONS]);
        let g = surrogate_grad(&logits, 0, p[0].ln(), 1.0, 0.2, 0.0);
        assert!(g[0] > 0.0 && g[1] < 0.0);
    }

    #[test]
    fn partner_sampling_is_roughly_uniform() {
        let n = 4;
        let mut counts = [0usize; 4];
        for e in 0..4000u64 {
            counts[sample_partner(mix_seed(9, e), n)] += 1;
        }
        let sigma = (4000.0f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - 1000.0).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.gamma = 1.0;
        assert!(matches!(c.validate(), Err(TrainError::InvalidConfig(_))));
    }
}
