//! Policy classes and training: soft planning on small MDPs, asymmetric
//! self-play under hidden rewards, FCP/MEP baseline populations and the
//! adaptive learner trained against a partner pool.

pub mod checkpoint;
pub mod mlp;
pub mod model;
pub mod policy;
pub mod soft_vi;
pub mod tabular;
pub mod train;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agent::mix_seed;
use crate::engine::Layout;
use crate::rewards::WeightVector;
pub use mlp::{MlpConfig, MlpModel};
pub use model::{History, Model};
pub use policy::{ModelActor, PolicyHandle, PolicyKind, PolicyParams};
pub use soft_vi::{soft_value_iteration, SoftPlanSolution, SoftViError};
pub use tabular::{TabularConfig, TabularModel};
pub use train::{
    curve_to_text, default_workers, sample_partner, CurveRow, ModelSpec, TrainConfig, TrainError,
};

use train::{train_runs, Objective, Plan, Run};

/// Models that can be wrapped into a playable handle.
pub trait IntoPolicy: Model {
    fn into_params(self) -> PolicyParams;
}

impl IntoPolicy for TabularModel {
    fn into_params(self) -> PolicyParams {
        PolicyParams::Tabular(Arc::new(self))
    }
}

impl IntoPolicy for MlpModel {
    fn into_params(self) -> PolicyParams {
        PolicyParams::Parametric(Arc::new(self))
    }
}

#[derive(Clone, Debug)]
pub struct SelfPlayOutcome {
    pub biased: PolicyHandle,
    pub partner: PolicyHandle,
    pub curve: Vec<CurveRow>,
}

/// Trains `pi_w` under the hidden reward `w` together with a task-reward
/// partner `pi_a`. With a zero step budget the fresh models come back
/// unchanged.
pub fn selfplay_train(
    layout: &Arc<Layout>,
    w: &WeightVector,
    cfg: &TrainConfig,
) -> Result<SelfPlayOutcome, TrainError> {
    let id = format!("sp-{:016x}", cfg.seed);
    let objectives = vec![Objective::Hidden(w.clone()), Objective::Task];
    match &cfg.model {
        ModelSpec::Tabular(tc) => {
            let m = TabularModel::new(*tc);
            selfplay_generic(layout, cfg, vec![m.clone(), m], objectives, &id)
        }
        ModelSpec::Mlp(mc) => {
            let models = vec![
                MlpModel::new(layout, *mc, mix_seed(cfg.seed, 1)),
                MlpModel::new(layout, *mc, mix_seed(cfg.seed, 2)),
            ];
            selfplay_generic(layout, cfg, models, objectives, &id)
        }
    }
}

fn selfplay_generic<M: IntoPolicy>(
    layout: &Arc<Layout>,
    cfg: &TrainConfig,
    models: Vec<M>,
    objectives: Vec<Objective>,
    id: &str,
) -> Result<SelfPlayOutcome, TrainError> {
    let mut runs = [Run::new(cfg.seed, models, objectives, Plan::Asymmetric)];
    train_runs(layout, cfg, &mut runs, 0.0)?;
    let [run] = runs;
    let mut models = run.models.into_iter();
    let w = models.next().expect("two learners");
    let a = models.next().expect("two learners");
    Ok(SelfPlayOutcome {
        biased: PolicyHandle::new(format!("{id}-w"), w.into_params()),
        partner: PolicyHandle::new(format!("{id}-a"), a.into_params()),
        curve: run.curve,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum BaselineMethod {
    /// Independent self-play runs.
    Fcp,
    /// A population trained with `-coef · log(mean policy)` added to reward.
    Mep { entropy_coef: f64 },
}

impl BaselineMethod {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineMethod::Fcp => "fcp",
            BaselineMethod::Mep { .. } => "mep",
        }
    }
}

#[derive(Clone, Debug)]
pub struct BaselinePool {
    /// Init, middle and final checkpoint of every run, run-major.
    pub members: Vec<PolicyHandle>,
    pub curves: Vec<Vec<CurveRow>>,
}

/// Seed of run `i` of a population; shared by FCP and MEP so that a zero
/// diversity bonus reproduces FCP exactly.
pub fn run_seed(seed: u64, i: usize) -> u64 {
    mix_seed(seed, 0x0F0F_0000 + i as u64)
}

pub fn build_baseline_pool(
    method: BaselineMethod,
    layout: &Arc<Layout>,
    n_policies: usize,
    cfg: &TrainConfig,
) -> Result<BaselinePool, TrainError> {
    if n_policies == 0 {
        return Err(TrainError::InvalidConfig(
            "n_policies must be at least 1".into(),
        ));
    }
    match &cfg.model {
        ModelSpec::Tabular(tc) => {
            let tc = *tc;
            baseline_generic(method, layout, n_policies, cfg, |_| TabularModel::new(tc))
        }
        ModelSpec::Mlp(mc) => {
            let mc = *mc;
            baseline_generic(method, layout, n_policies, cfg, |s| {
                MlpModel::new(layout, mc, s)
            })
        }
    }
}

fn baseline_generic<M: IntoPolicy>(
    method: BaselineMethod,
    layout: &Arc<Layout>,
    n: usize,
    cfg: &TrainConfig,
    init: impl Fn(u64) -> M,
) -> Result<BaselinePool, TrainError> {
    let prefix = method.name();
    let fresh = |i: usize| {
        let s = run_seed(cfg.seed, i);
        Run::new(s, vec![init(s)], vec![Objective::Task], Plan::SelfPlay)
    };
    let mut done: Vec<(M, Run<M>)> = Vec::with_capacity(n);
    match method {
        BaselineMethod::Fcp => {
            for i in 0..n {
                let mut runs = [fresh(i)];
                let start = runs[0].models[0].clone();
                train_runs(layout, cfg, &mut runs, 0.0)?;
                let [run] = runs;
                done.push((start, run));
            }
        }
        BaselineMethod::Mep { entropy_coef } => {
            let mut runs: Vec<Run<M>> = (0..n).map(fresh).collect();
            let starts: Vec<M> = runs.iter().map(|r| r.models[0].clone()).collect();
            train_runs(layout, cfg, &mut runs, entropy_coef)?;
            done.extend(starts.into_iter().zip(runs));
        }
    }
    let mut members = Vec::with_capacity(3 * n);
    let mut curves = Vec::with_capacity(n);
    for (i, (start, run)) in done.into_iter().enumerate() {
        let fin = run.models.into_iter().next().expect("one learner");
        let mid = run.midpoint.unwrap_or_else(|| start.clone());
        let tag = format!("{prefix}-{:08x}-{i}", cfg.seed as u32);
        members.push(PolicyHandle::new(
            format!("{tag}-init"),
            start.into_params(),
        ));
        members.push(PolicyHandle::new(format!("{tag}-mid"), mid.into_params()));
        members.push(PolicyHandle::new(format!("{tag}-final"), fin.into_params()));
        curves.push(run.curve);
    }
    Ok(BaselinePool { members, curves })
}

#[derive(Clone, Debug)]
pub struct AdaptiveOutcome {
    pub policy: PolicyHandle,
    pub curve: Vec<CurveRow>,
}

/// Trains the history-conditioned policy against uniformly drawn pool
/// members; the critic also sees the partner's pool index.
pub fn train_adaptive(
    pool: &[PolicyHandle],
    layout: &Arc<Layout>,
    cfg: &TrainConfig,
) -> Result<AdaptiveOutcome, TrainError> {
    if pool.is_empty() {
        return Err(TrainError::EmptyPool);
    }
    let pool = Arc::new(pool.to_vec());
    let id = format!("adaptive-{:016x}", cfg.seed);
    match &cfg.model {
        ModelSpec::Tabular(tc) => {
            let m = TabularModel::new(TabularConfig {
                history: true,
                ..*tc
            });
            adaptive_generic(layout, cfg, m, pool, id)
        }
        ModelSpec::Mlp(mc) => {
            let mc = MlpConfig {
                history: true,
                partners: pool.len(),
                ..*mc
            };
            let m = MlpModel::new(layout, mc, mix_seed(cfg.seed, 3));
            adaptive_generic(layout, cfg, m, pool, id)
        }
    }
}

fn adaptive_generic<M: IntoPolicy>(
    layout: &Arc<Layout>,
    cfg: &TrainConfig,
    model: M,
    pool: Arc<Vec<PolicyHandle>>,
    id: String,
) -> Result<AdaptiveOutcome, TrainError> {
    let mut runs = [Run::new(
        cfg.seed,
        vec![model],
        vec![Objective::Task],
        Plan::Adaptive(pool),
    )];
    train_runs(layout, cfg, &mut runs, 0.0)?;
    let [run] = runs;
    let m = run.models.into_iter().next().expect("one learner");
    Ok(AdaptiveOutcome {
        policy: PolicyHandle::new(id, m.into_params()),
        curve: run.curve,
    })
}
