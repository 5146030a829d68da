//! The `hsp` command line: every pipeline stage as a subcommand writing
//! checkpoints and a `manifest.json` into its output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::mix_seed;
use crate::engine::{resolve_layout, Layout, Trajectory};
use crate::evalharness::{crossplay, render_table, BoldRule, MatchupResult};
use crate::learners::checkpoint::Checkpoint;
use crate::learners::{
    build_baseline_pool, curve_to_text, selfplay_train, train_adaptive, BaselineMethod, MlpConfig,
    ModelSpec, PolicyHandle, TabularConfig, TrainConfig,
};
use crate::playserver::{AppState, ServerConfig, SessionStore, TickPolicy};
use crate::pool::{draw_start, expected_event_count, greedy_select, EventCount};
use crate::rewards::{sample_weight_vector, WeightGrid};
use crate::scripted::ScriptKind;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Parser, Debug)]
#[command(name = "hsp", version, about = "Hidden-utility self-play pipeline")]
pub struct Cli {
    /// Directory that relative paths resolve against.
    #[arg(long, global = true, default_value = ".")]
    pub workspace: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Tabular,
    Mlp,
}

/// Training overrides; each one beats the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct TrainFlags {
    /// TOML file with training settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<u64>,
    /// Rollout workers (defaults to HSP_WORKERS or the core count).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_episodes: Option<usize>,
    #[arg(long)]
    pub entropy_coef: Option<f64>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Fcp,
    Mep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Seats {
    Both,
    #[value(name = "1")]
    First,
    #[value(name = "2")]
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BoldArg {
    None,
    Absolute,
    Std,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample hidden rewards and train one biased policy per sample.
    TrainBiased {
        #[arg(long)]
        layout: String,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// TOML weight grid; the layout's built-in grid otherwise.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, default_value = "biased")]
        out: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Train an FCP or MEP population and keep init/middle/final checkpoints.
    BuildBaselinePool {
        #[arg(long)]
        layout: String,
        #[arg(long, value_enum, default_value = "mep")]
        method: MethodArg,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.01)]
        population_entropy_coef: f64,
        #[arg(long, default_value = "baseline")]
        out: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Greedily pick `k` biased candidates by event diversity, optionally
    /// topping up with baseline checkpoints.
    FilterPool {
        /// Manifest written by train-biased.
        #[arg(long)]
        biased: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Manifest written by build-baseline-pool.
        #[arg(long)]
        mep: Option<PathBuf>,
        /// Baseline members to append (defaults to `k` when --mep is given).
        #[arg(long)]
        mep_count: Option<usize>,
        #[arg(long, default_value = "pool")]
        out: PathBuf,
    },
    /// Train the adaptive policy against a filtered pool.
    TrainAdaptive {
        /// Manifest written by filter-pool.
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        layout: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "adaptive")]
        out: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Cross-play a checkpoint with partners.
    Eval {
        /// Checkpoint file or policy spec.
        #[arg(long)]
        policy: String,
        /// `noop`, `random`, `script:<name>`, a checkpoint or a manifest;
        /// repeatable.
        #[arg(long, required = true)]
        partner: Vec<String>,
        #[arg(long)]
        layout: String,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long, value_enum, default_value = "both")]
        seats: Seats,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "absolute")]
        bold: BoldArg,
        #[arg(long, default_value_t = 5.0)]
        bold_threshold: f64,
        #[arg(long, default_value = "eval")]
        out: PathBuf,
    },
    /// Host the human study over WebSocket.
    Serve {
        #[arg(long)]
        layout: String,
        /// Four policy specs, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 4)]
        roster: Vec<String>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, default_value = "sessions")]
        store: PathBuf,
        #[arg(long, default_value_t = 150)]
        tick_ms: u64,
        #[arg(long, default_value_t = 7)]
        ai_idle_steps: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-simulate a trajectory log and compare it byte for byte.
    Replay { trajectory: PathBuf },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::TrainBiased { .. } => "train-biased",
            Command::BuildBaselinePool { .. } => "build-baseline-pool",
            Command::FilterPool { .. } => "filter-pool",
            Command::TrainAdaptive { .. } => "train-adaptive",
            Command::Eval { .. } => "eval",
            Command::Serve { .. } => "serve",
            Command::Replay { .. } => "replay",
        }
    }
}

/// One checkpoint listed by a manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestMember {
    pub id: String,
    /// Relative to the workspace.
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_reward_multiplier: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    /// SHA-256 over the command, config, seeds and input file contents.
    pub input_hash: String,
    /// Every file this run wrote, relative to the workspace.
    pub outputs: Vec<String>,
    #[serde(default)]
    pub members: Vec<ManifestMember>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<RunManifest> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Resolves paths and policies relative to the workspace.
struct Ctx {
    workspace: PathBuf,
}

impl Ctx {
    fn abs(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.workspace.join(p)
        }
    }

    fn rel(&self, p: &Path) -> String {
        p.strip_prefix(&self.workspace)
            .unwrap_or(p)
            .to_string_lossy()
            .into_owned()
    }

    fn layout(&self, spec: &str) -> Result<Arc<Layout>> {
        let layout = match resolve_layout(spec) {
            Ok(l) => l,
            Err(_) => Layout::load(&self.abs(Path::new(spec)))?,
        };
        Ok(Arc::new(layout))
    }

    fn out_dir(&self, out: &Path) -> Result<PathBuf> {
        let dir = self.abs(out);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    /// A single policy: `noop`, `random`, `script:<name>` or a checkpoint.
    fn policy(&self, spec: &str) -> Result<PolicyHandle> {
        match spec {
            "noop" => return Ok(PolicyHandle::noop()),
            "random" => return Ok(PolicyHandle::random()),
            _ => {}
        }
        if let Some(name) = spec.strip_prefix("script:") {
            let kind = ScriptKind::ALL
                .iter()
                .copied()
                .find(|k| k.name() == name)
                .ok_or_else(|| anyhow!("unknown script `{name}`"))?;
            return Ok(PolicyHandle::scripted(kind));
        }
        Ok(Checkpoint::load(&self.abs(Path::new(spec)))?.policy)
    }

    /// Like `policy`, but a manifest expands to all of its members.
    fn policies(&self, spec: &str) -> Result<Vec<PolicyHandle>> {
        if spec.ends_with(".json") {
            let m = RunManifest::load(&self.abs(Path::new(spec)))?;
            return m.members.iter().map(|mem| self.policy(&mem.path)).collect();
        }
        Ok(vec![self.policy(spec)?])
    }

    fn hash_file(&self, h: &mut Sha256, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
        Ok(())
    }
}

/// Defaults, then the TOML file, then flags.
pub fn resolve_train_config(ws: &Path, flags: &TrainFlags, seed: u64) -> Result<TrainConfig> {
    let mut cfg = match &flags.config {
        Some(p) => {
            let p = if p.is_absolute() {
                p.clone()
            } else {
                ws.join(p)
            };
            let text =
                fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<TrainConfig>(&text)
                .with_context(|| format!("parsing {}", p.display()))?
        }
        None => TrainConfig::default(),
    };
    cfg.seed = seed;
    if let Some(v) = flags.steps {
        cfg.total_steps = v;
    }
    if let Some(v) = flags.workers {
        cfg.rollout_workers = v;
    }
    if let Some(v) = flags.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = flags.batch_episodes {
        cfg.batch_episodes = v;
    }
    if let Some(v) = flags.entropy_coef {
        cfg.entropy_coef = v;
    }
    match flags.model {
        Some(ModelArg::Tabular) if !matches!(cfg.model, ModelSpec::Tabular(_)) => {
            cfg.model = ModelSpec::Tabular(TabularConfig::default())
        }
        Some(ModelArg::Mlp) if !matches!(cfg.model, ModelSpec::Mlp(_)) => {
            cfg.model = ModelSpec::Mlp(MlpConfig::default())
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Config snapshot for manifests. The worker count only changes speed,
/// so it is left out to keep manifests comparable across machines.
fn config_value(cfg: &TrainConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Some(o) = v.as_object_mut() {
        o.remove("rollout_workers");
    }
    v
}

fn input_hash(
    command: &str,
    config: &serde_json::Value,
    seeds: &[u64],
    extra: impl FnOnce(&mut Sha256) -> Result<()>,
) -> Result<String> {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update(serde_json::to_vec(config)?);
    for s in seeds {
        h.update(s.to_le_bytes());
    }
    extra(&mut h)?;
    Ok(hex::encode(h.finalize()))
}

fn write_manifest(dir: &Path, ctx: &Ctx, mut m: RunManifest) -> Result<RunManifest> {
    let path = dir.join(MANIFEST_FILE);
    m.outputs.push(ctx.rel(&path));
    fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(m)
}

fn save_policy(
    dir: &Path,
    ctx: &Ctx,
    policy: &PolicyHandle,
    cfg: Option<&TrainConfig>,
    meta: BTreeMap<String, String>,
    outputs: &mut Vec<String>,
) -> Result<String> {
    let path = dir.join(format!("{}.ckpt", policy.id));
    // Keep checkpoints byte-identical regardless of the worker count.
    let cfg = cfg.map(|c| TrainConfig {
        rollout_workers: 1,
        ..c.clone()
    });
    let mut ck = Checkpoint::new(policy.clone(), cfg.as_ref());
    ck.meta = meta;
    ck.save(&path)?;
    let rel = ctx.rel(&path);
    outputs.push(rel.clone());
    Ok(rel)
}

fn write_text(
    dir: &Path,
    ctx: &Ctx,
    name: &str,
    text: &str,
    outputs: &mut Vec<String>,
) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text)?;
    outputs.push(ctx.rel(&path));
    Ok(())
}

/// Runs a parsed command and returns the manifest it wrote, if any.
pub fn run(cli: Cli) -> Result<Option<RunManifest>> {
    let ctx = Ctx {
        workspace: cli.workspace.clone(),
    };
    let name = cli.command.name();
    match cli.command {
        Command::TrainBiased {
            layout,
            n,
            seed,
            grid,
            out,
            train,
        } => {
            let l = ctx.layout(&layout)?;
            let cat = l.event_catalogue();
            let grid = match &grid {
                Some(p) => WeightGrid::from_toml(cat, &fs::read_to_string(ctx.abs(p))?)?,
                None => WeightGrid::preset_for(&l.name, cat)?,
            };
            let base = resolve_train_config(&ctx.workspace, &train, seed)?;
            let dir = ctx.out_dir(&out)?;
            let seeds: Vec<u64> = (0..n as u64).map(|i| mix_seed(seed, i)).collect();
            let mut outputs = Vec::new();
            let mut members = Vec::new();
            for &s in &seeds {
                let w = sample_weight_vector(&grid, s)?;
                let cfg = TrainConfig {
                    seed: s,
                    ..base.clone()
                };
                let res = selfplay_train(&l, &w, &cfg)?;
                let meta = BTreeMap::from([
                    ("weight_seed".to_string(), s.to_string()),
                    ("layout".to_string(), l.name.clone()),
                ]);
                let path = save_policy(
                    &dir,
                    &ctx,
                    &res.biased,
                    Some(&cfg),
                    meta.clone(),
                    &mut outputs,
                )?;
                let partner =
                    save_policy(&dir, &ctx, &res.partner, Some(&cfg), meta, &mut outputs)?;
                write_text(
                    &dir,
                    &ctx,
                    &format!("{}.curve.tsv", res.biased.id),
                    &curve_to_text(&res.curve),
                    &mut outputs,
                )?;
                members.push(ManifestMember {
                    id: res.biased.id.clone(),
                    path,
                    partner_path: Some(partner),
                    provenance: Some("biased".into()),
                    weight_seed: Some(s),
                    weights: Some(w.weights.clone()),
                    order_reward_multiplier: Some(w.order_reward_multiplier),
                });
            }
            let mut config = config_value(&base);
            config["layout"] = l.name.clone().into();
            config["grid"] = grid.to_toml().into();
            let hash = input_hash(name, &config, &seeds, |h| {
                h.update(l.source().as_bytes());
                Ok(())
            })?;
            let m = RunManifest {
                command: name.into(),
                config,
                seeds,
                input_hash: hash,
                outputs,
                members,
            };
            Ok(Some(write_manifest(&dir, &ctx, m)?))
        }
        Command::BuildBaselinePool {
            layout,
            method,
            n,
            seed,
            population_entropy_coef,
            out,
            train,
        } => {
            let l = ctx.layout(&layout)?;
            let cfg = resolve_train_config(&ctx.workspace, &train, seed)?;
            let method = match method {
                MethodArg::Fcp => BaselineMethod::Fcp,
                MethodArg::Mep => BaselineMethod::Mep {
                    entropy_coef: population_entropy_coef,
                },
            };
            let dir = ctx.out_dir(&out)?;
            let pool = build_baseline_pool(method, &l, n, &cfg)?;
            let mut outputs = Vec::new();
            let mut members = Vec::new();
            for p in &pool.members {
                let path = save_policy(&dir, &ctx, p, Some(&cfg), BTreeMap::new(), &mut outputs)?;
                members.push(ManifestMember {
                    id: p.id.clone(),
                    path,
                    partner_path: None,
                    provenance: Some(method.name().into()),
                    weight_seed: None,
                    weights: None,
                    order_reward_multiplier: None,
                });
            }
            for (i, c) in pool.curves.iter().enumerate() {
                write_text(
                    &dir,
                    &ctx,
                    &format!("run-{i}.curve.tsv"),
                    &curve_to_text(c),
                    &mut outputs,
                )?;
            }
            let mut config = config_value(&cfg);
            config["layout"] = l.name.clone().into();
            config["method"] = serde_json::to_value(method)?;
            config["n"] = n.into();
            let hash = input_hash(name, &config, &[seed], |h| {
                h.update(l.source().as_bytes());
                Ok(())
            })?;
            let m = RunManifest {
                command: name.into(),
                config,
                seeds: vec![seed],
                input_hash: hash,
                outputs,
                members,
            };
            Ok(Some(write_manifest(&dir, &ctx, m)?))
        }
        Command::FilterPool {
            biased,
            k,
            episodes,
            seed,
            mep,
            mep_count,
            out,
        } => {
            let bm = RunManifest::load(&ctx.abs(&biased))?;
            let layout_name = bm.config["layout"]
                .as_str()
                .ok_or_else(|| anyhow!("biased manifest lacks a layout"))?
                .to_string();
            let l = ctx.layout(&layout_name)?;
            let mut ecs = Vec::with_capacity(bm.members.len());
            for mem in &bm.members {
                let pi = ctx.policy(&mem.path)?;
                let partner = match &mem.partner_path {
                    Some(p) => ctx.policy(p)?,
                    None => bail!("biased member `{}` has no partner checkpoint", mem.id),
                };
                ecs.push(expected_event_count(&pi, &partner, &l, episodes, seed)?);
            }
            let start = draw_start(bm.members.len(), seed);
            let selected = greedy_select(&ecs, k, start)?;
            let mut members: Vec<ManifestMember> =
                selected.iter().map(|&i| bm.members[i].clone()).collect();
            let mut inputs = vec![ctx.abs(&biased)];
            if let Some(mp) = &mep {
                let mm = RunManifest::load(&ctx.abs(mp))?;
                let count = mep_count.unwrap_or(k);
                if mm.members.len() < count {
                    bail!(
                        "baseline manifest has {} members, need {count}",
                        mm.members.len()
                    );
                }
                members.extend(mm.members[..count].iter().cloned());
                inputs.push(ctx.abs(mp));
            }
            let mut seen = std::collections::HashSet::new();
            if let Some(dup) = members.iter().find(|m| !seen.insert(m.id.clone())) {
                bail!(crate::pool::PoolError::DuplicateId(dup.id.clone()));
            }
            let dir = ctx.out_dir(&out)?;
            let mut outputs = Vec::new();
            let ec_rows: Vec<&EventCount> = ecs.iter().collect();
            write_text(
                &dir,
                &ctx,
                "event_counts.json",
                &serde_json::to_string_pretty(&ec_rows)?,
                &mut outputs,
            )?;
            let config = serde_json::json!({
                "layout": layout_name,
                "k": k,
                "episodes": episodes,
                "start": start,
                "selected": selected,
                "mep_count": mep.as_ref().map(|_| mep_count.unwrap_or(k)),
            });
            let hash = input_hash(name, &config, &[seed], |h| {
                for p in &inputs {
                    ctx.hash_file(h, p)?;
                }
                Ok(())
            })?;
            let m = RunManifest {
                command: name.into(),
                config,
                seeds: vec![seed],
                input_hash: hash,
                outputs,
                members,
            };
            Ok(Some(write_manifest(&dir, &ctx, m)?))
        }
        Command::TrainAdaptive {
            pool,
            layout,
            seed,
            out,
            train,
        } => {
            let l = ctx.layout(&layout)?;
            let pm = RunManifest::load(&ctx.abs(&pool))?;
            let members: Vec<PolicyHandle> = pm
                .members
                .iter()
                .map(|m| ctx.policy(&m.path))
                .collect::<Result<_>>()?;
            let cfg = resolve_train_config(&ctx.workspace, &train, seed)?;
            let res = train_adaptive(&members, &l, &cfg)?;
            let dir = ctx.out_dir(&out)?;
            let mut outputs = Vec::new();
            let meta = BTreeMap::from([(
                "pool".to_string(),
                pm.members
                    .iter()
                    .map(|m| m.id.as_str())
                    .collect::<Vec<_>>()
                    .join(","),
            )]);
            let path = save_policy(&dir, &ctx, &res.policy, Some(&cfg), meta, &mut outputs)?;
            write_text(
                &dir,
                &ctx,
                "curve.tsv",
                &curve_to_text(&res.curve),
                &mut outputs,
            )?;
            let mut config = config_value(&cfg);
            config["layout"] = l.name.clone().into();
            let hash = input_hash(name, &config, &[seed], |h| {
                h.update(l.source().as_bytes());
                ctx.hash_file(h, &ctx.abs(&pool))
            })?;
            let member = ManifestMember {
                id: res.policy.id.clone(),
                path,
                partner_path: None,
                provenance: Some("adaptive".into()),
                weight_seed: None,
                weights: None,
                order_reward_multiplier: None,
            };
            let m = RunManifest {
                command: name.into(),
                config,
                seeds: vec![seed],
                input_hash: hash,
                outputs,
                members: vec![member],
            };
            Ok(Some(write_manifest(&dir, &ctx, m)?))
        }
        Command::Eval {
            policy,
            partner,
            layout,
            episodes,
            seats,
            seed,
            bold,
            bold_threshold,
            out,
        } => {
            let l = ctx.layout(&layout)?;
            let pa = ctx.policy(&policy)?;
            let positions: &[u8] = match seats {
                Seats::Both => &[1, 2],
                Seats::First => &[1],
                Seats::Second => &[2],
            };
            let mut results: Vec<MatchupResult> = Vec::new();
            for spec in &partner {
                for q in ctx.policies(spec)? {
                    for &pos in positions {
                        results.push(crossplay(&pa, &q, &l, pos, episodes, seed)?);
                    }
                }
            }
            let rule = match bold {
                BoldArg::None => BoldRule::None,
                BoldArg::Absolute => BoldRule::Absolute(bold_threshold),
                BoldArg::Std => BoldRule::StdMultiple(bold_threshold),
            };
            let dir = ctx.out_dir(&out)?;
            let mut outputs = Vec::new();
            let table = render_table(&results, '\t', rule);
            print!("{table}");
            write_text(&dir, &ctx, "results.tsv", &table, &mut outputs)?;
            write_text(
                &dir,
                &ctx,
                "summary.json",
                &serde_json::to_string_pretty(&results)?,
                &mut outputs,
            )?;
            let config = serde_json::json!({
                "layout": l.name,
                "policy": policy,
                "partners": partner,
                "episodes": episodes,
                "positions": positions,
            });
            let hash = input_hash(name, &config, &[seed], |h| {
                h.update(l.source().as_bytes());
                h.update(pa.param_hash().as_bytes());
                Ok(())
            })?;
            let m = RunManifest {
                command: name.into(),
                config,
                seeds: vec![seed],
                input_hash: hash,
                outputs,
                members: Vec::new(),
            };
            Ok(Some(write_manifest(&dir, &ctx, m)?))
        }
        Command::Serve {
            layout,
            roster,
            addr,
            store,
            tick_ms,
            ai_idle_steps,
            seed,
        } => {
            let l = ctx.layout(&layout)?;
            let roster: Vec<PolicyHandle> = roster
                .iter()
                .map(|s| ctx.policy(s))
                .collect::<Result<_>>()?;
            let store = SessionStore::open(ctx.abs(&store))?;
            let state = AppState::new(ServerConfig {
                layout: l,
                roster,
                tick: TickPolicy {
                    human_input_window_ms: tick_ms,
                    ai_idle_steps,
                },
                seed,
                store,
            })?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(&addr).await?;
                eprintln!("listening on ws://{}/ws", listener.local_addr()?);
                crate::playserver::serve(listener, state).await
            })?;
            Ok(None)
        }
        Command::Replay { trajectory } => {
            let path = ctx.abs(&trajectory);
            let original =
                fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let traj = Trajectory::parse(&original)?;
            let again = traj.resimulate()?.to_jsonl();
            let identical = again == original;
            let report = serde_json::json!({
                "file": ctx.rel(&path),
                "sha256": hex::encode(Sha256::digest(original.as_bytes())),
                "replay_sha256": hex::encode(Sha256::digest(again.as_bytes())),
                "identical": identical,
                "score": traj.score(),
            });
            println!("{report}");
            if !identical {
                bail!(ReplayMismatch(ctx.rel(&path)));
            }
            Ok(None)
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("replay of `{0}` differs from the stored log")]
pub struct ReplayMismatch(pub String);

/// Short machine-readable category of an error.
pub fn error_kind(e: &anyhow::Error) -> &'static str {
    use crate::engine::{LayoutError, TrajectoryError};
    use crate::evalharness::EvalError;
    use crate::learners::checkpoint::CheckpointError;
    use crate::learners::TrainError;
    use crate::playserver::SessionError;
    use crate::pool::PoolError;
    use crate::rewards::RewardError;
    for cause in e.chain() {
        let kind = if cause.is::<TrainError>() {
            "train"
        } else if cause.is::<PoolError>() {
            "pool"
        } else if cause.is::<EvalError>() {
            "eval"
        } else if cause.is::<CheckpointError>() {
            "checkpoint"
        } else if cause.is::<LayoutError>() {
            "layout"
        } else if cause.is::<TrajectoryError>() {
            "trajectory"
        } else if cause.is::<ReplayMismatch>() {
            "replay_mismatch"
        } else if cause.is::<SessionError>() {
            "session"
        } else if cause.is::<RewardError>() {
            "reward"
        } else if cause.is::<std::io::Error>() {
            "io"
        } else if cause.is::<toml::de::Error>() || cause.is::<serde_json::Error>() {
            "parse"
        } else {
            continue;
        };
        return kind;
    }
    "error"
}

/// JSON error record printed on failure.
pub fn error_record(command: &str, e: &anyhow::Error) -> String {
    serde_json::json!({
        "error": {
            "command": command,
            "kind": error_kind(e),
            "message": format!("{e:#}"),
        }
    })
    .to_string()
}

/// Entry point used by the binary. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return 0;
            }
            let record = serde_json::json!({
                "error": { "command": null, "kind": "usage", "message": e.to_string() }
            });
            eprintln!("{record}");
            return 2;
        }
    };
    let name = cli.command.name();
    match run(cli) {
        Ok(Some(m)) => {
            eprintln!(
                "{name}: wrote {} files, input hash {}",
                m.outputs.len(),
                m.input_hash
            );
            0
        }
        Ok(None) => 0,
        Err(e) => {
            eprintln!("{}", error_record(name, &e));
            1
        }
    }
}
