//! C ABI over the gridworld engine, policies and cross-play evaluation.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `*_new`/`*_load` function and released by the matching `*_free`. Calls
//! return an [`HspStatus`]; on failure [`hsp_last_error`] describes the most
//! recent error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use hsp_core::agent::{seat_seed, Actor};
use hsp_core::engine::{
    apply, observation_len, observe_into, parse_layout_named, resolve_layout, Action, GameState,
    Layout, NUM_ACTIONS,
};
use hsp_core::evalharness::crossplay;
use hsp_core::learners::checkpoint::Checkpoint;
use hsp_core::learners::PolicyHandle;
use hsp_core::scripted::ScriptKind;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HspStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Layout = 3,
    EpisodeOver = 4,
    Checkpoint = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// A parsed kitchen layout.
pub struct HspLayout(Arc<Layout>);

/// A running episode together with its accumulated per-player events.
pub struct HspGame {
    state: GameState,
    events: [Vec<u32>; 2],
}

/// A playable policy (scripted, tabular or parametric).
pub struct HspPolicy(PolicyHandle);

/// A policy instance with its own per-episode state.
pub struct HspAgent(Box<dyn Actor>);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl ToString) {
    let s = CString::new(msg.to_string().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn fail(status: HspStatus, msg: impl ToString) -> HspStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning panics into [`HspStatus::Panic`].
fn guard(f: impl FnOnce() -> HspStatus) -> HspStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(HspStatus::Panic, msg)
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, HspStatus> {
    if p.is_null() {
        return Err(fail(HspStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(HspStatus::InvalidArgument, "string is not UTF-8"))
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(HspStatus::NullPointer, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

macro_rules! try_arg {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Copies `s` plus a terminating NUL into `buf`; the required size is
/// always written to `needed`.
unsafe fn write_str(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> HspStatus {
    if !needed.is_null() {
        *needed = s.len() + 1;
    }
    if buf.is_null() || len < s.len() + 1 {
        return fail(HspStatus::BufferTooSmall, "buffer too small");
    }
    ptr::copy_nonoverlapping(s.as_ptr() as *const c_char, buf, s.len());
    *buf.add(s.len()) = 0;
    HspStatus::Ok
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hsp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failed call on this thread. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn hsp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a built-in layout by name, or a layout file by path.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hsp_layout_load(name: *const c_char, out: *mut *mut HspLayout) -> HspStatus {
    guard(|| {
        non_null!(out);
        let name = try_arg!(str_arg(name));
        match resolve_layout(name) {
            Ok(l) => {
                *out = Box::into_raw(Box::new(HspLayout(Arc::new(l))));
                HspStatus::Ok
            }
            Err(e) => fail(HspStatus::Layout, e),
        }
    })
}

/// Parses layout text.
///
/// # Safety
/// `text` and `name` must be NUL-terminated strings and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hsp_layout_parse(
    text: *const c_char,
    name: *const c_char,
    out: *mut *mut HspLayout,
) -> HspStatus {
    guard(|| {
        non_null!(out);
        let text = try_arg!(str_arg(text));
        let name = try_arg!(str_arg(name));
        match parse_layout_named(text, name) {
            Ok(l) => {
                *out = Box::into_raw(Box::new(HspLayout(Arc::new(l))));
                HspStatus::Ok
            }
            Err(e) => fail(HspStatus::Layout, e),
        }
    })
}

/// # Safety
/// `layout` must come from `hsp_layout_load`/`hsp_layout_parse` or be null.
#[no_mangle]
pub unsafe extern "C" fn hsp_layout_free(layout: *mut HspLayout) {
    if !layout.is_null() {
        drop(Box::from_raw(layout));
    }
}

/// Number of tracked event types; 0 for a null layout.
///
/// # Safety
/// `layout` must be a live layout handle or null.
#[no_mangle]
pub unsafe extern "C" fn hsp_layout_num_events(layout: *const HspLayout) -> usize {
    layout.as_ref().map_or(0, |l| l.0.num_events())
}

/// Length of the per-player observation vector; 0 for a null layout.
///
/// # Safety
/// `layout` must be a live layout handle or null.
#[no_mangle]
pub unsafe extern "C" fn hsp_layout_observation_len(layout: *const HspLayout) -> usize {
    layout.as_ref().map_or(0, |l| observation_len(&l.0))
}

/// Ticks per episode; 0 for a null layout.
///
/// # Safety
/// `layout` must be a live layout handle or null.
#[no_mangle]
pub unsafe extern "C" fn hsp_layout_episode_length(layout: *const HspLayout) -> u32 {
    layout.as_ref().map_or(0, |l| l.0.episode_length)
}

/// Starts an episode. The game keeps its own reference to the layout.
///
/// # Safety
/// `layout` must be a live layout handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hsp_game_new(layout: *const HspLayout, seed: u64, out: *mut *mut HspGame) -> HspStatus {
    guard(|| {
        non_null!(layout, out);
        let l = &(*layout).0;
        let m = l.num_events();
        *out = Box::into_raw(Box::new(HspGame {
            state: hsp_core::engine::reset(l, seed),
            events: [vec![0; m], vec![0; m]],
        }));
        HspStatus::Ok
    })
}

/// # Safety
/// `game` must come from `hsp_game_new` or be null.
#[no_mangle]
pub unsafe extern "C" fn hsp_game_free(game: *mut HspGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

fn action(i: u32) -> Result<Action, HspStatus> {
    Action::from_index(i as usize).ok_or_else(|| {
        fail(
            HspStatus::InvalidArgument,
            format!("action index {i} outside 0..{NUM_ACTIONS}"),
        )
    })
}

/// Advances one tick with action indices (up, down, left, right, noop,
/// interact). `reward` and `done` may be null.
///
/// # Safety
/// `game` must be a live game handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn hsp_game_step(
    game: *mut HspGame,
    action0: u32,
    action1: u32,
    reward: *mut u32,
    done: *mut bool,
) -> HspStatus {
    guard(|| {
        non_null!(game);
        let g = &mut *game;
        let acts = [try_arg!(action(action0)), try_arg!(action(action1))];
        match apply(&mut g.state, acts) {
            Ok(info) => {
                for p in 0..2 {
                    for (t, &c) in g.events[p].iter_mut().zip(info.player_events[p].counts()) {
                        *t += c;
                    }
                }
                if !reward.is_null() {
                    *reward = info.task_reward;
                }
                if !done.is_null() {
                    *done = info.done;
                }
                HspStatus::Ok
            }
            Err(e) => fail(HspStatus::EpisodeOver, e),
        }
    })
}

/// # Safety
/// `game` must be a live game handle or null.
#[no_mangle]
pub unsafe extern "C" fn hsp_game_tick(game: *const HspGame) -> u32 {
    game.as_ref().map_or(0, |g| g.state.tick)
}

/// Team score so far.
///
/// # Safety
/// `game` must be a live game handle or null.
#[no_mangle]
pub unsafe extern "C" fn hsp_game_score(game: *const HspGame) -> u32 {
    game.as_ref().map_or(0, |g| g.state.cumulative_reward)
}

/// # Safety
/// `game` must be a live game handle or null.
#[no_mangle]
pub unsafe extern "C" fn hsp_game_is_done(game: *const HspGame) -> bool {
    game.as_ref().map_or(true, |g| g.state.is_done())
}

/// Copies the episode-summed event counts of `player` into `buf`.
///
/// # Safety
/// `game` must be live and `buf` hold `len` writable elements.
#[no_mangle]
pub unsafe extern "C" fn hsp_game_events(game: *const HspGame, player: u32, buf: *mut u32, len: usize) -> HspStatus {
    guard(|| {
        non_null!(game, buf);
        if player > 1 {
            return fail(HspStatus::InvalidArgument, "player must be 0 or 1");
        }
        let ev = &(*game).events[player as usize];
        if len < ev.len() {
            return fail(HspStatus::BufferTooSmall, format!("need {} slots", ev.len()));
        }
        ptr::copy_nonoverlapping(ev.as_ptr(), buf, ev.len());
        HspStatus::Ok
    })
}

/// Writes the observation of `player` into `buf`.
///
/// # Safety
/// `game` must be live and `buf` hold `len` writable elements.
#[no_mangle]
pub unsafe extern "C" fn hsp_game_observe(game: *const HspGame, player: u32, buf: *mut f32, len: usize) -> HspStatus {
    guard(|| {
        non_null!(game, buf);
        if player > 1 {
            return fail(HspStatus::InvalidArgument, "player must be 0 or 1");
        }
        let state = &(*game).state;
        let n = observation_len(state.layout());
        if len < n {
            return fail(HspStatus::BufferTooSmall, format!("need {n} slots"));
        }
        observe_into(state, player as usize, std::slice::from_raw_parts_mut(buf, n));
        HspStatus::Ok
    })
}

/// Creates a policy from a spec: `noop`, `random`, `script:<name>` or a
/// checkpoint path.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hsp_policy_load(spec: *const c_char, out: *mut *mut HspPolicy) -> HspStatus {
    guard(|| {
        non_null!(out);
        let spec = try_arg!(str_arg(spec));
        let policy = match spec {
            "noop" => PolicyHandle::noop(),
            "random" => PolicyHandle::random(),
            s if s.starts_with("script:") => {
                let name = &s["script:".len()..];
                match ScriptKind::ALL.iter().find(|k| k.name() == name) {
                    Some(&k) => PolicyHandle::scripted(k),
                    None => return fail(HspStatus::InvalidArgument, format!("unknown script `{name}`")),
                }
            }
            path => match Checkpoint::load(Path::new(path)) {
                Ok(c) => c.policy,
                Err(e) => return fail(HspStatus::Checkpoint, e),
            },
        };
        *out = Box::into_raw(Box::new(HspPolicy(policy)));
        HspStatus::Ok
    })
}

/// # Safety
/// `policy` must come from `hsp_policy_load` or be null.
#[no_mangle]
pub unsafe extern "C" fn hsp_policy_free(policy: *mut HspPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Copies the policy id into `buf`; `needed` receives the size including
/// the NUL terminator.
///
/// # Safety
/// `policy` must be live, `buf` hold `len` bytes or be null, `needed` be
/// valid or null.
#[no_mangle]
pub unsafe extern "C" fn hsp_policy_id(
    policy: *const HspPolicy,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> HspStatus {
    guard(|| {
        non_null!(policy);
        write_str(&(*policy).0.id, buf, len, needed)
    })
}

/// Instantiates an agent seeded for seat `seat` of an episode seeded
/// `episode_seed`, matching the seeding of in-library rollouts.
///
/// # Safety
/// `policy` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hsp_agent_new(
    policy: *const HspPolicy,
    episode_seed: u64,
    seat: u32,
    out: *mut *mut HspAgent,
) -> HspStatus {
    guard(|| {
        non_null!(policy, out);
        if seat > 1 {
            return fail(HspStatus::InvalidArgument, "seat must be 0 or 1");
        }
        let mut actor = (*policy).0.actor();
        actor.reset(seat_seed(episode_seed, seat as usize));
        *out = Box::into_raw(Box::new(HspAgent(actor)));
        HspStatus::Ok
    })
}

/// # Safety
/// `agent` must come from `hsp_agent_new` or be null.
#[no_mangle]
pub unsafe extern "C" fn hsp_agent_free(agent: *mut HspAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}

/// Chooses the action index for `player` in the current game state.
///
/// # Safety
/// `agent` and `game` must be live and `action_out` valid.
#[no_mangle]
pub unsafe extern "C" fn hsp_agent_act(
    agent: *mut HspAgent,
    game: *const HspGame,
    player: u32,
    action_out: *mut u32,
) -> HspStatus {
    guard(|| {
        non_null!(agent, game, action_out);
        if player > 1 {
            return fail(HspStatus::InvalidArgument, "player must be 0 or 1");
        }
        let a = (*agent).0.act(&(*game).state, player as usize);
        *action_out = a.index() as u32;
        HspStatus::Ok
    })
}

/// Mean and population standard deviation of the team score over seeded
/// episodes, `policy_a` in seat `position - 1`.
///
/// # Safety
/// Handles must be live; `mean` and `std` valid.
#[no_mangle]
pub unsafe extern "C" fn hsp_crossplay(
    policy_a: *const HspPolicy,
    partner: *const HspPolicy,
    layout: *const HspLayout,
    position: u8,
    episodes: usize,
    seed: u64,
    mean: *mut f64,
    std: *mut f64,
) -> HspStatus {
    guard(|| {
        non_null!(policy_a, partner, layout, mean, std);
        match crossplay(&(*policy_a).0, &(*partner).0, &(*layout).0, position, episodes, seed) {
            Ok(r) => {
                *mean = r.mean_reward;
                *std = r.std_reward;
                HspStatus::Ok
            }
            Err(e) => fail(HspStatus::InvalidArgument, e),
        }
    })
}
