use std::sync::Arc;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use hsp_core::engine::{parse_layout_named, Action, Layout};
use hsp_core::evalharness::preference_score;
use hsp_core::learners::PolicyHandle;
use hsp_core::playserver::{
    AppState, ClientMsg, ServerConfig, ServerMsg, Session, SessionError, SessionStore, Stage,
    TickPolicy, SCHEDULE_LEN,
};
use hsp_core::scripted::ScriptKind;
use tokio_tungstenite::tungstenite::Message;

mod common;

fn short_layout() -> Arc<Layout> {
    Arc::new(
        parse_layout_named(
            "XXPXX\nO1 2O\nXDSDX\n\ningredients=O3 cook=5 reward=20\nepisode_length=12\n",
            "short",
        )
        .unwrap(),
    )
}

fn roster() -> Vec<PolicyHandle> {
    vec![
        PolicyHandle::scripted(ScriptKind::OnionEverywhere),
        PolicyHandle::scripted(ScriptKind::OnionPlacement),
        PolicyHandle::scripted(ScriptKind::OnionPlacementAndDelivery),
        PolicyHandle::random(),
    ]
}

fn labels(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Drives a session without wall-clock time: one `tick` per loop.
fn run_until_idle(
    s: &mut Session,
    store: &SessionStore,
    human: impl Fn(u32) -> Option<Action>,
) -> usize {
    let mut games = 0;
    let mut t = 0;
    loop {
        if let Some(a) = human(t) {
            s.submit_action(a).unwrap();
        }
        t += 1;
        let fx = s.tick().unwrap();
        for g in &fx.completed {
            store.save_game(&s.session_id, g).unwrap();
            games += 1;
        }
        if !s.in_game() && games > 0 {
            return games;
        }
    }
}

#[test]
fn ai_moves_only_on_duty_ticks() {
    let layout = common::layout("coordination_ring");
    let mut s = Session::new("s", "p", layout, roster(), 1, TickPolicy::default()).unwrap();
    s.tick().unwrap(); // starts the first warm-up game (slot A, human first)
    let mut ai_moves = Vec::new();
    let mut done = None;
    while done.is_none() {
        let fx = s.tick().unwrap();
        done = fx.completed.into_iter().next();
    }
    let traj = done.unwrap().trajectory;
    for (t, rec) in traj.ticks.iter().enumerate() {
        assert_eq!(rec.actions[0], Action::NoOp, "no human input means NoOp");
        if rec.actions[1] != Action::NoOp {
            ai_moves.push(t as u32);
        }
    }
    assert!(ai_moves.iter().all(|t| (t + 1) % 8 == 0));
    // Over the first 8 ticks the AI gets exactly one real move.
    assert_eq!(ai_moves.iter().filter(|&&t| t < 8).count(), 1);
    traj.verify().unwrap();
}

#[test]
fn latest_human_input_wins() {
    let layout = short_layout();
    let mut s = Session::new("s", "p", layout, roster(), 2, TickPolicy::default()).unwrap();
    s.tick().unwrap();
    s.submit_action(Action::Left).unwrap();
    s.submit_action(Action::Right).unwrap();
    s.tick().unwrap();
    s.tick().unwrap();
    let mut end = None;
    while end.is_none() {
        end = s.tick().unwrap().completed.into_iter().next();
    }
    let t = end.unwrap().trajectory;
    assert_eq!(t.ticks[0].actions[0], Action::Right);
    assert_eq!(t.ticks[1].actions[0], Action::NoOp);
}

#[test]
fn full_session_persists_replayable_games_and_rankings() {
    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::open(dir.path()).unwrap();
    let layout = short_layout();
    let mut sessions = Vec::new();
    // Participants 0..7 put agent C first; 8..11 put A first.
    for p in 0..12 {
        let mut s = Session::new(
            format!("s{p}"),
            format!("p{p}"),
            layout.clone(),
            roster(),
            p,
            TickPolicy {
                human_input_window_ms: 1,
                ai_idle_steps: 1,
            },
        )
        .unwrap();
        assert_eq!(
            run_until_idle(&mut s, &store, |t| Action::from_index((t % 6) as usize)),
            1
        );
        let order = if p < 8 {
            ["C", "A", "B", "D"]
        } else {
            ["A", "C", "B", "D"]
        };
        let fx = s.submit_ranking(&labels(&order), "ok\tthanks").unwrap();
        let (rec, comment) = fx.ranking.unwrap();
        store.save_ranking(&s.session_id, &rec, &comment).unwrap();
        assert_eq!(s.stage, Stage::Exploitation);
        let mut played = 0;
        while s.stage != Stage::Done {
            let fx = s.tick().unwrap();
            for g in &fx.completed {
                store.save_game(&s.session_id, g).unwrap();
                played += 1;
            }
        }
        assert_eq!(played, SCHEDULE_LEN);
        assert_eq!(s.tick().err(), Some(SessionError::SessionClosed));
        sessions.push(s.session_id.clone());
    }
    let games = store.load_games(&sessions[0]).unwrap();
    assert_eq!(games.len(), 1 + SCHEDULE_LEN);
    for (entry, traj) in &games {
        let hsp_core::playserver::LogEntry::GameEnd { score, sha256, .. } = entry else {
            unreachable!()
        };
        assert_eq!(traj.resimulate().unwrap().score(), *score);
        assert_eq!(&traj.sha256(), sha256);
    }
    let recs = store.load_rankings().unwrap();
    assert_eq!(recs.len(), 12);
    let c = "script:onion_placement_and_delivery";
    let a = "script:onion_everywhere";
    let s = preference_score(&recs, c, a).unwrap();
    assert!((s - 1.0 / 3.0).abs() < 1e-12, "{s}");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn websocket_client_completes_study() {
    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::open(dir.path()).unwrap();
    let state = AppState::new(ServerConfig {
        layout: short_layout(),
        roster: roster(),
        tick: TickPolicy {
            human_input_window_ms: 1,
            ai_idle_steps: 7,
        },
        seed: 9,
        store: store.clone(),
    })
    .unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(hsp_core::playserver::serve(listener, state));

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws"))
        .await
        .unwrap();
    let send = |m: ClientMsg| Message::Text(serde_json::to_string(&m).unwrap());
    ws.send(send(ClientMsg::Join {
        participant_id: "web".into(),
    }))
    .await
    .unwrap();
    let mut ended = 0;
    let mut ranked = false;
    let mut reveal = None;
    let mut last_tick = 0;
    let run = async {
        while let Some(msg) = ws.next().await {
            let text = match msg.unwrap() {
                Message::Text(t) => t,
                Message::Close(_) => break,
                _ => continue,
            };
            match serde_json::from_str::<ServerMsg>(&text).unwrap() {
                ServerMsg::Joined { slots, stage, .. } => {
                    assert_eq!(slots.len(), 4);
                    assert_eq!(stage, Stage::WarmUp);
                }
                ServerMsg::StateDelta { tick, .. } => {
                    last_tick = tick;
                    // The server may already be closing after the last game.
                    let _ = ws
                        .send(send(ClientMsg::Action {
                            action: Action::Interact,
                        }))
                        .await;
                }
                ServerMsg::GameEnd { game_index, .. } => {
                    assert_eq!(last_tick, 12);
                    if game_index.is_none() && !ranked {
                        ranked = true;
                        let order = ClientMsg::Ranking {
                            order: labels(&["B", "A", "D", "C"]),
                            comment: "fun".into(),
                        };
                        ws.send(send(order)).await.unwrap();
                    } else if game_index.is_some() {
                        ended += 1;
                    }
                }
                ServerMsg::StageChange {
                    stage: Stage::Done,
                    reveal: r,
                } => reveal = r,
                ServerMsg::Error { kind, message } => panic!("{kind}: {message}"),
                _ => {}
            }
        }
    };
    tokio::time::timeout(Duration::from_secs(60), run)
        .await
        .unwrap();
    assert_eq!(ended, SCHEDULE_LEN);
    let reveal = reveal.unwrap();
    assert_eq!(reveal["B"], "script:onion_placement");
    let recs = store.load_rankings().unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].ranking[0], "script:onion_placement");
    assert_eq!(recs[0].participant_id, "web");
}
