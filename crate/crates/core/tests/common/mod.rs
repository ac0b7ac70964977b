//! Shared fixtures: golden transcript scripts, recording and replay.
//!
//! Set `LCX_RECORD_GOLDEN=1` to rewrite the files under `tests/golden/`.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::PathBuf;

use lcx::complex::LandmarkId;
use lcx::env::gateway::GatewaySession;
use lcx::env::{EnvSettings, Policy};
use lcx::frontier::FrontierPolicy;
use lcx::rng::seeded;
use lcx::sync::{wire, ServerState};
use lcx::world::{Action, WorldConfig};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// One request line and the reply it produced; `recv` is `None` when the
/// request closed the session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub send: String,
    pub recv: Option<String>,
}

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

pub fn recording() -> bool {
    std::env::var_os("LCX_RECORD_GOLDEN").is_some()
}

pub fn load(name: &str) -> Vec<Exchange> {
    let path = golden_path(name);
    let text = fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e}; record with LCX_RECORD_GOLDEN=1", path.display()));
    text.lines()
        .map(|l| serde_json::from_str(l).expect("transcript line"))
        .collect()
}

pub fn save(name: &str, exchanges: &[Exchange]) {
    let mut out = String::new();
    for e in exchanges {
        out.push_str(&serde_json::to_string(e).unwrap());
        out.push('\n');
    }
    fs::write(golden_path(name), out).unwrap();
}

/// Rewrites the golden file when recording, then loads it.
pub fn golden(name: &str, record: impl FnOnce() -> Vec<Exchange>) -> Vec<Exchange> {
    if recording() {
        save(name, &record());
    }
    load(name)
}

// Gateway.

pub fn gateway_base() -> EnvSettings {
    EnvSettings {
        world: WorldConfig {
            width: 40.0,
            height: 40.0,
            ..WorldConfig::default()
        },
        n_agents: 2,
        ..EnvSettings::default()
    }
}

fn act_line(actions: &[Option<Action>]) -> String {
    serde_json::json!({"t": "act", "actions": actions}).to_string()
}

/// Error paths, a truncated episode under scripted actions with one
/// disconnect, and a second reset.
pub fn record_gateway_basic() -> Vec<Exchange> {
    let mut s = GatewaySession::new(gateway_base());
    let mut sends = vec![
        "not json".to_string(),
        r#"{"x":1}"#.into(),
        r#"{"t":"jump"}"#.into(),
        r#"{"t":"act","actions":[]}"#.into(),
        r#"{"t":"reset"}"#.into(),
        r#"{"t":"reset","seed":3,"n_agents":3,"p_l":1.5}"#.into(),
        r#"{"t":"reset","seed":11,"stage":2,"n_agents":3,"width":60,"height":60,"p_l":0.2,"max_steps":24}"#.into(),
        act_line(&[None]),
    ];
    let mut rng = seeded(99);
    for step in 0..25 {
        let actions: Vec<Option<Action>> = (0..3)
            .map(|i| {
                (!(i == 2 && step >= 10)).then(|| {
                    Action::new(
                        rng.random_range(-2.0..=2.0),
                        rng.random_range(-2.0..=2.0),
                        rng.random_range(-1.0..=1.0),
                        rng.random_bool(0.3),
                    )
                })
            })
            .collect();
        sends.push(act_line(&actions));
    }
    sends.push(r#"{"t":"reset","seed":4,"stage":1}"#.into());
    sends.push(act_line(&[Some(Action::new(1.0, 0.5, 0.0, true)), Some(Action::new(-1.0, 0.0, 0.2, false))]));
    sends.push(r#"{"t":"close"}"#.into());
    sends
        .into_iter()
        .map(|send| Exchange {
            recv: s.handle_line(&send),
            send,
        })
        .collect()
}

/// A complete episode driven by the frontier baseline through the gateway.
pub fn record_gateway_frontier() -> Vec<Exchange> {
    let mut s = GatewaySession::new(gateway_base());
    let mut out = Vec::new();
    let reset = r#"{"t":"reset","seed":21,"stage":1,"width":30,"height":30}"#.to_string();
    out.push(Exchange {
        recv: s.handle_line(&reset),
        send: reset,
    });
    let mut policy = FrontierPolicy::default();
    {
        let ep = s.episode().expect("episode");
        policy.reset(ep.world(), ep.policy_seed());
    }
    loop {
        let ep = s.episode().expect("episode");
        if ep.is_over() {
            break;
        }
        let pending = ep.pending();
        let actions = policy.act(&ep.policy_view(&pending));
        let send = act_line(&actions);
        out.push(Exchange {
            recv: s.handle_line(&send),
            send,
        });
    }
    let close = r#"{"t":"close"}"#.to_string();
    out.push(Exchange {
        recv: s.handle_line(&close),
        send: close,
    });
    out
}

pub fn replay_gateway(exchanges: &[Exchange]) -> Vec<Option<String>> {
    let mut s = GatewaySession::new(gateway_base());
    exchanges.iter().map(|e| s.handle_line(&e.send)).collect()
}

/// Replays over a TCP connection; replies after `close` are `None`.
pub fn replay_lines_tcp(addr: std::net::SocketAddr, exchanges: &[Exchange]) -> Vec<Option<String>> {
    let stream = TcpStream::connect(addr).unwrap();
    stream.set_nodelay(true).unwrap();
    let mut w = stream.try_clone().unwrap();
    let mut r = BufReader::new(stream);
    exchanges
        .iter()
        .map(|e| {
            writeln!(w, "{}", e.send).unwrap();
            w.flush().unwrap();
            let mut line = String::new();
            let n = r.read_line(&mut line).unwrap();
            (n > 0).then(|| line.trim_end_matches('\n').to_string())
        })
        .collect()
}

// Sync.

pub const SYNC_AGENTS: usize = 3;

/// Landmarks 0..8 placed, 6 and 7 destroyed.
pub fn sync_state() -> ServerState {
    let universe: BTreeSet<LandmarkId> = (0..8).map(LandmarkId).collect();
    let remaining = (0..6).map(LandmarkId).collect();
    ServerState::new(SYNC_AGENTS, universe, remaining)
}

pub fn sync_sends() -> Vec<String> {
    [
        "{",
        r#"{"agent":0}"#,
        r#"{"t":"pull","agent":0}"#,
        r#"{"t":"sync","agent":0}"#,
        r#"{"t":"sync","agent":5,"ver":0,"obs":[],"rid":0}"#,
        r#"{"t":"sync","agent":0,"ver":4,"obs":[],"rid":0}"#,
        r#"{"t":"sync","agent":0,"ver":0,"obs":[[1,1]],"rid":0}"#,
        r#"{"t":"sync","agent":0,"ver":0,"obs":[[9]],"rid":0}"#,
        r#"{"t":"sync","agent":0,"ver":0,"obs":[[]],"rid":0}"#,
        r#"{"t":"sync","agent":0,"ver":0,"obs":[[0,1,2],[2,3]],"rid":0}"#,
        r#"{"t":"sync","agent":0,"ver":0,"obs":[[0,1,2],[2,3]],"rid":0}"#,
        r#"{"t":"sync","agent":1,"ver":0,"obs":[[3,4,5,6]],"rid":0}"#,
        r#"{"t":"sync","agent":2,"ver":0,"obs":[],"rid":0}"#,
        r#"{"t":"sync","agent":0,"ver":9,"obs":[[2,3]],"rid":1}"#,
        r#"{"t":"sync","agent":2,"ver":22,"obs":[[5,0]],"rid":1}"#,
        r#"{"t":"sync","agent":1,"ver":18,"obs":[],"rid":1}"#,
    ]
    .into_iter()
    .map(String::from)
    .collect()
}

pub fn record_sync() -> Vec<Exchange> {
    let mut state = sync_state();
    sync_sends()
        .into_iter()
        .map(|send| Exchange {
            recv: Some(wire::handle_line(&mut state, &send)),
            send,
        })
        .collect()
}

pub fn replay_sync(exchanges: &[Exchange]) -> Vec<Option<String>> {
    let mut state = sync_state();
    exchanges
        .iter()
        .map(|e| Some(wire::handle_line(&mut state, &e.send)))
        .collect()
}

pub const GOLDEN: [&str; 3] = ["gateway_basic.jsonl", "gateway_frontier.jsonl", "sync_session.jsonl"];

/// Loads (recording first if requested) every golden transcript.
pub fn all_golden() -> Vec<(&'static str, Vec<Exchange>)> {
    vec![
        (GOLDEN[0], golden(GOLDEN[0], record_gateway_basic)),
        (GOLDEN[1], golden(GOLDEN[1], record_gateway_frontier)),
        (GOLDEN[2], golden(GOLDEN[2], record_sync)),
    ]
}

/// Replays one transcript in process and returns the first mismatch.
pub fn check_replay(name: &str, exchanges: &[Exchange]) -> Result<usize, String> {
    let got = if name.starts_with("sync") {
        replay_sync(exchanges)
    } else {
        replay_gateway(exchanges)
    };
    for (i, (e, g)) in exchanges.iter().zip(&got).enumerate() {
        if &e.recv != g {
            return Err(format!("{name} line {}: reply differs\n want {:?}\n  got {:?}", i + 1, e.recv, g));
        }
    }
    Ok(exchanges.len())
}

// Statistics oracle.

/// Two-sided 95% Student-t critical values for 1..=9 degrees of freedom,
/// from standard tables.
const T975: [f64; 9] = [12.706205, 4.302653, 3.182446, 2.776445, 2.570582, 2.446912, 2.364624, 2.306004, 2.262157];

/// Mean and 95% interval computed from scratch, `None` for fewer than two
/// values.
pub fn brute_ci(values: &[f64]) -> (f64, Option<(f64, f64)>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    let half = T975[values.len() - 2] * sd / n.sqrt();
    (mean, Some((mean - half, mean + half)))
}

/// Checks an aggregate CSV against a brute-force recomputation from the
/// raw per-trial CSV. Returns the number of rows compared.
pub fn verify_aggregate(raw_csv: &str, aggregate_csv: &str) -> Result<usize, String> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(String, u64, String), Vec<f64>> = BTreeMap::new();
    let mut rdr = csv::Reader::from_reader(raw_csv.as_bytes());
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or(format!("raw csv lacks {name}"));
    let (ci, kc) = (col("condition")?, col("checkpoint")?);
    let metrics = [("c0", col("c0")?), ("c1", col("c1")?), ("c2", col("c2")?)];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        for (m, mc) in metrics {
            groups
                .entry((rec[ci].to_string(), rec[kc].parse().unwrap(), m.to_string()))
                .or_default()
                .push(rec[mc].parse().unwrap());
        }
    }
    let mut rdr = csv::Reader::from_reader(aggregate_csv.as_bytes());
    let want = ["condition", "checkpoint", "metric", "mean", "ci_lo", "ci_hi"];
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    if headers.iter().take(6).ne(want.iter().copied()) {
        return Err(format!("aggregate header {headers:?}"));
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * (1.0 + a.abs().max(b.abs()));
    let mut compared = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let key = (rec[0].to_string(), rec[1].parse::<u64>().unwrap(), rec[2].to_string());
        let Some(values) = groups.get(&key) else {
            if rec[3].is_empty() {
                continue;
            }
            return Err(format!("{key:?} has no raw rows"));
        };
        let (mean, ci) = brute_ci(values);
        let got_mean: f64 = rec[3].parse().map_err(|_| format!("{key:?} mean {:?}", &rec[3]))?;
        if !close(mean, got_mean) {
            return Err(format!("{key:?}: mean {got_mean} vs {mean}"));
        }
        match ci {
            Some((lo, hi)) => {
                let (glo, ghi): (f64, f64) = (rec[4].parse().unwrap(), rec[5].parse().unwrap());
                if !close(lo, glo) || !close(hi, ghi) {
                    return Err(format!("{key:?}: ci [{glo}, {ghi}] vs [{lo}, {hi}]"));
                }
            }
            None if !rec[4].is_empty() => return Err(format!("{key:?}: interval from one value")),
            None => {}
        }
        compared += 1;
    }
    Ok(compared)
}
