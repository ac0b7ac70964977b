//! Drive the environment through the line-delimited JSON gateway, first
//! in-process, then as a remote controller behind `ExternalPolicy`.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;

use lcx::env::gateway::{ExternalPolicy, GatewaySession};
use lcx::env::{EnvSettings, Episode};
use lcx::curriculum::EpisodeConfig;
use lcx::world::WorldConfig;

fn settings() -> EnvSettings {
    EnvSettings {
        world: WorldConfig {
            width: 40.0,
            height: 40.0,
            ..WorldConfig::default()
        },
        n_agents: 2,
        max_steps: 30,
        ..EnvSettings::default()
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Simulator side: a session answers one request line at a time.
    let mut session = GatewaySession::new(settings());
    for line in [
        r#"{"t":"reset","seed":5,"stage":1}"#,
        r#"{"t":"act","actions":[{"vx":2.0,"vy":0.0,"wz":0.0,"comm":true},{"vx":0.0,"vy":-2.0,"wz":0.0,"comm":false}]}"#,
        // Incomplete actions are rejected with an error line.
        r#"{"t":"act","actions":[{"vx":1.0}]}"#,
    ] {
        let reply = session.handle_line(line).unwrap_or_default();
        println!("> {line}\n< {}...", &reply[..reply.len().min(160)]);
    }
    assert!(session.handle_line(r#"{"t":"close"}"#).is_none());

    // Controller side: the episode runner sends observations, a remote
    // process answers with actions. Here the controller drives every agent
    // east and syncs every fifth step.
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?.to_string();
    let controller = std::thread::spawn(move || -> std::io::Result<u32> {
        let (stream, _) = listener.accept()?;
        let mut out = stream.try_clone()?;
        let mut steps = 0;
        for line in BufReader::new(stream).lines() {
            let obs: serde_json::Value = serde_json::from_str(&line?)?;
            let n = obs["agents"].as_array().map_or(0, |a| a.len());
            let comm = steps % 5 == 0;
            let act = serde_json::json!({
                "t": "act",
                "actions": vec![serde_json::json!({"vx": 2.0, "vy": 0.3, "wz": 0.0, "comm": comm}); n],
            });
            writeln!(out, "{act}")?;
            steps += 1;
        }
        Ok(steps)
    });

    let mut policy = ExternalPolicy::connect(&addr)?;
    let episode = Episode::new(settings(), &EpisodeConfig::fixed(vec![], 0.0, 9, 10))?;
    let log = episode.run(&mut policy)?;
    drop(policy);
    let last = log.last().expect("rows");
    println!(
        "external controller: {} steps, c = ({}, {}, {}), {} requests",
        log.rows.len(),
        last.c0,
        last.c1,
        last.c2,
        last.comm_total
    );
    println!("controller answered {} observations", controller.join().expect("thread")?);
    Ok(())
}
