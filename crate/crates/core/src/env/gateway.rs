//! Line-delimited JSON control protocol for external policies.
//!
//! ```text
//! -> {"t":"reset","seed":7,"stage":2,"n_agents":4,"p_l":0.0,"n_obstacles":1}
//! <- {"t":"obs","agents":[{"alive":true,"grid":[[[s,l],...],[...],[...],[...]]},...],"info":{...}}
//! -> {"t":"act","actions":[{"vx":1.0,"vy":0.0,"wz":0.0,"comm":false},null,...]}
//! <- {"t":"stepres","agents":[...],"rewards":[...],"group":-0.2,"done":false,"truncated":false,"info":{...}}
//! -> {"t":"close"}
//! ```
//!
//! `reset` fields other than `seed` are optional: `stage` defaults to 1 and
//! the obstacle count and destruction probability default to the first
//! episode of that stage. `width`, `height` and `max_steps` override the
//! session settings. A `null` action disconnects that agent.
//!
//! [`ExternalPolicy`] is the reverse direction: the runner connects to a
//! controller, sends `obs` lines and reads `act` lines.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use super::codec::{encode, EncodedGrid};
use super::{EnvSettings, Episode, Policy, PolicyView, StepInfo};
use crate::curriculum::{sample_obstacles, CurriculumConfig, EpisodeConfig};
use crate::rng::{derive_seed, seeded};
use crate::world::{Action, SensorReading, World};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResetRequest {
    pub seed: u64,
    #[serde(default)]
    pub stage: Option<u8>,
    #[serde(default)]
    pub n_agents: Option<usize>,
    #[serde(default)]
    pub p_l: Option<f64>,
    #[serde(default)]
    pub n_obstacles: Option<usize>,
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default)]
    pub height: Option<f64>,
    #[serde(default)]
    pub max_steps: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "lowercase")]
pub enum GatewayRequest {
    Reset(ResetRequest),
    Act { actions: Vec<Option<Action>> },
    Close,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentObs {
    pub alive: bool,
    pub grid: EncodedGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "lowercase")]
pub enum GatewayResponse {
    Obs {
        agents: Vec<AgentObs>,
        info: StepInfo,
    },
    Stepres {
        agents: Vec<AgentObs>,
        rewards: Vec<f64>,
        group: f64,
        done: bool,
        truncated: bool,
        info: StepInfo,
    },
    Err {
        code: String,
    },
}

fn agent_obs(world: &World, readings: &[SensorReading]) -> Vec<AgentObs> {
    world
        .agents
        .iter()
        .zip(readings)
        .map(|(a, r)| AgentObs {
            alive: a.alive,
            grid: encode(r),
        })
        .collect()
}

fn to_line(msg: &GatewayResponse) -> String {
    serde_json::to_string(msg).expect("serializable")
}

fn err(code: &str) -> String {
    to_line(&GatewayResponse::Err { code: code.into() })
}

/// Turns a reset request into settings and an episode config.
pub fn reset_config(base: &EnvSettings, req: &ResetRequest) -> (EnvSettings, EpisodeConfig) {
    let mut settings = base.clone();
    if let Some(n) = req.n_agents {
        settings.n_agents = n;
    }
    if let Some(w) = req.width {
        settings.world.width = w;
    }
    if let Some(h) = req.height {
        settings.world.height = h;
    }
    if let Some(m) = req.max_steps {
        settings.max_steps = m;
    }
    let curriculum = CurriculumConfig::default();
    let stage = req.stage.unwrap_or(1);
    let (n_default, level) = curriculum.schedule(stage, 0);
    let world_seed = derive_seed(req.seed, 0);
    let landmark_seed = derive_seed(req.seed, 1);
    let cfg = EpisodeConfig {
        episode_index: 0,
        stage,
        n_obstacles: req.n_obstacles.unwrap_or(n_default),
        p_l: req.p_l.unwrap_or(curriculum.p_l(level)),
        obstacles: Vec::new(),
        world_seed,
        landmark_seed,
    };
    (settings, cfg)
}

/// One environment session. Holds at most one episode at a time.
pub struct GatewaySession {
    base: EnvSettings,
    episode: Option<Episode>,
}

impl GatewaySession {
    pub fn new(base: EnvSettings) -> Self {
        GatewaySession {
            base,
            episode: None,
        }
    }

    pub fn episode(&self) -> Option<&Episode> {
        self.episode.as_ref()
    }

    /// Answers one line. `None` means the session is closed.
    pub fn handle_line(&mut self, line: &str) -> Option<String> {
        let value: serde_json::Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(_) => return Some(err("bad_json")),
        };
        match value.get("t").and_then(|t| t.as_str()) {
            None => return Some(err("missing_type")),
            Some("reset" | "act" | "close") => {}
            Some(_) => return Some(err("unknown_type")),
        }
        let req: GatewayRequest = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(_) => return Some(err("bad_message")),
        };
        match req {
            GatewayRequest::Close => None,
            GatewayRequest::Reset(r) => Some(self.reset(&r)),
            GatewayRequest::Act { actions } => Some(self.act(&actions)),
        }
    }

    fn reset(&mut self, req: &ResetRequest) -> String {
        let (settings, mut cfg) = reset_config(&self.base, req);
        if settings.world.validate().is_err() || settings.n_agents == 0 {
            return err("bad_config");
        }
        if !(0.0..=1.0).contains(&cfg.p_l) {
            return err("bad_config");
        }
        match sample_obstacles(
            cfg.n_obstacles,
            &CurriculumConfig::default(),
            &settings.world,
            &mut seeded(cfg.world_seed),
        ) {
            Ok(o) => cfg.obstacles = o,
            Err(_) => return err("obstacle_sampling_failed"),
        }
        match Episode::new(settings, &cfg) {
            Ok(ep) => {
                let msg = GatewayResponse::Obs {
                    agents: agent_obs(ep.world(), ep.readings()),
                    info: ep.info(),
                };
                self.episode = Some(ep);
                to_line(&msg)
            }
            Err(e) => {
                log::debug!("reset failed: {e}");
                self.episode = None;
                err("reset_failed")
            }
        }
    }

    fn act(&mut self, actions: &[Option<Action>]) -> String {
        let Some(ep) = self.episode.as_mut() else {
            return err("no_episode");
        };
        if ep.is_over() {
            return err("episode_over");
        }
        match ep.step(actions) {
            Ok(res) => to_line(&GatewayResponse::Stepres {
                agents: agent_obs(ep.world(), ep.readings()),
                rewards: res.rewards.agent_totals(),
                group: res.rewards.group,
                done: res.done,
                truncated: res.truncated,
                info: res.info,
            }),
            Err(super::EnvError::ActionCount { .. }) => err("action_count"),
            Err(e) => {
                log::debug!("step failed: {e}");
                err("step_failed")
            }
        }
    }
}

/// Runs one session over a stream until `close` or EOF.
pub fn serve_stream<R: BufRead, W: Write>(
    base: &EnvSettings,
    reader: R,
    mut writer: W,
) -> io::Result<()> {
    let mut session = GatewaySession::new(base.clone());
    for line in reader.lines() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        match session.handle_line(line) {
            Some(reply) => {
                writer.write_all(reply.as_bytes())?;
                writer.write_all(b"\n")?;
                writer.flush()?;
            }
            None => break,
        }
    }
    Ok(())
}

/// TCP gateway; every connection is an independent session.
pub struct GatewayServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl GatewayServer {
    pub fn spawn(addr: impl ToSocketAddrs, base: EnvSettings) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let accept = {
            let stop = Arc::clone(&stop);
            std::thread::spawn(move || {
                for conn in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = conn else { continue };
                    let _ = stream.set_nodelay(true);
                    let base = base.clone();
                    std::thread::spawn(move || {
                        let Ok(read_half) = stream.try_clone() else { return };
                        if let Err(e) = serve_stream(&base, BufReader::new(read_half), stream) {
                            log::debug!("gateway session ended: {e}");
                        }
                    });
                }
            })
        };
        Ok(GatewayServer {
            addr,
            stop,
            accept: Some(accept),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the accept loop exits.
    pub fn join(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        if let Some(h) = self.accept.take() {
            self.stop.store(true, Ordering::SeqCst);
            let _ = TcpStream::connect(self.addr);
            let _ = h.join();
        }
    }
}

impl Drop for GatewayServer {
    fn drop(&mut self) {
        self.stop_accepting();
    }
}

#[derive(Serialize)]
struct ObsOut<'a> {
    t: &'static str,
    agents: &'a [AgentObs],
    info: &'a StepInfo,
}

#[derive(Deserialize)]
struct ActIn {
    t: String,
    actions: Vec<Option<Action>>,
}

/// Policy served by a remote controller. Any transport failure disconnects
/// every agent; malformed replies disconnect the agents they fail to cover.
pub struct ExternalPolicy {
    endpoint: String,
    conn: Option<(BufReader<TcpStream>, TcpStream)>,
}

impl ExternalPolicy {
    pub fn connect(endpoint: &str) -> io::Result<Self> {
        let mut p = ExternalPolicy {
            endpoint: endpoint.to_string(),
            conn: None,
        };
        p.open()?;
        Ok(p)
    }

    fn open(&mut self) -> io::Result<()> {
        let w = TcpStream::connect(&self.endpoint)?;
        w.set_nodelay(true)?;
        self.conn = Some((BufReader::new(w.try_clone()?), w));
        Ok(())
    }

    fn exchange(&mut self, line: &str) -> io::Result<String> {
        let (r, w) = self
            .conn
            .as_mut()
            .ok_or_else(|| io::Error::new(io::ErrorKind::NotConnected, "disconnected"))?;
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
        w.flush()?;
        let mut reply = String::new();
        if r.read_line(&mut reply)? == 0 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "controller closed"));
        }
        Ok(reply)
    }
}

impl Policy for ExternalPolicy {
    fn name(&self) -> &str {
        "external"
    }

    fn reset(&mut self, _world: &World, _seed: u64) {
        if self.conn.is_none() {
            if let Err(e) = self.open() {
                log::warn!("cannot reach controller {}: {e}", self.endpoint);
            }
        }
    }

    fn act(&mut self, view: &PolicyView<'_>) -> Vec<Option<Action>> {
        let n = view.world.agents.len();
        let agents = agent_obs(view.world, view.readings);
        let line = serde_json::to_string(&ObsOut {
            t: "obs",
            agents: &agents,
            info: &view.info,
        })
        .expect("serializable");
        match self.exchange(&line) {
            Ok(reply) => match serde_json::from_str::<ActIn>(&reply) {
                Ok(act) if act.t == "act" => {
                    let mut a = act.actions;
                    a.resize(n, None);
                    a
                }
                _ => {
                    log::warn!("controller sent an invalid reply; disconnecting its agents");
                    vec![None; n]
                }
            },
            Err(e) => {
                log::warn!("controller connection lost: {e}");
                self.conn = None;
                vec![None; n]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::WorldConfig;

    fn base() -> EnvSettings {
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

    #[test]
    fn session_flow() {
        let mut s = GatewaySession::new(base());
        assert_eq!(
            s.handle_line(r#"{"t":"act","actions":[]}"#).unwrap(),
            r#"{"t":"err","code":"no_episode"}"#
        );
        let obs = s.handle_line(r#"{"t":"reset","seed":3}"#).unwrap();
        let parsed: GatewayResponse = serde_json::from_str(&obs).unwrap();
        let GatewayResponse::Obs { agents, info } = parsed else { panic!("{obs}") };
        assert_eq!(agents.len(), 2);
        assert_eq!(info.step_index, 0);
        let step = s
            .handle_line(r#"{"t":"act","actions":[{"vx":1.0,"vy":0.0,"wz":0.0,"comm":true},null]}"#)
            .unwrap();
        let GatewayResponse::Stepres { agents, rewards, .. } = serde_json::from_str(&step).unwrap() else {
            panic!("{step}")
        };
        assert!(agents[0].alive && !agents[1].alive);
        assert_eq!(rewards.len(), 2);
        assert_eq!(
            s.handle_line(r#"{"t":"act","actions":[]}"#).unwrap(),
            r#"{"t":"err","code":"action_count"}"#
        );
        assert_eq!(s.handle_line(r#"{"t":"warp"}"#).unwrap(), r#"{"t":"err","code":"unknown_type"}"#);
        assert!(s.handle_line(r#"{"t":"close"}"#).is_none());
    }

    #[test]
    fn same_seed_same_bytes() {
        let mut wide = base();
        wide.world.width = 120.0;
        wide.world.height = 120.0;
        let mut a = GatewaySession::new(wide.clone());
        let mut b = GatewaySession::new(wide);
        let reset = r#"{"t":"reset","seed":11,"stage":2}"#;
        assert_eq!(a.handle_line(reset), b.handle_line(reset));
        let act = r#"{"t":"act","actions":[{"vx":2.0,"vy":1.0,"wz":0.5,"comm":true},{"vx":-1.0,"vy":0.0,"wz":0.0,"comm":false}]}"#;
        for _ in 0..5 {
            let (x, y) = (a.handle_line(act), b.handle_line(act));
            assert!(x.as_deref().unwrap().starts_with(r#"{"t":"stepres""#));
            assert_eq!(x, y);
        }
        assert_eq!(a.episode().unwrap().world().obstacles().len(), 1);
    }

    #[test]
    fn stage_defaults() {
        let (_, cfg) = reset_config(&base(), &serde_json::from_str(r#"{"seed":1,"stage":3}"#).unwrap());
        assert_eq!((cfg.n_obstacles, cfg.p_l), (1, 0.05));
    }

    #[test]
    fn external_policy_over_tcp() {
        // A controller that drives every agent east for three steps, then hangs up.
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let controller = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut r = BufReader::new(stream.try_clone().unwrap());
            let mut w = stream;
            for _ in 0..3 {
                let mut line = String::new();
                r.read_line(&mut line).unwrap();
                assert!(line.starts_with(r#"{"t":"obs""#));
                w.write_all(
                    b"{\"t\":\"act\",\"actions\":[{\"vx\":1.0,\"vy\":0.0,\"wz\":0.0,\"comm\":false},{\"vx\":1.0,\"vy\":0.0,\"wz\":0.0,\"comm\":false}]}\n",
                )
                .unwrap();
            }
        });
        let mut settings = base();
        settings.max_steps = 10;
        let cfg = EpisodeConfig::fixed(vec![], 0.0, 1, 2);
        let mut policy = ExternalPolicy::connect(&addr.to_string()).unwrap();
        let ep = Episode::new(settings, &cfg).unwrap();
        let log = ep.run(&mut policy).unwrap();
        controller.join().unwrap();
        // The episode outlives the controller and runs to the cap.
        assert!(log.truncated);
        assert_eq!(log.rows.len(), 10);
    }
}
