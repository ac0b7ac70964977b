//! Episode orchestration.
//!
//! One step runs: policy, physics, sync for agents that asked for it,
//! completion check, rewards, then sensing and observation registration for
//! the next step, then a log row. Sensing happens at the end of a step, so
//! the reading a policy acts on is the one taken at its current position.

pub mod codec;
pub mod gateway;
mod policy;

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{InsertionDelta, LandmarkId};
use crate::curriculum::EpisodeConfig;
use crate::geometry::Point;
use crate::placement::{destroy_landmarks, place_landmarks_lpa, PlacementConfig, PlacementError};
use crate::reward::{step_rewards, CompletionLatch, CreditMode, RewardBreakdown, RewardWeights};
use crate::rng::{derive_seed, seeded};
use crate::sync::{ClientDb, ServerState, SyncError};
use crate::world::{Action, SensorReading, World, WorldConfig, WorldError};

pub use policy::{Policy, PolicyView};

/// Step cap per episode.
pub const MAX_STEPS: u64 = 20_000;

const SPAWN_STREAM: u64 = 0x5350_4157;
const POLICY_STREAM: u64 = 0x504f_4c49;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Sync(#[from] SyncError),
    #[error("expected {expected} actions, got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error("episode already finished")]
    Finished,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Fixed parameters shared by all episodes of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvSettings {
    pub world: WorldConfig,
    pub placement: PlacementConfig,
    pub weights: RewardWeights,
    pub credit: CreditMode,
    pub n_agents: usize,
    pub max_steps: u64,
    /// Minimum displacement between two registered observations of an agent.
    /// Defaults to the sensor resolution when unset.
    pub obs_spacing: Option<f64>,
}

impl Default for EnvSettings {
    fn default() -> Self {
        EnvSettings {
            world: WorldConfig::default(),
            placement: PlacementConfig::default(),
            weights: RewardWeights::default(),
            credit: CreditMode::Global,
            n_agents: 4,
            max_steps: MAX_STEPS,
            obs_spacing: None,
        }
    }
}

impl EnvSettings {
    pub fn obs_spacing(&self) -> f64 {
        self.obs_spacing.unwrap_or(self.world.sensor_resolution)
    }
}

/// Counts an observation when the agent sees at least one landmark and has
/// moved far enough since its last counted observation.
#[derive(Clone, Debug)]
pub struct ObservationGate {
    spacing: f64,
    last: Vec<Option<Point>>,
}

impl ObservationGate {
    pub fn new(n_agents: usize, spacing: f64) -> Self {
        ObservationGate {
            spacing,
            last: vec![None; n_agents],
        }
    }

    pub fn register(&mut self, agent: usize, position: Point, reading: &SensorReading) -> bool {
        if reading.visible_ids.is_empty() {
            return false;
        }
        let ok = match self.last[agent] {
            None => true,
            Some(prev) => prev.dist(position) >= self.spacing - 1e-9,
        };
        if ok {
            self.last[agent] = Some(position);
        }
        ok
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepInfo {
    pub obs_count: u64,
    pub c0: usize,
    pub c1: usize,
    pub c2: usize,
    pub comm_counts: Vec<u64>,
    /// Steps on which each agent collided, cumulative.
    pub collisions: Vec<u64>,
    pub step_index: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub rewards: RewardBreakdown,
    pub done: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub episode: u64,
    pub step: u64,
    pub obs_count: u64,
    pub c0: usize,
    pub c1: usize,
    pub c2: usize,
    pub comm_total: u64,
    pub collisions: u64,
    pub reward_group: f64,
    pub reward_agents: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeLog {
    pub rows: Vec<LogRow>,
    pub done: bool,
    pub truncated: bool,
    /// Undestroyed landmark count.
    pub remaining: usize,
}

impl EpisodeLog {
    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    pub fn header(n_agents: usize) -> Vec<String> {
        let mut h: Vec<String> = [
            "episode",
            "step",
            "obs_count",
            "c0",
            "c1",
            "c2",
            "comm_total",
            "collisions",
            "reward_group",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend((0..n_agents).map(|i| format!("reward_agent_{i}")));
        h
    }

    pub fn write_csv<W: Write>(&self, out: W, n_agents: usize, with_header: bool) -> Result<(), EnvError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        if with_header {
            w.write_record(Self::header(n_agents))?;
        }
        for r in &self.rows {
            let mut rec = vec![
                r.episode.to_string(),
                r.step.to_string(),
                r.obs_count.to_string(),
                r.c0.to_string(),
                r.c1.to_string(),
                r.c2.to_string(),
                r.comm_total.to_string(),
                r.collisions.to_string(),
                r.reward_group.to_string(),
            ];
            rec.extend(r.reward_agents.iter().map(|v| v.to_string()));
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the world of an episode: obstacles, landmark placement and
/// destruction.
pub fn build_world(settings: &EnvSettings, cfg: &EpisodeConfig) -> Result<World, EnvError> {
    let mut world_cfg = settings.world.clone();
    world_cfg.rng_seed = cfg.world_seed;
    let mut world = World::new(world_cfg, cfg.obstacles.clone())?;
    let mut landmarks = place_landmarks_lpa(&world, &settings.placement)?;
    destroy_landmarks(&mut landmarks, cfg.p_l, &mut seeded(cfg.landmark_seed))?;
    world.set_landmarks(landmarks);
    Ok(world)
}

/// A running episode.
pub struct Episode {
    pub settings: EnvSettings,
    pub episode_index: u64,
    world: World,
    server: ServerState,
    clients: Vec<ClientDb>,
    gate: ObservationGate,
    latch: CompletionLatch,
    readings: Vec<SensorReading>,
    collisions: Vec<u64>,
    obs_count: u64,
    step_index: u64,
    done: bool,
    truncated: bool,
    policy_seed: u64,
}

impl Episode {
    pub fn new(settings: EnvSettings, cfg: &EpisodeConfig) -> Result<Self, EnvError> {
        let world = build_world(&settings, cfg)?;
        Episode::from_world(settings, world, cfg.world_seed, cfg.episode_index)
    }

    /// Starts an episode on a prepared world. Agents are spawned from `seed`.
    pub fn from_world(
        settings: EnvSettings,
        mut world: World,
        seed: u64,
        episode_index: u64,
    ) -> Result<Self, EnvError> {
        let n = settings.n_agents;
        world.spawn_agents(n, &mut seeded(derive_seed(seed, SPAWN_STREAM)))?;
        let server = ServerState::from_landmarks(n, world.landmarks());
        let mut ep = Episode {
            gate: ObservationGate::new(n, settings.obs_spacing()),
            settings,
            episode_index,
            world,
            server,
            clients: (0..n).map(ClientDb::new).collect(),
            latch: CompletionLatch::default(),
            readings: Vec::new(),
            collisions: vec![0; n],
            obs_count: 0,
            step_index: 0,
            done: false,
            truncated: false,
            policy_seed: derive_seed(seed, POLICY_STREAM),
        };
        ep.observe()?;
        Ok(ep)
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn server(&self) -> &ServerState {
        &self.server
    }

    pub fn clients(&self) -> &[ClientDb] {
        &self.clients
    }

    pub fn readings(&self) -> &[SensorReading] {
        &self.readings
    }

    pub fn is_over(&self) -> bool {
        self.done || self.truncated
    }

    pub fn policy_seed(&self) -> u64 {
        self.policy_seed
    }

    pub fn remaining_ids(&self) -> &BTreeSet<LandmarkId> {
        self.server.remaining_ids()
    }

    pub fn pending(&self) -> Vec<usize> {
        self.clients.iter().map(|c| c.pending_len()).collect()
    }

    pub fn info(&self) -> StepInfo {
        let [c0, c1, c2] = self.server.complex().counts3();
        StepInfo {
            obs_count: self.obs_count,
            c0,
            c1,
            c2,
            comm_counts: self.server.comm_counts().to_vec(),
            collisions: self.collisions.clone(),
            step_index: self.step_index,
        }
    }

    fn observe(&mut self) -> Result<(), EnvError> {
        let n = self.world.agents.len();
        let mut readings = Vec::with_capacity(n);
        for i in 0..n {
            let client = &self.clients[i];
            let reading = self.world.sense_with(i, |id| client.knows(id))?;
            let agent = self.world.agents[i];
            if agent.alive && self.gate.register(i, agent.position, &reading) {
                self.obs_count += 1;
                self.clients[i].push_observation(reading.visible_ids.clone(), self.obs_count);
            }
            readings.push(reading);
        }
        self.readings = readings;
        Ok(())
    }

    /// Runs one step. `None` disconnects that agent.
    pub fn step(&mut self, actions: &[Option<Action>]) -> Result<StepResult, EnvError> {
        if self.is_over() {
            return Err(EnvError::Finished);
        }
        let n = self.world.agents.len();
        if actions.len() != n {
            return Err(EnvError::ActionCount {
                expected: n,
                got: actions.len(),
            });
        }
        for (agent, a) in self.world.agents.iter_mut().zip(actions) {
            if a.is_none() {
                agent.alive = false;
            }
        }
        let alive: Vec<bool> = self.world.agents.iter().map(|a| a.alive).collect();
        let physical: Vec<Action> = actions.iter().map(|a| a.unwrap_or_default()).collect();
        let outcomes = self.world.step(&physical)?;

        let max_dim = self.server.complex().max_dim();
        let mut credited = vec![InsertionDelta::new(max_dim); n];
        let mut communicated = vec![false; n];
        for i in 0..n {
            if !alive[i] || !physical[i].comm {
                continue;
            }
            communicated[i] = true;
            let req = self.clients[i].make_request();
            let outcome = self.server.handle_sync_credited(&req)?;
            let local = self.clients[i].apply_delta(&outcome.delta)?;
            credited[i] = match self.settings.credit {
                CreditMode::Global => outcome.inserted,
                CreditMode::Local => local,
            };
        }

        let collided: Vec<bool> = outcomes
            .iter()
            .zip(&alive)
            .map(|(o, &a)| a && o.collided)
            .collect();
        for (c, &hit) in self.collisions.iter_mut().zip(&collided) {
            *c += hit as u64;
        }

        let completed = self.latch.update(self.server.completion_check());
        let rewards = step_rewards(
            &credited,
            &communicated,
            &collided,
            completed,
            &self.settings.weights,
        )
        .expect("per-agent vectors share a length");
        self.done = self.latch.fired();
        let mut info = self.info();
        self.step_index += 1;
        self.truncated = !self.done && self.step_index >= self.settings.max_steps;
        self.observe()?;
        info.obs_count = self.obs_count;
        Ok(StepResult {
            rewards,
            done: self.done,
            truncated: self.truncated,
            info,
        })
    }

    pub fn policy_view<'a>(&'a self, pending: &'a [usize]) -> PolicyView<'a> {
        PolicyView {
            step: self.step_index,
            world: &self.world,
            readings: &self.readings,
            pending,
            shared: self.server.complex(),
            info: self.info(),
        }
    }

    /// Runs the episode to completion or truncation.
    pub fn run(mut self, policy: &mut dyn Policy) -> Result<EpisodeLog, EnvError> {
        policy.reset(&self.world, self.policy_seed);
        let mut log = EpisodeLog {
            remaining: self.server.remaining_ids().len(),
            ..EpisodeLog::default()
        };
        while !self.is_over() {
            let pending = self.pending();
            let actions = policy.act(&self.policy_view(&pending));
            let res = self.step(&actions)?;
            log.rows.push(row(self.episode_index, &res));
        }
        log.done = self.done;
        log.truncated = self.truncated;
        Ok(log)
    }
}

fn row(episode: u64, res: &StepResult) -> LogRow {
    let i = &res.info;
    LogRow {
        episode,
        step: i.step_index,
        obs_count: i.obs_count,
        c0: i.c0,
        c1: i.c1,
        c2: i.c2,
        comm_total: i.comm_counts.iter().sum(),
        collisions: i.collisions.iter().sum(),
        reward_group: res.rewards.group,
        reward_agents: res.rewards.agent_totals(),
    }
}

pub fn run_episode(
    settings: &EnvSettings,
    cfg: &EpisodeConfig,
    policy: &mut dyn Policy,
) -> Result<EpisodeLog, EnvError> {
    Episode::new(settings.clone(), cfg)?.run(policy)
}
