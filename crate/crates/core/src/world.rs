//! Discrete-time 2-D world: arena, rectangular obstacles, landmarks,
//! holonomic disk agents and the omni-directional grid sensor.
//!
//! Agents are disks of radius `agent_radius`. Obstacles are handled through
//! their Minkowski-inflated boxes, so an agent centre outside every inflated
//! box keeps the whole disk clear of the obstacle. Motion is integrated with a
//! forward Euler step and resolved one axis at a time: the agent slides along
//! whatever it hits and never penetrates.

use std::collections::{BTreeSet, HashSet};
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::LandmarkId;
use crate::geometry::{Point, Rect};

/// Obstacles are axis-aligned rectangles with the lower-left corner at `(x, y)`.
pub type Obstacle = Rect;

const EPS: f64 = 1e-9;
const SPAWN_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("invalid world config: {0}")]
    InvalidConfig(String),
    #[error("obstacle {0} lies outside the arena")]
    ObstacleOutsideArena(usize),
    #[error("expected {expected} actions, got {got}")]
    ActionCountMismatch { expected: usize, got: usize },
    #[error("placed {placed} of {requested} agents before running out of attempts")]
    SpawnFailed { placed: usize, requested: usize },
    #[error("no agent with index {0}")]
    UnknownAgent(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub width: f64,
    pub height: f64,
    pub dt: f64,
    pub agent_radius: f64,
    pub v_max: f64,
    pub w_max: f64,
    pub sensor_radius: f64,
    pub sensor_resolution: f64,
    /// Obstacles block the sensor's line of sight.
    pub occlusion: bool,
    pub rng_seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            width: 200.0,
            height: 200.0,
            dt: 0.1,
            agent_radius: 0.5,
            v_max: 2.0,
            w_max: PI,
            sensor_radius: 15.0,
            sensor_resolution: 1.0,
            occlusion: true,
            rng_seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        let positive = [
            ("width", self.width),
            ("height", self.height),
            ("dt", self.dt),
            ("agent_radius", self.agent_radius),
            ("v_max", self.v_max),
            ("w_max", self.w_max),
            ("sensor_radius", self.sensor_radius),
            ("sensor_resolution", self.sensor_resolution),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(WorldError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.sensor_radius < self.sensor_resolution {
            return Err(WorldError::InvalidConfig(
                "sensor_radius must be at least sensor_resolution".into(),
            ));
        }
        if self.v_max * self.dt >= self.sensor_radius {
            return Err(WorldError::InvalidConfig(
                "v_max * dt must stay below the sensor radius".into(),
            ));
        }
        Ok(())
    }

    /// `floor(d / q)`: cells from the sensor centre to its edge.
    pub fn grid_half(&self) -> usize {
        (self.sensor_radius / self.sensor_resolution + EPS).floor() as usize
    }

    /// Side length `2 * floor(d / q) + 1` of the sensor grid.
    pub fn grid_size(&self) -> usize {
        2 * self.grid_half() + 1
    }

    pub fn arena(&self) -> Rect {
        Rect::new(0.0, 0.0, self.width, self.height)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Point,
    /// Integrated from `wz` but has no effect on sensing.
    pub heading: f64,
    pub alive: bool,
}

impl AgentState {
    pub fn at(x: f64, y: f64) -> Self {
        AgentState {
            position: Point::new(x, y),
            heading: 0.0,
            alive: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarkInstance {
    pub id: LandmarkId,
    pub x: f64,
    pub y: f64,
    pub destroyed: bool,
}

impl LandmarkInstance {
    pub fn new(id: u32, x: f64, y: f64) -> Self {
        LandmarkInstance {
            id: LandmarkId(id),
            x,
            y,
            destroyed: false,
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Velocity command for one agent plus the communication flag.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub vx: f64,
    pub vy: f64,
    pub wz: f64,
    pub comm: bool,
}

impl Action {
    pub fn new(vx: f64, vy: f64, wz: f64, comm: bool) -> Self {
        Action { vx, vy, wz, comm }
    }

    /// Componentwise clamp into the configured bounds. NaN maps to zero.
    pub fn clamped(&self, cfg: &WorldConfig) -> Action {
        let c = |v: f64, m: f64| if v.is_nan() { 0.0 } else { v.clamp(-m, m) };
        Action {
            vx: c(self.vx, cfg.v_max),
            vy: c(self.vy, cfg.v_max),
            wz: c(self.wz, cfg.w_max),
            comm: self.comm,
        }
    }
}

/// Sensor channels, in the order they appear in the grid tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(usize)]
pub enum Channel {
    OtherAgent = 0,
    ObservedLandmark = 1,
    UnobservedLandmark = 2,
    Obstacle = 3,
}

pub const CHANNELS: usize = 4;

/// One-hot occupancy tensor of shape `size x size x 4` plus visible landmark ids.
///
/// Cell `(r, c)` is centred at the agent position offset by
/// `((c - half) * q, (r - half) * q)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SensorReading {
    size: usize,
    in_disk: Vec<bool>,
    grid: Vec<u8>,
    pub visible_ids: BTreeSet<LandmarkId>,
}

impl SensorReading {
    /// Empty reading with the disk mask for the given geometry.
    pub fn empty(cfg: &WorldConfig) -> Self {
        let size = cfg.grid_size();
        let half = cfg.grid_half() as i64;
        let q = cfg.sensor_resolution;
        let d2 = cfg.sensor_radius * cfg.sensor_radius;
        let mut in_disk = vec![false; size * size];
        for r in 0..size {
            for c in 0..size {
                let dr = (r as i64 - half) as f64 * q;
                let dc = (c as i64 - half) as f64 * q;
                in_disk[r * size + c] = dr * dr + dc * dc <= d2 + EPS;
            }
        }
        SensorReading {
            size,
            in_disk,
            grid: vec![0; size * size * CHANNELS],
            visible_ids: BTreeSet::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn in_disk(&self, r: usize, c: usize) -> bool {
        self.in_disk[r * self.size + c]
    }

    pub fn get(&self, r: usize, c: usize, ch: Channel) -> bool {
        self.grid[(r * self.size + c) * CHANNELS + ch as usize] != 0
    }

    /// Raw tensor in `[row][col][channel]` order.
    pub fn as_slice(&self) -> &[u8] {
        &self.grid
    }

    /// Sets `ch` at a cell and clears the other channels there.
    pub fn set(&mut self, r: usize, c: usize, ch: Channel) {
        let base = (r * self.size + c) * CHANNELS;
        self.grid[base..base + CHANNELS].fill(0);
        self.grid[base + ch as usize] = 1;
    }

    /// Clears a cell in every channel.
    pub fn clear(&mut self, r: usize, c: usize) {
        let base = (r * self.size + c) * CHANNELS;
        self.grid[base..base + CHANNELS].fill(0);
    }

    pub fn count(&self, ch: Channel) -> usize {
        self.grid
            .iter()
            .skip(ch as usize)
            .step_by(CHANNELS)
            .filter(|&&v| v != 0)
            .count()
    }

    pub fn is_blank(&self) -> bool {
        self.grid.iter().all(|&v| v == 0)
    }

    /// Row-major list of in-disk cell indices `r * size + c`.
    pub fn disk_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.in_disk
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i)
    }

    pub(crate) fn cell_channel(&self, cell: usize, ch: usize) -> bool {
        self.grid[cell * CHANNELS + ch] != 0
    }

    pub(crate) fn set_raw(&mut self, cell: usize, ch: usize) {
        self.grid[cell * CHANNELS + ch] = 1;
    }
}

/// Outcome of one physics step for one agent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: AgentState,
    pub collided: bool,
}

/// Uniform bucket grid over landmark positions for radius queries.
#[derive(Clone, Debug, Default)]
pub(crate) struct LandmarkIndex {
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl LandmarkIndex {
    pub(crate) fn build(landmarks: &[LandmarkInstance], width: f64, height: f64, cell: f64) -> Self {
        let nx = ((width / cell).ceil() as usize).max(1);
        let ny = ((height / cell).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        for (i, l) in landmarks.iter().enumerate() {
            let bx = ((l.x / cell).floor().max(0.0) as usize).min(nx - 1);
            let by = ((l.y / cell).floor().max(0.0) as usize).min(ny - 1);
            buckets[by * nx + bx].push(i);
        }
        LandmarkIndex {
            cell,
            nx,
            ny,
            buckets,
        }
    }

    /// Indices of landmarks whose bucket intersects the square around `p`.
    pub(crate) fn near(&self, p: Point, radius: f64) -> impl Iterator<Item = usize> + '_ {
        let clampx = |v: f64| ((v / self.cell).floor().max(0.0) as usize).min(self.nx - 1);
        let clampy = |v: f64| ((v / self.cell).floor().max(0.0) as usize).min(self.ny - 1);
        let (x0, x1) = (clampx(p.x - radius), clampx(p.x + radius));
        let (y0, y1) = (clampy(p.y - radius), clampy(p.y + radius));
        (y0..=y1).flat_map(move |by| {
            (x0..=x1).flat_map(move |bx| self.buckets[by * self.nx + bx].iter().copied())
        })
    }
}

#[derive(Clone, Debug)]
pub struct World {
    pub config: WorldConfig,
    obstacles: Vec<Obstacle>,
    landmarks: Vec<LandmarkInstance>,
    pub agents: Vec<AgentState>,
    index: LandmarkIndex,
}

impl World {
    pub fn new(config: WorldConfig, obstacles: Vec<Obstacle>) -> Result<Self, WorldError> {
        config.validate()?;
        let arena = config.arena();
        for (i, o) in obstacles.iter().enumerate() {
            let inside = o.w > 0.0
                && o.h > 0.0
                && o.x >= arena.x
                && o.y >= arena.y
                && o.x_max() <= arena.x_max()
                && o.y_max() <= arena.y_max();
            if !inside {
                return Err(WorldError::ObstacleOutsideArena(i));
            }
        }
        let index = LandmarkIndex::build(&[], config.width, config.height, config.sensor_radius);
        Ok(World {
            config,
            obstacles,
            landmarks: Vec::new(),
            agents: Vec::new(),
            index,
        })
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn landmarks(&self) -> &[LandmarkInstance] {
        &self.landmarks
    }

    pub fn set_landmarks(&mut self, landmarks: Vec<LandmarkInstance>) {
        self.index = LandmarkIndex::build(
            &landmarks,
            self.config.width,
            self.config.height,
            self.config.sensor_radius,
        );
        self.landmarks = landmarks;
    }

    pub fn landmark(&self, id: LandmarkId) -> Option<&LandmarkInstance> {
        // Placement assigns ids in order, so the fast path is direct indexing.
        match self.landmarks.get(id.0 as usize) {
            Some(l) if l.id == id => Some(l),
            _ => self.landmarks.iter().find(|l| l.id == id),
        }
    }

    /// Ids of landmarks that were not destroyed.
    pub fn remaining_ids(&self) -> BTreeSet<LandmarkId> {
        self.landmarks
            .iter()
            .filter(|l| !l.destroyed)
            .map(|l| l.id)
            .collect()
    }

    /// True iff the segment `p -> q` crosses no obstacle interior.
    pub fn line_of_sight(&self, p: Point, q: Point) -> bool {
        !self.obstacles.iter().any(|o| o.segment_hits_interior(p, q))
    }

    /// Is `p` a legal agent centre: inside the arena by one radius and
    /// outside every inflated obstacle?
    pub fn is_clear(&self, p: Point) -> bool {
        let r = self.config.agent_radius;
        p.x >= r - EPS
            && p.y >= r - EPS
            && p.x <= self.config.width - r + EPS
            && p.y <= self.config.height - r + EPS
            && !self
                .obstacles
                .iter()
                .any(|o| o.inflate(r - EPS).contains_strict(p))
    }

    pub fn in_obstacle(&self, p: Point) -> bool {
        self.obstacles.iter().any(|o| o.contains(p))
    }

    /// Fraction of the arena covered by obstacles, measured on the q-grid.
    pub fn occupancy_percentage(&self) -> f64 {
        occupancy_of(&self.config, &self.obstacles)
    }

    /// Places `n` agents by rejection sampling over collision-free poses.
    pub fn spawn_agents<R: Rng + ?Sized>(
        &mut self,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<AgentState>, WorldError> {
        let r = self.config.agent_radius;
        let mut agents: Vec<AgentState> = Vec::with_capacity(n);
        for _ in 0..n {
            let mut placed = false;
            for _ in 0..SPAWN_ATTEMPTS {
                let p = Point::new(
                    rng.random_range(r..=self.config.width - r),
                    rng.random_range(r..=self.config.height - r),
                );
                let heading = rng.random_range(-PI..PI);
                if self.is_clear(p) && agents.iter().all(|a| a.position.dist(p) >= 2.0 * r) {
                    agents.push(AgentState {
                        position: p,
                        heading,
                        alive: true,
                    });
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(WorldError::SpawnFailed {
                    placed: agents.len(),
                    requested: n,
                });
            }
        }
        self.agents = agents.clone();
        Ok(agents)
    }

    /// Advances every alive agent by one `dt`.
    ///
    /// Agents are resolved in index order against the already-updated
    /// positions of earlier agents. An agent blocked by another agent flags
    /// both of them.
    pub fn step(&mut self, actions: &[Action]) -> Result<Vec<StepOutcome>, WorldError> {
        if actions.len() != self.agents.len() {
            return Err(WorldError::ActionCountMismatch {
                expected: self.agents.len(),
                got: actions.len(),
            });
        }
        let dt = self.config.dt;
        let mut collided = vec![false; self.agents.len()];
        for i in 0..self.agents.len() {
            if !self.agents[i].alive {
                continue;
            }
            let a = actions[i].clamped(&self.config);
            let mut pos = [self.agents[i].position.x, self.agents[i].position.y];
            for (axis, v) in [(0usize, a.vx), (1usize, a.vy)] {
                let (coord, blocked, hit) = self.resolve_axis(i, pos, axis, v * dt);
                pos[axis] = coord;
                if blocked {
                    collided[i] = true;
                }
                if let Some(j) = hit {
                    collided[j] = true;
                }
            }
            let agent = &mut self.agents[i];
            agent.position = Point::new(pos[0], pos[1]);
            agent.heading = wrap_angle(agent.heading + a.wz * dt);
        }
        Ok(self
            .agents
            .iter()
            .zip(collided)
            .map(|(s, c)| StepOutcome {
                state: *s,
                collided: c,
            })
            .collect())
    }

    /// Moves agent `i` from `pos` by `delta` along `axis`, stopping at the
    /// first contact. Returns the new coordinate, whether the motion was
    /// shortened, and the agent that stopped it, if any.
    fn resolve_axis(
        &self,
        i: usize,
        pos: [f64; 2],
        axis: usize,
        delta: f64,
    ) -> (f64, bool, Option<usize>) {
        let start = pos[axis];
        if delta == 0.0 {
            return (start, false, None);
        }
        let perp = 1 - axis;
        let r = self.config.agent_radius;
        let extent = if axis == 0 {
            self.config.width
        } else {
            self.config.height
        };
        let forward = delta > 0.0;
        let target = start + delta;
        // `limit` is the furthest reachable coordinate in the direction of travel.
        let mut limit = target;
        let mut hit = None;
        let tighten = |limit: &mut f64, stop: f64| {
            if (forward && stop < *limit) || (!forward && stop > *limit) {
                *limit = stop;
                true
            } else {
                false
            }
        };

        let wall = if forward { extent - r } else { r };
        tighten(&mut limit, wall);

        for o in &self.obstacles {
            let inf = o.inflate(r);
            let (lo, hi, plo, phi) = if axis == 0 {
                (inf.x, inf.x_max(), inf.y, inf.y_max())
            } else {
                (inf.y, inf.y_max(), inf.x, inf.x_max())
            };
            if pos[perp] <= plo + EPS || pos[perp] >= phi - EPS {
                continue;
            }
            let stopped = if forward && start <= lo + EPS {
                tighten(&mut limit, lo)
            } else if !forward && start >= hi - EPS {
                tighten(&mut limit, hi)
            } else {
                false
            };
            if stopped {
                hit = None;
            }
        }

        let reach = 2.0 * r;
        for (j, other) in self.agents.iter().enumerate() {
            if j == i || !other.alive {
                continue;
            }
            let c = [other.position.x, other.position.y];
            let b = pos[perp] - c[perp];
            if b.abs() >= reach - EPS {
                continue;
            }
            let h = (reach * reach - b * b).sqrt();
            let a = start - c[axis];
            let stop = if forward {
                if a <= -h + EPS {
                    Some(c[axis] - h)
                } else if a < 0.0 {
                    // Already overlapping and moving closer.
                    Some(start)
                } else {
                    None
                }
            } else if a >= h - EPS {
                Some(c[axis] + h)
            } else if a > 0.0 {
                Some(start)
            } else {
                None
            };
            if let Some(stop) = stop {
                if tighten(&mut limit, stop) {
                    hit = Some(j);
                }
            }
        }

        if limit == target {
            (target, false, None)
        } else {
            // Contacts within EPS behind the start must not pull the agent back.
            let coord = if forward {
                limit.max(start)
            } else {
                limit.min(start)
            };
            (coord, true, hit)
        }
    }

    /// Sensor reading for agent `agent`. Landmarks whose id satisfies
    /// `observed` go to the observed-landmark channel.
    ///
    /// When several objects fall into one cell the channel priority is
    /// other agent, then unobserved landmark, then observed landmark, then
    /// obstacle.
    pub fn sense_with(
        &self,
        agent: usize,
        observed: impl Fn(LandmarkId) -> bool,
    ) -> Result<SensorReading, WorldError> {
        let me = self.agents.get(agent).ok_or(WorldError::UnknownAgent(agent))?;
        let cfg = &self.config;
        let mut out = SensorReading::empty(cfg);
        if !me.alive {
            return Ok(out);
        }
        let origin = me.position;
        let q = cfg.sensor_resolution;
        let d = cfg.sensor_radius;
        let half = cfg.grid_half() as i64;
        let n = out.size as i64;
        let to_cell = |p: Point| -> Option<(usize, usize)> {
            let c = half + ((p.x - origin.x) / q).round() as i64;
            let r = half + ((p.y - origin.y) / q).round() as i64;
            (r >= 0 && r < n && c >= 0 && c < n).then_some((r as usize, c as usize))
        };

        // Obstacles by cell-centre membership.
        for o in &self.obstacles {
            let c0 = ((o.x - origin.x) / q + half as f64 - EPS).ceil().max(0.0) as i64;
            let c1 = ((o.x_max() - origin.x) / q + half as f64 + EPS)
                .floor()
                .min((n - 1) as f64) as i64;
            let r0 = ((o.y - origin.y) / q + half as f64 - EPS).ceil().max(0.0) as i64;
            let r1 = ((o.y_max() - origin.y) / q + half as f64 + EPS)
                .floor()
                .min((n - 1) as f64) as i64;
            for r in r0..=r1 {
                for c in c0..=c1 {
                    let (r, c) = (r as usize, c as usize);
                    if out.in_disk(r, c) {
                        out.set(r, c, Channel::Obstacle);
                    }
                }
            }
        }

        let mut seen_observed = Vec::new();
        let mut seen_unobserved = Vec::new();
        for li in self.index.near(origin, d) {
            let l = &self.landmarks[li];
            if l.destroyed {
                continue;
            }
            let p = l.position();
            if p.dist2(origin) > d * d + EPS {
                continue;
            }
            if cfg.occlusion && !self.line_of_sight(origin, p) {
                continue;
            }
            out.visible_ids.insert(l.id);
            if let Some(cell) = to_cell(p) {
                if observed(l.id) {
                    seen_observed.push(cell);
                } else {
                    seen_unobserved.push(cell);
                }
            }
        }
        for (ch, cells) in [
            (Channel::ObservedLandmark, seen_observed),
            (Channel::UnobservedLandmark, seen_unobserved),
        ] {
            for (r, c) in cells {
                if out.in_disk(r, c) {
                    out.set(r, c, ch);
                }
            }
        }

        for (j, other) in self.agents.iter().enumerate() {
            if j == agent || !other.alive {
                continue;
            }
            let p = other.position;
            if p.dist2(origin) > d * d + EPS {
                continue;
            }
            if cfg.occlusion && !self.line_of_sight(origin, p) {
                continue;
            }
            if let Some((r, c)) = to_cell(p) {
                if out.in_disk(r, c) {
                    out.set(r, c, Channel::OtherAgent);
                }
            }
        }
        Ok(out)
    }

    pub fn sense(
        &self,
        agent: usize,
        observed: &HashSet<LandmarkId>,
    ) -> Result<SensorReading, WorldError> {
        self.sense_with(agent, |id| observed.contains(&id))
    }
}

/// Fraction of q-grid cell centres inside the union of `obstacles`.
pub fn occupancy_of(cfg: &WorldConfig, obstacles: &[Obstacle]) -> f64 {
    let q = cfg.sensor_resolution;
    let nx = (cfg.width / q).ceil() as usize;
    let ny = (cfg.height / q).ceil() as usize;
    if obstacles.is_empty() || nx == 0 || ny == 0 {
        return 0.0;
    }
    let mut covered = vec![false; nx * ny];
    for o in obstacles {
        // Cell i has centre (i + 0.5) q; keep the centres with x <= centre <= x_max.
        let span = |lo: f64, hi: f64, n: usize| {
            let a = ((lo / q - 0.5).ceil().max(0.0)) as usize;
            let b = (hi / q - 0.5).floor();
            if b < 0.0 {
                return a..a;
            }
            a..((b as usize) + 1).min(n)
        };
        for j in span(o.y, o.y_max(), ny) {
            for i in span(o.x, o.x_max(), nx) {
                covered[j * nx + i] = true;
            }
        }
    }
    covered.iter().filter(|&&c| c).count() as f64 / (nx * ny) as f64
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// World description file: arena, obstacles, landmarks and the seed they came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldFile {
    pub width: f64,
    pub height: f64,
    pub obstacles: Vec<Obstacle>,
    pub landmarks: Vec<LandmarkInstance>,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum WorldFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    World(#[from] WorldError),
}

impl WorldFile {
    pub fn from_world(world: &World, seed: u64) -> Self {
        WorldFile {
            width: world.config.width,
            height: world.config.height,
            obstacles: world.obstacles.clone(),
            landmarks: world.landmarks.clone(),
            seed,
        }
    }

    /// Builds a world, taking every parameter not stored in the file from `template`.
    pub fn to_world(&self, template: &WorldConfig) -> Result<World, WorldError> {
        let config = WorldConfig {
            width: self.width,
            height: self.height,
            rng_seed: self.seed,
            ..template.clone()
        };
        let mut w = World::new(config, self.obstacles.clone())?;
        w.set_landmarks(self.landmarks.clone());
        Ok(w)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("world file serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WorldFileError> {
        Ok(Self::from_json(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), WorldFileError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn open_world() -> World {
        World::new(WorldConfig::default(), Vec::new()).unwrap()
    }

    #[test]
    fn free_step_is_euler() {
        let mut w = open_world();
        w.agents = vec![AgentState::at(50.0, 50.0)];
        let out = w.step(&[Action::new(1.0, 0.0, 0.0, false)]).unwrap();
        assert!((out[0].state.position.x - 50.1).abs() < 1e-12);
        assert_eq!(out[0].state.position.y, 50.0);
        assert!(!out[0].collided);
    }

    #[test]
    fn clamps_against_obstacle_face() {
        // Obstacle face at x = 60, agent centre 0.55 m from it.
        let mut w = World::new(
            WorldConfig::default(),
            vec![Rect::new(60.0, 40.0, 10.0, 20.0)],
        )
        .unwrap();
        w.agents = vec![AgentState::at(60.0 - 0.55, 50.0)];
        let out = w.step(&[Action::new(2.0, 0.0, 0.0, false)]).unwrap();
        assert!(out[0].collided);
        let x = out[0].state.position.x;
        assert!((x - 59.5).abs() < 1e-9, "x = {x}");
        assert!(w.obstacles()[0].distance_to(out[0].state.position) >= 0.5 - 1e-9);
    }

    #[test]
    fn head_on_agents_both_flagged() {
        let mut w = open_world();
        w.agents = vec![AgentState::at(10.0, 10.0), AgentState::at(11.1, 10.0)];
        let out = w
            .step(&[
                Action::new(2.0, 0.0, 0.0, false),
                Action::new(-2.0, 0.0, 0.0, false),
            ])
            .unwrap();
        assert!(out[0].collided && out[1].collided);
        let d = out[0].state.position.dist(out[1].state.position);
        assert!(d >= 1.0 - 1e-9, "overlap: {d}");
    }

    #[test]
    fn arena_boundary_flags_collision() {
        let mut w = open_world();
        w.agents = vec![AgentState::at(0.6, 100.0)];
        let out = w.step(&[Action::new(-2.0, 0.0, 0.0, false)]).unwrap();
        assert!(out[0].collided);
        assert!((out[0].state.position.x - 0.5).abs() < 1e-12);
    }

    #[test]
    fn action_count_mismatch() {
        let mut w = open_world();
        w.agents = vec![AgentState::at(5.0, 5.0)];
        assert_eq!(
            w.step(&[]),
            Err(WorldError::ActionCountMismatch {
                expected: 1,
                got: 0
            })
        );
    }

    #[test]
    fn heading_wraps_and_actions_clamp() {
        let mut w = open_world();
        w.agents = vec![AgentState::at(100.0, 100.0)];
        w.agents[0].heading = 3.1;
        let out = w.step(&[Action::new(10.0, 0.0, 10.0, false)]).unwrap();
        let s = out[0].state;
        assert!((s.position.x - 100.2).abs() < 1e-12);
        let expected = wrap_angle(3.1 + PI * 0.1);
        assert!((s.heading - expected).abs() < 1e-12);
        assert!(s.heading < PI && s.heading >= -PI);
    }

    #[test]
    fn sensor_grid_shape_and_empty_reading() {
        let mut w = open_world();
        w.agents = vec![AgentState::at(100.0, 100.0)];
        let r = w.sense(0, &HashSet::new()).unwrap();
        assert_eq!(r.size(), 31);
        assert_eq!(r.as_slice().len(), 31 * 31 * 4);
        assert!(r.is_blank());
        assert!(r.visible_ids.is_empty());
    }

    #[test]
    fn sensor_channels() {
        let mut w = World::new(
            WorldConfig::default(),
            vec![Rect::new(105.0, 80.0, 5.0, 5.0)],
        )
        .unwrap();
        w.set_landmarks(vec![
            LandmarkInstance::new(0, 103.0, 100.0),
            LandmarkInstance::new(1, 100.0, 96.0),
            LandmarkInstance::new(2, 120.0, 120.0),
        ]);
        w.agents = vec![AgentState::at(100.0, 100.0), AgentState::at(98.0, 101.0)];
        let observed: HashSet<_> = [LandmarkId(1)].into();
        let r = w.sense(0, &observed).unwrap();
        assert_eq!(r.visible_ids, [LandmarkId(0), LandmarkId(1)].into());
        assert!(r.get(15, 18, Channel::UnobservedLandmark));
        assert!(r.get(11, 15, Channel::ObservedLandmark));
        assert!(r.get(16, 13, Channel::OtherAgent));
        // Obstacle cells: x in [105,110] -> cols 20..=25, y in [80,85] -> rows -5..0.
        assert!(r.get(0, 20, Channel::Obstacle) || !r.in_disk(0, 20));
        assert_eq!(r.count(Channel::OtherAgent), 1);
    }

    #[test]
    fn occluded_landmark_is_hidden() {
        let mut w = World::new(
            WorldConfig::default(),
            vec![Rect::new(104.0, 95.0, 2.0, 10.0)],
        )
        .unwrap();
        w.set_landmarks(vec![LandmarkInstance::new(0, 110.0, 100.0)]);
        w.agents = vec![AgentState::at(100.0, 100.0)];
        let r = w.sense(0, &HashSet::new()).unwrap();
        assert!(r.visible_ids.is_empty());
        assert_eq!(r.count(Channel::UnobservedLandmark), 0);

        w.config.occlusion = false;
        let r = w.sense(0, &HashSet::new()).unwrap();
        assert_eq!(r.visible_ids.len(), 1);
    }

    #[test]
    fn destroyed_landmarks_never_sensed() {
        let mut w = open_world();
        let mut l = LandmarkInstance::new(0, 101.0, 100.0);
        l.destroyed = true;
        w.set_landmarks(vec![l]);
        w.agents = vec![AgentState::at(100.0, 100.0)];
        assert!(w.sense(0, &HashSet::new()).unwrap().is_blank());
    }

    #[test]
    fn line_of_sight_cases() {
        let w = World::new(
            WorldConfig::default(),
            vec![Rect::new(10.0, 10.0, 10.0, 10.0)],
        )
        .unwrap();
        let p = Point::new(3.0, 3.0);
        assert!(w.line_of_sight(p, p));
        assert!(!w.line_of_sight(Point::new(0.0, 15.0), Point::new(30.0, 15.0)));
        assert!(w.line_of_sight(Point::new(0.0, 10.0), Point::new(20.0, 30.0)));
    }

    #[test]
    fn occupancy() {
        assert_eq!(open_world().occupancy_percentage(), 0.0);
        let w = World::new(
            WorldConfig::default(),
            vec![Rect::new(10.0, 10.0, 50.0, 100.0)],
        )
        .unwrap();
        assert_eq!(w.occupancy_percentage(), 0.125);
    }

    #[test]
    fn occupancy_matches_cell_scan() {
        let cfg = WorldConfig {
            width: 37.0,
            height: 23.5,
            ..WorldConfig::default()
        };
        let mut rng = seeded(11);
        for _ in 0..50 {
            let obstacles: Vec<Rect> = (0..3)
                .map(|_| {
                    let x = rng.random_range(-2.0..30.0);
                    let y = rng.random_range(-2.0..20.0);
                    Rect::new(x, y, rng.random_range(0.2..12.0), rng.random_range(0.2..12.0))
                })
                .collect();
            let (nx, ny) = (37, 24);
            let mut hit = 0;
            for j in 0..ny {
                for i in 0..nx {
                    let p = Point::new(i as f64 + 0.5, j as f64 + 0.5);
                    hit += obstacles.iter().any(|o| o.contains(p)) as usize;
                }
            }
            let expect = hit as f64 / (nx * ny) as f64;
            assert_eq!(occupancy_of(&cfg, &obstacles), expect);
        }
    }

    #[test]
    fn spawn_is_clear_and_deterministic() {
        let obstacles = vec![Rect::new(20.0, 20.0, 50.0, 100.0)];
        let mut a = World::new(WorldConfig::default(), obstacles.clone()).unwrap();
        let mut b = World::new(WorldConfig::default(), obstacles).unwrap();
        let sa = a.spawn_agents(8, &mut seeded(3)).unwrap();
        let sb = b.spawn_agents(8, &mut seeded(3)).unwrap();
        assert_eq!(sa, sb);
        for (i, s) in sa.iter().enumerate() {
            assert!(a.is_clear(s.position));
            for t in &sa[i + 1..] {
                assert!(s.position.dist(t.position) >= 1.0);
            }
        }
    }

    #[test]
    fn spawn_fails_without_room() {
        let cfg = WorldConfig {
            width: 2.0,
            height: 2.0,
            sensor_radius: 1.0,
            ..WorldConfig::default()
        };
        let mut w = World::new(cfg, Vec::new()).unwrap();
        assert!(matches!(
            w.spawn_agents(10, &mut seeded(1)),
            Err(WorldError::SpawnFailed { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let bad = WorldConfig {
            sensor_radius: 0.1,
            ..WorldConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(World::new(
            WorldConfig::default(),
            vec![Rect::new(190.0, 0.0, 20.0, 10.0)]
        )
        .is_err());
    }

    #[test]
    fn world_file_round_trip_is_bit_exact() {
        let mut w = World::new(
            WorldConfig::default(),
            vec![Rect::new(12.25, 30.0, 20.5, 60.125)],
        )
        .unwrap();
        w.set_landmarks(vec![LandmarkInstance::new(0, 0.5, 1.5)]);
        let text = WorldFile::from_world(&w, 9).to_json();
        let back = WorldFile::from_json(&text).unwrap();
        assert_eq!(back.to_json(), text);
        assert!(text.contains("\"destroyed\": false"));
    }
}
