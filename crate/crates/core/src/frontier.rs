//! Scripted baselines: a frontier explorer over the landmark complex and a
//! uniform random policy.
//!
//! The frontier rule is purely combinatorial. An edge is on the boundary
//! when at most one stored triangle contains it; a vertex is a frontier
//! vertex when it touches a boundary edge or has no edges at all. Agents
//! walk the skeleton towards the nearest unvisited frontier vertex. When
//! none is reachable they head for the nearest coarse cell no agent has
//! passed through yet, and for uniformly random waypoints once every cell
//! has been swept.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;

use crate::complex::{LandmarkComplex, LandmarkId, Simplex};
use crate::env::{Policy, PolicyView};
use crate::geometry::Point;
use crate::rng::{seeded, SimRng};
use crate::world::{Action, Channel, SensorReading, World, WorldConfig};

mod coverage;

pub use coverage::{CoverageMap, Route};

const REPLAN_EVERY: u32 = 20;
const REPLAN_IDLE: u32 = 200;
const ROUTE_AHEAD: usize = 3;

pub fn frontier_vertices(complex: &LandmarkComplex) -> BTreeSet<LandmarkId> {
    let mut triangles_per_edge: HashMap<Simplex, usize> = HashMap::new();
    for t in complex.simplices(2) {
        for e in t.faces() {
            *triangles_per_edge.entry(e).or_default() += 1;
        }
    }
    let mut out = BTreeSet::new();
    let mut has_edge = BTreeSet::new();
    for e in complex.simplices(1) {
        let v = e.vertices();
        has_edge.insert(v[0]);
        has_edge.insert(v[1]);
        if triangles_per_edge.get(&e).copied().unwrap_or(0) <= 1 {
            out.insert(v[0]);
            out.insert(v[1]);
        }
    }
    for v in complex.vertex_ids() {
        if !has_edge.contains(&v) {
            out.insert(v);
        }
    }
    out
}

/// Target assignment for one step.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrontierPlan {
    /// `None` means the agent should random-walk.
    pub targets: Vec<Option<LandmarkId>>,
    /// Hop path from the anchor to the target, both included.
    pub paths: Vec<Vec<LandmarkId>>,
    pub assignment: BTreeMap<LandmarkId, usize>,
}

/// Assigns each agent the frontier vertex nearest (in hops) to its anchor,
/// ties to the smaller id, in agent order. Visited vertices are skipped.
pub fn select_targets(
    complex: &LandmarkComplex,
    anchors: &[Option<LandmarkId>],
    visited: &BTreeSet<LandmarkId>,
) -> FrontierPlan {
    select_targets_keeping(complex, anchors, visited, &vec![None; anchors.len()])
}

/// Like [`select_targets`], but agents first keep their current target when
/// it is still an unvisited, reachable frontier vertex.
pub fn select_targets_keeping(
    complex: &LandmarkComplex,
    anchors: &[Option<LandmarkId>],
    visited: &BTreeSet<LandmarkId>,
    current: &[Option<LandmarkId>],
) -> FrontierPlan {
    let frontier: BTreeSet<LandmarkId> = frontier_vertices(complex)
        .difference(visited)
        .copied()
        .collect();
    let skeleton = complex.skeleton();
    let n = anchors.len();
    let mut plan = FrontierPlan {
        targets: vec![None; n],
        paths: vec![Vec::new(); n],
        assignment: BTreeMap::new(),
    };
    let dists: Vec<Option<BTreeMap<LandmarkId, usize>>> = anchors
        .iter()
        .map(|a| a.filter(|&a| skeleton.contains(a)).map(|a| skeleton.distances(a)))
        .collect();

    for (i, d) in dists.iter().enumerate() {
        let (Some(d), Some(t)) = (d, current.get(i).copied().flatten()) else {
            continue;
        };
        if frontier.contains(&t) && d.contains_key(&t) && !plan.assignment.contains_key(&t) {
            plan.targets[i] = Some(t);
            plan.assignment.insert(t, i);
        }
    }
    for (i, d) in dists.iter().enumerate() {
        if plan.targets[i].is_some() {
            continue;
        }
        let Some(d) = d else { continue };
        let nearest = |free_only: bool| {
            frontier
                .iter()
                .filter(|v| !free_only || !plan.assignment.contains_key(v))
                .filter_map(|v| d.get(v).map(|&h| (h, *v)))
                .min()
                .map(|(_, v)| v)
        };
        if let Some(t) = nearest(true).or_else(|| nearest(false)) {
            plan.targets[i] = Some(t);
            plan.assignment.entry(t).or_insert(i);
        }
    }
    for (i, &a) in anchors.iter().enumerate().take(n) {
        if let (Some(a), Some(t)) = (a, plan.targets[i]) {
            plan.paths[i] = skeleton.hop_path(a, t).ok().flatten().unwrap_or_default();
        }
    }
    plan
}

/// Tunables of the frontier policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrontierConfig {
    /// Steps between sync requests.
    pub k_sync: u64,
    /// Pending observations that force a sync.
    pub c_batch: usize,
    /// Obstacle lookahead along the heading, meters.
    pub lookahead: f64,
    /// Distance at which a landmark or waypoint counts as reached.
    pub reach: f64,
    /// Steps without getting closer before a goal is abandoned.
    pub patience: u64,
    /// Rotation step of the avoidance rule, radians.
    pub turn_step: f64,
    /// Minimum steps of boundary following once started.
    pub follow_hold: u32,
}

impl Default for FrontierConfig {
    fn default() -> Self {
        FrontierConfig {
            k_sync: 10,
            c_batch: 5,
            lookahead: 3.0,
            reach: 1.5,
            patience: 300,
            turn_step: 15f64.to_radians(),
            follow_hold: 10,
        }
    }
}

#[derive(Clone, Debug, Default)]
struct AgentMemory {
    anchor: Option<LandmarkId>,
    target: Option<LandmarkId>,
    waypoint: Option<Point>,
    route: Option<Route>,
    route_idx: usize,
    replan_in: u32,
    follow: Option<Follow>,
    best_dist: f64,
    stalled: u64,
    since_sync: u64,
}

impl AgentMemory {
    fn track_progress(&mut self, dist: f64) -> bool {
        if dist < self.best_dist - 1e-6 {
            self.best_dist = dist;
            self.stalled = 0;
        } else {
            self.stalled += 1;
        }
        self.stalled > 0
    }

    fn reset_progress(&mut self) {
        self.best_dist = f64::INFINITY;
        self.stalled = 0;
    }
}

/// Frontier explorer with the obstacle avoidance and sync schedule of the
/// baseline.
pub struct FrontierPolicy {
    pub config: FrontierConfig,
    memory: Vec<AgentMemory>,
    coverage: CoverageMap,
    visited: BTreeSet<LandmarkId>,
    abandoned: BTreeSet<LandmarkId>,
    plan: Option<(PlanKey, FrontierPlan)>,
    rng: SimRng,
}

/// Inputs of the last target selection; the plan is reused while they hold.
#[derive(Clone, Debug, PartialEq)]
struct PlanKey {
    version: u64,
    anchors: Vec<Option<LandmarkId>>,
    current: Vec<Option<LandmarkId>>,
    excluded: usize,
}

impl FrontierPolicy {
    pub fn new(config: FrontierConfig) -> Self {
        FrontierPolicy {
            config,
            memory: Vec::new(),
            coverage: CoverageMap::default(),
            visited: BTreeSet::new(),
            abandoned: BTreeSet::new(),
            plan: None,
            rng: seeded(0),
        }
    }

    pub fn visited(&self) -> &BTreeSet<LandmarkId> {
        &self.visited
    }

    /// Current target of each agent; `None` while random-walking.
    pub fn targets(&self) -> Vec<Option<LandmarkId>> {
        self.memory.iter().map(|m| m.target).collect()
    }

    /// Goal when no frontier target is assigned: the next stretch of a route
    /// to the nearest reachable unswept cell, or a random waypoint once
    /// every reachable cell is swept.
    fn explore_goal(&mut self, i: usize, p: Point, reading: &SensorReading, cfg: &WorldConfig) -> Point {
        let stale = self.memory[i].replan_in == 0
            || self.memory[i]
                .route
                .as_ref()
                .is_some_and(|r| self.coverage.is_swept(r.cell));
        if stale {
            let claimed: Vec<usize> = self
                .memory
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .filter_map(|(_, m)| m.route.as_ref().map(|r| r.cell))
                .collect();
            let route = self.coverage.plan(p, &claimed);
            let m = &mut self.memory[i];
            if route.as_ref().map(|r| r.cell) != m.route.as_ref().map(|r| r.cell) {
                m.reset_progress();
            }
            m.replan_in = if route.is_some() { REPLAN_EVERY } else { REPLAN_IDLE };
            m.route = route;
            m.route_idx = 0;
        } else {
            self.memory[i].replan_in -= 1;
        }

        let m = &mut self.memory[i];
        if let Some(route) = &m.route {
            let last = route.points.len() - 1;
            while m.route_idx < last && p.dist(route.points[m.route_idx]) < 1.0 {
                m.route_idx += 1;
            }
            let goal = route.points[(m.route_idx + ROUTE_AHEAD).min(last)];
            let cell = route.cell;
            if m.track_progress((last - m.route_idx) as f64) && m.stalled > self.config.patience {
                self.coverage.mark_swept(cell);
                m.route = None;
                m.reset_progress();
            }
            m.waypoint = None;
            return goal;
        }

        let wp = match self.memory[i].waypoint {
            Some(w) if p.dist(w) > self.config.reach => w,
            _ => {
                let w = self.random_waypoint(cfg);
                self.memory[i].waypoint = Some(w);
                self.memory[i].reset_progress();
                w
            }
        };
        let blocked_goal = cell_is_obstacle(reading, cfg, wp - p) || self.coverage.is_blocked(wp);
        let m = &mut self.memory[i];
        if (m.track_progress(p.dist(wp)) && m.stalled > self.config.patience) || blocked_goal {
            m.waypoint = None;
        }
        wp
    }

    fn random_waypoint(&mut self, cfg: &WorldConfig) -> Point {
        let r = cfg.agent_radius;
        Point::new(
            self.rng.random_range(r..=cfg.width - r),
            self.rng.random_range(r..=cfg.height - r),
        )
    }
}

impl Default for FrontierPolicy {
    fn default() -> Self {
        FrontierPolicy::new(FrontierConfig::default())
    }
}

impl Policy for FrontierPolicy {
    fn name(&self) -> &str {
        "frontier"
    }

    fn reset(&mut self, world: &World, seed: u64) {
        self.memory = vec![AgentMemory::default(); world.agents.len()];
        for m in &mut self.memory {
            m.reset_progress();
        }
        self.coverage = CoverageMap::new(&world.config);
        self.visited.clear();
        self.abandoned.clear();
        self.plan = None;
        self.rng = seeded(seed);
    }

    fn act(&mut self, view: &PolicyView<'_>) -> Vec<Option<Action>> {
        let world = view.world;
        let cfg = &world.config;
        let n = world.agents.len();
        if self.memory.len() != n {
            self.memory.resize_with(n, || {
                let mut m = AgentMemory::default();
                m.reset_progress();
                m
            });
        }
        let known = |id: LandmarkId| view.shared.contains_vertex(id);
        let pos_of = |id: LandmarkId| world.landmark(id).map(|l| l.position());

        // Anchors and visits.
        for (i, agent) in world.agents.iter().enumerate() {
            if !agent.alive {
                continue;
            }
            let p = agent.position;
            if !self.coverage.is_empty() {
                self.coverage.record(p, &view.readings[i], cfg);
            }
            let nearest = view.readings[i]
                .visible_ids
                .iter()
                .copied()
                .filter(|&id| known(id))
                .filter_map(|id| pos_of(id).map(|q| (q.dist(p), id)))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let Some((d, id)) = nearest {
                self.memory[i].anchor = Some(id);
                if d <= self.config.reach {
                    self.visited.insert(id);
                }
            }
        }

        let anchors: Vec<Option<LandmarkId>> = self
            .memory
            .iter()
            .zip(&world.agents)
            .map(|(m, a)| if a.alive { m.anchor } else { None })
            .collect();
        let current: Vec<Option<LandmarkId>> = self.memory.iter().map(|m| m.target).collect();
        let key = PlanKey {
            version: view.shared.version(),
            anchors,
            current,
            excluded: self.visited.len() + self.abandoned.len(),
        };
        if self.plan.as_ref().is_none_or(|(k, _)| *k != key) {
            let mut excluded = self.visited.clone();
            excluded.extend(self.abandoned.iter().copied());
            let plan = select_targets_keeping(view.shared, &key.anchors, &excluded, &key.current);
            self.plan = Some((key, plan));
        }
        let plan = self.plan.as_ref().map(|(_, p)| p.clone()).unwrap_or_default();

        let mut actions = Vec::with_capacity(n);
        for i in 0..n {
            let agent = world.agents[i];
            if !agent.alive {
                actions.push(Some(Action::default()));
                continue;
            }
            let p = agent.position;
            if plan.targets[i] != self.memory[i].target {
                self.memory[i].target = plan.targets[i];
                self.memory[i].reset_progress();
            }
            let goal = match plan.targets[i] {
                Some(t) => {
                    self.memory[i].waypoint = None;
                    self.memory[i].route = None;
                    let tp = pos_of(t).unwrap_or(p);
                    if self.memory[i].track_progress(p.dist(tp))
                        && self.memory[i].stalled > self.config.patience
                    {
                        self.abandoned.insert(t);
                        self.memory[i].target = None;
                        self.memory[i].reset_progress();
                    }
                    let next = plan.paths[i].get(1).copied().unwrap_or(t);
                    pos_of(next).unwrap_or(tp)
                }
                None => self.explore_goal(i, p, &view.readings[i], cfg),
            };

            let dir = steer(
                &view.readings[i],
                cfg,
                p,
                goal - p,
                &mut self.memory[i].follow,
                &self.config,
            );
            let m = &mut self.memory[i];
            m.since_sync += 1;
            let comm = m.since_sync >= self.config.k_sync
                || view.pending.get(i).copied().unwrap_or(0) >= self.config.c_batch;
            if comm {
                m.since_sync = 0;
            }
            let v = dir * cfg.v_max;
            actions.push(Some(Action::new(v.x, v.y, 0.0, comm)));
        }
        // A visited landmark stops being a target for everyone.
        for m in &mut self.memory {
            if m.target.is_some_and(|t| self.visited.contains(&t)) {
                m.target = None;
                m.reset_progress();
            }
        }
        actions
    }
}

fn cell_of(reading: &SensorReading, cfg: &WorldConfig, offset: Point) -> Option<(usize, usize)> {
    let half = cfg.grid_half() as i64;
    let q = cfg.sensor_resolution;
    let c = half + (offset.x / q).round() as i64;
    let r = half + (offset.y / q).round() as i64;
    let n = reading.size() as i64;
    (r >= 0 && r < n && c >= 0 && c < n).then_some((r as usize, c as usize))
}

fn cell_is_obstacle(reading: &SensorReading, cfg: &WorldConfig, offset: Point) -> bool {
    cell_of(reading, cfg, offset).is_some_and(|(r, c)| reading.get(r, c, Channel::Obstacle))
}

fn blocks(reading: &SensorReading, r: usize, c: usize) -> bool {
    reading.get(r, c, Channel::Obstacle) || reading.get(r, c, Channel::OtherAgent)
}

/// True if obstacle or agent cells, or the arena wall, lie within the
/// lookahead corridor.
pub fn direction_blocked(
    reading: &SensorReading,
    cfg: &WorldConfig,
    position: Point,
    dir: Point,
    lookahead: f64,
) -> bool {
    let r = cfg.agent_radius;
    let side = Point::new(-dir.y, dir.x);
    let step = cfg.sensor_resolution * 0.5;
    let mut s = step;
    while s <= lookahead + 1e-9 {
        for off in [-r, 0.0, r] {
            let o = dir * s + side * off;
            let w = position + o;
            let outside = w.x < 0.0 || w.y < 0.0 || w.x > cfg.width || w.y > cfg.height;
            let wall = if off == 0.0 {
                w.x < r || w.y < r || w.x > cfg.width - r || w.y > cfg.height - r
            } else {
                outside
            };
            if wall {
                return true;
            }
            if cell_of(reading, cfg, o).is_some_and(|(r, c)| blocks(reading, r, c)) {
                return true;
            }
        }
        s += step;
    }
    false
}

/// Offset from the agent to the nearest sensed obstacle or agent cell, or arena wall,
/// within `range`.
pub fn nearest_obstacle(
    reading: &SensorReading,
    cfg: &WorldConfig,
    position: Point,
    range: f64,
) -> Option<Point> {
    let half = cfg.grid_half() as f64;
    let q = cfg.sensor_resolution;
    let n = reading.size();
    let mut best: Option<Point> = None;
    let mut consider = |o: Point| {
        if o.norm() <= range && best.is_none_or(|b| o.norm() < b.norm()) {
            best = Some(o);
        }
    };
    for r in 0..n {
        for c in 0..n {
            if blocks(reading, r, c) {
                consider(Point::new((c as f64 - half) * q, (r as f64 - half) * q));
            }
        }
    }
    consider(Point::new(-position.x, 0.0));
    consider(Point::new(cfg.width - position.x, 0.0));
    consider(Point::new(0.0, -position.y));
    consider(Point::new(0.0, cfg.height - position.y));
    best
}

/// Boundary-following state carried between steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Follow {
    pub dir: Point,
    /// Steps left before the goal direction may be retaken.
    pub hold: u32,
}

/// Unit steering direction under the left-hand rule.
///
/// `to_goal` is the offset to the goal; only the part of the corridor short
/// of the goal is checked. Heads straight for the goal when that is clear.
/// Otherwise moves along the boundary of the nearest obstacle with the
/// obstacle on the left, turning clockwise if that tangent is itself
/// blocked. Once following starts it lasts at least `fc.follow_hold` steps.
pub fn steer(
    reading: &SensorReading,
    cfg: &WorldConfig,
    position: Point,
    to_goal: Point,
    follow: &mut Option<Follow>,
    fc: &FrontierConfig,
) -> Point {
    let desired = to_goal.normalized();
    if desired.norm() == 0.0 {
        return desired;
    }
    let holding = follow.is_some_and(|f| f.hold > 0);
    let reach = fc.lookahead.min(to_goal.norm());
    if !holding && !direction_blocked(reading, cfg, position, desired, reach) {
        *follow = None;
        return desired;
    }
    let r = cfg.agent_radius;
    let base = match nearest_obstacle(reading, cfg, position, fc.lookahead + r + cfg.sensor_resolution) {
        Some(o) => {
            let n = o.normalized();
            let gap = o.norm() - r;
            let tangent = n.rotate(-std::f64::consts::FRAC_PI_2);
            // Hold roughly one cell of clearance from the boundary.
            let pull = ((gap - cfg.sensor_resolution) * 0.5).clamp(-0.5, 0.5);
            (tangent + n * pull).normalized()
        }
        None => follow.map_or(desired, |f| f.dir),
    };
    let hold = follow.map_or(fc.follow_hold, |f| f.hold.saturating_sub(1));
    let turns = (std::f64::consts::TAU / fc.turn_step).ceil() as usize;
    for k in 0..turns {
        let d = base.rotate(-(k as f64) * fc.turn_step);
        if !direction_blocked(reading, cfg, position, d, fc.lookahead.min(1.0)) {
            *follow = Some(Follow { dir: d, hold });
            return d;
        }
    }
    *follow = None;
    desired
}

/// One uniformly random action: velocities in bounds, sync with probability 0.1.
pub fn random_action<R: Rng + ?Sized>(cfg: &WorldConfig, rng: &mut R) -> Action {
    Action::new(
        rng.random_range(-cfg.v_max..=cfg.v_max),
        rng.random_range(-cfg.v_max..=cfg.v_max),
        rng.random_range(-cfg.w_max..=cfg.w_max),
        rng.random_bool(0.1),
    )
}

pub struct RandomPolicy {
    rng: SimRng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        RandomPolicy { rng: seeded(seed) }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn reset(&mut self, _world: &World, seed: u64) {
        self.rng = seeded(seed);
    }

    fn act(&mut self, view: &PolicyView<'_>) -> Vec<Option<Action>> {
        let cfg = &view.world.config;
        view.world
            .agents
            .iter()
            .map(|_| Some(random_action(cfg, &mut self.rng)))
            .collect()
    }
}
