//! Three-stage curriculum: open arenas, then incrementally more obstacles,
//! then obstacles combined with rising landmark destruction.
//!
//! Within stage 2 and stage 3, episode `e` (counted from the start of the
//! stage) has `1 + floor(e / n_o)` obstacles. In stage 3 the destruction
//! probability is `p_step * (1 + floor((e mod n_o) / n_l))`, so it restarts at
//! `p_step` whenever the obstacle count goes up.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Rect;
use crate::rng::{derive_seed, seeded};
use crate::world::{Obstacle, WorldConfig};

const LAYOUT_RESTARTS: usize = 40;
const ATTEMPTS_PER_OBSTACLE: usize = 400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurriculumError {
    #[error("could not place {requested} obstacles (best layout had {placed})")]
    SamplingFailed { placed: usize, requested: usize },
    #[error("invalid curriculum config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurriculumConfig {
    /// Episodes per obstacle increment.
    pub n_o: u64,
    /// Episodes per destruction-probability increment.
    pub n_l: u64,
    pub p_step: f64,
    pub width_range: (f64, f64),
    pub height_range: (f64, f64),
    /// Episode counts of stages 1 and 2. When unset the stage only changes
    /// through [`CurriculumState::advance_stage`].
    pub stage_episodes: Option<(u64, u64)>,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        CurriculumConfig {
            n_o: 25,
            n_l: 5,
            p_step: 0.05,
            width_range: (20.0, 50.0),
            height_range: (50.0, 100.0),
            stage_episodes: None,
        }
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<(), CurriculumError> {
        if self.n_o == 0 || self.n_l == 0 {
            return Err(CurriculumError::InvalidConfig(
                "n_o and n_l must be positive".into(),
            ));
        }
        if self.p_step.is_nan() || self.p_step <= 0.0 || self.p_step * self.max_destruction_level() as f64 > 1.0 {
            return Err(CurriculumError::InvalidConfig(
                "p_step must keep p_l within (0, 1]".into(),
            ));
        }
        for (lo, hi) in [self.width_range, self.height_range] {
            if !(lo > 0.0 && lo <= hi) {
                return Err(CurriculumError::InvalidConfig(
                    "obstacle size bounds must satisfy 0 < min <= max".into(),
                ));
            }
        }
        Ok(())
    }

    /// Largest destruction level `ceil(n_o / n_l)` reachable before the reset.
    pub fn max_destruction_level(&self) -> u64 {
        self.n_o.div_ceil(self.n_l)
    }

    /// `(n_obstacles, destruction level k)` for episode `e` of `stage`;
    /// `p_l = k * p_step`.
    pub fn schedule(&self, stage: u8, e: u64) -> (usize, u64) {
        match stage {
            1 => (0, 0),
            2 => (1 + (e / self.n_o) as usize, 0),
            _ => (
                1 + (e / self.n_o) as usize,
                1 + (e % self.n_o) / self.n_l,
            ),
        }
    }

    pub fn p_l(&self, level: u64) -> f64 {
        level as f64 * self.p_step
    }

    /// Stage and in-stage episode for a global episode index, using
    /// `stage_episodes`.
    pub fn locate(&self, episode: u64) -> (u8, u64) {
        match self.stage_episodes {
            None => (1, episode),
            Some((s1, s2)) => {
                if episode < s1 {
                    (1, episode)
                } else if episode < s1 + s2 {
                    (2, episode - s1)
                } else {
                    (3, episode - s1 - s2)
                }
            }
        }
    }
}

/// One row of the schedule table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub episode: u64,
    pub stage: u8,
    pub n_obstacles: usize,
    pub p_l: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub episode_index: u64,
    pub stage: u8,
    pub n_obstacles: usize,
    pub p_l: f64,
    pub obstacles: Vec<Obstacle>,
    pub world_seed: u64,
    pub landmark_seed: u64,
}

impl EpisodeConfig {
    /// Hand-built config outside any curriculum.
    pub fn fixed(obstacles: Vec<Obstacle>, p_l: f64, world_seed: u64, landmark_seed: u64) -> Self {
        EpisodeConfig {
            episode_index: 0,
            stage: 0,
            n_obstacles: obstacles.len(),
            p_l,
            obstacles,
            world_seed,
            landmark_seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CurriculumState {
    pub config: CurriculumConfig,
    pub world: WorldConfig,
    pub seed: u64,
    stage: u8,
    episode_index: u64,
    stage_start: u64,
}

impl CurriculumState {
    pub fn new(
        config: CurriculumConfig,
        world: WorldConfig,
        seed: u64,
    ) -> Result<Self, CurriculumError> {
        config.validate()?;
        Ok(CurriculumState {
            config,
            world,
            seed,
            stage: 1,
            episode_index: 0,
            stage_start: 0,
        })
    }

    pub fn stage(&self) -> u8 {
        self.stage
    }

    pub fn episode_index(&self) -> u64 {
        self.episode_index
    }

    /// Moves to the next stage (no-op in stage 3). Used by trainers that
    /// measure stage length in environment steps.
    pub fn advance_stage(&mut self) {
        if self.stage < 3 {
            self.stage += 1;
            self.stage_start = self.episode_index;
        }
    }

    fn current(&self) -> (u8, u64) {
        if self.config.stage_episodes.is_some() {
            self.config.locate(self.episode_index)
        } else {
            (self.stage, self.episode_index - self.stage_start)
        }
    }

    /// Schedule row for the next episode without sampling obstacles.
    pub fn peek_row(&self) -> ScheduleRow {
        let (stage, e) = self.current();
        let (n_obstacles, level) = self.config.schedule(stage, e);
        ScheduleRow {
            episode: self.episode_index,
            stage,
            n_obstacles,
            p_l: self.config.p_l(level),
        }
    }

    /// Emits the next episode config and advances the episode counter.
    pub fn next_episode_config(&mut self) -> Result<EpisodeConfig, CurriculumError> {
        let row = self.peek_row();
        let cfg = episode_config(&self.config, &self.world, self.seed, row)?;
        self.episode_index += 1;
        self.stage = row.stage;
        Ok(cfg)
    }

    /// Advances past the next episode without sampling it.
    pub fn next_row(&mut self) -> ScheduleRow {
        let row = self.peek_row();
        self.episode_index += 1;
        self.stage = row.stage;
        row
    }
}

/// Builds the config for one schedule row. A pure function of its inputs.
pub fn episode_config(
    config: &CurriculumConfig,
    world: &WorldConfig,
    seed: u64,
    row: ScheduleRow,
) -> Result<EpisodeConfig, CurriculumError> {
    let world_seed = derive_seed(seed, 2 * row.episode);
    let landmark_seed = derive_seed(seed, 2 * row.episode + 1);
    let obstacles = sample_obstacles(row.n_obstacles, config, world, &mut seeded(world_seed))?;
    Ok(EpisodeConfig {
        episode_index: row.episode,
        stage: row.stage,
        n_obstacles: row.n_obstacles,
        p_l: row.p_l,
        obstacles,
        world_seed,
        landmark_seed,
    })
}

/// Samples `n` pairwise non-overlapping rectangles inside the arena whose
/// complement stays connected for an agent disk.
///
/// Each obstacle gets a bounded number of attempts; a dead end restarts the
/// layout. If no connected layout is found the connectivity requirement is
/// dropped (and logged) before giving up entirely.
pub fn sample_obstacles<R: Rng + ?Sized>(
    n: usize,
    config: &CurriculumConfig,
    world: &WorldConfig,
    rng: &mut R,
) -> Result<Vec<Obstacle>, CurriculumError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut best = 0;
    for require_connected in [true, false] {
        for restart in 0..LAYOUT_RESTARTS {
            match try_layout(n, config, world, rng, require_connected) {
                Ok(layout) => {
                    if restart > 0 {
                        log::debug!("obstacle layout needed {} restarts", restart);
                    }
                    return Ok(layout);
                }
                Err(placed) => best = best.max(placed),
            }
        }
        if require_connected {
            log::warn!(
                "no connected layout of {n} obstacles found; accepting overlap-free layouts"
            );
        }
    }
    Err(CurriculumError::SamplingFailed {
        placed: best,
        requested: n,
    })
}

fn try_layout<R: Rng + ?Sized>(
    n: usize,
    config: &CurriculumConfig,
    world: &WorldConfig,
    rng: &mut R,
    require_connected: bool,
) -> Result<Vec<Obstacle>, usize> {
    let mut layout: Vec<Obstacle> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut accepted = false;
        for _ in 0..ATTEMPTS_PER_OBSTACLE {
            let w = rng.random_range(config.width_range.0..=config.width_range.1);
            let h = rng.random_range(config.height_range.0..=config.height_range.1);
            if w > world.width || h > world.height {
                continue;
            }
            let x = rng.random_range(0.0..=world.width - w);
            let y = rng.random_range(0.0..=world.height - h);
            let cand = Rect::new(x, y, w, h);
            if layout.iter().any(|o| o.overlaps(&cand)) {
                continue;
            }
            layout.push(cand);
            if require_connected && !free_space_connected(world, &layout) {
                layout.pop();
                continue;
            }
            accepted = true;
            break;
        }
        if !accepted {
            return Err(layout.len());
        }
    }
    Ok(layout)
}

/// Flood fill over the q-grid of cells an agent centre can occupy.
pub fn free_space_connected(world: &WorldConfig, obstacles: &[Obstacle]) -> bool {
    let grid = ClearanceGrid::new(world, obstacles);
    grid.component_count() <= 1
}

/// Cells (spacing q) whose centre is a legal agent position.
pub struct ClearanceGrid {
    pub nx: usize,
    pub ny: usize,
    pub free: Vec<bool>,
}

impl ClearanceGrid {
    pub fn new(world: &WorldConfig, obstacles: &[Obstacle]) -> Self {
        let q = world.sensor_resolution;
        let r = world.agent_radius;
        let nx = (world.width / q).floor() as usize;
        let ny = (world.height / q).floor() as usize;
        let inflated: Vec<Rect> = obstacles.iter().map(|o| o.inflate(r)).collect();
        let mut free = vec![false; nx * ny];
        for j in 0..ny {
            let y = (j as f64 + 0.5) * q;
            for i in 0..nx {
                let x = (i as f64 + 0.5) * q;
                let inside = x >= r && y >= r && x <= world.width - r && y <= world.height - r;
                free[j * nx + i] = inside
                    && !inflated
                        .iter()
                        .any(|o| o.contains_strict(crate::geometry::Point::new(x, y)));
            }
        }
        ClearanceGrid { nx, ny, free }
    }

    /// Number of 4-connected components of free cells.
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.free.len()];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.free.len() {
            if !self.free[start] || seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(c) = queue.pop_front() {
                let (i, j) = (c % self.nx, c / self.nx);
                let mut visit = |n: usize| {
                    if self.free[n] && !seen[n] {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                };
                if i > 0 {
                    visit(c - 1);
                }
                if i + 1 < self.nx {
                    visit(c + 1);
                }
                if j > 0 {
                    visit(c - self.nx);
                }
                if j + 1 < self.ny {
                    visit(c + self.nx);
                }
            }
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> CurriculumState {
        CurriculumState::new(CurriculumConfig::default(), WorldConfig::default(), 11).unwrap()
    }

    #[test]
    fn stage_one_is_empty() {
        let mut s = state();
        let c = s.next_episode_config().unwrap();
        assert_eq!((c.stage, c.n_obstacles, c.p_l), (1, 0, 0.0));
        assert!(c.obstacles.is_empty());
    }

    #[test]
    fn stage_two_obstacle_schedule() {
        let cfg = CurriculumConfig::default();
        for e in 0..25 {
            assert_eq!(cfg.schedule(2, e), (1, 0));
        }
        assert_eq!(cfg.schedule(2, 25), (2, 0));
        assert_eq!(cfg.schedule(2, 50), (3, 0));
    }

    #[test]
    fn stage_three_destruction_resets() {
        let cfg = CurriculumConfig::default();
        assert_eq!(cfg.schedule(3, 0), (1, 1));
        assert_eq!(cfg.p_l(1), 0.05);
        assert_eq!(cfg.schedule(3, 24), (1, 5));
        assert_eq!(cfg.p_l(5), 0.25);
        assert_eq!(cfg.schedule(3, 25), (2, 1));
        assert_eq!(cfg.max_destruction_level(), 5);
    }

    #[test]
    fn manual_stage_advance() {
        let mut s = state();
        s.next_row();
        s.advance_stage();
        let r = s.next_row();
        assert_eq!((r.stage, r.n_obstacles, r.p_l), (2, 1, 0.0));
        s.advance_stage();
        let r = s.next_row();
        assert_eq!((r.stage, r.n_obstacles, r.p_l), (3, 1, 0.05));
    }

    #[test]
    fn replay_yields_identical_configs() {
        let cfg = CurriculumConfig {
            stage_episodes: Some((1, 1)),
            ..CurriculumConfig::default()
        };
        let mut a = CurriculumState::new(cfg.clone(), WorldConfig::default(), 3).unwrap();
        let mut b = CurriculumState::new(cfg, WorldConfig::default(), 3).unwrap();
        for _ in 0..4 {
            assert_eq!(a.next_episode_config().unwrap(), b.next_episode_config().unwrap());
        }
    }

    #[test]
    fn zero_obstacles() {
        let v = sample_obstacles(
            0,
            &CurriculumConfig::default(),
            &WorldConfig::default(),
            &mut seeded(1),
        )
        .unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn sealed_pocket_is_disconnected() {
        let w = WorldConfig {
            width: 30.0,
            height: 30.0,
            ..WorldConfig::default()
        };
        // A wall across the whole arena.
        assert!(!free_space_connected(&w, &[Rect::new(10.0, 0.0, 2.0, 30.0)]));
        assert!(free_space_connected(&w, &[Rect::new(10.0, 0.0, 2.0, 20.0)]));
    }

    #[test]
    fn validation() {
        let bad = CurriculumConfig {
            n_l: 0,
            ..CurriculumConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
