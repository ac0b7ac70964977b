//! Map generation for benchmark conditions and world files.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::curriculum::{free_space_connected, sample_obstacles, CurriculumConfig, EpisodeConfig};
use crate::env::{build_world, EnvSettings, Episode, EpisodeLog, Policy};
use crate::geometry::Rect;
use crate::rng::{derive_seed, seeded};
use crate::world::{occupancy_of, Obstacle, WorldConfig, WorldFile};

/// Allowed distance between reached and requested occupancy.
pub const OCCUPANCY_TOLERANCE: f64 = 0.01;

const OCCUPANCY_RESTARTS: usize = 40;
const OCCUPANCY_ATTEMPTS: usize = 2000;

/// How a map's obstacles are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleSpec {
    Count(usize),
    /// Target occupancy fraction in `[0, 1)`.
    Occupancy(f64),
}

/// Obstacles for `spec`, drawn from `rng`.
pub fn obstacles_for<R: Rng + ?Sized>(
    spec: ObstacleSpec,
    shapes: &CurriculumConfig,
    world: &WorldConfig,
    rng: &mut R,
) -> Result<Vec<Obstacle>, BenchError> {
    match spec {
        ObstacleSpec::Count(n) => Ok(sample_obstacles(n, shapes, world, rng)?),
        ObstacleSpec::Occupancy(target) => obstacles_for_occupancy(target, shapes, world, rng),
    }
}

/// Adds non-overlapping obstacles, keeping free space connected, until the
/// occupancy is within [`OCCUPANCY_TOLERANCE`] of `target`. Obstacles are
/// drawn from the curriculum size ranges; once the remaining deficit is
/// smaller than a full-size obstacle the height is cut to fit it.
pub fn obstacles_for_occupancy<R: Rng + ?Sized>(
    target: f64,
    shapes: &CurriculumConfig,
    world: &WorldConfig,
    rng: &mut R,
) -> Result<Vec<Obstacle>, BenchError> {
    if !(0.0..1.0).contains(&target) {
        return Err(BenchError::InvalidSpec(format!(
            "occupancy target {target} outside [0, 1)"
        )));
    }
    let area = world.width * world.height;
    let q = world.sensor_resolution;
    let mut best = 0.0f64;
    for _ in 0..OCCUPANCY_RESTARTS {
        let mut layout: Vec<Obstacle> = Vec::new();
        let mut occ = 0.0;
        for _ in 0..OCCUPANCY_ATTEMPTS {
            if (occ - target).abs() <= OCCUPANCY_TOLERANCE {
                return Ok(layout);
            }
            let deficit = (target - occ) * area;
            let w = rng
                .random_range(shapes.width_range.0..=shapes.width_range.1)
                .min(world.width);
            let mut h = rng
                .random_range(shapes.height_range.0..=shapes.height_range.1)
                .min(world.height);
            if w * h > deficit + OCCUPANCY_TOLERANCE * area {
                h = (deficit / w).max(q);
            }
            let x = rng.random_range(0.0..=world.width - w);
            let y = rng.random_range(0.0..=world.height - h);
            let cand = Rect::new(x, y, w, h);
            if layout.iter().any(|o| o.overlaps(&cand)) {
                continue;
            }
            layout.push(cand);
            let next = occupancy_of(world, &layout);
            if next > target + OCCUPANCY_TOLERANCE || !free_space_connected(world, &layout) {
                layout.pop();
                continue;
            }
            occ = next;
            best = best.max(occ);
        }
        if (occ - target).abs() <= OCCUPANCY_TOLERANCE {
            return Ok(layout);
        }
    }
    Err(BenchError::Occupancy {
        target,
        reached: best,
    })
}

/// Generates a world file: obstacles, landmark placement and destruction,
/// all derived from `seed`.
pub fn genmap(
    settings: &EnvSettings,
    shapes: &CurriculumConfig,
    obstacles: ObstacleSpec,
    p_l: f64,
    seed: u64,
) -> Result<WorldFile, BenchError> {
    let cfg = map_config(settings, shapes, obstacles, p_l, seed)?;
    let world = build_world(settings, &cfg)?;
    Ok(WorldFile::from_world(&world, seed))
}

/// Episode config of a generated map. Obstacles, landmarks and destruction
/// use separate streams of `seed`.
pub fn map_config(
    settings: &EnvSettings,
    shapes: &CurriculumConfig,
    obstacles: ObstacleSpec,
    p_l: f64,
    seed: u64,
) -> Result<EpisodeConfig, BenchError> {
    let world_seed = derive_seed(seed, 0);
    let landmark_seed = derive_seed(seed, 1);
    let obstacles = obstacles_for(obstacles, shapes, &settings.world, &mut seeded(world_seed))?;
    Ok(EpisodeConfig::fixed(obstacles, p_l, world_seed, landmark_seed))
}

/// Runs one episode on the world stored in `file`. Agents spawn from `seed`.
pub fn replay(
    settings: &EnvSettings,
    file: &WorldFile,
    policy: &mut dyn Policy,
    seed: u64,
) -> Result<EpisodeLog, BenchError> {
    let world = file.to_world(&settings.world)?;
    let mut settings = settings.clone();
    settings.world = world.config.clone();
    Ok(Episode::from_world(settings, world, seed, 0)?.run(policy)?)
}
