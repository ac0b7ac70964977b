//! Landmark placement by filtration over decreasing sensor radii, coverage
//! checking, and random landmark destruction.
//!
//! Free space is discretised into samples at the cell centres of a grid with
//! spacing `sample_resolution`. A sample is covered at radius `r` when some
//! landmark lies within `r` of it with an unobstructed line of sight (the
//! sight test is skipped when the world has occlusion disabled).
//!
//! For each radius in turn, landmarks are added greedily: the next landmark
//! goes on the uncovered sample whose visibility disk holds the most
//! uncovered samples, ties going to the lowest `(y, x)`. The search is a lazy
//! greedy: disk counts that ignore occlusion seed a max-heap as upper bounds
//! and exact counts are only computed for heap tops. Gains never increase as
//! coverage grows, so a freshly evaluated top is the true maximum.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::LandmarkId;
use crate::geometry::{Point, Rect};
use crate::world::{LandmarkIndex, LandmarkInstance, World};

const EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlacementError {
    #[error("the arena has no free sample points")]
    NoFreeSpace,
    #[error("invalid placement config: {0}")]
    InvalidConfig(String),
    #[error("destruction probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlacementConfig {
    /// Filtration radii, strictly decreasing, in metres.
    pub radii: Vec<f64>,
    pub sample_resolution: f64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        PlacementConfig {
            radii: vec![50.0, 23.0, 15.0],
            sample_resolution: 1.0,
        }
    }
}

impl PlacementConfig {
    pub fn validate(&self, sensor_radius: f64) -> Result<(), PlacementError> {
        if self.radii.is_empty() {
            return Err(PlacementError::InvalidConfig("no radii".into()));
        }
        if self.radii.iter().any(|r| r.is_nan() || *r <= 0.0) {
            return Err(PlacementError::InvalidConfig("radii must be positive".into()));
        }
        if self.radii.windows(2).any(|w| w[1] >= w[0]) {
            return Err(PlacementError::InvalidConfig(
                "radii must be strictly decreasing".into(),
            ));
        }
        if self.sample_resolution.is_nan() || self.sample_resolution <= 0.0 {
            return Err(PlacementError::InvalidConfig(
                "sample_resolution must be positive".into(),
            ));
        }
        let last = *self.radii.last().unwrap();
        if last + EPS < sensor_radius {
            return Err(PlacementError::InvalidConfig(format!(
                "last radius {last} is below the sensor radius {sensor_radius}"
            )));
        }
        Ok(())
    }

    pub fn final_radius(&self) -> f64 {
        *self.radii.last().expect("validated config has radii")
    }
}

/// Cell-centre samples over the arena with a free-space mask.
/// Index `j * nx + i` is the sample at `((i + 0.5) res, (j + 0.5) res)`, so
/// ascending index order is ascending `(y, x)`.
struct Samples {
    res: f64,
    nx: usize,
    ny: usize,
    free: Vec<bool>,
}

impl Samples {
    fn new(world: &World, res: f64) -> Self {
        let nx = (world.config.width / res).floor() as usize;
        let ny = (world.config.height / res).floor() as usize;
        let mut free = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let p = Point::new((i as f64 + 0.5) * res, (j as f64 + 0.5) * res);
                free[j * nx + i] = !world.in_obstacle(p);
            }
        }
        Samples { res, nx, ny, free }
    }

    fn point(&self, idx: usize) -> Point {
        Point::new(
            ((idx % self.nx) as f64 + 0.5) * self.res,
            ((idx / self.nx) as f64 + 0.5) * self.res,
        )
    }

    /// Column half-widths of the disk of radius `r` for each row offset.
    fn disk_profile(&self, r: f64) -> Vec<usize> {
        let rows = (r / self.res + EPS).floor() as usize;
        let r2 = r * r + EPS;
        (0..=rows)
            .map(|dy| {
                let mut w = 0usize;
                while {
                    let k = (w + 1) as f64 * self.res;
                    let y = dy as f64 * self.res;
                    k * k + y * y <= r2
                } {
                    w += 1;
                }
                w
            })
            .collect()
    }

    /// Visits every sample index inside the disk profile around `center`.
    fn for_each_in_disk(&self, center: usize, profile: &[usize], mut f: impl FnMut(usize)) {
        let (ci, cj) = ((center % self.nx) as i64, (center / self.nx) as i64);
        let rows = profile.len() as i64 - 1;
        for dy in -rows..=rows {
            let j = cj + dy;
            if j < 0 || j >= self.ny as i64 {
                continue;
            }
            let w = profile[dy.unsigned_abs() as usize] as i64;
            let i0 = (ci - w).max(0);
            let i1 = (ci + w).min(self.nx as i64 - 1);
            let row = j as usize * self.nx;
            for i in i0..=i1 {
                f(row + i as usize);
            }
        }
    }
}

fn obstacles_near(world: &World, p: Point, r: f64) -> Vec<Rect> {
    let bbox = Rect::new(p.x - r, p.y - r, 2.0 * r, 2.0 * r);
    world
        .obstacles()
        .iter()
        .filter(|o| o.overlaps(&bbox))
        .copied()
        .collect()
}

fn clear(obstacles: &[Rect], a: Point, b: Point) -> bool {
    !obstacles.iter().any(|o| o.segment_hits_interior(a, b))
}

/// Coverage state of one filtration level.
struct Level<'a> {
    world: &'a World,
    samples: &'a Samples,
    radius: f64,
    profile: Vec<usize>,
    uncovered: Vec<bool>,
    occlusion: bool,
}

impl Level<'_> {
    fn visible_uncovered(&self, center: usize, mut f: impl FnMut(usize)) {
        let p = self.samples.point(center);
        let near = if self.occlusion {
            obstacles_near(self.world, p, self.radius)
        } else {
            Vec::new()
        };
        self.samples.for_each_in_disk(center, &self.profile, |j| {
            if self.uncovered[j] && clear(&near, p, self.samples.point(j)) {
                f(j);
            }
        });
    }

    fn gain(&self, center: usize) -> u32 {
        let mut n = 0u32;
        self.visible_uncovered(center, |_| n += 1);
        n
    }

    fn cover_from(&mut self, center: usize) {
        let mut hit = Vec::new();
        self.visible_uncovered(center, |j| hit.push(j));
        for j in hit {
            self.uncovered[j] = false;
        }
    }

    /// Upper bound on every gain: uncovered samples in the disk, ignoring sight lines.
    fn bound(&self, center: usize, prefix: &[u32]) -> u32 {
        let s = self.samples;
        let (ci, cj) = ((center % s.nx) as i64, (center / s.nx) as i64);
        let rows = self.profile.len() as i64 - 1;
        let stride = s.nx + 1;
        let mut total = 0u32;
        for dy in -rows..=rows {
            let j = cj + dy;
            if j < 0 || j >= s.ny as i64 {
                continue;
            }
            let w = self.profile[dy.unsigned_abs() as usize] as i64;
            let i0 = (ci - w).max(0) as usize;
            let i1 = (ci + w).min(s.nx as i64 - 1) as usize;
            let row = j as usize * stride;
            total += prefix[row + i1 + 1] - prefix[row + i0];
        }
        total
    }

    fn row_prefix(&self) -> Vec<u32> {
        let s = self.samples;
        let stride = s.nx + 1;
        let mut prefix = vec![0u32; s.ny * stride];
        for j in 0..s.ny {
            for i in 0..s.nx {
                prefix[j * stride + i + 1] =
                    prefix[j * stride + i] + u32::from(self.uncovered[j * s.nx + i]);
            }
        }
        prefix
    }
}

/// Places landmarks so that every free sample sees one within the last radius.
///
/// Landmarks of earlier (larger) radii are kept by later passes. Ids are
/// assigned in placement order starting from 0.
pub fn place_landmarks_lpa(
    world: &World,
    cfg: &PlacementConfig,
) -> Result<Vec<LandmarkInstance>, PlacementError> {
    cfg.validate(world.config.sensor_radius)?;
    let samples = Samples::new(world, cfg.sample_resolution);
    if !samples.free.iter().any(|&f| f) {
        return Err(PlacementError::NoFreeSpace);
    }
    let mut placed: Vec<usize> = Vec::new();
    for &r in &cfg.radii {
        let mut level = Level {
            world,
            samples: &samples,
            radius: r,
            profile: samples.disk_profile(r),
            uncovered: samples.free.clone(),
            occlusion: world.config.occlusion,
        };
        for &idx in &placed {
            level.cover_from(idx);
        }
        let prefix = level.row_prefix();
        let mut heap: BinaryHeap<(u32, Reverse<usize>)> = (0..level.uncovered.len())
            .filter(|&i| level.uncovered[i])
            .map(|i| (level.bound(i, &prefix), Reverse(i)))
            .collect();
        let mut round = 0u32;
        let mut evaluated = vec![u32::MAX; level.uncovered.len()];
        while let Some((_, Reverse(idx))) = heap.pop() {
            if !level.uncovered[idx] {
                continue;
            }
            if evaluated[idx] == round {
                level.cover_from(idx);
                placed.push(idx);
                round += 1;
                continue;
            }
            evaluated[idx] = round;
            heap.push((level.gain(idx), Reverse(idx)));
        }
        debug_assert!(level.uncovered.iter().all(|u| !u));
    }
    Ok(placed
        .into_iter()
        .enumerate()
        .map(|(id, idx)| {
            let p = samples.point(idx);
            LandmarkInstance::new(id as u32, p.x, p.y)
        })
        .collect())
}

/// Free samples (spacing `resolution`) with no intact landmark within `r`
/// in line of sight.
pub fn coverage_check_at(
    world: &World,
    landmarks: &[LandmarkInstance],
    r: f64,
    resolution: f64,
) -> Vec<Point> {
    let samples = Samples::new(world, resolution);
    let index = LandmarkIndex::build(landmarks, world.config.width, world.config.height, r.max(1.0));
    let r2 = r * r + EPS;
    (0..samples.free.len())
        .filter(|&i| samples.free[i])
        .map(|i| samples.point(i))
        .filter(|&p| {
            !index.near(p, r).any(|li| {
                let l = &landmarks[li];
                !l.destroyed
                    && l.position().dist2(p) <= r2
                    && (!world.config.occlusion || world.line_of_sight(p, l.position()))
            })
        })
        .collect()
}

/// [`coverage_check_at`] on the sensor-resolution grid.
pub fn coverage_check(world: &World, landmarks: &[LandmarkInstance], r: f64) -> Vec<Point> {
    coverage_check_at(world, landmarks, r, world.config.sensor_resolution)
}

/// Marks each landmark destroyed independently with probability `p_l`.
///
/// Returns `(remaining, destroyed)` ids. Exactly one random draw is made per
/// landmark, in slice order.
pub fn destroy_landmarks<R: Rng + ?Sized>(
    landmarks: &mut [LandmarkInstance],
    p_l: f64,
    rng: &mut R,
) -> Result<(BTreeSet<LandmarkId>, BTreeSet<LandmarkId>), PlacementError> {
    if !(0.0..=1.0).contains(&p_l) {
        return Err(PlacementError::InvalidProbability(p_l));
    }
    let mut remaining = BTreeSet::new();
    let mut destroyed = BTreeSet::new();
    for l in landmarks.iter_mut() {
        l.destroyed = rng.random_bool(p_l);
        if l.destroyed {
            destroyed.insert(l.id);
        } else {
            remaining.insert(l.id);
        }
    }
    Ok((remaining, destroyed))
}
