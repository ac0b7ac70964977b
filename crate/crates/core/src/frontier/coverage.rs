//! Coverage memory for the exploration fallback.
//!
//! Two grids built only from agent odometry and sensor readings: a coarse
//! grid of cells some agent has stood in, and a fine occupancy grid at
//! sensor resolution holding every obstacle cell sensed so far. Unsensed
//! space is assumed free when planning.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::geometry::Point;
use crate::world::{Channel, SensorReading, WorldConfig};

const WALL_COST: u32 = 4;

/// A fine-grid route to an unswept coarse cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    pub cell: usize,
    pub points: Vec<Point>,
}

#[derive(Clone, Debug, Default)]
pub struct CoverageMap {
    q: f64,
    fnx: usize,
    fny: usize,
    blocked: Vec<bool>,
    /// Blocked cells in each 3x3 neighbourhood.
    near: Vec<u8>,
    cell: f64,
    cnx: usize,
    cny: usize,
    swept: Vec<bool>,
}

impl CoverageMap {
    /// Coarse cells have side `d / sqrt(2)`, so standing anywhere in one
    /// puts all of it within sensor range.
    pub fn new(cfg: &WorldConfig) -> Self {
        let q = cfg.sensor_resolution;
        let fnx = ((cfg.width / q).ceil() as usize).max(1);
        let fny = ((cfg.height / q).ceil() as usize).max(1);
        let cell = cfg.sensor_radius / std::f64::consts::SQRT_2;
        let cnx = ((cfg.width / cell).ceil() as usize).max(1);
        let cny = ((cfg.height / cell).ceil() as usize).max(1);
        CoverageMap {
            q,
            fnx,
            fny,
            blocked: vec![false; fnx * fny],
            near: vec![0; fnx * fny],
            cell,
            cnx,
            cny,
            swept: vec![false; cnx * cny],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.swept.is_empty()
    }

    pub fn coarse_of(&self, p: Point) -> usize {
        let i = ((p.x / self.cell).floor().max(0.0) as usize).min(self.cnx - 1);
        let j = ((p.y / self.cell).floor().max(0.0) as usize).min(self.cny - 1);
        j * self.cnx + i
    }

    fn fine_of(&self, p: Point) -> usize {
        let i = ((p.x / self.q).floor().max(0.0) as usize).min(self.fnx - 1);
        let j = ((p.y / self.q).floor().max(0.0) as usize).min(self.fny - 1);
        j * self.fnx + i
    }

    fn fine_center(&self, k: usize) -> Point {
        Point::new(
            ((k % self.fnx) as f64 + 0.5) * self.q,
            ((k / self.fnx) as f64 + 0.5) * self.q,
        )
    }

    pub fn is_swept(&self, k: usize) -> bool {
        self.swept[k]
    }

    pub fn mark_swept(&mut self, k: usize) {
        self.swept[k] = true;
    }

    pub fn swept_fraction(&self) -> f64 {
        self.swept.iter().filter(|&&s| s).count() as f64 / self.swept.len() as f64
    }

    pub fn is_blocked(&self, p: Point) -> bool {
        self.blocked[self.fine_of(p)]
    }

    /// Marks the agent's coarse cell swept and stores sensed obstacle cells.
    pub fn record(&mut self, position: Point, reading: &SensorReading, cfg: &WorldConfig) {
        let k = self.coarse_of(position);
        self.swept[k] = true;
        let half = cfg.grid_half() as f64;
        let n = reading.size();
        for r in 0..n {
            for c in 0..n {
                if !reading.get(r, c, Channel::Obstacle) {
                    continue;
                }
                let w = position + Point::new((c as f64 - half) * self.q, (r as f64 - half) * self.q);
                if w.x >= 0.0 && w.y >= 0.0 && w.x < cfg.width && w.y < cfg.height {
                    let f = self.fine_of(w);
                    self.block(f);
                }
            }
        }
    }

    fn block(&mut self, k: usize) {
        if std::mem::replace(&mut self.blocked[k], true) {
            return;
        }
        let (i, j) = ((k % self.fnx) as i64, (k / self.fnx) as i64);
        for nj in (j - 1).max(0)..=(j + 1).min(self.fny as i64 - 1) {
            for ni in (i - 1).max(0)..=(i + 1).min(self.fnx as i64 - 1) {
                self.near[nj as usize * self.fnx + ni as usize] += 1;
            }
        }
    }

    fn blocked_at(&self, i: i64, j: i64) -> bool {
        i < 0
            || j < 0
            || i >= self.fnx as i64
            || j >= self.fny as i64
            || self.blocked[j as usize * self.fnx + i as usize]
    }

    /// Free and not pinched between blocked cells on opposite sides; one-cell
    /// gaps may be narrower than an agent.
    fn passable(&self, k: usize) -> bool {
        if self.blocked[k] {
            return false;
        }
        let (i, j) = ((k % self.fnx) as i64, (k / self.fnx) as i64);
        !(self.blocked_at(i - 1, j) && self.blocked_at(i + 1, j))
            && !(self.blocked_at(i, j - 1) && self.blocked_at(i, j + 1))
    }

    fn near_wall(&self, k: usize) -> bool {
        let (i, j) = (k % self.fnx, k / self.fnx);
        self.near[k] > 0 || i == 0 || j == 0 || i + 1 == self.fnx || j + 1 == self.fny
    }

    /// Cheapest route over passable fine cells from `from` to a cell of an
    /// unswept coarse cell outside `claimed`. Steps beside a known obstacle
    /// or the arena edge cost more than open ones.
    pub fn plan(&self, from: Point, claimed: &[usize]) -> Option<Route> {
        let start = self.fine_of(from);
        let mut cost = vec![u32::MAX; self.blocked.len()];
        let mut parent = vec![usize::MAX; self.blocked.len()];
        cost[start] = 0;
        parent[start] = start;
        let mut heap = BinaryHeap::from([Reverse((0u32, start))]);
        while let Some(Reverse((c, k))) = heap.pop() {
            if c > cost[k] {
                continue;
            }
            let centre = self.fine_center(k);
            let coarse = self.coarse_of(centre);
            if !self.swept[coarse] && !claimed.contains(&coarse) {
                let mut points = vec![centre];
                let mut at = k;
                while parent[at] != at {
                    at = parent[at];
                    points.push(self.fine_center(at));
                }
                points.reverse();
                return Some(Route {
                    cell: coarse,
                    points,
                });
            }
            let (i, j) = (k % self.fnx, k / self.fnx);
            let mut next = Vec::with_capacity(4);
            if i > 0 {
                next.push(k - 1);
            }
            if i + 1 < self.fnx {
                next.push(k + 1);
            }
            if j > 0 {
                next.push(k - self.fnx);
            }
            if j + 1 < self.fny {
                next.push(k + self.fnx);
            }
            for nk in next {
                if !self.passable(nk) {
                    continue;
                }
                let nc = c + if self.near_wall(nk) { WALL_COST } else { 1 };
                if nc < cost[nk] {
                    cost[nk] = nc;
                    parent[nk] = k;
                    heap.push(Reverse((nc, nk)));
                }
            }
        }
        None
    }
}
