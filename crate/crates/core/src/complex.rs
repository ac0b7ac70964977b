//! Abstract simplicial complexes over identifiable landmarks.
//!
//! A [`LandmarkComplex`] stores simplices up to a dimension cap (2 by default)
//! and keeps an append-only insertion log. Every observed set of co-visible
//! landmarks inserts all of its subsets up to the cap, so the complex is closed
//! under taking faces at all times. The log is ordered faces-before-cofaces,
//! which means any prefix of it replays into a valid complex as well.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default dimension cap: vertices, edges and triangles.
pub const DEFAULT_MAX_DIM: usize = 2;

/// Identifier of a placed landmark. Stable for an episode, never reused.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LandmarkId(pub u32);

impl fmt::Display for LandmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

impl From<u32> for LandmarkId {
    fn from(v: u32) -> Self {
        LandmarkId(v)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ComplexError {
    #[error("observation contains no landmarks")]
    EmptyObservation,
    #[error("a simplex needs at least one vertex")]
    EmptySimplex,
    #[error("vertex {0} appears more than once")]
    RepeatedVertex(LandmarkId),
    #[error("landmark {0} is not a vertex of the complex")]
    UnknownLandmark(LandmarkId),
    #[error("requested version {requested} is ahead of current version {current}")]
    VersionAhead { requested: u64, current: u64 },
    #[error("record version {got} does not follow current version {current}")]
    VersionGap { current: u64, got: u64 },
    #[error("simplex {0} is already present")]
    AlreadyPresent(Simplex),
    #[error("simplex {simplex} is missing its face {face}")]
    MissingFace { simplex: Simplex, face: Simplex },
    #[error("simplex {0} exceeds the dimension cap {1}")]
    DimensionTooHigh(Simplex, usize),
}

/// A simplex in canonical form: strictly ascending landmark ids.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<LandmarkId>", into = "Vec<LandmarkId>")]
pub struct Simplex(Vec<LandmarkId>);

impl Simplex {
    /// Builds a simplex from vertices in any order. Duplicates are rejected.
    pub fn new(vertices: impl IntoIterator<Item = LandmarkId>) -> Result<Self, ComplexError> {
        let mut v: Vec<LandmarkId> = vertices.into_iter().collect();
        if v.is_empty() {
            return Err(ComplexError::EmptySimplex);
        }
        v.sort_unstable();
        if let Some(w) = v.windows(2).find(|w| w[0] == w[1]) {
            return Err(ComplexError::RepeatedVertex(w[0]));
        }
        Ok(Simplex(v))
    }

    /// Shorthand for tests and examples: `Simplex::of(&[1, 2, 3])`.
    ///
    /// Panics on an empty or repeated vertex list.
    pub fn of(ids: &[u32]) -> Self {
        Simplex::new(ids.iter().copied().map(LandmarkId)).expect("invalid simplex literal")
    }

    /// Wraps vertices that are already strictly ascending.
    fn from_sorted(v: Vec<LandmarkId>) -> Self {
        debug_assert!(v.windows(2).all(|w| w[0] < w[1]));
        Simplex(v)
    }

    pub fn vertices(&self) -> &[LandmarkId] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    /// The codimension-one faces, obtained by dropping each vertex in turn.
    pub fn faces(&self) -> Vec<Simplex> {
        if self.0.len() < 2 {
            return Vec::new();
        }
        (0..self.0.len())
            .map(|skip| {
                Simplex::from_sorted(
                    self.0
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != skip)
                        .map(|(_, v)| *v)
                        .collect(),
                )
            })
            .collect()
    }
}

impl TryFrom<Vec<LandmarkId>> for Simplex {
    type Error = ComplexError;

    fn try_from(v: Vec<LandmarkId>) -> Result<Self, Self::Error> {
        Simplex::new(v)
    }
}

impl From<Simplex> for Vec<LandmarkId> {
    fn from(s: Simplex) -> Self {
        s.0
    }
}

impl fmt::Display for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.0.iter().join(","))
    }
}

/// One entry of the insertion log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertionRecord {
    #[serde(rename = "v")]
    pub version: u64,
    #[serde(rename = "s")]
    pub simplex: Simplex,
    #[serde(rename = "a")]
    pub source_agent: usize,
    #[serde(rename = "o")]
    pub observation_index: u64,
}

/// Newly inserted simplices from one operation, with per-dimension counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InsertionDelta {
    counts: Vec<usize>,
    simplices: Vec<Simplex>,
}

impl InsertionDelta {
    pub fn new(max_dim: usize) -> Self {
        InsertionDelta {
            counts: vec![0; max_dim + 1],
            simplices: Vec::new(),
        }
    }

    fn push(&mut self, s: Simplex) {
        let d = s.dim();
        if self.counts.len() <= d {
            self.counts.resize(d + 1, 0);
        }
        self.counts[d] += 1;
        self.simplices.push(s);
    }

    /// Number of new simplices of dimension `dim` (zero beyond the cap).
    pub fn count(&self, dim: usize) -> usize {
        self.counts.get(dim).copied().unwrap_or(0)
    }

    /// `(c_s0, c_s1, c_s2)`.
    pub fn counts3(&self) -> [usize; 3] {
        [self.count(0), self.count(1), self.count(2)]
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    /// Appends another delta. Callers keep the two disjoint.
    pub fn merge(&mut self, other: InsertionDelta) {
        for s in other.simplices {
            self.push(s);
        }
    }

    /// Delta made of the simplices carried by a slice of log records.
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a InsertionRecord>) -> Self {
        let mut d = InsertionDelta::default();
        for r in records {
            d.push(r.simplex.clone());
        }
        d
    }
}

/// Dimension-capped abstract simplicial complex with a versioned insertion log.
#[derive(Clone, Debug)]
pub struct LandmarkComplex {
    max_dim: usize,
    cells: Vec<HashSet<Simplex>>,
    log: Vec<InsertionRecord>,
}

impl Default for LandmarkComplex {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_DIM)
    }
}

impl LandmarkComplex {
    pub fn new(max_dim: usize) -> Self {
        LandmarkComplex {
            max_dim,
            cells: vec![HashSet::new(); max_dim + 1],
            log: Vec::new(),
        }
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    /// Number of insertions performed so far.
    pub fn version(&self) -> u64 {
        self.log.len() as u64
    }

    pub fn log(&self) -> &[InsertionRecord] {
        &self.log
    }

    /// `|C_dim|`, zero above the cap.
    pub fn count(&self, dim: usize) -> usize {
        self.cells.get(dim).map_or(0, HashSet::len)
    }

    /// `(|C0|, |C1|, |C2|)`.
    pub fn counts3(&self) -> [usize; 3] {
        [self.count(0), self.count(1), self.count(2)]
    }

    pub fn contains(&self, simplex: &Simplex) -> bool {
        self.cells
            .get(simplex.dim())
            .is_some_and(|c| c.contains(simplex))
    }

    pub fn contains_vertex(&self, id: LandmarkId) -> bool {
        self.contains(&Simplex::from_sorted(vec![id]))
    }

    /// Simplices of one dimension in ascending canonical order.
    pub fn simplices(&self, dim: usize) -> Vec<Simplex> {
        let mut v: Vec<Simplex> = self
            .cells
            .get(dim)
            .map(|c| c.iter().cloned().collect())
            .unwrap_or_default();
        v.sort_unstable();
        v
    }

    /// Vertex ids in ascending order.
    pub fn vertex_ids(&self) -> Vec<LandmarkId> {
        let mut v: Vec<LandmarkId> = self.cells[0].iter().map(|s| s.0[0]).collect();
        v.sort_unstable();
        v
    }

    /// True when both complexes hold exactly the same cells (logs may differ).
    pub fn same_cells(&self, other: &LandmarkComplex) -> bool {
        let dims = self.cells.len().max(other.cells.len());
        (0..dims).all(|d| match (self.cells.get(d), other.cells.get(d)) {
            (Some(a), Some(b)) => a == b,
            (Some(a), None) | (None, Some(a)) => a.is_empty(),
            (None, None) => true,
        })
    }

    /// Inserts every subset of `seen` of size at most `max_dim + 1`.
    ///
    /// Subsets are visited by ascending size and then lexicographically, so the
    /// log always lists a simplex after all of its faces.
    pub fn insert_observation(
        &mut self,
        seen: impl IntoIterator<Item = LandmarkId>,
        source_agent: usize,
        observation_index: u64,
    ) -> Result<InsertionDelta, ComplexError> {
        let ids: Vec<LandmarkId> = seen.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        if ids.is_empty() {
            return Err(ComplexError::EmptyObservation);
        }
        let mut delta = InsertionDelta::new(self.max_dim);
        let top = ids.len().min(self.max_dim + 1);
        for size in 1..=top {
            for combo in ids.iter().copied().combinations(size) {
                let s = Simplex::from_sorted(combo);
                if self.cells[size - 1].insert(s.clone()) {
                    self.log.push(InsertionRecord {
                        version: self.log.len() as u64 + 1,
                        simplex: s.clone(),
                        source_agent,
                        observation_index,
                    });
                    delta.push(s);
                }
            }
        }
        Ok(delta)
    }

    /// Applies one log record produced elsewhere (a server or a saved log).
    ///
    /// The record must carry the next version, must be new, and all of its
    /// faces must already be present.
    pub fn apply_record(&mut self, rec: &InsertionRecord) -> Result<(), ComplexError> {
        let current = self.version();
        if rec.version != current + 1 {
            return Err(ComplexError::VersionGap {
                current,
                got: rec.version,
            });
        }
        let s = &rec.simplex;
        if s.dim() > self.max_dim {
            return Err(ComplexError::DimensionTooHigh(s.clone(), self.max_dim));
        }
        if self.contains(s) {
            return Err(ComplexError::AlreadyPresent(s.clone()));
        }
        if let Some(face) = s.faces().into_iter().find(|f| !self.contains(f)) {
            return Err(ComplexError::MissingFace {
                simplex: s.clone(),
                face,
            });
        }
        self.cells[s.dim()].insert(s.clone());
        self.log.push(rec.clone());
        Ok(())
    }

    /// Rebuilds a complex from a log.
    pub fn replay<'a>(
        max_dim: usize,
        records: impl IntoIterator<Item = &'a InsertionRecord>,
    ) -> Result<Self, ComplexError> {
        let mut c = LandmarkComplex::new(max_dim);
        for r in records {
            c.apply_record(r)?;
        }
        Ok(c)
    }

    /// Records with a version strictly greater than `version`, ascending.
    pub fn diff_since(&self, version: u64) -> Result<&[InsertionRecord], ComplexError> {
        let current = self.version();
        if version > current {
            return Err(ComplexError::VersionAhead {
                requested: version,
                current,
            });
        }
        Ok(&self.log[version as usize..])
    }

    pub fn skeleton(&self) -> Skeleton {
        let mut adj: BTreeMap<LandmarkId, BTreeSet<LandmarkId>> = BTreeMap::new();
        for v in &self.cells[0] {
            adj.entry(v.0[0]).or_default();
        }
        if let Some(edges) = self.cells.get(1) {
            for e in edges {
                let (a, b) = (e.0[0], e.0[1]);
                adj.entry(a).or_default().insert(b);
                adj.entry(b).or_default().insert(a);
            }
        }
        Skeleton { adj }
    }

    /// Shortest hop path on the skeleton. See [`Skeleton::hop_path`].
    pub fn hop_path(
        &self,
        from: LandmarkId,
        to: LandmarkId,
    ) -> Result<Option<Vec<LandmarkId>>, ComplexError> {
        self.skeleton().hop_path(from, to)
    }

    /// Writes the log as line-delimited JSON, one record per line.
    pub fn write_log<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.log {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads a line-delimited JSON log and replays it. Blank lines are skipped.
    pub fn read_log<R: BufRead>(max_dim: usize, input: R) -> Result<Self, LogError> {
        let mut c = LandmarkComplex::new(max_dim);
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: InsertionRecord =
                serde_json::from_str(&line).map_err(|source| LogError::Parse {
                    line: i + 1,
                    source,
                })?;
            c.apply_record(&rec)?;
        }
        Ok(c)
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

/// Undirected graph of 0-simplices (nodes) and 1-simplices (edges).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Skeleton {
    adj: BTreeMap<LandmarkId, BTreeSet<LandmarkId>>,
}

impl Skeleton {
    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn nodes(&self) -> impl Iterator<Item = LandmarkId> + '_ {
        self.adj.keys().copied()
    }

    /// Edges as `(a, b)` with `a < b`, ascending.
    pub fn edges(&self) -> Vec<(LandmarkId, LandmarkId)> {
        self.adj
            .iter()
            .flat_map(|(&a, n)| n.range(a..).map(move |&b| (a, b)))
            .collect()
    }

    pub fn neighbors(&self, id: LandmarkId) -> impl Iterator<Item = LandmarkId> + '_ {
        self.adj.get(&id).into_iter().flat_map(|n| n.iter().copied())
    }

    pub fn degree(&self, id: LandmarkId) -> usize {
        self.adj.get(&id).map_or(0, BTreeSet::len)
    }

    pub fn contains(&self, id: LandmarkId) -> bool {
        self.adj.contains_key(&id)
    }

    /// Hop distances from `source` to every reachable node.
    pub fn distances(&self, source: LandmarkId) -> BTreeMap<LandmarkId, usize> {
        let mut dist = BTreeMap::new();
        if !self.contains(source) {
            return dist;
        }
        let mut queue = VecDeque::from([source]);
        dist.insert(source, 0);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            for v in self.neighbors(u) {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(v) {
                    e.insert(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn connected_components(&self) -> Vec<BTreeSet<LandmarkId>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for v in self.nodes() {
            if seen.contains(&v) {
                continue;
            }
            let comp: BTreeSet<LandmarkId> = self.distances(v).into_keys().collect();
            seen.extend(comp.iter().copied());
            out.push(comp);
        }
        out
    }

    /// Breadth-first shortest path from `from` to `to`, inclusive.
    ///
    /// Among equally short paths the one choosing the smallest next vertex at
    /// every hop is returned. `Ok(None)` when the two lie in different
    /// components.
    pub fn hop_path(
        &self,
        from: LandmarkId,
        to: LandmarkId,
    ) -> Result<Option<Vec<LandmarkId>>, ComplexError> {
        for id in [from, to] {
            if !self.contains(id) {
                return Err(ComplexError::UnknownLandmark(id));
            }
        }
        // Distances to the goal let the walk pick the smallest id among the
        // neighbours that are exactly one hop closer.
        let to_goal = self.distances(to);
        let Some(&hops) = to_goal.get(&from) else {
            return Ok(None);
        };
        let mut path = Vec::with_capacity(hops + 1);
        let mut cur = from;
        path.push(cur);
        while cur != to {
            let d = to_goal[&cur];
            cur = self
                .neighbors(cur)
                .find(|n| to_goal.get(n) == Some(&(d - 1)))
                .expect("bfs layer must have a predecessor");
            path.push(cur);
        }
        Ok(Some(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<LandmarkId> {
        v.iter().copied().map(LandmarkId).collect()
    }

    #[test]
    fn triangle_observation_inserts_all_faces() {
        let mut c = LandmarkComplex::default();
        let d = c.insert_observation(ids(&[1, 2, 3]), 0, 0).unwrap();
        assert_eq!(d.counts3(), [3, 3, 1]);
        assert_eq!(c.counts3(), [3, 3, 1]);
        assert!(c.contains(&Simplex::of(&[1, 3])));
        assert!(!c.contains(&Simplex::of(&[1, 4])));
        assert_eq!(c.version(), 7);
    }

    #[test]
    fn repeated_observation_is_a_no_op() {
        let mut c = LandmarkComplex::default();
        c.insert_observation(ids(&[1, 2, 3]), 0, 0).unwrap();
        let d = c.insert_observation(ids(&[3, 2, 1]), 1, 1).unwrap();
        assert_eq!(d.counts3(), [0, 0, 0]);
        assert_eq!(c.version(), 7);
    }

    #[test]
    fn five_ids_capped_at_triangles() {
        let mut c = LandmarkComplex::default();
        let d = c.insert_observation(ids(&[4, 9, 1, 7, 2]), 0, 0).unwrap();
        assert_eq!(d.counts3(), [5, 10, 10]);
        assert_eq!(d.count(3), 0);
    }

    #[test]
    fn empty_observation_rejected() {
        let mut c = LandmarkComplex::default();
        assert_eq!(
            c.insert_observation(Vec::new(), 0, 0),
            Err(ComplexError::EmptyObservation)
        );
    }

    #[test]
    fn empty_complex_contains_nothing() {
        let c = LandmarkComplex::default();
        assert!(!c.contains(&Simplex::of(&[1])));
        assert_eq!(c.skeleton().node_count(), 0);
        assert_eq!(c.skeleton().edge_count(), 0);
    }

    #[test]
    fn simplex_rejects_duplicates_and_sorts() {
        assert_eq!(
            Simplex::new(ids(&[3, 1, 3])),
            Err(ComplexError::RepeatedVertex(LandmarkId(3)))
        );
        assert_eq!(Simplex::new(ids(&[3, 1])).unwrap().vertices(), &ids(&[1, 3])[..]);
        assert_eq!(Simplex::new(Vec::new()), Err(ComplexError::EmptySimplex));
    }

    #[test]
    fn skeleton_counts_and_components() {
        let mut c = LandmarkComplex::default();
        c.insert_observation(ids(&[1, 2, 3]), 0, 0).unwrap();
        let s = c.skeleton();
        assert_eq!((s.node_count(), s.edge_count()), (3, 3));

        let mut c = LandmarkComplex::default();
        c.insert_observation(ids(&[1, 2]), 0, 0).unwrap();
        c.insert_observation(ids(&[3, 4]), 0, 1).unwrap();
        assert_eq!(c.skeleton().connected_components().len(), 2);
    }

    #[test]
    fn hop_paths() {
        let mut c = LandmarkComplex::default();
        c.insert_observation(ids(&[1, 2]), 0, 0).unwrap();
        c.insert_observation(ids(&[2, 3]), 0, 1).unwrap();
        c.insert_observation(ids(&[7, 8]), 0, 2).unwrap();
        assert_eq!(c.hop_path(LandmarkId(1), LandmarkId(1)).unwrap(), Some(ids(&[1])));
        assert_eq!(
            c.hop_path(LandmarkId(1), LandmarkId(3)).unwrap(),
            Some(ids(&[1, 2, 3]))
        );
        assert_eq!(c.hop_path(LandmarkId(1), LandmarkId(8)).unwrap(), None);
        assert_eq!(
            c.hop_path(LandmarkId(1), LandmarkId(5)),
            Err(ComplexError::UnknownLandmark(LandmarkId(5)))
        );
    }

    #[test]
    fn hop_path_prefers_smallest_next_vertex() {
        // Square 1-5-9 and 1-3-9: both length 2, the walk goes through 3.
        let mut c = LandmarkComplex::default();
        for e in [[1, 5], [5, 9], [1, 3], [3, 9]] {
            c.insert_observation(ids(&e), 0, 0).unwrap();
        }
        assert_eq!(
            c.hop_path(LandmarkId(1), LandmarkId(9)).unwrap(),
            Some(ids(&[1, 3, 9]))
        );
    }

    #[test]
    fn diff_since_bounds() {
        let mut c = LandmarkComplex::default();
        c.insert_observation(ids(&[1, 2, 3]), 0, 0).unwrap();
        assert_eq!(c.diff_since(0).unwrap().len(), 7);
        assert!(c.diff_since(7).unwrap().is_empty());
        assert_eq!(
            c.diff_since(8),
            Err(ComplexError::VersionAhead {
                requested: 8,
                current: 7
            })
        );
    }

    #[test]
    fn apply_record_checks_version_and_faces() {
        let mut src = LandmarkComplex::default();
        src.insert_observation(ids(&[1, 2]), 0, 0).unwrap();
        let log = src.log().to_vec();

        let mut dst = LandmarkComplex::default();
        assert!(matches!(
            dst.apply_record(&log[1]),
            Err(ComplexError::VersionGap { current: 0, got: 2 })
        ));
        let edge_first = InsertionRecord {
            version: 1,
            ..log[2].clone()
        };
        assert!(matches!(
            dst.apply_record(&edge_first),
            Err(ComplexError::MissingFace { .. })
        ));
        for r in &log {
            dst.apply_record(r).unwrap();
        }
        assert!(dst.same_cells(&src));
    }

    #[test]
    fn log_round_trips_through_ndjson() {
        let mut c = LandmarkComplex::default();
        c.insert_observation(ids(&[1, 2, 3]), 2, 5).unwrap();
        let mut buf = Vec::new();
        c.write_log(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), r#"{"v":1,"s":[1],"a":2,"o":5}"#);
        let back = LandmarkComplex::read_log(2, &buf[..]).unwrap();
        assert!(back.same_cells(&c));
        assert_eq!(back.log(), c.log());
    }

    #[test]
    fn faces_of_triangle() {
        let f = Simplex::of(&[1, 2, 3]).faces();
        assert_eq!(
            f,
            vec![Simplex::of(&[2, 3]), Simplex::of(&[1, 3]), Simplex::of(&[1, 2])]
        );
        assert!(Simplex::of(&[4]).faces().is_empty());
    }
}
