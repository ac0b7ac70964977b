//! Client/server synchronization of landmark records.
//!
//! Clients queue co-visibility observations locally and push them in a
//! [`SyncRequest`]. The server inserts them into the global complex and
//! answers with every record the client has not seen yet. Each request is
//! one unit of communication cost, whatever its payload.
//!
//! The same message types travel in-process (via [`ServerState::handle_sync`])
//! and over a socket (via [`wire`]).

pub mod wire;

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{ComplexError, InsertionDelta, InsertionRecord, LandmarkComplex, LandmarkId};
use crate::world::LandmarkInstance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SyncError {
    #[error("unknown agent {agent} (server has {agents})")]
    UnknownAgent { agent: usize, agents: usize },
    #[error("client version {requested} is ahead of server version {current}")]
    VersionAhead { requested: u64, current: u64 },
    #[error("observation {index} is malformed: {reason}")]
    MalformedObservation { index: usize, reason: String },
    #[error("delta does not continue from version {expected} (got {got})")]
    VersionGap { expected: u64, got: u64 },
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

impl SyncError {
    /// Short machine-readable code used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            SyncError::UnknownAgent { .. } => "unknown_agent",
            SyncError::VersionAhead { .. } => "version_ahead",
            SyncError::MalformedObservation { .. } => "malformed_observation",
            SyncError::VersionGap { .. } => "version_gap",
            SyncError::Complex(_) => "complex",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncRequest {
    pub agent: usize,
    pub known_version: u64,
    pub observations: Vec<Vec<LandmarkId>>,
    pub request_id: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncDelta {
    pub records: Vec<InsertionRecord>,
    pub new_version: u64,
    pub complete: bool,
}

/// Server reply plus the simplices this request added to the global complex.
#[derive(Clone, Debug, PartialEq)]
pub struct SyncOutcome {
    pub delta: SyncDelta,
    pub inserted: InsertionDelta,
    /// True when the request id had been seen before and nothing was inserted.
    pub duplicate: bool,
}

/// Authoritative landmark database.
#[derive(Clone, Debug)]
pub struct ServerState {
    complex: LandmarkComplex,
    last_acked: Vec<u64>,
    comm_counts: Vec<u64>,
    universe: BTreeSet<LandmarkId>,
    remaining: BTreeSet<LandmarkId>,
    seen_requests: Vec<HashSet<u64>>,
    observations: u64,
}

impl ServerState {
    /// `universe` is every placed landmark id; `remaining` the undestroyed ones.
    pub fn new(
        n_agents: usize,
        universe: BTreeSet<LandmarkId>,
        remaining: BTreeSet<LandmarkId>,
    ) -> Self {
        ServerState {
            complex: LandmarkComplex::default(),
            last_acked: vec![0; n_agents],
            comm_counts: vec![0; n_agents],
            universe,
            remaining,
            seen_requests: vec![HashSet::new(); n_agents],
            observations: 0,
        }
    }

    pub fn from_landmarks(n_agents: usize, landmarks: &[LandmarkInstance]) -> Self {
        let universe = landmarks.iter().map(|l| l.id).collect();
        let remaining = landmarks
            .iter()
            .filter(|l| !l.destroyed)
            .map(|l| l.id)
            .collect();
        ServerState::new(n_agents, universe, remaining)
    }

    pub fn n_agents(&self) -> usize {
        self.comm_counts.len()
    }

    pub fn complex(&self) -> &LandmarkComplex {
        &self.complex
    }

    pub fn version(&self) -> u64 {
        self.complex.version()
    }

    pub fn comm_counts(&self) -> &[u64] {
        &self.comm_counts
    }

    pub fn comm_total(&self) -> u64 {
        self.comm_counts.iter().sum()
    }

    pub fn last_acked(&self, agent: usize) -> Option<u64> {
        self.last_acked.get(agent).copied()
    }

    pub fn remaining_ids(&self) -> &BTreeSet<LandmarkId> {
        &self.remaining
    }

    /// True iff every undestroyed landmark is a vertex of the global complex.
    pub fn completion_check(&self) -> bool {
        self.remaining.iter().all(|&id| self.complex.contains_vertex(id))
    }

    pub fn handle_sync(&mut self, req: &SyncRequest) -> Result<SyncDelta, SyncError> {
        self.handle_sync_credited(req).map(|o| o.delta)
    }

    /// Handles one request and reports which simplices it inserted.
    ///
    /// A rejected request changes nothing, including the comm count.
    pub fn handle_sync_credited(&mut self, req: &SyncRequest) -> Result<SyncOutcome, SyncError> {
        let agents = self.n_agents();
        if req.agent >= agents {
            return Err(SyncError::UnknownAgent {
                agent: req.agent,
                agents,
            });
        }
        let current = self.version();
        if req.known_version > current {
            return Err(SyncError::VersionAhead {
                requested: req.known_version,
                current,
            });
        }
        for (index, obs) in req.observations.iter().enumerate() {
            self.validate_observation(index, obs)?;
        }

        self.comm_counts[req.agent] += 1;
        let duplicate = !self.seen_requests[req.agent].insert(req.request_id);
        let mut inserted = InsertionDelta::new(self.complex.max_dim());
        if !duplicate {
            for obs in &req.observations {
                self.observations += 1;
                let d = self.complex.insert_observation(
                    obs.iter().copied(),
                    req.agent,
                    self.observations,
                )?;
                inserted.merge(d);
            }
        }
        let records = self.complex.diff_since(req.known_version)?.to_vec();
        let new_version = self.version();
        self.last_acked[req.agent] = new_version;
        Ok(SyncOutcome {
            delta: SyncDelta {
                records,
                new_version,
                complete: self.completion_check(),
            },
            inserted,
            duplicate,
        })
    }

    fn validate_observation(&self, index: usize, obs: &[LandmarkId]) -> Result<(), SyncError> {
        let bad = |reason: String| SyncError::MalformedObservation { index, reason };
        if obs.is_empty() {
            return Err(bad("empty landmark set".into()));
        }
        let mut seen = BTreeSet::new();
        for id in obs {
            if !self.universe.contains(id) {
                return Err(bad(format!("unknown landmark {id}")));
            }
            if !seen.insert(*id) {
                return Err(bad(format!("repeated landmark {id}")));
            }
        }
        Ok(())
    }
}

/// A client's local landmark database and its outbox.
#[derive(Clone, Debug)]
pub struct ClientDb {
    pub agent: usize,
    local: LandmarkComplex,
    pending: Vec<(BTreeSet<LandmarkId>, u64)>,
    outstanding: Option<(SyncRequest, usize)>,
    next_request_id: u64,
}

impl ClientDb {
    pub fn new(agent: usize) -> Self {
        ClientDb {
            agent,
            local: LandmarkComplex::default(),
            pending: Vec::new(),
            outstanding: None,
            next_request_id: 0,
        }
    }

    pub fn local(&self) -> &LandmarkComplex {
        &self.local
    }

    pub fn known_version(&self) -> u64 {
        self.local.version()
    }

    pub fn pending(&self) -> &[(BTreeSet<LandmarkId>, u64)] {
        &self.pending
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// True if the landmark is a vertex of the local complex.
    pub fn knows(&self, id: LandmarkId) -> bool {
        self.local.contains_vertex(id)
    }

    /// Queues an observation for the next request. Empty sets are ignored.
    pub fn push_observation(&mut self, seen: BTreeSet<LandmarkId>, observation_index: u64) {
        if !seen.is_empty() {
            self.pending.push((seen, observation_index));
        }
    }

    /// Builds a request carrying every pending observation.
    ///
    /// While a request is unacknowledged the same request (same id, same
    /// payload) is returned, so retries are safe.
    pub fn make_request(&mut self) -> SyncRequest {
        if let Some((req, _)) = &self.outstanding {
            return req.clone();
        }
        let req = SyncRequest {
            agent: self.agent,
            known_version: self.known_version(),
            observations: self
                .pending
                .iter()
                .map(|(s, _)| s.iter().copied().collect())
                .collect(),
            request_id: self.next_request_id,
        };
        self.next_request_id += 1;
        self.outstanding = Some((req.clone(), self.pending.len()));
        req
    }

    /// Replays a server delta. Returns the simplices new to the local complex.
    ///
    /// On success the observations carried by the outstanding request are
    /// dropped from the pending list.
    pub fn apply_delta(&mut self, delta: &SyncDelta) -> Result<InsertionDelta, SyncError> {
        let expected = self.known_version();
        if let Some(first) = delta.records.first() {
            if first.version != expected + 1 {
                return Err(SyncError::VersionGap {
                    expected,
                    got: first.version,
                });
            }
        }
        let last = delta.records.last().map_or(expected, |r| r.version);
        if last != delta.new_version {
            return Err(SyncError::VersionGap {
                expected: last,
                got: delta.new_version,
            });
        }
        // Validate on a scratch copy so a bad delta leaves the client untouched.
        let mut next = self.local.clone();
        for r in &delta.records {
            next.apply_record(r)?;
        }
        self.local = next;
        if let Some((_, carried)) = self.outstanding.take() {
            self.pending.drain(..carried);
        }
        Ok(InsertionDelta::from_records(&delta.records))
    }

    /// Forgets an unacknowledged request so the next one is built afresh.
    pub fn abandon_outstanding(&mut self) {
        self.outstanding = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<LandmarkId> {
        v.iter().map(|&i| LandmarkId(i)).collect()
    }

    fn set(v: &[u32]) -> BTreeSet<LandmarkId> {
        ids(v).into_iter().collect()
    }

    fn server(n: usize, universe: &[u32], remaining: &[u32]) -> ServerState {
        ServerState::new(n, set(universe), set(remaining))
    }

    #[test]
    fn empty_request_counts_once() {
        let mut s = server(1, &[0, 1], &[0, 1]);
        let d = s
            .handle_sync(&SyncRequest {
                agent: 0,
                known_version: 0,
                observations: vec![],
                request_id: 0,
            })
            .unwrap();
        assert!(d.records.is_empty());
        assert_eq!(d.new_version, 0);
        assert!(!d.complete);
        assert_eq!(s.comm_counts(), &[1]);
    }

    #[test]
    fn two_clients_converge() {
        let mut s = server(2, &[1, 2, 3, 4], &[1, 2, 3, 4]);
        let mut a = ClientDb::new(0);
        let mut b = ClientDb::new(1);
        a.push_observation(set(&[1, 2]), 0);
        b.push_observation(set(&[3, 4]), 0);
        let ra = a.make_request();
        let da = s.handle_sync(&ra).unwrap();
        a.apply_delta(&da).unwrap();
        let rb = b.make_request();
        let db = s.handle_sync(&rb).unwrap();
        b.apply_delta(&db).unwrap();
        assert!(db.complete);
        // A catches up with an empty request.
        let ra = a.make_request();
        let da = s.handle_sync(&ra).unwrap();
        a.apply_delta(&da).unwrap();
        assert!(a.local().same_cells(s.complex()));
        assert!(b.local().same_cells(s.complex()));
        assert_eq!(s.comm_counts(), &[2, 1]);
        assert_eq!(a.pending_len() + b.pending_len(), 0);
    }

    #[test]
    fn completion_on_last_landmark() {
        let mut s = server(1, &[0, 1, 2], &[0, 1]);
        assert!(!s.completion_check());
        let mut c = ClientDb::new(0);
        c.push_observation(set(&[0]), 0);
        let d = s.handle_sync(&c.make_request()).unwrap();
        assert!(!d.complete);
        c.apply_delta(&d).unwrap();
        c.push_observation(set(&[1]), 1);
        let d = s.handle_sync(&c.make_request()).unwrap();
        assert!(d.complete);
    }

    #[test]
    fn vacuous_completion() {
        let s = server(1, &[0, 1], &[]);
        assert!(s.completion_check());
    }

    #[test]
    fn rejects_bad_requests_without_counting() {
        let mut s = server(1, &[0, 1], &[0, 1]);
        let mk = |known_version, obs: Vec<Vec<LandmarkId>>| SyncRequest {
            agent: 0,
            known_version,
            observations: obs,
            request_id: 9,
        };
        assert!(matches!(
            s.handle_sync(&mk(3, vec![])),
            Err(SyncError::VersionAhead { .. })
        ));
        assert!(matches!(
            s.handle_sync(&mk(0, vec![vec![]])),
            Err(SyncError::MalformedObservation { .. })
        ));
        assert!(matches!(
            s.handle_sync(&mk(0, vec![ids(&[0]), ids(&[7])])),
            Err(SyncError::MalformedObservation { index: 1, .. })
        ));
        assert!(matches!(
            s.handle_sync(&mk(0, vec![ids(&[1, 1])])),
            Err(SyncError::MalformedObservation { .. })
        ));
        let mut r = mk(0, vec![]);
        r.agent = 4;
        assert!(matches!(s.handle_sync(&r), Err(SyncError::UnknownAgent { .. })));
        assert_eq!(s.comm_counts(), &[0]);
        assert_eq!(s.version(), 0);
    }

    #[test]
    fn redelivery_is_idempotent() {
        let mut s = server(1, &[0, 1], &[0, 1]);
        let mut c = ClientDb::new(0);
        c.push_observation(set(&[0, 1]), 0);
        let r = c.make_request();
        let first = s.handle_sync_credited(&r).unwrap();
        // The reply is lost; the client retries the same request.
        let again = c.make_request();
        assert_eq!(r, again);
        let second = s.handle_sync_credited(&again).unwrap();
        assert!(second.duplicate);
        assert!(second.inserted.is_empty());
        assert_eq!(first.delta, second.delta);
        assert_eq!(s.version(), 3);
        assert_eq!(s.comm_counts(), &[2]);
        c.apply_delta(&second.delta).unwrap();
        assert_eq!(c.pending_len(), 0);
    }

    #[test]
    fn inserted_counts_are_credited_once() {
        let mut s = server(2, &[1, 2, 3], &[1, 2, 3]);
        let req = |agent, rid| SyncRequest {
            agent,
            known_version: 0,
            observations: vec![ids(&[1, 2, 3])],
            request_id: rid,
        };
        let a = s.handle_sync_credited(&req(0, 0)).unwrap();
        let b = s.handle_sync_credited(&req(1, 0)).unwrap();
        assert_eq!(a.inserted.counts3(), [3, 3, 1]);
        assert_eq!(b.inserted.counts3(), [0, 0, 0]);
        assert_eq!(b.delta.records.len(), 7);
    }

    #[test]
    fn pending_survives_until_ack() {
        let mut s = server(1, &[0, 1, 2], &[0, 1, 2]);
        let mut c = ClientDb::new(0);
        c.push_observation(set(&[0]), 0);
        let r = c.make_request();
        c.push_observation(set(&[1]), 1);
        let d = s.handle_sync(&r).unwrap();
        c.apply_delta(&d).unwrap();
        assert_eq!(c.pending().len(), 1);
        assert_eq!(c.pending()[0].1, 1);
    }

    #[test]
    fn gap_is_rejected() {
        let mut s = server(2, &[0, 1, 2], &[0, 1, 2]);
        s.handle_sync(&SyncRequest {
            agent: 1,
            known_version: 0,
            observations: vec![ids(&[0, 1])],
            request_id: 0,
        })
        .unwrap();
        let full = s
            .handle_sync(&SyncRequest {
                agent: 1,
                known_version: 0,
                observations: vec![],
                request_id: 1,
            })
            .unwrap();
        let mut c = ClientDb::new(0);
        let skipped = SyncDelta {
            records: full.records[1..].to_vec(),
            new_version: full.new_version,
            complete: false,
        };
        assert!(matches!(
            c.apply_delta(&skipped),
            Err(SyncError::VersionGap { expected: 0, got: 2 })
        ));
        assert_eq!(c.known_version(), 0);
        let empty = SyncDelta {
            records: vec![],
            new_version: 0,
            complete: false,
        };
        c.apply_delta(&empty).unwrap();
        c.apply_delta(&full).unwrap();
        assert!(c.local().same_cells(s.complex()));
    }
}
