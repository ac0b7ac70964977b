use std::collections::BTreeSet;

use lcx::complex::{LandmarkComplex, LandmarkId, DEFAULT_MAX_DIM};
use lcx::sync::{ClientDb, ServerState};
use proptest::prelude::*;

const AGENTS: usize = 4;
const IDS: u32 = 12;

#[derive(Clone, Debug)]
enum Op {
    Push(usize, BTreeSet<u32>),
    Sync(usize),
    /// Sends the request but loses the reply; the client retries later.
    LostReply(usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (0..AGENTS, prop::collection::btree_set(0..IDS, 1..5)).prop_map(|(a, s)| Op::Push(a, s)),
        2 => (0..AGENTS).prop_map(Op::Sync),
        1 => (0..AGENTS).prop_map(Op::LostReply),
    ]
}

fn ids(s: &BTreeSet<u32>) -> BTreeSet<LandmarkId> {
    s.iter().map(|&i| LandmarkId(i)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn quiescent_clients_equal_server(ops in prop::collection::vec(op(), 0..80)) {
        let all: BTreeSet<LandmarkId> = (0..IDS).map(LandmarkId).collect();
        let mut server = ServerState::new(AGENTS, all.clone(), all);
        let mut clients: Vec<ClientDb> = (0..AGENTS).map(ClientDb::new).collect();
        let mut sent = [0u64; AGENTS];
        let mut pushed: Vec<BTreeSet<u32>> = Vec::new();
        for (k, op) in ops.iter().enumerate() {
            match op {
                Op::Push(a, s) => {
                    clients[*a].push_observation(ids(s), k as u64);
                    pushed.push(s.clone());
                }
                Op::Sync(a) => {
                    let req = clients[*a].make_request();
                    let delta = server.handle_sync(&req).unwrap();
                    sent[*a] += 1;
                    clients[*a].apply_delta(&delta).unwrap();
                    prop_assert!(clients[*a].known_version() <= server.version());
                }
                Op::LostReply(a) => {
                    let req = clients[*a].make_request();
                    server.handle_sync(&req).unwrap();
                    sent[*a] += 1;
                }
            }
        }
        // A lost reply is retried verbatim first, so observations queued
        // after it need one more round; the last round only pulls.
        for round in 0..3 {
            for (a, c) in clients.iter_mut().enumerate() {
                let req = c.make_request();
                if round == 2 {
                    prop_assert!(req.observations.is_empty());
                }
                let delta = server.handle_sync(&req).unwrap();
                sent[a] += 1;
                c.apply_delta(&delta).unwrap();
            }
        }
        for c in &clients {
            prop_assert!(c.local().same_cells(server.complex()));
            prop_assert_eq!(c.pending_len(), 0);
        }
        prop_assert_eq!(server.comm_counts(), &sent[..]);

        // The server complex is the closure of everything pushed.
        let mut union = LandmarkComplex::new(DEFAULT_MAX_DIM);
        for s in &pushed {
            union.insert_observation(ids(s), 0, 0).unwrap();
        }
        prop_assert!(union.same_cells(server.complex()));
    }
}
