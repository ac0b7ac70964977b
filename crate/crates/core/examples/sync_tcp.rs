//! Two clients push observations to a TCP sync server and converge on the
//! server's complex.

use std::collections::BTreeSet;

use lcx::complex::LandmarkId;
use lcx::sync::wire::{SyncClient, SyncServer};
use lcx::sync::{ClientDb, ServerState};

fn set(v: &[u32]) -> BTreeSet<LandmarkId> {
    v.iter().map(|&i| LandmarkId(i)).collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let remaining: BTreeSet<LandmarkId> = (0..6).map(LandmarkId).collect();
    let server = SyncServer::spawn("127.0.0.1:0", ServerState::new(2, remaining.clone(), remaining))?;
    println!("server on {}", server.local_addr());

    let mut dbs = [ClientDb::new(0), ClientDb::new(1)];
    let mut conns = [SyncClient::connect(server.local_addr())?, SyncClient::connect(server.local_addr())?];

    dbs[0].push_observation(set(&[0, 1, 2]), 0);
    dbs[1].push_observation(set(&[2, 3]), 0);
    dbs[1].push_observation(set(&[3, 4, 5]), 1);

    // Each client syncs twice: once to push, once to pull the other's work.
    for round in 0..2 {
        for (db, conn) in dbs.iter_mut().zip(conns.iter_mut()) {
            let req = db.make_request();
            let delta = conn.sync(&req)?;
            let new = db.apply_delta(&delta)?;
            println!(
                "round {round} agent {}: sent {} observation(s), got {} record(s) {:?}, complete={}",
                req.agent,
                req.observations.len(),
                delta.records.len(),
                new.counts3(),
                delta.complete
            );
        }
    }

    let state = server.state();
    let state = state.lock().unwrap();
    for db in &dbs {
        assert!(db.local().same_cells(state.complex()));
    }
    println!(
        "all clients match the server: {:?}; requests per agent {:?}",
        state.complex().counts3(),
        state.comm_counts()
    );
    Ok(())
}
