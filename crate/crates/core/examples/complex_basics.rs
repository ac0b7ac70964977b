//! Build a landmark complex from co-visibility observations, inspect its
//! skeleton and hop paths, and round-trip the insertion log.

use lcx::complex::{LandmarkComplex, LandmarkId, DEFAULT_MAX_DIM};
use lcx::reward::RewardWeights;

fn ids(v: &[u32]) -> Vec<LandmarkId> {
    v.iter().map(|&i| LandmarkId(i)).collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut complex = LandmarkComplex::new(DEFAULT_MAX_DIM);

    // One observation of three landmarks adds 3 vertices, 3 edges, 1 triangle.
    let delta = complex.insert_observation(ids(&[1, 2, 3]), 0, 0)?;
    let counts = delta.counts3();
    println!("first observation adds {counts:?}");
    println!("discovery reward {}", RewardWeights::default().discovery(counts));

    // Repeats add nothing; overlapping sets only add the new faces.
    assert!(complex.insert_observation(ids(&[1, 2]), 1, 1)?.is_empty());
    complex.insert_observation(ids(&[3, 4]), 1, 2)?;
    complex.insert_observation(ids(&[4, 5, 6, 7]), 2, 3)?;
    println!("counts {:?} at version {}", complex.counts3(), complex.version());

    let skeleton = complex.skeleton();
    println!(
        "skeleton: {} nodes, {} edges, {} component(s)",
        skeleton.node_count(),
        skeleton.edge_count(),
        skeleton.connected_components().len()
    );
    let path = complex.hop_path(LandmarkId(1), LandmarkId(7))?;
    println!("hop path 1 -> 7: {path:?}");

    // Records after version 7, as a client at that version would receive them.
    for rec in complex.diff_since(7)? {
        println!("v{} {:?} from agent {}", rec.version, rec.simplex.vertices(), rec.source_agent);
    }

    let mut ndjson = Vec::new();
    complex.write_log(&mut ndjson)?;
    let back = LandmarkComplex::read_log(DEFAULT_MAX_DIM, ndjson.as_slice())?;
    assert!(back.same_cells(&complex));
    println!("log: {} lines, replay matches", ndjson.split(|&b| b == b'\n').filter(|l| !l.is_empty()).count());
    Ok(())
}
