//! Run four frontier agents on an obstacle-free 100x100 map until every
//! intact landmark is in the shared complex.
//!
//! Pass a seed as the first argument to try other maps.

use lcx::curriculum::EpisodeConfig;
use lcx::env::{EnvSettings, Episode};
use lcx::frontier::FrontierPolicy;
use lcx::rng::derive_seed;
use lcx::world::WorldConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map_or(Ok(1), |s| s.parse())?;
    let settings = EnvSettings {
        world: WorldConfig {
            width: 100.0,
            height: 100.0,
            ..WorldConfig::default()
        },
        ..EnvSettings::default()
    };
    let cfg = EpisodeConfig::fixed(vec![], 0.0, derive_seed(seed, 0), derive_seed(seed, 1));
    let episode = Episode::new(settings, &cfg)?;
    let total = episode.world().landmarks().len();
    println!("{total} landmarks, {} agents", episode.world().agents.len());

    let t = std::time::Instant::now();
    let log = episode.run(&mut FrontierPolicy::default())?;
    for r in log.rows.iter().step_by(500).chain(log.last()) {
        println!(
            "step {:>5}  obs {:>5}  c = ({:>3}, {:>3}, {:>3})  requests {:>4}  collisions {}",
            r.step, r.obs_count, r.c0, r.c1, r.c2, r.comm_total, r.collisions
        );
    }
    println!(
        "done={} truncated={} after {} steps in {:.2?}",
        log.done,
        log.truncated,
        log.rows.len(),
        t.elapsed()
    );
    Ok(())
}
