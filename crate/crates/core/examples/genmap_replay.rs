//! Generate a map at a target occupancy, save it as a world file, and
//! replay an episode on it with both built-in policies.

use lcx::bench::maps::{genmap, replay, ObstacleSpec};
use lcx::curriculum::CurriculumConfig;
use lcx::env::EnvSettings;
use lcx::frontier::{FrontierPolicy, RandomPolicy};
use lcx::world::WorldFile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let settings = EnvSettings {
        max_steps: 3000,
        ..EnvSettings::default()
    };
    let file = genmap(&settings, &CurriculumConfig::default(), ObstacleSpec::Occupancy(0.227), 0.1, 42)?;
    let path = std::env::temp_dir().join("lcx_world_42.json");
    file.save(&path)?;
    let loaded = WorldFile::load(&path)?;
    assert_eq!(loaded, file);
    println!(
        "{} obstacles, occupancy {:.3}, {} landmarks ({} destroyed) -> {}",
        loaded.obstacles.len(),
        loaded.to_world(&settings.world)?.occupancy_percentage(),
        loaded.landmarks.len(),
        loaded.landmarks.iter().filter(|l| l.destroyed).count(),
        path.display()
    );

    for (name, log) in [
        ("frontier", replay(&settings, &loaded, &mut FrontierPolicy::default(), 1)?),
        ("random", replay(&settings, &loaded, &mut RandomPolicy::new(1), 1)?),
    ] {
        let last = log.last().expect("rows");
        println!(
            "{name:>8}: {} observations, c = ({}, {}, {}) of {} intact landmarks",
            last.obs_count, last.c0, last.c1, last.c2, log.remaining
        );
    }
    Ok(())
}
