//! Place landmarks over a 200x200 arena by filtration over radii, verify
//! coverage at the sensor radius, then destroy a fraction of them.

use lcx::curriculum::{sample_obstacles, CurriculumConfig};
use lcx::placement::{coverage_check, destroy_landmarks, place_landmarks_lpa, PlacementConfig};
use lcx::rng::seeded;
use lcx::world::{World, WorldConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = WorldConfig::default();
    let obstacles = sample_obstacles(6, &CurriculumConfig::default(), &cfg, &mut seeded(11))?;
    let mut world = World::new(cfg.clone(), obstacles)?;
    println!("occupancy {:.3}", world.occupancy_percentage());

    let placement = PlacementConfig::default();
    let t = std::time::Instant::now();
    let mut landmarks = place_landmarks_lpa(&world, &placement)?;
    println!(
        "placed {} landmarks with radii {:?} in {:.2?}",
        landmarks.len(),
        placement.radii,
        t.elapsed()
    );
    let gaps = coverage_check(&world, &landmarks, cfg.sensor_radius);
    println!("uncovered free cells at r = {}: {}", cfg.sensor_radius, gaps.len());

    let (remaining, destroyed) = destroy_landmarks(&mut landmarks, 0.2, &mut seeded(12))?;
    println!("p_l = 0.2: {} remaining, {} destroyed", remaining.len(), destroyed.len());
    let holes = coverage_check(&world, &landmarks, cfg.sensor_radius);
    println!("uncovered after destruction: {}", holes.len());
    world.set_landmarks(landmarks);
    Ok(())
}
