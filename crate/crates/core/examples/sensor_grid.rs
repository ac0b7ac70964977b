//! Place agents around an obstacle and print one agent's sensor grid.
//!
//! Legend: `A` other agent, `?` unobserved landmark, `o` observed landmark,
//! `#` obstacle, `.` empty cell in range, blank outside the sensor disk.

use std::collections::HashSet;

use lcx::complex::LandmarkId;
use lcx::world::{Channel, World, WorldConfig};
use lcx::{AgentState, LandmarkInstance, Rect};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = WorldConfig {
        width: 60.0,
        height: 60.0,
        ..WorldConfig::default()
    };
    let mut world = World::new(cfg.clone(), vec![Rect::new(30.0, 20.0, 4.0, 20.0)])?;
    world.set_landmarks(vec![
        LandmarkInstance::new(0, 20.0, 30.0),
        LandmarkInstance::new(1, 26.0, 38.0),
        // Behind the obstacle: occluded.
        LandmarkInstance::new(2, 38.0, 30.0),
        // Out of range.
        LandmarkInstance::new(3, 5.0, 5.0),
    ]);
    world.agents = vec![AgentState::at(25.0, 30.0), AgentState::at(22.0, 24.0)];

    let observed: HashSet<LandmarkId> = [LandmarkId(0)].into();
    let reading = world.sense(0, &observed)?;
    println!("visible landmarks: {:?}", reading.visible_ids);
    println!("grid {}x{}x4, q = {} m", reading.size(), reading.size(), cfg.sensor_resolution);
    // Row 0 is the most negative y; print with +y up.
    for r in (0..reading.size()).rev() {
        let line: String = (0..reading.size())
            .map(|c| {
                if !reading.in_disk(r, c) {
                    ' '
                } else if reading.get(r, c, Channel::OtherAgent) {
                    'A'
                } else if reading.get(r, c, Channel::UnobservedLandmark) {
                    '?'
                } else if reading.get(r, c, Channel::ObservedLandmark) {
                    'o'
                } else if reading.get(r, c, Channel::Obstacle) {
                    '#'
                } else {
                    '.'
                }
            })
            .collect();
        println!("{line}");
    }
    Ok(())
}
