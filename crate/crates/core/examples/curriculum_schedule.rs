//! Walk the three-stage curriculum and sample a few episode configs.

use lcx::curriculum::{CurriculumConfig, CurriculumState};
use lcx::world::WorldConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = CurriculumConfig {
        stage_episodes: Some((3, 50)),
        ..CurriculumConfig::default()
    };
    let mut state = CurriculumState::new(config, WorldConfig::default(), 7)?;
    println!("episode,stage,n_obstacles,p_l");
    for _ in 0..90 {
        let row = state.next_row();
        if row.episode < 6 || row.episode % 5 == 3 {
            println!("{},{},{},{:.2}", row.episode, row.stage, row.n_obstacles, row.p_l);
        }
    }

    // Configs are pure functions of (seed, episode): sampling is repeatable.
    let mut a = CurriculumState::new(state.config.clone(), WorldConfig::default(), 7)?;
    let mut b = a.clone();
    for _ in 0..60 {
        a.next_row();
        b.next_row();
    }
    let (x, y) = (a.next_episode_config()?, b.next_episode_config()?);
    assert_eq!(x, y);
    println!(
        "episode {}: stage {}, {} obstacles, p_l {:.2}, world seed {:#x}",
        x.episode_index, x.stage, x.obstacles.len(), x.p_l, x.world_seed
    );
    Ok(())
}
