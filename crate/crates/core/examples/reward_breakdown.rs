//! Score one step by hand: discovery, communication, collision, time and
//! completion terms, per agent and for the group.

use lcx::reward::{step_rewards_from_counts, CompletionLatch, RewardWeights};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let w = RewardWeights::default();
    println!("{w:?}");

    // Agent 0 discovered a triangle with its faces; agent 1 synced but found
    // nothing new; agent 2 collided.
    let counts = [[3, 3, 1], [0, 0, 0], [0, 0, 0]];
    let communicated = [true, true, false];
    let collided = [false, false, true];

    let mut latch = CompletionLatch::default();
    for (step, complete) in [(0, false), (1, true), (2, true)] {
        let fire = latch.update(complete);
        let r = step_rewards_from_counts(&counts, &communicated, &collided, fire, &w)?;
        println!("step {step}: completion={fire}");
        for (i, a) in r.agents.iter().enumerate() {
            println!(
                "  agent {i}: discovery {:>5} comm {:>4} collision {:>4} total {:>6}",
                a.discovery, a.comm, a.collision, a.total
            );
        }
        println!("  time {} completion {} group {}", r.time, r.completion, r.group);
    }
    Ok(())
}
